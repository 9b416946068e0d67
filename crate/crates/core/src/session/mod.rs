//! Game sessions: command routing through the agents, dispatch, persistence.

mod io;
mod scenario;
pub mod headless;
pub mod server;
pub mod telemetry;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{
    apprentice_feedback, controller_turn, coordinator_turn, Actor, AgentError, ControllerTurn, Directive, GameContext,
    Gateway, GatewayError, Payload, Transcript, TranscriptEntry,
};
use crate::behavior::policy::classify_feedback;
use crate::behavior::scene::formation_sequence;
use crate::behavior::{Addon, BehaviorError};
use crate::geometry::{angle_between, world_to_grid, Pose};
use crate::protocol::{ActionSequence, ActionStep, RobotTrack};
use crate::world::{expand_sequence, World, WorldError, WorldEvent, DEFAULT_TICK_MS};

pub use io::{Driver, LogDriver, LoggedCommand, PoseProvider, PoseSource, SimDriver, StampedPose, TeeDriver};
pub use scenario::{Scenario, ScenarioIssue};

/// World snapshots are published every this many ticks during motion.
pub const SNAPSHOT_EVERY_TICKS: usize = 2;
/// Simulated time allowed beyond a plan's predicted duration.
const SETTLE_SLACK_MS: f64 = 2000.0;
/// Speed used when rewinding robots for a feedback revision.
const REWIND_SPEED: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Lobby,
    Running,
    Ended,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SessionError {
    #[error("invalid scenario: {}", .0.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("; "))]
    Scenario(Vec<ScenarioIssue>),
    #[error("session is {0:?}; commands need a running session")]
    Phase(Phase),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Behavior(#[from] BehaviorError),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<GatewayError> for SessionError {
    fn from(e: GatewayError) -> Self {
        SessionError::Agent(AgentError::Gateway(e))
    }
}

/// Something observers may want to show.
pub enum Update<'a> {
    Tick(&'a World),
    Entry(&'a TranscriptEntry),
}

pub type Observer = Arc<dyn Fn(Update<'_>) + Send + Sync>;

#[derive(Default)]
pub struct SessionOptions {
    pub id: Option<String>,
    /// Also write the transcript here, flushed per entry.
    pub transcript_path: Option<PathBuf>,
    /// Defaults to [`SimDriver`].
    pub driver: Option<Box<dyn Driver>>,
    pub pose_source: PoseSource,
    pub observer: Option<Observer>,
    /// Sleep one tick of wall time per simulated tick.
    pub realtime: bool,
    /// Defaults to [`DEFAULT_TICK_MS`].
    pub tick_ms: Option<f64>,
}

/// What one command produced.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct TurnResult {
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ruling: Option<String>,
    pub directives: Vec<Directive>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub narration: Option<String>,
    pub sequences: Vec<ActionSequence>,
    pub events: Vec<WorldEvent>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fallback: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub game_over: bool,
    pub clock_ms: f64,
}

#[derive(Debug, Clone)]
struct Dispatched {
    sequence: ActionSequence,
    start: BTreeMap<String, Pose>,
}

pub struct Session {
    pub id: String,
    pub scenario: Scenario,
    pub world: World,
    pub ctx: GameContext,
    pub transcript: Transcript,
    pub phase: Phase,
    pub poses: PoseProvider,
    gateway: Box<dyn Gateway>,
    driver: Box<dyn Driver>,
    observer: Option<Observer>,
    published: usize,
    last_dispatch: Option<Dispatched>,
    tick_ms: f64,
    realtime: bool,
}

impl Session {
    /// Build the world, then run the Coordinator's opening ruling.
    pub fn create(scenario: Scenario, gateway: Box<dyn Gateway>, opts: SessionOptions) -> Result<Self, SessionError> {
        let world = scenario.validate().map_err(SessionError::Scenario)?;
        let mut ctx = GameContext::new(&scenario.name, &scenario.rules_text);
        ctx.roles = scenario.roles();
        ctx.board_mapping = scenario.board();
        ctx.addons = scenario.addons.clone();
        ctx.ownership = scenario.robot_ownership.clone();
        let transcript = match &opts.transcript_path {
            Some(p) => Transcript::with_file(p).map_err(|e| SessionError::Io(format!("{}: {e}", p.display())))?,
            None => Transcript::new(),
        };
        let mut s = Session {
            id: opts.id.unwrap_or_else(|| scenario.name.clone()),
            scenario,
            world,
            ctx,
            transcript,
            phase: Phase::Lobby,
            poses: PoseProvider::new(opts.pose_source),
            gateway,
            driver: opts.driver.unwrap_or_else(|| Box::new(SimDriver)),
            observer: opts.observer,
            published: 0,
            last_dispatch: None,
            tick_ms: opts.tick_ms.unwrap_or(DEFAULT_TICK_MS),
            realtime: opts.realtime,
        };
        s.tick_snapshot();
        let grid_n = s.world.cfg.grid_n;
        coordinator_turn(&mut s.ctx, s.gateway.as_ref(), &mut s.transcript, s.world.clock_ms, None, grid_n)?;
        s.phase = Phase::Running;
        s.publish_entries();
        Ok(s)
    }

    fn publish_entries(&mut self) {
        if let Some(obs) = &self.observer {
            for e in &self.transcript.entries()[self.published..] {
                obs(Update::Entry(e));
            }
        }
        self.published = self.transcript.len();
    }

    fn tick_snapshot(&self) {
        if let Some(obs) = &self.observer {
            obs(Update::Tick(&self.world));
        }
    }

    /// Run one player command through the full pipeline. Pipeline failures
    /// are recorded and reported in the result; only phase errors are `Err`.
    pub fn submit_command(&mut self, text: &str) -> Result<TurnResult, SessionError> {
        if self.phase != Phase::Running {
            return Err(SessionError::Phase(self.phase));
        }
        self.transcript.text(Actor::User, "command", text, self.world.clock_ms);
        self.publish_entries();
        let mut res = TurnResult::default();
        if let Err(e) = self.run_turn(text, &mut res) {
            tracing::warn!(session = %self.id, error = %e, "turn failed");
            self.transcript.text(Actor::System, "turn_failed", e.to_string(), self.world.clock_ms);
            res.error = Some(e.to_string());
        } else {
            res.ok = true;
        }
        if res.game_over {
            self.phase = Phase::Ended;
            self.transcript.text(Actor::System, "game_over", "", self.world.clock_ms);
        }
        res.clock_ms = self.world.clock_ms;
        self.publish_entries();
        Ok(res)
    }

    fn is_feedback(&self, text: &str) -> bool {
        self.ctx.has_addon(Addon::Apprentice) && self.last_dispatch.is_some() && classify_feedback(text).is_some()
    }

    fn run_turn(&mut self, text: &str, res: &mut TurnResult) -> Result<(), SessionError> {
        if self.is_feedback(text) {
            return self.feedback_turn(text, res);
        }
        let grid_n = self.world.cfg.grid_n;
        let out = coordinator_turn(&mut self.ctx, self.gateway.as_ref(), &mut self.transcript, self.world.clock_ms, Some(text), grid_n)?;
        self.publish_entries();
        res.ruling = Some(out.ruling);
        res.directives = out.directives.clone();
        res.game_over = out.game_over;
        if !out.directives.is_empty() {
            let ct = controller_turn(
                &mut self.ctx,
                self.gateway.as_ref(),
                &mut self.transcript,
                self.world.clock_ms,
                &self.world,
                &out.directives,
            )?;
            self.execute(ct, res)?;
        }
        Ok(())
    }

    fn feedback_turn(&mut self, text: &str, res: &mut TurnResult) -> Result<(), SessionError> {
        let prior = self.last_dispatch.clone().expect("checked by is_feedback");
        let rewind = rewind_sequence(&self.world, &prior.start)?;
        if !rewind.is_empty() {
            res.events.extend(self.dispatch(Actor::System, "rewind", &rewind)?);
            res.sequences.push(rewind);
        }
        let ct = apprentice_feedback(
            &mut self.ctx,
            self.gateway.as_ref(),
            &mut self.transcript,
            self.world.clock_ms,
            &self.world,
            &prior.sequence,
            text,
        )?;
        self.execute(ct, res)
    }

    fn execute(&mut self, ct: ControllerTurn, res: &mut TurnResult) -> Result<(), SessionError> {
        if !ct.binding.renames.is_empty() {
            ct.binding.apply(&mut self.world, &mut self.ctx.ownership)?;
            let text = serde_json::to_string(&ct.binding.renames).expect("pairs serialize");
            self.transcript.text(Actor::System, "register", text, self.world.clock_ms);
        }
        res.narration = Some(ct.narration);
        res.fallback = ct.fallback;
        if ct.sequence.is_empty() {
            return Ok(());
        }
        let start = self.world.poses();
        res.events.extend(self.dispatch(Actor::Controller, "dispatch", &ct.sequence)?);
        res.sequences.push(ct.sequence.clone());
        self.last_dispatch = Some(Dispatched { sequence: ct.sequence, start });
        Ok(())
    }

    /// Expand, log, send to the driver and run the world to quiescence.
    fn dispatch(&mut self, actor: Actor, kind: &str, seq: &ActionSequence) -> Result<Vec<WorldEvent>, SessionError> {
        let plan = expand_sequence(seq, &self.world)?;
        self.transcript.push(actor, kind, Payload::Sequence(seq.clone()), self.world.clock_ms);
        self.publish_entries();
        self.driver.send(&mut self.world, &plan.commands)?;
        let obs = self.observer.clone();
        let (tick, realtime) = (self.tick_ms, self.realtime);
        let mut n = 0usize;
        self.world.run_until_quiescent(tick, plan.duration_ms + SETTLE_SLACK_MS, |w| {
            n += 1;
            if let Some(o) = &obs {
                if n.is_multiple_of(SNAPSHOT_EVERY_TICKS) || w.is_quiescent() {
                    o(Update::Tick(w));
                }
            }
            if realtime {
                std::thread::sleep(Duration::from_secs_f64(tick / 1000.0));
            }
        });
        Ok(self.world.drain_events())
    }

    /// Accept poses from an external source and record them for replay.
    pub fn push_poses(&mut self, updates: &BTreeMap<String, Pose>) -> Result<(), SessionError> {
        self.poses.push(&mut self.world, updates)?;
        let text = serde_json::to_string(updates).expect("poses serialize");
        self.transcript.text(Actor::System, "poses", text, self.world.clock_ms);
        self.publish_entries();
        self.tick_snapshot();
        Ok(())
    }

    /// Pretty world JSON for artifact files.
    pub fn world_json(&self) -> String {
        serde_json::to_string_pretty(&self.world).expect("world serializes")
    }
}

/// Plan that returns each robot to its pose before the previous dispatch.
fn rewind_sequence(world: &World, start: &BTreeMap<String, Pose>) -> Result<ActionSequence, SessionError> {
    let mut assignments = Vec::new();
    for (id, p) in start {
        let Some(now) = world.pose(id) else { continue };
        if now.position().distance(p.position()) > 1e-6 || angle_between(now.heading, p.heading) > 1e-6 {
            assignments.push((id.clone(), world_to_grid(p.position(), &world.cfg).map_err(WorldError::from)?));
        }
    }
    let mut seq = formation_sequence(world, &assignments, REWIND_SPEED)?;
    for (id, _) in &assignments {
        let spin = ActionStep::spin_to(start[id].heading, REWIND_SPEED);
        match seq.robots.iter_mut().find(|t| &t.id == id) {
            Some(t) => t.actions.push(spin),
            None => seq.robots.push(RobotTrack::new(id.clone(), vec![spin])),
        }
    }
    seq.robots.retain(|t| !t.actions.is_empty());
    Ok(seq)
}

/// Re-apply a transcript's world-changing entries to a fresh world.
pub fn replay(scenario: &Scenario, entries: &[TranscriptEntry], tick_ms: f64) -> Result<World, SessionError> {
    let mut world = scenario.validate().map_err(SessionError::Scenario)?;
    let mut poses = PoseProvider::new(PoseSource::External);
    let bad = |e: &TranscriptEntry, what: &str| SessionError::BadRequest(format!("transcript entry {}: {what}", e.turn));
    for e in entries {
        match (e.actor, e.kind.as_str(), &e.payload) {
            (Actor::System, "register", Payload::Text(t)) => {
                let renames: Vec<(String, String)> = serde_json::from_str(t).map_err(|_| bad(e, "bad register payload"))?;
                for (from, to) in renames {
                    world.rename_robot(&from, &to)?;
                }
            }
            (Actor::System, "poses", Payload::Text(t)) => {
                let updates: BTreeMap<String, Pose> = serde_json::from_str(t).map_err(|_| bad(e, "bad poses payload"))?;
                poses.push(&mut world, &updates)?;
            }
            (Actor::Controller, "dispatch", Payload::Sequence(seq)) | (Actor::System, "rewind", Payload::Sequence(seq)) => {
                let plan = expand_sequence(seq, &world)?;
                plan.enqueue_into(&mut world)?;
                world.run_until_quiescent(tick_ms, plan.duration_ms + SETTLE_SLACK_MS, |_| {});
                world.drain_events();
            }
            _ => {}
        }
    }
    Ok(world)
}
