//! Expansion of an [`ActionSequence`] into per-robot wheel command queues.
//!
//! Expansion is open loop: each step is compiled against the pose predicted
//! by the commands before it. Tracks are interleaved in time order (the
//! track with the earliest free time goes next, ties in track order) so that
//! a `pair_orient` step sees where its partner will be. A `pair_orient` is a
//! barrier: it waits until the partner's track has no earlier steps left (or
//! reaches the matching `pair_orient`, which is merged), both robots idle
//! until the later of the two is free, then rotate together. With `parallel = false` each track starts only after everything
//! before it has finished.

use std::collections::BTreeMap;

use serde::Serialize;

use super::{World, WorldError};
use crate::geometry::{self, GridCoord, KinematicConfig, MetaAction, MotorCommand, Pose, SpeedLevel, Wheel};
use crate::protocol::{ActionSequence, ActionStep, Pivot};

const PAD_EPS_MS: f64 = 1e-9;

/// Time window of one step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepSpan {
    /// Owner of the track the step belongs to.
    pub robot: String,
    pub step: usize,
    /// Robots moving during the step (the owner, plus the partner for pairs).
    pub actors: Vec<String>,
    pub start_ms: f64,
    pub end_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DispatchPlan {
    pub commands: BTreeMap<String, Vec<MotorCommand>>,
    pub spans: Vec<StepSpan>,
    /// Poses after the whole plan, for every involved robot.
    pub predicted: BTreeMap<String, Pose>,
    pub duration_ms: f64,
}

impl DispatchPlan {
    /// Queue every robot's commands. All queues start at the current tick.
    pub fn enqueue_into(&self, world: &mut World) -> Result<(), WorldError> {
        for (id, cmds) in &self.commands {
            world.enqueue(id, cmds.iter().copied())?;
        }
        Ok(())
    }

    /// The step moving `robot` at `t_ms`, if any.
    pub fn span_at(&self, robot: &str, t_ms: f64) -> Option<&StepSpan> {
        self.spans.iter().find(|s| s.actors.iter().any(|a| a == robot) && s.start_ms <= t_ms && t_ms < s.end_ms)
    }
}

/// Meta-action for a single-robot step. `PairOrient` keeps the partner id;
/// [`expand_sequence`] resolves it.
pub fn step_to_meta(step: &ActionStep, cfg: &KinematicConfig) -> Result<MetaAction, WorldError> {
    let speed = |s: u8| SpeedLevel::new(s as i64);
    Ok(match step {
        ActionStep::Translate { target, speed: s } => {
            let cell = GridCoord::checked(target[0], target[1], cfg)?;
            MetaAction::Translate { target: geometry::grid_to_world(cell, cfg)?, speed: speed(*s)? }
        }
        ActionStep::Rotate { angle, pivot: Pivot::Center, speed: s } => {
            MetaAction::RotateA { target_heading: geometry::normalize_deg(*angle), speed: speed(*s)? }
        }
        ActionStep::Rotate { angle, pivot, speed: s } => MetaAction::RotateB {
            pivot: if *pivot == Pivot::Left { Wheel::Left } else { Wheel::Right },
            angle: *angle,
            speed: speed(*s)?,
        },
        ActionStep::PairOrient { mode, partner, speed: s } => {
            MetaAction::PairOrient { mode: *mode, partner: partner.clone(), speed: speed(*s)? }
        }
        ActionStep::Wait { duration_ms } => MetaAction::Wait { duration_ms: *duration_ms as f64 },
    })
}

struct Lane {
    pose: Pose,
    cursor: f64,
    cmds: Vec<MotorCommand>,
}

impl Lane {
    fn pad_to(&mut self, t: f64) {
        if t - self.cursor > PAD_EPS_MS {
            self.cmds.push(MotorCommand { left: 0, right: 0, duration_ms: t - self.cursor });
            self.cursor = t;
        }
    }

    fn push(&mut self, cmds: Vec<MotorCommand>, cfg: &KinematicConfig) {
        self.pose = geometry::apply_all(self.pose, &cmds, cfg);
        self.cursor += geometry::total_duration(&cmds);
        self.cmds.extend(cmds);
    }
}

/// A pair step may run once its partner has no earlier steps left, or the
/// partner's next step is the matching pair step.
fn pair_ready(seq: &ActionSequence, next: &[usize], i: usize) -> bool {
    let track = &seq.robots[i];
    let Some(ActionStep::PairOrient { partner, .. }) = track.actions.get(next[i]) else { return true };
    match seq.robots.iter().position(|t| &t.id == partner) {
        None => true,
        Some(pi) => match seq.robots[pi].actions.get(next[pi]) {
            None => true,
            Some(ActionStep::PairOrient { partner: p, .. }) => *p == track.id,
            Some(_) => false,
        },
    }
}

/// Compile a sequence against the world's current poses.
pub fn expand_sequence(seq: &ActionSequence, world: &World) -> Result<DispatchPlan, WorldError> {
    let cfg = world.cfg;
    let mut lanes: BTreeMap<String, Lane> = BTreeMap::new();
    let lane = |id: &str, lanes: &mut BTreeMap<String, Lane>| -> Result<(), WorldError> {
        if !lanes.contains_key(id) {
            let pose = world.pose(id).ok_or_else(|| WorldError::UnknownRobot(id.to_string()))?;
            lanes.insert(id.to_string(), Lane { pose, cursor: 0.0, cmds: Vec::new() });
        }
        Ok(())
    };
    for t in &seq.robots {
        lane(&t.id, &mut lanes)?;
        for a in &t.actions {
            if let ActionStep::PairOrient { partner, .. } = a {
                lane(partner, &mut lanes)?;
            }
        }
    }

    let mut next = vec![0usize; seq.robots.len()];
    let mut spans = Vec::new();
    let mut serial_track: usize = 0;
    loop {
        let pick = if seq.parallel {
            let pending: Vec<usize> = (0..seq.robots.len()).filter(|&i| next[i] < seq.robots[i].actions.len()).collect();
            let ready: Vec<usize> = pending.iter().copied().filter(|&i| pair_ready(seq, &next, i)).collect();
            // a cycle of pairs waiting on each other falls back to time order
            let pool = if ready.is_empty() { pending } else { ready };
            pool.into_iter().min_by(|&a, &b| lanes[&seq.robots[a].id].cursor.total_cmp(&lanes[&seq.robots[b].id].cursor))
        } else {
            while serial_track < seq.robots.len() && next[serial_track] >= seq.robots[serial_track].actions.len() {
                serial_track += 1;
            }
            if serial_track < seq.robots.len() && next[serial_track] == 0 {
                let start = lanes.values().map(|l| l.cursor).fold(0.0, f64::max);
                lanes.get_mut(&seq.robots[serial_track].id).expect("lane").pad_to(start);
            }
            (serial_track < seq.robots.len()).then_some(serial_track)
        };
        let Some(ti) = pick else { break };
        let track = &seq.robots[ti];
        let si = next[ti];
        next[ti] += 1;
        let step = &track.actions[si];
        match step_to_meta(step, &cfg)? {
            MetaAction::PairOrient { mode, partner, speed } => {
                // the partner's own matching pair step is the same rendezvous
                if let Some(pi) = seq.robots.iter().position(|t| t.id == partner) {
                    if matches!(seq.robots[pi].actions.get(next[pi]), Some(ActionStep::PairOrient { partner: p, .. }) if *p == track.id) {
                        next[pi] += 1;
                    }
                }
                let t0 = lanes[&track.id].cursor.max(lanes[&partner].cursor);
                for id in [&track.id, &partner] {
                    lanes.get_mut(id).expect("lane").pad_to(t0);
                }
                let (ca, cb) = geometry::compile_pair(mode, lanes[&track.id].pose, lanes[&partner].pose, speed, &cfg);
                lanes.get_mut(&track.id).expect("lane").push(ca, &cfg);
                lanes.get_mut(&partner).expect("lane").push(cb, &cfg);
                let end = lanes[&track.id].cursor.max(lanes[&partner].cursor);
                spans.push(StepSpan {
                    robot: track.id.clone(),
                    step: si,
                    actors: vec![track.id.clone(), partner.clone()],
                    start_ms: t0,
                    end_ms: end,
                });
            }
            meta => {
                let l = lanes.get_mut(&track.id).expect("lane");
                let cmds = geometry::compile(&meta, l.pose, None, &cfg)?;
                let t0 = l.cursor;
                l.push(cmds, &cfg);
                spans.push(StepSpan {
                    robot: track.id.clone(),
                    step: si,
                    actors: vec![track.id.clone()],
                    start_ms: t0,
                    end_ms: l.cursor,
                });
            }
        }
    }
    let duration_ms = lanes.values().map(|l| l.cursor).fold(0.0, f64::max);
    let predicted = lanes.iter().map(|(k, l)| (k.clone(), l.pose)).collect();
    let commands = lanes.into_iter().filter(|(_, l)| !l.cmds.is_empty()).map(|(k, l)| (k, l.cmds)).collect();
    Ok(DispatchPlan { commands, spans, predicted, duration_ms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PairMode;
    use crate::protocol::RobotTrack;

    fn world() -> World {
        let mut w = World::new(KinematicConfig::default(), 0);
        w.spawn_robot("a", GridCoord::new(2, 2), 0.0).unwrap();
        w.spawn_robot("b", GridCoord::new(8, 2), 90.0).unwrap();
        w
    }

    #[test]
    fn pair_waits_for_partner() {
        let w = world();
        let seq = ActionSequence::new(vec![
            RobotTrack::new(
                "a",
                vec![ActionStep::PairOrient { mode: PairMode::FaceToFace, partner: "b".into(), speed: 2 }],
            ),
            RobotTrack::new("b", vec![ActionStep::translate(8, 6, 2)]),
        ]);
        let plan = expand_sequence(&seq, &w).unwrap();
        // a's pair step waits for b's move
        let pair = plan.spans.iter().find(|s| s.actors.len() == 2).unwrap();
        let mv = plan.spans.iter().find(|s| s.robot == "b").unwrap();
        assert!(pair.start_ms >= mv.end_ms - 1e-9);
        let mut sim = w.clone();
        plan.enqueue_into(&mut sim).unwrap();
        sim.run_until_quiescent(crate::world::DEFAULT_TICK_MS, 60_000.0, |_| {});
        let (pa, pb) = (sim.pose("a").unwrap(), sim.pose("b").unwrap());
        let (ha, hb) = geometry::pair_headings(PairMode::FaceToFace, pa.position(), pb.position());
        assert!(geometry::angle_between(pa.heading, ha) < 0.5);
        assert!(geometry::angle_between(pb.heading, hb) < 0.5);
    }

    #[test]
    fn mirrored_pair_steps_merge() {
        let w = world();
        let pair = |p: &str| ActionStep::PairOrient { mode: PairMode::BackToBack, partner: p.into(), speed: 1 };
        let seq = ActionSequence::new(vec![RobotTrack::new("a", vec![pair("b")]), RobotTrack::new("b", vec![pair("a")])]);
        let plan = expand_sequence(&seq, &w).unwrap();
        assert_eq!(plan.spans.len(), 1);
    }

    #[test]
    fn serial_tracks_do_not_overlap() {
        let w = world();
        let mut seq = ActionSequence::new(vec![
            RobotTrack::new("a", vec![ActionStep::translate(2, 5, 2)]),
            RobotTrack::new("b", vec![ActionStep::translate(8, 5, 2)]),
        ]);
        seq.parallel = false;
        let plan = expand_sequence(&seq, &w).unwrap();
        assert!(plan.spans[1].start_ms >= plan.spans[0].end_ms - 1e-9);
        let par = expand_sequence(&ActionSequence { parallel: true, ..seq }, &w).unwrap();
        assert!(par.duration_ms < plan.duration_ms);
    }

    #[test]
    fn unknown_robot_and_bad_target() {
        let w = world();
        let seq = ActionSequence::new(vec![RobotTrack::new("zz", vec![ActionStep::translate(1, 1, 1)])]);
        assert!(matches!(expand_sequence(&seq, &w), Err(WorldError::UnknownRobot(_))));
        let seq = ActionSequence::new(vec![RobotTrack::new("a", vec![ActionStep::translate(30, 1, 1)])]);
        assert!(matches!(expand_sequence(&seq, &w), Err(WorldError::Geometry(_))));
    }
}
