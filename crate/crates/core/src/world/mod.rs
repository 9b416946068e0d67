//! Deterministic tabletop world.
//!
//! A [`World`] owns robots and table objects and advances them in fixed
//! ticks. Wheel commands are split exactly at tick boundaries, so tick size
//! does not change outcomes for piecewise-constant commands. Robots push
//! objects kinematically (see [`push`]); robots that reach the table edge are
//! clamped and a boundary event is raised.

mod expand;
mod occupancy;
mod path;
pub mod push;
mod svg;
mod validate;

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{self, GeometryError, GridCoord, KinematicConfig, MotorCommand, Point, Pose};

pub use expand::{expand_sequence, step_to_meta, DispatchPlan, StepSpan};
pub use occupancy::{cell_overlap_fraction, occupancy, occupancy_excluding, OccupancyGrid, Polygon};
pub use path::{corners, plan_path, PathError};
pub use svg::render_svg;
pub use validate::{validate_sequence, ValidationReport, Violation, ViolationKind};

/// Default integration step.
pub const DEFAULT_TICK_MS: f64 = 20.0;
/// Default robot footprint side (mm).
pub const DEFAULT_FOOTPRINT_MM: f64 = 32.0;
/// Trail points closer than this to the previous one are not recorded.
const TRAIL_MIN_STEP_MM: f64 = 0.5;
/// Remaining command time below this counts as finished.
const TIME_EPS_MS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("unknown robot `{0}`")]
    UnknownRobot(String),
    #[error("robots `{0}` and `{1}` share cell {2}")]
    SharedCell(String, String, GridCoord),
    #[error("robot `{id}` footprint {footprint} mm exceeds 110% of the cell")]
    FootprintTooLarge { id: String, footprint: f64 },
    #[error("invalid command for `{id}`: {cmd:?}")]
    BadCommand { id: String, cmd: MotorCommand },
    #[error("invalid world spec: {0}")]
    Spec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActiveCommand {
    pub cmd: MotorCommand,
    pub remaining_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub id: String,
    pub pose: Pose,
    pub footprint: f64,
    pub active: Option<ActiveCommand>,
    pub queue: VecDeque<MotorCommand>,
    pub trail: Vec<Point>,
    #[serde(default)]
    pub at_boundary: bool,
    #[serde(default)]
    pub blocked: bool,
}

impl RobotState {
    pub fn new(id: impl Into<String>, pose: Pose) -> Self {
        Self {
            id: id.into(),
            pose,
            footprint: DEFAULT_FOOTPRINT_MM,
            active: None,
            queue: VecDeque::new(),
            trail: vec![pose.position()],
            at_boundary: false,
            blocked: false,
        }
    }

    pub fn is_idle(&self) -> bool {
        self.active.is_none() && self.queue.is_empty()
    }

    /// Contact radius used for pushing and collision checks.
    pub fn radius(&self) -> f64 {
        self.footprint / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Circle { radius: f64 },
    Rect { w: f64, h: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MassClass {
    Light,
    Heavy,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableObject {
    pub id: String,
    pub shape: Shape,
    pub pose: Pose,
    pub mass_class: MassClass,
    /// Objects sharing a group move as one rigid body.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    pub trail: Vec<Point>,
    /// Moved during the last tick.
    #[serde(default)]
    pub moving: bool,
}

impl TableObject {
    pub fn new(id: impl Into<String>, shape: Shape, pose: Pose, mass_class: MassClass) -> Self {
        Self { id: id.into(), shape, pose, mass_class, group: None, trail: vec![pose.position()], moving: false }
    }

    pub fn with_group(mut self, group: impl Into<String>) -> Self {
        self.group = Some(group.into());
        self
    }

    pub fn position(&self) -> Point {
        self.pose.position()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WorldEventKind {
    /// Robot hit the table edge and was clamped.
    Boundary { robot: String },
    /// Robot was stopped by a fixed object or an unmovable heavy object.
    Blocked { robot: String, object: String },
    /// Object started moving under a push.
    Pushed { object: String, by: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldEvent {
    pub clock_ms: f64,
    #[serde(flatten)]
    pub kind: WorldEventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub cfg: KinematicConfig,
    pub robots: BTreeMap<String, RobotState>,
    pub objects: BTreeMap<String, TableObject>,
    pub clock_ms: f64,
    pub rng_seed: u64,
    #[serde(default)]
    pub events: Vec<WorldEvent>,
}

impl World {
    pub fn new(cfg: KinematicConfig, rng_seed: u64) -> Self {
        Self { cfg, robots: BTreeMap::new(), objects: BTreeMap::new(), clock_ms: 0.0, rng_seed, events: Vec::new() }
    }

    pub fn add_robot(&mut self, robot: RobotState) -> Result<(), WorldError> {
        self.cfg.check_point(robot.pose.position())?;
        if robot.footprint > self.cfg.cell() * 1.1 || robot.footprint.is_nan() || robot.footprint <= 0.0 {
            return Err(WorldError::FootprintTooLarge { id: robot.id, footprint: robot.footprint });
        }
        if self.robots.contains_key(&robot.id) || self.objects.contains_key(&robot.id) {
            return Err(WorldError::DuplicateId(robot.id));
        }
        self.robots.insert(robot.id.clone(), robot);
        Ok(())
    }

    /// Add a robot at the centre of `cell`.
    pub fn spawn_robot(&mut self, id: &str, cell: GridCoord, heading: f64) -> Result<(), WorldError> {
        let p = geometry::grid_to_world(cell, &self.cfg)?;
        self.add_robot(RobotState::new(id, Pose::at(p, heading)))
    }

    pub fn add_object(&mut self, obj: TableObject) -> Result<(), WorldError> {
        self.cfg.check_point(obj.position())?;
        if self.robots.contains_key(&obj.id) || self.objects.contains_key(&obj.id) {
            return Err(WorldError::DuplicateId(obj.id));
        }
        self.objects.insert(obj.id.clone(), obj);
        Ok(())
    }

    pub fn robot(&self, id: &str) -> Option<&RobotState> {
        self.robots.get(id)
    }

    pub fn pose(&self, id: &str) -> Option<Pose> {
        self.robots.get(id).map(|r| r.pose)
    }

    /// Grid cell under a robot's centre.
    pub fn robot_cell(&self, id: &str) -> Option<GridCoord> {
        self.robots.get(id).and_then(|r| geometry::world_to_grid(r.pose.position(), &self.cfg).ok())
    }

    pub fn object_cell(&self, id: &str) -> Option<GridCoord> {
        self.objects.get(id).and_then(|o| geometry::world_to_grid(o.position(), &self.cfg).ok())
    }

    pub fn poses(&self) -> BTreeMap<String, Pose> {
        self.robots.iter().map(|(k, r)| (k.clone(), r.pose)).collect()
    }

    /// Append commands to a robot's queue.
    pub fn enqueue(&mut self, id: &str, cmds: impl IntoIterator<Item = MotorCommand>) -> Result<(), WorldError> {
        let robot = self.robots.get_mut(id).ok_or_else(|| WorldError::UnknownRobot(id.to_string()))?;
        for cmd in cmds {
            if !cmd.is_valid() {
                return Err(WorldError::BadCommand { id: id.to_string(), cmd });
            }
            robot.queue.push_back(cmd);
        }
        Ok(())
    }

    pub fn is_quiescent(&self) -> bool {
        self.robots.values().all(RobotState::is_idle)
    }

    /// Robots sharing a grid cell while at rest (soft invariant; reported only).
    pub fn shared_cells(&self) -> Vec<(String, String, GridCoord)> {
        let mut seen: BTreeMap<GridCoord, &str> = BTreeMap::new();
        let mut out = Vec::new();
        for (id, r) in &self.robots {
            if !r.is_idle() {
                continue;
            }
            let Ok(c) = geometry::world_to_grid(r.pose.position(), &self.cfg) else { continue };
            if let Some(prev) = seen.insert(c, id) {
                out.push((prev.to_string(), id.clone(), c));
            }
        }
        out
    }

    /// Re-key a robot (used when an idle robot takes on a new character id).
    pub fn rename_robot(&mut self, from: &str, to: &str) -> Result<(), WorldError> {
        if self.robots.contains_key(to) || self.objects.contains_key(to) {
            return Err(WorldError::DuplicateId(to.to_string()));
        }
        let mut r = self.robots.remove(from).ok_or_else(|| WorldError::UnknownRobot(from.to_string()))?;
        r.id = to.to_string();
        self.robots.insert(to.to_string(), r);
        Ok(())
    }

    /// Advance by `dt_ms`.
    pub fn step(&mut self, dt_ms: f64) {
        if dt_ms.is_nan() || dt_ms <= 0.0 {
            return;
        }
        let cfg = self.cfg;
        let mut before: BTreeMap<String, Pose> = BTreeMap::new();
        for (id, r) in self.robots.iter_mut() {
            before.insert(id.clone(), r.pose);
            let mut left = dt_ms;
            while left > TIME_EPS_MS {
                if r.active.is_none() {
                    match r.queue.pop_front() {
                        Some(cmd) => r.active = Some(ActiveCommand { cmd, remaining_ms: cmd.duration_ms }),
                        None => break,
                    }
                }
                let Some(active) = r.active.as_mut() else { break };
                let run = left.min(active.remaining_ms);
                r.pose = geometry::apply_for(r.pose, &active.cmd, run, &cfg);
                active.remaining_ms -= run;
                left -= run;
                if active.remaining_ms <= TIME_EPS_MS {
                    r.active = None;
                }
            }
        }
        self.clock_ms += dt_ms;
        push::resolve_push(self, &before);
        self.clamp_and_record();
    }

    fn clamp_and_record(&mut self) {
        let size = self.cfg.table_size;
        let clock = self.clock_ms;
        for (id, r) in self.robots.iter_mut() {
            let cx = r.pose.x.clamp(0.0, size);
            let cy = r.pose.y.clamp(0.0, size);
            let clamped = cx != r.pose.x || cy != r.pose.y;
            r.pose.x = cx;
            r.pose.y = cy;
            if clamped && !r.at_boundary {
                self.events.push(WorldEvent { clock_ms: clock, kind: WorldEventKind::Boundary { robot: id.clone() } });
            }
            r.at_boundary = clamped;
            record_trail(&mut r.trail, r.pose.position());
        }
        for o in self.objects.values_mut() {
            o.pose.x = o.pose.x.clamp(0.0, size);
            o.pose.y = o.pose.y.clamp(0.0, size);
            let p = o.position();
            record_trail(&mut o.trail, p);
        }
    }

    /// Step until every queue is empty or `max_ms` of simulated time passed.
    /// `on_tick` sees the world after each tick. Returns the number of ticks.
    pub fn run_until_quiescent(&mut self, dt_ms: f64, max_ms: f64, mut on_tick: impl FnMut(&World)) -> usize {
        let start = self.clock_ms;
        let mut ticks = 0;
        while !self.is_quiescent() && self.clock_ms - start < max_ms {
            self.step(dt_ms);
            ticks += 1;
            on_tick(self);
        }
        ticks
    }

    pub fn drain_events(&mut self) -> Vec<WorldEvent> {
        std::mem::take(&mut self.events)
    }

    pub fn from_spec(spec: &WorldSpec, cfg: KinematicConfig) -> Result<Self, WorldError> {
        cfg.validate()?;
        let mut w = World::new(cfg, spec.seed);
        for r in &spec.robots {
            let cell = GridCoord::checked(r.cell[0], r.cell[1], &cfg)?;
            let p = geometry::grid_to_world(cell, &cfg)?;
            let mut state = RobotState::new(&r.id, Pose::at(p, r.heading));
            if let Some(f) = r.footprint {
                state.footprint = f;
            }
            w.add_robot(state)?;
        }
        if let Some((a, b, c)) = w.shared_cells().into_iter().next() {
            return Err(WorldError::SharedCell(a, b, c));
        }
        for o in &spec.objects {
            let pos = match (o.cell, o.pos) {
                (Some(c), None) => geometry::grid_to_world(GridCoord::checked(c[0], c[1], &cfg)?, &cfg)?,
                (None, Some(p)) => Point::new(p[0], p[1]),
                _ => return Err(WorldError::Spec(format!("object `{}` needs exactly one of cell or pos", o.id))),
            };
            let mut obj = TableObject::new(&o.id, o.shape, Pose::at(pos, o.heading), o.mass_class);
            obj.group = o.group.clone();
            w.add_object(obj)?;
        }
        Ok(w)
    }
}

fn record_trail(trail: &mut Vec<Point>, p: Point) {
    match trail.last() {
        Some(last) if last.distance(p) < TRAIL_MIN_STEP_MM => {}
        _ => trail.push(p),
    }
}

/// World part of a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldSpec {
    #[serde(default)]
    pub robots: Vec<RobotSpec>,
    #[serde(default)]
    pub objects: Vec<ObjectSpec>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotSpec {
    pub id: String,
    pub cell: [i64; 2],
    #[serde(default)]
    pub heading: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub footprint: Option<f64>,
    /// Game-level label shown to the agents (e.g. "white pawn").
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub id: String,
    pub shape: Shape,
    pub mass_class: MassClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell: Option<[i64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos: Option<[f64; 2]>,
    #[serde(default)]
    pub heading: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}
