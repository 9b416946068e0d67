//! Tabletop coordinate system, differential-drive kinematics, and the
//! compiler from meta-actions to timed wheel commands.
//!
//! Conventions: positions are millimetres with +x east and +y north, headings
//! are degrees counterclockwise from +x in `[0, 360)`. The table is divided
//! into a `grid_n × grid_n` lattice of square cells; grid targets resolve to
//! cell centres.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default number of cells along each table axis.
pub const GRID_N: u32 = 30;

/// Rotations smaller than this (degrees) compile to nothing.
const ANGLE_EPS_DEG: f64 = 1e-9;
/// Translations shorter than this (mm) compile to nothing.
const DIST_EPS_MM: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("grid coordinate ({col}, {row}) outside the {n}x{n} grid")]
    GridOutOfBounds { col: i64, row: i64, n: u32 },
    #[error("point ({x:.3}, {y:.3}) mm outside the {size} mm table")]
    PointOutOfBounds { x: f64, y: f64, size: f64 },
    #[error("speed level {0} outside 1..=3")]
    BadSpeed(i64),
    #[error("invalid kinematic config: {0}")]
    BadConfig(String),
    #[error("pair orientation needs the partner's pose")]
    MissingPartner,
    #[error("cannot read config {path}: {reason}")]
    ConfigIo { path: String, reason: String },
}

/// Physical constants of the table and the robots.
///
/// Track width and velocity gain are calibration values; every kinematic
/// property in this crate holds for any positive choice because the compiler
/// and the forward model read the same config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KinematicConfig {
    #[serde(rename = "table_size_mm", default = "default_table")]
    pub table_size: f64,
    #[serde(default = "default_grid_n")]
    pub grid_n: u32,
    #[serde(rename = "track_width_mm", default = "default_track")]
    pub track_width: f64,
    /// mm/s of wheel surface speed per device speed unit.
    #[serde(default = "default_gain")]
    pub velocity_gain: f64,
}

fn default_table() -> f64 {
    1000.0
}
fn default_grid_n() -> u32 {
    GRID_N
}
fn default_track() -> f64 {
    26.0
}
fn default_gain() -> f64 {
    3.0
}

impl Default for KinematicConfig {
    fn default() -> Self {
        Self {
            table_size: default_table(),
            grid_n: default_grid_n(),
            track_width: default_track(),
            velocity_gain: default_gain(),
        }
    }
}

impl KinematicConfig {
    pub fn validate(&self) -> Result<(), GeometryError> {
        let finite_pos = |v: f64| v.is_finite() && v > 0.0;
        if !finite_pos(self.table_size) {
            return Err(GeometryError::BadConfig("table_size_mm must be positive".into()));
        }
        if self.grid_n == 0 {
            return Err(GeometryError::BadConfig("grid_n must be positive".into()));
        }
        if !finite_pos(self.track_width) {
            return Err(GeometryError::BadConfig("track_width_mm must be positive".into()));
        }
        if !finite_pos(self.velocity_gain) {
            return Err(GeometryError::BadConfig("velocity_gain must be positive".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, GeometryError> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| GeometryError::BadConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GeometryError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| GeometryError::ConfigIo {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::from_json(&text)
    }

    /// Side length of one grid cell in mm.
    pub fn cell(&self) -> f64 {
        self.table_size / self.grid_n as f64
    }

    /// Wheel surface speed (mm/s) for a signed device speed value.
    pub fn wheel_velocity(&self, units: i32) -> f64 {
        self.velocity_gain * units as f64
    }

    pub fn contains(&self, p: Point) -> bool {
        (0.0..=self.table_size).contains(&p.x) && (0.0..=self.table_size).contains(&p.y)
    }

    pub fn check_point(&self, p: Point) -> Result<(), GeometryError> {
        if p.x.is_finite() && p.y.is_finite() && self.contains(p) {
            Ok(())
        } else {
            Err(GeometryError::PointOutOfBounds { x: p.x, y: p.y, size: self.table_size })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (other.x - self.x).hypot(other.y - self.y)
    }

    /// Bearing from `self` to `other`, degrees CCW from east in `[0, 360)`.
    pub fn bearing_to(self, other: Point) -> f64 {
        normalize_deg((other.y - self.y).atan2(other.x - self.x).to_degrees())
    }
}

/// Continuous robot pose.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    /// Degrees CCW from +x, normalized to `[0, 360)`.
    pub heading: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self { x, y, heading: normalize_deg(heading) }
    }

    pub fn at(p: Point, heading: f64) -> Self {
        Self::new(p.x, p.y, heading)
    }

    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

impl fmt::Display for Pose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x={:.2}mm y={:.2}mm heading={:.2}deg", self.x, self.y, self.heading)
    }
}

/// Normalize degrees to `[0, 360)`.
pub fn normalize_deg(deg: f64) -> f64 {
    let r = deg.rem_euclid(360.0);
    // rem_euclid can return 360.0 for tiny negative inputs
    if r >= 360.0 {
        0.0
    } else {
        r
    }
}

/// Signed shortest rotation from `from` to `to`, in `(-180, 180]`.
pub fn shortest_delta(from: f64, to: f64) -> f64 {
    let d = (to - from).rem_euclid(360.0);
    if d > 180.0 {
        d - 360.0
    } else {
        d
    }
}

/// Absolute angular distance between two headings, in `[0, 180]`.
pub fn angle_between(a: f64, b: f64) -> f64 {
    shortest_delta(a, b).abs()
}

/// A cell of the discrete game grid; `col` grows east, `row` grows north.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridCoord {
    pub col: u32,
    pub row: u32,
}

impl GridCoord {
    pub const fn new(col: u32, row: u32) -> Self {
        Self { col, row }
    }

    /// Checked construction from possibly out-of-range signed values.
    pub fn checked(col: i64, row: i64, cfg: &KinematicConfig) -> Result<Self, GeometryError> {
        let n = cfg.grid_n as i64;
        if (0..n).contains(&col) && (0..n).contains(&row) {
            Ok(Self::new(col as u32, row as u32))
        } else {
            Err(GeometryError::GridOutOfBounds { col, row, n: cfg.grid_n })
        }
    }

    pub fn manhattan(self, other: GridCoord) -> u32 {
        self.col.abs_diff(other.col) + self.row.abs_diff(other.row)
    }
}

impl fmt::Display for GridCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.col, self.row)
    }
}

/// Centre of a grid cell in mm.
pub fn grid_to_world(c: GridCoord, cfg: &KinematicConfig) -> Result<Point, GeometryError> {
    if c.col >= cfg.grid_n || c.row >= cfg.grid_n {
        return Err(GeometryError::GridOutOfBounds {
            col: c.col as i64,
            row: c.row as i64,
            n: cfg.grid_n,
        });
    }
    let cell = cfg.cell();
    Ok(Point::new((c.col as f64 + 0.5) * cell, (c.row as f64 + 0.5) * cell))
}

/// Cell containing a point. Points exactly on the far table edge belong to
/// the last cell.
pub fn world_to_grid(p: Point, cfg: &KinematicConfig) -> Result<GridCoord, GeometryError> {
    cfg.check_point(p)?;
    let cell = cfg.cell();
    let last = cfg.grid_n - 1;
    let col = ((p.x / cell).floor() as u32).min(last);
    let row = ((p.y / cell).floor() as u32).min(last);
    Ok(GridCoord::new(col, row))
}

/// Continuous grid position of a point, in cell units, where cell centres
/// sit on half-integers offset to integers (i.e. centre of (c, r) is (c, r)).
pub fn world_to_grid_f(p: Point, cfg: &KinematicConfig) -> (f64, f64) {
    let cell = cfg.cell();
    (p.x / cell - 0.5, p.y / cell - 0.5)
}

/// Device speed level 1..=3, mapping to 10/20/30 device units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct SpeedLevel(u8);

impl SpeedLevel {
    pub const SLOW: SpeedLevel = SpeedLevel(1);
    pub const MEDIUM: SpeedLevel = SpeedLevel(2);
    pub const FAST: SpeedLevel = SpeedLevel(3);

    pub fn new(level: i64) -> Result<Self, GeometryError> {
        if (1..=3).contains(&level) {
            Ok(Self(level as u8))
        } else {
            Err(GeometryError::BadSpeed(level))
        }
    }

    pub fn level(self) -> u8 {
        self.0
    }

    pub fn device_units(self) -> i32 {
        10 * self.0 as i32
    }
}

impl TryFrom<u8> for SpeedLevel {
    type Error = GeometryError;
    fn try_from(v: u8) -> Result<Self, Self::Error> {
        SpeedLevel::new(v as i64)
    }
}

impl From<SpeedLevel> for u8 {
    fn from(s: SpeedLevel) -> u8 {
        s.0
    }
}

/// Linear wheel velocity (mm/s) for a speed level.
pub fn speed_to_velocity(s: SpeedLevel, cfg: &KinematicConfig) -> f64 {
    cfg.wheel_velocity(s.device_units())
}

/// A timed wheel command. Positive units drive the wheel forward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotorCommand {
    pub left: i32,
    pub right: i32,
    pub duration_ms: f64,
}

impl MotorCommand {
    pub const MAX_UNITS: i32 = 30;

    pub fn is_valid(&self) -> bool {
        self.left.abs() <= Self::MAX_UNITS
            && self.right.abs() <= Self::MAX_UNITS
            && self.duration_ms.is_finite()
            && self.duration_ms > 0.0
    }

    pub fn is_idle(&self) -> bool {
        self.left == 0 && self.right == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Wheel {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairMode {
    FaceToFace,
    BackToBack,
    FaceToBack,
    Parallel,
    CounterParallel,
}

impl PairMode {
    pub const ALL: [PairMode; 5] = [
        PairMode::FaceToFace,
        PairMode::BackToBack,
        PairMode::FaceToBack,
        PairMode::Parallel,
        PairMode::CounterParallel,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PairMode::FaceToFace => "face_to_face",
            PairMode::BackToBack => "back_to_back",
            PairMode::FaceToBack => "face_to_back",
            PairMode::Parallel => "parallel",
            PairMode::CounterParallel => "counter_parallel",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.as_str() == s)
    }
}

/// The high-level motion vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub enum MetaAction {
    /// In-place spin about the robot centre to an absolute heading.
    RotateA { target_heading: f64, speed: SpeedLevel },
    /// Pivot about one stationary wheel by a signed angle (CCW positive).
    RotateB { pivot: Wheel, angle: f64, speed: SpeedLevel },
    /// Face the target, then drive straight to it.
    Translate { target: Point, speed: SpeedLevel },
    /// Rotate this robot and its partner into a relative orientation.
    PairOrient { mode: PairMode, partner: String, speed: SpeedLevel },
    Wait { duration_ms: f64 },
}

/// Headings `(a, b)` that realize `mode` for robots at `a` and `b`.
///
/// `parallel` picks the counterclockwise perpendicular of the A→B line;
/// `counter_parallel` points A that way and B the opposite way.
pub fn pair_headings(mode: PairMode, a: Point, b: Point) -> (f64, f64) {
    let ab = a.bearing_to(b);
    let ba = normalize_deg(ab + 180.0);
    let perp = normalize_deg(ab + 90.0);
    match mode {
        PairMode::FaceToFace => (ab, ba),
        PairMode::BackToBack => (ba, ab),
        PairMode::FaceToBack => (ab, ab),
        PairMode::Parallel => (perp, perp),
        PairMode::CounterParallel => (perp, normalize_deg(perp + 180.0)),
    }
}

fn rotate_a(from: f64, to: f64, speed: SpeedLevel, cfg: &KinematicConfig) -> Vec<MotorCommand> {
    let delta = shortest_delta(from, to);
    if delta.abs() < ANGLE_EPS_DEG {
        return Vec::new();
    }
    let u = speed.device_units();
    let v = speed_to_velocity(speed, cfg);
    let duration_s = delta.abs().to_radians() * (cfg.track_width / 2.0) / v;
    let (left, right) = if delta > 0.0 { (-u, u) } else { (u, -u) };
    vec![MotorCommand { left, right, duration_ms: duration_s * 1000.0 }]
}

/// Compile one meta-action for a robot at `pose` into wheel commands.
///
/// For `PairOrient` this returns only the acting robot's commands; use
/// [`compile_pair`] to obtain both robots' commands.
pub fn compile(
    meta: &MetaAction,
    pose: Pose,
    partner_pose: Option<Pose>,
    cfg: &KinematicConfig,
) -> Result<Vec<MotorCommand>, GeometryError> {
    match meta {
        MetaAction::RotateA { target_heading, speed } => {
            Ok(rotate_a(pose.heading, *target_heading, *speed, cfg))
        }
        MetaAction::RotateB { pivot, angle, speed } => {
            if angle.abs() < ANGLE_EPS_DEG {
                return Ok(Vec::new());
            }
            let u = speed.device_units();
            let v = speed_to_velocity(*speed, cfg);
            let duration_s = angle.abs().to_radians() * cfg.track_width / v;
            // CCW rotation needs the free wheel to move forward when it is the
            // right wheel, backward when it is the left wheel.
            let signed = if *angle > 0.0 { u } else { -u };
            let (left, right) = match pivot {
                Wheel::Left => (0, signed),
                Wheel::Right => (-signed, 0),
            };
            Ok(vec![MotorCommand { left, right, duration_ms: duration_s * 1000.0 }])
        }
        MetaAction::Translate { target, speed } => {
            cfg.check_point(*target)?;
            let start = pose.position();
            let dist = start.distance(*target);
            if dist < DIST_EPS_MM {
                return Ok(Vec::new());
            }
            let bearing = start.bearing_to(*target);
            let mut cmds = rotate_a(pose.heading, bearing, *speed, cfg);
            let u = speed.device_units();
            let v = speed_to_velocity(*speed, cfg);
            cmds.push(MotorCommand { left: u, right: u, duration_ms: dist / v * 1000.0 });
            Ok(cmds)
        }
        MetaAction::PairOrient { mode, speed, .. } => {
            let partner = partner_pose.ok_or(GeometryError::MissingPartner)?;
            let (ha, _) = pair_headings(*mode, pose.position(), partner.position());
            Ok(rotate_a(pose.heading, ha, *speed, cfg))
        }
        MetaAction::Wait { duration_ms } => {
            if *duration_ms > 0.0 {
                Ok(vec![MotorCommand { left: 0, right: 0, duration_ms: *duration_ms }])
            } else {
                Ok(Vec::new())
            }
        }
    }
}

/// Commands for both robots of a pair orientation.
pub fn compile_pair(
    mode: PairMode,
    a: Pose,
    b: Pose,
    speed: SpeedLevel,
    cfg: &KinematicConfig,
) -> (Vec<MotorCommand>, Vec<MotorCommand>) {
    let (ha, hb) = pair_headings(mode, a.position(), b.position());
    (rotate_a(a.heading, ha, speed, cfg), rotate_a(b.heading, hb, speed, cfg))
}

/// Exact forward kinematics of one command (closed-form unicycle update).
pub fn apply(pose: Pose, cmd: &MotorCommand, cfg: &KinematicConfig) -> Pose {
    apply_for(pose, cmd, cmd.duration_ms, cfg)
}

/// Forward kinematics of `cmd` held for `elapsed_ms` (which may be a slice
/// of the command's full duration).
pub fn apply_for(pose: Pose, cmd: &MotorCommand, elapsed_ms: f64, cfg: &KinematicConfig) -> Pose {
    let t = elapsed_ms / 1000.0;
    if t <= 0.0 {
        return pose;
    }
    let vl = cfg.wheel_velocity(cmd.left);
    let vr = cfg.wheel_velocity(cmd.right);
    let v = (vl + vr) / 2.0;
    let omega = (vr - vl) / cfg.track_width;
    let th = pose.heading.to_radians();
    if cmd.left == cmd.right {
        return Pose::new(pose.x + v * t * th.cos(), pose.y + v * t * th.sin(), pose.heading);
    }
    let th2 = th + omega * t;
    if cmd.left == -cmd.right {
        return Pose::new(pose.x, pose.y, th2.to_degrees());
    }
    let r = v / omega;
    Pose::new(
        pose.x + r * (th2.sin() - th.sin()),
        pose.y - r * (th2.cos() - th.cos()),
        th2.to_degrees(),
    )
}

/// Apply a command list in order.
pub fn apply_all(pose: Pose, cmds: &[MotorCommand], cfg: &KinematicConfig) -> Pose {
    cmds.iter().fold(pose, |p, c| apply(p, c, cfg))
}

/// Total duration of a command list in ms.
pub fn total_duration(cmds: &[MotorCommand]) -> f64 {
    cmds.iter().map(|c| c.duration_ms).sum()
}

/// Position of a wheel contact point for a pose.
pub fn wheel_position(pose: Pose, wheel: Wheel, cfg: &KinematicConfig) -> Point {
    let th = pose.heading.to_radians();
    let half = cfg.track_width / 2.0;
    // left wheel sits at +90 deg from the heading
    let sign = match wheel {
        Wheel::Left => 1.0,
        Wheel::Right => -1.0,
    };
    Point::new(pose.x - sign * half * th.sin(), pose.y + sign * half * th.cos())
}
