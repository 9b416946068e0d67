//! Non-verbal motion motifs (moods and social gestures).
//!
//! Motif geometry (hop length, argument gap, speeds) is data in
//! `assets/motifs.json`; the shapes are built here.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::BehaviorError;
use crate::geometry::{self, GridCoord, KinematicConfig, PairMode, Pose};
use crate::protocol::{ActionSequence, ActionStep, Pivot, RobotTrack};

const MOTIFS_JSON: &str = include_str!("../../assets/motifs.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Motif {
    Excitement,
    Sadness,
    Greeting,
    Argument,
    CelebrationSpin,
}

impl Motif {
    pub const ALL: [Motif; 5] = [Motif::Excitement, Motif::Sadness, Motif::Greeting, Motif::Argument, Motif::CelebrationSpin];

    pub fn as_str(self) -> &'static str {
        match self {
            Motif::Excitement => "excitement",
            Motif::Sadness => "sadness",
            Motif::Greeting => "greeting",
            Motif::Argument => "argument",
            Motif::CelebrationSpin => "celebration_spin",
        }
    }

    pub fn params(self) -> &'static MotifParams {
        &table()[self.as_str()]
    }
}

impl fmt::Display for Motif {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Motif {
    type Err = BehaviorError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Motif::ALL.into_iter().find(|m| m.as_str() == s).ok_or_else(|| BehaviorError::UnknownMotif(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct MotifParams {
    /// Inclusive robot count range.
    pub roles: [usize; 2],
    #[serde(default)]
    pub hop_cells: i64,
    #[serde(default)]
    pub gap_cells: i64,
    pub move_speed: u8,
    pub spin_speed: u8,
    #[serde(default)]
    pub linger_ms: u64,
    #[serde(default)]
    pub wiggle_deg: f64,
    #[serde(default)]
    pub wiggles: usize,
}

#[derive(Deserialize)]
struct MotifFile {
    motifs: BTreeMap<String, MotifParams>,
}

fn table() -> &'static BTreeMap<String, MotifParams> {
    static T: OnceLock<BTreeMap<String, MotifParams>> = OnceLock::new();
    T.get_or_init(|| {
        let f: MotifFile = serde_json::from_str(MOTIFS_JSON).expect("bundled motifs parse");
        f.motifs
    })
}

fn cell_of(pose: Pose, cfg: &KinematicConfig) -> Result<GridCoord, BehaviorError> {
    Ok(geometry::world_to_grid(pose.position(), cfg)?)
}

/// Cell `hop` cells along `heading` (snapped to the 8 compass directions),
/// flipped to the opposite side when that would leave the grid.
fn hop_cell(from: GridCoord, heading: f64, hop: i64, cfg: &KinematicConfig) -> GridCoord {
    let th = heading.to_radians();
    let (dc, dr) = (th.cos().round() as i64, th.sin().round() as i64);
    let n = cfg.grid_n as i64;
    let at = |k: i64| (from.col as i64 + dc * hop * k, from.row as i64 + dr * hop * k);
    let (c, r) = at(1);
    let (c, r) = if (0..n).contains(&c) && (0..n).contains(&r) { (c, r) } else { at(-1) };
    GridCoord::new(c.clamp(0, n - 1) as u32, r.clamp(0, n - 1) as u32)
}

fn bearing(a: GridCoord, b: GridCoord) -> f64 {
    geometry::normalize_deg((b.row as f64 - a.row as f64).atan2(b.col as f64 - a.col as f64).to_degrees())
}

fn tr(c: GridCoord, speed: u8) -> ActionStep {
    ActionStep::translate(c.col as i64, c.row as i64, speed)
}

/// Four quarter turns in place ending on the starting heading.
fn full_spin(from_heading: f64, speed: u8) -> Vec<ActionStep> {
    (1..=4).map(|k| ActionStep::spin_to(geometry::normalize_deg(from_heading + 90.0 * k as f64), speed)).collect()
}

/// Build the motif for the given robots (id and current pose).
pub fn instantiate_motif(m: Motif, actors: &[(String, Pose)], cfg: &KinematicConfig) -> Result<ActionSequence, BehaviorError> {
    let p = m.params();
    let [lo, hi] = p.roles;
    if actors.len() < lo || actors.len() > hi {
        return Err(BehaviorError::Arity { motif: m, expected: (lo, hi), got: actors.len() });
    }
    let tracks = match m {
        Motif::Excitement | Motif::CelebrationSpin => actors
            .iter()
            .map(|(id, pose)| {
                let c = cell_of(*pose, cfg)?;
                let to = hop_cell(c, pose.heading, p.hop_cells, cfg);
                let mut steps = vec![tr(to, p.move_speed)];
                steps.extend(full_spin(bearing(c, to), p.spin_speed));
                Ok(RobotTrack::new(id.clone(), steps))
            })
            .collect::<Result<Vec<_>, BehaviorError>>()?,
        Motif::Sadness => {
            let (id, pose) = &actors[0];
            let c = cell_of(*pose, cfg)?;
            let away = geometry::normalize_deg(pose.heading + 180.0);
            let to = hop_cell(c, away, p.hop_cells, cfg);
            vec![RobotTrack::new(
                id.clone(),
                vec![
                    ActionStep::spin_to(bearing(c, to), p.spin_speed),
                    tr(to, p.move_speed),
                    ActionStep::Wait { duration_ms: p.linger_ms },
                ],
            )]
        }
        Motif::Greeting => {
            let (a, b) = (&actors[0].0, &actors[1].0);
            let wiggle: Vec<ActionStep> = (0..p.wiggles)
                .flat_map(|_| {
                    [
                        ActionStep::Rotate { angle: p.wiggle_deg, pivot: Pivot::Left, speed: p.spin_speed },
                        ActionStep::Rotate { angle: -p.wiggle_deg, pivot: Pivot::Left, speed: p.spin_speed },
                    ]
                })
                .collect();
            let track = |me: &String, other: &String| {
                let mut s = vec![ActionStep::PairOrient { mode: PairMode::FaceToFace, partner: other.clone(), speed: p.move_speed }];
                s.extend(wiggle.iter().cloned());
                RobotTrack::new(me.clone(), s)
            };
            vec![track(a, b), track(b, a)]
        }
        Motif::Argument => {
            let (ida, pa) = &actors[0];
            let (idb, pb) = &actors[1];
            let (ca, cb) = (cell_of(*pa, cfg)?, cell_of(*pb, cfg)?);
            let dx = cb.col as f64 - ca.col as f64;
            let dy = cb.row as f64 - ca.row as f64;
            let d = dx.hypot(dy);
            if d == 0.0 {
                return Err(BehaviorError::Precondition("argument needs two robots in different cells".into()));
            }
            // centre distance at closest approach: the gap plus one cell
            let half = (p.gap_cells as f64 + 1.0) / 2.0;
            let (ta, tb) = if d > 2.0 * half {
                let (mx, my) = ((ca.col as f64 + cb.col as f64) / 2.0, (ca.row as f64 + cb.row as f64) / 2.0);
                let (ux, uy) = (dx / d, dy / d);
                let snap = |x: f64, y: f64| GridCoord::new(x.round() as u32, y.round() as u32);
                (snap(mx - ux * half, my - uy * half), snap(mx + ux * half, my + uy * half))
            } else {
                (ca, cb)
            };
            let face_ab = bearing(ta, tb);
            let face_ba = geometry::normalize_deg(face_ab + 180.0);
            let track = |me: &String, other: &String, from: GridCoord, to: GridCoord, face: f64| {
                let mut s = Vec::new();
                if from != to {
                    s.push(tr(to, p.move_speed));
                }
                s.push(ActionStep::PairOrient { mode: PairMode::FaceToFace, partner: other.clone(), speed: p.move_speed });
                s.extend(full_spin(face, p.spin_speed));
                if from != to {
                    s.push(tr(from, p.move_speed));
                }
                RobotTrack::new(me.clone(), s)
            };
            vec![track(ida, idb, ca, ta, face_ab), track(idb, ida, cb, tb, face_ba)]
        }
    };
    Ok(ActionSequence::new(tracks))
}
