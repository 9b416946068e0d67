//! Pre-dispatch checks for an action sequence.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use super::{expand_sequence, MassClass, World, WorldEventKind, DEFAULT_TICK_MS};
use crate::geometry::GridCoord;
use crate::protocol::{ActionSequence, ActionStep};

/// Slack added to the plan duration for the dry run.
const DRY_RUN_SLACK_MS: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    UnknownRobot,
    BadSpeed,
    OutOfBounds,
    PredictedCollision,
    /// Path runs into a fixed object.
    Obstructed,
    /// The step could not be compiled at all.
    Compile,
    /// Commands a robot the acting policy may not move.
    Ownership,
    /// More new characters than idle robots.
    IdlePool,
    /// Revision ignores the player's coaching.
    Feedback,
}

impl ViolationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationKind::UnknownRobot => "unknown_robot",
            ViolationKind::BadSpeed => "bad_speed",
            ViolationKind::OutOfBounds => "out_of_bounds",
            ViolationKind::PredictedCollision => "predicted_collision",
            ViolationKind::Obstructed => "obstructed",
            ViolationKind::Compile => "compile",
            ViolationKind::Ownership => "ownership",
            ViolationKind::IdlePool => "idle_pool",
            ViolationKind::Feedback => "feedback",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub robot: String,
    pub step: Option<usize>,
    pub kind: ViolationKind,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.step {
            Some(s) => write!(f, "{} step {}: {}: {}", self.robot, s, self.kind.as_str(), self.detail),
            None => write!(f, "{}: {}: {}", self.robot, self.kind.as_str(), self.detail),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("no violations");
        }
        for v in &self.violations {
            writeln!(f, "- {v}")?;
        }
        Ok(())
    }
}

fn v(robot: &str, step: Option<usize>, kind: ViolationKind, detail: impl Into<String>) -> Violation {
    Violation { robot: robot.to_string(), step, kind, detail: detail.into() }
}

/// Check ids, speeds and targets, then dry-run the plan on a copy of the
/// world and report collisions between robots, runs into fixed objects and
/// table-edge contacts. Robots that already overlap before the plan are not
/// reported.
pub fn validate_sequence(seq: &ActionSequence, world: &World) -> ValidationReport {
    let cfg = &world.cfg;
    let mut out = Vec::new();
    for t in &seq.robots {
        if world.robot(&t.id).is_none() {
            out.push(v(&t.id, None, ViolationKind::UnknownRobot, format!("no robot `{}` on the table", t.id)));
            continue;
        }
        for (i, step) in t.actions.iter().enumerate() {
            if let Some(s) = step.speed() {
                if !(1..=3).contains(&s) {
                    out.push(v(&t.id, Some(i), ViolationKind::BadSpeed, format!("speed {s} outside 1..=3")));
                }
            }
            match step {
                ActionStep::Translate { target, .. } => {
                    if GridCoord::checked(target[0], target[1], cfg).is_err() {
                        out.push(v(
                            &t.id,
                            Some(i),
                            ViolationKind::OutOfBounds,
                            format!("target ({}, {}) outside the {n}x{n} grid", target[0], target[1], n = cfg.grid_n),
                        ));
                    }
                }
                ActionStep::PairOrient { partner, .. } if world.robot(partner).is_none() => {
                    out.push(v(&t.id, Some(i), ViolationKind::UnknownRobot, format!("no partner robot `{partner}`")));
                }
                ActionStep::Rotate { angle, .. } if !angle.is_finite() => {
                    out.push(v(&t.id, Some(i), ViolationKind::Compile, "angle is not finite"));
                }
                _ => {}
            }
        }
    }
    if !out.is_empty() {
        return ValidationReport { violations: out };
    }

    let plan = match expand_sequence(seq, world) {
        Ok(p) => p,
        Err(e) => {
            let robot = seq.robots.first().map(|t| t.id.as_str()).unwrap_or("?");
            return ValidationReport { violations: vec![v(robot, None, ViolationKind::Compile, e.to_string())] };
        }
    };
    let mut sim = world.clone();
    sim.events.clear();
    let start = sim.clock_ms;
    if let Err(e) = plan.enqueue_into(&mut sim) {
        return ValidationReport { violations: vec![v("?", None, ViolationKind::Compile, e.to_string())] };
    }
    let ids: Vec<String> = sim.robots.keys().cloned().collect();
    let overlapping = |w: &World, a: &str, b: &str| {
        let (ra, rb) = (&w.robots[a], &w.robots[b]);
        ra.pose.position().distance(rb.pose.position()) < (ra.footprint + rb.footprint) / 2.0
    };
    let mut initial: BTreeSet<(String, String)> = BTreeSet::new();
    for (i, a) in ids.iter().enumerate() {
        for b in &ids[i + 1..] {
            if overlapping(&sim, a, b) {
                initial.insert((a.clone(), b.clone()));
            }
        }
    }
    let mut reported: BTreeSet<(String, String)> = BTreeSet::new();
    let moving: BTreeSet<&str> = plan.commands.keys().map(String::as_str).collect();
    let mut collisions = Vec::new();
    sim.run_until_quiescent(DEFAULT_TICK_MS, plan.duration_ms + DRY_RUN_SLACK_MS, |w| {
        for (i, a) in ids.iter().enumerate() {
            for b in &ids[i + 1..] {
                if !(moving.contains(a.as_str()) || moving.contains(b.as_str())) {
                    continue;
                }
                let key = (a.clone(), b.clone());
                if initial.contains(&key) || reported.contains(&key) || !overlapping(w, a, b) {
                    continue;
                }
                reported.insert(key);
                let t = w.clock_ms - start;
                // blame the robot that is moving, preferring the first
                let culprit = if moving.contains(a.as_str()) { a } else { b };
                let other = if culprit == a { b } else { a };
                let step = plan.span_at(culprit, t - DEFAULT_TICK_MS / 2.0).filter(|s| &s.robot == culprit).map(|s| s.step);
                collisions.push(v(
                    culprit,
                    step,
                    ViolationKind::PredictedCollision,
                    format!("would collide with `{other}` at t={t:.0} ms near cell {}", cell_label(w, culprit)),
                ));
            }
        }
    });
    out.extend(collisions);
    for e in &sim.events {
        let t = e.clock_ms - start;
        match &e.kind {
            WorldEventKind::Blocked { robot, object } if sim.objects.get(object).is_some_and(|o| o.mass_class == MassClass::Fixed) => {
                let step = plan.span_at(robot, t - DEFAULT_TICK_MS / 2.0).filter(|s| &s.robot == robot).map(|s| s.step);
                out.push(v(robot, step, ViolationKind::Obstructed, format!("runs into fixed `{object}` at t={t:.0} ms")));
            }
            WorldEventKind::Boundary { robot } => {
                let step = plan.span_at(robot, t - DEFAULT_TICK_MS / 2.0).filter(|s| &s.robot == robot).map(|s| s.step);
                out.push(v(robot, step, ViolationKind::OutOfBounds, format!("reaches the table edge at t={t:.0} ms")));
            }
            _ => {}
        }
    }
    ValidationReport { violations: out }
}

fn cell_label(w: &World, id: &str) -> String {
    w.robot_cell(id).map(|c| c.to_string()).unwrap_or_else(|| "?".into())
}
