//! Motor command sinks and pose sources.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SessionError;
use crate::geometry::{MotorCommand, Pose};
use crate::world::World;

/// Receives per-robot command batches in dispatch order.
pub trait Driver: Send {
    fn send(&mut self, world: &mut World, batch: &BTreeMap<String, Vec<MotorCommand>>) -> Result<(), SessionError>;
}

/// Enqueues into the simulated world.
#[derive(Debug, Default)]
pub struct SimDriver;

impl Driver for SimDriver {
    fn send(&mut self, world: &mut World, batch: &BTreeMap<String, Vec<MotorCommand>>) -> Result<(), SessionError> {
        for (id, cmds) in batch {
            world.enqueue(id, cmds.iter().copied())?;
        }
        Ok(())
    }
}

/// Appends intended wheel commands to a file, one JSON object per line.
/// Stands in for a radio link to physical robots.
#[derive(Debug)]
pub struct LogDriver {
    file: File,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LoggedCommand<'a> {
    pub robot: &'a str,
    pub left: i32,
    pub right: i32,
    pub duration_ms: f64,
}

impl LogDriver {
    pub fn create(path: &Path) -> std::io::Result<Self> {
        Ok(Self { file: OpenOptions::new().create(true).append(true).open(path)? })
    }
}

impl Driver for LogDriver {
    fn send(&mut self, _world: &mut World, batch: &BTreeMap<String, Vec<MotorCommand>>) -> Result<(), SessionError> {
        for (id, cmds) in batch {
            for c in cmds {
                let line = serde_json::to_string(&LoggedCommand { robot: id, left: c.left, right: c.right, duration_ms: c.duration_ms })
                    .expect("plain struct serializes");
                writeln!(self.file, "{line}").map_err(|e| SessionError::Io(e.to_string()))?;
            }
        }
        self.file.flush().map_err(|e| SessionError::Io(e.to_string()))
    }
}

/// Sends every batch to each inner driver in order.
pub struct TeeDriver(pub Vec<Box<dyn Driver>>);

impl Driver for TeeDriver {
    fn send(&mut self, world: &mut World, batch: &BTreeMap<String, Vec<MotorCommand>>) -> Result<(), SessionError> {
        for d in &mut self.0 {
            d.send(world, batch)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoseSource {
    #[default]
    Simulator,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StampedPose {
    pub pose: Pose,
    /// Simulation clock (ms) when the pose was captured or pushed.
    pub stamp_ms: f64,
}

/// Where the Controller's poses come from. External updates are written
/// through to the world so that simulation continues from them.
#[derive(Debug, Clone, Default)]
pub struct PoseProvider {
    pub source: PoseSource,
    stamps: BTreeMap<String, f64>,
}

impl PoseProvider {
    pub fn new(source: PoseSource) -> Self {
        Self { source, stamps: BTreeMap::new() }
    }

    /// Apply pushed poses. Every id must exist and every pose lie on the table.
    pub fn push(&mut self, world: &mut World, updates: &BTreeMap<String, Pose>) -> Result<(), SessionError> {
        for (id, p) in updates {
            if world.robot(id).is_none() {
                return Err(SessionError::BadRequest(format!("unknown robot `{id}`")));
            }
            if !(p.x.is_finite() && p.y.is_finite() && p.heading.is_finite()) || !world.cfg.contains(p.position()) {
                return Err(SessionError::BadRequest(format!("pose for `{id}` is off the table")));
            }
        }
        for (id, p) in updates {
            let r = world.robots.get_mut(id).expect("checked above");
            r.pose = Pose::new(p.x, p.y, crate::geometry::normalize_deg(p.heading));
            self.stamps.insert(id.clone(), world.clock_ms);
        }
        Ok(())
    }

    /// Current poses with their capture time.
    pub fn poses(&self, world: &World) -> BTreeMap<String, StampedPose> {
        world
            .robots
            .iter()
            .map(|(id, r)| {
                let stamp_ms = match self.source {
                    PoseSource::Simulator => world.clock_ms,
                    PoseSource::External => self.stamps.get(id).copied().unwrap_or(0.0),
                };
                (id.clone(), StampedPose { pose: r.pose, stamp_ms })
            })
            .collect()
    }
}
