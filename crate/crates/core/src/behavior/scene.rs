//! Scene-aware planning glue: grid navigation and formation assembly.

use crate::geometry::{self, GridCoord, Pose};
use crate::protocol::{ActionSequence, ActionStep, RobotTrack};
use crate::world::{corners, occupancy_excluding, plan_path, OccupancyGrid, PathError, World};

use super::BehaviorError;

/// Translate steps along the shortest free path, one per corner.
pub fn navigate_steps(grid: &OccupancyGrid, start: GridCoord, goal: GridCoord, speed: u8) -> Result<Vec<ActionStep>, PathError> {
    let path = plan_path(grid, start, goal)?;
    Ok(corners(&path).into_iter().skip(1).map(|c| ActionStep::translate(c.col as i64, c.row as i64, speed)).collect())
}

/// Pair each target slot with the nearest unassigned robot (Manhattan
/// distance, ties by id).
pub fn assign_slots(world: &World, ids: &[String], targets: &[GridCoord]) -> Vec<(String, GridCoord)> {
    let mut free: Vec<&String> = ids.iter().collect();
    let mut out = Vec::new();
    for &t in targets {
        let best = free
            .iter()
            .enumerate()
            .filter_map(|(i, id)| world.robot_cell(id).map(|c| (c.manhattan(t), (*id).clone(), i)))
            .min();
        if let Some((_, id, i)) = best {
            free.remove(i);
            out.push((id, t));
        }
    }
    out
}

/// Serial plan moving each robot to its cell along free paths. Robots whose
/// goal is still held by an unmoved robot go later.
pub fn formation_sequence(world: &World, assignments: &[(String, GridCoord)], speed: u8) -> Result<ActionSequence, BehaviorError> {
    let mut sim = world.clone();
    let mut pending: Vec<&(String, GridCoord)> = assignments.iter().collect();
    let mut tracks = Vec::new();
    while !pending.is_empty() {
        let mut progressed = false;
        let mut i = 0;
        while i < pending.len() {
            let (id, goal) = pending[i];
            let start = sim.robot_cell(id).ok_or_else(|| BehaviorError::Precondition(format!("unknown robot `{id}`")))?;
            let grid = occupancy_excluding(&sim, &[id.as_str()]);
            match navigate_steps(&grid, start, *goal, speed) {
                Ok(steps) => {
                    let p = geometry::grid_to_world(*goal, &sim.cfg)?;
                    let heading = sim.pose(id).map(|p| p.heading).unwrap_or(0.0);
                    sim.robots.get_mut(id).expect("robot").pose = Pose::at(p, heading);
                    tracks.push(RobotTrack::new(id.clone(), steps));
                    pending.remove(i);
                    progressed = true;
                }
                Err(PathError::GoalBlocked(_)) => i += 1,
                Err(e) => return Err(e.into()),
            }
        }
        if !progressed {
            let (id, goal) = pending[0];
            return Err(BehaviorError::Precondition(format!("cannot free cell {goal} for `{id}`")));
        }
    }
    Ok(ActionSequence { robots: tracks, parallel: false })
}
