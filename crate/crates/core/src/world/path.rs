//! Shortest 4-connected paths on the occupancy grid.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use thiserror::Error;

use super::OccupancyGrid;
use crate::geometry::GridCoord;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PathError {
    #[error("start {0} is occupied or off the grid")]
    StartBlocked(GridCoord),
    #[error("goal {0} is occupied or off the grid")]
    GoalBlocked(GridCoord),
    #[error("no path from {0} to {1}")]
    Unreachable(GridCoord, GridCoord),
}

/// A* with a Manhattan heuristic. Returns the cells from `start` to `goal`
/// inclusive. Ties are broken by insertion order and neighbours are expanded
/// east, north, west, south, so the result is deterministic.
pub fn plan_path(grid: &OccupancyGrid, start: GridCoord, goal: GridCoord) -> Result<Vec<GridCoord>, PathError> {
    if grid.is_occupied(start) {
        return Err(PathError::StartBlocked(start));
    }
    if grid.is_occupied(goal) {
        return Err(PathError::GoalBlocked(goal));
    }
    let n = grid.n as i64;
    let mut open: BinaryHeap<Reverse<(u32, u64, GridCoord)>> = BinaryHeap::new();
    let mut g: HashMap<GridCoord, u32> = HashMap::new();
    let mut parent: HashMap<GridCoord, GridCoord> = HashMap::new();
    let mut counter = 0u64;
    g.insert(start, 0);
    open.push(Reverse((start.manhattan(goal), counter, start)));
    while let Some(Reverse((_, _, cur))) = open.pop() {
        if cur == goal {
            let mut path = vec![cur];
            let mut c = cur;
            while let Some(&p) = parent.get(&c) {
                path.push(p);
                c = p;
            }
            path.reverse();
            return Ok(path);
        }
        let gc = g[&cur];
        for (dc, dr) in [(1i64, 0i64), (0, 1), (-1, 0), (0, -1)] {
            let (col, row) = (cur.col as i64 + dc, cur.row as i64 + dr);
            if col < 0 || row < 0 || col >= n || row >= n {
                continue;
            }
            let next = GridCoord::new(col as u32, row as u32);
            if grid.is_occupied(next) {
                continue;
            }
            let cost = gc + 1;
            if g.get(&next).is_none_or(|&old| cost < old) {
                g.insert(next, cost);
                parent.insert(next, cur);
                counter += 1;
                open.push(Reverse((cost + next.manhattan(goal), counter, next)));
            }
        }
    }
    Err(PathError::Unreachable(start, goal))
}

/// Drop intermediate cells that lie on a straight run, keeping corners.
pub fn corners(path: &[GridCoord]) -> Vec<GridCoord> {
    if path.len() <= 2 {
        return path.to_vec();
    }
    let mut out = vec![path[0]];
    for w in path.windows(3) {
        let d1 = (w[1].col as i64 - w[0].col as i64, w[1].row as i64 - w[0].row as i64);
        let d2 = (w[2].col as i64 - w[1].col as i64, w[2].row as i64 - w[1].row as i64);
        if d1 != d2 {
            out.push(w[1]);
        }
    }
    out.push(*path.last().expect("non-empty"));
    out
}
