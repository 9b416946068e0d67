//! Cell occupancy from robot footprints and object shapes.
//!
//! A cell is occupied when more than [`OCCUPIED_FRACTION`] of its area is
//! covered by a single body. Areas are exact for polygons; circles are
//! approximated by a regular polygon with [`CIRCLE_SEGMENTS`] sides.

use serde::Serialize;

use super::{Shape, World};
use crate::geometry::{GridCoord, KinematicConfig, Point, Pose};

pub const OCCUPIED_FRACTION: f64 = 0.25;
const CIRCLE_SEGMENTS: usize = 128;

/// Convex polygon, counterclockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon(pub Vec<Point>);

impl Polygon {
    /// Square of side `side` centred on the pose and rotated with it.
    pub fn square(pose: Pose, side: f64) -> Self {
        Self::rect(pose, side, side)
    }

    pub fn rect(pose: Pose, w: f64, h: f64) -> Self {
        let th = pose.heading.to_radians();
        let (c, s) = (th.cos(), th.sin());
        let corners = [(-w / 2.0, -h / 2.0), (w / 2.0, -h / 2.0), (w / 2.0, h / 2.0), (-w / 2.0, h / 2.0)];
        Polygon(corners.iter().map(|(lx, ly)| Point::new(pose.x + lx * c - ly * s, pose.y + lx * s + ly * c)).collect())
    }

    pub fn circle(center: Point, radius: f64) -> Self {
        Polygon(
            (0..CIRCLE_SEGMENTS)
                .map(|i| {
                    let a = i as f64 / CIRCLE_SEGMENTS as f64 * std::f64::consts::TAU;
                    Point::new(center.x + radius * a.cos(), center.y + radius * a.sin())
                })
                .collect(),
        )
    }

    pub fn of_shape(shape: &Shape, pose: Pose) -> Self {
        match *shape {
            Shape::Circle { radius } => Self::circle(pose.position(), radius),
            Shape::Rect { w, h } => Self::rect(pose, w, h),
        }
    }

    /// Shoelace area.
    pub fn area(&self) -> f64 {
        let n = self.0.len();
        let mut acc = 0.0;
        for i in 0..n {
            let (a, b) = (self.0[i], self.0[(i + 1) % n]);
            acc += a.x * b.y - b.x * a.y;
        }
        acc.abs() / 2.0
    }

    fn bounds(&self) -> (Point, Point) {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.0 {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        (lo, hi)
    }

    /// Clip against the axis-aligned box `[x0, x1] × [y0, y1]`
    /// (Sutherland–Hodgman).
    pub fn clip_box(&self, x0: f64, y0: f64, x1: f64, y1: f64) -> Polygon {
        let mut pts = self.0.clone();
        // each edge: keep points with f(p) >= 0
        let edges: [Box<dyn Fn(Point) -> f64>; 4] =
            [Box::new(move |p| p.x - x0), Box::new(move |p| x1 - p.x), Box::new(move |p| p.y - y0), Box::new(move |p| y1 - p.y)];
        for f in edges.iter() {
            if pts.is_empty() {
                break;
            }
            let mut out = Vec::with_capacity(pts.len() + 2);
            for i in 0..pts.len() {
                let cur = pts[i];
                let prev = pts[(i + pts.len() - 1) % pts.len()];
                let (fc, fp) = (f(cur), f(prev));
                if fc >= 0.0 {
                    if fp < 0.0 {
                        out.push(lerp(prev, cur, fp / (fp - fc)));
                    }
                    out.push(cur);
                } else if fp >= 0.0 {
                    out.push(lerp(prev, cur, fp / (fp - fc)));
                }
            }
            pts = out;
        }
        Polygon(pts)
    }
}

fn lerp(a: Point, b: Point, t: f64) -> Point {
    Point::new(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t)
}

/// Fraction of `cell`'s area covered by `poly`.
pub fn cell_overlap_fraction(poly: &Polygon, cell: GridCoord, cfg: &KinematicConfig) -> f64 {
    let s = cfg.cell();
    let (x0, y0) = (cell.col as f64 * s, cell.row as f64 * s);
    poly.clip_box(x0, y0, x0 + s, y0 + s).area() / (s * s)
}

/// Occupied cells, each tagged with the body that occupies it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OccupancyGrid {
    pub n: u32,
    cells: Vec<Option<String>>,
}

impl OccupancyGrid {
    pub fn empty(n: u32) -> Self {
        Self { n, cells: vec![None; (n * n) as usize] }
    }

    fn idx(&self, c: GridCoord) -> Option<usize> {
        (c.col < self.n && c.row < self.n).then(|| (c.row * self.n + c.col) as usize)
    }

    pub fn is_occupied(&self, c: GridCoord) -> bool {
        self.idx(c).map(|i| self.cells[i].is_some()).unwrap_or(true)
    }

    pub fn occupant(&self, c: GridCoord) -> Option<&str> {
        self.idx(c).and_then(|i| self.cells[i].as_deref())
    }

    pub fn set(&mut self, c: GridCoord, who: impl Into<String>) {
        if let Some(i) = self.idx(c) {
            self.cells[i] = Some(who.into());
        }
    }

    pub fn clear(&mut self, c: GridCoord) {
        if let Some(i) = self.idx(c) {
            self.cells[i] = None;
        }
    }

    pub fn occupied_cells(&self) -> Vec<GridCoord> {
        (0..self.n)
            .flat_map(|row| (0..self.n).map(move |col| GridCoord::new(col, row)))
            .filter(|c| self.is_occupied(*c))
            .collect()
    }

    fn mark(&mut self, poly: &Polygon, who: &str, cfg: &KinematicConfig) {
        let s = cfg.cell();
        let (lo, hi) = poly.bounds();
        let last = self.n as i64 - 1;
        let c0 = ((lo.x / s).floor() as i64).clamp(0, last);
        let c1 = ((hi.x / s).floor() as i64).clamp(0, last);
        let r0 = ((lo.y / s).floor() as i64).clamp(0, last);
        let r1 = ((hi.y / s).floor() as i64).clamp(0, last);
        for row in r0..=r1 {
            for col in c0..=c1 {
                let c = GridCoord::new(col as u32, row as u32);
                if self.occupant(c).is_none() && cell_overlap_fraction(poly, c, cfg) > OCCUPIED_FRACTION {
                    self.set(c, who);
                }
            }
        }
    }

    /// Plain-text map, row `n-1` first; `.` free, `#` object, `R` robot.
    pub fn render_ascii(&self, world: &World) -> String {
        let mut out = String::new();
        for row in (0..self.n).rev() {
            for col in 0..self.n {
                let ch = match self.occupant(GridCoord::new(col, row)) {
                    None => '.',
                    Some(id) if world.robots.contains_key(id) => 'R',
                    Some(_) => '#',
                };
                out.push(ch);
            }
            out.push('\n');
        }
        out
    }
}

/// Occupancy of every robot and object.
pub fn occupancy(world: &World) -> OccupancyGrid {
    occupancy_excluding(world, &[])
}

/// Occupancy ignoring the listed bodies (typically the robot being planned).
pub fn occupancy_excluding(world: &World, exclude: &[&str]) -> OccupancyGrid {
    let cfg = &world.cfg;
    let mut g = OccupancyGrid::empty(cfg.grid_n);
    for (id, r) in &world.robots {
        if !exclude.contains(&id.as_str()) {
            g.mark(&Polygon::square(r.pose, r.footprint), id, cfg);
        }
    }
    for (id, o) in &world.objects {
        if !exclude.contains(&id.as_str()) {
            g.mark(&Polygon::of_shape(&o.shape, o.pose), id, cfg);
        }
    }
    g
}
