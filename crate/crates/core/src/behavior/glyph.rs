//! Letter templates: single-robot stroke tracing and multi-robot formations.
//!
//! Templates come from a 5×7 stroke font (`assets/font.json`) authored on an
//! integer design grid and normalized to the unit box on load. A glyph is
//! placed with its bottom-left design point on the centre of `origin`; its
//! height spans `scale` cells and its width `scale · 4/6` cells. Design y
//! maps to increasing grid rows, so glyphs are never mirrored vertically.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use serde::Deserialize;

use super::BehaviorError;
use crate::geometry::{GridCoord, KinematicConfig, MetaAction, Point, SpeedLevel};
use crate::protocol::ActionStep;

const FONT_JSON: &str = include_str!("../../assets/font.json");

/// Speed used while tracing.
pub const PEN_SPEED: SpeedLevel = SpeedLevel::MEDIUM;
/// Duration of the wait step that marks a pen lift between strokes.
pub const PEN_LIFT_MS: u64 = 400;

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolTemplate {
    pub glyph: char,
    /// Polylines in the unit box, `(x, y)` with y up.
    pub strokes: Vec<Vec<(f64, f64)>>,
    pub min_robots: usize,
}

impl SymbolTemplate {
    /// Box aspect: width over height.
    pub const ASPECT: f64 = 4.0 / 6.0;

    /// Stroke length in unit-box coordinates scaled to a box of `w × h`.
    fn placed_length(&self, w: f64, h: f64) -> f64 {
        self.strokes
            .iter()
            .flat_map(|s| s.windows(2))
            .map(|p| ((p[1].0 - p[0].0) * w).hypot((p[1].1 - p[0].1) * h))
            .sum()
    }
}

#[derive(Deserialize)]
struct FontFile {
    #[serde(rename = "box")]
    design_box: [f64; 2],
    glyphs: BTreeMap<String, GlyphEntry>,
}

#[derive(Deserialize)]
struct GlyphEntry {
    min_robots: usize,
    strokes: Vec<Vec<[f64; 2]>>,
}

fn font() -> &'static BTreeMap<char, SymbolTemplate> {
    static FONT: OnceLock<BTreeMap<char, SymbolTemplate>> = OnceLock::new();
    FONT.get_or_init(|| {
        let file: FontFile = serde_json::from_str(FONT_JSON).expect("bundled font parses");
        let [bw, bh] = file.design_box;
        file.glyphs
            .into_iter()
            .map(|(k, g)| {
                let glyph = k.chars().next().expect("glyph key");
                let strokes = g.strokes.iter().map(|s| s.iter().map(|p| (p[0] / bw, p[1] / bh)).collect()).collect();
                (glyph, SymbolTemplate { glyph, strokes, min_robots: g.min_robots })
            })
            .collect()
    })
}

/// Template for an uppercase letter.
pub fn template(glyph: char) -> Result<&'static SymbolTemplate, BehaviorError> {
    font().get(&glyph).ok_or(BehaviorError::UnknownGlyph(glyph))
}

/// All bundled glyphs.
pub fn glyphs() -> impl Iterator<Item = &'static SymbolTemplate> {
    font().values()
}

/// Glyph box placed on the grid, in fractional cell coordinates (a value of
/// `c` is the centre of column `c`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placement {
    pub origin: GridCoord,
    pub width: f64,
    pub height: f64,
}

impl Placement {
    pub fn new(origin: GridCoord, scale: u32, cfg: &KinematicConfig) -> Result<Self, BehaviorError> {
        if scale == 0 {
            return Err(BehaviorError::Precondition("glyph scale must be at least one cell".into()));
        }
        let p = Self { origin, width: scale as f64 * SymbolTemplate::ASPECT, height: scale as f64 };
        let last = (cfg.grid_n - 1) as f64;
        if origin.col as f64 + p.width > last || origin.row as f64 + p.height > last {
            return Err(BehaviorError::Precondition(format!(
                "glyph box {:.1}x{:.1} cells at {origin} leaves the {n}x{n} grid",
                p.width,
                p.height,
                n = cfg.grid_n
            )));
        }
        Ok(p)
    }

    /// Unit-box point to fractional cell coordinates.
    pub fn cell_coords(&self, (u, v): (f64, f64)) -> (f64, f64) {
        (self.origin.col as f64 + u * self.width, self.origin.row as f64 + v * self.height)
    }

    /// Unit-box point to table millimetres.
    pub fn world(&self, p: (f64, f64), cfg: &KinematicConfig) -> Point {
        let (c, r) = self.cell_coords(p);
        let s = cfg.cell();
        Point::new((c + 0.5) * s, (r + 0.5) * s)
    }

    /// Strokes of `t` in table millimetres.
    pub fn world_strokes(&self, t: &SymbolTemplate, cfg: &KinematicConfig) -> Vec<Vec<Point>> {
        t.strokes.iter().map(|s| s.iter().map(|&p| self.world(p, cfg)).collect()).collect()
    }
}

/// Meta-actions for one robot tracing `glyph`: translate through each
/// stroke's vertices, with a wait between strokes marking the pen lift.
/// The robot is expected to start at the first vertex (the first translate
/// takes it there otherwise).
pub fn symbol_trajectory(
    glyph: char,
    origin: GridCoord,
    scale: u32,
    cfg: &KinematicConfig,
) -> Result<Vec<MetaAction>, BehaviorError> {
    let t = template(glyph)?;
    let place = Placement::new(origin, scale, cfg)?;
    let mut out = Vec::new();
    for (i, stroke) in place.world_strokes(t, cfg).into_iter().enumerate() {
        if i > 0 {
            out.push(MetaAction::Wait { duration_ms: PEN_LIFT_MS as f64 });
        }
        for p in stroke {
            out.push(MetaAction::Translate { target: p, speed: PEN_SPEED });
        }
    }
    Ok(out)
}

/// Wire-format steps for [`symbol_trajectory`], vertices snapped to cells.
/// Exact when `scale` is a multiple of 6.
pub fn trajectory_steps(glyph: char, origin: GridCoord, scale: u32, cfg: &KinematicConfig) -> Result<Vec<ActionStep>, BehaviorError> {
    let t = template(glyph)?;
    let place = Placement::new(origin, scale, cfg)?;
    let mut out: Vec<ActionStep> = Vec::new();
    let mut last: Option<[i64; 2]> = None;
    for (i, stroke) in t.strokes.iter().enumerate() {
        if i > 0 {
            out.push(ActionStep::Wait { duration_ms: PEN_LIFT_MS });
        }
        for &p in stroke {
            let (c, r) = place.cell_coords(p);
            let cell = [c.round() as i64, r.round() as i64];
            if last != Some(cell) {
                out.push(ActionStep::translate(cell[0], cell[1], PEN_SPEED.level()));
                last = Some(cell);
            }
        }
    }
    Ok(out)
}

/// Points at uniform arc-length spacing along the concatenated strokes,
/// including both ends, in fractional cell coordinates.
pub fn formation_points(glyph: char, n: usize, origin: GridCoord, scale: u32, cfg: &KinematicConfig) -> Result<Vec<(f64, f64)>, BehaviorError> {
    let t = template(glyph)?;
    if n < t.min_robots {
        return Err(BehaviorError::Precondition(format!("'{glyph}' needs at least {} robots, got {n}", t.min_robots)));
    }
    let place = Placement::new(origin, scale, cfg)?;
    let segs: Vec<((f64, f64), (f64, f64))> = t
        .strokes
        .iter()
        .flat_map(|s| s.windows(2).map(|w| (place.cell_coords(w[0]), place.cell_coords(w[1]))))
        .collect();
    let total = t.placed_length(place.width, place.height);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut s = if n == 1 { total / 2.0 } else { total * i as f64 / (n - 1) as f64 };
        let mut point = segs.last().map(|s| s.1).unwrap_or((0.0, 0.0));
        for &(a, b) in &segs {
            let len = (b.0 - a.0).hypot(b.1 - a.1);
            if s <= len {
                let f = if len > 0.0 { s / len } else { 0.0 };
                point = (a.0 + (b.0 - a.0) * f, a.1 + (b.1 - a.1) * f);
                break;
            }
            s -= len;
        }
        out.push(point);
    }
    Ok(out)
}

/// Distinct cells for `n` robots forming `glyph`, indexed by slot. Each
/// sampled point snaps to its nearest cell; a point whose cell is taken
/// moves to the nearest free cell (ties by row, then column).
pub fn symbol_formation(glyph: char, n: usize, origin: GridCoord, scale: u32, cfg: &KinematicConfig) -> Result<Vec<GridCoord>, BehaviorError> {
    let pts = formation_points(glyph, n, origin, scale, cfg)?;
    let grid_n = cfg.grid_n as i64;
    let mut used: BTreeSet<(i64, i64)> = BTreeSet::new();
    let mut out = Vec::with_capacity(n);
    for (x, y) in pts {
        let snapped = (x.round() as i64, y.round() as i64);
        let cell = if used.contains(&snapped) {
            let mut best: Option<(f64, i64, i64)> = None;
            for r in 0..grid_n {
                for c in 0..grid_n {
                    if used.contains(&(c, r)) {
                        continue;
                    }
                    let d = (c as f64 - x).hypot(r as f64 - y);
                    if best.is_none_or(|(bd, br, bc)| d < bd - 1e-12 || ((d - bd).abs() <= 1e-12 && (r, c) < (br, bc))) {
                        best = Some((d, r, c));
                    }
                }
            }
            let (_, r, c) = best.ok_or_else(|| BehaviorError::Precondition("grid is full".into()))?;
            (c, r)
        } else {
            snapped
        };
        used.insert(cell);
        out.push(GridCoord::new(cell.0 as u32, cell.1 as u32));
    }
    Ok(out)
}

/// Symmetric Hausdorff distance between two point sets (mm).
pub fn hausdorff(a: &[Point], b: &[Point]) -> f64 {
    let directed = |p: &[Point], q: &[Point]| {
        p.iter().map(|x| q.iter().map(|y| x.distance(*y)).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max)
    };
    directed(a, b).max(directed(b, a))
}

/// Points along polylines spaced at most `step` mm apart, endpoints included.
pub fn densify(strokes: &[Vec<Point>], step: f64) -> Vec<Point> {
    let mut out = Vec::new();
    for s in strokes {
        if let Some(first) = s.first() {
            out.push(*first);
        }
        for w in s.windows(2) {
            let d = w[0].distance(w[1]);
            let k = (d / step).ceil().max(1.0) as usize;
            for i in 1..=k {
                let f = i as f64 / k as f64;
                out.push(Point::new(w[0].x + (w[1].x - w[0].x) * f, w[0].y + (w[1].y - w[0].y) * f));
            }
        }
    }
    out
}
