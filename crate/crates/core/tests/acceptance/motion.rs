use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gadgetkit::geometry::{compile, compile_pair, KinematicConfig, MetaAction, PairMode, Point, Pose, SpeedLevel};
use gadgetkit::world::{RobotState, World, DEFAULT_TICK_MS};

use crate::{ensure, Check};

const TABLE_MM: f64 = 1000.0;
const CELLS: f64 = 30.0;
const CELL_MM: f64 = TABLE_MM / CELLS;

fn bearing(from: (f64, f64), to: (f64, f64)) -> f64 {
    (to.1 - from.1).atan2(to.0 - from.0).to_degrees().rem_euclid(360.0)
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

fn settle(world: &mut World) {
    world.run_until_quiescent(DEFAULT_TICK_MS, 600_000.0, |_| {});
}

pub fn kinematic_round_trip() -> Check {
    let cfg = KinematicConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x6b696e);
    let started = Instant::now();
    let (mut worst_cells, mut worst_deg) = (0.0f64, 0.0f64);
    for case in 0..100 {
        let (x, y) = (rng.random_range(60.0..940.0), rng.random_range(60.0..940.0));
        let start = Pose::new(x, y, rng.random_range(0.0..360.0));
        let (col, row) = loop {
            let c = (rng.random_range(1..29u32), rng.random_range(1..29u32));
            let centre = ((c.0 as f64 + 0.5) * CELL_MM, (c.1 as f64 + 0.5) * CELL_MM);
            if (centre.0 - x).hypot(centre.1 - y) > 5.0 {
                break c;
            }
        };
        let speed = SpeedLevel::new(rng.random_range(1..=3)).unwrap();
        let target = ((col as f64 + 0.5) * CELL_MM, (row as f64 + 0.5) * CELL_MM);
        let meta = MetaAction::Translate { target: Point::new(target.0, target.1), speed };
        let cmds = compile(&meta, start, None, &cfg).map_err(|e| format!("case {case}: {e}"))?;
        let mut world = World::new(cfg, 0);
        world.add_robot(RobotState::new("r", start)).unwrap();
        world.enqueue("r", cmds).unwrap();
        settle(&mut world);
        let end = world.pose("r").unwrap();
        let miss = (end.x - target.0).hypot(end.y - target.1) / CELL_MM;
        let turn = angle_gap(end.heading, bearing((x, y), target));
        ensure(miss <= 0.25 && turn <= 2.0, || {
            format!("case {case}: start {start:?} -> cell ({col}, {row}) ended {end:?}, miss {miss:.3} cell, heading off {turn:.3} deg")
        })?;
        worst_cells = worst_cells.max(miss);
        worst_deg = worst_deg.max(turn);
    }
    let secs = started.elapsed().as_secs_f64();
    ensure(secs < 5.0, || format!("took {secs:.2} s"))?;
    Ok(format!("100 cases, worst miss {worst_cells:.1e} cell, worst heading {worst_deg:.1e} deg, {secs:.2} s"))
}

pub fn pair_orientation_suite() -> Check {
    let cfg = KinematicConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x70616972);
    let mut worst = 0.0f64;
    for mode in PairMode::ALL {
        for case in 0..20 {
            let a: (f64, f64) = (rng.random_range(100.0..900.0), rng.random_range(100.0..900.0));
            let b = loop {
                let b: (f64, f64) = (rng.random_range(100.0..900.0), rng.random_range(100.0..900.0));
                if (b.0 - a.0).hypot(b.1 - a.1) > 80.0 {
                    break b;
                }
            };
            let pa = Pose::new(a.0, a.1, rng.random_range(0.0..360.0));
            let pb = Pose::new(b.0, b.1, rng.random_range(0.0..360.0));
            let speed = SpeedLevel::new(rng.random_range(1..=3)).unwrap();
            let (ca, cb) = compile_pair(mode, pa, pb, speed, &cfg);
            let mut world = World::new(cfg, 0);
            world.add_robot(RobotState::new("a", pa)).unwrap();
            world.add_robot(RobotState::new("b", pb)).unwrap();
            world.enqueue("a", ca).unwrap();
            world.enqueue("b", cb).unwrap();
            settle(&mut world);
            let (fa, fb) = (world.pose("a").unwrap(), world.pose("b").unwrap());
            let ab = bearing((fa.x, fa.y), (fb.x, fb.y));
            let ba = bearing((fb.x, fb.y), (fa.x, fa.y));
            let perp = (ab + 90.0).rem_euclid(360.0);
            let err = match mode {
                PairMode::FaceToFace => angle_gap(fa.heading, ab).max(angle_gap(fb.heading, ba)),
                PairMode::BackToBack => angle_gap(fa.heading, ab + 180.0).max(angle_gap(fb.heading, ba + 180.0)),
                PairMode::FaceToBack => angle_gap(fa.heading, ab).max(angle_gap(fb.heading, ab)),
                PairMode::Parallel => angle_gap(fa.heading, perp).max(angle_gap(fb.heading, perp)),
                PairMode::CounterParallel => {
                    let across = |h: f64| angle_gap(h, perp).min(angle_gap(h, perp + 180.0));
                    angle_gap(fa.heading, fb.heading + 180.0).max(across(fa.heading)).max(across(fb.heading))
                }
            };
            let drift = (fa.x - a.0).hypot(fa.y - a.1).max((fb.x - b.0).hypot(fb.y - b.1));
            ensure(err <= 0.5 && drift < 1e-6, || {
                format!("{} case {case}: error {err:.3} deg, drift {drift:.2e} mm", mode.as_str())
            })?;
            worst = worst.max(err);
        }
    }
    Ok(format!("5 modes x 20 cases, worst {worst:.1e} deg"))
}
