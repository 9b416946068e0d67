use std::collections::{BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gadgetkit::agent::Actor;
use gadgetkit::behavior::glyph::{symbol_formation, trajectory_steps};
use gadgetkit::behavior::scene::{assign_slots, formation_sequence};
use gadgetkit::geometry::{GridCoord, KinematicConfig, Point};
use gadgetkit::protocol::{ActionSequence, ActionStep, RobotTrack};
use gadgetkit::world::{expand_sequence, occupancy_excluding, plan_path, OccupancyGrid, World, WorldEventKind, DEFAULT_TICK_MS};

use crate::common::{run_fixture, scenario};
use crate::{ensure, Check};

const CELL_MM: f64 = 1000.0 / 30.0;

fn cell_of(p: Point) -> (i64, i64) {
    ((p.x / CELL_MM).floor() as i64, (p.y / CELL_MM).floor() as i64)
}

fn run(world: &mut World, seq: &ActionSequence) -> Result<(), String> {
    let plan = expand_sequence(seq, world).map_err(|e| e.to_string())?;
    plan.enqueue_into(world).map_err(|e| e.to_string())?;
    world.run_until_quiescent(DEFAULT_TICK_MS, plan.duration_ms + 2000.0, |_| {});
    Ok(())
}

pub fn push_model() -> Check {
    let soccer = run_fixture("soccer", None);
    let ball_start = scenario("soccer").validate().unwrap().objects["ball"].pose;
    let ball = soccer.session.world.objects["ball"].pose;
    ensure(soccer.ok && ball.x > 850.0, || format!("ball ended at x={:.1} mm, goal line is 850", ball.x))?;
    ensure((12.0 * CELL_MM..19.0 * CELL_MM).contains(&ball.y), || format!("ball y={:.1} outside the posts", ball.y))?;
    let pushers: BTreeSet<&String> = soccer
        .results
        .iter()
        .flat_map(|r| &r.events)
        .filter_map(|e| match &e.kind {
            WorldEventKind::Pushed { object, by } if object == "ball" => Some(by),
            _ => None,
        })
        .flatten()
        .collect();
    ensure(pushers.len() == 1, || format!("ball pushed by {pushers:?}"))?;

    let one = run_fixture("doors_one", None);
    let before = scenario("doors_one").validate().unwrap();
    for id in ["door_l", "door_r"] {
        let (a, b) = (before.objects[id].pose, one.session.world.objects[id].pose);
        ensure(a == b, || format!("one pusher moved {id} from {a:?} to {b:?}"))?;
    }
    let blocked = one.results.iter().flat_map(|r| &r.events).any(|e| matches!(e.kind, WorldEventKind::Blocked { .. }));
    ensure(blocked, || "single pusher raised no blocked event".into())?;

    let two = run_fixture("doors_two", None);
    let cells: Vec<_> = ["door_l", "door_r"].iter().map(|id| two.session.world.object_cell(id)).collect();
    let want = [Some(GridCoord::new(1, 4)), Some(GridCoord::new(3, 4))];
    ensure(cells == want, || format!("doors at {cells:?}, want {want:?}"))?;
    Ok(format!(
        "ball {:.1} -> {:.1} mm; one pusher: doors still; two pushers: doors at (1,4) and (3,4)",
        ball_start.x, ball.x
    ))
}

/// Uniform arc-length samples along polylines in the 4x6 design box placed
/// at `origin` with height `scale` cells; fractional cell coordinates.
fn arc_samples(strokes: &[&[(f64, f64)]], n: usize, origin: (f64, f64), scale: f64) -> Vec<(f64, f64)> {
    let k = scale / 6.0;
    let segs: Vec<((f64, f64), (f64, f64))> = strokes
        .iter()
        .flat_map(|s| s.windows(2).map(|w| ((origin.0 + w[0].0 * k, origin.1 + w[0].1 * k), (origin.0 + w[1].0 * k, origin.1 + w[1].1 * k))))
        .collect();
    let total: f64 = segs.iter().map(|(a, b)| (b.0 - a.0).hypot(b.1 - a.1)).sum();
    (0..n)
        .map(|i| {
            let mut s = total * i as f64 / (n - 1) as f64;
            for &(a, b) in &segs {
                let len = (b.0 - a.0).hypot(b.1 - a.1);
                if s <= len + 1e-9 {
                    let f = (s / len).min(1.0);
                    return (a.0 + (b.0 - a.0) * f, a.1 + (b.1 - a.1) * f);
                }
                s -= len;
            }
            segs.last().unwrap().1
        })
        .collect()
}

fn formation_check(glyph: char, strokes: &[&[(f64, f64)]], n: usize) -> Result<f64, String> {
    let cfg = KinematicConfig::default();
    let origin = GridCoord::new(12, 12);
    let mut world = World::new(cfg, 0);
    let ids: Vec<String> = (0..n).map(|i| format!("{glyph}{i}")).collect();
    for (i, id) in ids.iter().enumerate() {
        world.spawn_robot(id, GridCoord::new(6 + 2 * i as u32, 2), 90.0).unwrap();
    }
    let cells = symbol_formation(glyph, n, origin, 6, &cfg).map_err(|e| e.to_string())?;
    let seq = formation_sequence(&world, &assign_slots(&world, &ids, &cells), 3).map_err(|e| e.to_string())?;
    run(&mut world, &seq)?;
    let template = arc_samples(strokes, n, (12.0, 12.0), 6.0);
    let mut worst = 0.0f64;
    // each template point must hold a robot; robots may take any slot
    let ends: Vec<(f64, f64)> = ids.iter().map(|id| world.pose(id).unwrap()).map(|p| (p.x / CELL_MM - 0.5, p.y / CELL_MM - 0.5)).collect();
    let mut taken = BTreeSet::new();
    for t in &template {
        let (j, d) = ends
            .iter()
            .enumerate()
            .filter(|(j, _)| !taken.contains(j))
            .map(|(j, e)| (j, (e.0 - t.0).hypot(e.1 - t.1)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        taken.insert(j);
        ensure(d <= 0.5, || format!("'{glyph}' template point {t:?} has no robot within 0.5 cell (nearest {d:.3})"))?;
        worst = worst.max(d);
    }
    Ok(worst)
}

fn directed(a: &[Point], b: &[Point]) -> f64 {
    a.iter().map(|p| b.iter().map(|q| (p.x - q.x).hypot(p.y - q.y)).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max)
}

pub fn symbol_visualization() -> Check {
    let h: [&[(f64, f64)]; 3] = [&[(0.0, 0.0), (0.0, 6.0)], &[(0.0, 3.0), (4.0, 3.0)], &[(4.0, 0.0), (4.0, 6.0)]];
    let i: [&[(f64, f64)]; 1] = [&[(2.0, 0.0), (2.0, 6.0)]];
    let wh = formation_check('H', &h, 7)?;
    let wi = formation_check('I', &i, 3)?;

    // trace 'T' with one robot starting at the first vertex
    let cfg = KinematicConfig::default();
    let origin = (10.0, 10.0);
    let mut world = World::new(cfg, 0);
    world.spawn_robot("pen", GridCoord::new(10, 16), 0.0).unwrap();
    let steps = trajectory_steps('T', GridCoord::new(10, 10), 6, &cfg).map_err(|e| e.to_string())?;
    run(&mut world, &ActionSequence::new(vec![RobotTrack::new("pen", steps)]))?;
    let trail = world.robot("pen").unwrap().trail.clone();
    let mm = |c: f64, r: f64| Point::new((origin.0 + c + 0.5) * CELL_MM, (origin.1 + r + 0.5) * CELL_MM);
    let mut placed = Vec::new();
    for ((c0, r0), (c1, r1)) in [((0.0, 6.0), (4.0, 6.0)), ((2.0, 6.0), (2.0, 0.0))] {
        for k in 0..=200 {
            let f = k as f64 / 200.0;
            placed.push(mm(c0 + (c1 - c0) * f, r0 + (r1 - r0) * f));
        }
    }
    let hd = directed(&trail, &placed).max(directed(&placed, &trail)) / CELL_MM;
    ensure(hd < 0.5, || format!("'T' trail Hausdorff {hd:.3} cell"))?;
    Ok(format!("H/7 worst {wh:.3} cell, I/3 worst {wi:.3} cell, T trail Hausdorff {hd:.3} cell"))
}

/// Breadth-first shortest path length (steps), or None.
fn bfs(free: &dyn Fn(i64, i64) -> bool, n: i64, s: (i64, i64), g: (i64, i64)) -> Option<usize> {
    if !free(s.0, s.1) || !free(g.0, g.1) {
        return None;
    }
    let mut dist = vec![usize::MAX; (n * n) as usize];
    let mut q = VecDeque::from([s]);
    dist[(s.1 * n + s.0) as usize] = 0;
    while let Some((c, r)) = q.pop_front() {
        let d = dist[(r * n + c) as usize];
        if (c, r) == g {
            return Some(d);
        }
        for (nc, nr) in [(c + 1, r), (c - 1, r), (c, r + 1), (c, r - 1)] {
            if nc >= 0 && nr >= 0 && nc < n && nr < n && free(nc, nr) && dist[(nr * n + nc) as usize] == usize::MAX {
                dist[(nr * n + nc) as usize] = d + 1;
                q.push_back((nc, nr));
            }
        }
    }
    None
}

fn valid_walk(path: &[GridCoord], free: &dyn Fn(i64, i64) -> bool) -> bool {
    path.iter().all(|c| free(c.col as i64, c.row as i64))
        && path.windows(2).all(|w| w[0].manhattan(w[1]) == 1)
}

pub fn scene_interaction() -> Check {
    let wall = run_fixture("wall", None);
    let start = scenario("wall").validate().unwrap();
    let grid = occupancy_excluding(&start, &["guard"]);
    let free = |c: i64, r: i64| !grid.is_occupied(GridCoord::new(c as u32, r as u32));
    let oracle = bfs(&free, 30, (3, 5), (9, 5)).ok_or("oracle finds no path")?;

    // the guard's last dispatched track, expanded into unit cell steps
    let seq = wall
        .session
        .transcript
        .entries()
        .iter()
        .rev()
        .filter(|e| e.actor == Actor::Controller && e.kind == "dispatch")
        .find_map(|e| e.sequence())
        .ok_or("no dispatch recorded")?
        .clone();
    let mut walk = vec![GridCoord::new(3, 5)];
    for step in &seq.track("guard").ok_or("guard not moved")?.actions {
        if let ActionStep::Translate { target, .. } = step {
            let to = GridCoord::new(target[0] as u32, target[1] as u32);
            let mut at = *walk.last().unwrap();
            while at != to {
                at = if at.col != to.col {
                    GridCoord::new(if to.col > at.col { at.col + 1 } else { at.col - 1 }, at.row)
                } else {
                    GridCoord::new(at.col, if to.row > at.row { at.row + 1 } else { at.row - 1 })
                };
                walk.push(at);
            }
        }
    }
    ensure(valid_walk(&walk, &free), || format!("dispatched path crosses an occupied cell: {walk:?}"))?;
    ensure(walk.len() - 1 == oracle, || format!("dispatched path has {} steps, BFS {oracle}", walk.len() - 1))?;
    let guard = wall.session.world.robot("guard").unwrap();
    ensure(wall.session.world.robot_cell("guard") == Some(GridCoord::new(9, 5)), || "guard missed the goal".into())?;
    let statues: BTreeSet<(i64, i64)> = [(6, 4), (6, 5), (6, 6)].into();
    ensure(guard.trail.iter().all(|p| !statues.contains(&cell_of(*p))), || "guard trail entered the wall".into())?;

    let mut rng = ChaCha8Rng::seed_from_u64(0x626673);
    let mut reachable = 0;
    for case in 0..50 {
        let density = rng.random_range(0.1..0.4);
        let mut g = OccupancyGrid::empty(30);
        for r in 0..30 {
            for c in 0..30 {
                if rng.random_bool(density) {
                    g.set(GridCoord::new(c, r), "x");
                }
            }
        }
        let pick = |rng: &mut ChaCha8Rng| loop {
            let c = GridCoord::new(rng.random_range(0..30), rng.random_range(0..30));
            if !g.is_occupied(c) {
                break c;
            }
        };
        let (s, t) = (pick(&mut rng), pick(&mut rng));
        let free = |c: i64, r: i64| !g.is_occupied(GridCoord::new(c as u32, r as u32));
        let want = bfs(&free, 30, (s.col as i64, s.row as i64), (t.col as i64, t.row as i64));
        match (plan_path(&g, s, t), want) {
            (Ok(p), Some(d)) => {
                reachable += 1;
                ensure(p.first() == Some(&s) && p.last() == Some(&t) && valid_walk(&p, &free) && p.len() - 1 == d, || {
                    format!("grid {case}: planner {} steps, BFS {d}", p.len() - 1)
                })?
            }
            (Err(_), None) => {}
            (got, want) => return Err(format!("grid {case}: planner {got:?}, BFS {want:?}")),
        }
    }
    Ok(format!("wall detour {oracle} steps = BFS; 50 random grids agree ({reachable} reachable)"))
}
