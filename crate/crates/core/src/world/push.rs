//! Kinematic push model.
//!
//! A robot whose leading side overlaps an object after a tick pushes it:
//!
//! * light objects are displaced along the push direction just far enough to
//!   clear every pusher (rigid push, no bounce);
//! * heavy objects move only while at least [`HEAVY_MIN_PUSHERS`] robots push
//!   at once, each heading within [`HEAVY_ALIGN_DEG`] of the push direction;
//!   otherwise they behave as fixed;
//! * fixed objects stop the robot: its position is reset to the start of the
//!   tick.
//!
//! Objects sharing a `group` id form one rigid body. Pushers are counted over
//! the whole body and the body moves as a unit. A `Pushed` event marks the
//! first tick of each push run.

use std::collections::BTreeMap;

use super::{MassClass, Shape, TableObject, World, WorldEvent, WorldEventKind};
use crate::geometry::{self, Point, Pose};

pub const HEAVY_MIN_PUSHERS: usize = 2;
pub const HEAVY_ALIGN_DEG: f64 = 30.0;

const OVERLAP_EPS: f64 = 1e-6;
const MOVE_EPS: f64 = 1e-9;

/// Does a robot disc at `c` with radius `r` overlap the object?
pub fn disc_overlaps(c: Point, r: f64, obj: &TableObject) -> bool {
    disc_overlaps_at(c, r, obj, obj.position())
}

fn disc_overlaps_at(c: Point, r: f64, obj: &TableObject, at: Point) -> bool {
    match obj.shape {
        Shape::Circle { radius } => c.distance(at) < r + radius - OVERLAP_EPS,
        Shape::Rect { w, h } => {
            let th = obj.pose.heading.to_radians();
            let (dx, dy) = (c.x - at.x, c.y - at.y);
            let lx = dx * th.cos() + dy * th.sin();
            let ly = -dx * th.sin() + dy * th.cos();
            let qx = lx.clamp(-w / 2.0, w / 2.0);
            let qy = ly.clamp(-h / 2.0, h / 2.0);
            (lx - qx).hypot(ly - qy) < r - OVERLAP_EPS
        }
    }
}

fn extent(obj: &TableObject) -> f64 {
    match obj.shape {
        Shape::Circle { radius } => radius,
        Shape::Rect { w, h } => w.hypot(h) / 2.0,
    }
}

/// Smallest shift along unit `u` that clears the object from the disc.
fn clearance(c: Point, r: f64, obj: &TableObject, u: (f64, f64)) -> f64 {
    let at = obj.position();
    if !disc_overlaps_at(c, r, obj, at) {
        return 0.0;
    }
    let mut lo = 0.0;
    let mut hi = 2.0 * (r + extent(obj)) + 1.0;
    for _ in 0..64 {
        let mid = (lo + hi) / 2.0;
        if disc_overlaps_at(c, r, obj, Point::new(at.x + u.0 * mid, at.y + u.1 * mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

struct Pusher {
    id: String,
    pos: Point,
    radius: f64,
    dir: (f64, f64),
    heading: f64,
}

/// Resolve contacts after robots moved from `before` to their current poses.
pub fn resolve_push(world: &mut World, before: &BTreeMap<String, Pose>) {
    let mut movers: Vec<Pusher> = Vec::new();
    for (id, r) in &world.robots {
        let Some(old) = before.get(id) else { continue };
        let (dx, dy) = (r.pose.x - old.x, r.pose.y - old.y);
        let len = dx.hypot(dy);
        if len > MOVE_EPS {
            movers.push(Pusher {
                id: id.clone(),
                pos: r.pose.position(),
                radius: r.radius(),
                dir: (dx / len, dy / len),
                heading: r.pose.heading,
            });
        }
    }
    if movers.is_empty() {
        for o in world.objects.values_mut() {
            o.moving = false;
        }
        for r in world.robots.values_mut() {
            r.blocked = false;
        }
        return;
    }

    // rigid bodies: explicit groups, otherwise one body per object
    let mut bodies: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (id, o) in &world.objects {
        let key = o.group.clone().map(|g| format!("group:{g}")).unwrap_or_else(|| format!("obj:{id}"));
        bodies.entry(key).or_default().push(id.clone());
    }

    let clock = world.clock_ms;
    let mut blocked: Vec<(String, String)> = Vec::new();
    let mut pushed_events: Vec<WorldEvent> = Vec::new();
    let mut moved_ids: Vec<String> = Vec::new();
    for members in bodies.values() {
        // (pusher index, object id) for leading-side contacts
        let mut contacts: Vec<(usize, &String)> = Vec::new();
        for m in members {
            let obj = &world.objects[m];
            for (i, p) in movers.iter().enumerate() {
                let to_obj = (obj.pose.x - p.pos.x, obj.pose.y - p.pos.y);
                let leading = to_obj.0 * p.dir.0 + to_obj.1 * p.dir.1 > 0.0;
                if leading && disc_overlaps(p.pos, p.radius, obj) {
                    contacts.push((i, m));
                }
            }
        }
        if contacts.is_empty() {
            continue;
        }
        let mass = members.iter().map(|m| world.objects[m].mass_class).max().unwrap_or(MassClass::Light);
        let mut pusher_ids: Vec<usize> = contacts.iter().map(|(i, _)| *i).collect();
        pusher_ids.sort_unstable();
        pusher_ids.dedup();

        let (sx, sy) = pusher_ids.iter().fold((0.0, 0.0), |acc, &i| (acc.0 + movers[i].dir.0, acc.1 + movers[i].dir.1));
        let norm = sx.hypot(sy);
        let movable = match mass {
            MassClass::Fixed => false,
            MassClass::Light => norm > MOVE_EPS,
            MassClass::Heavy => {
                let push_heading = sy.atan2(sx).to_degrees();
                norm > MOVE_EPS
                    && pusher_ids.len() >= HEAVY_MIN_PUSHERS
                    && pusher_ids
                        .iter()
                        .all(|&i| geometry::angle_between(movers[i].heading, push_heading) <= HEAVY_ALIGN_DEG)
            }
        };
        if !movable {
            for (i, m) in &contacts {
                blocked.push((movers[*i].id.clone(), (*m).clone()));
            }
            continue;
        }
        let u = (sx / norm, sy / norm);
        let shift = contacts
            .iter()
            .map(|(i, m)| clearance(movers[*i].pos, movers[*i].radius, &world.objects[*m], u))
            .fold(0.0, f64::max);
        if shift <= 0.0 {
            continue;
        }
        for m in members {
            let o = world.objects.get_mut(m).expect("member exists");
            o.pose.x += u.0 * shift;
            o.pose.y += u.1 * shift;
        }
        let was_moving = members.iter().any(|m| world.objects[m].moving);
        moved_ids.extend(members.iter().cloned());
        if was_moving {
            continue;
        }
        pushed_events.push(WorldEvent {
            clock_ms: clock,
            kind: WorldEventKind::Pushed {
                object: members.join("+"),
                by: pusher_ids.iter().map(|&i| movers[i].id.clone()).collect(),
            },
        });
    }

    let mut newly_blocked: BTreeMap<String, String> = BTreeMap::new();
    for (rid, oid) in blocked {
        newly_blocked.entry(rid).or_insert(oid);
    }
    for (id, r) in world.robots.iter_mut() {
        match newly_blocked.get(id) {
            Some(obj) => {
                let old = before[id];
                r.pose.x = old.x;
                r.pose.y = old.y;
                if !r.blocked {
                    world.events.push(WorldEvent {
                        clock_ms: clock,
                        kind: WorldEventKind::Blocked { robot: id.clone(), object: obj.clone() },
                    });
                }
                r.blocked = true;
            }
            None => r.blocked = false,
        }
    }
    for o in world.objects.values_mut() {
        o.moving = moved_ids.contains(&o.id);
    }
    world.events.extend(pushed_events);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{GridCoord, KinematicConfig, MotorCommand};
    use crate::world::{RobotState, DEFAULT_TICK_MS};

    fn door_world(pushers: &[(u32, u32)]) -> World {
        let cfg = KinematicConfig::default();
        let mut w = World::new(cfg, 0);
        for (i, (c, r)) in pushers.iter().enumerate() {
            w.spawn_robot(&format!("g{i}"), GridCoord::new(*c, *r), 90.0).unwrap();
        }
        let cell = cfg.cell();
        let door = Shape::Rect { w: 30.0, h: 2.0 * (cell - 16.0) };
        for (name, col) in [("door_l", 1), ("door_r", 3)] {
            let p = geometry::grid_to_world(GridCoord::new(col, 3), &cfg).unwrap();
            w.add_object(TableObject::new(name, door, Pose::at(p, 0.0), MassClass::Heavy).with_group("doors")).unwrap();
        }
        w
    }

    fn drive_north(w: &mut World, id: &str, cells: f64) {
        let d = cells * w.cfg.cell() / 60.0 * 1000.0;
        w.enqueue(id, [MotorCommand { left: 20, right: 20, duration_ms: d }]).unwrap();
    }

    #[test]
    fn single_pusher_cannot_move_heavy_door() {
        let mut w = door_world(&[(1, 1)]);
        let start = w.objects["door_l"].position();
        drive_north(&mut w, "g0", 2.0);
        w.run_until_quiescent(DEFAULT_TICK_MS, 20_000.0, |_| {});
        assert_eq!(w.objects["door_l"].position(), start);
        assert_eq!(w.objects["door_r"].position(), geometry::grid_to_world(GridCoord::new(3, 3), &w.cfg).unwrap());
        assert!(w.drain_events().iter().any(|e| matches!(e.kind, WorldEventKind::Blocked { .. })));
    }

    #[test]
    fn two_pushers_move_door_one_cell() {
        let mut w = door_world(&[(1, 1), (3, 1)]);
        drive_north(&mut w, "g0", 2.0);
        drive_north(&mut w, "g1", 2.0);
        w.run_until_quiescent(DEFAULT_TICK_MS, 20_000.0, |_| {});
        assert_eq!(w.object_cell("door_l"), Some(GridCoord::new(1, 4)));
        assert_eq!(w.object_cell("door_r"), Some(GridCoord::new(3, 4)));
        let target = geometry::grid_to_world(GridCoord::new(1, 4), &w.cfg).unwrap();
        assert!(w.objects["door_l"].position().distance(target) < 1e-3);
    }

    #[test]
    fn light_ball_kicked_east() {
        let cfg = KinematicConfig::default();
        let mut w = World::new(cfg, 0);
        w.spawn_robot("g", GridCoord::new(2, 3), 0.0).unwrap();
        let ball = geometry::grid_to_world(GridCoord::new(3, 3), &cfg).unwrap();
        w.add_object(TableObject::new("ball", Shape::Circle { radius: 12.0 }, Pose::at(ball, 0.0), MassClass::Light)).unwrap();
        w.enqueue("g", [MotorCommand { left: 30, right: 30, duration_ms: cfg.cell() / 90.0 * 1000.0 }]).unwrap();
        w.run_until_quiescent(DEFAULT_TICK_MS, 10_000.0, |_| {});
        let b = w.objects["ball"].position();
        assert!(b.x > ball.x + 10.0, "ball at {b:?}");
        assert!((b.y - ball.y).abs() < 1e-9);
    }

    #[test]
    fn fixed_object_stops_robot() {
        let cfg = KinematicConfig::default();
        let mut w = World::new(cfg, 0);
        w.spawn_robot("g", GridCoord::new(5, 5), 0.0).unwrap();
        let post = geometry::grid_to_world(GridCoord::new(7, 5), &cfg).unwrap();
        w.add_object(TableObject::new("post", Shape::Circle { radius: 10.0 }, Pose::at(post, 0.0), MassClass::Fixed)).unwrap();
        w.enqueue("g", [MotorCommand { left: 10, right: 10, duration_ms: 4000.0 }]).unwrap();
        w.run_until_quiescent(DEFAULT_TICK_MS, 10_000.0, |_| {});
        assert_eq!(w.objects["post"].position(), post);
        let r = &w.robots["g"];
        assert!(r.pose.x < post.x - 26.0 + 1e-6 - 0.0 + 1.0);
        assert!(!disc_overlaps(r.pose.position(), RobotState::new("x", r.pose).radius(), &w.objects["post"]));
    }

    #[test]
    fn objects_do_not_move_without_contact() {
        let cfg = KinematicConfig::default();
        let mut w = World::new(cfg, 0);
        w.spawn_robot("g", GridCoord::new(5, 5), 90.0).unwrap();
        let p = geometry::grid_to_world(GridCoord::new(9, 5), &cfg).unwrap();
        w.add_object(TableObject::new("ball", Shape::Circle { radius: 12.0 }, Pose::at(p, 0.0), MassClass::Light)).unwrap();
        w.enqueue("g", [MotorCommand { left: 30, right: 30, duration_ms: 2000.0 }]).unwrap();
        w.run_until_quiescent(DEFAULT_TICK_MS, 10_000.0, |_| {});
        assert_eq!(w.objects["ball"].position(), p);
    }
}
