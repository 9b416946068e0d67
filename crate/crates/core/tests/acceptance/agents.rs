use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use regex::Regex;

use gadgetkit::agent::{Actor, MockGateway, Role, TranscriptEntry};
use gadgetkit::behavior::Ownership;
use gadgetkit::geometry::{GridCoord, Pose};
use gadgetkit::protocol::{ActionSequence, ActionStep};
use gadgetkit::session::headless::{TRANSCRIPT_FILE, WORLD_FILE};
use gadgetkit::session::{Session, SessionOptions};
use gadgetkit::world::{expand_sequence, World, DEFAULT_TICK_MS};

use crate::common::{fixture_dir, run_fixture, scenario, FIXTURES};
use crate::{ensure, Check};

fn commands(name: &str) -> Vec<String> {
    std::fs::read_to_string(fixture_dir(name).join("commands.txt"))
        .unwrap()
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#') && !l.starts_with('@'))
        .map(str::to_string)
        .collect()
}

fn dispatched(entries: &[TranscriptEntry]) -> Vec<(Actor, ActionSequence)> {
    entries
        .iter()
        .filter(|e| matches!(e.kind.as_str(), "dispatch" | "rewind"))
        .filter_map(|e| e.sequence().map(|s| (e.actor, s.clone())))
        .collect()
}

pub fn chess_fixture() -> Check {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let run1 = run_fixture("chess", Some(a.path().to_path_buf()));
    run_fixture("chess", Some(b.path().to_path_buf()));
    ensure(run1.ok, || "turn failed".into())?;
    let t1 = std::fs::read(a.path().join(TRANSCRIPT_FILE)).unwrap();
    let t2 = std::fs::read(b.path().join(TRANSCRIPT_FILE)).unwrap();
    ensure(t1 == t2, || "transcripts differ between runs".into())?;

    let flow = [
        (Actor::Coordinator, "ruling"),
        (Actor::User, "command"),
        (Actor::Coordinator, "ruling"),
        (Actor::Controller, "plan"),
        (Actor::Controller, "dispatch"),
    ];
    let mut want = flow.iter().peekable();
    for e in run1.session.transcript.entries() {
        if want.peek().is_some_and(|(actor, kind)| *actor == e.actor && *kind == e.kind) {
            want.next();
        }
    }
    ensure(want.peek().is_none(), || format!("flow stops before {:?}", want.peek()))?;
    let d4 = scenario("chess").board_mapping["d4"];
    let cell = run1.session.world.robot_cell("wp_d");
    ensure(cell == Some(GridCoord::new(d4[0] as u32, d4[1] as u32)), || format!("pawn at {cell:?}, d4 is {d4:?}"))?;
    Ok(format!("ruling -> plan -> dispatch, pawn on d4 {d4:?}, {} transcript bytes identical", t1.len()))
}

/// Simulated time for `seq` to finish from the scenario's starting world.
fn executed_ms(start: &World, seq: &ActionSequence) -> f64 {
    let mut w = start.clone();
    let t0 = w.clock_ms;
    let plan = expand_sequence(seq, &w).unwrap();
    plan.enqueue_into(&mut w).unwrap();
    w.run_until_quiescent(DEFAULT_TICK_MS, plan.duration_ms + 10_000.0, |_| {});
    w.clock_ms - t0
}

fn translate_speeds(seq: &ActionSequence) -> Vec<(String, u8)> {
    seq.robots
        .iter()
        .flat_map(|t| {
            t.actions.iter().filter_map(move |a| match a {
                ActionStep::Translate { speed, .. } => Some((t.id.clone(), *speed)),
                _ => None,
            })
        })
        .collect()
}

pub fn apprentice_feedback() -> Check {
    let out = run_fixture("apprentice", None);
    ensure(out.ok, || "a turn failed".into())?;
    let moves: Vec<ActionSequence> =
        dispatched(out.session.transcript.entries()).into_iter().filter(|(a, _)| *a == Actor::Controller).map(|(_, s)| s).collect();
    ensure(moves.len() == 2, || format!("{} controller dispatches, want prior and revision", moves.len()))?;
    let (prior, revised) = (&moves[0], &moves[1]);
    let (sp, sr) = (translate_speeds(prior), translate_speeds(revised));
    ensure(sp.len() == sr.len() && !sp.is_empty(), || format!("translate steps {sp:?} vs {sr:?}"))?;
    for (p, r) in sp.iter().zip(&sr) {
        ensure(p.0 == r.0 && r.1 >= p.1, || format!("speed dropped: {p:?} -> {r:?}"))?;
    }
    ensure(sp.iter().zip(&sr).any(|(p, r)| r.1 > p.1), || "no translate got faster".into())?;
    let start = scenario("apprentice").validate().unwrap();
    let (tp, tr) = (executed_ms(&start, prior), executed_ms(&start, revised));
    ensure(tr < tp, || format!("revised plan takes {tr:.0} ms, prior {tp:.0} ms"))?;
    ensure(out.session.world.robot_cell("apprentice") == Some(GridCoord::new(10, 10)), || "apprentice missed (10,10)".into())?;
    Ok(format!(
        "speeds {:?} -> {:?}, executed {tp:.0} ms -> {tr:.0} ms",
        sp.iter().map(|s| s.1).collect::<Vec<_>>(),
        sr.iter().map(|s| s.1).collect::<Vec<_>>()
    ))
}

pub fn relationship_ownership() -> Check {
    let mut report = Vec::new();
    for name in ["tbs_opponent", "tbs_teammate"] {
        let out = run_fixture(name, None);
        let sc = scenario(name);
        let user: BTreeSet<&str> =
            sc.robot_ownership.iter().filter(|(_, o)| **o == Ownership::User).map(|(id, _)| id.as_str()).collect();
        ensure(!user.is_empty(), || format!("{name}: no user-owned robot"))?;
        let mut steps = 0;
        for (actor, seq) in dispatched(out.session.transcript.entries()) {
            for t in &seq.robots {
                for a in &t.actions {
                    let partner = match a {
                        ActionStep::PairOrient { partner, .. } => Some(partner.as_str()),
                        _ => None,
                    };
                    ensure(!user.contains(t.id.as_str()) && !partner.is_some_and(|p| user.contains(p)), || {
                        format!("{name}: {actor:?} dispatched a step for user-owned `{}`", t.id)
                    })?;
                    steps += 1;
                }
            }
        }
        let caught = out.session.transcript.entries().iter().filter(|e| e.kind == "repair_report").count();
        ensure(caught > 0, || format!("{name}: the user-owned move was never attempted"))?;
        for id in &user {
            let (a, b) = (sc.validate().unwrap().pose(id), out.session.world.pose(id));
            ensure(a == b, || format!("{name}: user-owned `{id}` moved"))?;
        }
        report.push(format!("{name}: {steps} steps, 0 user-owned, {caught} repair(s)"));
    }

    let out = run_fixture("designer", None);
    let sc = scenario("designer");
    let renames: Vec<(String, String)> = out
        .session
        .transcript
        .entries()
        .iter()
        .filter(|e| e.actor == Actor::System && e.kind == "register")
        .flat_map(|e| serde_json::from_str::<Vec<(String, String)>>(e.text().unwrap()).unwrap())
        .collect();
    ensure(renames.len() == 3, || format!("registered {renames:?}"))?;
    for (from, to) in &renames {
        ensure(sc.robot_ownership.get(from) == Some(&Ownership::Idle), || format!("`{from}` was not idle"))?;
        ensure(out.session.ctx.ownership.get(to) == Some(&Ownership::System) && out.session.world.robot(to).is_some(), || {
            format!("`{to}` not registered as a system robot")
        })?;
    }
    report.push(format!("designer: registered {}", renames.iter().map(|r| r.1.as_str()).collect::<Vec<_>>().join(", ")));
    Ok(report.join("; "))
}

pub fn reality_agnostic_coordinator() -> Check {
    let pose_text = Regex::new(r"x=\d+\.\d+mm|y=\d+\.\d+mm|heading=\d").unwrap();
    let (mut coordinator_bundles, mut controller_hits) = (0, 0);
    for name in FIXTURES {
        let sc = scenario(name);
        let gw = Arc::new(MockGateway::load(sc.mock_script.as_ref().unwrap()).unwrap());
        let mut s = Session::create(sc, Box::new(Arc::clone(&gw)), SessionOptions::default()).unwrap();
        // odd fractions that no layout or template would produce
        let mut tokens = BTreeSet::new();
        let sentinel: BTreeMap<String, Pose> = s
            .world
            .robots
            .iter()
            .map(|(id, r)| {
                let p = Pose::new(r.pose.x + 0.3137, r.pose.y - 0.2719, (r.pose.heading + 0.0419).rem_euclid(360.0));
                for v in [p.x, p.y, p.heading] {
                    tokens.insert(format!("{v:.2}"));
                }
                (id.clone(), p)
            })
            .collect();
        s.push_poses(&sentinel).unwrap();
        for c in commands(name) {
            if s.submit_command(&c).is_err() {
                break;
            }
        }
        let mut controller_seen = false;
        for b in gw.recorded() {
            let text = serde_json::to_string(&b).unwrap();
            match b.role {
                Role::Coordinator => {
                    coordinator_bundles += 1;
                    ensure(!pose_text.is_match(&text), || format!("{name}: coordinator call {} carries pose text", b.turn))?;
                    if let Some(t) = tokens.iter().find(|t| text.contains(t.as_str())) {
                        return Err(format!("{name}: coordinator call {} contains sentinel {t}", b.turn));
                    }
                }
                Role::Controller if b.turn == 0 => {
                    controller_seen = tokens.iter().any(|t| text.contains(t.as_str())) && pose_text.is_match(&text);
                }
                Role::Controller => {}
            }
        }
        let has_controller = gw.recorded().iter().any(|b| b.role == Role::Controller);
        ensure(!has_controller || controller_seen, || format!("{name}: controller never saw the sentinel poses"))?;
        controller_hits += usize::from(controller_seen);
    }
    Ok(format!(
        "{coordinator_bundles} coordinator bundles clean across {} fixtures; sentinels reached the controller in {controller_hits}",
        FIXTURES.len()
    ))
}

pub fn determinism_gate() -> Check {
    for name in FIXTURES {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        run_fixture(name, Some(a.path().to_path_buf()));
        run_fixture(name, Some(b.path().to_path_buf()));
        for f in [TRANSCRIPT_FILE, WORLD_FILE] {
            let (x, y) = (std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap());
            ensure(x == y, || format!("{name}: {f} differs between runs"))?;
        }
    }
    Ok(format!("{} fixtures, transcripts and final worlds byte-identical", FIXTURES.len()))
}
