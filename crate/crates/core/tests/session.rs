mod common;

use std::collections::BTreeMap;

use gadgetkit::agent::{MockGateway, Transcript};
use gadgetkit::geometry::Pose;
use gadgetkit::session::headless::{parse_commands, run_headless, RunOptions, TRANSCRIPT_FILE, WORLD_FILE};
use gadgetkit::session::{replay, Phase, Session, SessionError, SessionOptions};
use gadgetkit::world::DEFAULT_TICK_MS;

use common::{fixture_dir, run_fixture, scenario, FIXTURES};

#[test]
fn replay_reproduces_every_fixture_world() {
    for name in FIXTURES {
        let out = run_fixture(name, None);
        let replayed = replay(&out.session.scenario, out.session.transcript.entries(), DEFAULT_TICK_MS).unwrap();
        assert_eq!(
            serde_json::to_string_pretty(&replayed).unwrap(),
            out.session.world_json(),
            "{name}: replayed world differs"
        );
    }
}

#[test]
fn transcript_file_matches_memory_and_reloads() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_fixture("wall", Some(dir.path().to_path_buf()));
    let on_disk = std::fs::read_to_string(dir.path().join(TRANSCRIPT_FILE)).unwrap();
    assert_eq!(on_disk, out.session.transcript.to_jsonl());
    let entries = Transcript::read_jsonl(&dir.path().join(TRANSCRIPT_FILE)).unwrap();
    assert_eq!(entries, out.session.transcript.entries());
    let world = std::fs::read_to_string(dir.path().join(WORLD_FILE)).unwrap();
    assert_eq!(world, out.session.world_json());
}

#[test]
fn command_log_lists_dispatched_wheel_commands() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("wheels.jsonl");
    let sc = scenario("chess");
    let gw = MockGateway::load(sc.mock_script.as_ref().unwrap()).unwrap();
    let script = parse_commands("Move the pawn from d2 to d4").unwrap();
    let opts = RunOptions { log_commands: Some(log.clone()), ..RunOptions::default() };
    let out = run_headless(sc, &script, Box::new(gw), &opts).unwrap();
    assert!(out.ok);
    let lines: Vec<serde_json::Value> =
        std::fs::read_to_string(&log).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(!lines.is_empty());
    assert!(lines.iter().all(|l| l["robot"] == "wp_d"));
    // already facing north: a straight run with both wheels forward
    let total: f64 = lines.iter().map(|l| l["duration_ms"].as_f64().unwrap()).sum();
    assert!(lines.iter().any(|l| l["left"].as_i64() == l["right"].as_i64() && l["left"].as_i64().unwrap() > 0));
    let cell = 1000.0 / 30.0;
    let mm_per_s = 3.0 * 20.0;
    assert!((total - 2.0 * cell / mm_per_s * 1000.0).abs() < 1.0, "total {total}");
}

#[test]
fn pushed_poses_feed_the_next_plan_and_are_logged() {
    let sc = scenario("chess");
    let gw = MockGateway::load(sc.mock_script.as_ref().unwrap()).unwrap();
    let mut s = Session::create(sc, Box::new(gw), SessionOptions::default()).unwrap();
    let cell = 1000.0 / 30.0;
    let nudged = Pose::new(14.5 * cell + 4.0, 12.5 * cell - 3.0, 80.0);
    s.push_poses(&BTreeMap::from([("wp_d".to_string(), nudged)])).unwrap();
    assert_eq!(s.world.pose("wp_d"), Some(nudged));
    assert!(s.transcript.entries().iter().any(|e| e.kind == "poses"));
    let r = s.submit_command("Move the pawn from d2 to d4").unwrap();
    assert!(r.ok);
    let p = s.world.pose("wp_d").unwrap();
    assert!((p.x - 14.5 * cell).abs() < 0.25 * cell && (p.y - 14.5 * cell).abs() < 0.25 * cell);
}

#[test]
fn ended_session_rejects_commands() {
    let sc = scenario("improv");
    let gw = MockGateway::load(sc.mock_script.as_ref().unwrap()).unwrap();
    let mut s = Session::create(sc, Box::new(gw), SessionOptions::default()).unwrap();
    let commands = std::fs::read_to_string(fixture_dir("improv").join("commands.txt")).unwrap();
    for line in commands.lines().filter(|l| !l.trim().is_empty()) {
        assert!(s.submit_command(line).unwrap().ok);
    }
    assert_eq!(s.phase, Phase::Ended);
    assert_eq!(s.submit_command("encore"), Err(SessionError::Phase(Phase::Ended)));
}

#[test]
fn exhausted_mock_script_fails_the_turn_not_the_session() {
    let sc = scenario("chess");
    let gw = MockGateway::load(sc.mock_script.as_ref().unwrap()).unwrap();
    let mut s = Session::create(sc, Box::new(gw), SessionOptions::default()).unwrap();
    assert!(s.submit_command("Move the pawn from d2 to d4").unwrap().ok);
    let r = s.submit_command("Move the knight from g1 to f3").unwrap();
    assert!(!r.ok);
    assert!(r.error.is_some());
    assert!(s.transcript.entries().iter().any(|e| e.kind == "turn_failed"));
    assert_eq!(s.phase, Phase::Running);
}
