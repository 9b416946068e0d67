#![allow(dead_code)]

use std::path::PathBuf;

use gadgetkit::agent::MockGateway;
use gadgetkit::session::headless::{parse_commands, run_headless, RunOptions, RunOutcome};
use gadgetkit::session::Scenario;

pub const FIXTURES: [&str; 11] = [
    "chess", "soccer", "doors_one", "doors_two", "wall", "apprentice", "tbs_opponent", "tbs_teammate", "designer", "yes_no",
    "improv",
];

pub fn fixture_dir(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/scenarios").join(name)
}

pub fn scenario(name: &str) -> Scenario {
    Scenario::load(&fixture_dir(name).join("scenario.json")).unwrap()
}

/// Run a shipped fixture with its mock script and commands file.
pub fn run_fixture(name: &str, out_dir: Option<PathBuf>) -> RunOutcome {
    let sc = scenario(name);
    let gw = MockGateway::load(sc.mock_script.as_ref().unwrap()).unwrap();
    let script = parse_commands(&std::fs::read_to_string(fixture_dir(name).join("commands.txt")).unwrap()).unwrap();
    run_headless(sc, &script, Box::new(gw), &RunOptions { out_dir, ..RunOptions::default() }).unwrap()
}
