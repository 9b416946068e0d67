//! One pass/fail line per acceptance criterion. Exits non-zero on any failure.

#[path = "../common/mod.rs"]
mod common;

mod agents;
mod motion;
mod parsing;
mod scene;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;

pub type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

pub fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("kinematic round trip", motion::kinematic_round_trip),
        ("pair orientation suite", motion::pair_orientation_suite),
        ("chess fixture", agents::chess_fixture),
        ("push model", scene::push_model),
        ("symbol visualization", scene::symbol_visualization),
        ("scene interaction", scene::scene_interaction),
        ("apprentice feedback", agents::apprentice_feedback),
        ("relationship ownership", agents::relationship_ownership),
        ("reality-agnostic coordinator", agents::reality_agnostic_coordinator),
        ("parser corpus", parsing::parser_corpus),
        ("determinism gate", agents::determinism_gate),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
