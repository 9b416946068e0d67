use std::path::PathBuf;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

use gadgetkit::geometry::PairMode;
use gadgetkit::protocol::{parse_lenient, parse_strict, serialize, ActionSequence, ActionStep, Pivot, RobotTrack};

use crate::{ensure, Check};

fn step() -> impl Strategy<Value = ActionStep> {
    prop_oneof![
        (-40i64..40, -40i64..40, 1u8..=3).prop_map(|(c, r, s)| ActionStep::translate(c, r, s)),
        (-720.0f64..720.0, 0usize..3, 1u8..=3).prop_map(|(angle, p, speed)| ActionStep::Rotate {
            angle,
            pivot: [Pivot::Center, Pivot::Left, Pivot::Right][p],
            speed
        }),
        (0usize..5, "[a-z][a-z0-9_]{0,6}", 1u8..=3).prop_map(|(m, p, speed)| ActionStep::PairOrient {
            mode: PairMode::ALL[m],
            partner: format!("p_{p}"),
            speed
        }),
        (0u64..100_000).prop_map(|duration_ms| ActionStep::Wait { duration_ms }),
    ]
}

fn sequence() -> impl Strategy<Value = ActionSequence> {
    (prop::collection::vec(prop::collection::vec(step(), 0..6), 0..5), any::<bool>()).prop_map(|(tracks, parallel)| {
        ActionSequence {
            robots: tracks.into_iter().enumerate().map(|(i, a)| RobotTrack::new(format!("r{i}"), a)).collect(),
            parallel,
        }
    })
}

pub fn parser_corpus() -> Check {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/parser");
    let mut pairs = 0;
    let mut names: Vec<PathBuf> = std::fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
    names.sort();
    for messy in names.iter().filter(|p| p.to_string_lossy().ends_with(".messy.txt")) {
        let canon = PathBuf::from(messy.to_string_lossy().replace(".messy.txt", ".canonical.json"));
        let want = parse_strict(std::fs::read_to_string(&canon).unwrap().trim()).map_err(|e| format!("{}: {e}", canon.display()))?;
        let got = parse_lenient(&std::fs::read_to_string(messy).unwrap()).map_err(|e| format!("{}: {e}", messy.display()))?;
        ensure(got.sequence == want, || format!("{} normalizes differently", messy.display()))?;
        pairs += 1;
    }
    ensure(pairs >= 20, || format!("only {pairs} corpus pairs"))?;

    let mut runner = TestRunner::new(Config { cases: 1000, failure_persistence: None, ..Config::default() });
    runner
        .run(&sequence(), |s| {
            let text = serialize(&s);
            prop_assert_eq!(&parse_strict(&text).unwrap(), &s);
            prop_assert_eq!(serialize(&parse_strict(&text).unwrap()), text.clone());
            prop_assert_eq!(&parse_lenient(&format!("Plan:\n```json\n{text}\n```")).unwrap().sequence, &s);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!("{pairs}/{pairs} corpus pairs; 1000 random round trips"))
}
