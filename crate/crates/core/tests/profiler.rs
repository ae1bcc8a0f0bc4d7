use std::path::Path;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use uitrim::evaluation::{count_default, TokenCounter};
use uitrim::profiler::{parse_log, profile, render_csv, PromptLogRecord};
use uitrim::representations::PromptBundle;

fn record(i: usize, group: (u8, u8, u8), texts: [String; 6]) -> PromptLogRecord {
    let [system, action_space, task, ui, context, format] = texts;
    PromptLogRecord {
        record_id: format!("r{i}"),
        model_label: format!("m{}", group.0),
        benchmark_label: format!("b{}", group.1),
        agent_label: format!("a{}", group.2),
        components: PromptBundle { system, action_space, task, ui, context, format },
        counts: None,
    }
}

fn records() -> impl Strategy<Value = Vec<PromptLogRecord>> {
    prop::collection::vec(((0u8..2, 0u8..2, 0u8..2), prop::array::uniform6("[a-z0-9 .]{0,40}")), 1..40)
        .prop_map(|v| v.into_iter().enumerate().map(|(i, (g, t))| record(i, g, t)).collect())
}

#[test]
fn text_log_is_counted() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/logs/sample_texts.jsonl");
    let text = std::fs::read_to_string(path).unwrap();
    let recs = parse_log(text.as_bytes()).unwrap();
    let rows = profile(&recs, &TokenCounter::Default).unwrap();
    assert_eq!(rows.len(), 1);
    let ui: usize = recs.iter().map(|r| count_default(&r.components.ui)).sum();
    assert!((rows[0].means[3] - ui as f64 / recs.len() as f64).abs() < 1e-9);
    assert_eq!(rows[0].precounted, 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn order_independent_partition(recs in records(), seed in any::<u64>()) {
        let c = TokenCounter::Default;
        let rows = profile(&recs, &c).unwrap();
        let mut shuffled = recs.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let again = profile(&shuffled, &c).unwrap();
        prop_assert_eq!(render_csv(&rows).unwrap(), render_csv(&again).unwrap());
        prop_assert_eq!(rows.iter().map(|r| r.records).sum::<u64>(), recs.len() as u64);
        for r in &rows {
            prop_assert!((0.0..=1.0).contains(&r.ui_ratio));
            prop_assert!((r.means.iter().sum::<f64>() - r.total).abs() < 1e-6);
            if r.total > 0.0 {
                prop_assert!((r.ui_ratio - r.means[3] / r.total).abs() < 1e-9);
            } else {
                prop_assert_eq!(r.ui_ratio, 0.0);
            }
        }
    }
}
