use gt_forge::align::edit_script;
use gt_forge::emit::{emit_jsonl, read_jsonl};
use gt_forge::metrics::eval_report;
use gt_forge::{cer, wer, CorpusStats, DatasetRecord, ElementType, Metric, OpCounts};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn rates_are_non_negative(a in "[a-c ]{0,20}", b in "[a-c ]{0,20}") {
        prop_assert!(cer(&a, &b) >= 0.0);
        prop_assert!(wer(&a, &b) >= 0.0);
        prop_assert_eq!(cer(&a, &a), 0.0);
        prop_assert_eq!(wer(&a, &a), 0.0);
    }

    #[test]
    fn empty_hypothesis_scores_one(a in "[a-z]{1,6}( [a-z]{1,6}){0,6}") {
        prop_assert_eq!(wer(&a, ""), 1.0);
        prop_assert_eq!(cer(&a, ""), 1.0);
    }

    #[test]
    fn report_means_match_direct_sums(triples in prop::collection::vec(("[ab]{1,8}", "[ab]{0,8}", "[ab]{0,8}"), 1..20)) {
        let r = eval_report(&triples, Metric::Cer).unwrap();
        let n = triples.len() as f64;
        let b: f64 = triples.iter().map(|(g, o, _)| 100.0 * cer(g, o)).sum::<f64>() / n;
        let a: f64 = triples.iter().map(|(g, _, c)| 100.0 * cer(g, c)).sum::<f64>() / n;
        prop_assert!((r.mean_before - b).abs() <= 1e-9 * b.abs().max(1.0));
        prop_assert!((r.mean_after - a).abs() <= 1e-9 * a.abs().max(1.0));
        prop_assert!((0.0..=100.0).contains(&r.percent_improved));
        prop_assert_eq!(r.n_instances, triples.len());
    }
}

fn stats_of(pairs: &[(String, String)]) -> CorpusStats {
    let mut s = CorpusStats::default();
    for (a, b) in pairs {
        s.add_sentence("art", (a.len() % 3) as u32, a, b, &edit_script(a, b));
    }
    s
}

fn pair_sets() -> impl Strategy<Value = Vec<(String, String)>> {
    prop::collection::vec(("[a-d ]{0,16}", "[a-d ]{0,16}"), 0..12)
}

proptest! {
    #[test]
    fn merge_is_concatenation(s1 in pair_sets(), s2 in pair_sets()) {
        let whole = stats_of(&[s1.clone(), s2.clone()].concat());
        let mut merged = stats_of(&s1);
        merged.merge(&stats_of(&s2));
        prop_assert_eq!(merged, whole);
    }

    #[test]
    fn merge_is_associative_and_commutative(s1 in pair_sets(), s2 in pair_sets(), s3 in pair_sets()) {
        let (a, b, c) = (stats_of(&s1), stats_of(&s2), stats_of(&s3));
        prop_assert_eq!(a.clone().merged(&b), b.clone().merged(&a));
        prop_assert_eq!(a.clone().merged(&b).merged(&c), a.clone().merged(&b.clone().merged(&c)));
    }

    #[test]
    fn shares_sum_to_hundred(s in pair_sets()) {
        let stats = stats_of(&s);
        match stats.op_shares() {
            Some(sh) => prop_assert!((sh.replace + sh.delete + sh.insert - 100.0).abs() < 1e-9),
            None => prop_assert_eq!(stats.op_counts.edits(), 0),
        }
    }
}

fn record_strategy() -> impl Strategy<Value = DatasetRecord> {
    (
        "[a-z0-9.-]{1,12}",
        1u32..40,
        0usize..50,
        "\\PC{0,30}",
        "\\PC{0,30}",
        prop::collection::vec(
            prop::sample::select(vec![ElementType::Word, ElementType::InlineMath, ElementType::Citation, ElementType::Reference]),
            0..6,
        ),
        (0u64..100, 0u64..100, 0u64..100, 0u64..100),
        0.0f64..3.0,
    )
        .prop_map(|(article_id, page, sentence_index, sgt, ocr, element_types, (m, r, d, i), cer)| DatasetRecord {
            article_id,
            page,
            sentence_index,
            sgt,
            ocr,
            hyphen_flags: element_types.iter().map(|t| *t == ElementType::Word).collect(),
            element_types,
            ops: OpCounts { matches: m, replace: r, delete: d, insert: i },
            cer,
        })
}

proptest! {
    #[test]
    fn jsonl_round_trip(records in prop::collection::vec(record_strategy(), 0..10)) {
        let mut buf = Vec::new();
        emit_jsonl(&records, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        prop_assert_eq!(text.lines().count(), records.len());
        prop_assert_eq!(read_jsonl(&text).unwrap(), records);
    }
}
