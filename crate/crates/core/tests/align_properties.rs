use gt_forge::align::{align_boxes, align_tokens, assign_ocr_to_sgt, edit_script, levenshtein, SentenceSplitter};
use gt_forge::ocr::OcrWord;
use gt_forge::{iou, AlignedElement, BBox, EditOp, ElementType, HyphenPart, SgtBox, SgtElement};
use proptest::prelude::*;

fn dp_distance(a: &[char], b: &[char]) -> usize {
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        d[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1024))]

    #[test]
    fn distance_matches_dp(a in "[abc$]{0,12}", b in "[abc$]{0,12}") {
        let ac: Vec<char> = a.chars().collect();
        let bc: Vec<char> = b.chars().collect();
        let s = edit_script(&a, &b);
        prop_assert_eq!(s.distance, dp_distance(&ac, &bc));
        prop_assert_eq!(levenshtein(&ac, &bc), s.distance);
    }

    #[test]
    fn script_applies_to_source(a in "\\PC{0,40}", b in "\\PC{0,40}") {
        let s = edit_script(&a, &b);
        prop_assert_eq!(s.apply(&a), Some(b.clone()));
        let c = s.counts();
        prop_assert_eq!(c.edits() as usize, s.distance);
        prop_assert_eq!((c.matches + c.replace + c.delete) as usize, a.chars().count());
        prop_assert_eq!((c.matches + c.replace + c.insert) as usize, b.chars().count());
    }

    #[test]
    fn self_distance_is_zero(a in "\\PC{0,64}") {
        let s = edit_script(&a, &a);
        prop_assert_eq!(s.distance, 0);
        prop_assert!(s.ops.iter().all(EditOp::is_match));
    }

    #[test]
    fn swap_exchanges_inserts_and_deletes(a in "[a-e ]{0,30}", b in "[a-e ]{0,30}") {
        let ab = edit_script(&a, &b);
        let ba = edit_script(&b, &a);
        prop_assert_eq!(ab.distance, ba.distance);
        let (x, y) = (ab.counts(), ba.counts());
        prop_assert_eq!(x.insert as i64 - x.delete as i64, y.delete as i64 - y.insert as i64);
        let mirrored = gt_forge::EditScript {
            ops: ab
                .ops
                .iter()
                .map(|op| match *op {
                    EditOp::Insert(c) => EditOp::Delete(c),
                    EditOp::Delete(c) => EditOp::Insert(c),
                    EditOp::Replace(p, q) => EditOp::Replace(q, p),
                    m => m,
                })
                .collect(),
            distance: ab.distance,
        };
        prop_assert_eq!(mirrored.apply(&b), Some(a.clone()));
        let m = mirrored.counts();
        prop_assert_eq!((m.insert, m.delete, m.replace), (x.delete, x.insert, x.replace));
    }

    #[test]
    fn token_pairs_are_monotone(a in prop::collection::vec("[ab]{1,2}", 0..12), b in prop::collection::vec("[ab]{1,2}", 0..12)) {
        let (d, pairs) = align_tokens(&a, &b);
        prop_assert_eq!(d, levenshtein(&a, &b));
        let (mut i, mut j) = (0, 0);
        for p in &pairs {
            if let Some(x) = p.0 { prop_assert_eq!(x, i); i += 1; }
            if let Some(y) = p.1 { prop_assert_eq!(y, j); j += 1; }
            prop_assert!(p.0.is_some() || p.1.is_some());
        }
        prop_assert_eq!((i, j), (a.len(), b.len()));
    }
}

fn element(id: usize, text: &str) -> SgtElement {
    SgtElement { mark_id: id, etype: ElementType::Word, raw_tex: text.into(), source_span: 0..0, hyphen_part: None }
}

fn bbox_strategy() -> impl Strategy<Value = BBox> {
    (0u32..60, 0u32..20, 1u32..12, 1u32..6)
        .prop_map(|(x, y, w, h)| BBox::new(f64::from(x), f64::from(y), f64::from(x + w), f64::from(y + h)))
}

fn page_strategy() -> impl Strategy<Value = (Vec<SgtBox>, Vec<OcrWord>)> {
    let sgt = prop::collection::vec((bbox_strategy(), 0usize..8, prop::option::of(any::<bool>())), 0..=20);
    let ocr = prop::collection::vec(bbox_strategy(), 0..=40);
    (sgt, ocr).prop_map(|(sgt, ocr)| {
        let boxes = sgt
            .into_iter()
            .map(|(bbox, id, part)| {
                let part = part.map(|f| if f { HyphenPart::First } else { HyphenPart::Second });
                SgtBox { element: element(id, "w"), page: 1, bbox, hyphen_part: part }
            })
            .collect();
        let words = ocr
            .into_iter()
            .enumerate()
            .map(|(k, bbox)| OcrWord {
                text: format!("o{k}"),
                bbox,
                confidence: 90.0,
                page: 1,
                block: 1,
                paragraph: 1,
                line: 1,
                word_index: k as u32,
            })
            .collect();
        (boxes, words)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn assignment_is_brute_force_argmax((sgt, ocr) in page_strategy()) {
        let got = assign_ocr_to_sgt(&sgt, &ocr);
        prop_assert_eq!(got.len(), ocr.len());
        for (w, a) in ocr.iter().zip(&got) {
            let best = sgt
                .iter()
                .map(|b| iou(&w.bbox, &b.bbox))
                .fold(0.0, f64::max);
            match a {
                None => prop_assert_eq!(best, 0.0),
                Some(k) => {
                    prop_assert!(best > 0.0);
                    prop_assert_eq!(iou(&w.bbox, &sgt[*k].bbox), best);
                    let key = (sgt[*k].element.mark_id, sgt[*k].hyphen_part);
                    for b in &sgt {
                        if iou(&w.bbox, &b.bbox) == best {
                            prop_assert!(key <= (b.element.mark_id, b.hyphen_part));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn merged_words_conserve_assignment((sgt, ocr) in page_strategy()) {
        let (elements, unassigned) = align_boxes(&sgt, &ocr);
        let assigned: usize = elements.iter().map(|e| e.contributing_ocr.len()).sum();
        prop_assert_eq!(assigned + unassigned, ocr.len());
        let mut seen: Vec<&str> = elements.iter().flat_map(|e| e.contributing_ocr.iter().map(|w| w.text.as_str())).collect();
        seen.sort_unstable();
        let before = seen.len();
        seen.dedup();
        prop_assert_eq!(seen.len(), before);
        for pair in elements.windows(2) {
            prop_assert!(pair[0].sgt.mark_id <= pair[1].sgt.mark_id);
        }
    }
}

fn aligned(text: &str, ocr: &str) -> AlignedElement {
    AlignedElement { sgt: element(0, text), ocr_text: ocr.into(), contributing_ocr: Vec::new(), max_iou: 1.0, hyphenated: false }
}

proptest! {
    #[test]
    fn sentences_reconstruct_page(words in prop::collection::vec(("[A-Za-z0-9]{1,6}[.!?,]?", "[a-z]{0,5}"), 0..40)) {
        let elements: Vec<AlignedElement> = words.iter().map(|(s, o)| aligned(s, o)).collect();
        let sentences = SentenceSplitter::default().segment("a", 1, &elements);
        let page = gt_forge::align::align_page(&elements);
        let join = |f: &dyn Fn(&gt_forge::AlignedSentence) -> &str| {
            sentences.iter().map(f).filter(|s| !s.is_empty()).collect::<Vec<_>>().join(" ")
        };
        prop_assert_eq!(join(&|s| s.sgt_text.as_str()), page.sgt_text);
        prop_assert_eq!(join(&|s| s.ocr_text.as_str()), page.ocr_text);
        let n: usize = sentences.iter().map(|s| s.elements.len()).sum();
        prop_assert_eq!(n, elements.len());
        for (i, s) in sentences.iter().enumerate() {
            prop_assert_eq!(s.sentence_index, i);
        }
    }
}
