use gt_forge::marker::{collect_elements, inject_markers, strip_markers, ElementType, MarkerTemplate};
use gt_forge::tex::{build_tree, extract_plain_segments, parse, tokenize, SegmentItem, TokenKind};
use proptest::prelude::*;

const FRAGMENTS: &[&str] = &[
    "dust",
    "Cloud",
    "grains.",
    "The",
    "$x+y$",
    "$N=12$",
    "\\cite{a99}",
    "\\citep[p.~3]{b01,c02}",
    "\\ref{fig:1}",
    "Fig.~",
    "\\textbf{bold}",
    "\\emph{it}",
    "% note\n",
    "\n\n",
    "\\section{Intro}\n",
    "\\begin{equation}a=b\\end{equation}",
    "{grouped}",
    "na\\\"ive",
    "2.5",
];

fn body() -> impl Strategy<Value = String> {
    prop::collection::vec((prop::sample::select(FRAGMENTS), prop::sample::select(&[" ", "\n", "", "  "][..])), 0..40)
        .prop_map(|parts| parts.into_iter().map(|(f, sep)| format!("{f}{sep}")).collect())
}

fn document() -> impl Strategy<Value = String> {
    body().prop_map(|b| format!("\\documentclass{{article}}\n\\begin{{document}}\n{b}\n\\end{{document}}\n"))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn lexemes_rejoin_to_source(src in "[ -~\n\t]{0,512}") {
        let joined: String = tokenize(&src).iter().map(|t| t.lexeme.as_str()).collect();
        prop_assert_eq!(joined, src);
    }

    #[test]
    fn token_spans_tile_source(src in "[ -~\n]{0,256}") {
        let mut at = 0;
        for t in tokenize(&src) {
            prop_assert_eq!(t.span.start, at);
            prop_assert_eq!(&src[t.span.clone()], t.lexeme.as_str());
            at = t.span.end;
        }
        prop_assert_eq!(at, src.len());
    }

    #[test]
    fn tree_builder_is_total(src in "[ -~\n]{0,256}") {
        match build_tree(&tokenize(&src)) {
            Ok(tree) => prop_assert!(tree.check_invariants().is_ok()),
            Err(e) => prop_assert!(e.offset() <= src.len()),
        }
    }

    #[test]
    fn special_tags_recoverable_from_spans(src in document()) {
        let tree = parse(&src).unwrap();
        prop_assert!(tree.check_invariants().is_ok());
        for seg in extract_plain_segments(&tree) {
            for item in seg.items {
                match item {
                    SegmentItem::Tag(tag) => prop_assert_eq!(&src[tag.span.clone()], tag.raw_tex.as_str()),
                    SegmentItem::Text { text, span } => prop_assert_eq!(&src[span], text.as_str()),
                }
            }
        }
    }

    #[test]
    fn marking_round_trips(src in document(), savepos in any::<bool>()) {
        let tree = parse(&src).unwrap();
        let elements = collect_elements(&extract_plain_segments(&tree));
        let template = if savepos { MarkerTemplate::savepos() } else { MarkerTemplate::tikzmark() };
        let marked = inject_markers(&src, &elements, &template).unwrap();
        prop_assert_eq!(strip_markers(&marked), src.clone());

        for (i, el) in elements.iter().enumerate() {
            prop_assert_eq!(el.mark_id, i);
            prop_assert_eq!(&src[el.source_span.clone()], el.raw_tex.as_str());
        }

        let guarded: Vec<_> = tokenize(&src)
            .into_iter()
            .filter(|t| matches!(t.kind, TokenKind::Comment | TokenKind::Command(_) | TokenKind::MathDelim))
            .collect();
        for el in &elements {
            for at in [el.source_span.start, el.source_span.end] {
                for t in &guarded {
                    // `$a$$b$` closes and reopens inline math at the middle of `$$`.
                    let between_formulas = t.is_display_delim() && el.etype == ElementType::InlineMath;
                    if between_formulas {
                        continue;
                    }
                    prop_assert!(!(t.span.start < at && at < t.span.end), "marker at {} inside {:?}", at, t);
                }
            }
        }
    }

    #[test]
    fn marked_source_still_parses(src in document()) {
        let tree = parse(&src).unwrap();
        let elements = collect_elements(&extract_plain_segments(&tree));
        let marked = inject_markers(&src, &elements, &MarkerTemplate::tikzmark()).unwrap();
        prop_assert!(parse(marked.text()).is_ok());
    }
}

#[test]
fn element_types_follow_tags() {
    let src = "\\begin{document}\nSee $a$ and \\cite{k} in \\ref{s}.\n\\end{document}";
    let elements = collect_elements(&extract_plain_segments(&parse(src).unwrap()));
    let types: Vec<_> = elements.iter().map(|e| e.etype).collect();
    assert_eq!(
        types,
        [
            ElementType::Word,
            ElementType::InlineMath,
            ElementType::Word,
            ElementType::Citation,
            ElementType::Word,
            ElementType::Reference,
            ElementType::Word,
        ]
    );
}
