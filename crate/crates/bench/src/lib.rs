//! Seeded workload generators shared by the benchmarks and the acceptance
//! suite.

use gt_forge::ocr::OcrWord;
use gt_forge::{BBox, ElementType, HyphenPart, SgtBox, SgtElement};
use rand::seq::SliceRandom;
use rand::Rng;

/// Running-text fragments used to assemble synthetic article bodies.
pub const TEX_FRAGMENTS: &[&str] = &[
    "dust",
    "The",
    "grains",
    "emission.",
    "cloud,",
    "$x+y$",
    "$T_{\\rm d}=15$~K",
    "\\citet{smith99}",
    "\\citep[e.g.,][]{jones01,lee05}",
    "Fig.~\\ref{fig:map}",
    "\\textit{in situ}",
    "% comment\n",
    "\n\n",
    "\\section{Results}\n",
    "\\begin{figure}\\caption{Map.}\\end{figure}\n",
    "1.5",
    "sub-mm",
];

/// Printable ASCII plus newline and tab.
pub fn random_ascii<R: Rng>(rng: &mut R, max_len: usize) -> String {
    let len = rng.gen_range(0..=max_len);
    (0..len)
        .map(|_| match rng.gen_range(0..20) {
            0 => '\n',
            1 => '\t',
            _ => rng.gen_range(0x20u8..0x7f) as char,
        })
        .collect()
}

/// A TeX-heavy variant of [`random_ascii`]: markup characters are common.
pub fn random_texlike<R: Rng>(rng: &mut R, max_len: usize) -> String {
    const ALPHABET: &[u8] = b"\\{}[]$%~ \nabcXYZ01begin{document}end";
    let len = rng.gen_range(0..=max_len);
    (0..len).map(|_| *ALPHABET.choose(rng).expect("non-empty") as char).collect()
}

/// A complete, well-formed article with `fragments` body fragments.
pub fn random_article<R: Rng>(rng: &mut R, fragments: usize) -> String {
    let mut body = String::new();
    for _ in 0..fragments {
        body.push_str(TEX_FRAGMENTS.choose(rng).expect("non-empty"));
        body.push_str(*[" ", " ", "\n", ""].choose(rng).expect("non-empty"));
    }
    format!("\\documentclass{{aastex}}\n\\begin{{document}}\n{body}\n\\end{{document}}\n")
}

/// Random source text with non-overlapping element spans over it.
pub fn random_layout<R: Rng>(rng: &mut R, max_len: usize, max_elements: usize) -> (String, Vec<SgtElement>) {
    let source = random_ascii(rng, max_len);
    let mut cuts: Vec<usize> = (0..rng.gen_range(0..=max_elements * 2)).map(|_| rng.gen_range(0..=source.len())).collect();
    cuts.sort_unstable();
    let elements = cuts
        .chunks_exact(2)
        .enumerate()
        .map(|(k, c)| SgtElement {
            mark_id: k,
            etype: ElementType::Word,
            raw_tex: source[c[0]..c[1]].to_owned(),
            source_span: c[0]..c[1],
            hyphen_part: None,
        })
        .collect();
    (source, elements)
}

/// A string over `alphabet` with length in `0..=max_len`.
pub fn random_string<R: Rng>(rng: &mut R, alphabet: &[char], max_len: usize) -> String {
    let len = rng.gen_range(0..=max_len);
    (0..len).map(|_| *alphabet.choose(rng).expect("non-empty")).collect()
}

fn random_bbox<R: Rng>(rng: &mut R, extent: u32) -> BBox {
    let (x, y) = (rng.gen_range(0..extent), rng.gen_range(0..extent / 3));
    let (w, h) = (rng.gen_range(1..extent / 4), rng.gen_range(1..extent / 10));
    BBox::new(f64::from(x), f64::from(y), f64::from(x + w), f64::from(y + h))
}

/// A page of ground-truth boxes and OCR words on a coarse integer grid, so
/// that IOU ties actually occur.
pub fn random_page<R: Rng>(rng: &mut R, max_sgt: usize, max_ocr: usize) -> (Vec<SgtBox>, Vec<OcrWord>) {
    let n_sgt = rng.gen_range(0..=max_sgt);
    let n_ocr = rng.gen_range(0..=max_ocr);
    let sgt = (0..n_sgt)
        .map(|_| {
            let id = rng.gen_range(0..max_sgt.max(1));
            let part = match rng.gen_range(0..4) {
                0 => Some(HyphenPart::First),
                1 => Some(HyphenPart::Second),
                _ => None,
            };
            let element = SgtElement {
                mark_id: id,
                etype: ElementType::Word,
                raw_tex: format!("w{id}"),
                source_span: 0..0,
                hyphen_part: part,
            };
            SgtBox { element, page: 1, bbox: random_bbox(rng, 40), hyphen_part: part }
        })
        .collect();
    let ocr = (0..n_ocr)
        .map(|k| OcrWord {
            text: format!("o{k}"),
            bbox: random_bbox(rng, 40),
            confidence: f64::from(rng.gen_range(0..=100u32)),
            page: 1,
            block: 1,
            paragraph: 1,
            line: 1,
            word_index: k as u32,
        })
        .collect();
    (sgt, ocr)
}
