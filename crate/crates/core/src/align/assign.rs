//! OCR-word to ground-truth-box assignment and fragment merging.

use serde::{Deserialize, Serialize};

use crate::geom::iou;
use crate::geometry::SgtBox;
use crate::marker::{HyphenPart, SgtElement};
use crate::ocr::OcrWord;

/// One ground-truth element paired with the OCR text that covers it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedElement {
    pub sgt: SgtElement,
    pub ocr_text: String,
    /// Sorted by increasing `x0` within each line part.
    pub contributing_ocr: Vec<OcrWord>,
    pub max_iou: f64,
    pub hyphenated: bool,
}

fn box_key(b: &SgtBox) -> (usize, Option<HyphenPart>) {
    (b.element.mark_id, b.hyphen_part)
}

/// For every OCR word, the index of the ground-truth box it is assigned to.
///
/// A word goes to the overlapping box with the largest IOU; ties go to the
/// smaller mark id. Words overlapping no box stay unassigned.
pub fn assign_ocr_to_sgt(sgt: &[SgtBox], ocr: &[OcrWord]) -> Vec<Option<usize>> {
    ocr.iter()
        .map(|word| {
            let mut best: Option<(usize, f64)> = None;
            for (k, b) in sgt.iter().enumerate() {
                let v = iou(&word.bbox, &b.bbox);
                if v <= 0.0 {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((bk, bv)) => v > bv || (v == bv && box_key(b) < box_key(&sgt[bk])),
                };
                if better {
                    best = Some((k, v));
                }
            }
            best.map(|(k, _)| k)
        })
        .collect()
}

/// Orders a box's assigned words left to right and joins them with single
/// spaces.
pub fn merge_assigned(sgt: &SgtBox, assigned: &[&OcrWord]) -> AlignedElement {
    let mut words: Vec<OcrWord> = assigned.iter().map(|w| (*w).clone()).collect();
    words.sort_by(|a, b| a.bbox.x0.total_cmp(&b.bbox.x0).then_with(|| a.bbox.y0.total_cmp(&b.bbox.y0)));
    let ocr_text = words.iter().map(|w| w.text.as_str()).collect::<Vec<_>>().join(" ");
    let max_iou = words.iter().map(|w| iou(&w.bbox, &sgt.bbox)).fold(0.0, f64::max);
    AlignedElement {
        sgt: sgt.element.clone(),
        ocr_text,
        contributing_ocr: words,
        max_iou,
        hyphenated: sgt.hyphen_part.is_some(),
    }
}

/// Assigns and merges a whole page. Returns elements ordered by mark id
/// (line parts of a broken element folded into one) and the number of OCR
/// words left unassigned.
pub fn align_boxes(sgt: &[SgtBox], ocr: &[OcrWord]) -> (Vec<AlignedElement>, usize) {
    let assignment = assign_ocr_to_sgt(sgt, ocr);
    let unassigned = assignment.iter().filter(|a| a.is_none()).count();
    let mut per_box: Vec<Vec<&OcrWord>> = vec![Vec::new(); sgt.len()];
    for (word, target) in ocr.iter().zip(&assignment) {
        if let Some(k) = target {
            per_box[*k].push(word);
        }
    }
    let mut order: Vec<usize> = (0..sgt.len()).collect();
    order.sort_by_key(|&k| box_key(&sgt[k]));

    let mut out: Vec<AlignedElement> = Vec::with_capacity(sgt.len());
    for k in order {
        let merged = merge_assigned(&sgt[k], &per_box[k]);
        match out.last_mut() {
            Some(prev) if prev.sgt.mark_id == merged.sgt.mark_id && merged.hyphenated => fold_part(prev, merged),
            _ => {
                let mut merged = merged;
                merged.sgt.hyphen_part = None;
                out.push(merged);
            }
        }
    }
    (out, unassigned)
}

fn fold_part(first: &mut AlignedElement, second: AlignedElement) {
    first.ocr_text = [first.ocr_text.as_str(), second.ocr_text.as_str()]
        .into_iter()
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>()
        .join(" ");
    first.contributing_ocr.extend(second.contributing_ocr);
    first.max_iou = first.max_iou.max(second.max_iou);
}
