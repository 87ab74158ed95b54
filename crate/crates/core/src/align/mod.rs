//! OCR-to-ground-truth alignment.

mod assign;
mod edit;
mod sentence;

pub use assign::{align_boxes, assign_ocr_to_sgt, merge_assigned, AlignedElement};
pub use edit::{align_tokens, edit_script, levenshtein, AlignedPair, EditOp, EditScript, OpCounts};
pub use sentence::{
    align_page, sentinelize, AlignedSentence, PageAlignment, SentenceElement, SentenceSplitter, SentinelError,
    SentinelMap, DEFAULT_ABBREVIATIONS,
};
