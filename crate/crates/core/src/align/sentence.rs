//! Page-level alignment, sentence segmentation and the sentinel transform.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::assign::AlignedElement;
use super::edit::{edit_script, EditScript};
use crate::marker::ElementType;

pub const DEFAULT_ABBREVIATIONS: &[&str] = &["al.", "Fig.", "Eq.", "Sec.", "vs.", "e.g.", "i.e.", "cf.", "No."];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PageAlignment {
    pub sgt_text: String,
    pub ocr_text: String,
    pub script: EditScript,
}

fn join_nonempty<'a>(parts: impl IntoIterator<Item = &'a str>) -> String {
    parts.into_iter().filter(|s| !s.is_empty()).collect::<Vec<_>>().join(" ")
}

/// Joins one page's element texts in mark order and aligns them by
/// character.
pub fn align_page(elements: &[AlignedElement]) -> PageAlignment {
    let sgt_text = join_nonempty(elements.iter().map(|e| e.sgt.raw_tex.as_str()));
    let ocr_text = join_nonempty(elements.iter().map(|e| e.ocr_text.as_str()));
    let script = edit_script(&sgt_text, &ocr_text);
    PageAlignment { sgt_text, ocr_text, script }
}

/// The ground-truth and OCR text of one element inside a sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceElement {
    pub etype: ElementType,
    pub hyphenated: bool,
    pub sgt: String,
    pub ocr: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignedSentence {
    pub article_id: String,
    pub page: u32,
    pub sentence_index: usize,
    pub sgt_text: String,
    pub ocr_text: String,
    pub elements: Vec<SentenceElement>,
    pub edit: EditScript,
}

impl AlignedSentence {
    pub fn element_types(&self) -> Vec<ElementType> {
        self.elements.iter().map(|e| e.etype).collect()
    }

    pub fn hyphen_flags(&self) -> Vec<bool> {
        self.elements.iter().map(|e| e.hyphenated).collect()
    }
}

/// Rule-based sentence splitter over ground-truth element texts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceSplitter {
    abbreviations: Vec<String>,
}

impl Default for SentenceSplitter {
    fn default() -> Self {
        SentenceSplitter::new(DEFAULT_ABBREVIATIONS.iter().map(|s| s.to_string()).collect())
    }
}

impl SentenceSplitter {
    pub fn new(abbreviations: Vec<String>) -> Self {
        SentenceSplitter { abbreviations }
    }

    /// Whether a sentence ends between `current` and `next`.
    pub fn breaks_between(&self, current: &str, next: &str) -> bool {
        let terminal = current.ends_with(['.', '!', '?']);
        let opens = next.chars().next().is_some_and(|c| c.is_uppercase() || c.is_ascii_digit());
        if !terminal || !opens {
            return false;
        }
        let token = current.trim_start_matches(|c: char| !c.is_alphanumeric());
        !self.abbreviations.iter().any(|a| a == token || a == current)
    }

    /// Cuts a page into sentences. Each element belongs to exactly one
    /// sentence; the OCR side is cut at the same element boundaries.
    pub fn segment(&self, article_id: &str, page: u32, elements: &[AlignedElement]) -> Vec<AlignedSentence> {
        let mut out = Vec::new();
        let mut start = 0;
        for i in 0..elements.len() {
            let last = i + 1 == elements.len();
            if last || self.breaks_between(&elements[i].sgt.raw_tex, &elements[i + 1].sgt.raw_tex) {
                let slice = &elements[start..=i];
                let sgt_text = join_nonempty(slice.iter().map(|e| e.sgt.raw_tex.as_str()));
                let ocr_text = join_nonempty(slice.iter().map(|e| e.ocr_text.as_str()));
                let edit = edit_script(&sgt_text, &ocr_text);
                out.push(AlignedSentence {
                    article_id: article_id.to_owned(),
                    page,
                    sentence_index: out.len(),
                    sgt_text,
                    ocr_text,
                    elements: slice
                        .iter()
                        .map(|e| SentenceElement {
                            etype: e.sgt.etype,
                            hyphenated: e.hyphenated,
                            sgt: e.sgt.raw_tex.clone(),
                            ocr: e.ocr_text.clone(),
                        })
                        .collect(),
                    edit,
                });
                start = i + 1;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SentinelError {
    #[error("sentinel {ch:?} occurs in plain text {sample:?}")]
    SentinelCollision { ch: char, sample: String },
    #[error("sentinels must be distinct non-whitespace characters")]
    InvalidSentinels,
}

/// Replacement characters for non-word elements in "fixed" text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentinelMap {
    pub inline_math: char,
    pub citation: char,
    pub reference: char,
}

impl Default for SentinelMap {
    fn default() -> Self {
        SentinelMap { inline_math: '$', citation: '@', reference: '#' }
    }
}

impl SentinelMap {
    pub fn new(inline_math: char, citation: char, reference: char) -> Result<Self, SentinelError> {
        let all = [inline_math, citation, reference];
        if all.iter().any(|c| c.is_whitespace()) || all[0] == all[1] || all[0] == all[2] || all[1] == all[2] {
            return Err(SentinelError::InvalidSentinels);
        }
        Ok(SentinelMap { inline_math, citation, reference })
    }

    pub fn sentinel(&self, etype: ElementType) -> Option<char> {
        match etype {
            ElementType::Word => None,
            ElementType::InlineMath => Some(self.inline_math),
            ElementType::Citation => Some(self.citation),
            ElementType::Reference => Some(self.reference),
        }
    }

    /// Fails if any sentinel appears in the given plain-text sample.
    pub fn check_sample<'a>(&self, plain_words: impl IntoIterator<Item = &'a str>) -> Result<(), SentinelError> {
        for word in plain_words {
            if let Some(ch) = [self.inline_math, self.citation, self.reference].into_iter().find(|c| word.contains(*c)) {
                return Err(SentinelError::SentinelCollision { ch, sample: word.to_owned() });
            }
        }
        Ok(())
    }
}

/// Replaces every inline-math, citation and reference element by its
/// sentinel on both sides. OCR text that covered nothing stays empty.
pub fn sentinelize(sentence: &AlignedSentence, map: &SentinelMap) -> (String, String) {
    let mut sgt = Vec::with_capacity(sentence.elements.len());
    let mut ocr = Vec::with_capacity(sentence.elements.len());
    for el in &sentence.elements {
        match map.sentinel(el.etype) {
            None => {
                sgt.push(el.sgt.clone());
                ocr.push(el.ocr.clone());
            }
            Some(ch) => {
                sgt.push(ch.to_string());
                ocr.push(if el.ocr.is_empty() { String::new() } else { ch.to_string() });
            }
        }
    }
    (join_nonempty(sgt.iter().map(String::as_str)), join_nonempty(ocr.iter().map(String::as_str)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marker::SgtElement;

    fn el(id: usize, etype: ElementType, sgt: &str, ocr: &str) -> AlignedElement {
        AlignedElement {
            sgt: SgtElement { mark_id: id, etype, raw_tex: sgt.into(), source_span: 0..0, hyphen_part: None },
            ocr_text: ocr.into(),
            contributing_ocr: Vec::new(),
            max_iou: 0.0,
            hyphenated: false,
        }
    }

    fn words(pairs: &[(&str, &str)]) -> Vec<AlignedElement> {
        pairs.iter().enumerate().map(|(i, (s, o))| el(i, ElementType::Word, s, o)).collect()
    }

    #[test]
    fn page_alignment() {
        let page = align_page(&words(&[("The", "The"), ("cat", "eat")]));
        assert_eq!(page.sgt_text, "The cat");
        assert_eq!(page.ocr_text, "The eat");
        assert_eq!(page.script.distance, 1);
        assert_eq!(page.script.counts().replace, 1);
    }

    #[test]
    fn empty_ocr_collapses() {
        let page = align_page(&words(&[("a", ""), ("b", "")]));
        assert_eq!(page.ocr_text, "");
        assert!(page.script.ops.iter().all(|op| matches!(op, super::super::edit::EditOp::Delete(_))));
        let page = align_page(&words(&[("a", "x"), ("b", ""), ("c", "z")]));
        assert_eq!(page.ocr_text, "x z");
        assert_eq!(align_page(&[]).sgt_text, "");
    }

    #[test]
    fn two_sentences() {
        let els = words(&[("The", ""), ("cat", ""), ("sat.", ""), ("It", ""), ("ran.", "")]);
        let s = SentenceSplitter::default().segment("a", 1, &els);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].sgt_text, "The cat sat.");
        assert_eq!(s[1].sgt_text, "It ran.");
        assert_eq!(s[1].sentence_index, 1);
    }

    #[test]
    fn abbreviation_blocks_break() {
        let els = words(&[("et", ""), ("al.", ""), ("(1999)", ""), ("showed", "")]);
        assert_eq!(SentenceSplitter::default().segment("a", 1, &els).len(), 1);
        let sp = SentenceSplitter::default();
        assert!(!sp.breaks_between("Fig.", "3"));
        assert!(!sp.breaks_between("(e.g.", "Smith"));
        assert!(sp.breaks_between("done.", "7"));
        assert!(!sp.breaks_between("done", "Next"));
    }

    #[test]
    fn no_terminal_punctuation() {
        let els = words(&[("a", "a"), ("b", "b")]);
        assert_eq!(SentenceSplitter::default().segment("a", 1, &els).len(), 1);
        assert!(SentenceSplitter::default().segment("a", 1, &[]).is_empty());
    }

    #[test]
    fn sentence_ocr_cut_at_element_boundary() {
        let els = words(&[("sat.", "sat."), ("It", "lt"), ("ran.", "")]);
        let s = SentenceSplitter::default().segment("a", 1, &els);
        assert_eq!((s[0].ocr_text.as_str(), s[1].ocr_text.as_str()), ("sat.", "lt"));
        assert_eq!(s[1].edit.distance, 6);
    }

    #[test]
    fn sentinel_examples() {
        let els = vec![
            el(0, ElementType::Word, "flux", "flux"),
            el(1, ElementType::Word, "is", "is"),
            el(2, ElementType::InlineMath, "$x+y$", "x+y"),
            el(3, ElementType::Word, "here", "here"),
        ];
        let s = &SentenceSplitter::default().segment("a", 1, &els)[0];
        assert_eq!(sentinelize(s, &SentinelMap::default()), ("flux is $ here".into(), "flux is $ here".into()));

        let els = vec![el(0, ElementType::Word, "see", "see"), el(1, ElementType::Citation, r"\cite{k}", "")];
        let s = &SentenceSplitter::default().segment("a", 1, &els)[0];
        assert_eq!(sentinelize(s, &SentinelMap::default()), ("see @".into(), "see".into()));

        let plain = words(&[("no", "n0"), ("specials", "specials")]);
        let s = &SentenceSplitter::default().segment("a", 1, &plain)[0];
        assert_eq!(sentinelize(s, &SentinelMap::default()), (s.sgt_text.clone(), s.ocr_text.clone()));
    }

    #[test]
    fn sentinel_collision() {
        let map = SentinelMap::default();
        assert!(map.check_sample(["plain", "words"]).is_ok());
        assert_eq!(
            map.check_sample(["user@host"]),
            Err(SentinelError::SentinelCollision { ch: '@', sample: "user@host".into() })
        );
        assert_eq!(SentinelMap::new('$', '$', '#'), Err(SentinelError::InvalidSentinels));
    }
}
