//! Ground-truth elements and position-marker injection.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tex::{tokenize, PlainSegment, SegmentItem, SpecialKind, TokenKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementType {
    Word,
    InlineMath,
    Citation,
    Reference,
}

impl ElementType {
    pub fn as_str(self) -> &'static str {
        match self {
            ElementType::Word => "word",
            ElementType::InlineMath => "inline_math",
            ElementType::Citation => "citation",
            ElementType::Reference => "reference",
        }
    }
}

impl From<SpecialKind> for ElementType {
    fn from(kind: SpecialKind) -> Self {
        match kind {
            SpecialKind::InlineMath => ElementType::InlineMath,
            SpecialKind::Citation => ElementType::Citation,
            SpecialKind::Reference => ElementType::Reference,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HyphenPart {
    First,
    Second,
}

/// A word, inline formula, citation or reference taken from the source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SgtElement {
    pub mark_id: usize,
    pub etype: ElementType,
    pub raw_tex: String,
    pub source_span: Range<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hyphen_part: Option<HyphenPart>,
}

/// Splits a segment into elements, numbering them from `first_id`.
pub fn split_elements(segment: &PlainSegment, first_id: usize) -> Vec<SgtElement> {
    let mut out = Vec::new();
    for item in &segment.items {
        match item {
            SegmentItem::Text { text, span } => {
                let mut word_start = None;
                for (i, c) in text.char_indices().chain(std::iter::once((text.len(), ' '))) {
                    match (c.is_whitespace(), word_start) {
                        (false, None) => word_start = Some(i),
                        (true, Some(s)) => {
                            out.push(SgtElement {
                                mark_id: first_id + out.len(),
                                etype: ElementType::Word,
                                raw_tex: text[s..i].to_owned(),
                                source_span: span.start + s..span.start + i,
                                hyphen_part: None,
                            });
                            word_start = None;
                        }
                        _ => {}
                    }
                }
            }
            SegmentItem::Tag(tag) => out.push(SgtElement {
                mark_id: first_id + out.len(),
                etype: tag.kind.into(),
                raw_tex: tag.raw_tex.clone(),
                source_span: tag.span.clone(),
                hyphen_part: None,
            }),
        }
    }
    out
}

/// Splits every segment, numbering elements gaplessly in source order.
pub fn collect_elements(segments: &[PlainSegment]) -> Vec<SgtElement> {
    let mut out = Vec::new();
    for seg in segments {
        let next = split_elements(seg, out.len());
        out.extend(next);
    }
    out
}

/// Marker command templates. `{name}` is replaced by `s<k>` / `e<k>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkerTemplate {
    pub start: String,
    pub end: String,
    /// Inserted once, immediately before `\begin{document}`.
    pub preamble: String,
}

impl MarkerTemplate {
    pub fn tikzmark() -> Self {
        MarkerTemplate {
            start: r"\tikzmark{{name}}".into(),
            end: r"\tikzmark{{name}}".into(),
            preamble: "\\usepackage{tikz}\\usetikzlibrary{tikzmark}\n".into(),
        }
    }

    pub fn savepos() -> Self {
        MarkerTemplate {
            start: r"\zsavepos{{name}}".into(),
            end: r"\zsavepos{{name}}".into(),
            preamble: "\\usepackage[savepos,abspage]{zref}\\makeatletter\\zref@addprop{savepos}{abspage}\\makeatother\n"
                .into(),
        }
    }

    pub fn validate(&self) -> Result<(), MarkerError> {
        for t in [&self.start, &self.end] {
            if !t.contains("{name}") {
                return Err(MarkerError::BadTemplate(t.clone()));
            }
        }
        Ok(())
    }

    pub fn start_marker(&self, mark_id: usize) -> String {
        self.start.replace("{name}", &start_name(mark_id))
    }

    pub fn end_marker(&self, mark_id: usize) -> String {
        self.end.replace("{name}", &end_name(mark_id))
    }
}

impl Default for MarkerTemplate {
    fn default() -> Self {
        MarkerTemplate::tikzmark()
    }
}

pub fn start_name(mark_id: usize) -> String {
    format!("s{mark_id}")
}

pub fn end_name(mark_id: usize) -> String {
    format!("e{mark_id}")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MarkerError {
    #[error("element {mark_id} overlaps or precedes the previous element")]
    OverlappingSpans { mark_id: usize },
    #[error("element {mark_id} span {span:?} is out of range or splits a character")]
    InvalidSpan { mark_id: usize, span: Range<usize> },
    #[error("marker template {0:?} lacks a {{name}} placeholder")]
    BadTemplate(String),
}

/// The marked source plus what is needed to undo the marking.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkedSource {
    text: String,
    elements: Vec<SgtElement>,
    template: MarkerTemplate,
    /// Inserted byte ranges in `text`, ascending.
    inserted: Vec<Range<usize>>,
}

impl MarkedSource {
    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn element_table(&self) -> &[SgtElement] {
        &self.elements
    }

    pub fn template(&self) -> &MarkerTemplate {
        &self.template
    }

    pub fn into_parts(self) -> (String, Vec<SgtElement>) {
        (self.text, self.elements)
    }
}

/// Byte offset at which the preamble line goes: the first `\begin{document}`
/// token, or the start of the file.
fn preamble_offset(source: &str) -> usize {
    tokenize(source)
        .into_iter()
        .find(|t| t.kind == TokenKind::EnvBegin("document".into()))
        .map_or(0, |t| t.span.start)
}

pub fn inject_markers(
    source: &str,
    elements: &[SgtElement],
    template: &MarkerTemplate,
) -> Result<MarkedSource, MarkerError> {
    template.validate()?;
    let mut prev_end = 0;
    for el in elements {
        let span = &el.source_span;
        if span.start > span.end
            || span.end > source.len()
            || !source.is_char_boundary(span.start)
            || !source.is_char_boundary(span.end)
        {
            return Err(MarkerError::InvalidSpan { mark_id: el.mark_id, span: span.clone() });
        }
        if span.start < prev_end {
            return Err(MarkerError::OverlappingSpans { mark_id: el.mark_id });
        }
        prev_end = span.end;
    }

    // (offset, insertion text); stable sort keeps end-before-start at shared offsets.
    let mut inserts: Vec<(usize, String)> = Vec::with_capacity(elements.len() * 2 + 1);
    inserts.push((preamble_offset(source), template.preamble.clone()));
    for el in elements {
        inserts.push((el.source_span.start, template.start_marker(el.mark_id)));
        inserts.push((el.source_span.end, template.end_marker(el.mark_id)));
    }
    inserts.sort_by_key(|(at, _)| *at);

    let extra: usize = inserts.iter().map(|(_, s)| s.len()).sum();
    let mut text = String::with_capacity(source.len() + extra);
    let mut inserted = Vec::with_capacity(inserts.len());
    let mut at = 0;
    for (offset, s) in inserts {
        text.push_str(&source[at..offset]);
        at = offset;
        inserted.push(text.len()..text.len() + s.len());
        text.push_str(&s);
    }
    text.push_str(&source[at..]);

    Ok(MarkedSource { text, elements: elements.to_vec(), template: template.clone(), inserted })
}

/// Removes every injected marker, giving back the original source bytes.
pub fn strip_markers(marked: &MarkedSource) -> String {
    let mut out = String::with_capacity(marked.text.len());
    let mut at = 0;
    for r in &marked.inserted {
        out.push_str(&marked.text[at..r.start]);
        at = r.end;
    }
    out.push_str(&marked.text[at..]);
    out
}
