//! Extraction of running body text from a document tree.
//!
//! Only text inside the `document` environment counts. Floats, tables,
//! display math, captions and footnotes are skipped. Inline math, citations
//! and references that sit inside running text are kept in place as
//! [`SpecialTag`]s so they can be marked like words.

use std::ops::Range;
use std::sync::OnceLock;

use regex::Regex;

use super::tree::{DocumentTree, NodeKind, TexNode};

/// Environments that never contribute plain text.
pub const EXCLUDED_ENVS: &[&str] = &[
    "table", "table*", "tabular", "tabular*", "figure", "figure*", "equation", "equation*", "align",
    "align*", "eqnarray", "eqnarray*", "displaymath", "verbatim", "verbatim*", "gather", "gather*",
    "multline", "multline*", "array", "picture", "tabbing", "thebibliography", "comment", "lstlisting",
    "deluxetable", "deluxetable*", "math",
];

/// Commands that end a segment; their arguments are never plain text.
const BLOCK_COMMANDS: &[&str] = &[
    "part", "chapter", "section", "subsection", "subsubsection", "paragraph", "subparagraph", "par",
    "item", "maketitle", "title", "author", "date", "caption", "footnote", "footnotetext", "newpage",
    "clearpage", "bibliography", "bibliographystyle", "appendix", "tableofcontents", "and",
    "affil", "affiliation", "email", "keywords", "institute", "thanks",
];

/// Commands whose brace arguments are read as inline text.
const INLINE_FORMATTING: &[&str] = &[
    "textbf", "textit", "emph", "textrm", "textsf", "texttt", "textsc", "textup", "textsl", "textmd",
    "textnormal", "underline", "mbox", "hbox", "uppercase", "lowercase",
];

/// Letter-named macros that typeset as part of a word (accents, special letters).
const TEXT_MACROS: &[&str] = &[
    "c", "v", "H", "u", "t", "d", "b", "k", "r", "ss", "o", "O", "ae", "AE", "oe", "OE", "aa", "AA", "l", "L",
    "i", "j", "ldots", "dots", "TeX", "LaTeX", "textasciitilde",
];

const REFERENCE_COMMANDS: &[&str] = &["ref", "eqref", "autoref", "pageref", "cref", "Cref", "vref", "nameref", "Ref"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpecialKind {
    InlineMath,
    Citation,
    Reference,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecialTag {
    pub kind: SpecialKind,
    pub raw_tex: String,
    pub span: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SegmentItem {
    /// A contiguous run of source text. May contain whitespace.
    Text { text: String, span: Range<usize> },
    Tag(SpecialTag),
}

/// One paragraph-like stretch of running text.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PlainSegment {
    pub items: Vec<SegmentItem>,
}

pub fn is_citation_command(name: &str) -> bool {
    (name.starts_with("cite") || name.starts_with("Cite")) && name != "nocite"
}

pub fn is_reference_command(name: &str) -> bool {
    REFERENCE_COMMANDS.contains(&name)
}

fn is_symbol_command(name: &str) -> bool {
    let mut chars = name.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => {
            !c.is_ascii_alphabetic() && !c.is_whitespace() && !matches!(c, '\\' | '[' | ']' | '(' | ')')
        }
        _ => false,
    }
}

fn paragraph_break() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[ \t\r]*\n[ \t\r]*\n\s*").expect("valid regex"))
}

/// Collects the plain-text segments of the document body.
pub fn extract_plain_segments(tree: &DocumentTree) -> Vec<PlainSegment> {
    let Some(doc) = tree.document_env() else {
        return Vec::new();
    };
    let mut x = Extractor { src: tree.source(), segments: Vec::new(), current: PlainSegment::default(), run: None };
    x.children(&doc.children);
    x.boundary();
    x.segments
}

struct Extractor<'s> {
    src: &'s str,
    segments: Vec<PlainSegment>,
    current: PlainSegment,
    run: Option<Range<usize>>,
}

impl<'s> Extractor<'s> {
    fn extend_run(&mut self, span: Range<usize>) {
        if span.is_empty() {
            return;
        }
        match &mut self.run {
            Some(run) if run.end == span.start => run.end = span.end,
            _ => {
                self.finish_run();
                self.run = Some(span);
            }
        }
    }

    fn finish_run(&mut self) {
        if let Some(span) = self.run.take() {
            let text = self.src[span.clone()].to_owned();
            self.current.items.push(SegmentItem::Text { text, span });
        }
    }

    fn boundary(&mut self) {
        self.finish_run();
        let seg = std::mem::take(&mut self.current);
        let has_content = seg.items.iter().any(|item| match item {
            SegmentItem::Text { text, .. } => !text.trim().is_empty(),
            SegmentItem::Tag(_) => true,
        });
        if has_content {
            self.segments.push(seg);
        }
    }

    fn tag(&mut self, kind: SpecialKind, span: Range<usize>) {
        self.finish_run();
        let raw_tex = self.src[span.clone()].to_owned();
        self.current.items.push(SegmentItem::Tag(SpecialTag { kind, raw_tex, span }));
    }

    fn children(&mut self, nodes: &[TexNode]) {
        let mut i = 0;
        while i < nodes.len() {
            let node = &nodes[i];
            match node.command_name() {
                // \( ... \) and \[ ... \] arrive as sibling command pairs.
                Some(open @ ("(" | "[")) => {
                    let close = if open == "(" { ")" } else { "]" };
                    let end = nodes[i + 1..].iter().position(|n| n.command_name() == Some(close));
                    match (open, end) {
                        ("(", Some(off)) => self.tag(SpecialKind::InlineMath, node.span.start..nodes[i + 1 + off].span.end),
                        _ => self.boundary(),
                    }
                    i += end.map_or(1, |off| off + 2);
                    continue;
                }
                _ => self.node(node),
            }
            i += 1;
        }
    }

    fn node(&mut self, node: &TexNode) {
        match &node.kind {
            NodeKind::PlainText => {
                let mut at = node.span.start;
                let text = node.text(self.src);
                for m in paragraph_break().find_iter(text) {
                    self.extend_run(at..node.span.start + m.start());
                    self.boundary();
                    at = node.span.start + m.end();
                }
                self.extend_run(at..node.span.end);
            }
            NodeKind::Comment => self.finish_run(),
            NodeKind::InlineMath => self.tag(SpecialKind::InlineMath, node.span.clone()),
            NodeKind::DisplayMath => self.boundary(),
            NodeKind::Group | NodeKind::OptionalArg => {
                if node.children.iter().all(|c| is_simple_text(c)) {
                    self.extend_run(node.span.clone());
                } else {
                    self.finish_run();
                    self.children(&node.children);
                    self.finish_run();
                }
            }
            NodeKind::Environment(name) => {
                self.boundary();
                if !EXCLUDED_ENVS.contains(&name.as_str()) {
                    self.children(&node.children);
                    self.boundary();
                }
            }
            NodeKind::CommandCall(name) => self.command(name, node),
            NodeKind::Root => self.children(&node.children),
        }
    }

    fn command(&mut self, name: &str, node: &TexNode) {
        if is_citation_command(name) {
            self.tag(SpecialKind::Citation, node.span.clone());
        } else if is_reference_command(name) {
            self.tag(SpecialKind::Reference, node.span.clone());
        } else if is_symbol_command(name) || TEXT_MACROS.contains(&name) {
            self.extend_run(node.span.clone());
        } else if INLINE_FORMATTING.contains(&name) {
            self.finish_run();
            for arg in node.children.iter().filter(|c| c.kind == NodeKind::Group) {
                self.children(&arg.children);
                self.finish_run();
            }
        } else if BLOCK_COMMANDS.contains(&name.trim_end_matches('*')) {
            self.boundary();
        } else {
            self.finish_run();
        }
    }
}

fn is_simple_text(node: &TexNode) -> bool {
    match &node.kind {
        NodeKind::PlainText => true,
        NodeKind::CommandCall(name) => (is_symbol_command(name) || TEXT_MACROS.contains(&name.as_str())) && node.children.iter().all(is_simple_text),
        NodeKind::Group => node.children.iter().all(is_simple_text),
        _ => false,
    }
}
