//! Article triage: main-file detection, journal classification and the
//! markability check.

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tex::{DocumentTree, NodeKind};

pub const DEFAULT_JOURNAL_PATTERNS: &[&str] = &["aastex", "apj", "mn"];

/// Only this many non-comment lines are searched for the class directive.
pub const CLASS_SCAN_LINES: usize = 200;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MainFileError {
    #[error("no file contains \\documentclass or \\documentstyle")]
    NoMain,
    #[error("more than one candidate main file: {0:?}")]
    AmbiguousMain(Vec<PathBuf>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "class", rename_all = "snake_case")]
pub enum JournalClass {
    Astronomy(String),
    NonTarget,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    ContainsInput,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Markability {
    Accept,
    Reject(RejectReason),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArticleRecord {
    pub article_id: String,
    pub root_dir: PathBuf,
    pub main_file: Option<PathBuf>,
    pub journal_class: JournalClass,
    pub markable: Option<Markability>,
}

fn directive_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"\\document(?:class|style)\s*(?:\[[^\]]*\])?\s*\{([^}]*)\}").expect("valid regex")
    })
}

fn has_directive_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\\document(?:class|style)\b").expect("valid regex"))
}

/// Removes a trailing `%` comment from one line, honouring `\%`.
pub fn strip_line_comment(line: &str) -> &str {
    let bytes = line.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'\\' => i += 2,
            b'%' => return &line[..i],
            _ => i += 1,
        }
    }
    line
}

fn uncommented_lines(source: &str) -> impl Iterator<Item = &str> {
    source.lines().map(strip_line_comment).filter(|l| !l.trim().is_empty())
}

/// Picks the unique file whose uncommented text carries a class or style
/// directive. The answer does not depend on the order of `files`.
pub fn find_main_file<P: AsRef<Path>>(files: &[(P, Vec<u8>)]) -> Result<PathBuf, MainFileError> {
    let mut candidates: Vec<PathBuf> = files
        .iter()
        .filter(|(_, bytes)| {
            let text = String::from_utf8_lossy(bytes);
            let found = uncommented_lines(&text).any(|l| has_directive_re().is_match(l));
            found
        })
        .map(|(p, _)| p.as_ref().to_path_buf())
        .collect();
    candidates.sort();
    candidates.dedup();
    match candidates.len() {
        0 => Err(MainFileError::NoMain),
        1 => Ok(candidates.remove(0)),
        _ => Err(MainFileError::AmbiguousMain(candidates)),
    }
}

/// Compiled journal-name patterns, matched case-insensitively on word
/// boundaries against the class/style argument.
#[derive(Debug, Clone)]
pub struct JournalPatterns {
    names: Vec<String>,
    matcher: Regex,
}

impl JournalPatterns {
    pub fn new<S: AsRef<str>>(patterns: &[S]) -> Result<Self, regex::Error> {
        let names: Vec<String> = patterns.iter().map(|p| p.as_ref().to_owned()).collect();
        let alternation = if names.is_empty() { "[^\\s\\S]".to_owned() } else { names.join("|") };
        let matcher = Regex::new(&format!(r"(?i)\b(?:{alternation})\b"))?;
        Ok(JournalPatterns { names, matcher })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn matches(&self, class_name: &str) -> bool {
        self.matcher.is_match(class_name)
    }
}

impl Default for JournalPatterns {
    fn default() -> Self {
        JournalPatterns::new(DEFAULT_JOURNAL_PATTERNS).expect("default patterns compile")
    }
}

/// The class or style name declared in the first [`CLASS_SCAN_LINES`]
/// non-comment lines, if any.
pub fn declared_class(source: &str) -> Option<String> {
    let head: Vec<&str> = uncommented_lines(source).take(CLASS_SCAN_LINES).collect();
    let head = head.join("\n");
    directive_re().captures(&head).map(|c| c[1].trim().to_owned())
}

pub fn classify_journal(main_source: &str, patterns: &JournalPatterns) -> JournalClass {
    match declared_class(main_source) {
        None => JournalClass::Unknown,
        Some(name) if patterns.matches(&name) => JournalClass::Astronomy(name),
        Some(_) => JournalClass::NonTarget,
    }
}

/// Rejects documents that pull in external text through `\input` or
/// `\include`. Comments are separate tree nodes and verbatim bodies are
/// opaque text, so only effective commands are seen.
pub fn check_markable(tree: &DocumentTree) -> Markability {
    let mut found = false;
    tree.root().walk(&mut |n| {
        if matches!(&n.kind, NodeKind::CommandCall(name) if name == "input" || name == "include") {
            found = true;
        }
    });
    if found {
        Markability::Reject(RejectReason::ContainsInput)
    } else {
        Markability::Accept
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tex::parse;

    fn file(name: &str, body: &str) -> (PathBuf, Vec<u8>) {
        (PathBuf::from(name), body.as_bytes().to_vec())
    }

    #[test]
    fn single_main_file() {
        let files = vec![file("sec.tex", "text"), file("ms.tex", "\\documentclass{article}")];
        assert_eq!(find_main_file(&files).unwrap(), PathBuf::from("ms.tex"));
    }

    #[test]
    fn ambiguous_main() {
        let files = vec![file("b.tex", "\\documentclass{article}"), file("a.tex", "\\documentstyle{mn}")];
        assert_eq!(
            find_main_file(&files).unwrap_err(),
            MainFileError::AmbiguousMain(vec!["a.tex".into(), "b.tex".into()])
        );
    }

    #[test]
    fn commented_directive_is_ignored() {
        let files = vec![file("a.tex", "% \\documentclass{article}\n  %\\documentstyle{mn}")];
        assert_eq!(find_main_file(&files).unwrap_err(), MainFileError::NoMain);
    }

    #[test]
    fn escaped_percent_keeps_directive() {
        assert_eq!(strip_line_comment(r"50\% \documentclass{x} % c"), r"50\% \documentclass{x} ");
    }

    #[test]
    fn order_independent() {
        let a = vec![file("x.tex", "\\documentclass{a}"), file("y.tex", "")];
        let b: Vec<_> = a.iter().rev().cloned().collect();
        assert_eq!(find_main_file(&a), find_main_file(&b));
    }

    #[test]
    fn classify_examples() {
        let p = JournalPatterns::default();
        assert_eq!(classify_journal("\\documentclass[12pt]{aastex}", &p), JournalClass::Astronomy("aastex".into()));
        assert_eq!(classify_journal("\\documentstyle{mn}", &p), JournalClass::Astronomy("mn".into()));
        assert_eq!(classify_journal("\\documentclass{article}", &p), JournalClass::NonTarget);
        assert_eq!(classify_journal("no directive", &p), JournalClass::Unknown);
    }

    #[test]
    fn classify_is_case_insensitive_and_word_bounded() {
        let p = JournalPatterns::default();
        assert_eq!(classify_journal("\\documentclass{AASTeX}", &p), JournalClass::Astronomy("AASTeX".into()));
        assert_eq!(classify_journal("\\documentclass{mnras}", &p), JournalClass::NonTarget);
        assert_eq!(classify_journal("\\documentclass{emulateapj}", &p), JournalClass::NonTarget);
    }

    #[test]
    fn directive_past_scan_window_is_unknown() {
        let mut src = "x\n".repeat(CLASS_SCAN_LINES);
        src.push_str("\\documentclass{aastex}");
        assert_eq!(classify_journal(&src, &JournalPatterns::default()), JournalClass::Unknown);
    }

    #[test]
    fn markability() {
        let reject = parse("\\begin{document}\\input{sec2}\\end{document}").unwrap();
        assert_eq!(check_markable(&reject), Markability::Reject(RejectReason::ContainsInput));
        let include = parse("\\include{a}").unwrap();
        assert_eq!(check_markable(&include), Markability::Reject(RejectReason::ContainsInput));
        let ok = parse("\\begin{document}text\\end{document}").unwrap();
        assert_eq!(check_markable(&ok), Markability::Accept);
        let commented = parse("\\begin{document}% \\input{x}\ntext\\end{document}").unwrap();
        assert_eq!(check_markable(&commented), Markability::Accept);
        let verbatim = parse("\\begin{verbatim}\\input{x}\\end{verbatim}").unwrap();
        assert_eq!(check_markable(&verbatim), Markability::Accept);
    }
}
