//! Error rates, improvement reports and corpus-level edit statistics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::align::{align_tokens, levenshtein, EditOp, EditScript, OpCounts};

pub const DEFAULT_WORD_TOP_K: usize = 1000;

/// Character error rate: edit distance over `max(1, reference length)`.
pub fn cer(reference: &str, hypothesis: &str) -> f64 {
    let r: Vec<char> = reference.chars().collect();
    let h: Vec<char> = hypothesis.chars().collect();
    levenshtein(&r, &h) as f64 / r.len().max(1) as f64
}

/// Word error rate over whitespace-separated tokens.
pub fn wer(reference: &str, hypothesis: &str) -> f64 {
    let r: Vec<&str> = reference.split_whitespace().collect();
    let h: Vec<&str> = hypothesis.split_whitespace().collect();
    levenshtein(&r, &h) as f64 / r.len().max(1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Cer,
    Wer,
}

impl Metric {
    pub fn rate(self, reference: &str, hypothesis: &str) -> f64 {
        match self {
            Metric::Cer => cer(reference, hypothesis),
            Metric::Wer => wer(reference, hypothesis),
        }
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cer" => Ok(Metric::Cer),
            "wer" => Ok(Metric::Wer),
            other => Err(format!("unknown metric {other:?} (expected cer or wer)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("evaluation needs at least one instance")]
    EmptyInput,
}

/// Before/after comparison over a set of instances. All values are
/// percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metric: Metric,
    pub mean_before: f64,
    pub mean_after: f64,
    pub mean_improvement: f64,
    pub percent_improved: f64,
    pub n_instances: usize,
    /// Instances with a perfect original and a worse correction; their
    /// relative improvement is undefined and left out of the mean.
    pub undefined_improvement: usize,
}

/// Scores `(reference, before, after)` triples.
pub fn eval_report<S: AsRef<str>>(triples: &[(S, S, S)], metric: Metric) -> Result<EvalReport, EvalError> {
    if triples.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let (mut sum_b, mut sum_a, mut sum_i) = (0.0, 0.0, 0.0);
    let (mut improved, mut undefined, mut counted) = (0usize, 0usize, 0usize);
    for (reference, before, after) in triples {
        let b = 100.0 * metric.rate(reference.as_ref(), before.as_ref());
        let a = 100.0 * metric.rate(reference.as_ref(), after.as_ref());
        sum_b += b;
        sum_a += a;
        if a < b {
            improved += 1;
        }
        if b > 0.0 {
            sum_i += 100.0 * (b - a) / b;
            counted += 1;
        } else if a > 0.0 {
            undefined += 1;
        } else {
            counted += 1;
        }
    }
    let n = triples.len() as f64;
    Ok(EvalReport {
        metric,
        mean_before: sum_b / n,
        mean_after: sum_a / n,
        mean_improvement: if counted == 0 { 0.0 } else { sum_i / counted as f64 },
        percent_improved: 100.0 * improved as f64 / n,
        n_instances: triples.len(),
        undefined_improvement: undefined,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpShares {
    pub replace: f64,
    pub delete: f64,
    pub insert: f64,
}

/// Accumulated edit statistics. Counts are kept in full so that
/// [`CorpusStats::merge`] is exact; the word top-K cut happens on output.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub op_counts: OpCounts,
    pub char_confusion: BTreeMap<(char, char), u64>,
    pub word_confusion: BTreeMap<(String, String), u64>,
    pub pages: BTreeSet<(String, u32)>,
    pub sentences: u64,
}

impl CorpusStats {
    pub fn from_scripts<'a>(scripts: impl IntoIterator<Item = &'a EditScript>) -> Self {
        let mut stats = CorpusStats::default();
        for s in scripts {
            stats.add_script(s);
        }
        stats
    }

    /// Adds the op counts and character pairs of one script.
    pub fn add_script(&mut self, script: &EditScript) {
        self.op_counts.add(&script.counts());
        for op in &script.ops {
            let pair = match *op {
                EditOp::Match(c) => (c, c),
                EditOp::Replace(a, b) => (a, b),
                EditOp::Delete(_) | EditOp::Insert(_) => continue,
            };
            *self.char_confusion.entry(pair).or_insert(0) += 1;
        }
    }

    /// Adds one aligned sentence: its character script, its word pairs and
    /// its page.
    pub fn add_sentence(&mut self, article_id: &str, page: u32, sgt: &str, ocr: &str, script: &EditScript) {
        self.add_script(script);
        self.sentences += 1;
        self.pages.insert((article_id.to_owned(), page));
        let a: Vec<&str> = sgt.split_whitespace().collect();
        let b: Vec<&str> = ocr.split_whitespace().collect();
        for pair in align_tokens(&a, &b).1 {
            if let (Some(i), Some(j)) = pair {
                *self.word_confusion.entry((a[i].to_owned(), b[j].to_owned())).or_insert(0) += 1;
            }
        }
    }

    pub fn merge(&mut self, other: &CorpusStats) {
        self.op_counts.add(&other.op_counts);
        for (k, v) in &other.char_confusion {
            *self.char_confusion.entry(*k).or_insert(0) += v;
        }
        for (k, v) in &other.word_confusion {
            *self.word_confusion.entry(k.clone()).or_insert(0) += v;
        }
        self.pages.extend(other.pages.iter().cloned());
        self.sentences += other.sentences;
    }

    pub fn merged(mut self, other: &CorpusStats) -> Self {
        self.merge(other);
        self
    }

    /// Percentages of each non-match op, or `None` without any edits.
    pub fn op_shares(&self) -> Option<OpShares> {
        let edits = self.op_counts.edits();
        if edits == 0 {
            return None;
        }
        let pct = |v: u64| 100.0 * v as f64 / edits as f64;
        Some(OpShares {
            replace: pct(self.op_counts.replace),
            delete: pct(self.op_counts.delete),
            insert: pct(self.op_counts.insert),
        })
    }

    /// Aligned character positions: matches and edits.
    pub fn char_pairs(&self) -> u64 {
        self.op_counts.total()
    }

    /// Character confusion rows sorted by count, then lexicographically.
    pub fn char_rows(&self) -> Vec<(String, String, u64)> {
        sorted_rows(self.char_confusion.iter().map(|((a, b), n)| (a.to_string(), b.to_string(), *n)))
    }

    /// Word pairs whose SGT word is among the `k` most frequent SGT words.
    pub fn word_rows(&self, k: usize) -> Vec<(String, String, u64)> {
        let mut freq: BTreeMap<&str, u64> = BTreeMap::new();
        for ((w, _), n) in &self.word_confusion {
            *freq.entry(w.as_str()).or_insert(0) += n;
        }
        let mut ranked: Vec<(&str, u64)> = freq.into_iter().collect();
        ranked.sort_by(|x, y| y.1.cmp(&x.1).then_with(|| x.0.cmp(y.0)));
        let keep: BTreeSet<&str> = ranked.into_iter().take(k).map(|(w, _)| w).collect();
        sorted_rows(
            self.word_confusion
                .iter()
                .filter(|((w, _), _)| keep.contains(w.as_str()))
                .map(|((a, b), n)| (a.clone(), b.clone(), *n)),
        )
    }

    /// Plain-text summary of totals and op shares.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let c = &self.op_counts;
        let _ = writeln!(out, "pages: {}", self.pages.len());
        let _ = writeln!(out, "sentences: {}", self.sentences);
        let _ = writeln!(out, "character_pairs: {}", self.char_pairs());
        let _ = writeln!(out, "ops: match={} replace={} delete={} insert={}", c.matches, c.replace, c.delete, c.insert);
        match self.op_shares() {
            Some(s) => {
                let _ = writeln!(
                    out,
                    "op_shares: replace={:.2}% delete={:.2}% insert={:.2}%",
                    s.replace, s.delete, s.insert
                );
            }
            None => out.push_str("op_shares: none\n"),
        }
        out
    }
}

fn sorted_rows(rows: impl Iterator<Item = (String, String, u64)>) -> Vec<(String, String, u64)> {
    let mut rows: Vec<_> = rows.collect();
    rows.sort_by(|x, y| y.2.cmp(&x.2).then_with(|| (&x.0, &x.1).cmp(&(&y.0, &y.1))));
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::edit_script;

    #[test]
    fn cer_examples() {
        assert_eq!(cer("cat", "cat"), 0.0);
        assert!((cer("cat", "cut") - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(cer("ab", ""), 1.0);
        assert_eq!(cer("", ""), 0.0);
        assert_eq!(cer("", "xy"), 2.0);
    }

    #[test]
    fn wer_examples() {
        assert_eq!(wer("the cat", "the cat"), 0.0);
        assert!((wer("the cat sat", "the cut sat") - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(wer("a b", ""), 1.0);
        assert_eq!(wer("a  b", "a\tb"), 0.0);
    }

    #[test]
    fn eval_halving() {
        // cer 1/10 -> 1/20
        let r = eval_report(&[("abcdefghij".repeat(2).as_str(), "abcdefghijabcdefghiX", "abcdefghijabcdefghij")], Metric::Cer);
        let r = r.unwrap();
        assert_eq!(r.percent_improved, 100.0);
        assert_eq!(r.mean_improvement, 100.0);

        let t = [("abcdefghijabcdefghij", "abXdefghijabcdefghiX", "abcdefghijabcdefghiX")];
        let r = eval_report(&t, Metric::Cer).unwrap();
        assert!((r.mean_before - 10.0).abs() < 1e-12);
        assert!((r.mean_after - 5.0).abs() < 1e-12);
        assert!((r.mean_improvement - 50.0).abs() < 1e-12);
    }

    #[test]
    fn eval_not_improved() {
        let r = eval_report(&[("abcd", "abcd", "abXd")], Metric::Cer).unwrap();
        assert_eq!(r.percent_improved, 0.0);
        assert_eq!(r.undefined_improvement, 1);
        assert_eq!(r.mean_improvement, 0.0);
        let r = eval_report(&[("abcd", "abXd", "abYd")], Metric::Cer).unwrap();
        assert_eq!(r.percent_improved, 0.0);
        assert_eq!(r.mean_improvement, 0.0);
        let r = eval_report(&[("abcd", "aXcd", "abcX"), ("abcd", "XXcd", "abcd")], Metric::Cer).unwrap();
        assert_eq!(r.percent_improved, 50.0);
        let empty: [(&str, &str, &str); 0] = [];
        assert_eq!(eval_report(&empty, Metric::Wer), Err(EvalError::EmptyInput));
    }

    #[test]
    fn shares_of_replace_and_delete() {
        let s = EditScript { ops: vec![EditOp::Replace('a', 'b'), EditOp::Delete('c')], distance: 2 };
        let shares = CorpusStats::from_scripts([&s]).op_shares().unwrap();
        assert_eq!((shares.replace, shares.delete, shares.insert), (50.0, 50.0, 0.0));
        assert_eq!(CorpusStats::default().op_shares(), None);
    }

    #[test]
    fn cat_cut_confusion() {
        let stats = CorpusStats::from_scripts([&edit_script("cat", "cut")]);
        assert_eq!(stats.char_confusion[&('a', 'u')], 1);
        assert_eq!(stats.char_confusion[&('c', 'c')], 1);
        assert_eq!(stats.char_confusion[&('t', 't')], 1);
        assert_eq!(stats.char_rows()[0].2, 1);
    }

    #[test]
    fn word_pairs_and_top_k() {
        let mut stats = CorpusStats::default();
        for (s, o) in [("the cat", "the cut"), ("the dog", "tho dog")] {
            stats.add_sentence("a", 1, s, o, &edit_script(s, o));
        }
        assert_eq!(stats.word_confusion[&("cat".to_string(), "cut".to_string())], 1);
        assert_eq!(stats.pages.len(), 1);
        assert_eq!(stats.sentences, 2);
        let top = stats.word_rows(1);
        assert!(top.iter().all(|r| r.0 == "the"));
        assert_eq!(top.len(), 2);
        assert_eq!(stats.word_rows(10).len(), 4);
    }

    #[test]
    fn merge_equals_concatenation() {
        let s1 = [edit_script("abc", "abd"), edit_script("x", "")];
        let s2 = [edit_script("", "yz")];
        let whole = CorpusStats::from_scripts(s1.iter().chain(&s2));
        let merged = CorpusStats::from_scripts(&s1).merged(&CorpusStats::from_scripts(&s2));
        assert_eq!(whole, merged);
    }
}
