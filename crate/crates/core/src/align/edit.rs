//! Unit-cost Levenshtein alignment with a deterministic backtrace.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EditOp {
    Match(char),
    Replace(char, char),
    Delete(char),
    Insert(char),
}

impl EditOp {
    pub fn is_match(&self) -> bool {
        matches!(self, EditOp::Match(_))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounts {
    #[serde(rename = "match")]
    pub matches: u64,
    pub replace: u64,
    pub delete: u64,
    pub insert: u64,
}

impl OpCounts {
    pub fn edits(&self) -> u64 {
        self.replace + self.delete + self.insert
    }

    pub fn total(&self) -> u64 {
        self.matches + self.edits()
    }

    pub fn add(&mut self, other: &OpCounts) {
        self.matches += other.matches;
        self.replace += other.replace;
        self.delete += other.delete;
        self.insert += other.insert;
    }
}

/// A minimal edit script turning a source string into a target string.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditScript {
    pub ops: Vec<EditOp>,
    pub distance: usize,
}

impl EditScript {
    /// Replays the script over `source`. Returns `None` if the script does
    /// not fit the string.
    pub fn apply(&self, source: &str) -> Option<String> {
        let mut src = source.chars();
        let mut out = String::new();
        for op in &self.ops {
            match *op {
                EditOp::Match(c) => {
                    if src.next()? != c {
                        return None;
                    }
                    out.push(c);
                }
                EditOp::Replace(a, b) => {
                    if src.next()? != a {
                        return None;
                    }
                    out.push(b);
                }
                EditOp::Delete(a) => {
                    if src.next()? != a {
                        return None;
                    }
                }
                EditOp::Insert(b) => out.push(b),
            }
        }
        src.next().is_none().then_some(out)
    }

    pub fn counts(&self) -> OpCounts {
        let mut c = OpCounts::default();
        for op in &self.ops {
            match op {
                EditOp::Match(_) => c.matches += 1,
                EditOp::Replace(..) => c.replace += 1,
                EditOp::Delete(_) => c.delete += 1,
                EditOp::Insert(_) => c.insert += 1,
            }
        }
        c
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
enum Step {
    Match,
    Replace,
    Delete,
    Insert,
}

/// One aligned position: indices into the source and target sequences.
/// `(Some, Some)` is a match or replacement, `(Some, None)` a deletion and
/// `(None, Some)` an insertion.
pub type AlignedPair = (Option<usize>, Option<usize>);

/// Aligns two token sequences with unit costs and returns the distance and
/// the aligned index pairs in order.
///
/// Distances are kept in two rows; the backtrace reads one step byte per
/// cell. At each cell the step is chosen in the order
/// Match, Replace, Delete, Insert among those that reach the optimum.
pub fn align_tokens<T: PartialEq>(a: &[T], b: &[T]) -> (usize, Vec<AlignedPair>) {
    let (n, m) = (a.len(), b.len());
    let width = m + 1;

    let mut steps = vec![Step::Insert; (n + 1) * width];
    let mut prev: Vec<u32> = (0..=m as u32).collect();
    let mut cur = vec![0u32; width];

    for i in 1..=n {
        cur[0] = i as u32;
        steps[i * width] = Step::Delete;
        for j in 1..=m {
            let diag = prev[j - 1];
            let up = prev[j] + 1;
            let left = cur[j - 1] + 1;
            let eq = a[i - 1] == b[j - 1];
            let diag_cost = if eq { diag } else { diag + 1 };
            let best = diag_cost.min(up).min(left);
            steps[i * width + j] = if diag_cost == best {
                if eq {
                    Step::Match
                } else {
                    Step::Replace
                }
            } else if up == best {
                Step::Delete
            } else {
                Step::Insert
            };
            cur[j] = best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let distance = prev[m] as usize;

    let mut pairs = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let step = if i == 0 {
            Step::Insert
        } else if j == 0 {
            Step::Delete
        } else {
            steps[i * width + j]
        };
        match step {
            Step::Match | Step::Replace => {
                i -= 1;
                j -= 1;
                pairs.push((Some(i), Some(j)));
            }
            Step::Delete => {
                i -= 1;
                pairs.push((Some(i), None));
            }
            Step::Insert => {
                j -= 1;
                pairs.push((None, Some(j)));
            }
        }
    }
    pairs.reverse();
    (distance, pairs)
}

/// Computes a minimal script from `source` to `target`.
pub fn edit_script(source: &str, target: &str) -> EditScript {
    let a: Vec<char> = source.chars().collect();
    let b: Vec<char> = target.chars().collect();
    let (distance, pairs) = align_tokens(&a, &b);
    let ops = pairs
        .into_iter()
        .map(|pair| match pair {
            (Some(i), Some(j)) if a[i] == b[j] => EditOp::Match(a[i]),
            (Some(i), Some(j)) => EditOp::Replace(a[i], b[j]),
            (Some(i), None) => EditOp::Delete(a[i]),
            (None, Some(j)) => EditOp::Insert(b[j]),
            (None, None) => unreachable!("backtrace never emits an empty pair"),
        })
        .collect();
    EditScript { ops, distance }
}

/// Levenshtein distance over arbitrary token sequences, two-row.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}
