//! OCR engine TSV ingestion.
//!
//! The engine emits 12 tab-separated columns per row:
//! `level page_num block_num par_num line_num word_num left top width height conf text`.
//! Level 4 rows are text lines, level 5 rows are words.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::BBox;

pub const TSV_HEADER: &str = "level\tpage_num\tblock_num\tpar_num\tline_num\tword_num\tleft\ttop\twidth\theight\tconf\ttext";
const TSV_COLUMNS: usize = 12;
const LEVEL_LINE: u32 = 4;
const LEVEL_WORD: u32 = 5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OcrError {
    #[error("malformed TSV at line {line_no}: {reason}")]
    MalformedTsv { line_no: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LineId {
    pub page: u32,
    pub block: u32,
    pub paragraph: u32,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcrWord {
    pub text: String,
    pub bbox: BBox,
    pub confidence: f64,
    pub page: u32,
    pub block: u32,
    pub paragraph: u32,
    pub line: u32,
    pub word_index: u32,
}

impl OcrWord {
    pub fn line_id(&self) -> LineId {
        LineId { page: self.page, block: self.block, paragraph: self.paragraph, line: self.line }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcrLine {
    pub id: LineId,
    pub bbox: BBox,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OcrPage {
    pub page: u32,
    pub words: Vec<OcrWord>,
    pub lines: Vec<OcrLine>,
}

struct Row<'a> {
    level: u32,
    ids: [u32; 5],
    bbox: BBox,
    conf: f64,
    text: &'a str,
}

fn parse_row(line: &str, line_no: usize) -> Result<Row<'_>, OcrError> {
    let bad = |reason: String| OcrError::MalformedTsv { line_no, reason };
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != TSV_COLUMNS {
        return Err(bad(format!("expected {TSV_COLUMNS} columns, found {}", fields.len())));
    }
    let int = |i: usize| -> Result<i64, OcrError> {
        fields[i].trim().parse::<i64>().map_err(|_| bad(format!("column {} is not an integer: {:?}", i + 1, fields[i])))
    };
    let mut ids = [0u32; 5];
    for (k, id) in ids.iter_mut().enumerate() {
        *id = u32::try_from(int(k + 1)?).map_err(|_| bad(format!("column {} is negative", k + 2)))?;
    }
    let level = u32::try_from(int(0)?).map_err(|_| bad("negative level".into()))?;
    let (left, top, width, height) = (int(6)?, int(7)?, int(8)?, int(9)?);
    if width < 0 || height < 0 {
        return Err(bad("negative box size".into()));
    }
    let conf: f64 = fields[10].trim().parse().map_err(|_| bad(format!("confidence is not numeric: {:?}", fields[10])))?;
    if !(-1.0..=100.0).contains(&conf) {
        return Err(bad(format!("confidence {conf} outside [-1, 100]")));
    }
    let bbox = BBox::new(left as f64, top as f64, (left + width) as f64, (top + height) as f64);
    Ok(Row { level, ids, bbox, conf, text: fields[11] })
}

/// Parses one page of TSV. The header row is optional; blank lines are
/// ignored.
pub fn parse_tsv(tsv_text: &str) -> Result<OcrPage, OcrError> {
    let mut page = OcrPage::default();
    let mut page_seen = false;
    for (idx, raw) in tsv_text.lines().enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() || (idx == 0 && line.starts_with("level")) {
            continue;
        }
        let row = parse_row(line, idx + 1)?;
        let [page_num, block, paragraph, line_num, word_index] = row.ids;
        if !page_seen {
            page.page = page_num;
            page_seen = true;
        }
        let id = LineId { page: page_num, block, paragraph, line: line_num };
        match row.level {
            LEVEL_LINE => page.lines.push(OcrLine { id, bbox: row.bbox }),
            LEVEL_WORD => {
                let text = row.text.trim();
                if row.conf == -1.0 || text.is_empty() {
                    continue;
                }
                page.words.push(OcrWord {
                    text: text.to_owned(),
                    bbox: row.bbox,
                    confidence: row.conf,
                    page: page_num,
                    block,
                    paragraph,
                    line: line_num,
                    word_index,
                });
            }
            _ => {}
        }
    }

    // Words whose line row is absent get an extent synthesized from the words.
    let explicit: HashSet<LineId> = page.lines.iter().map(|l| l.id).collect();
    let mut synthesized: BTreeMap<LineId, BBox> = BTreeMap::new();
    for w in page.words.iter().filter(|w| !explicit.contains(&w.line_id())) {
        synthesized.entry(w.line_id()).and_modify(|b| *b = b.union(&w.bbox)).or_insert(w.bbox);
    }
    page.lines.extend(synthesized.into_iter().map(|(id, bbox)| OcrLine { id, bbox }));
    Ok(page)
}

impl OcrPage {
    /// Writes the page back as TSV: header, line rows, then word rows.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from(TSV_HEADER);
        out.push('\n');
        let row = |out: &mut String, level: u32, id: LineId, word: u32, b: &BBox, conf: f64, text: &str| {
            let _ = writeln!(
                out,
                "{level}\t{}\t{}\t{}\t{}\t{word}\t{}\t{}\t{}\t{}\t{conf}\t{text}",
                id.page,
                id.block,
                id.paragraph,
                id.line,
                b.x0,
                b.y0,
                b.x1 - b.x0,
                b.y1 - b.y0
            );
        };
        for l in &self.lines {
            row(&mut out, LEVEL_LINE, l.id, 0, &l.bbox, -1.0, "");
        }
        for w in &self.words {
            row(&mut out, LEVEL_WORD, w.line_id(), w.word_index, &w.bbox, w.confidence, &w.text);
        }
        out
    }

    pub fn line(&self, id: LineId) -> Option<&OcrLine> {
        self.lines.iter().find(|l| l.id == id)
    }
}
