//! Dataset and confusion-table serialization.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::align::{AlignedSentence, OpCounts};
use crate::marker::ElementType;
use crate::metrics::cer;

#[derive(Debug, Error)]
pub enum EmitError {
    #[error("write failed: {0}")]
    Sink(#[from] io::Error),
    #[error("serialization failed: {0}")]
    Json(#[from] serde_json::Error),
    #[error("line {line_no}: {source}")]
    Parse { line_no: usize, source: serde_json::Error },
    #[error("csv write failed: {0}")]
    Csv(#[from] csv::Error),
}

/// One line of the aligned dataset. Field order is the serialized key order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRecord {
    pub article_id: String,
    pub page: u32,
    pub sentence_index: usize,
    pub sgt: String,
    pub ocr: String,
    pub element_types: Vec<ElementType>,
    pub hyphen_flags: Vec<bool>,
    pub ops: OpCounts,
    pub cer: f64,
}

impl From<&AlignedSentence> for DatasetRecord {
    fn from(s: &AlignedSentence) -> Self {
        DatasetRecord {
            article_id: s.article_id.clone(),
            page: s.page,
            sentence_index: s.sentence_index,
            sgt: s.sgt_text.clone(),
            ocr: s.ocr_text.clone(),
            element_types: s.element_types(),
            hyphen_flags: s.hyphen_flags(),
            ops: s.edit.counts(),
            cer: cer(&s.sgt_text, &s.ocr_text),
        }
    }
}

/// Writes one compact JSON object per line, LF-terminated.
pub fn emit_jsonl<'a, W: Write>(
    records: impl IntoIterator<Item = &'a DatasetRecord>,
    sink: &mut W,
) -> Result<(), EmitError> {
    for r in records {
        serde_json::to_writer(&mut *sink, r)?;
        sink.write_all(b"\n")?;
    }
    sink.flush()?;
    Ok(())
}

/// Parses JSONL produced by [`emit_jsonl`]. Blank lines are skipped.
pub fn read_jsonl(text: &str) -> Result<Vec<DatasetRecord>, EmitError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|source| EmitError::Parse { line_no: i + 1, source }))
        .collect()
}

/// Writes `sgt,ocr,count` rows with a header.
pub fn write_confusion_csv<W: Write>(rows: &[(String, String, u64)], sink: W) -> Result<(), EmitError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(sink);
    w.write_record(["sgt", "ocr", "count"])?;
    for (a, b, n) in rows {
        w.write_record([a.as_str(), b.as_str(), n.to_string().as_str()])?;
    }
    w.flush()?;
    Ok(())
}
