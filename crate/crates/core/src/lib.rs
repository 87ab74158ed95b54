//! Synthetic ground truth for OCR post-correction from LaTeX sources.
//!
//! The pipeline marks every body word of an article with position markers,
//! reads the marker coordinates back after compilation, matches them with
//! OCR word boxes and emits aligned ground-truth/OCR sentence pairs.

pub mod align;
pub mod config;
pub mod corpus;
pub mod emit;
pub mod geom;
pub mod geometry;
pub mod marker;
pub mod metrics;
pub mod ocr;
pub mod pipeline;
pub mod render;
pub mod tex;

pub use align::{AlignedElement, AlignedSentence, EditOp, EditScript, OpCounts, SentinelMap};
pub use config::PipelineConfig;
pub use corpus::{ArticleRecord, JournalClass, Markability};
pub use emit::DatasetRecord;
pub use geom::{iou, BBox};
pub use geometry::{AuxGrammar, MarkRecord, PageGeometry, SgtBox};
pub use marker::{ElementType, HyphenPart, MarkedSource, MarkerTemplate, SgtElement};
pub use metrics::{cer, wer, CorpusStats, EvalReport, Metric};
pub use ocr::{OcrLine, OcrPage, OcrWord};
pub use pipeline::{run_pipeline, RunReport};
pub use render::{PageRender, ToolchainConfig};
pub use tex::{DocumentTree, PlainSegment, TexToken};
