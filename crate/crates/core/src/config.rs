//! Pipeline configuration file.
//!
//! ```toml
//! [corpus]
//! input_dir = "articles"
//! journal_patterns = ["aastex", "apj", "mn"]
//!
//! [render]
//! fixture_dir = "fixtures"
//! dpi = 300
//!
//! [align]
//! font_height_pt = 11
//!
//! [emit]
//! out_dir = "out"
//! ```
//!
//! Relative paths resolve against the directory holding the file.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::align::{SentinelMap, DEFAULT_ABBREVIATIONS};
use crate::corpus::JournalPatterns;
use crate::geometry::{AuxGrammar, DEFAULT_FONT_HEIGHT_PT};
use crate::marker::MarkerTemplate;
use crate::metrics::DEFAULT_WORD_TOP_K;
use crate::render::ToolchainConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Syntax(#[from] toml::de::Error),
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: String, reason: String },
}

fn invalid(key: &str, reason: impl ToString) -> ConfigError {
    ConfigError::Invalid { key: key.to_owned(), reason: reason.to_string() }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    corpus: RawCorpus,
    #[serde(default)]
    render: RawRender,
    #[serde(default)]
    align: RawAlign,
    #[serde(default)]
    emit: RawEmit,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCorpus {
    input_dir: Option<PathBuf>,
    journal_patterns: Option<Vec<String>>,
    target_only: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRender {
    latex_command: Option<String>,
    rasterize_command: Option<String>,
    ocr_command: Option<String>,
    dpi: Option<u32>,
    timeout_seconds: Option<u64>,
    fixture_dir: Option<PathBuf>,
    workers: Option<usize>,
    aux_grammar: Option<String>,
    marker_start_template: Option<String>,
    marker_end_template: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAlign {
    font_height_pt: Option<f64>,
    abbreviations: Option<Vec<String>>,
    sentinel_math: Option<char>,
    sentinel_citation: Option<char>,
    sentinel_reference: Option<char>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEmit {
    out_dir: Option<PathBuf>,
    word_top_k: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub input_dir: PathBuf,
    pub out_dir: PathBuf,
    pub journal_patterns: JournalPatterns,
    /// Skip articles whose class is not a target journal.
    pub target_only: bool,
    pub toolchain: ToolchainConfig,
    /// Worker threads; 0 means one per logical core.
    pub workers: usize,
    pub aux_grammar: AuxGrammar,
    pub marker: MarkerTemplate,
    pub font_height_pt: f64,
    pub abbreviations: Vec<String>,
    pub sentinels: SentinelMap,
    pub word_top_k: usize,
}

impl PipelineConfig {
    /// Defaults with the given input and output directories.
    pub fn new(input_dir: PathBuf, out_dir: PathBuf) -> Self {
        PipelineConfig {
            input_dir,
            out_dir,
            journal_patterns: JournalPatterns::default(),
            target_only: true,
            toolchain: ToolchainConfig::default(),
            workers: 0,
            aux_grammar: AuxGrammar::default(),
            marker: MarkerTemplate::default(),
            font_height_pt: DEFAULT_FONT_HEIGHT_PT,
            abbreviations: DEFAULT_ABBREVIATIONS.iter().map(|s| s.to_string()).collect(),
            sentinels: SentinelMap::default(),
            word_top_k: DEFAULT_WORD_TOP_K,
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_owned(), source })?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text)?;
        let resolve = |p: PathBuf| if p.is_absolute() { p } else { base_dir.join(p) };

        let input_dir = raw.corpus.input_dir.ok_or_else(|| invalid("corpus.input_dir", "required"))?;
        let out_dir = raw.emit.out_dir.unwrap_or_else(|| PathBuf::from("out"));
        let mut cfg = PipelineConfig::new(resolve(input_dir), resolve(out_dir));

        if let Some(p) = raw.corpus.journal_patterns {
            if p.is_empty() {
                return Err(invalid("corpus.journal_patterns", "empty list"));
            }
            cfg.journal_patterns = JournalPatterns::new(&p).map_err(|e| invalid("corpus.journal_patterns", e))?;
        }
        cfg.target_only = raw.corpus.target_only.unwrap_or(cfg.target_only);

        let r = raw.render;
        let tc = &mut cfg.toolchain;
        if let Some(v) = r.latex_command {
            tc.latex_command = v;
        }
        if let Some(v) = r.rasterize_command {
            tc.rasterize_command = v;
        }
        if let Some(v) = r.ocr_command {
            tc.ocr_command = v;
        }
        tc.dpi = r.dpi.unwrap_or(tc.dpi);
        tc.timeout_seconds = r.timeout_seconds.unwrap_or(tc.timeout_seconds);
        tc.fixture_dir = r.fixture_dir.map(resolve);
        tc.validate().map_err(|e| invalid("render", e))?;
        cfg.workers = r.workers.unwrap_or(0);
        if let Some(g) = r.aux_grammar {
            cfg.aux_grammar = g.parse().map_err(|e| invalid("render.aux_grammar", e))?;
        }
        cfg.marker = match cfg.aux_grammar {
            AuxGrammar::Tikzmark => MarkerTemplate::tikzmark(),
            AuxGrammar::Savepos => MarkerTemplate::savepos(),
        };
        if let Some(t) = r.marker_start_template {
            cfg.marker.start = t;
        }
        if let Some(t) = r.marker_end_template {
            cfg.marker.end = t;
        }
        cfg.marker.validate().map_err(|e| invalid("render.marker_start_template", e))?;

        if let Some(h) = raw.align.font_height_pt {
            if !(h.is_finite() && h > 0.0) {
                return Err(invalid("align.font_height_pt", "must be positive"));
            }
            cfg.font_height_pt = h;
        }
        if let Some(a) = raw.align.abbreviations {
            cfg.abbreviations = a;
        }
        let d = SentinelMap::default();
        cfg.sentinels = SentinelMap::new(
            raw.align.sentinel_math.unwrap_or(d.inline_math),
            raw.align.sentinel_citation.unwrap_or(d.citation),
            raw.align.sentinel_reference.unwrap_or(d.reference),
        )
        .map_err(|e| invalid("align.sentinel_*", e))?;

        cfg.word_top_k = raw.emit.word_top_k.unwrap_or(cfg.word_top_k);
        Ok(cfg)
    }
}
