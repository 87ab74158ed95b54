//! Stage functions and the end-to-end driver.
//!
//! Output layout under the run directory:
//!
//! ```text
//! marked/<article>/...           copy of the article with the marked main file
//! marked/<article>/elements.json element table
//! render/<article>/main.aux      marker positions
//! render/<article>/page-N.tsv    OCR output per page
//! aligned/dataset.jsonl          aligned sentence pairs
//! aligned/fixed.jsonl            the same pairs with sentinel substitution
//! stats/char_confusion.csv
//! stats/word_confusion.csv
//! stats/stats.txt
//! summary.txt                    per-stage article counts and failures
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::align::{align_boxes, sentinelize, AlignedSentence, SentenceSplitter, SentinelError};
use crate::config::PipelineConfig;
use crate::corpus::{
    check_markable, classify_journal, find_main_file, ArticleRecord, JournalClass, JournalPatterns, Markability,
    RejectReason,
};
use crate::emit::{emit_jsonl, write_confusion_csv, DatasetRecord, EmitError};
use crate::geometry::{build_sgt_boxes, parse_aux, AuxGrammar, DropCounts, PageGeometry};
use crate::marker::{collect_elements, inject_markers, ElementType, MarkedSource, MarkerError, MarkerTemplate, SgtElement};
use crate::metrics::CorpusStats;
use crate::ocr::{parse_tsv, OcrError, OcrLine, OcrPage};
use crate::render::{compile_document, render_and_ocr, PageRender, RenderError};
use crate::tex::{decode_source, extract_plain_segments, parse, TreeError};

pub const ELEMENTS_FILE: &str = "elements.json";

#[derive(Debug, Error)]
pub enum StageError {
    #[error("{0}")]
    Io(#[from] io::Error),
    #[error("no main file found")]
    NoMain,
    #[error("several main-file candidates: {0:?}")]
    AmbiguousMain(Vec<PathBuf>),
    #[error("malformed TeX: {0}")]
    Tree(#[from] TreeError),
    #[error("document not markable: {0:?}")]
    Rejected(RejectReason),
    #[error(transparent)]
    Marker(#[from] MarkerError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Ocr(#[from] OcrError),
    #[error("bad element table: {0}")]
    Elements(#[from] serde_json::Error),
}

impl StageError {
    /// Short stable label for summaries.
    pub fn kind(&self) -> &'static str {
        match self {
            StageError::Io(_) => "io",
            StageError::NoMain => "no_main",
            StageError::AmbiguousMain(_) => "ambiguous_main",
            StageError::Tree(_) => "malformed_tex",
            StageError::Rejected(_) => "contains_input",
            StageError::Marker(_) => "marker",
            StageError::Render(RenderError::CompileFailed(_)) => "compile_failed",
            StageError::Render(RenderError::Timeout { .. }) => "timeout",
            StageError::Render(RenderError::RasterizeFailed(_)) => "rasterize_failed",
            StageError::Render(RenderError::OcrFailed { .. }) => "ocr_failed",
            StageError::Render(RenderError::MissingFixture(_)) => "missing_fixture",
            StageError::Render(_) => "render",
            StageError::Ocr(_) => "malformed_tsv",
            StageError::Elements(_) => "elements",
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{0}")]
    Io(#[from] io::Error),
    #[error(transparent)]
    Emit(#[from] EmitError),
    #[error(transparent)]
    Sentinel(#[from] SentinelError),
    #[error("cannot start worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> io::Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else {
            out.push(path.strip_prefix(root).expect("under root").to_path_buf());
        }
    }
    Ok(())
}

/// All files under `dir`, relative to it, sorted.
pub fn list_files(dir: &Path) -> io::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    collect_files(dir, dir, &mut out)?;
    out.sort();
    Ok(out)
}

/// Locates and classifies the main file of one article directory. The
/// returned `main_file` is relative to `root_dir`.
pub fn scan_article(root_dir: &Path, patterns: &JournalPatterns) -> Result<ArticleRecord, StageError> {
    let article_id = root_dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let mut tex_files = Vec::new();
    for rel in list_files(root_dir)? {
        if rel.extension().is_some_and(|e| e == "tex") {
            let bytes = fs::read(root_dir.join(&rel))?;
            tex_files.push((rel, bytes));
        }
    }
    let mut record = ArticleRecord {
        article_id,
        root_dir: root_dir.to_owned(),
        main_file: None,
        journal_class: JournalClass::Unknown,
        markable: None,
    };
    let main = match find_main_file(&tex_files) {
        Ok(m) => m,
        Err(crate::corpus::MainFileError::NoMain) => return Ok(record),
        Err(crate::corpus::MainFileError::AmbiguousMain(p)) => return Err(StageError::AmbiguousMain(p)),
    };
    let bytes = &tex_files.iter().find(|(p, _)| *p == main).expect("main is one of the files").1;
    let (source, _) = decode_source(bytes);
    record.journal_class = classify_journal(&source, patterns);
    record.markable = parse(&source).ok().map(|tree| check_markable(&tree));
    record.main_file = Some(main);
    Ok(record)
}

/// Scans every subdirectory of `input_dir`, in name order.
pub fn scan_corpus(input_dir: &Path, patterns: &JournalPatterns) -> io::Result<Vec<Result<ArticleRecord, (String, StageError)>>> {
    let mut dirs: Vec<PathBuf> =
        fs::read_dir(input_dir)?.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.is_dir()).collect();
    dirs.sort();
    Ok(dirs
        .into_iter()
        .map(|d| {
            let id = d.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            scan_article(&d, patterns).map_err(|e| (id, e))
        })
        .collect())
}

/// Parses, checks, segments and marks one TeX source.
pub fn mark_source(source: &str, template: &MarkerTemplate) -> Result<MarkedSource, StageError> {
    let tree = parse(source)?;
    if let Markability::Reject(reason) = check_markable(&tree) {
        return Err(StageError::Rejected(reason));
    }
    let elements = collect_elements(&extract_plain_segments(&tree));
    Ok(inject_markers(source, &elements, template)?)
}

/// Copies the article to `marked_dir`, replaces the main file with its
/// marked version and writes the element table.
pub fn write_marked(article_dir: &Path, main_file: &Path, marked: &MarkedSource, marked_dir: &Path) -> Result<(), StageError> {
    for rel in list_files(article_dir)? {
        let dest = marked_dir.join(&rel);
        if let Some(parent) = dest.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::copy(article_dir.join(&rel), dest)?;
    }
    fs::create_dir_all(marked_dir)?;
    fs::write(marked_dir.join(main_file), marked.text())?;
    write_elements(&marked_dir.join(ELEMENTS_FILE), marked.element_table())
}

pub fn write_elements(path: &Path, elements: &[SgtElement]) -> Result<(), StageError> {
    let mut text = serde_json::to_string_pretty(elements)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_elements(path: &Path) -> Result<Vec<SgtElement>, StageError> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Per-article alignment diagnostics.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AlignDiagnostics {
    pub pages: usize,
    pub elements: usize,
    pub boxes: usize,
    pub hyphen_splits: usize,
    pub dropped: DropCounts,
    pub aux_warnings: usize,
    pub unassigned_ocr_words: usize,
}

impl AlignDiagnostics {
    fn add(&mut self, o: &AlignDiagnostics) {
        self.pages += o.pages;
        self.elements += o.elements;
        self.boxes += o.boxes;
        self.hyphen_splits += o.hyphen_splits;
        self.aux_warnings += o.aux_warnings;
        self.unassigned_ocr_words += o.unassigned_ocr_words;
        let (d, e) = (&mut self.dropped, &o.dropped);
        d.missing_marks += e.missing_marks;
        d.multi_page += e.multi_page;
        d.unmatched_hyphen += e.unmatched_hyphen;
        d.reversed += e.reversed;
        d.unknown_page += e.unknown_page;
    }
}

#[derive(Debug, Clone)]
pub struct AlignSettings {
    pub aux_grammar: AuxGrammar,
    pub font_height_pt: f64,
    pub splitter: SentenceSplitter,
}

impl AlignSettings {
    pub fn from_config(cfg: &PipelineConfig) -> Self {
        AlignSettings {
            aux_grammar: cfg.aux_grammar,
            font_height_pt: cfg.font_height_pt,
            splitter: SentenceSplitter::new(cfg.abbreviations.clone()),
        }
    }
}

/// Aligns one article from its aux text, element table and OCR pages.
pub fn align_article(
    article_id: &str,
    aux_text: &str,
    elements: &[SgtElement],
    pages: &[(PageRender, String)],
    settings: &AlignSettings,
) -> Result<(Vec<AlignedSentence>, AlignDiagnostics), StageError> {
    let aux = parse_aux(aux_text, settings.aux_grammar);
    let mut ocr_pages: Vec<OcrPage> = Vec::with_capacity(pages.len());
    let mut geoms = Vec::with_capacity(pages.len());
    let mut lines: HashMap<u32, Vec<OcrLine>> = HashMap::new();
    for (render, tsv) in pages {
        let page = parse_tsv(tsv)?;
        geoms.push(PageGeometry {
            page: render.page_number,
            width_px: render.width_px,
            height_px: render.height_px,
            dpi: f64::from(render.dpi),
            font_height_pt: settings.font_height_pt,
        });
        lines.insert(render.page_number, page.lines.clone());
        ocr_pages.push(page);
    }
    let built = build_sgt_boxes(&aux.records, elements, &geoms, &lines);
    let mut diag = AlignDiagnostics {
        pages: pages.len(),
        elements: elements.len(),
        boxes: built.boxes.len(),
        hyphen_splits: built.hyphen_splits,
        dropped: built.dropped,
        aux_warnings: aux.warnings,
        unassigned_ocr_words: 0,
    };

    let mut sentences = Vec::new();
    for ((render, _), ocr) in pages.iter().zip(&ocr_pages) {
        let boxes: Vec<_> = built.boxes.iter().filter(|b| b.page == render.page_number).cloned().collect();
        let (aligned, unassigned) = align_boxes(&boxes, &ocr.words);
        diag.unassigned_ocr_words += unassigned;
        sentences.extend(settings.splitter.segment(article_id, render.page_number, &aligned));
    }
    Ok((sentences, diag))
}

/// The sentinel-substituted form of one sentence pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedRecord {
    pub article_id: String,
    pub page: u32,
    pub sentence_index: usize,
    pub sgt: String,
    pub ocr: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Scan,
    Mark,
    Compile,
    Ocr,
    Align,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Scan => "scan",
            Stage::Mark => "mark",
            Stage::Compile => "compile",
            Stage::Ocr => "ocr",
            Stage::Align => "align",
        }
    }
}

#[derive(Debug)]
pub struct ArticleFailure {
    pub article_id: String,
    pub stage: Stage,
    pub error: StageError,
}

struct ArticleResult {
    article_id: String,
    sentences: Vec<AlignedSentence>,
    diag: AlignDiagnostics,
}

/// Funnel counts and totals of one run.
#[derive(Debug, Default)]
pub struct RunReport {
    pub scanned: usize,
    pub main_found: usize,
    pub target: usize,
    pub marked: usize,
    pub compiled: usize,
    pub ocr_done: usize,
    pub aligned: usize,
    pub sentences: usize,
    pub diagnostics: AlignDiagnostics,
    pub failures: Vec<ArticleFailure>,
    pub skipped_non_target: Vec<String>,
}

impl RunReport {
    pub fn succeeded(&self) -> usize {
        self.aligned
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let d = &self.diagnostics;
        for (k, v) in [
            ("articles_scanned", self.scanned),
            ("main_file_found", self.main_found),
            ("target_journal", self.target),
            ("marked", self.marked),
            ("compiled", self.compiled),
            ("ocr_complete", self.ocr_done),
            ("aligned", self.aligned),
            ("pages", d.pages),
            ("elements", d.elements),
            ("boxes", d.boxes),
            ("hyphen_splits", d.hyphen_splits),
            ("dropped_missing_marks", d.dropped.missing_marks),
            ("dropped_multi_page", d.dropped.multi_page),
            ("dropped_reversed", d.dropped.reversed),
            ("dropped_unmatched_hyphen", d.dropped.unmatched_hyphen),
            ("dropped_unknown_page", d.dropped.unknown_page),
            ("aux_warnings", d.aux_warnings),
            ("unassigned_ocr_words", d.unassigned_ocr_words),
            ("sentences", self.sentences),
        ] {
            let _ = writeln!(s, "{k}: {v}");
        }
        for id in &self.skipped_non_target {
            let _ = writeln!(s, "skipped {id}: not a target journal");
        }
        for f in &self.failures {
            let _ = writeln!(s, "failed {}: {}: {}", f.article_id, f.stage.as_str(), f.error.kind());
        }
        s
    }
}

fn process_article(
    record: &ArticleRecord,
    cfg: &PipelineConfig,
    settings: &AlignSettings,
    progress: &mut [bool; 4],
) -> Result<ArticleResult, (Stage, StageError)> {
    let id = &record.article_id;
    let main_rel = record.main_file.as_ref().expect("scanned articles have a main file");
    let marked_dir = cfg.out_dir.join("marked").join(id);
    let render_dir = cfg.out_dir.join("render").join(id);

    let bytes = fs::read(record.root_dir.join(main_rel)).map_err(|e| (Stage::Mark, e.into()))?;
    let (source, replaced) = decode_source(&bytes);
    if replaced > 0 {
        log::warn!("{id}: {replaced} invalid UTF-8 sequences replaced");
    }
    let marked = mark_source(&source, &cfg.marker).map_err(|e| (Stage::Mark, e))?;
    write_marked(&record.root_dir, main_rel, &marked, &marked_dir).map_err(|e| (Stage::Mark, e))?;
    progress[0] = true;

    let compiled = compile_document(&marked_dir, main_rel, &cfg.toolchain).map_err(|e| (Stage::Compile, e.into()))?;
    fs::create_dir_all(&render_dir).map_err(|e| (Stage::Compile, e.into()))?;
    fs::write(render_dir.join("main.aux"), &compiled.aux_text).map_err(|e| (Stage::Compile, e.into()))?;
    progress[1] = true;

    let pages = render_and_ocr(&compiled.pdf_path, &render_dir, &cfg.toolchain).map_err(|e| (Stage::Ocr, e.into()))?;
    for (p, tsv) in &pages {
        fs::write(render_dir.join(format!("page-{}.tsv", p.page_number)), tsv).map_err(|e| (Stage::Ocr, e.into()))?;
    }
    progress[2] = true;

    let (sentences, diag) =
        align_article(id, &compiled.aux_text, marked.element_table(), &pages, settings).map_err(|e| (Stage::Align, e))?;
    progress[3] = true;
    Ok(ArticleResult { article_id: id.clone(), sentences, diag })
}

/// Runs every stage over the corpus and writes all outputs.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunReport, PipelineError> {
    let mut report = RunReport::default();
    let mut candidates = Vec::new();
    for scanned in scan_corpus(&cfg.input_dir, &cfg.journal_patterns)? {
        report.scanned += 1;
        let record = match scanned {
            Ok(r) => r,
            Err((article_id, error)) => {
                log::warn!("{article_id}: {error}");
                report.failures.push(ArticleFailure { article_id, stage: Stage::Scan, error });
                continue;
            }
        };
        if record.main_file.is_none() {
            log::warn!("{}: no main file", record.article_id);
            report.failures.push(ArticleFailure { article_id: record.article_id, stage: Stage::Scan, error: StageError::NoMain });
            continue;
        }
        report.main_found += 1;
        if cfg.target_only && !matches!(record.journal_class, JournalClass::Astronomy(_)) {
            report.skipped_non_target.push(record.article_id);
            continue;
        }
        report.target += 1;
        candidates.push(record);
    }

    let settings = AlignSettings::from_config(cfg);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build()?;
    let mut outcomes: Vec<(String, [bool; 4], Result<ArticleResult, (Stage, StageError)>)> = pool.install(|| {
        candidates
            .par_iter()
            .map(|rec| {
                let mut progress = [false; 4];
                let res = process_article(rec, cfg, &settings, &mut progress);
                (rec.article_id.clone(), progress, res)
            })
            .collect()
    });
    outcomes.sort_by(|a, b| a.0.cmp(&b.0));

    let mut results = Vec::new();
    for (article_id, progress, res) in outcomes {
        report.marked += usize::from(progress[0]);
        report.compiled += usize::from(progress[1]);
        report.ocr_done += usize::from(progress[2]);
        match res {
            Ok(r) => {
                report.aligned += 1;
                report.sentences += r.sentences.len();
                report.diagnostics.add(&r.diag);
                results.push(r);
            }
            Err((stage, error)) => {
                log::warn!("{article_id}: {} failed: {error}", stage.as_str());
                report.failures.push(ArticleFailure { article_id, stage, error });
            }
        }
    }

    let words = results
        .iter()
        .flat_map(|r| &r.sentences)
        .flat_map(|s| &s.elements)
        .filter(|e| e.etype == ElementType::Word)
        .map(|e| e.sgt.as_str());
    cfg.sentinels.check_sample(words)?;

    write_outputs(cfg, &results, &report)?;
    Ok(report)
}

fn write_outputs(cfg: &PipelineConfig, results: &[ArticleResult], report: &RunReport) -> Result<(), PipelineError> {
    let aligned_dir = cfg.out_dir.join("aligned");
    let stats_dir = cfg.out_dir.join("stats");
    fs::create_dir_all(&aligned_dir)?;
    fs::create_dir_all(&stats_dir)?;

    let sentences: Vec<&AlignedSentence> = results.iter().flat_map(|r| &r.sentences).collect();
    let records: Vec<DatasetRecord> = sentences.iter().map(|s| DatasetRecord::from(*s)).collect();
    emit_jsonl(&records, &mut BufWriter::new(fs::File::create(aligned_dir.join("dataset.jsonl"))?))?;

    let mut fixed = String::new();
    for s in &sentences {
        let (sgt, ocr) = sentinelize(s, &cfg.sentinels);
        let rec = FixedRecord { article_id: s.article_id.clone(), page: s.page, sentence_index: s.sentence_index, sgt, ocr };
        fixed.push_str(&serde_json::to_string(&rec).map_err(EmitError::from)?);
        fixed.push('\n');
    }
    fs::write(aligned_dir.join("fixed.jsonl"), fixed)?;

    let mut stats = CorpusStats::default();
    for r in results {
        let mut shard = CorpusStats::default();
        for s in &r.sentences {
            shard.add_sentence(&r.article_id, s.page, &s.sgt_text, &s.ocr_text, &s.edit);
        }
        stats.merge(&shard);
    }
    write_stats(&stats, cfg.word_top_k, &stats_dir)?;
    fs::write(cfg.out_dir.join("summary.txt"), report.summary())?;
    Ok(())
}

/// Writes confusion tables and the stats summary into `stats_dir`.
pub fn write_stats(stats: &CorpusStats, word_top_k: usize, stats_dir: &Path) -> Result<(), PipelineError> {
    fs::create_dir_all(stats_dir)?;
    write_confusion_csv(&stats.char_rows(), BufWriter::new(fs::File::create(stats_dir.join("char_confusion.csv"))?))?;
    write_confusion_csv(
        &stats.word_rows(word_top_k),
        BufWriter::new(fs::File::create(stats_dir.join("word_confusion.csv"))?),
    )?;
    fs::write(stats_dir.join("stats.txt"), stats.summary())?;
    Ok(())
}

/// Rebuilds corpus statistics from dataset records.
pub fn stats_from_records(records: &[DatasetRecord]) -> CorpusStats {
    let mut stats = CorpusStats::default();
    for r in records {
        let script = crate::align::edit_script(&r.sgt, &r.ocr);
        stats.add_sentence(&r.article_id, r.page, &r.sgt, &r.ocr, &script);
    }
    stats
}
