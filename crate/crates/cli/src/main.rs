use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use gt_forge::align::SentenceSplitter;
use gt_forge::corpus::{find_main_file, JournalPatterns};
use gt_forge::emit::{emit_jsonl, read_jsonl, DatasetRecord};
use gt_forge::geometry::{AuxGrammar, DEFAULT_FONT_HEIGHT_PT};
use gt_forge::metrics::{eval_report, Metric, DEFAULT_WORD_TOP_K};
use gt_forge::pipeline::{self, AlignSettings, PipelineError};
use gt_forge::render::{self, png_dimensions, ToolchainConfig};
use gt_forge::tex::decode_source;
use gt_forge::{MarkerTemplate, PageRender, PipelineConfig};

#[derive(Parser)]
#[command(name = "forge", version, about = "Aligned ground-truth/OCR text pairs from LaTeX sources")]
struct Cli {
    /// Output directory for stage artifacts [default: out; for `run`, the
    /// configured out_dir].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Find main files and journal classes of every article under DIR.
    Scan { dir: PathBuf },
    /// Inject position markers into a main TeX file.
    Mark {
        main: PathBuf,
        #[arg(long, default_value = "tikzmark")]
        aux_grammar: AuxGrammar,
    },
    /// Compile a marked article directory.
    Compile {
        dir: PathBuf,
        #[command(flatten)]
        tools: ToolArgs,
    },
    /// Rasterize a PDF and OCR every page.
    Ocr {
        pdf: PathBuf,
        #[command(flatten)]
        tools: ToolArgs,
    },
    /// Align one article from its aux file, OCR pages and element table.
    Align {
        #[arg(long)]
        aux: PathBuf,
        /// One TSV per page, in page order.
        #[arg(long, num_args = 1.., required = true)]
        tsv: Vec<PathBuf>,
        #[arg(long)]
        elements: PathBuf,
        /// One PNG per page, in page order; sizes are read from the headers.
        #[arg(long, num_args = 1.., required = true)]
        pages: Vec<PathBuf>,
        #[arg(long, default_value_t = render::DEFAULT_DPI)]
        dpi: u32,
        #[arg(long, default_value_t = DEFAULT_FONT_HEIGHT_PT)]
        font_height_pt: f64,
        #[arg(long, default_value = "tikzmark")]
        aux_grammar: AuxGrammar,
        /// Defaults to the directory name of the aux file.
        #[arg(long)]
        article_id: Option<String>,
    },
    /// Recompute corpus statistics from a dataset file.
    Stats {
        jsonl: PathBuf,
        #[arg(long, default_value_t = DEFAULT_WORD_TOP_K)]
        top_k: usize,
    },
    /// Score corrections: one instance per line in each file.
    Eval {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        before: PathBuf,
        #[arg(long)]
        after: PathBuf,
        /// cer or wer; both when omitted.
        #[arg(long)]
        metric: Option<Metric>,
    },
    /// Run every stage from a configuration file.
    Run { config: PathBuf },
}

#[derive(Args)]
struct ToolArgs {
    /// Read committed outputs from this directory instead of running tools.
    #[arg(long)]
    fixture_dir: Option<PathBuf>,
    #[arg(long)]
    dpi: Option<u32>,
    #[arg(long)]
    timeout_seconds: Option<u64>,
}

impl ToolArgs {
    fn config(&self) -> Result<ToolchainConfig> {
        let mut cfg = ToolchainConfig { fixture_dir: self.fixture_dir.clone(), ..Default::default() };
        cfg.apply_env()?;
        if let Some(d) = self.dpi {
            cfg.dpi = d;
        }
        if let Some(t) = self.timeout_seconds {
            cfg.timeout_seconds = t;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Exit status 2: invalid configuration or input contract.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn dir_name(p: &Path) -> Result<String> {
    p.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .with_context(|| format!("cannot derive an article id from {}", p.display()))
}

fn parent_name(p: &Path) -> Result<String> {
    let parent = fs::canonicalize(p).with_context(|| format!("{}", p.display()))?;
    dir_name(parent.parent().unwrap_or(Path::new("")))
}

fn cmd_scan(dir: &Path) -> Result<()> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    for res in pipeline::scan_corpus(dir, &JournalPatterns::default())? {
        match res {
            Ok(rec) => writeln!(out, "{}", serde_json::to_string(&rec)?)?,
            Err((id, e)) => log::warn!("{id}: {e}"),
        }
    }
    Ok(())
}

fn cmd_mark(main: &Path, grammar: AuxGrammar, out: &Path) -> Result<()> {
    let template = match grammar {
        AuxGrammar::Tikzmark => MarkerTemplate::tikzmark(),
        AuxGrammar::Savepos => MarkerTemplate::savepos(),
    };
    let bytes = fs::read(main).with_context(|| format!("reading {}", main.display()))?;
    let (source, _) = decode_source(&bytes);
    let marked = pipeline::mark_source(&source, &template)?;
    let article_dir = fs::canonicalize(main)?.parent().map(Path::to_path_buf).unwrap_or_default();
    let id = dir_name(&article_dir)?;
    let dest = out.join("marked").join(&id);
    let main_rel = main.file_name().map(PathBuf::from).context("main file has no name")?;
    pipeline::write_marked(&article_dir, &main_rel, &marked, &dest)?;
    println!("{}: {} elements", id, marked.element_table().len());
    Ok(())
}

fn cmd_compile(dir: &Path, tools: &ToolArgs, out: &Path) -> Result<()> {
    let cfg = tools.config()?;
    let mut tex = Vec::new();
    for rel in pipeline::list_files(dir)? {
        if rel.extension().is_some_and(|e| e == "tex") {
            tex.push((rel.clone(), fs::read(dir.join(&rel))?));
        }
    }
    let main = find_main_file(&tex)?;
    let compiled = render::compile_document(dir, &main, &cfg)?;
    let dest = out.join("render").join(dir_name(dir)?);
    fs::create_dir_all(&dest)?;
    fs::write(dest.join("main.aux"), &compiled.aux_text)?;
    fs::copy(&compiled.pdf_path, dest.join("main.pdf"))?;
    println!("{}", dest.join("main.pdf").display());
    Ok(())
}

fn cmd_ocr(pdf: &Path, tools: &ToolArgs, out: &Path) -> Result<()> {
    let cfg = tools.config()?;
    let dest = out.join("render").join(parent_name(pdf)?);
    let pages = render::render_and_ocr(pdf, &dest, &cfg)?;
    fs::create_dir_all(&dest)?;
    for (p, tsv) in &pages {
        fs::write(dest.join(format!("page-{}.tsv", p.page_number)), tsv)?;
    }
    println!("{} pages", pages.len());
    Ok(())
}

/// Page number from a `page-N.*` file name, else the 1-based position.
fn page_number(path: &Path, position: usize) -> u32 {
    path.file_stem()
        .and_then(|s| s.to_str())
        .and_then(|s| s.strip_prefix("page-"))
        .and_then(|n| n.parse().ok())
        .unwrap_or(position as u32 + 1)
}

#[allow(clippy::too_many_arguments)]
fn cmd_align(
    aux: &Path,
    tsv: &[PathBuf],
    elements: &Path,
    pages: &[PathBuf],
    dpi: u32,
    font_height_pt: f64,
    aux_grammar: AuxGrammar,
    article_id: Option<String>,
    out: &Path,
) -> Result<()> {
    if tsv.len() != pages.len() {
        return Err(UsageError(format!("{} TSV files but {} page images", tsv.len(), pages.len())).into());
    }
    let article_id = match article_id {
        Some(id) => id,
        None => parent_name(aux)?,
    };
    let aux_text = String::from_utf8_lossy(&fs::read(aux)?).into_owned();
    let elements = pipeline::read_elements(elements)?;
    let mut rendered = Vec::with_capacity(pages.len());
    for (i, (png, tsv_path)) in pages.iter().zip(tsv).enumerate() {
        let (width_px, height_px) = png_dimensions(png)?;
        let render = PageRender { page_number: page_number(png, i), image_path: png.clone(), width_px, height_px, dpi };
        rendered.push((render, fs::read_to_string(tsv_path)?));
    }
    let settings = AlignSettings { aux_grammar, font_height_pt, splitter: SentenceSplitter::default() };
    let (sentences, diag) = pipeline::align_article(&article_id, &aux_text, &elements, &rendered, &settings)?;
    let dest = out.join("aligned");
    fs::create_dir_all(&dest)?;
    let records: Vec<DatasetRecord> = sentences.iter().map(DatasetRecord::from).collect();
    emit_jsonl(&records, &mut io::BufWriter::new(fs::File::create(dest.join("dataset.jsonl"))?))?;
    eprintln!("{}", serde_json::to_string(&diag)?);
    println!("{} sentences", records.len());
    Ok(())
}

fn cmd_stats(jsonl: &Path, top_k: usize, out: &Path) -> Result<()> {
    let text = fs::read_to_string(jsonl).with_context(|| format!("reading {}", jsonl.display()))?;
    let records = read_jsonl(&text)?;
    let stats = pipeline::stats_from_records(&records);
    pipeline::write_stats(&stats, top_k, &out.join("stats"))?;
    print!("{}", stats.summary());
    Ok(())
}

fn read_lines(p: &Path) -> Result<Vec<String>> {
    Ok(fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?.lines().map(str::to_owned).collect())
}

fn cmd_eval(reference: &Path, before: &Path, after: &Path, metric: Option<Metric>) -> Result<()> {
    let (r, b, a) = (read_lines(reference)?, read_lines(before)?, read_lines(after)?);
    if r.len() != b.len() || r.len() != a.len() {
        return Err(UsageError(format!("line counts differ: ref {}, before {}, after {}", r.len(), b.len(), a.len())).into());
    }
    let triples: Vec<(String, String, String)> =
        r.into_iter().zip(b).zip(a).map(|((r, b), a)| (r, b, a)).collect();
    let metrics = match metric {
        Some(m) => vec![m],
        None => vec![Metric::Cer, Metric::Wer],
    };
    for m in metrics {
        println!("{}", serde_json::to_string(&eval_report(&triples, m)?)?);
    }
    Ok(())
}

fn cmd_run(config: &Path, out_override: Option<&Path>) -> Result<ExitCode> {
    let mut cfg = PipelineConfig::load(config).map_err(|e| UsageError(e.to_string()))?;
    cfg.toolchain.apply_env().map_err(|e| UsageError(e.to_string()))?;
    if let Some(o) = out_override {
        cfg.out_dir = o.to_path_buf();
    }
    let report = match pipeline::run_pipeline(&cfg) {
        Err(e @ PipelineError::Sentinel(_)) => return Err(UsageError(e.to_string()).into()),
        other => other?,
    };
    print!("{}", report.summary());
    if report.succeeded() == 0 {
        eprintln!("no article completed the pipeline");
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let result = match &cli.command {
        Cmd::Scan { dir } => cmd_scan(dir).map(|_| ExitCode::SUCCESS),
        Cmd::Mark { main, aux_grammar } => cmd_mark(main, *aux_grammar, &out).map(|_| ExitCode::SUCCESS),
        Cmd::Compile { dir, tools } => cmd_compile(dir, tools, &out).map(|_| ExitCode::SUCCESS),
        Cmd::Ocr { pdf, tools } => cmd_ocr(pdf, tools, &out).map(|_| ExitCode::SUCCESS),
        Cmd::Align { aux, tsv, elements, pages, dpi, font_height_pt, aux_grammar, article_id } => cmd_align(
            aux,
            tsv,
            elements,
            pages,
            *dpi,
            *font_height_pt,
            *aux_grammar,
            article_id.clone(),
            &out,
        )
        .map(|_| ExitCode::SUCCESS),
        Cmd::Stats { jsonl, top_k } => cmd_stats(jsonl, *top_k, &out).map(|_| ExitCode::SUCCESS),
        Cmd::Eval { reference, before, after, metric } => {
            cmd_eval(reference, before, after, *metric).map(|_| ExitCode::SUCCESS)
        }
        Cmd::Run { config } => cmd_run(config, cli.out.as_deref()),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
