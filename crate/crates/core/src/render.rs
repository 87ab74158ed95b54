//! External toolchain driver: TeX compilation, rasterization and OCR.
//!
//! With `fixture_dir` set nothing is spawned; committed outputs are read
//! from `<fixture_dir>/<article_id>/` instead (`main.pdf`, `main.aux`,
//! `page-N.png`, `page-N.tsv`).

use std::fs::{self, File};
use std::io::{self, Read};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_DPI: u32 = 300;
pub const DEFAULT_TIMEOUT_SECONDS: u64 = 600;
pub const LOG_EXCERPT_BYTES: usize = 64 * 1024;
const COMPILE_PASSES: usize = 2;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("compilation failed: {0}")]
    CompileFailed(String),
    #[error("`{command}` timed out after {seconds} s")]
    Timeout { command: String, seconds: u64 },
    #[error("rasterization failed: {0}")]
    RasterizeFailed(String),
    #[error("OCR failed on page {page}: {log}")]
    OcrFailed { page: u32, log: String },
    #[error("fixture file missing: {0}")]
    MissingFixture(PathBuf),
    #[error("not a PNG image: {0}")]
    BadImage(PathBuf),
    #[error("invalid toolchain setting: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToolchainConfig {
    pub latex_command: String,
    pub rasterize_command: String,
    pub ocr_command: String,
    pub dpi: u32,
    pub timeout_seconds: u64,
    pub fixture_dir: Option<PathBuf>,
}

impl Default for ToolchainConfig {
    fn default() -> Self {
        ToolchainConfig {
            latex_command: "pdflatex".into(),
            rasterize_command: "pdftoppm".into(),
            ocr_command: "tesseract".into(),
            dpi: DEFAULT_DPI,
            timeout_seconds: DEFAULT_TIMEOUT_SECONDS,
            fixture_dir: None,
        }
    }
}

impl ToolchainConfig {
    /// Applies `FORGE_LATEX_BIN`, `FORGE_RASTER_BIN`, `FORGE_TESSERACT_BIN`
    /// and `FORGE_DPI` from the process environment.
    pub fn apply_env(&mut self) -> Result<(), RenderError> {
        self.apply_overrides(|k| std::env::var(k).ok())
    }

    pub fn apply_overrides(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<(), RenderError> {
        if let Some(v) = lookup("FORGE_LATEX_BIN") {
            self.latex_command = v;
        }
        if let Some(v) = lookup("FORGE_RASTER_BIN") {
            self.rasterize_command = v;
        }
        if let Some(v) = lookup("FORGE_TESSERACT_BIN") {
            self.ocr_command = v;
        }
        if let Some(v) = lookup("FORGE_DPI") {
            self.dpi = v.trim().parse().map_err(|_| RenderError::InvalidConfig(format!("FORGE_DPI={v:?}")))?;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<(), RenderError> {
        if self.dpi == 0 {
            return Err(RenderError::InvalidConfig("dpi must be positive".into()));
        }
        for (key, cmd) in [
            ("latex_command", &self.latex_command),
            ("rasterize_command", &self.rasterize_command),
            ("ocr_command", &self.ocr_command),
        ] {
            if cmd.split_whitespace().next().is_none() {
                return Err(RenderError::InvalidConfig(format!("{key} is empty")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageRender {
    pub page_number: u32,
    pub image_path: PathBuf,
    pub width_px: u32,
    pub height_px: u32,
    pub dpi: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompileOutput {
    pub pdf_path: PathBuf,
    pub aux_text: String,
}

/// Reads width and height from a PNG header.
pub fn png_dimensions(path: &Path) -> Result<(u32, u32), RenderError> {
    let mut header = [0u8; 24];
    File::open(path)?.read_exact(&mut header).map_err(|_| RenderError::BadImage(path.to_owned()))?;
    if &header[..8] != b"\x89PNG\r\n\x1a\n" || &header[12..16] != b"IHDR" {
        return Err(RenderError::BadImage(path.to_owned()));
    }
    let w = u32::from_be_bytes(header[16..20].try_into().expect("4 bytes"));
    let h = u32::from_be_bytes(header[20..24].try_into().expect("4 bytes"));
    if w == 0 || h == 0 {
        return Err(RenderError::BadImage(path.to_owned()));
    }
    Ok((w, h))
}

fn truncate_log(bytes: &[u8]) -> String {
    let cut = bytes.len().saturating_sub(LOG_EXCERPT_BYTES);
    String::from_utf8_lossy(&bytes[cut..]).into_owned()
}

struct RunOutput {
    success: bool,
    log: String,
}

/// Runs `command` (program plus whitespace-separated leading arguments)
/// with `args` in `cwd`. Stdout goes to `stdout_to` when given; otherwise it
/// joins stderr in the returned log.
fn run_tool(
    command: &str,
    args: &[&str],
    cwd: &Path,
    stdout_to: Option<&Path>,
    timeout_seconds: u64,
) -> Result<RunOutput, RenderError> {
    if timeout_seconds == 0 {
        return Err(RenderError::Timeout { command: command.to_owned(), seconds: 0 });
    }
    let mut parts = command.split_whitespace();
    let program = parts.next().ok_or_else(|| RenderError::InvalidConfig("empty command".into()))?;
    static RUN_ID: AtomicUsize = AtomicUsize::new(0);
    let log_path = cwd.join(format!(".forge-{}-{}.log", std::process::id(), RUN_ID.fetch_add(1, Ordering::Relaxed)));
    let log_file = File::create(&log_path)?;
    let stdout = match stdout_to {
        Some(p) => Stdio::from(File::create(p)?),
        None => Stdio::from(log_file.try_clone()?),
    };
    let spawned = Command::new(program)
        .args(parts)
        .args(args)
        .current_dir(cwd)
        .stdin(Stdio::null())
        .stdout(stdout)
        .stderr(Stdio::from(log_file))
        .spawn();
    let mut child = match spawned {
        Ok(c) => c,
        Err(e) => {
            let _ = fs::remove_file(&log_path);
            return Ok(RunOutput { success: false, log: format!("cannot start `{program}`: {e}") });
        }
    };
    let deadline = Instant::now() + Duration::from_secs(timeout_seconds);
    let status = loop {
        if let Some(status) = child.try_wait()? {
            break status;
        }
        if Instant::now() >= deadline {
            let _ = child.kill();
            let _ = child.wait();
            let _ = fs::remove_file(&log_path);
            return Err(RenderError::Timeout { command: command.to_owned(), seconds: timeout_seconds });
        }
        std::thread::sleep(Duration::from_millis(10));
    };
    let log = truncate_log(&fs::read(&log_path).unwrap_or_default());
    let _ = fs::remove_file(&log_path);
    Ok(RunOutput { success: status.success(), log })
}

fn fixture_article(cfg: &ToolchainConfig, article_id: &str) -> Option<PathBuf> {
    cfg.fixture_dir.as_ref().map(|d| d.join(article_id))
}

fn require(path: PathBuf) -> Result<PathBuf, RenderError> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(RenderError::MissingFixture(path))
    }
}

fn dir_name(dir: &Path) -> String {
    dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Compiles `main_file` inside `marked_dir` (two passes) and returns the
/// PDF path and aux text. The directory name is the article id.
pub fn compile_document(marked_dir: &Path, main_file: &Path, cfg: &ToolchainConfig) -> Result<CompileOutput, RenderError> {
    if let Some(dir) = fixture_article(cfg, &dir_name(marked_dir)) {
        let pdf_path = require(dir.join("main.pdf"))?;
        let aux_text = fs::read_to_string(require(dir.join("main.aux"))?)?;
        return Ok(CompileOutput { pdf_path, aux_text });
    }
    let main = main_file.to_string_lossy();
    for _ in 0..COMPILE_PASSES {
        let out = run_tool(
            &cfg.latex_command,
            &["-interaction=nonstopmode", "-halt-on-error", &main],
            marked_dir,
            None,
            cfg.timeout_seconds,
        )?;
        if !out.success {
            return Err(RenderError::CompileFailed(out.log));
        }
    }
    let pdf_path = marked_dir.join(main_file.with_extension("pdf"));
    let aux_path = marked_dir.join(main_file.with_extension("aux"));
    if !pdf_path.is_file() || !aux_path.is_file() {
        return Err(RenderError::CompileFailed("compiler produced no PDF or aux file".into()));
    }
    let aux_text = String::from_utf8_lossy(&fs::read(&aux_path)?).into_owned();
    Ok(CompileOutput { pdf_path, aux_text })
}

fn numbered_files(dir: &Path, prefix: &str, ext: &str) -> Result<Vec<(u32, PathBuf)>, RenderError> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else { continue };
        let Some(num) = name.strip_prefix(prefix).and_then(|r| r.strip_suffix(ext)) else { continue };
        if let Ok(n) = num.parse::<u32>() {
            out.push((n, path));
        }
    }
    out.sort();
    Ok(out)
}

/// Rasterizes every page of `pdf_path` into `work_dir` and runs OCR on each.
/// In fixture mode the pages come from `<fixture_dir>/<id>`, where the id
/// is the PDF's directory name.
pub fn render_and_ocr(
    pdf_path: &Path,
    work_dir: &Path,
    cfg: &ToolchainConfig,
) -> Result<Vec<(PageRender, String)>, RenderError> {
    let mut out = Vec::new();
    let article_id = dir_name(pdf_path.parent().unwrap_or(Path::new("")));
    if let Some(dir) = fixture_article(cfg, &article_id) {
        if !dir.is_dir() {
            return Err(RenderError::MissingFixture(dir));
        }
        for (n, png) in numbered_files(&dir, "page-", ".png")? {
            let (width_px, height_px) = png_dimensions(&png)?;
            let tsv = fs::read_to_string(require(dir.join(format!("page-{n}.tsv")))?)?;
            out.push((PageRender { page_number: n, image_path: png, width_px, height_px, dpi: cfg.dpi }, tsv));
        }
        return Ok(out);
    }

    fs::create_dir_all(work_dir)?;
    let pdf = fs::canonicalize(pdf_path).map_err(|e| RenderError::RasterizeFailed(format!("{}: {e}", pdf_path.display())))?;
    let dpi = cfg.dpi.to_string();
    let pdf_arg = pdf.to_string_lossy();
    let raster = run_tool(&cfg.rasterize_command, &["-r", &dpi, "-png", &pdf_arg, "page"], work_dir, None, cfg.timeout_seconds)?;
    if !raster.success {
        return Err(RenderError::RasterizeFailed(raster.log));
    }
    for (n, png) in numbered_files(work_dir, "page-", ".png")? {
        let (width_px, height_px) = png_dimensions(&png)?;
        let tsv_path = work_dir.join(format!("page-{n}.tsv"));
        let image = png.file_name().expect("file name").to_string_lossy().into_owned();
        let ocr = run_tool(&cfg.ocr_command, &[&image, "stdout", "tsv"], work_dir, Some(&tsv_path), cfg.timeout_seconds)?;
        if !ocr.success {
            return Err(RenderError::OcrFailed { page: n, log: ocr.log });
        }
        let tsv = fs::read_to_string(&tsv_path)?;
        out.push((PageRender { page_number: n, image_path: png, width_px, height_px, dpi: cfg.dpi }, tsv));
    }
    Ok(out)
}
