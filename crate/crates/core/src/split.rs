//! Scan ingestion and filing of pages by their decoded payload.
//!
//! Output tree:
//!
//! - `<student>/<student>-<exercise>-<page>.png` for filed pages
//! - `quarantine/page-<index>.png` and `page-<index>.reason.txt`
//! - `duplicates/<payload>.page-<index>.png` for repeated payloads
//! - `split-report.json`
//!
//! Input indices are 0-based positions in the ingested page order.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tempfile::TempDir;
use thiserror::Error;

use crate::codec::PagePayload;
use crate::compose::tools::{ToolConfig, RASTERIZER};
use crate::compose::{ComposeError, Roster};
use crate::fsutil::write_json;
use crate::raster::{
    locate_and_decode_with, DecodeReport, PageImage, RasterError, RegionOfInterest, ScanOptions,
};

pub const REPORT_FILE: &str = "split-report.json";
pub const QUARANTINE_DIR: &str = "quarantine";
pub const DUPLICATES_DIR: &str = "duplicates";

#[derive(Debug, Error)]
pub enum SplitError {
    #[error("scan source {0} does not exist")]
    SourceMissing(PathBuf),
    #[error("a rasterizer command is needed to read {0}")]
    RasterizerMissing(PathBuf),
    #[error("rasterizer: {0}")]
    Rasterizer(ComposeError),
    #[error("cannot write {}: {message}", path.display())]
    OutputNotWritable { path: PathBuf, message: String },
    #[error("cannot read {}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error(transparent)]
    Raster(#[from] RasterError),
}

fn not_writable(path: &Path, e: io::Error) -> SplitError {
    SplitError::OutputNotWritable {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// One scanned page, loaded on demand.
#[derive(Debug, Clone)]
pub enum ScanPage {
    /// Image file; `dpi` overrides the density stored in the file.
    File { path: PathBuf, dpi: Option<f64> },
    Image(PageImage),
}

impl ScanPage {
    pub fn load(&self) -> Result<PageImage, RasterError> {
        match self {
            ScanPage::File { path, dpi } => {
                let img = PageImage::load(path)?;
                match dpi {
                    Some(d) => img.with_dpi(*d),
                    None => Ok(img),
                }
            }
            ScanPage::Image(img) => Ok(img.clone()),
        }
    }
}

/// Ingested pages. A rasterized PDF keeps its page files in a temporary
/// directory that lives as long as this value.
#[derive(Debug)]
pub struct ScanSource {
    pub pages: Vec<ScanPage>,
    _workdir: Option<TempDir>,
}

fn is_image_file(path: &Path) -> bool {
    path.is_file()
        && path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
            .unwrap_or(false)
}

/// Image files of a directory in lexicographic file name order.
pub fn image_files(dir: &Path) -> Result<Vec<PathBuf>, SplitError> {
    let io_err = |e: io::Error| SplitError::Io {
        path: dir.to_path_buf(),
        message: e.to_string(),
    };
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err)? {
        let path = entry.map_err(io_err)?.path();
        if is_image_file(&path) {
            files.push(path);
        }
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

/// Reads a scan: an image directory, a single image, or a PDF rasterized by
/// the configured `rasterizer` command at `dpi`.
///
/// The rasterizer receives `{input}`, `{outdir}` and `{dpi}` and must leave
/// one PNG or JPEG per page in `{outdir}`, named so that lexicographic order
/// is page order.
pub fn ingest_scan(source: &Path, tools: &ToolConfig, dpi: f64) -> Result<ScanSource, SplitError> {
    if !source.exists() {
        return Err(SplitError::SourceMissing(source.to_path_buf()));
    }
    if source.is_dir() {
        let pages = image_files(source)?
            .into_iter()
            .map(|path| ScanPage::File { path, dpi: None })
            .collect();
        return Ok(ScanSource {
            pages,
            _workdir: None,
        });
    }
    let is_pdf = source
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("pdf"));
    if !is_pdf {
        return Ok(ScanSource {
            pages: vec![ScanPage::File {
                path: source.to_path_buf(),
                dpi: None,
            }],
            _workdir: None,
        });
    }
    let tool = match tools.require(RASTERIZER) {
        Ok(t) => t,
        Err(ComposeError::ToolNotFound { .. }) => {
            return Err(SplitError::RasterizerMissing(source.to_path_buf()))
        }
        Err(e) => return Err(SplitError::Rasterizer(e)),
    };
    let workdir = tempfile::tempdir().map_err(|e| SplitError::Io {
        path: std::env::temp_dir(),
        message: e.to_string(),
    })?;
    let input = source.display().to_string();
    let outdir = workdir.path().display().to_string();
    let dpi_s = dpi.to_string();
    tool.run(
        &[("input", &input), ("outdir", &outdir), ("dpi", &dpi_s)],
        &[],
        None,
    )
    .map_err(SplitError::Rasterizer)?;
    let pages = image_files(workdir.path())?
        .into_iter()
        .map(|path| ScanPage::File {
            path,
            dpi: Some(dpi),
        })
        .collect();
    Ok(ScanSource {
        pages,
        _workdir: Some(workdir),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitOptions {
    pub roi: RegionOfInterest,
    pub skew_budget_deg: f64,
    pub scan: ScanOptions,
    /// Pages decoded concurrently before their results are written.
    pub chunk_size: usize,
}

impl Default for SplitOptions {
    fn default() -> Self {
        SplitOptions {
            roi: RegionOfInterest::default(),
            skew_budget_deg: 3.0,
            scan: ScanOptions::default(),
            chunk_size: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuarantineReason {
    /// Short tag: a decode failure tag, `MalformedPayload`, `UnknownStudent`
    /// or `UnreadablePage`.
    pub kind: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiledPage {
    pub index: usize,
    pub payload: PagePayload,
    /// Relative to the output directory.
    pub path: PathBuf,
    pub orientation_deg: u16,
    pub skew_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuarantinedPage {
    pub index: usize,
    pub reason: QuarantineReason,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DuplicateEntry {
    pub payload: PagePayload,
    /// Index of the filed copy, absent when it was filed by an earlier run.
    pub filed_index: Option<usize>,
    pub extra_indices: Vec<usize>,
    pub paths: Vec<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitResult {
    pub input_pages: usize,
    pub filed: Vec<FiledPage>,
    pub quarantined: Vec<QuarantinedPage>,
    pub duplicates: Vec<DuplicateEntry>,
}

impl SplitResult {
    pub fn duplicate_extras(&self) -> usize {
        self.duplicates.iter().map(|d| d.extra_indices.len()).sum()
    }
}

enum Outcome {
    Filed {
        payload: PagePayload,
        page: PageImage,
        orientation: u16,
        skew: f64,
    },
    Quarantined {
        reason: QuarantineReason,
        page: Option<PageImage>,
        raw: Option<Vec<u8>>,
    },
}

/// Candidate portrait readings of a page: as is, or both quarter turns for
/// a landscape scan.
fn portrait_candidates(img: &PageImage) -> Vec<(PageImage, u16)> {
    if img.width() > img.height() {
        vec![(img.rotated_90_cw(), 90), (img.rotated_90_ccw(), 270)]
    } else {
        vec![(img.clone(), 0)]
    }
}

fn decode_page(img: &PageImage, opts: &SplitOptions) -> Result<(DecodeReport, PageImage, u16), RasterError> {
    let mut last_err = None;
    for (candidate, turn) in portrait_candidates(img) {
        for roi in [opts.roi, RegionOfInterest::FULL_PAGE] {
            match locate_and_decode_with(&candidate, &roi, opts.skew_budget_deg, &opts.scan) {
                Ok(report) => return Ok((report, candidate, turn)),
                Err(e @ RasterError::DecodeFailed(_)) => {
                    if last_err.is_none() || roi == opts.roi {
                        last_err = Some(e);
                    }
                }
                Err(e) => return Err(e),
            }
            if roi == RegionOfInterest::FULL_PAGE {
                break;
            }
        }
    }
    Err(last_err.expect("at least one attempt"))
}

fn failure_reason(err: &RasterError) -> QuarantineReason {
    match err {
        RasterError::DecodeFailed(report) => {
            let reason = report.failure_reason.as_ref();
            let kind = reason.map_or("DecodeFailed", |r| r.dominant_tag()).to_string();
            let detail = match reason {
                Some(crate::raster::FailureReason::MalformedPayload { text }) => {
                    format!("scanlines agreed on {text:?}, which is not a valid payload")
                }
                Some(crate::raster::FailureReason::NoQuorum { tags }) => {
                    let tags: Vec<String> = tags.iter().map(|(t, n)| format!("{t}={n}")).collect();
                    format!("no scanline quorum; failures: {}", tags.join(", "))
                }
                None => "decode failed".into(),
            };
            QuarantineReason { kind, detail }
        }
        other => QuarantineReason {
            kind: other.tag().to_string(),
            detail: other.to_string(),
        },
    }
}

fn process(page: &ScanPage, roster: &Roster, opts: &SplitOptions) -> Outcome {
    let img = match page.load() {
        Ok(img) => img,
        Err(e) => {
            let raw = match page {
                ScanPage::File { path, .. } => fs::read(path).ok(),
                ScanPage::Image(_) => None,
            };
            return Outcome::Quarantined {
                reason: QuarantineReason {
                    kind: "UnreadablePage".into(),
                    detail: e.to_string(),
                },
                page: None,
                raw,
            };
        }
    };
    match decode_page(&img, opts) {
        Ok((report, candidate, turn)) => {
            let payload = report.payload.clone().expect("successful report has a payload");
            if !roster.contains(&payload.student_id) {
                return Outcome::Quarantined {
                    reason: QuarantineReason {
                        kind: "UnknownStudent".into(),
                        detail: format!("student {:?} from payload {payload} is not in the roster", payload.student_id),
                    },
                    page: Some(img),
                    raw: None,
                };
            }
            let page = if report.orientation_deg == 180 {
                candidate.rotated_180()
            } else {
                candidate
            };
            Outcome::Filed {
                payload,
                page,
                orientation: (report.orientation_deg + turn) % 360,
                skew: report.skew_deg,
            }
        }
        Err(e) => Outcome::Quarantined {
            reason: failure_reason(&e),
            page: Some(img),
            raw: None,
        },
    }
}

/// Writes `bytes` to a new file; never replaces an existing one.
fn create_new(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let mut f = OpenOptions::new().write(true).create_new(true).open(path)?;
    f.write_all(bytes)
}

struct Filer<'a> {
    out: &'a Path,
    result: SplitResult,
    filed_at: HashMap<PagePayload, usize>,
    dup_at: HashMap<PagePayload, usize>,
}

impl Filer<'_> {
    fn ensure_dir(&self, rel: &Path) -> Result<PathBuf, SplitError> {
        let dir = self.out.join(rel);
        fs::create_dir_all(&dir).map_err(|e| not_writable(&dir, e))?;
        Ok(dir)
    }

    fn file(&mut self, index: usize, outcome: Outcome) -> Result<(), SplitError> {
        match outcome {
            Outcome::Filed {
                payload,
                page,
                orientation,
                skew,
            } => {
                let name = format!("{payload}.png");
                let rel = Path::new(&payload.student_id).join(&name);
                let bytes = page.to_png_bytes();
                let repeat = self.filed_at.contains_key(&payload);
                if !repeat {
                    self.ensure_dir(Path::new(&payload.student_id))?;
                    match create_new(&self.out.join(&rel), &bytes) {
                        Ok(()) => {
                            self.filed_at.insert(payload.clone(), index);
                            self.result.filed.push(FiledPage {
                                index,
                                payload,
                                path: rel,
                                orientation_deg: orientation,
                                skew_deg: skew,
                            });
                            return Ok(());
                        }
                        Err(e) if e.kind() == io::ErrorKind::AlreadyExists => {}
                        Err(e) => return Err(not_writable(&self.out.join(&rel), e)),
                    }
                }
                self.duplicate(index, payload, &bytes)
            }
            Outcome::Quarantined { reason, page, raw } => {
                let dir = self.ensure_dir(Path::new(QUARANTINE_DIR))?;
                let stem = format!("page-{index}");
                let (bytes, ext) = match (page, raw) {
                    (Some(p), _) => (p.to_png_bytes(), "png"),
                    (None, Some(raw)) => (raw, "bin"),
                    (None, None) => (Vec::new(), "bin"),
                };
                let name = format!("{stem}.{ext}");
                create_new(&dir.join(&name), &bytes).map_err(|e| not_writable(&dir.join(&name), e))?;
                let note = dir.join(format!("{stem}.reason.txt"));
                create_new(&note, format!("{}: {}\n", reason.kind, reason.detail).as_bytes())
                    .map_err(|e| not_writable(&note, e))?;
                self.result.quarantined.push(QuarantinedPage {
                    index,
                    reason,
                    path: Path::new(QUARANTINE_DIR).join(name),
                });
                Ok(())
            }
        }
    }

    fn duplicate(&mut self, index: usize, payload: PagePayload, bytes: &[u8]) -> Result<(), SplitError> {
        let dir = self.ensure_dir(Path::new(DUPLICATES_DIR))?;
        let name = format!("{payload}.page-{index}.png");
        create_new(&dir.join(&name), bytes).map_err(|e| not_writable(&dir.join(&name), e))?;
        let rel = Path::new(DUPLICATES_DIR).join(name);
        let slot = match self.dup_at.get(&payload) {
            Some(&i) => i,
            None => {
                self.result.duplicates.push(DuplicateEntry {
                    payload: payload.clone(),
                    filed_index: self.filed_at.get(&payload).copied(),
                    extra_indices: Vec::new(),
                    paths: Vec::new(),
                });
                self.dup_at.insert(payload, self.result.duplicates.len() - 1);
                self.result.duplicates.len() - 1
            }
        };
        let entry = &mut self.result.duplicates[slot];
        entry.extra_indices.push(index);
        entry.paths.push(rel);
        Ok(())
    }
}

/// Decodes every page and files it under `out`. Per-page problems go to
/// quarantine or duplicates; only output errors abort.
pub fn split_batch(
    pages: &[ScanPage],
    roster: &Roster,
    opts: &SplitOptions,
    out: &Path,
) -> Result<SplitResult, SplitError> {
    split_batch_with_progress(pages, roster, opts, out, |_, _| {})
}

/// [`split_batch`] with a callback receiving each page index and whether it
/// was filed, in input order.
pub fn split_batch_with_progress<F>(
    pages: &[ScanPage],
    roster: &Roster,
    opts: &SplitOptions,
    out: &Path,
    mut progress: F,
) -> Result<SplitResult, SplitError>
where
    F: FnMut(usize, Option<&QuarantineReason>),
{
    fs::create_dir_all(out).map_err(|e| not_writable(out, e))?;
    let mut filer = Filer {
        out,
        result: SplitResult {
            input_pages: pages.len(),
            ..SplitResult::default()
        },
        filed_at: HashMap::new(),
        dup_at: HashMap::new(),
    };
    let chunk = opts.chunk_size.max(1);
    for (c, group) in pages.chunks(chunk).enumerate() {
        let outcomes: Vec<Outcome> = group.par_iter().map(|p| process(p, roster, opts)).collect();
        for (k, outcome) in outcomes.into_iter().enumerate() {
            let index = c * chunk + k;
            let reason = match &outcome {
                Outcome::Quarantined { reason, .. } => Some(reason.clone()),
                Outcome::Filed { .. } => None,
            };
            filer.file(index, outcome)?;
            progress(index, reason.as_ref());
        }
    }
    let result = filer.result;
    let report = out.join(REPORT_FILE);
    write_json(&report, &result).map_err(|e| not_writable(&report, e))?;
    Ok(result)
}

/// Filed pages found in a split tree, grouped by student id.
pub fn read_tree(root: &Path) -> Result<BTreeMap<String, Vec<(PagePayload, PathBuf)>>, SplitError> {
    let mut tree = BTreeMap::new();
    if !root.exists() {
        return Ok(tree);
    }
    let io_err = |p: &Path, e: io::Error| SplitError::Io {
        path: p.to_path_buf(),
        message: e.to_string(),
    };
    for entry in fs::read_dir(root).map_err(|e| io_err(root, e))? {
        let dir = entry.map_err(|e| io_err(root, e))?.path();
        let Some(sid) = dir.file_name().and_then(|n| n.to_str()).map(str::to_string) else {
            continue;
        };
        if !dir.is_dir() || sid == QUARANTINE_DIR || sid == DUPLICATES_DIR || sid.starts_with('.') {
            continue;
        }
        let mut pages = Vec::new();
        for file in fs::read_dir(&dir).map_err(|e| io_err(&dir, e))? {
            let path = file.map_err(|e| io_err(&dir, e))?.path();
            let parsed = path
                .file_name()
                .and_then(|n| n.to_str())
                .and_then(|n| n.strip_suffix(".png"))
                .and_then(|stem| crate::codec::parse_payload(stem).ok())
                .filter(|p| p.student_id == sid);
            if let Some(p) = parsed {
                pages.push((p, path));
            }
        }
        pages.sort();
        tree.insert(sid, pages);
    }
    Ok(tree)
}
