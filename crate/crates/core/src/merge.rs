//! Regrouping filed pages into per-student, per-exercise or per-exercise
//! aggregate PDF documents.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::PagePayload;
use crate::compose::Roster;
use crate::fsutil::{write_atomic, write_json};
use crate::pdfout::{EncodedPage, OutlineEntry, PdfError, PdfPageSource, PdfWriter};
use crate::raster::{PageImage, RasterError};
use crate::split::{read_tree, SplitError};

pub const REPORT_FILE: &str = "merge-report.json";

#[derive(Debug, Error)]
pub enum MergeError {
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error("{}: {source}", path.display())]
    Page { path: PathBuf, source: RasterError },
    #[error(transparent)]
    Pdf(#[from] PdfError),
    #[error(transparent)]
    Tree(#[from] SplitError),
}

fn io_err(path: &Path, e: io::Error) -> MergeError {
    MergeError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MergeMode {
    /// One document per student, all pages ascending.
    Student,
    /// One document per student and exercise.
    Exercise,
    /// One document per exercise with every student's pages.
    Aggregate,
}

impl std::str::FromStr for MergeMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "student" => Ok(MergeMode::Student),
            "exercise" => Ok(MergeMode::Exercise),
            "aggregate" => Ok(MergeMode::Aggregate),
            other => Err(format!("unknown merge mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergePlan {
    pub mode: MergeMode,
    pub input: PathBuf,
    pub output: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergedDocument {
    /// Relative to the output directory.
    pub path: PathBuf,
    pub payloads: Vec<String>,
    pub outline: Vec<(String, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum MergeWarning {
    EmptyStudentFolder {
        student_id: String,
    },
    /// Page numbers missing from an otherwise produced document.
    Gap {
        student_id: String,
        exercise_no: Option<u32>,
        missing: Vec<u32>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeReport {
    pub mode: MergeMode,
    pub documents: Vec<MergedDocument>,
    pub warnings: Vec<MergeWarning>,
    pub pages: usize,
}

type Page = (PagePayload, PathBuf);

/// Page numbers absent from `lo..=hi`.
fn missing(pages: &BTreeSet<u32>, lo: u32, hi: u32) -> Vec<u32> {
    (lo..=hi).filter(|p| !pages.contains(p)).collect()
}

struct DocSpec {
    rel: PathBuf,
    pages: Vec<Page>,
    outline: Vec<OutlineEntry>,
}

fn write_document(out: &Path, spec: &DocSpec) -> Result<MergedDocument, MergeError> {
    let path = out.join(&spec.rel);
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let mut failure: Option<MergeError> = None;
    let written = write_atomic(&path, |w| {
        let result = (|| {
            let mut writer = PdfWriter::new(&mut *w)?;
            for (_, file) in &spec.pages {
                let img = PageImage::load(file).map_err(|source| MergeError::Page {
                    path: file.clone(),
                    source,
                })?;
                writer.add_page(&EncodedPage::encode(&PdfPageSource::Raster(img))?)?;
            }
            writer.finish(&spec.outline)?;
            Ok(())
        })();
        result.map_err(|e: MergeError| {
            failure = Some(e);
            io::Error::new(io::ErrorKind::Other, "document assembly failed")
        })
    });
    if let Some(e) = failure {
        return Err(e);
    }
    written.map_err(|e| io_err(&path, e))?;
    Ok(MergedDocument {
        path: spec.rel.clone(),
        payloads: spec.pages.iter().map(|(p, _)| p.to_string()).collect(),
        outline: spec.outline.iter().map(|o| (o.title.clone(), o.page_index)).collect(),
    })
}

fn by_page(pages: &mut [Page]) {
    pages.sort_by_key(|(p, _)| (p.page_no, p.exercise_no));
}

fn by_exercise(pages: &[Page]) -> BTreeMap<u32, Vec<Page>> {
    let mut groups: BTreeMap<u32, Vec<Page>> = BTreeMap::new();
    for page in pages {
        groups.entry(page.0.exercise_no).or_default().push(page.clone());
    }
    for g in groups.values_mut() {
        by_page(g);
    }
    groups
}

fn exercise_gaps(sid: &str, groups: &BTreeMap<u32, Vec<Page>>, warnings: &mut Vec<MergeWarning>) {
    for (&ex, pages) in groups {
        let nums: BTreeSet<u32> = pages.iter().map(|(p, _)| p.page_no).collect();
        let gap = missing(&nums, *nums.first().unwrap(), *nums.last().unwrap());
        if !gap.is_empty() {
            warnings.push(MergeWarning::Gap {
                student_id: sid.to_string(),
                exercise_no: Some(ex),
                missing: gap,
            });
        }
    }
}

/// Student order for aggregate documents: roster order first, then any
/// remaining folders by name.
fn student_order(tree: &BTreeMap<String, Vec<Page>>, roster: Option<&Roster>) -> Vec<String> {
    let mut ids: Vec<String> = tree.keys().cloned().collect();
    if let Some(r) = roster {
        ids.sort_by_key(|id| (r.position(id).unwrap_or(usize::MAX), id.clone()));
    }
    ids
}

fn plan_documents(
    mode: MergeMode,
    tree: &BTreeMap<String, Vec<Page>>,
    roster: Option<&Roster>,
    warnings: &mut Vec<MergeWarning>,
) -> Vec<DocSpec> {
    let mut docs = Vec::new();
    let mut aggregate: BTreeMap<u32, (Vec<Page>, Vec<OutlineEntry>)> = BTreeMap::new();
    for sid in student_order(tree, roster) {
        let pages = &tree[&sid];
        if pages.is_empty() {
            warnings.push(MergeWarning::EmptyStudentFolder { student_id: sid });
            continue;
        }
        match mode {
            MergeMode::Student => {
                let mut sorted = pages.clone();
                by_page(&mut sorted);
                let nums: BTreeSet<u32> = sorted.iter().map(|(p, _)| p.page_no).collect();
                let gap = missing(&nums, 1, *nums.last().unwrap());
                if !gap.is_empty() {
                    warnings.push(MergeWarning::Gap {
                        student_id: sid.clone(),
                        exercise_no: None,
                        missing: gap,
                    });
                }
                docs.push(DocSpec {
                    rel: PathBuf::from(format!("{sid}.pdf")),
                    pages: sorted,
                    outline: Vec::new(),
                });
            }
            MergeMode::Exercise => {
                let groups = by_exercise(pages);
                exercise_gaps(&sid, &groups, warnings);
                for (ex, pages) in groups {
                    docs.push(DocSpec {
                        rel: Path::new(&sid).join(format!("{ex}.pdf")),
                        pages,
                        outline: Vec::new(),
                    });
                }
            }
            MergeMode::Aggregate => {
                let groups = by_exercise(pages);
                exercise_gaps(&sid, &groups, warnings);
                for (ex, pages) in groups {
                    let (all, outline) = aggregate.entry(ex).or_default();
                    outline.push(OutlineEntry {
                        title: sid.clone(),
                        page_index: all.len(),
                    });
                    all.extend(pages);
                }
            }
        }
    }
    for (ex, (pages, outline)) in aggregate {
        docs.push(DocSpec {
            rel: PathBuf::from(format!("exercise-{ex}.pdf")),
            pages,
            outline,
        });
    }
    docs
}

/// Merges the split tree at `plan.input` into `plan.output` and writes
/// `merge-report.json`. `roster` fixes student order in aggregate documents.
pub fn run_merge(plan: &MergePlan, roster: Option<&Roster>) -> Result<MergeReport, MergeError> {
    let tree = read_tree(&plan.input)?;
    fs::create_dir_all(&plan.output).map_err(|e| io_err(&plan.output, e))?;
    let mut warnings = Vec::new();
    let specs = plan_documents(plan.mode, &tree, roster, &mut warnings);
    let documents = specs
        .par_iter()
        .map(|spec| write_document(&plan.output, spec))
        .collect::<Result<Vec<_>, _>>()?;
    let report = MergeReport {
        mode: plan.mode,
        pages: documents.iter().map(|d| d.payloads.len()).sum(),
        documents,
        warnings,
    };
    let path = plan.output.join(REPORT_FILE);
    write_json(&path, &report).map_err(|e| io_err(&path, e))?;
    Ok(report)
}

pub fn merge_student_wise(tree: &Path, out: &Path) -> Result<MergeReport, MergeError> {
    run_merge(
        &MergePlan {
            mode: MergeMode::Student,
            input: tree.into(),
            output: out.into(),
        },
        None,
    )
}

pub fn merge_exercise_wise(tree: &Path, out: &Path) -> Result<MergeReport, MergeError> {
    run_merge(
        &MergePlan {
            mode: MergeMode::Exercise,
            input: tree.into(),
            output: out.into(),
        },
        None,
    )
}

pub fn merge_exercise_aggregate(tree: &Path, out: &Path, roster: Option<&Roster>) -> Result<MergeReport, MergeError> {
    run_merge(
        &MergePlan {
            mode: MergeMode::Aggregate,
            input: tree.into(),
            output: out.into(),
        },
        roster,
    )
}
