use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::{code39_encode, serialize_payload, Code39Params, PagePayload};
use crate::fsutil::write_json;
use crate::pdfout::{EncodedPage, PdfPageSource, PdfWriter};
use crate::raster::{draw_text, render_barcode, PageImage};

use super::roster::{Roster, StudentRecord};
use super::template::{substitute_macros, ExamTemplate};
use super::tools::{ToolConfig, MERGER, TYPESETTER};
use super::ComposeError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PageSize {
    pub width_mm: f64,
    pub height_mm: f64,
}

impl PageSize {
    pub const A4: PageSize = PageSize {
        width_mm: 210.0,
        height_mm: 297.0,
    };
    pub const A5: PageSize = PageSize {
        width_mm: 148.0,
        height_mm: 210.0,
    };
}

impl Default for PageSize {
    fn default() -> Self {
        PageSize::A4
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GenerateMode {
    /// Pages are drawn here: header text, ID line and barcode.
    Native,
    /// Substituted sources are typeset by the configured tools.
    External,
}

#[derive(Debug, Clone)]
pub struct GenerateOptions {
    pub mode: GenerateMode,
    pub dpi: f64,
    pub page_size: PageSize,
    /// Also write every batch page as `pages/NNNNN.png`.
    pub page_images: bool,
    /// Extension for the per-student substituted sources.
    pub source_ext: String,
    pub tools: ToolConfig,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        GenerateOptions {
            mode: GenerateMode::Native,
            dpi: crate::raster::DEFAULT_DPI,
            page_size: PageSize::A4,
            page_images: false,
            source_ext: "txt".into(),
            tools: ToolConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestStudent {
    pub student_id: String,
    /// 1-based index of the student's first page in the batch document.
    pub first_page: usize,
    pub page_count: usize,
    pub payloads: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub mode: GenerateMode,
    /// Batch document file name, absent for an empty roster.
    pub document: Option<String>,
    pub page_count: usize,
    pub students: Vec<ManifestStudent>,
}

impl Manifest {
    pub fn payloads(&self) -> impl Iterator<Item = &str> {
        self.students.iter().flat_map(|s| s.payloads.iter().map(String::as_str))
    }
}

pub const BATCH_FILE: &str = "batch.pdf";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Payloads of one student's exam, in page order.
pub fn student_payloads(template: &ExamTemplate, student_id: &str) -> Result<Vec<PagePayload>, ComposeError> {
    template
        .exercise_page_map
        .iter()
        .enumerate()
        .map(|(i, &ex)| {
            let p = PagePayload::new(student_id, ex, i as u32 + 1)?;
            Ok(p)
        })
        .collect()
}

fn text_scale(dpi: f64) -> u32 {
    ((dpi / 100.0).round() as u32).max(1)
}

/// Draws one exam page: header text, exercise line, ID line and barcode.
pub fn render_exam_page(
    header: &str,
    id_line: &str,
    payload: &PagePayload,
    exercises: u32,
    template: &ExamTemplate,
    params: &Code39Params,
    dpi: f64,
    page_size: PageSize,
) -> Result<PageImage, ComposeError> {
    let mut page = PageImage::blank_mm(page_size.width_mm, page_size.height_mm, dpi);
    let (w, h) = (page.width(), page.height());
    let (rx0, ry0, rx1, ry1) = template.barcode_roi.pixel_bounds(w, h);
    let margin = (12.0 * dpi / 25.4).round() as u32;
    let scale = text_scale(dpi);
    let line_h = 11 * scale;

    let text_bottom = (ry0 as u32).saturating_sub(3 * line_h);
    let mut y = margin;
    let title = format!(
        "Exercise {} / {}    Page {} / {}",
        payload.exercise_no,
        exercises,
        payload.page_no,
        template.page_count()
    );
    for line in std::iter::once(title.as_str()).chain(header.lines()) {
        if y + line_h > text_bottom {
            break;
        }
        draw_text(&mut page, line, margin, y, scale);
        y += line_h;
    }
    if ry0 as u32 >= 2 * line_h {
        draw_text(&mut page, id_line, margin, ry0 as u32 - 2 * line_h, scale);
    }

    let text = serialize_payload(payload)?;
    let strip = render_barcode(&code39_encode(&text, params)?, params, dpi)?;
    let (roi_w, roi_h) = ((rx1 - rx0 + 1) as u32, (ry1 - ry0 + 1) as u32);
    if strip.width() > roi_w || strip.height() > roi_h {
        return Err(ComposeError::InvalidTemplate(format!(
            "barcode {}x{} px does not fit the region {}x{} px",
            strip.width(),
            strip.height(),
            roi_w,
            roi_h
        )));
    }
    let x = rx0 + (roi_w - strip.width()) as i64 / 2;
    let y = ry0 + (roi_h - strip.height()) as i64 / 2;
    page.blit(&strip, x, y);
    Ok(page)
}

fn id_line(roster: &Roster, record: &StudentRecord) -> String {
    format!("{}: {}", roster.config.key, record.key())
}

/// All pages of one student's exam, in page order.
pub fn render_student_pages(
    template: &ExamTemplate,
    roster: &Roster,
    record: &StudentRecord,
    params: &Code39Params,
    dpi: f64,
    page_size: PageSize,
) -> Result<Vec<PageImage>, ComposeError> {
    let header = substitute_macros(&template.source_text, record)?;
    let id = id_line(roster, record);
    let exercises = template.exercise_count();
    student_payloads(template, record.key())?
        .iter()
        .map(|p| render_exam_page(&header, &id, p, exercises, template, params, dpi, page_size))
        .collect()
}

fn manifest_students(template: &ExamTemplate, roster: &Roster) -> Result<Vec<ManifestStudent>, ComposeError> {
    let n = template.page_count();
    roster
        .records()
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let payloads = student_payloads(template, r.key())?
                .iter()
                .map(|p| p.to_string())
                .collect();
            Ok(ManifestStudent {
                student_id: r.key().to_string(),
                first_page: i * n + 1,
                page_count: n,
                payloads,
            })
        })
        .collect()
}

fn write_source(dir: &Path, record: &StudentRecord, text: &str, ext: &str) -> Result<PathBuf, ComposeError> {
    let path = dir.join(format!("{}.{}", record.key(), ext));
    fs::write(&path, text).map_err(|e| ComposeError::io(&path, e))?;
    Ok(path)
}

/// Generates the batch for every student in roster order into `out_dir`:
/// `batch.pdf`, `manifest.json`, `sources/` and optionally `pages/`.
pub fn generate_batch(
    template: &ExamTemplate,
    roster: &Roster,
    params: &Code39Params,
    opts: &GenerateOptions,
    out_dir: &Path,
) -> Result<Manifest, ComposeError> {
    params.validate()?;
    template.validate(&roster.config.fieldnames)?;
    let sources = out_dir.join("sources");
    fs::create_dir_all(&sources).map_err(|e| ComposeError::io(&sources, e))?;

    let students = manifest_students(template, roster)?;
    let page_count = students.iter().map(|s| s.page_count).sum();
    let document = if roster.is_empty() {
        None
    } else {
        match opts.mode {
            GenerateMode::Native => generate_native(template, roster, params, opts, out_dir)?,
            GenerateMode::External => generate_external(template, roster, opts, out_dir)?,
        }
        Some(BATCH_FILE.to_string())
    };
    let manifest = Manifest {
        mode: opts.mode,
        document,
        page_count,
        students,
    };
    let path = out_dir.join(MANIFEST_FILE);
    write_json(&path, &manifest).map_err(|e| ComposeError::io(&path, e))?;
    Ok(manifest)
}

struct RenderedStudent {
    pages: Vec<EncodedPage>,
    pngs: Vec<Vec<u8>>,
}

fn generate_native(
    template: &ExamTemplate,
    roster: &Roster,
    params: &Code39Params,
    opts: &GenerateOptions,
    out_dir: &Path,
) -> Result<(), ComposeError> {
    let sources = out_dir.join("sources");
    let pages_dir = out_dir.join("pages");
    if opts.page_images {
        fs::create_dir_all(&pages_dir).map_err(|e| ComposeError::io(&pages_dir, e))?;
    }
    let pdf_path = out_dir.join(BATCH_FILE);
    let file = File::create(&pdf_path).map_err(|e| ComposeError::io(&pdf_path, e))?;
    let mut writer = PdfWriter::new(BufWriter::new(file))?;

    // bounded chunks keep memory flat on large rosters
    let chunk = rayon::current_num_threads().max(1) * 2;
    let mut page_no = 0usize;
    for records in roster.records().chunks(chunk) {
        let rendered: Vec<RenderedStudent> = records
            .par_iter()
            .map(|record| {
                let header = substitute_macros(&template.source_text, record)?;
                write_source(&sources, record, &header, &opts.source_ext)?;
                let images = render_student_pages(template, roster, record, params, opts.dpi, opts.page_size)?;
                let mut out = RenderedStudent {
                    pages: Vec::with_capacity(images.len()),
                    pngs: Vec::new(),
                };
                for img in images {
                    if opts.page_images {
                        out.pngs.push(img.to_png_bytes());
                    }
                    out.pages.push(EncodedPage::encode(&PdfPageSource::Raster(img))?);
                }
                Ok(out)
            })
            .collect::<Result<_, ComposeError>>()?;
        for student in rendered {
            for page in &student.pages {
                writer.add_page(page)?;
            }
            for png in student.pngs {
                page_no += 1;
                let path = pages_dir.join(format!("{page_no:05}.png"));
                fs::write(&path, png).map_err(|e| ComposeError::io(&path, e))?;
            }
        }
    }
    writer.finish(&[])?;
    Ok(())
}

fn generate_external(
    template: &ExamTemplate,
    roster: &Roster,
    opts: &GenerateOptions,
    out_dir: &Path,
) -> Result<(), ComposeError> {
    let typesetter = opts.tools.require(TYPESETTER)?;
    let merger = opts.tools.require(MERGER)?;
    let sources = out_dir.join("sources");
    let outdir = sources.display().to_string();
    let dpi = opts.dpi.to_string();
    let outputs = roster
        .records()
        .par_iter()
        .map(|record| {
            let text = substitute_macros(&template.source_text, record)?;
            let input = write_source(&sources, record, &text, &opts.source_ext)?;
            let input_s = input.display().to_string();
            let output = sources.join(format!("{}.pdf", record.key()));
            let output_s = output.display().to_string();
            let vars = [
                ("input", input_s.as_str()),
                ("outdir", outdir.as_str()),
                ("jobname", record.key()),
                ("output", output_s.as_str()),
                ("dpi", dpi.as_str()),
            ];
            typesetter.run(&vars, &[], Some(&sources))?;
            if !output.is_file() {
                return Err(ComposeError::ToolFailed {
                    tool: typesetter.name.clone(),
                    status: Some(0),
                    stderr: format!("expected output {} was not produced", output.display()),
                });
            }
            Ok(output)
        })
        .collect::<Result<Vec<_>, ComposeError>>()?;
    let batch = out_dir.join(BATCH_FILE);
    let batch_s = batch.display().to_string();
    merger.run(&[("output", batch_s.as_str()), ("outdir", outdir.as_str())], &outputs, Some(out_dir))?;
    if !batch.is_file() {
        return Err(ComposeError::ToolFailed {
            tool: merger.name.clone(),
            status: Some(0),
            stderr: format!("expected output {} was not produced", batch.display()),
        });
    }
    Ok(())
}
