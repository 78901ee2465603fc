//! Technique runners shared by subcommands and the menu.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};

use examflow_core::codec::Code39Params;
use examflow_core::compose::{
    generate_batch, load_roster, parse_page_map, ExamTemplate, GenerateMode, GenerateOptions,
    PageSize, Roster, RosterConfig, TemplateLayout, ToolConfig,
};
use examflow_core::merge::{run_merge, MergePlan, MergeWarning};
use examflow_core::raster::{RegionOfInterest, ScanOptions};
use examflow_core::scores::{collect_scores, emit_distribution, GradeScheme};
use examflow_core::split::{ingest_scan, split_batch_with_progress, SplitOptions};

use crate::args::{
    BarcodeArgs, CommonArgs, GenerateArgs, MergeArgs, ModeArg, PageSizeArg, ScoresArgs, SplitArgs,
};

fn roster(common: &CommonArgs) -> Result<Roster> {
    let path = common.config.as_ref().context("--config <student_data.json> is required")?;
    let cfg = RosterConfig::load(path).with_context(|| format!("reading {}", path.display()))?;
    load_roster(&cfg).with_context(|| format!("loading roster {}", cfg.file_path.display()))
}

fn tools(common: &CommonArgs) -> Result<ToolConfig> {
    match &common.tools {
        Some(p) => ToolConfig::load(p).with_context(|| format!("reading {}", p.display())),
        None => Ok(ToolConfig::default()),
    }
}

fn params(b: &BarcodeArgs) -> Result<Code39Params> {
    let p = Code39Params {
        module_width_mm: b.module_width,
        wide_narrow_ratio: b.ratio,
        bar_height_mm: b.bar_height,
    };
    p.validate()?;
    Ok(p)
}

pub fn generate(args: &GenerateArgs, out: &mut dyn Write) -> Result<()> {
    let roster = roster(&args.common)?;
    let source = fs::read_to_string(&args.template)
        .with_context(|| format!("reading template {}", args.template.display()))?;
    let template = match (&args.layout, &args.exercise_pages) {
        (Some(layout), _) => ExamTemplate::with_layout(source, TemplateLayout::load(layout)?),
        (None, Some(list)) => ExamTemplate::new(source, parse_page_map(list)?),
        (None, None) => ExamTemplate::new(source, vec![1]),
    };
    let opts = GenerateOptions {
        mode: match args.mode {
            ModeArg::Native => GenerateMode::Native,
            ModeArg::External => GenerateMode::External,
        },
        dpi: args.dpi,
        page_size: match args.page_size {
            PageSizeArg::A4 => PageSize::A4,
            PageSizeArg::A5 => PageSize::A5,
        },
        page_images: !args.no_page_images,
        source_ext: args
            .template
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or("txt")
            .to_string(),
        tools: tools(&args.common)?,
    };
    let manifest = generate_batch(&template, &roster, &params(&args.barcode)?, &opts, &args.common.out)?;
    writeln!(
        out,
        "generated {} pages for {} students in {}",
        manifest.page_count,
        manifest.students.len(),
        args.common.out.display()
    )?;
    Ok(())
}

fn parse_roi(s: &str) -> Result<RegionOfInterest> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("bad region {s:?}"))?;
    if v.len() != 4 {
        bail!("region needs four fractions x,y,w,h, got {s:?}");
    }
    Ok(RegionOfInterest::new(v[0], v[1], v[2], v[3])?)
}

pub fn split(args: &SplitArgs, out: &mut dyn Write) -> Result<()> {
    let roster = roster(&args.common)?;
    let source = ingest_scan(&args.scan, &tools(&args.common)?, args.dpi)?;
    let opts = SplitOptions {
        roi: match &args.roi {
            Some(r) => parse_roi(r)?,
            None => RegionOfInterest::default(),
        },
        skew_budget_deg: args.skew_budget,
        scan: ScanOptions {
            params: params(&args.barcode)?,
            ..ScanOptions::default()
        },
        ..SplitOptions::default()
    };
    let total = source.pages.len();
    let mut err = std::io::stderr();
    let result = split_batch_with_progress(&source.pages, &roster, &opts, &args.common.out, |i, reason| {
        if let Some(r) = reason {
            let _ = writeln!(err, "page {i}: quarantined ({}: {})", r.kind, r.detail);
        }
        if (i + 1) % 50 == 0 || i + 1 == total {
            let _ = writeln!(err, "{}/{total} pages processed", i + 1);
        }
    })?;
    writeln!(
        out,
        "{} pages: {} filed, {} quarantined, {} duplicates",
        result.input_pages,
        result.filed.len(),
        result.quarantined.len(),
        result.duplicate_extras()
    )?;
    Ok(())
}

pub fn merge(args: &MergeArgs, out: &mut dyn Write) -> Result<()> {
    let roster = match &args.common.config {
        Some(_) => Some(roster(&args.common)?),
        None => None,
    };
    let plan = MergePlan {
        mode: args.mode.into(),
        input: args.input.clone(),
        output: args.common.out.clone(),
    };
    let report = run_merge(&plan, roster.as_ref())?;
    for w in &report.warnings {
        match w {
            MergeWarning::EmptyStudentFolder { student_id } => {
                eprintln!("warning: student {student_id} has no filed pages")
            }
            MergeWarning::Gap {
                student_id,
                exercise_no,
                missing,
            } => {
                let scope = exercise_no.map(|e| format!(" exercise {e}")).unwrap_or_default();
                eprintln!("warning: student {student_id}{scope} is missing pages {missing:?}");
            }
        }
    }
    writeln!(out, "{} documents, {} pages", report.documents.len(), report.pages)?;
    Ok(())
}

fn csv_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .with_context(|| format!("reading {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")))
                .collect();
            found.sort();
            files.extend(found);
        } else if p.exists() {
            files.push(p.clone());
        } else {
            bail!("score file {} does not exist", p.display());
        }
    }
    Ok(files)
}

pub fn scores(args: &ScoresArgs, out: &mut dyn Write) -> Result<()> {
    let roster = roster(&args.common)?;
    let scheme = GradeScheme::load(&args.scheme)?;
    let table = collect_scores(&csv_files(&args.scores)?, &roster, &scheme)?;
    let dist = emit_distribution(&table, &args.common.out)?;
    write!(out, "{}", dist.text_histogram())?;
    Ok(())
}
