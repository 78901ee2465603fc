use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use examflow_core::merge::MergeMode;

#[derive(Debug, Parser)]
#[command(
    name = "examflow",
    version,
    about = "Barcode-stamped exam generation, scan splitting, regrouping and grading",
    long_about = "Without a subcommand an interactive menu is shown; it runs the same \
                  techniques as the subcommands, writing into <out>/generated, <out>/split, \
                  <out>/merged and <out>/scores."
)]
pub struct Cli {
    /// Worker threads (default: logical CPUs).
    #[arg(long, global = true, env = "EXAMFLOW_JOBS")]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Option<Command>,

    #[command(flatten)]
    pub menu: MenuArgs,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the personalised exam batch (technique 1).
    Generate(GenerateArgs),
    /// Decode a scanned batch and file pages per student (technique 2).
    Split(SplitArgs),
    /// Regroup filed pages into PDF documents (technique 3).
    Merge(MergeArgs),
    /// Collect corrector scores and grade them (technique 4).
    Scores(ScoresArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Roster description (student_data.json).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// External command definitions (toolconfig.json).
    #[arg(long)]
    pub tools: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Native,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PageSizeArg {
    A4,
    A5,
}

#[derive(Debug, Clone, Args)]
pub struct BarcodeArgs {
    /// Narrow element width in mm.
    #[arg(long, default_value_t = 0.5)]
    pub module_width: f64,
    /// Wide to narrow element ratio, 2.0 to 3.0.
    #[arg(long, default_value_t = 2.25)]
    pub ratio: f64,
    /// Bar height in mm.
    #[arg(long, default_value_t = 5.0)]
    pub bar_height: f64,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Template text with ##FIELD## macros.
    #[arg(long)]
    pub template: PathBuf,
    /// JSON layout with exercise_page_map and optional barcode_roi.
    #[arg(long, conflicts_with = "exercise_pages")]
    pub layout: Option<PathBuf>,
    /// Exercise number of each page, comma separated (default: one page).
    #[arg(long)]
    pub exercise_pages: Option<String>,
    #[arg(long, value_enum, default_value_t = ModeArg::Native)]
    pub mode: ModeArg,
    /// Page raster resolution.
    #[arg(long, default_value_t = 300.0)]
    pub dpi: f64,
    #[arg(long, value_enum, default_value_t = PageSizeArg::A4)]
    pub page_size: PageSizeArg,
    /// Skip writing pages/NNNNN.png next to the batch document.
    #[arg(long)]
    pub no_page_images: bool,
    #[command(flatten)]
    pub barcode: BarcodeArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SplitArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Scanned batch: image directory, single image or PDF.
    #[arg(long)]
    pub scan: PathBuf,
    /// Rasterization resolution for PDF scans.
    #[arg(long, default_value_t = 300.0)]
    pub dpi: f64,
    /// Largest skew searched, in degrees.
    #[arg(long, default_value_t = 3.0)]
    pub skew_budget: f64,
    /// Barcode region as fractions x,y,w,h (default: bottom 15 %).
    #[arg(long)]
    pub roi: Option<String>,
    #[command(flatten)]
    pub barcode: BarcodeArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MergeModeArg {
    Student,
    Exercise,
    Aggregate,
}

impl From<MergeModeArg> for MergeMode {
    fn from(m: MergeModeArg) -> Self {
        match m {
            MergeModeArg::Student => MergeMode::Student,
            MergeModeArg::Exercise => MergeMode::Exercise,
            MergeModeArg::Aggregate => MergeMode::Aggregate,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct MergeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Split output tree.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = MergeModeArg::Exercise)]
    pub mode: MergeModeArg,
}

#[derive(Debug, Clone, Args)]
pub struct ScoresArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Grade scheme JSON with maxima and grade bands.
    #[arg(long)]
    pub scheme: PathBuf,
    /// Corrector CSV files or directories of them.
    #[arg(long, num_args = 0..)]
    pub scores: Vec<PathBuf>,
}

/// Settings used by the menu; each technique reads what it needs.
#[derive(Debug, Clone, Args)]
pub struct MenuArgs {
    /// Roster description used by every technique.
    #[arg(long, default_value = "student_data.json")]
    pub config: PathBuf,
    /// External command definitions.
    #[arg(long)]
    pub tools: Option<PathBuf>,
    /// Root of the menu's output directories.
    #[arg(long, default_value = "build")]
    pub out: PathBuf,
    /// Template for technique 1.
    #[arg(long)]
    pub template: Option<PathBuf>,
    #[arg(long, conflicts_with = "exercise_pages")]
    pub layout: Option<PathBuf>,
    #[arg(long)]
    pub exercise_pages: Option<String>,
    /// Page raster resolution for generation and PDF scans.
    #[arg(long, default_value_t = 300.0)]
    pub dpi: f64,
    #[arg(long, value_enum, default_value_t = PageSizeArg::A4)]
    pub page_size: PageSizeArg,
    /// Scan to split (default: <out>/generated/pages).
    #[arg(long)]
    pub scan: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = MergeModeArg::Exercise)]
    pub merge_mode: MergeModeArg,
    #[arg(long, default_value = "grading.json")]
    pub scheme: PathBuf,
    /// Corrector CSV files or directories (default: <out>/corrections).
    #[arg(long, num_args = 0..)]
    pub scores: Vec<PathBuf>,
}

fn barcode_defaults() -> BarcodeArgs {
    BarcodeArgs {
        module_width: 0.5,
        ratio: 2.25,
        bar_height: 5.0,
    }
}

impl MenuArgs {
    fn common(&self, sub: &str) -> CommonArgs {
        CommonArgs {
            config: Some(self.config.clone()),
            tools: self.tools.clone(),
            out: self.out.join(sub),
        }
    }

    pub fn generate(&self) -> Option<GenerateArgs> {
        Some(GenerateArgs {
            common: self.common("generated"),
            template: self.template.clone()?,
            layout: self.layout.clone(),
            exercise_pages: self.exercise_pages.clone(),
            mode: ModeArg::Native,
            dpi: self.dpi,
            page_size: self.page_size,
            no_page_images: false,
            barcode: barcode_defaults(),
        })
    }

    pub fn split(&self) -> SplitArgs {
        SplitArgs {
            common: self.common("split"),
            scan: self
                .scan
                .clone()
                .unwrap_or_else(|| self.out.join("generated").join("pages")),
            dpi: self.dpi,
            skew_budget: 3.0,
            roi: None,
            barcode: barcode_defaults(),
        }
    }

    pub fn merge(&self) -> MergeArgs {
        MergeArgs {
            common: self.common("merged"),
            input: self.out.join("split"),
            mode: self.merge_mode,
        }
    }

    pub fn scores(&self) -> ScoresArgs {
        let default = self.out.join("corrections");
        let scores = if !self.scores.is_empty() {
            self.scores.clone()
        } else if default.is_dir() {
            vec![default]
        } else {
            Vec::new()
        };
        ScoresArgs {
            common: self.common("scores"),
            scheme: self.scheme.clone(),
            scores,
        }
    }
}
