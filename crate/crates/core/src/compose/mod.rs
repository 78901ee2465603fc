//! Roster loading, macro substitution and personalised batch generation.

mod batch;
mod roster;
mod template;
pub mod tools;

use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::codec::CodecError;
use crate::pdfout::PdfError;
use crate::raster::RasterError;

pub use self::batch::{
    generate_batch, render_exam_page, render_student_pages, student_payloads, GenerateMode,
    GenerateOptions, Manifest, ManifestStudent, PageSize,
};
pub use self::roster::{load_roster, parse_roster, Roster, RosterConfig, StudentRecord};
pub use self::template::{
    macros_in, parse_page_map, substitute_macros, ExamTemplate, TemplateLayout,
};
pub use self::tools::{ResolvedTool, ToolCommand, ToolConfig};

#[derive(Debug, Error)]
pub enum ComposeError {
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("roster line {line}: expected {expected} fields, found {found}")]
    FieldCountMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("roster line {line}: key {key:?} already used on line {first_line}")]
    DuplicateKey {
        key: String,
        first_line: usize,
        line: usize,
    },
    #[error("roster line {line}: invalid key {value:?}: {reason}")]
    InvalidKey {
        line: usize,
        value: String,
        reason: String,
    },
    #[error("unknown macro ##{name}##")]
    UnknownMacro { name: String },
    #[error("invalid template: {0}")]
    InvalidTemplate(String),
    #[error("tool {tool:?} not found{}", path.as_ref().map(|p| format!(" at {p:?}")).unwrap_or_default())]
    ToolNotFound { tool: String, path: Option<String> },
    #[error("tool {tool:?} failed (exit {status:?}): {stderr}")]
    ToolFailed {
        tool: String,
        status: Option<i32>,
        stderr: String,
    },
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Pdf(#[from] PdfError),
}

impl ComposeError {
    pub(crate) fn io(path: &Path, e: io::Error) -> ComposeError {
        ComposeError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }
}
