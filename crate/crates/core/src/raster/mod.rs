//! Pixels: page rasters, barcode rendering and barcode search on scans.

mod binarize;
mod page;
mod line;
mod locate;
mod render;

use thiserror::Error;

use crate::codec::CodecError;

pub use self::binarize::{binarize, median3, otsu_threshold, MIN_CONTRAST};
pub use self::page::{luma, PageImage, RegionOfInterest, DEFAULT_DPI};
pub use self::line::{bresenham_line, sample_scanline, Point};
pub use self::locate::{
    locate_and_decode, locate_and_decode_with, sweep_angles, DecodeReport, FailureReason,
    ScanOptions, Vote, VoteOutcome, MAX_SKEW_BUDGET_DEG,
};
pub use self::render::{draw_text, element_widths_px, render_barcode, QUIET_ZONE_MODULES};

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("invalid region of interest {0:?}")]
    InvalidRoi(RegionOfInterest),
    #[error("skew budget {0} outside [0, 10] degrees")]
    InvalidSkewBudget(f64),
    #[error("resolution {0} dpi too low for barcode rendering")]
    ResolutionTooLow(f64),
    #[error("point ({x}, {y}) outside the image")]
    OutOfBounds { x: i64, y: i64 },
    #[error("no ink found")]
    NoInk,
    #[error("barcode decode failed: {}", .0.failure_reason.as_ref().map_or("unknown", |r| r.dominant_tag()))]
    DecodeFailed(Box<DecodeReport>),
    #[error("image decode error: {0}")]
    Decode(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

impl RasterError {
    pub fn tag(&self) -> &'static str {
        match self {
            RasterError::InvalidImage(_) => "InvalidImage",
            RasterError::InvalidRoi(_) => "InvalidRoi",
            RasterError::InvalidSkewBudget(_) => "InvalidSkewBudget",
            RasterError::ResolutionTooLow(_) => "ResolutionTooLow",
            RasterError::OutOfBounds { .. } => "OutOfBounds",
            RasterError::NoInk => "NoInk",
            RasterError::DecodeFailed(_) => "DecodeFailed",
            RasterError::Decode(_) => "Decode",
            RasterError::Io(_) => "Io",
            RasterError::Codec(e) => e.tag(),
        }
    }
}
