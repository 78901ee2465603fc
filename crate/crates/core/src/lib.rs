//! Barcode-stamped exam pipeline.
//!
//! Personalised exam pages carry a Code 39 barcode encoding
//! `STUDENT-EXERCISE-PAGE`. After the exam the unsorted scan is decoded page
//! by page, filed per student, regrouped per exercise or per student into
//! PDF documents, and corrector scores are aggregated into grades.
//!
//! Modules follow the pipeline:
//!
//! - [`codec`]: payload grammar and Code 39 symbology
//! - [`raster`]: page images, barcode rendering and scanline decoding
//! - [`compose`]: roster loading, macro substitution, batch generation
//! - [`split`]: scan ingestion and filing by payload
//! - [`merge`]: student-wise and exercise-wise regrouping
//! - [`pdfout`]: image-only PDF writer
//! - [`scores`]: score collection, grading and distribution output
//! - [`synth`]: synthetic scan degradation used for testing

pub mod codec;
pub mod compose;
pub mod fsutil;
pub mod merge;
pub mod pdfout;
pub mod raster;
pub mod scores;
pub mod split;
pub mod synth;

pub use codec::{Code39Params, PagePayload};
pub use raster::{PageImage, RegionOfInterest};
