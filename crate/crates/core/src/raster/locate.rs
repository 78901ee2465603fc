//! Barcode search on scanned pages.
//!
//! Parallel scanlines are cast across a region at a sweep of small angles.
//! Every scanline votes with its decode result; a payload is accepted once
//! enough scanlines agree on it. Upside-down pages are covered by also
//! searching the region's 180-degree image, where the codec reads the symbol
//! right to left.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::codec::{code39_decode_detailed, parse_payload, Code39Params, Kind, PagePayload, Run};

use super::binarize::{binarize, median3};
use super::render::{element_widths_px, QUIET_ZONE_MODULES};
use super::{sample_scanline, PageImage, RasterError, RegionOfInterest};

pub const MAX_SKEW_BUDGET_DEG: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    /// Expected symbol geometry; sets scanline pitch and gap splitting.
    pub params: Code39Params,
    pub min_scanlines: usize,
    pub quorum: usize,
    pub skew_step_deg: f64,
    /// Scanlines per bar height.
    pub lines_per_bar: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            params: Code39Params::default(),
            min_scanlines: 15,
            quorum: 3,
            skew_step_deg: 0.5,
            lines_per_bar: 6.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum VoteOutcome {
    Decoded { text: String, reversed: bool },
    Failed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vote {
    pub line: usize,
    #[serde(flatten)]
    pub outcome: VoteOutcome,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FailureReason {
    /// No orientation/angle reached quorum. `tags` counts per-scanline
    /// failure tags over every attempt.
    NoQuorum { tags: BTreeMap<String, usize> },
    /// Scanlines agreed on a text that is not a valid payload.
    MalformedPayload { text: String },
}

impl FailureReason {
    /// Most frequent scanline failure tag, for short diagnostics.
    pub fn dominant_tag(&self) -> &str {
        match self {
            FailureReason::NoQuorum { tags } => tags
                .iter()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
                .map(|(t, _)| t.as_str())
                .unwrap_or("NoScanlines"),
            FailureReason::MalformedPayload { .. } => "MalformedPayload",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeReport {
    pub payload: Option<PagePayload>,
    /// Raw agreed text, also kept when it fails payload parsing.
    pub text: Option<String>,
    pub orientation_deg: u16,
    pub skew_deg: f64,
    pub votes: Vec<Vote>,
    pub failure_reason: Option<FailureReason>,
}

impl DecodeReport {
    pub fn is_success(&self) -> bool {
        self.payload.is_some()
    }
}

/// [`locate_and_decode_with`] using default scan options.
pub fn locate_and_decode(
    img: &PageImage,
    roi: &RegionOfInterest,
    skew_budget_deg: f64,
) -> Result<DecodeReport, RasterError> {
    locate_and_decode_with(img, roi, skew_budget_deg, &ScanOptions::default())
}

pub fn locate_and_decode_with(
    img: &PageImage,
    roi: &RegionOfInterest,
    skew_budget_deg: f64,
    opts: &ScanOptions,
) -> Result<DecodeReport, RasterError> {
    roi.validate()?;
    if !(0.0..=MAX_SKEW_BUDGET_DEG).contains(&skew_budget_deg) {
        return Err(RasterError::InvalidSkewBudget(skew_budget_deg));
    }
    let narrow_px = element_widths_px(&opts.params, img.dpi()).map_or(1, |(n, _)| n) as f64;
    let bar_px = (opts.params.bar_height_mm * img.dpi() / 25.4).max(1.0);
    let pitch = (bar_px / opts.lines_per_bar).max(1.0);
    let gap_limit = narrow_px * QUIET_ZONE_MODULES as f64 / 2.0;

    let mut regions = vec![*roi];
    let flipped = roi.rotated_180();
    if flipped != *roi {
        regions.push(flipped);
    }

    let mut tags: BTreeMap<String, usize> = BTreeMap::new();
    let mut best: Option<(usize, Vec<Vote>, f64)> = None;
    for region in &regions {
        for angle in sweep_angles(skew_budget_deg, opts.skew_step_deg) {
            let votes: Vec<Vote> = scanlines(img, region, angle, pitch, opts.min_scanlines)
                .into_iter()
                .enumerate()
                .map(|(line, (p0, p1))| Vote {
                    line,
                    outcome: decode_line(img, p0, p1, gap_limit),
                })
                .collect();

            let mut counts: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
            for v in &votes {
                match &v.outcome {
                    VoteOutcome::Decoded { text, reversed } => {
                        let e = counts.entry(text.as_str()).or_default();
                        e.0 += 1;
                        e.1 += *reversed as usize;
                    }
                    VoteOutcome::Failed { reason } => *tags.entry(reason.clone()).or_default() += 1,
                }
            }
            if let Some((text, reversed_votes, count)) = majority(&counts, opts.quorum) {
                let orientation_deg = if 2 * reversed_votes > count { 180 } else { 0 };
                let text = text.to_string();
                let (payload, failure_reason) = match parse_payload(&text) {
                    Ok(p) => (Some(p), None),
                    Err(_) => (None, Some(FailureReason::MalformedPayload { text: text.clone() })),
                };
                let report = DecodeReport {
                    payload,
                    text: Some(text),
                    orientation_deg,
                    skew_deg: angle,
                    votes,
                    failure_reason,
                };
                return if report.is_success() {
                    Ok(report)
                } else {
                    Err(RasterError::DecodeFailed(Box::new(report)))
                };
            }
            let successes = counts.values().map(|c| c.0).sum::<usize>();
            if best.as_ref().map_or(true, |b| successes > b.0) {
                best = Some((successes, votes, angle));
            }
        }
    }

    let (_, votes, angle) = best.expect("at least one attempt");
    Err(RasterError::DecodeFailed(Box::new(DecodeReport {
        payload: None,
        text: None,
        orientation_deg: 0,
        skew_deg: angle,
        votes,
        failure_reason: Some(FailureReason::NoQuorum { tags }),
    })))
}

/// Plurality winner if it has at least `quorum` votes and no tie.
/// Returns `(text, reversed votes, votes)`.
fn majority<'a>(
    counts: &BTreeMap<&'a str, (usize, usize)>,
    quorum: usize,
) -> Option<(&'a str, usize, usize)> {
    let mut ranked: Vec<(&str, usize, usize)> =
        counts.iter().map(|(t, &(n, r))| (*t, r, n)).collect();
    ranked.sort_by(|a, b| b.2.cmp(&a.2).then(a.0.cmp(b.0)));
    let top = *ranked.first()?;
    let runner_up = ranked.get(1).map_or(0, |r| r.2);
    (top.2 >= quorum && top.2 > runner_up).then_some(top)
}

/// 0 first, then alternating +/- steps out to the budget.
pub fn sweep_angles(budget_deg: f64, step_deg: f64) -> Vec<f64> {
    let mut out = vec![0.0];
    if step_deg <= 0.0 {
        return out;
    }
    let steps = (budget_deg / step_deg + 1e-9).floor() as i64;
    for k in 1..=steps {
        let a = k as f64 * step_deg;
        out.push(a);
        out.push(-a);
    }
    out
}

type Segment = ((i64, i64), (i64, i64));

fn scanlines(
    img: &PageImage,
    roi: &RegionOfInterest,
    angle_deg: f64,
    pitch: f64,
    min_lines: usize,
) -> Vec<Segment> {
    let (x0, y0, x1, y1) = roi.pixel_bounds(img.width(), img.height());
    let span = (y1 - y0 + 1) as f64;
    let n = ((span / pitch).ceil() as usize).max(min_lines).max(1);
    let half_rise = angle_deg.to_radians().tan() * (x1 - x0) as f64 / 2.0;
    let max_y = img.height() as i64 - 1;
    (0..n)
        .map(|k| {
            let yc = y0 as f64 + (k as f64 + 0.5) * span / n as f64;
            let ya = ((yc - half_rise).round() as i64).clamp(0, max_y);
            let yb = ((yc + half_rise).round() as i64).clamp(0, max_y);
            ((x0, ya), (x1, yb))
        })
        .collect()
}

fn decode_line(img: &PageImage, p0: (i64, i64), p1: (i64, i64), gap_limit: f64) -> VoteOutcome {
    let failed = |reason: &str| VoteOutcome::Failed {
        reason: reason.to_string(),
    };
    let seq = match sample_scanline(img, p0, p1) {
        Ok(s) => median3(&s),
        Err(e) => return failed(e.tag()),
    };
    let runs = match binarize(&seq) {
        Ok(r) => r,
        Err(e) => return failed(e.tag()),
    };
    let mut longest_error: Option<(usize, &'static str)> = None;
    for segment in split_at_gaps(&runs, gap_limit) {
        if segment.len() < 19 {
            continue;
        }
        match code39_decode_detailed(segment) {
            Ok(d) => {
                return VoteOutcome::Decoded {
                    text: d.text,
                    reversed: d.reversed,
                }
            }
            Err(e) => {
                if longest_error.map_or(true, |(n, _)| segment.len() > n) {
                    longest_error = Some((segment.len(), e.tag()));
                }
            }
        }
    }
    failed(longest_error.map_or("BadElementCount", |(_, t)| t))
}

/// Splits runs at spaces wider than `limit` (quiet zones), keeping bar-to-bar
/// slices.
fn split_at_gaps(runs: &[Run], limit: f64) -> Vec<&[Run]> {
    let mut out = Vec::new();
    let mut start = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.kind == Kind::Space && r.width > limit {
            out.push(&runs[start..i]);
            start = i + 1;
        }
    }
    out.push(&runs[start..]);
    out
}
