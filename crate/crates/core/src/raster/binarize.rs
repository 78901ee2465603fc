use crate::codec::{Kind, Run};

use super::RasterError;

/// Class means closer than this are treated as a single, inkless mode.
pub const MIN_CONTRAST: f64 = 48.0;

/// Otsu threshold over a luminance sequence: pixels `<= t` are ink.
///
/// Returns `None` when the histogram has a single value or the two classes
/// are closer than [`MIN_CONTRAST`].
pub fn otsu_threshold(seq: &[u8]) -> Option<u8> {
    let mut hist = [0u64; 256];
    for &v in seq {
        hist[v as usize] += 1;
    }
    let total = seq.len() as f64;
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &h)| i as f64 * h as f64).sum();

    let mut best: Option<(f64, u8, f64)> = None;
    let mut w0 = 0.0;
    let mut sum0 = 0.0;
    for t in 0..255usize {
        w0 += hist[t] as f64;
        sum0 += t as f64 * hist[t] as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let m0 = sum0 / w0;
        let m1 = (sum_all - sum0) / w1;
        let between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if best.map_or(true, |(b, _, _)| between > b) {
            best = Some((between, t as u8, m1 - m0));
        }
    }
    match best {
        Some((_, t, contrast)) if contrast >= MIN_CONTRAST => Some(t),
        _ => None,
    }
}

/// Converts a luminance sequence into alternating bar/space runs, trimming
/// the white margins so the result starts and ends with a bar.
pub fn binarize(seq: &[u8]) -> Result<Vec<Run>, RasterError> {
    if seq.is_empty() {
        return Err(RasterError::NoInk);
    }
    let t = otsu_threshold(seq).ok_or(RasterError::NoInk)?;
    let ink = |v: u8| v <= t;
    let first = seq.iter().position(|&v| ink(v)).ok_or(RasterError::NoInk)?;
    let last = seq.iter().rposition(|&v| ink(v)).unwrap();

    let mut runs = Vec::new();
    let mut current = true;
    let mut len = 0usize;
    for &v in &seq[first..=last] {
        if ink(v) == current {
            len += 1;
        } else {
            runs.push(run(current, len));
            current = !current;
            len = 1;
        }
    }
    runs.push(run(current, len));
    Ok(runs)
}

fn run(ink: bool, len: usize) -> Run {
    Run {
        kind: if ink { Kind::Bar } else { Kind::Space },
        width: len as f64,
    }
}

/// 3-tap median; removes isolated single-pixel specks.
pub fn median3(seq: &[u8]) -> Vec<u8> {
    if seq.len() < 3 {
        return seq.to_vec();
    }
    let mut out = Vec::with_capacity(seq.len());
    out.push(seq[0]);
    for w in seq.windows(3) {
        let (a, b, c) = (w[0], w[1], w[2]);
        out.push(a.max(b).min(a.min(b).max(c)));
    }
    out.push(seq[seq.len() - 1]);
    out
}
