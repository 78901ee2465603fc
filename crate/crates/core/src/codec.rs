//! Code 39 symbology and the page payload grammar.
//!
//! A payload identifies one exam page as `STUDENT-EXERCISE-PAGE`. The hyphen
//! is the field separator, so student ids may not contain one.
//!
//! Each Code 39 character is nine elements (five bars, four spaces), three
//! of them wide. Characters are separated by one narrow space and the whole
//! symbol is framed by `*`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Characters encodable in payload text. `*` is reserved for start/stop.
pub const CHARSET: &str = "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ-. $/+%";

const START_STOP: char = '*';

/// Narrow/wide pattern per character, bars and spaces interleaved,
/// `1` = narrow, `2` = wide.
const TABLE: [(char, &str); 44] = [
    ('0', "111221211"),
    ('1', "211211112"),
    ('2', "112211112"),
    ('3', "212211111"),
    ('4', "111221112"),
    ('5', "211221111"),
    ('6', "112221111"),
    ('7', "111211212"),
    ('8', "211211211"),
    ('9', "112211211"),
    ('A', "211112112"),
    ('B', "112112112"),
    ('C', "212112111"),
    ('D', "111122112"),
    ('E', "211122111"),
    ('F', "112122111"),
    ('G', "111112212"),
    ('H', "211112211"),
    ('I', "112112211"),
    ('J', "111122211"),
    ('K', "211111122"),
    ('L', "112111122"),
    ('M', "212111121"),
    ('N', "111121122"),
    ('O', "211121121"),
    ('P', "112121121"),
    ('Q', "111111222"),
    ('R', "211111221"),
    ('S', "112111221"),
    ('T', "111121221"),
    ('U', "221111112"),
    ('V', "122111112"),
    ('W', "222111111"),
    ('X', "121121112"),
    ('Y', "221121111"),
    ('Z', "122121111"),
    ('-', "121111212"),
    ('.', "221111211"),
    (' ', "122111211"),
    ('$', "121212111"),
    ('/', "121211121"),
    ('+', "121112121"),
    ('%', "111212121"),
    ('*', "121121211"),
];

/// Minimum ratio between the wide and narrow cluster means.
pub const MIN_CLUSTER_RATIO: f64 = 1.4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodecError {
    #[error("invalid payload: {0}")]
    InvalidPayload(String),
    #[error("malformed payload {text:?}: {reason}")]
    MalformedPayload { text: String, reason: String },
    #[error("character {0:?} cannot be encoded in Code 39")]
    UnencodableCharacter(char),
    #[error("invalid barcode parameters: {0}")]
    InvalidParams(String),
    #[error("no start/stop character found")]
    NoStartStop,
    #[error("bad element count {0}")]
    BadElementCount(usize),
    #[error("element group {0} matches no character")]
    UnknownCharacter(usize),
    #[error("wide/narrow widths not separable (ratio {0:.2})")]
    AmbiguousWidths(f64),
}

impl CodecError {
    /// Short stable tag used in vote tallies and reports.
    pub fn tag(&self) -> &'static str {
        match self {
            CodecError::InvalidPayload(_) => "InvalidPayload",
            CodecError::MalformedPayload { .. } => "MalformedPayload",
            CodecError::UnencodableCharacter(_) => "UnencodableCharacter",
            CodecError::InvalidParams(_) => "InvalidParams",
            CodecError::NoStartStop => "NoStartStop",
            CodecError::BadElementCount(_) => "BadElementCount",
            CodecError::UnknownCharacter(_) => "UnknownCharacter",
            CodecError::AmbiguousWidths(_) => "AmbiguousWidths",
        }
    }
}

pub fn is_encodable(c: char) -> bool {
    CHARSET.contains(c)
}

/// Identity of a single exam page.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PagePayload {
    pub student_id: String,
    pub exercise_no: u32,
    pub page_no: u32,
}

impl PagePayload {
    pub fn new(
        student_id: impl Into<String>,
        exercise_no: u32,
        page_no: u32,
    ) -> Result<Self, CodecError> {
        let p = PagePayload {
            student_id: student_id.into(),
            exercise_no,
            page_no,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), CodecError> {
        validate_student_id(&self.student_id)?;
        if self.exercise_no == 0 {
            return Err(CodecError::InvalidPayload("exercise number must be >= 1".into()));
        }
        if self.page_no == 0 {
            return Err(CodecError::InvalidPayload("page number must be >= 1".into()));
        }
        Ok(())
    }
}

impl fmt::Display for PagePayload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}-{}", self.student_id, self.exercise_no, self.page_no)
    }
}

impl FromStr for PagePayload {
    type Err = CodecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_payload(s)
    }
}

/// Checks that `id` can serve as the student field of a payload.
pub fn validate_student_id(id: &str) -> Result<(), CodecError> {
    if id.is_empty() {
        return Err(CodecError::InvalidPayload("student id is empty".into()));
    }
    if id.contains('-') {
        return Err(CodecError::InvalidPayload(format!(
            "student id {id:?} contains the field separator '-'"
        )));
    }
    if let Some(c) = id.chars().find(|&c| !is_encodable(c)) {
        return Err(CodecError::InvalidPayload(format!(
            "student id {id:?} contains {c:?}, which Code 39 cannot encode"
        )));
    }
    Ok(())
}

pub fn serialize_payload(p: &PagePayload) -> Result<String, CodecError> {
    p.validate()?;
    Ok(p.to_string())
}

pub fn parse_payload(s: &str) -> Result<PagePayload, CodecError> {
    let malformed = |reason: &str| CodecError::MalformedPayload {
        text: s.to_string(),
        reason: reason.to_string(),
    };
    let fields: Vec<&str> = s.split('-').collect();
    if fields.len() != 3 {
        return Err(malformed("expected three hyphen-separated fields"));
    }
    if fields.iter().any(|f| f.is_empty()) {
        return Err(malformed("empty field"));
    }
    validate_student_id(fields[0]).map_err(|e| malformed(&e.to_string()))?;
    let number = |f: &str, what: &str| -> Result<u32, CodecError> {
        // Canonical decimal only: no sign, no leading zeros.
        if !f.bytes().all(|b| b.is_ascii_digit()) || f.starts_with('0') {
            return Err(malformed(&format!("{what} is not a positive integer")));
        }
        f.parse::<u32>()
            .map_err(|_| malformed(&format!("{what} out of range")))
    };
    Ok(PagePayload {
        student_id: fields[0].to_string(),
        exercise_no: number(fields[1], "exercise number")?,
        page_no: number(fields[2], "page number")?,
    })
}

/// Physical barcode dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Code39Params {
    /// Narrow element width (X) in millimetres.
    pub module_width_mm: f64,
    pub wide_narrow_ratio: f64,
    pub bar_height_mm: f64,
}

impl Default for Code39Params {
    fn default() -> Self {
        Code39Params {
            module_width_mm: 0.5,
            wide_narrow_ratio: 2.25,
            bar_height_mm: 5.0,
        }
    }
}

impl Code39Params {
    pub fn validate(&self) -> Result<(), CodecError> {
        if !(self.module_width_mm > 0.0) {
            return Err(CodecError::InvalidParams("module width must be > 0".into()));
        }
        if !(self.bar_height_mm > 0.0) {
            return Err(CodecError::InvalidParams("bar height must be > 0".into()));
        }
        if !(2.0..=3.0).contains(&self.wide_narrow_ratio) {
            return Err(CodecError::InvalidParams(format!(
                "wide/narrow ratio {} outside [2.0, 3.0]",
                self.wide_narrow_ratio
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Kind {
    Bar,
    Space,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WidthClass {
    Narrow,
    Wide,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Element {
    pub kind: Kind,
    pub width: WidthClass,
}

/// A measured run of ink or paper along a scanline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Run {
    pub kind: Kind,
    pub width: f64,
}

impl Run {
    pub fn bar(width: f64) -> Self {
        Run { kind: Kind::Bar, width }
    }

    pub fn space(width: f64) -> Self {
        Run { kind: Kind::Space, width }
    }
}

/// An encoded symbol: elements including start/stop and inter-character gaps.
#[derive(Debug, Clone, PartialEq)]
pub struct BarPattern {
    pub elements: Vec<Element>,
    /// One entry per 9-element group, `*` included.
    pub symbols: Vec<char>,
}

impl BarPattern {
    /// Element widths in arbitrary units: narrow = `narrow`, wide = `wide`.
    pub fn runs(&self, narrow: f64, wide: f64) -> Vec<Run> {
        self.elements
            .iter()
            .map(|e| Run {
                kind: e.kind,
                width: match e.width {
                    WidthClass::Narrow => narrow,
                    WidthClass::Wide => wide,
                },
            })
            .collect()
    }

    /// Total width in narrow-module units for a given ratio.
    pub fn total_units(&self, ratio: f64) -> f64 {
        self.elements
            .iter()
            .map(|e| match e.width {
                WidthClass::Narrow => 1.0,
                WidthClass::Wide => ratio,
            })
            .sum()
    }
}

fn pattern_of(c: char) -> Option<&'static str> {
    TABLE.iter().find(|(ch, _)| *ch == c).map(|(_, p)| *p)
}

fn char_of(wide: &[bool]) -> Option<char> {
    TABLE.iter().find_map(|(ch, p)| {
        let matches = p
            .bytes()
            .zip(wide)
            .all(|(b, &w)| (b == b'2') == w);
        matches.then_some(*ch)
    })
}

pub fn code39_encode(text: &str, params: &Code39Params) -> Result<BarPattern, CodecError> {
    params.validate()?;
    if let Some(c) = text.chars().find(|&c| !is_encodable(c)) {
        return Err(CodecError::UnencodableCharacter(c));
    }
    let symbols: Vec<char> = std::iter::once(START_STOP)
        .chain(text.chars())
        .chain(std::iter::once(START_STOP))
        .collect();
    let mut elements = Vec::with_capacity(symbols.len() * 10 - 1);
    for (i, &c) in symbols.iter().enumerate() {
        if i > 0 {
            elements.push(Element {
                kind: Kind::Space,
                width: WidthClass::Narrow,
            });
        }
        let pattern = pattern_of(c).expect("charset and table agree");
        for (j, b) in pattern.bytes().enumerate() {
            elements.push(Element {
                kind: if j % 2 == 0 { Kind::Bar } else { Kind::Space },
                width: if b == b'2' {
                    WidthClass::Wide
                } else {
                    WidthClass::Narrow
                },
            });
        }
    }
    Ok(BarPattern { elements, symbols })
}

/// Result of a successful decode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decoded {
    pub text: String,
    /// The runs were read right to left (symbol upside down).
    pub reversed: bool,
}

pub fn code39_decode(runs: &[Run]) -> Result<String, CodecError> {
    code39_decode_detailed(runs).map(|d| d.text)
}

pub fn code39_decode_detailed(runs: &[Run]) -> Result<Decoded, CodecError> {
    if runs.len() < 19 || runs.len() % 2 == 0 {
        return Err(CodecError::BadElementCount(runs.len()));
    }
    let wide = classify(runs)?;
    let star = pattern_of(START_STOP).unwrap();
    let is_star = |g: &[bool]| star.bytes().zip(g).all(|(b, &w)| (b == b'2') == w);

    let n = wide.len();
    let forward = is_star(&wide[..9]) && is_star(&wide[n - 9..]);
    let (seq, reversed) = if forward {
        (wide, false)
    } else {
        let rev: Vec<bool> = wide.into_iter().rev().collect();
        if is_star(&rev[..9]) && is_star(&rev[n - 9..]) {
            (rev, true)
        } else {
            return Err(CodecError::NoStartStop);
        }
    };
    if (n + 1) % 10 != 0 {
        return Err(CodecError::BadElementCount(n));
    }

    let groups = (n + 1) / 10;
    let mut text = String::with_capacity(groups - 2);
    for g in 1..groups - 1 {
        let group = &seq[g * 10..g * 10 + 9];
        if group.iter().filter(|&&w| w).count() != 3 {
            return Err(CodecError::UnknownCharacter(g));
        }
        match char_of(group) {
            Some(START_STOP) | None => return Err(CodecError::UnknownCharacter(g)),
            Some(c) => text.push(c),
        }
    }
    Ok(Decoded { text, reversed })
}

/// Narrow/wide classification, bars and spaces thresholded separately.
fn classify(runs: &[Run]) -> Result<Vec<bool>, CodecError> {
    let bars: Vec<f64> = runs.iter().step_by(2).map(|r| r.width).collect();
    let spaces: Vec<f64> = runs.iter().skip(1).step_by(2).map(|r| r.width).collect();
    let bar_t = threshold(&bars)?;
    let space_t = threshold(&spaces)?;
    Ok(runs
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let t = if i % 2 == 0 { bar_t } else { space_t };
            r.width > t
        })
        .collect())
}

/// Midpoint between the two cluster means of an optimal 1-D two-means split.
///
/// A set whose spread is below [`MIN_CLUSTER_RATIO`] is treated as all narrow.
fn threshold(widths: &[f64]) -> Result<f64, CodecError> {
    let mut sorted = widths.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let lo = sorted[0];
    let hi = sorted[sorted.len() - 1];
    if !(lo > 0.0) {
        return Err(CodecError::AmbiguousWidths(0.0));
    }
    if hi / lo < MIN_CLUSTER_RATIO {
        return Ok(f64::INFINITY);
    }

    let n = sorted.len();
    let total: f64 = sorted.iter().sum();
    let total_sq: f64 = sorted.iter().map(|w| w * w).sum();
    let mut best = (f64::INFINITY, 0.0, 0.0);
    let mut prefix = 0.0;
    let mut prefix_sq = 0.0;
    for k in 1..n {
        prefix += sorted[k - 1];
        prefix_sq += sorted[k - 1] * sorted[k - 1];
        let (n1, n2) = (k as f64, (n - k) as f64);
        let m1 = prefix / n1;
        let m2 = (total - prefix) / n2;
        let sse = (prefix_sq - n1 * m1 * m1) + ((total_sq - prefix_sq) - n2 * m2 * m2);
        if sse < best.0 - 1e-12 {
            best = (sse, m1, m2);
        }
    }
    let (_, narrow_mean, wide_mean) = best;
    let ratio = wide_mean / narrow_mean;
    if ratio < MIN_CLUSTER_RATIO {
        return Err(CodecError::AmbiguousWidths(ratio));
    }
    Ok((narrow_mean + wide_mean) / 2.0)
}
