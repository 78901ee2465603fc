//! Reference implementations and fixtures shared by the integration tests.
//! Each oracle is written from the format or algorithm definition, not from
//! the library code.
#![allow(dead_code)]

use std::collections::HashMap;

use examflow_core::codec::{Kind, Run};
use examflow_core::compose::{Roster, RosterConfig};

/// Code 39 reference table: wide (`w`) and narrow (`n`) flags for the nine
/// elements bar, space, bar, ... of each character.
pub const CODE39_REFERENCE: [(char, &str); 44] = [
    ('0', "nnnwwnwnn"), ('1', "wnnwnnnnw"), ('2', "nnwwnnnnw"), ('3', "wnwwnnnnn"),
    ('4', "nnnwwnnnw"), ('5', "wnnwwnnnn"), ('6', "nnwwwnnnn"), ('7', "nnnwnnwnw"),
    ('8', "wnnwnnwnn"), ('9', "nnwwnnwnn"), ('A', "wnnnnwnnw"), ('B', "nnwnnwnnw"),
    ('C', "wnwnnwnnn"), ('D', "nnnnwwnnw"), ('E', "wnnnwwnnn"), ('F', "nnwnwwnnn"),
    ('G', "nnnnnwwnw"), ('H', "wnnnnwwnn"), ('I', "nnwnnwwnn"), ('J', "nnnnwwwnn"),
    ('K', "wnnnnnnww"), ('L', "nnwnnnnww"), ('M', "wnwnnnnwn"), ('N', "nnnnwnnww"),
    ('O', "wnnnwnnwn"), ('P', "nnwnwnnwn"), ('Q', "nnnnnnwww"), ('R', "wnnnnnwwn"),
    ('S', "nnwnnnwwn"), ('T', "nnnnwnwwn"), ('U', "wwnnnnnnw"), ('V', "nwwnnnnnw"),
    ('W', "wwwnnnnnn"), ('X', "nwnnwnnnw"), ('Y', "wwnnwnnnn"), ('Z', "nwwnwnnnn"),
    ('-', "nwnnnnwnw"), ('.', "wwnnnnwnn"), (' ', "nwwnnnwnn"), ('$', "nwnwnwnnn"),
    ('/', "nwnwnnnwn"), ('+', "nwnnnwnwn"), ('%', "nnnwnwnwn"), ('*', "nwnnwnwnn"),
];

/// Decodes clean forward runs by direct table lookup: every width above the
/// midpoint of the extremes is wide.
pub fn reference_decode(runs: &[Run]) -> Option<String> {
    if runs.len() < 19 || (runs.len() + 1) % 10 != 0 {
        return None;
    }
    let lo = runs.iter().map(|r| r.width).fold(f64::INFINITY, f64::min);
    let hi = runs.iter().map(|r| r.width).fold(0.0, f64::max);
    let cut = (lo + hi) / 2.0;
    let table: HashMap<String, char> = CODE39_REFERENCE.iter().map(|&(c, p)| (p.to_string(), c)).collect();
    let mut chars = Vec::new();
    for (g, group) in runs.chunks(10).enumerate() {
        let flags: String = group[..9].iter().map(|r| if r.width > cut { 'w' } else { 'n' }).collect();
        for (i, r) in group[..9].iter().enumerate() {
            let expect = if i % 2 == 0 { Kind::Bar } else { Kind::Space };
            if r.kind != expect {
                return None;
            }
        }
        if group.len() == 10 && (group[9].kind != Kind::Space || group[9].width > cut) {
            return None;
        }
        let c = *table.get(&flags)?;
        let last = g == runs.len() / 10;
        if (g == 0 || last) != (c == '*') {
            return None;
        }
        chars.push(c);
    }
    Some(chars[1..chars.len() - 1].iter().collect())
}

/// Rasterizes a segment by rounding the exact minor coordinate at each
/// major step, halves rounding up.
pub fn reference_line(p0: (i64, i64), p1: (i64, i64)) -> Vec<(i64, i64)> {
    let (dx, dy) = (p1.0 - p0.0, p1.1 - p0.1);
    let n = dx.abs().max(dy.abs());
    if n == 0 {
        return vec![p0];
    }
    (0..=n)
        .map(|i| {
            let t = |d: i64| (i * d) as f64 / n as f64;
            let round = |v: f64| (v + 0.5).floor() as i64;
            if dx.abs() >= dy.abs() {
                (p0.0 + i * dx.signum(), round(p0.1 as f64 + t(dy)))
            } else {
                (round(p0.0 as f64 + t(dx)), p0.1 + i * dy.signum())
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PdfSummary {
    pub objects: usize,
    pub pages: usize,
    pub outline_entries: usize,
}

fn find(hay: &[u8], needle: &[u8], from: usize) -> Option<usize> {
    hay.get(from..)?.windows(needle.len()).position(|w| w == needle).map(|p| p + from)
}

fn rfind(hay: &[u8], needle: &[u8]) -> Option<usize> {
    hay.windows(needle.len()).rposition(|w| w == needle)
}

/// Dictionary text of object `n`, up to its stream or end marker.
fn object_head(bytes: &[u8], offsets: &HashMap<usize, usize>, n: usize) -> Result<String, String> {
    let at = *offsets.get(&n).ok_or(format!("object {n} not in xref"))?;
    let end_obj = find(bytes, b"endobj", at).ok_or(format!("object {n} has no endobj"))?;
    let end = find(bytes, b"stream", at).filter(|&s| s < end_obj).unwrap_or(end_obj);
    Ok(String::from_utf8_lossy(&bytes[at..end]).into_owned())
}

fn reference_after(text: &str, key: &str) -> Option<usize> {
    let rest = &text[text.find(key)? + key.len()..];
    rest.split_whitespace().next()?.parse().ok()
}

fn int_after(text: &str, key: &str) -> Option<usize> {
    reference_after(text, key)
}

/// Structural check of a classic-xref PDF: header, startxref, every xref
/// offset landing on its `n g obj` header, trailer size, page tree count
/// agreeing with the number of page objects, outline count.
pub fn validate_pdf(bytes: &[u8]) -> Result<PdfSummary, String> {
    if !bytes.starts_with(b"%PDF-1.") {
        return Err("bad header".into());
    }
    let tail_at = rfind(bytes, b"startxref").ok_or("no startxref")?;
    let tail = String::from_utf8_lossy(&bytes[tail_at..]);
    let mut lines = tail.lines();
    lines.next();
    let xref_at: usize = lines.next().and_then(|l| l.trim().parse().ok()).ok_or("bad startxref")?;
    if lines.next().map(str::trim) != Some("%%EOF") {
        return Err("missing %%EOF".into());
    }
    if !bytes[xref_at..].starts_with(b"xref") {
        return Err(format!("startxref {xref_at} does not point at xref"));
    }
    let trailer_at = find(bytes, b"trailer", xref_at).ok_or("no trailer")?;
    let table = String::from_utf8_lossy(&bytes[xref_at + 4..trailer_at]).into_owned();
    let mut rows = table.lines().filter(|l| !l.trim().is_empty());
    let mut offsets = HashMap::new();
    let mut size = 0;
    while let Some(head) = rows.next() {
        let mut parts = head.split_whitespace();
        let first: usize = parts.next().and_then(|s| s.parse().ok()).ok_or("bad subsection")?;
        let count: usize = parts.next().and_then(|s| s.parse().ok()).ok_or("bad subsection")?;
        for k in 0..count {
            let row = rows.next().ok_or("short xref")?;
            if row.len() < 18 {
                return Err(format!("xref row {row:?} too short"));
            }
            let f: Vec<&str> = row.split_whitespace().collect();
            if f.len() != 3 {
                return Err(format!("bad xref row {row:?}"));
            }
            if f[2] == "n" {
                let off: usize = f[0].parse().map_err(|_| "bad offset")?;
                let gen: usize = f[1].parse().map_err(|_| "bad generation")?;
                let obj = first + k;
                let expect = format!("{obj} {gen} obj");
                if !bytes.get(off..).is_some_and(|b| b.starts_with(expect.as_bytes())) {
                    return Err(format!("xref offset {off} for object {obj} does not start {expect:?}"));
                }
                offsets.insert(obj, off);
            }
            size = size.max(first + k + 1);
        }
    }
    let trailer = String::from_utf8_lossy(&bytes[trailer_at..tail_at]).into_owned();
    let declared = int_after(&trailer, "/Size").ok_or("trailer has no /Size")?;
    if declared != size {
        return Err(format!("trailer /Size {declared} but xref covers {size}"));
    }
    let root = reference_after(&trailer, "/Root").ok_or("trailer has no /Root")?;
    let catalog = object_head(bytes, &offsets, root)?;
    if !catalog.contains("/Type /Catalog") {
        return Err("root is not a catalog".into());
    }
    let pages_obj = reference_after(&catalog, "/Pages").ok_or("catalog has no /Pages")?;
    let pages = object_head(bytes, &offsets, pages_obj)?;
    let count = int_after(&pages, "/Count").ok_or("page tree has no /Count")?;
    let mut page_objects = 0;
    for &n in offsets.keys() {
        let head = object_head(bytes, &offsets, n)?;
        let is_page = head.match_indices("/Type /Page").any(|(i, _)| {
            !head[i + "/Type /Page".len()..].starts_with('s')
        });
        if is_page {
            page_objects += 1;
        }
    }
    if page_objects != count {
        return Err(format!("page tree /Count {count} but {page_objects} page objects"));
    }
    let outline_entries = match reference_after(&catalog, "/Outlines") {
        Some(o) => int_after(&object_head(bytes, &offsets, o)?, "/Count").unwrap_or(0),
        None => 0,
    };
    Ok(PdfSummary {
        objects: offsets.len(),
        pages: count,
        outline_entries,
    })
}

/// Roster with `n` students, keys `S0001`, `S0002`, ...
pub fn roster(n: usize) -> Roster {
    let cfg = RosterConfig {
        file_path: "participants.csv".into(),
        fieldnames: vec!["LastName".into(), "FirstName".into(), "StudentID".into()],
        key: "StudentID".into(),
    };
    let rows = (1..=n)
        .map(|i| vec![format!("Last{i}"), format!("First{i}"), format!("S{i:04}")])
        .collect();
    Roster::from_rows(cfg, rows).expect("valid roster")
}

/// Page map with `pages` pages spread as evenly as possible over
/// `exercises` exercises, ascending.
pub fn page_map(pages: u32, exercises: u32) -> Vec<u32> {
    (0..pages).map(|p| p * exercises / pages + 1).collect()
}
