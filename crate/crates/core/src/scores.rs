//! Score collection from corrector CSV files, grading and distribution
//! output.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compose::Roster;
use crate::fsutil::write_atomic;

#[derive(Debug, Error, PartialEq)]
pub enum ScoreError {
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error("{source_name} line {line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },
    #[error("invalid grade scheme: {0}")]
    InvalidScheme(String),
    #[error("student {student_id} exercise {exercise_no}: {first_points} in {first_source} but {second_points} in {second_source}")]
    ConflictingEntry {
        student_id: String,
        exercise_no: u32,
        first_source: String,
        first_points: f64,
        second_source: String,
        second_points: f64,
    },
    #[error("{source_name} line {line}: {points} points outside [0, {max}] for exercise {exercise_no}")]
    PointsOutOfRange {
        source_name: String,
        line: usize,
        exercise_no: u32,
        points: f64,
        max: f64,
    },
    #[error("{source_name} line {line}: student {student_id} is not in the roster")]
    UnknownStudent {
        source_name: String,
        line: usize,
        student_id: String,
    },
    #[error("{source_name} line {line}: exercise {exercise_no} has no configured maximum")]
    UnknownExercise {
        source_name: String,
        line: usize,
        exercise_no: u32,
    },
    #[error("score table is empty")]
    EmptyTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradeBand {
    pub min_fraction: f64,
    pub label: String,
}

/// Exercise maxima plus grade bands ordered from best to worst.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradeScheme {
    pub maxima: BTreeMap<u32, f64>,
    pub grades: Vec<GradeBand>,
}

impl GradeScheme {
    pub fn from_json(text: &str) -> Result<GradeScheme, ScoreError> {
        let scheme: GradeScheme =
            serde_json::from_str(text).map_err(|e| ScoreError::InvalidScheme(e.to_string()))?;
        scheme.validate()?;
        Ok(scheme)
    }

    pub fn load(path: &Path) -> Result<GradeScheme, ScoreError> {
        let text = fs::read_to_string(path).map_err(|e| ScoreError::Io {
            path: path.into(),
            message: e.to_string(),
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), ScoreError> {
        let bad = |m: String| Err(ScoreError::InvalidScheme(m));
        if self.maxima.is_empty() {
            return bad("no exercise maxima".into());
        }
        if let Some((ex, max)) = self.maxima.iter().find(|(&e, &m)| e == 0 || !(m > 0.0) || !m.is_finite()) {
            return bad(format!("exercise {ex} has maximum {max}"));
        }
        if self.grades.is_empty() {
            return bad("no grades".into());
        }
        let mut labels = HashSet::new();
        for (i, g) in self.grades.iter().enumerate() {
            if !(0.0..=1.0).contains(&g.min_fraction) {
                return bad(format!("threshold {} of {:?} outside [0, 1]", g.min_fraction, g.label));
            }
            if i > 0 && g.min_fraction >= self.grades[i - 1].min_fraction {
                return bad("thresholds must be strictly decreasing".into());
            }
            if !labels.insert(&g.label) {
                return bad(format!("duplicate label {:?}", g.label));
            }
        }
        Ok(())
    }

    pub fn total_max(&self) -> f64 {
        self.maxima.values().sum()
    }

    /// First band whose threshold the fraction reaches; the last band
    /// catches everything below.
    pub fn grade_index(&self, fraction: f64) -> usize {
        self.grades
            .iter()
            .position(|g| fraction >= g.min_fraction)
            .unwrap_or(self.grades.len() - 1)
    }

    pub fn grade_for(&self, fraction: f64) -> &str {
        &self.grades[self.grade_index(fraction)].label
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub student_id: String,
    pub exercise_no: u32,
    pub points: f64,
}

/// Parses `student_id;exercise_no;points` lines. An optional header line
/// starting with `student_id` is skipped.
pub fn parse_score_csv(text: &str, source_name: &str) -> Result<Vec<(usize, ScoreEntry)>, ScoreError> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let row = raw.trim();
        if row.is_empty() || (line == 1 && row.to_ascii_lowercase().starts_with("student_id")) {
            continue;
        }
        let err = |message: String| ScoreError::Parse {
            source_name: source_name.to_string(),
            line,
            message,
        };
        let fields: Vec<&str> = row.split(';').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(err(format!("expected 3 fields, found {}", fields.len())));
        }
        let exercise_no = fields[1]
            .parse::<u32>()
            .ok()
            .filter(|&e| e >= 1)
            .ok_or_else(|| err(format!("bad exercise number {:?}", fields[1])))?;
        let points = fields[2]
            .parse::<f64>()
            .ok()
            .filter(|p| p.is_finite())
            .ok_or_else(|| err(format!("bad points {:?}", fields[2])))?;
        entries.push((
            line,
            ScoreEntry {
                student_id: fields[0].to_string(),
                exercise_no,
                points,
            },
        ));
    }
    Ok(entries)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreRow {
    pub student_id: String,
    /// Points per exercise; `None` when no corrector file scored it.
    pub points: BTreeMap<u32, Option<f64>>,
    pub total: f64,
    pub fraction: f64,
    pub grade: String,
}

impl ScoreRow {
    pub fn missing(&self) -> Vec<u32> {
        self.points.iter().filter(|(_, p)| p.is_none()).map(|(&e, _)| e).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreTable {
    pub scheme: GradeScheme,
    /// One row per roster student, in roster order.
    pub rows: Vec<ScoreRow>,
}

/// Collects entries from named sources. Order of sources does not matter
/// unless they conflict.
pub fn collect_entries(
    sources: &[(String, String)],
    roster: &Roster,
    scheme: &GradeScheme,
) -> Result<ScoreTable, ScoreError> {
    scheme.validate()?;
    let mut seen: BTreeMap<(String, u32), (String, f64)> = BTreeMap::new();
    for (name, text) in sources {
        for (line, e) in parse_score_csv(text, name)? {
            if !roster.contains(&e.student_id) {
                return Err(ScoreError::UnknownStudent {
                    source_name: name.clone(),
                    line,
                    student_id: e.student_id,
                });
            }
            let Some(&max) = scheme.maxima.get(&e.exercise_no) else {
                return Err(ScoreError::UnknownExercise {
                    source_name: name.clone(),
                    line,
                    exercise_no: e.exercise_no,
                });
            };
            if !(0.0..=max).contains(&e.points) {
                return Err(ScoreError::PointsOutOfRange {
                    source_name: name.clone(),
                    line,
                    exercise_no: e.exercise_no,
                    points: e.points,
                    max,
                });
            }
            let key = (e.student_id.clone(), e.exercise_no);
            match seen.get(&key) {
                Some((first, p)) if *p != e.points => {
                    // report the pair in a fixed order so the error does not
                    // depend on file order
                    let (a, b) = if (first.as_str(), *p) <= (name.as_str(), e.points) {
                        ((first.clone(), *p), (name.clone(), e.points))
                    } else {
                        ((name.clone(), e.points), (first.clone(), *p))
                    };
                    return Err(ScoreError::ConflictingEntry {
                        student_id: e.student_id,
                        exercise_no: e.exercise_no,
                        first_source: a.0,
                        first_points: a.1,
                        second_source: b.0,
                        second_points: b.1,
                    });
                }
                Some(_) => {}
                None => {
                    seen.insert(key, (name.clone(), e.points));
                }
            }
        }
    }
    let total_max = scheme.total_max();
    let rows = roster
        .keys()
        .map(|sid| {
            let points: BTreeMap<u32, Option<f64>> = scheme
                .maxima
                .keys()
                .map(|&ex| (ex, seen.get(&(sid.to_string(), ex)).map(|(_, p)| *p)))
                .collect();
            let total: f64 = points.values().map(|p| p.unwrap_or(0.0)).sum();
            let fraction = total / total_max;
            ScoreRow {
                student_id: sid.to_string(),
                grade: scheme.grade_for(fraction).to_string(),
                points,
                total,
                fraction,
            }
        })
        .collect();
    Ok(ScoreTable {
        scheme: scheme.clone(),
        rows,
    })
}

/// Reads corrector CSV files and builds the score table.
pub fn collect_scores(files: &[PathBuf], roster: &Roster, scheme: &GradeScheme) -> Result<ScoreTable, ScoreError> {
    let sources = files
        .iter()
        .map(|p| {
            fs::read_to_string(p)
                .map(|t| (p.display().to_string(), t))
                .map_err(|e| ScoreError::Io {
                    path: p.clone(),
                    message: e.to_string(),
                })
        })
        .collect::<Result<Vec<_>, _>>()?;
    collect_entries(&sources, roster, scheme)
}

/// Plain decimal without trailing zeros.
fn fmt_points(v: f64) -> String {
    let s = format!("{v:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// `student_id;total;grade;<exercise columns>;missing`, where `missing`
/// lists unscored exercises separated by commas.
pub fn scores_csv(table: &ScoreTable) -> String {
    let mut out = String::from("student_id;total;grade");
    for ex in table.scheme.maxima.keys() {
        let _ = write!(out, ";{ex}");
    }
    out.push_str(";missing\n");
    for row in &table.rows {
        let _ = write!(out, "{};{};{}", row.student_id, fmt_points(row.total), row.grade);
        for p in row.points.values() {
            let _ = write!(out, ";{}", fmt_points(p.unwrap_or(0.0)));
        }
        let missing: Vec<String> = row.missing().iter().map(u32::to_string).collect();
        let _ = writeln!(out, ";{}", missing.join(","));
    }
    out
}

/// Student count per grade label, in scheme order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Distribution {
    pub counts: Vec<(String, usize)>,
}

impl Distribution {
    pub fn total(&self) -> usize {
        self.counts.iter().map(|(_, n)| n).sum()
    }

    pub fn text_histogram(&self) -> String {
        let width = self.counts.iter().map(|(l, _)| l.chars().count()).max().unwrap_or(0);
        let max = self.counts.iter().map(|&(_, n)| n).max().unwrap_or(0).max(1);
        let mut out = String::new();
        for (label, n) in &self.counts {
            let bar = "#".repeat((n * 40).div_ceil(max));
            let _ = writeln!(out, "{label:<width$} | {n:>4} {bar}");
        }
        out
    }

    /// Bar chart; bar heights are proportional to counts.
    pub fn svg(&self) -> String {
        const BAR_W: usize = 50;
        const GAP: usize = 20;
        const PLOT_H: f64 = 200.0;
        const TOP: f64 = 30.0;
        let max = self.counts.iter().map(|&(_, n)| n).max().unwrap_or(0).max(1) as f64;
        let width = GAP + self.counts.len() * (BAR_W + GAP);
        let height = TOP + PLOT_H + 40.0;
        let base = TOP + PLOT_H;
        let mut out = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n"
        );
        let _ = writeln!(
            out,
            "  <line x1=\"{GAP}\" y1=\"{base}\" x2=\"{}\" y2=\"{base}\" stroke=\"black\"/>",
            width - GAP / 2
        );
        for (i, (label, n)) in self.counts.iter().enumerate() {
            let x = GAP + i * (BAR_W + GAP);
            let h = PLOT_H * *n as f64 / max;
            let label = xml_escape(label);
            let _ = writeln!(
                out,
                "  <rect class=\"bar\" data-label=\"{label}\" data-count=\"{n}\" x=\"{x}\" y=\"{:.3}\" width=\"{BAR_W}\" height=\"{h:.3}\" fill=\"steelblue\"/>",
                base - h
            );
            let cx = x + BAR_W / 2;
            let _ = writeln!(
                out,
                "  <text x=\"{cx}\" y=\"{:.3}\" text-anchor=\"middle\" font-size=\"12\">{n}</text>",
                base - h - 5.0
            );
            let _ = writeln!(
                out,
                "  <text x=\"{cx}\" y=\"{:.3}\" text-anchor=\"middle\" font-size=\"14\">{label}</text>",
                base + 20.0
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

pub fn distribution(table: &ScoreTable) -> Result<Distribution, ScoreError> {
    if table.rows.is_empty() {
        return Err(ScoreError::EmptyTable);
    }
    let mut counts: Vec<(String, usize)> = table.scheme.grades.iter().map(|g| (g.label.clone(), 0)).collect();
    for row in &table.rows {
        counts[table.scheme.grade_index(row.fraction)].1 += 1;
    }
    Ok(Distribution { counts })
}

/// Writes `scores.csv` and `distribution.svg` into `out_dir` and returns
/// the distribution, whose text histogram is meant for the terminal.
pub fn emit_distribution(table: &ScoreTable, out_dir: &Path) -> Result<Distribution, ScoreError> {
    let dist = distribution(table)?;
    let io = |p: &Path, e: std::io::Error| ScoreError::Io {
        path: p.into(),
        message: e.to_string(),
    };
    fs::create_dir_all(out_dir).map_err(|e| io(out_dir, e))?;
    for (name, body) in [("scores.csv", scores_csv(table)), ("distribution.svg", dist.svg())] {
        let path = out_dir.join(name);
        write_atomic(&path, |w| std::io::Write::write_all(w, body.as_bytes())).map_err(|e| io(&path, e))?;
    }
    Ok(dist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compose::RosterConfig;

    fn roster(ids: &[&str]) -> Roster {
        let cfg = RosterConfig {
            file_path: "p.csv".into(),
            fieldnames: vec!["ID".into()],
            key: "ID".into(),
        };
        Roster::from_rows(cfg, ids.iter().map(|i| vec![i.to_string()]).collect()).unwrap()
    }

    fn scheme() -> GradeScheme {
        GradeScheme::from_json(
            r#"{"maxima": {"1": 10, "2": 10},
                "grades": [{"min_fraction": 0.9, "label": "A"}, {"min_fraction": 0.7, "label": "B"},
                           {"min_fraction": 0.5, "label": "C"}, {"min_fraction": 0.0, "label": "F"}]}"#,
        )
        .unwrap()
    }

    fn src(name: &str, text: &str) -> (String, String) {
        (name.into(), text.into())
    }

    #[test]
    fn totals_and_fraction() {
        let t = collect_entries(&[src("a", "S;1;10\nS;2;5\n")], &roster(&["S"]), &scheme()).unwrap();
        assert_eq!(t.rows[0].total, 15.0);
        assert_eq!(t.rows[0].fraction, 0.75);
        assert_eq!(t.rows[0].grade, "B");
        assert!(t.rows[0].missing().is_empty());
    }

    #[test]
    fn no_files_all_missing() {
        let t = collect_entries(&[], &roster(&["A", "B"]), &scheme()).unwrap();
        assert!(t.rows.iter().all(|r| r.total == 0.0 && r.missing() == vec![1, 2]));
        assert!(scores_csv(&t).contains("A;0;F;0;0;1,2\n"));
    }

    #[test]
    fn conflict_reports_both_sources() {
        let err = collect_entries(&[src("x", "S;1;10"), src("y", "S;1;8")], &roster(&["S"]), &scheme()).unwrap_err();
        match err {
            ScoreError::ConflictingEntry { first_source, second_source, .. } => {
                assert_eq!((first_source.as_str(), second_source.as_str()), ("x", "y"))
            }
            other => panic!("{other:?}"),
        }
        // agreeing repeats are fine
        assert!(collect_entries(&[src("x", "S;1;8"), src("y", "S;1;8")], &roster(&["S"]), &scheme()).is_ok());
    }

    #[test]
    fn entry_errors() {
        let r = roster(&["S"]);
        assert!(matches!(
            collect_entries(&[src("x", "S;1;11")], &r, &scheme()),
            Err(ScoreError::PointsOutOfRange { .. })
        ));
        assert!(matches!(
            collect_entries(&[src("x", "T;1;1")], &r, &scheme()),
            Err(ScoreError::UnknownStudent { .. })
        ));
        assert!(matches!(
            collect_entries(&[src("x", "S;3;1")], &r, &scheme()),
            Err(ScoreError::UnknownExercise { .. })
        ));
        assert!(matches!(
            collect_entries(&[src("x", "student_id;exercise_no;points\nS;1")], &r, &scheme()),
            Err(ScoreError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn scheme_rules() {
        let mut s = scheme();
        s.grades[1].min_fraction = 0.95;
        assert!(s.validate().is_err());
        let mut s = scheme();
        s.grades[2].label = "A".into();
        assert!(s.validate().is_err());
        let mut s = scheme();
        s.grades.pop();
        // below every threshold falls into the last band
        assert_eq!(s.grade_for(0.1), "C");
    }

    #[test]
    fn histogram_counts() {
        let text = "A;1;10\nA;2;10\nB;1;10\nB;2;9\nC;1;8\nC;2;7\nD;1;5\nD;2;5\n";
        let t = collect_entries(&[src("x", text)], &roster(&["A", "B", "C", "D"]), &scheme()).unwrap();
        let d = distribution(&t).unwrap();
        assert_eq!(d.counts, vec![("A".into(), 2), ("B".into(), 1), ("C".into(), 1), ("F".into(), 0)]);
        assert_eq!(d.total(), 4);
        assert!(d.text_histogram().starts_with("A |    2 "));
    }

    #[test]
    fn empty_table() {
        let t = collect_entries(&[], &roster(&[]), &scheme()).unwrap();
        assert_eq!(distribution(&t), Err(ScoreError::EmptyTable));
    }
}
