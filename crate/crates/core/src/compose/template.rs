use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::raster::RegionOfInterest;

use super::roster::StudentRecord;
use super::ComposeError;

/// A macro occurrence `##NAME##` found in template text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct MacroSpan<'a> {
    start: usize,
    end: usize,
    name: &'a str,
}

fn is_ident_start(b: u8) -> bool {
    b.is_ascii_alphabetic() || b == b'_'
}

fn is_ident(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

/// Scans left to right; a `#` that does not open a macro is plain text.
fn macro_spans(text: &str) -> Vec<MacroSpan<'_>> {
    let bytes = text.as_bytes();
    let mut spans = Vec::new();
    let mut i = 0;
    while i + 1 < bytes.len() {
        if bytes[i] == b'#' && bytes[i + 1] == b'#' && i + 2 < bytes.len() && is_ident_start(bytes[i + 2]) {
            let mut j = i + 3;
            while j < bytes.len() && is_ident(bytes[j]) {
                j += 1;
            }
            if j + 1 < bytes.len() && bytes[j] == b'#' && bytes[j + 1] == b'#' {
                spans.push(MacroSpan {
                    start: i,
                    end: j + 2,
                    name: &text[i + 2..j],
                });
                i = j + 2;
                continue;
            }
        }
        i += 1;
    }
    spans
}

/// Distinct macro names in order of first appearance.
pub fn macros_in(text: &str) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    for span in macro_spans(text) {
        if !names.iter().any(|n| n == span.name) {
            names.push(span.name.to_string());
        }
    }
    names
}

/// Replaces every `##FIELD##` with the record's value. Substituted values are
/// not scanned again.
pub fn substitute_macros(text: &str, record: &StudentRecord) -> Result<String, ComposeError> {
    let mut out = String::with_capacity(text.len());
    let mut last = 0;
    for span in macro_spans(text) {
        let value = record.get(span.name).ok_or_else(|| ComposeError::UnknownMacro {
            name: span.name.to_string(),
        })?;
        out.push_str(&text[last..span.start]);
        out.push_str(value);
        last = span.end;
    }
    out.push_str(&text[last..]);
    Ok(out)
}

/// Page layout part of a template, usually read from a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateLayout {
    /// Exercise number for each page of the exam, in page order.
    pub exercise_page_map: Vec<u32>,
    #[serde(default)]
    pub barcode_roi: RegionOfInterest,
}

impl TemplateLayout {
    pub fn load(path: &Path) -> Result<TemplateLayout, ComposeError> {
        let text = fs::read_to_string(path).map_err(|e| ComposeError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| ComposeError::InvalidTemplate(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExamTemplate {
    pub source_text: String,
    pub exercise_page_map: Vec<u32>,
    pub barcode_roi: RegionOfInterest,
}

impl ExamTemplate {
    pub fn new(source_text: impl Into<String>, exercise_page_map: Vec<u32>) -> ExamTemplate {
        ExamTemplate {
            source_text: source_text.into(),
            exercise_page_map,
            barcode_roi: RegionOfInterest::default(),
        }
    }

    pub fn with_layout(source_text: impl Into<String>, layout: TemplateLayout) -> ExamTemplate {
        ExamTemplate {
            source_text: source_text.into(),
            exercise_page_map: layout.exercise_page_map,
            barcode_roi: layout.barcode_roi,
        }
    }

    pub fn page_count(&self) -> usize {
        self.exercise_page_map.len()
    }

    /// Highest exercise number in the page map.
    pub fn exercise_count(&self) -> u32 {
        self.exercise_page_map.iter().copied().max().unwrap_or(0)
    }

    pub fn validate(&self, fieldnames: &[String]) -> Result<(), ComposeError> {
        if self.exercise_page_map.is_empty() {
            return Err(ComposeError::InvalidTemplate("exercise page map is empty".into()));
        }
        if let Some(p) = self.exercise_page_map.iter().position(|&e| e == 0) {
            return Err(ComposeError::InvalidTemplate(format!(
                "page {} has exercise number 0",
                p + 1
            )));
        }
        self.barcode_roi
            .validate()
            .map_err(|e| ComposeError::InvalidTemplate(e.to_string()))?;
        for name in macros_in(&self.source_text) {
            if !fieldnames.contains(&name) {
                return Err(ComposeError::UnknownMacro { name });
            }
        }
        Ok(())
    }
}

/// Parses a comma-separated exercise page map such as `1,1,2,3`.
pub fn parse_page_map(s: &str) -> Result<Vec<u32>, ComposeError> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<u32>()
                .ok()
                .filter(|&n| n >= 1)
                .ok_or_else(|| ComposeError::InvalidTemplate(format!("bad exercise number {t:?}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compose::roster::{Roster, RosterConfig};

    fn vanaken() -> StudentRecord {
        let cfg = RosterConfig {
            file_path: "p.csv".into(),
            fieldnames: ["LastName", "FirstName", "StudentID", "Email"].map(String::from).to_vec(),
            key: "StudentID".into(),
        };
        let row = ["Vanaken", "Hans", "372048", "hans.vanaken@some-uni.eu"].map(String::from).to_vec();
        Roster::from_rows(cfg, vec![row]).unwrap().records()[0].clone()
    }

    #[test]
    fn substitutes_name() {
        let out = substitute_macros("Name: ##FirstName## ##LastName##", &vanaken()).unwrap();
        assert_eq!(out, "Name: Hans Vanaken");
    }

    #[test]
    fn plain_text_unchanged() {
        let text = "no macros # here ## either ##";
        assert_eq!(substitute_macros(text, &vanaken()).unwrap(), text);
    }

    #[test]
    fn unknown_macro() {
        assert!(matches!(
            substitute_macros("##Nickname##", &vanaken()),
            Err(ComposeError::UnknownMacro { name }) if name == "Nickname"
        ));
    }

    #[test]
    fn case_sensitive() {
        assert!(substitute_macros("##FIRSTNAME##", &vanaken()).is_err());
    }

    #[test]
    fn single_pass() {
        let cfg = RosterConfig {
            file_path: "p.csv".into(),
            fieldnames: vec!["A".into(), "B".into()],
            key: "B".into(),
        };
        let rec = Roster::from_rows(cfg, vec![vec!["##B##".into(), "7".into()]]).unwrap().records()[0].clone();
        assert_eq!(substitute_macros("##A##/##B##", &rec).unwrap(), "##B##/7");
    }

    #[test]
    fn adjacent_and_stray_hashes() {
        assert_eq!(macros_in("###A##B##"), vec!["A"]);
        assert_eq!(macros_in("##A####B##"), vec!["A", "B"]);
        assert!(macros_in("## A ##").is_empty());
    }

    #[test]
    fn template_checks() {
        let fields: Vec<String> = vec!["StudentID".into()];
        assert!(ExamTemplate::new("##StudentID##", vec![1, 1, 2]).validate(&fields).is_ok());
        assert!(ExamTemplate::new("x", vec![]).validate(&fields).is_err());
        assert!(ExamTemplate::new("x", vec![1, 0]).validate(&fields).is_err());
        assert!(ExamTemplate::new("##Name##", vec![1]).validate(&fields).is_err());
    }

    #[test]
    fn page_map_parsing() {
        assert_eq!(parse_page_map("1, 1,2").unwrap(), vec![1, 1, 2]);
        assert!(parse_page_map("1,0").is_err());
        assert!(parse_page_map("a").is_err());
    }
}
