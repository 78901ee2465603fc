use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::codec::validate_student_id;

use super::ComposeError;

/// Schema of the roster file, as found under `student_data` in
/// `student_data.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RosterConfig {
    pub file_path: PathBuf,
    pub fieldnames: Vec<String>,
    pub key: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct StudentDataFile {
    student_data: RosterConfig,
}

impl RosterConfig {
    pub fn validate(&self) -> Result<(), ComposeError> {
        if self.fieldnames.is_empty() {
            return Err(ComposeError::InvalidConfig("fieldnames is empty".into()));
        }
        for (i, f) in self.fieldnames.iter().enumerate() {
            if self.fieldnames[..i].contains(f) {
                return Err(ComposeError::InvalidConfig(format!("duplicate fieldname {f:?}")));
            }
        }
        if !self.fieldnames.contains(&self.key) {
            return Err(ComposeError::InvalidConfig(format!(
                "key {:?} is not one of the fieldnames",
                self.key
            )));
        }
        Ok(())
    }

    /// Parses `student_data.json` text. `file_path` is kept as written.
    pub fn from_json(text: &str) -> Result<RosterConfig, ComposeError> {
        let file: StudentDataFile = serde_json::from_str(text)
            .map_err(|e| ComposeError::InvalidConfig(format!("student data: {e}")))?;
        file.student_data.validate()?;
        Ok(file.student_data)
    }

    /// Reads `student_data.json`; a relative `file_path` is resolved against
    /// the directory holding the JSON file.
    pub fn load(path: &Path) -> Result<RosterConfig, ComposeError> {
        let text = fs::read_to_string(path).map_err(|e| ComposeError::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        if cfg.file_path.is_relative() {
            let base = path.parent().unwrap_or(Path::new("."));
            cfg.file_path = base.join(&cfg.file_path);
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&StudentDataFile {
            student_data: self.clone(),
        })
        .expect("plain data")
    }
}

/// One roster row; values are stored in fieldname order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StudentRecord {
    fieldnames: Vec<String>,
    values: Vec<String>,
    key_index: usize,
}

impl StudentRecord {
    pub fn get(&self, field: &str) -> Option<&str> {
        self.fieldnames
            .iter()
            .position(|f| f == field)
            .map(|i| self.values[i].as_str())
    }

    pub fn key(&self) -> &str {
        &self.values[self.key_index]
    }

    pub fn values(&self) -> impl Iterator<Item = (&str, &str)> {
        self.fieldnames
            .iter()
            .map(String::as_str)
            .zip(self.values.iter().map(String::as_str))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Roster {
    pub config: RosterConfig,
    records: Vec<StudentRecord>,
    index: HashMap<String, usize>,
}

impl Roster {
    /// Builds a roster from already split rows, applying the same checks as
    /// [`load_roster`]. Line numbers in errors are 1-based row positions.
    pub fn from_rows(config: RosterConfig, rows: Vec<Vec<String>>) -> Result<Roster, ComposeError> {
        Self::build(config, rows.into_iter().enumerate().map(|(i, r)| (i + 1, r)))
    }

    fn build(
        config: RosterConfig,
        rows: impl Iterator<Item = (usize, Vec<String>)>,
    ) -> Result<Roster, ComposeError> {
        config.validate()?;
        let key_index = config.fieldnames.iter().position(|f| *f == config.key).unwrap();
        let mut records = Vec::new();
        let mut index = HashMap::new();
        let mut lines: HashMap<String, usize> = HashMap::new();
        for (line, values) in rows {
            Self::check_row(&config, key_index, &values, line, &mut lines)?;
            index.insert(values[key_index].clone(), records.len());
            records.push(StudentRecord {
                fieldnames: config.fieldnames.clone(),
                values,
                key_index,
            });
        }
        Ok(Roster {
            config,
            records,
            index,
        })
    }

    fn check_row(
        config: &RosterConfig,
        key_index: usize,
        values: &[String],
        line: usize,
        seen: &mut HashMap<String, usize>,
    ) -> Result<(), ComposeError> {
        if values.len() != config.fieldnames.len() {
            return Err(ComposeError::FieldCountMismatch {
                line,
                expected: config.fieldnames.len(),
                found: values.len(),
            });
        }
        let key = &values[key_index];
        validate_student_id(key).map_err(|e| ComposeError::InvalidKey {
            line,
            value: key.clone(),
            reason: e.to_string(),
        })?;
        if let Some(&first) = seen.get(key) {
            return Err(ComposeError::DuplicateKey {
                key: key.clone(),
                first_line: first,
                line,
            });
        }
        seen.insert(key.clone(), line);
        Ok(())
    }

    pub fn records(&self) -> &[StudentRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&StudentRecord> {
        self.index.get(key).map(|&i| &self.records[i])
    }

    pub fn contains(&self, key: &str) -> bool {
        self.index.contains_key(key)
    }

    /// Position of a student in roster order.
    pub fn position(&self, key: &str) -> Option<usize> {
        self.index.get(key).copied()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(StudentRecord::key)
    }
}

/// Parses semicolon-separated roster text. No header row, no quoting.
pub fn parse_roster(config: RosterConfig, text: &str) -> Result<Roster, ComposeError> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let rows = text.split('\n').enumerate().filter_map(|(i, raw)| {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        (!line.trim().is_empty()).then(|| (i + 1, line.split(';').map(str::to_string).collect()))
    });
    Roster::build(config, rows)
}

pub fn load_roster(config: &RosterConfig) -> Result<Roster, ComposeError> {
    let text = fs::read_to_string(&config.file_path).map_err(|e| ComposeError::io(&config.file_path, e))?;
    parse_roster(config.clone(), &text)
}
