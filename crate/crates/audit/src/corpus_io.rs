//! Corpus files: JSONL or CSV with configurable field names.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use modaudit_core::corpus::{Corpus, TextSample};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Jsonl,
    Csv,
}

impl CorpusFormat {
    /// `.csv` is CSV; anything else is JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => CorpusFormat::Csv,
            _ => CorpusFormat::Jsonl,
        }
    }
}

/// Which fields hold what. Defaults match the canonical JSONL layout
/// `{"id", "text", "toxic", "groups"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSchema {
    pub id: String,
    pub text: String,
    pub toxic: String,
    /// Raw target labels; optional in the data.
    pub groups: String,
    /// Numeric labels at or above this are toxic.
    pub toxic_threshold: f64,
    /// Separator for group labels given as one string (always the case in CSV).
    pub group_separator: String,
}

impl Default for CorpusSchema {
    fn default() -> Self {
        CorpusSchema {
            id: "id".into(),
            text: "text".into(),
            toxic: "toxic".into(),
            groups: "groups".into(),
            toxic_threshold: 0.5,
            group_separator: ";".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LoadErrorKind {
    Io(String),
    Parse(String),
    DuplicateId(String),
    MissingField(String),
    InvalidLabel(String),
    EmptyText(String),
}

impl fmt::Display for LoadErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoadErrorKind::Io(m) => write!(f, "cannot read file: {m}"),
            LoadErrorKind::Parse(m) => write!(f, "parse error: {m}"),
            LoadErrorKind::DuplicateId(id) => write!(f, "duplicate id `{id}`"),
            LoadErrorKind::MissingField(name) => write!(f, "missing required field `{name}`"),
            LoadErrorKind::InvalidLabel(v) => write!(f, "label `{v}` is not a boolean"),
            LoadErrorKind::EmptyText(id) => write!(f, "sample `{id}` has empty text"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct LoadError {
    pub path: PathBuf,
    pub line: Option<u64>,
    pub kind: LoadErrorKind,
}

impl fmt::Display for LoadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "{}:{line}: {}", self.path.display(), self.kind),
            None => write!(f, "{}: {}", self.path.display(), self.kind),
        }
    }
}

fn coerce_label(v: &Value, threshold: f64) -> Option<bool> {
    match v {
        Value::Bool(b) => Some(*b),
        Value::Number(n) => n.as_f64().map(|x| x >= threshold),
        Value::String(s) => coerce_label_str(s, threshold),
        _ => None,
    }
}

fn coerce_label_str(s: &str, threshold: f64) -> Option<bool> {
    let s = s.trim();
    match s.to_ascii_lowercase().as_str() {
        "true" | "yes" => Some(true),
        "false" | "no" => Some(false),
        _ => s.parse::<f64>().ok().filter(|x| x.is_finite()).map(|x| x >= threshold),
    }
}

fn split_groups(s: &str, sep: &str) -> Vec<String> {
    s.split(sep).map(str::trim).filter(|g| !g.is_empty()).map(String::from).collect()
}

struct Record {
    line: u64,
    id: String,
    text: String,
    toxic: bool,
    groups: Vec<String>,
}

fn jsonl_record(line: u64, raw: &str, schema: &CorpusSchema) -> Result<Record, LoadErrorKind> {
    let v: Value = serde_json::from_str(raw).map_err(|e| LoadErrorKind::Parse(e.to_string()))?;
    let obj = v.as_object().ok_or_else(|| LoadErrorKind::Parse("record is not a JSON object".into()))?;
    let get = |name: &str| obj.get(name).filter(|v| !v.is_null());
    let id = match get(&schema.id) {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        Some(other) => return Err(LoadErrorKind::Parse(format!("id must be a string or number, got {other}"))),
        None => return Err(LoadErrorKind::MissingField(schema.id.clone())),
    };
    let text = match get(&schema.text) {
        Some(Value::String(s)) => s.clone(),
        Some(other) => return Err(LoadErrorKind::Parse(format!("text must be a string, got {other}"))),
        None => return Err(LoadErrorKind::MissingField(schema.text.clone())),
    };
    let label = get(&schema.toxic).ok_or_else(|| LoadErrorKind::MissingField(schema.toxic.clone()))?;
    let toxic = coerce_label(label, schema.toxic_threshold).ok_or_else(|| LoadErrorKind::InvalidLabel(label.to_string()))?;
    let groups = match get(&schema.groups) {
        None => Vec::new(),
        Some(Value::String(s)) => split_groups(s, &schema.group_separator),
        Some(Value::Array(items)) => items
            .iter()
            .map(|g| g.as_str().map(String::from).ok_or_else(|| LoadErrorKind::Parse(format!("group label {g} is not a string"))))
            .collect::<Result<_, _>>()?,
        Some(other) => return Err(LoadErrorKind::Parse(format!("groups must be a list or string, got {other}"))),
    };
    Ok(Record { line, id, text, toxic, groups })
}

fn read_jsonl(content: &str, schema: &CorpusSchema) -> Result<Vec<Record>, (Option<u64>, LoadErrorKind)> {
    let mut out = Vec::new();
    for (i, raw) in content.lines().enumerate() {
        let line = i as u64 + 1;
        if raw.trim().is_empty() {
            continue;
        }
        out.push(jsonl_record(line, raw, schema).map_err(|k| (Some(line), k))?);
    }
    Ok(out)
}

fn read_csv(content: &str, schema: &CorpusSchema) -> Result<Vec<Record>, (Option<u64>, LoadErrorKind)> {
    if content.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(content.as_bytes());
    let headers = reader.headers().map_err(|e| (Some(1), LoadErrorKind::Parse(e.to_string())))?.clone();
    let column = |name: &str| headers.iter().position(|h| h == name);
    let required = |name: &String| column(name).ok_or_else(|| (Some(1), LoadErrorKind::MissingField(name.clone())));
    let (id_col, text_col, toxic_col) = (required(&schema.id)?, required(&schema.text)?, required(&schema.toxic)?);
    let groups_col = column(&schema.groups);

    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| (e.position().map(|p| p.line()), LoadErrorKind::Parse(e.to_string())))?;
        let line = row.position().map_or(0, |p| p.line());
        let field = |col: usize, name: &String| {
            row.get(col).ok_or_else(|| (Some(line), LoadErrorKind::MissingField(name.clone())))
        };
        let id = field(id_col, &schema.id)?.to_string();
        if id.is_empty() {
            return Err((Some(line), LoadErrorKind::MissingField(schema.id.clone())));
        }
        let text = field(text_col, &schema.text)?.to_string();
        let label = field(toxic_col, &schema.toxic)?;
        let toxic = coerce_label_str(label, schema.toxic_threshold)
            .ok_or_else(|| (Some(line), LoadErrorKind::InvalidLabel(label.to_string())))?;
        let groups = groups_col
            .and_then(|c| row.get(c))
            .map(|s| split_groups(s, &schema.group_separator))
            .unwrap_or_default();
        out.push(Record { line, id, text, toxic, groups });
    }
    Ok(out)
}

/// Reads a corpus file. Every record becomes a sample named after `name`;
/// raw group labels are kept for [`modaudit_core::corpus::map_groups`].
pub fn load_corpus(path: &Path, name: &str, format: CorpusFormat, schema: &CorpusSchema) -> Result<Corpus, LoadError> {
    let err = |line, kind| LoadError { path: path.to_path_buf(), line, kind };
    let content = std::fs::read_to_string(path).map_err(|e| err(None, LoadErrorKind::Io(e.to_string())))?;
    let records = match format {
        CorpusFormat::Jsonl => read_jsonl(&content, schema),
        CorpusFormat::Csv => read_csv(&content, schema),
    }
    .map_err(|(line, kind)| err(line, kind))?;

    let mut seen = BTreeSet::new();
    let mut samples = Vec::with_capacity(records.len());
    for r in records {
        if r.text.trim().is_empty() {
            return Err(err(Some(r.line), LoadErrorKind::EmptyText(r.id)));
        }
        if !seen.insert(r.id.clone()) {
            return Err(err(Some(r.line), LoadErrorKind::DuplicateId(r.id)));
        }
        samples.push(TextSample::new(r.id, r.text, r.toxic, name).with_raw_labels(r.groups));
    }
    Ok(Corpus::new(name, samples).expect("ids and texts checked above"))
}
