//! Report document and its JSON/CSV serializations.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use modaudit_core::psa::SkipReason;
use serde::{Deserialize, Serialize};

use crate::format::{fmt6, fmt6_opt, round6};

pub const SIGN_CONVENTION: &str =
    "cft = score_minority - score_anchor; positive means the minority-token version was scored more toxic";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderMeta {
    pub id: String,
    pub kind: String,
    pub model_versions: Vec<String>,
    /// Earliest and latest retrieval time among the scores used.
    pub retrieved_from: Option<String>,
    pub retrieved_to: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusMeta {
    pub name: String,
    pub group_classifier: Option<String>,
    pub n_loaded: usize,
    pub n_balanced: usize,
    pub n_evaluated: usize,
    pub balance_seed: u64,
    pub budget_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsaMeta {
    pub level: f64,
    pub lexicon_tokens: usize,
    pub anchors: BTreeMap<String, Vec<String>>,
    pub n_templates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportHeader {
    pub tool: String,
    pub tool_version: String,
    pub config_digest: String,
    pub seed: u64,
    pub n_resamples: usize,
    pub budget: Option<usize>,
    pub sign_convention: String,
    pub groups: Vec<String>,
    pub providers: Vec<ProviderMeta>,
    pub corpora: Vec<CorpusMeta>,
    pub psa: Option<PsaMeta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub provider: String,
    pub corpus: String,
    pub n: usize,
    pub roc_auc: Option<f64>,
    pub f1: Option<f64>,
    pub fpr: Option<f64>,
    pub fnr: Option<f64>,
    pub accuracy: Option<f64>,
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRow {
    pub provider: String,
    pub corpus: String,
    pub group: String,
    pub pinned_auc: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub n_subgroup: usize,
    pub n_background_per_resample: usize,
    pub n_resamples: usize,
    pub n_valid_resamples: usize,
    pub seed: u64,
    pub per_resample_values: Vec<f64>,
    /// Why `pinned_auc` is undefined, when it is.
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CftRow {
    pub provider: String,
    /// `templates` or a corpus name.
    pub source: String,
    pub group: String,
    pub toxic_slice: String,
    pub n_pairs: usize,
    pub mean_cft: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
}

/// Scored plus errored equals submitted, per provider and source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConservationRow {
    pub provider: String,
    pub source: String,
    pub unit: String,
    pub submitted: usize,
    pub scored: usize,
    pub errored: usize,
}

impl ConservationRow {
    pub fn holds(&self) -> bool {
        self.scored + self.errored == self.submitted
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorEntry {
    pub provider: String,
    pub source: String,
    pub id: String,
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipEntry {
    pub source: String,
    pub sample_id: String,
    pub reason: SkipReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub header: ReportHeader,
    pub aggregate: Vec<AggregateRow>,
    pub groups: Vec<GroupRow>,
    pub cft: Vec<CftRow>,
    pub conservation: Vec<ConservationRow>,
    pub errors: Vec<ErrorEntry>,
    pub skips: Vec<SkipEntry>,
}

pub(crate) fn r6(x: Option<f64>) -> Option<f64> {
    x.map(round6)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Formats {
    pub json: bool,
    pub csv: bool,
}

impl Default for Formats {
    fn default() -> Self {
        Formats { json: true, csv: true }
    }
}

impl AuditReport {
    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    pub fn aggregate_csv(&self) -> String {
        let mut w = csv_writer();
        w.write_record(["provider", "corpus", "n", "roc_auc", "f1", "fpr", "fnr", "accuracy", "tp", "fp", "tn", "fn"])
            .unwrap();
        for r in &self.aggregate {
            w.write_record([
                r.provider.clone(),
                r.corpus.clone(),
                r.n.to_string(),
                fmt6_opt(r.roc_auc),
                fmt6_opt(r.f1),
                fmt6_opt(r.fpr),
                fmt6_opt(r.fnr),
                fmt6_opt(r.accuracy),
                r.tp.to_string(),
                r.fp.to_string(),
                r.tn.to_string(),
                r.fn_.to_string(),
            ])
            .unwrap();
        }
        finish(w)
    }

    pub fn groups_csv(&self) -> String {
        let mut w = csv_writer();
        w.write_record([
            "provider",
            "corpus",
            "group",
            "pinned_auc",
            "ci_low",
            "ci_high",
            "n_subgroup",
            "n_background_per_resample",
            "n_resamples",
            "n_valid_resamples",
            "seed",
        ])
        .unwrap();
        for r in &self.groups {
            w.write_record([
                r.provider.clone(),
                r.corpus.clone(),
                r.group.clone(),
                fmt6_opt(r.pinned_auc),
                fmt6_opt(r.ci_low),
                fmt6_opt(r.ci_high),
                r.n_subgroup.to_string(),
                r.n_background_per_resample.to_string(),
                r.n_resamples.to_string(),
                r.n_valid_resamples.to_string(),
                r.seed.to_string(),
            ])
            .unwrap();
        }
        finish(w)
    }

    pub fn cft_csv(&self) -> String {
        let mut w = csv_writer();
        w.write_record(["provider", "source", "group", "toxic_slice", "n_pairs", "mean_cft", "ci_low", "ci_high"])
            .unwrap();
        for r in &self.cft {
            w.write_record([
                r.provider.clone(),
                r.source.clone(),
                r.group.clone(),
                r.toxic_slice.clone(),
                r.n_pairs.to_string(),
                fmt6(r.mean_cft),
                fmt6_opt(r.ci_low),
                fmt6_opt(r.ci_high),
            ])
            .unwrap();
        }
        finish(w)
    }

    fn ledger<T: Serialize>(rows: &[T]) -> String {
        rows.iter().map(|r| serde_json::to_string(r).expect("ledger row serializes") + "\n").collect()
    }

    /// Writes the report files into `dir` and returns their paths.
    pub fn emit(&self, dir: &Path, formats: Formats) -> io::Result<Vec<PathBuf>> {
        fs::create_dir_all(dir.join("ledgers"))?;
        let mut files: Vec<(PathBuf, String)> = Vec::new();
        if formats.json {
            files.push((dir.join("report.json"), self.to_json()));
        }
        if formats.csv {
            files.push((dir.join("aggregate.csv"), self.aggregate_csv()));
            files.push((dir.join("groups.csv"), self.groups_csv()));
            files.push((dir.join("cft.csv"), self.cft_csv()));
        }
        files.push((dir.join("ledgers").join("errors.jsonl"), Self::ledger(&self.errors)));
        files.push((dir.join("ledgers").join("skips.jsonl"), Self::ledger(&self.skips)));
        for (path, content) in &files {
            fs::write(path, content)?;
        }
        Ok(files.into_iter().map(|(p, _)| p).collect())
    }
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv is utf-8")
}
