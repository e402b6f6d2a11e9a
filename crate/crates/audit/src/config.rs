//! Run configuration: one JSON document, paths relative to its directory.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use modaudit_core::corpus::GroupMapping;
use modaudit_core::group::DEFAULT_GROUPS;
use modaudit_core::{GroupRegistry, IdentityGroup};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus_io::{CorpusFormat, CorpusSchema};
use crate::providers::ProviderSpec;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn default_resamples() -> usize {
    modaudit_core::metrics::DEFAULT_RESAMPLES
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("audit-out")
}

fn default_cache_dir() -> PathBuf {
    PathBuf::from(".modaudit-cache")
}

fn default_groups() -> Vec<String> {
    DEFAULT_GROUPS.iter().map(|g| g.to_string()).collect()
}

fn default_level() -> f64 {
    0.95
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusConfig {
    pub name: String,
    pub path: PathBuf,
    /// Inferred from the extension when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<CorpusFormat>,
    #[serde(default)]
    pub schema: CorpusSchema,
    #[serde(default)]
    pub mapping: GroupMapping,
    /// Name of the external classifier that produced the groups field, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_classifier: Option<String>,
    /// Also derive counterfactual pairs from this corpus.
    #[serde(default)]
    pub derive_pairs: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsaConfig {
    /// Lexicon file; the bundled lexicon when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lexicon: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub templates: Option<PathBuf>,
    /// Use the bundled neutral templates when no template file is given.
    #[serde(default)]
    pub bundled_templates: bool,
    #[serde(default = "default_level")]
    pub level: f64,
}

impl Default for PsaConfig {
    fn default() -> Self {
        PsaConfig { lexicon: None, templates: None, bundled_templates: true, level: default_level() }
    }
}

fn default_validation_weights() -> BTreeMap<String, f64> {
    [("hate", 1.5), ("hateful", 1.5), ("kill", 2.0), ("stupid", 1.0), ("disgusting", 1.0), ("people", 0.25)]
        .into_iter()
        .map(|(t, w)| (t.to_string(), w))
        .collect()
}

fn default_validation_resamples() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationConfig {
    #[serde(default)]
    pub deltas: BTreeMap<IdentityGroup, f64>,
    /// Base scorer weights for the planted-bias scorer.
    #[serde(default = "default_validation_weights")]
    pub term_weights: BTreeMap<String, f64>,
    #[serde(default = "default_validation_resamples")]
    pub n_resamples: usize,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            deltas: BTreeMap::new(),
            term_weights: default_validation_weights(),
            n_resamples: default_validation_resamples(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditConfig {
    pub seed: u64,
    #[serde(default = "default_resamples")]
    pub n_resamples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_cache_dir")]
    pub cache_dir: PathBuf,
    /// Group registry, in report order.
    #[serde(default = "default_groups")]
    pub groups: Vec<String>,
    #[serde(default)]
    pub providers: Vec<ProviderSpec>,
    #[serde(default)]
    pub corpora: Vec<CorpusConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psa: Option<PsaConfig>,
    #[serde(default)]
    pub validation: ValidationConfig,
    /// Directory relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Command-line values that replace file values.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub budget: Option<usize>,
    pub providers: Option<Vec<String>>,
    pub output_dir: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
}

impl AuditConfig {
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self, String> {
        let mut config: AuditConfig = serde_json::from_str(text).map_err(|e| e.to_string())?;
        config.base_dir = base_dir.to_path_buf();
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json(&text, &base).map_err(|message| ConfigError::Parse { path: path.to_path_buf(), message })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.resolve(&self.cache_dir)
    }

    /// Overridden paths are taken relative to the working directory.
    pub fn apply(&mut self, o: &Overrides) -> Result<(), ConfigError> {
        let absolute = |p: &PathBuf| {
            std::path::absolute(p).map_err(|e| ConfigError::Invalid(format!("bad path {}: {e}", p.display())))
        };
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(budget) = o.budget {
            self.budget = Some(budget);
        }
        if let Some(dir) = &o.output_dir {
            self.output_dir = absolute(dir)?;
        }
        if let Some(dir) = &o.cache_dir {
            self.cache_dir = absolute(dir)?;
        }
        if let Some(keep) = &o.providers {
            for id in keep {
                if !self.providers.iter().any(|p| &p.id == id) {
                    return Err(ConfigError::Invalid(format!("--providers names unknown provider `{id}`")));
                }
            }
            self.providers.retain(|p| keep.contains(&p.id));
        }
        Ok(())
    }

    pub fn registry(&self) -> Result<GroupRegistry, ConfigError> {
        GroupRegistry::new(self.groups.iter().cloned()).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// Checks shared by every subcommand.
    pub fn validate_common(&self) -> Result<GroupRegistry, ConfigError> {
        let registry = self.registry()?;
        if self.n_resamples == 0 {
            return Err(ConfigError::Invalid("n_resamples must be at least 1".into()));
        }
        for g in self.validation.deltas.keys() {
            if !registry.contains(g) {
                return Err(ConfigError::Invalid(format!("validation delta for unknown group `{g}`")));
            }
        }
        if let Some(psa) = &self.psa {
            if !(psa.level > 0.0 && psa.level < 1.0) {
                return Err(ConfigError::Invalid(format!("psa.level {} is outside (0, 1)", psa.level)));
            }
        }
        Ok(registry)
    }

    /// Full check for an audit run.
    pub fn validate(&self) -> Result<GroupRegistry, ConfigError> {
        let registry = self.validate_common()?;
        if self.providers.is_empty() {
            return Err(ConfigError::Invalid("at least one provider is required".into()));
        }
        let has_templates = self.psa.as_ref().is_some_and(|p| p.templates.is_some() || p.bundled_templates);
        if self.corpora.is_empty() && !has_templates {
            return Err(ConfigError::Invalid("at least one corpus or template source is required".into()));
        }
        let mut ids = BTreeSet::new();
        for p in &self.providers {
            p.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
            if !ids.insert(&p.id) {
                return Err(ConfigError::Invalid(format!("duplicate provider id `{}`", p.id)));
            }
            for g in p.deltas.keys() {
                if !registry.contains(g) {
                    return Err(ConfigError::Invalid(format!("provider `{}`: delta for unknown group `{g}`", p.id)));
                }
            }
        }
        let mut names = BTreeSet::new();
        for c in &self.corpora {
            if !names.insert(&c.name) {
                return Err(ConfigError::Invalid(format!("duplicate corpus name `{}`", c.name)));
            }
            if c.name.is_empty() || c.name.contains(['/', '\\', '\n']) {
                return Err(ConfigError::Invalid(format!("corpus name `{}` is not usable", c.name)));
            }
            c.mapping
                .validate(&registry)
                .map_err(|e| ConfigError::Invalid(format!("corpus `{}`: {e}", c.name)))?;
        }
        if self.budget == Some(0) {
            return Err(ConfigError::Invalid("budget must be positive".into()));
        }
        Ok(registry)
    }

    /// SHA-256 over the canonical JSON of the effective configuration.
    /// Output and cache locations do not count.
    pub fn digest(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        canonical.cache_dir = PathBuf::new();
        let json = serde_json::to_string(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "seed": 7,
        "providers": [{"id": "lex", "kind": "lexicon", "term_weights": {"hate": 1.0}}],
        "corpora": [{"name": "toy", "path": "toy.jsonl"}]
    }"#;

    #[test]
    fn defaults_and_paths() {
        let c = AuditConfig::from_json(MINIMAL, Path::new("/etc/audit")).unwrap();
        assert_eq!(c.n_resamples, 100);
        assert_eq!(c.groups.len(), 7);
        assert_eq!(c.resolve(&c.corpora[0].path), PathBuf::from("/etc/audit/toy.jsonl"));
        assert_eq!(c.output_dir(), PathBuf::from("/etc/audit/audit-out"));
        c.validate().unwrap();
    }

    #[test]
    fn seed_is_required_and_unknown_fields_rejected() {
        assert!(AuditConfig::from_json(r#"{"providers": []}"#, Path::new(".")).unwrap_err().contains("seed"));
        assert!(AuditConfig::from_json(r#"{"seed": 1, "sede": 2}"#, Path::new(".")).is_err());
    }

    #[test]
    fn overrides_win() {
        let mut c = AuditConfig::from_json(MINIMAL, Path::new("/x")).unwrap();
        let d0 = c.digest();
        c.apply(&Overrides { seed: Some(9), budget: Some(50), ..Default::default() }).unwrap();
        assert_eq!((c.seed, c.budget), (9, Some(50)));
        assert_ne!(c.digest(), d0);

        let e = c.apply(&Overrides { providers: Some(vec!["nope".into()]), ..Default::default() });
        assert!(matches!(e, Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn digest_ignores_output_location() {
        let mut a = AuditConfig::from_json(MINIMAL, Path::new("/x")).unwrap();
        let b = a.clone();
        a.output_dir = PathBuf::from("/elsewhere");
        assert_eq!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
    }

    #[test]
    fn structural_errors() {
        let no_providers = r#"{"seed": 1, "corpora": [{"name": "c", "path": "c.jsonl"}]}"#;
        assert!(AuditConfig::from_json(no_providers, Path::new(".")).unwrap().validate().is_err());
        let bad_rule = r#"{"seed": 1,
            "providers": [{"id": "l", "kind": "lexicon"}],
            "corpora": [{"name": "c", "path": "c.jsonl", "mapping": {"rules": {"x": "Martians"}}}]}"#;
        let e = AuditConfig::from_json(bad_rule, Path::new(".")).unwrap().validate().unwrap_err();
        assert!(e.to_string().contains("Martians"));
    }
}
