//! Provider wire formats: request bodies, auth headers, and extraction of
//! sub-category scores from each provider's response document.

use std::collections::BTreeMap;

use modaudit_core::scoring::{normalize_sub_scores, ModerationScore, NormalizeError, UNKNOWN_MODEL_VERSION};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{ProviderErrorKind, ProviderSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResponseSchema {
    /// `{"sub_scores": {..}, "flagged"?, "category_flags"?, "model_version"?}`
    #[default]
    Generic,
    /// OpenAI moderation endpoint.
    #[serde(rename = "openai")]
    OpenAi,
    /// Google Cloud Natural Language `moderateText`.
    GoogleModerateText,
    /// Azure AI Content Safety `text:analyze`; severities 0..=7 scaled to [0, 1].
    AzureContentSafety,
    /// Azure Content Moderator `ProcessText/Screen` with classification.
    AzureContentModerator,
    /// Amazon Comprehend `DetectToxicContent`. The endpoint must accept
    /// bearer auth (e.g. a SigV4 signing proxy).
    AmazonComprehend,
}

/// Fields pulled verbatim from a response document.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Extracted {
    pub sub_scores: BTreeMap<String, f64>,
    /// Per-category binary verdicts, when the provider reports them.
    pub category_flags: Option<BTreeMap<String, bool>>,
    /// Whole-response verdict, when reported.
    pub overall_flag: Option<bool>,
    pub model_version: Option<String>,
}

impl Extracted {
    /// The provider's own decision restricted to the mapped categories, or
    /// its whole-response flag when it has no per-category verdicts.
    pub fn native_flag<'a>(&self, mapping: impl IntoIterator<Item = &'a String>) -> Option<bool> {
        match &self.category_flags {
            Some(flags) => Some(mapping.into_iter().any(|c| flags.get(c).copied().unwrap_or(false))),
            None => self.overall_flag,
        }
    }
}

fn field<'a>(v: &'a Value, name: &str) -> Result<&'a Value, String> {
    v.get(name).ok_or_else(|| format!("missing field `{name}`"))
}

fn number(v: &Value, what: &str) -> Result<f64, String> {
    v.as_f64().ok_or_else(|| format!("`{what}` is not a number"))
}

fn score_map(v: &Value, what: &str) -> Result<BTreeMap<String, f64>, String> {
    let obj = v.as_object().ok_or_else(|| format!("`{what}` is not an object"))?;
    obj.iter().map(|(k, x)| Ok((k.clone(), number(x, k)?))).collect()
}

fn named_scores(v: &Value, what: &str, name_key: &str, score_key: &str, scale: f64) -> Result<BTreeMap<String, f64>, String> {
    let arr = v.as_array().ok_or_else(|| format!("`{what}` is not an array"))?;
    arr.iter()
        .map(|item| {
            let name = field(item, name_key)?.as_str().ok_or_else(|| format!("`{name_key}` is not a string"))?;
            Ok((name.to_string(), number(field(item, score_key)?, score_key)? / scale))
        })
        .collect()
}

fn opt_string(v: &Value, name: &str) -> Option<String> {
    v.get(name).and_then(Value::as_str).map(str::to_string)
}

impl ResponseSchema {
    pub fn extract(self, raw: &Value) -> Result<Extracted, String> {
        match self {
            ResponseSchema::Generic => Ok(Extracted {
                sub_scores: score_map(field(raw, "sub_scores")?, "sub_scores")?,
                category_flags: match raw.get("category_flags") {
                    Some(v) => Some(bool_map(v)?),
                    None => None,
                },
                overall_flag: raw.get("flagged").and_then(Value::as_bool),
                model_version: opt_string(raw, "model_version"),
            }),
            ResponseSchema::OpenAi => {
                let result = field(raw, "results")?
                    .as_array()
                    .and_then(|a| a.first())
                    .ok_or("`results` is empty")?;
                Ok(Extracted {
                    sub_scores: score_map(field(result, "category_scores")?, "category_scores")?,
                    category_flags: match result.get("categories") {
                        Some(v) => Some(bool_map(v)?),
                        None => None,
                    },
                    overall_flag: result.get("flagged").and_then(Value::as_bool),
                    model_version: opt_string(raw, "model"),
                })
            }
            ResponseSchema::GoogleModerateText => Ok(Extracted {
                sub_scores: named_scores(field(raw, "moderationCategories")?, "moderationCategories", "name", "confidence", 1.0)?,
                model_version: opt_string(raw, "modelVersion"),
                ..Extracted::default()
            }),
            ResponseSchema::AzureContentSafety => Ok(Extracted {
                sub_scores: named_scores(field(raw, "categoriesAnalysis")?, "categoriesAnalysis", "category", "severity", 7.0)?,
                ..Extracted::default()
            }),
            ResponseSchema::AzureContentModerator => {
                let class = field(raw, "Classification")?;
                let obj = class.as_object().ok_or("`Classification` is not an object")?;
                let mut sub_scores = BTreeMap::new();
                for (k, v) in obj {
                    if let Some(score) = v.get("Score") {
                        sub_scores.insert(k.clone(), number(score, k)?);
                    }
                }
                Ok(Extracted {
                    sub_scores,
                    overall_flag: class.get("ReviewRecommended").and_then(Value::as_bool),
                    ..Extracted::default()
                })
            }
            ResponseSchema::AmazonComprehend => {
                let result = field(raw, "ResultList")?
                    .as_array()
                    .and_then(|a| a.first())
                    .ok_or("`ResultList` is empty")?;
                let mut sub_scores = named_scores(field(result, "Labels")?, "Labels", "Name", "Score", 1.0)?;
                if let Some(t) = result.get("Toxicity") {
                    sub_scores.insert("TOXICITY".into(), number(t, "Toxicity")?);
                }
                Ok(Extracted { sub_scores, ..Extracted::default() })
            }
        }
    }

    /// Content type and body for scoring `text`.
    pub fn request_body(self, text: &str, model_version: Option<&str>) -> (&'static str, String) {
        let json_body = match self {
            ResponseSchema::Generic | ResponseSchema::AzureContentSafety => json!({ "text": text }),
            ResponseSchema::OpenAi => match model_version {
                Some(m) => json!({ "input": text, "model": m }),
                None => json!({ "input": text }),
            },
            ResponseSchema::GoogleModerateText => json!({ "document": { "type": "PLAIN_TEXT", "content": text } }),
            ResponseSchema::AmazonComprehend => json!({ "TextSegments": [{ "Text": text }], "LanguageCode": "en" }),
            ResponseSchema::AzureContentModerator => return ("text/plain; charset=utf-8", text.to_string()),
        };
        ("application/json", json_body.to_string())
    }

    pub fn auth_header(self, secret: &str) -> (&'static str, String) {
        match self {
            ResponseSchema::GoogleModerateText => ("x-goog-api-key", secret.to_string()),
            ResponseSchema::AzureContentSafety | ResponseSchema::AzureContentModerator => {
                ("Ocp-Apim-Subscription-Key", secret.to_string())
            }
            _ => ("Authorization", format!("Bearer {secret}")),
        }
    }
}

fn bool_map(v: &Value) -> Result<BTreeMap<String, bool>, String> {
    let obj = v.as_object().ok_or("category flags are not an object")?;
    obj.iter()
        .map(|(k, x)| x.as_bool().map(|b| (k.clone(), b)).ok_or_else(|| format!("flag `{k}` is not a boolean")))
        .collect()
}

/// Collapses a raw provider document to a [`ModerationScore`]: sub-scores
/// verbatim, hate score as the max over the mapped categories, and the
/// provider's flag when it has one.
pub fn normalize_response(
    raw: &Value,
    spec: &ProviderSpec,
    text_id: &str,
    retrieved_at: &str,
) -> Result<ModerationScore, ProviderErrorKind> {
    let extracted = spec.schema.extract(raw).map_err(ProviderErrorKind::MalformedResponse)?;
    let native = extracted.native_flag(&spec.category_mapping);
    let n = normalize_sub_scores(&extracted.sub_scores, &spec.category_mapping, native).map_err(|e| match e {
        NormalizeError::UnknownCategory(c) => ProviderErrorKind::UnknownCategory(c),
        other => ProviderErrorKind::MalformedResponse(other.to_string()),
    })?;
    Ok(ModerationScore {
        text_id: text_id.to_string(),
        provider_id: spec.id.clone(),
        model_version: extracted.model_version.unwrap_or_else(|| UNKNOWN_MODEL_VERSION.to_string()),
        sub_scores: extracted.sub_scores,
        hate_score: n.hate_score,
        flagged: n.flagged,
        retrieved_at: retrieved_at.to_string(),
        from_cache: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(schema: ResponseSchema, mapping: &[&str]) -> ProviderSpec {
        let mut s = ProviderSpec::remote("p", "https://x", "K", mapping);
        s.schema = schema;
        s
    }

    const AT: &str = "2024-01-01T00:00:00Z";

    #[test]
    fn generic_max_rule() {
        let raw = json!({"sub_scores": {"hate": 0.7, "sexual": 0.9}});
        let s = normalize_response(&raw, &spec(ResponseSchema::Generic, &["hate"]), "t1", AT).unwrap();
        assert_eq!(s.hate_score, 0.7);
        assert!(s.flagged);
        assert_eq!(s.model_version, "unknown");
        assert_eq!(s.sub_scores.len(), 2);
    }

    #[test]
    fn zero_scores_not_flagged() {
        let raw = json!({"sub_scores": {"hate": 0.0, "harassment": 0.0}});
        let s = normalize_response(&raw, &spec(ResponseSchema::Generic, &["hate", "harassment"]), "t", AT).unwrap();
        assert_eq!((s.hate_score, s.flagged), (0.0, false));
    }

    #[test]
    fn openai_uses_per_category_flags() {
        let raw = json!({
            "id": "modr-1", "model": "omni-moderation-latest",
            "results": [{
                "flagged": true,
                "categories": {"hate": false, "sexual": true},
                "category_scores": {"hate": 0.2, "sexual": 0.95}
            }]
        });
        let s = normalize_response(&raw, &spec(ResponseSchema::OpenAi, &["hate"]), "t", AT).unwrap();
        assert_eq!((s.hate_score, s.flagged), (0.2, false));
        assert_eq!(s.model_version, "omni-moderation-latest");
    }

    #[test]
    fn google_azure_amazon_documents() {
        let raw = json!({"moderationCategories": [{"name": "Toxic", "confidence": 0.8}, {"name": "Insult", "confidence": 0.3}]});
        let s = normalize_response(&raw, &spec(ResponseSchema::GoogleModerateText, &["Toxic"]), "t", AT).unwrap();
        assert_eq!((s.hate_score, s.flagged), (0.8, true));

        let raw = json!({"categoriesAnalysis": [{"category": "Hate", "severity": 2}, {"category": "Violence", "severity": 0}]});
        let s = normalize_response(&raw, &spec(ResponseSchema::AzureContentSafety, &["Hate"]), "t", AT).unwrap();
        assert!((s.hate_score - 2.0 / 7.0).abs() < 1e-15);

        let raw = json!({"Classification": {"ReviewRecommended": true, "Category1": {"Score": 0.1}, "Category3": {"Score": 0.4}}});
        let s = normalize_response(&raw, &spec(ResponseSchema::AzureContentModerator, &["Category3"]), "t", AT).unwrap();
        assert_eq!((s.hate_score, s.flagged), (0.4, true));

        let raw = json!({"ResultList": [{"Labels": [{"Name": "HATE_SPEECH", "Score": 0.6}], "Toxicity": 0.7}]});
        let s = normalize_response(&raw, &spec(ResponseSchema::AmazonComprehend, &["HATE_SPEECH"]), "t", AT).unwrap();
        assert_eq!(s.hate_score, 0.6);
        assert_eq!(s.sub_scores["TOXICITY"], 0.7);
    }

    #[test]
    fn errors() {
        let raw = json!({"sub_scores": {"violence": 0.3}});
        assert_eq!(
            normalize_response(&raw, &spec(ResponseSchema::Generic, &["hate"]), "t", AT),
            Err(ProviderErrorKind::UnknownCategory("hate".into()))
        );
        let raw = json!({"scores": {}});
        assert!(matches!(
            normalize_response(&raw, &spec(ResponseSchema::Generic, &["hate"]), "t", AT),
            Err(ProviderErrorKind::MalformedResponse(_))
        ));
        let raw = json!({"results": []});
        assert!(matches!(
            normalize_response(&raw, &spec(ResponseSchema::OpenAi, &["hate"]), "t", AT),
            Err(ProviderErrorKind::MalformedResponse(_))
        ));
    }

    #[test]
    fn request_formats() {
        let (ct, body) = ResponseSchema::OpenAi.request_body("hi", None);
        assert_eq!((ct, body.as_str()), ("application/json", r#"{"input":"hi"}"#));
        let (ct, body) = ResponseSchema::AzureContentModerator.request_body("hi", None);
        assert_eq!((ct, body.as_str()), ("text/plain; charset=utf-8", "hi"));
        assert_eq!(ResponseSchema::Generic.auth_header("s"), ("Authorization", "Bearer s".to_string()));
    }
}
