//! One TOML file configures every stage of the pipeline.
//!
//! Every section and key is optional; omitted keys take their defaults.
//! Unknown keys anywhere in the file are collected and reported together,
//! so a typo cannot silently fall back to a default. The set of known
//! keys is derived from the serialized default configuration, which keeps
//! the checker in sync with the structs by construction.

use crate::candidates::CandidateConfig;
use crate::corpus::synth::SyntheticSpec;
use crate::error::{Error, Result};
use crate::linkgraph::GraphConfig;
use crate::model::train::TrainConfig;
use crate::model::ModelVariant;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    /// Context tokens kept per side of each mention at load time.
    pub window_size: usize,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig { window_size: 64 }
    }
}

/// Model shape knobs that are not dictated by the embedding tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Width of the mention representation used by the attention.
    pub attention_dim: usize,
    /// Hidden width of the score-combining network.
    pub f_hidden: usize,
    /// Context words kept by the local score per mention.
    pub local_top_k: usize,
    /// Fixed weight of the first-stage aggregate score in the final score.
    pub lambda_c: f64,
    pub variant: ModelVariant,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            attention_dim: 300,
            f_hidden: 100,
            local_top_k: 25,
            lambda_c: 1.0,
            variant: ModelVariant::Full,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        for (name, v) in [
            ("attention_dim", self.attention_dim),
            ("f_hidden", self.f_hidden),
            ("local_top_k", self.local_top_k),
        ] {
            if v == 0 {
                problems.push(format!("{name} must be positive"));
            }
        }
        if !(self.lambda_c.is_finite() && self.lambda_c >= 0.0) {
            problems.push("lambda_c must be finite and nonnegative".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub corpus: CorpusConfig,
    pub graph: GraphConfig,
    pub candidates: CandidateConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub synth: SyntheticSpec,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.corpus.window_size == 0 {
            return Err(Error::Config("corpus.window_size must be positive".into()));
        }
        if self.graph.max_anchor_distance == 0 {
            return Err(Error::Config("graph.max_anchor_distance must be positive".into()));
        }
        self.candidates.validate()?;
        self.model.validate()?;
        self.train.validate()?;
        self.synth.validate()?;
        Ok(())
    }

    /// Parses and validates a configuration. `origin` only labels errors.
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let value: toml::Value = toml::from_str(text)
            .map_err(|e| Error::Config(format!("{}: {e}", origin.display())))?;
        let unknown = unknown_keys(&value);
        if !unknown.is_empty() {
            return Err(Error::Config(format!(
                "{}: unknown configuration keys: {}",
                origin.display(),
                unknown.join(", ")
            )));
        }
        let cfg: PipelineConfig = value
            .try_into()
            .map_err(|e| Error::Config(format!("{}: {e}", origin.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path)
    }
}

fn collect_paths(value: &toml::Value, prefix: &str, out: &mut BTreeSet<String>) {
    if let toml::Value::Table(table) = value {
        for (key, v) in table {
            let path = if prefix.is_empty() { key.clone() } else { format!("{prefix}.{key}") };
            out.insert(path.clone());
            collect_paths(v, &path, out);
        }
    }
}

/// Key paths present in `value` that the configuration schema does not
/// define, sorted for stable error messages.
fn unknown_keys(value: &toml::Value) -> Vec<String> {
    let default =
        toml::Value::try_from(PipelineConfig::default()).expect("default config serializes");
    let mut known = BTreeSet::new();
    collect_paths(&default, "", &mut known);
    let mut present = BTreeSet::new();
    collect_paths(value, "", &mut present);
    present.difference(&known).cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = PipelineConfig::from_toml_str("", Path::new("test.toml")).unwrap();
        assert_eq!(cfg, PipelineConfig::default());
    }

    #[test]
    fn defaults_round_trip_through_toml() {
        let text = toml::to_string(&PipelineConfig::default()).unwrap();
        let cfg = PipelineConfig::from_toml_str(&text, Path::new("round.toml")).unwrap();
        assert_eq!(cfg, PipelineConfig::default());
    }

    #[test]
    fn partial_sections_keep_other_defaults() {
        let text = "[train]\nseed = 99\n\n[candidates]\nkeep_by_prior = 6\n";
        let cfg = PipelineConfig::from_toml_str(text, Path::new("p.toml")).unwrap();
        assert_eq!(cfg.train.seed, 99);
        assert_eq!(cfg.train.margin, PipelineConfig::default().train.margin);
        assert_eq!(cfg.candidates.keep_by_prior, 6);
        assert_eq!(cfg.model, PipelineConfig::default().model);
    }

    #[test]
    fn all_unknown_keys_are_reported_together() {
        let text = "[trian]\nseed = 1\n\n[model]\nhidden = 2\nf_hidden = 3\n\n[candidates]\nkeep_by_prio = 4\n";
        let err = PipelineConfig::from_toml_str(text, Path::new("bad.toml")).unwrap_err();
        let msg = err.to_string();
        for needle in ["trian", "model.hidden", "candidates.keep_by_prio"] {
            assert!(msg.contains(needle), "missing {needle} in: {msg}");
        }
        assert!(!msg.contains("f_hidden"), "valid key flagged: {msg}");
        // sorted listing
        let keys_part = msg.split("keys: ").nth(1).unwrap();
        assert_eq!(keys_part, "candidates.keep_by_prio, model.hidden, trian, trian.seed");
    }

    #[test]
    fn type_errors_name_the_origin() {
        let err = PipelineConfig::from_toml_str("[train]\nseed = \"x\"\n", Path::new("t.toml"))
            .unwrap_err();
        assert!(err.to_string().contains("t.toml"), "{err}");
    }

    #[test]
    fn section_validation_runs_after_parsing() {
        let text = "[candidates]\npositives_train = 9\npositives_eval = 2\n";
        assert!(PipelineConfig::from_toml_str(text, Path::new("v.toml")).is_err());
        let text = "[model]\nattention_dim = 0\n";
        assert!(PipelineConfig::from_toml_str(text, Path::new("v.toml")).is_err());
        let text = "[train]\ndropout = 1.5\n";
        assert!(PipelineConfig::from_toml_str(text, Path::new("v.toml")).is_err());
    }

    #[test]
    fn variant_parses_from_kebab_case() {
        let cfg = PipelineConfig::from_toml_str("[model]\nvariant = \"no-local\"\n", Path::new("m.toml"))
            .unwrap();
        assert_eq!(cfg.model.variant, ModelVariant::NoLocal);
    }
}
