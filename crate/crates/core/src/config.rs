//! TOML run configuration.
//!
//! ```toml
//! [eval]
//! averaging = "union"          # or "reference"
//! label_f1 = "micro"           # or "macro"
//! label_vocabulary = "labels.txt"
//!
//! [eval.bleu]
//! max_n = 4
//! epsilon = 1e-9
//!
//! [adherence]
//! negative_patterns = ["unremarkable", "no acute *"]
//!
//! [rates]
//! currency_per_gpu_hour = 4.99
//! grams_co2_per_kwh = 400.0
//! watts_per_gpu = 300.0
//!
//! [scorer]
//! max_batch = 32
//! timeout = 120000             # milliseconds
//!
//! [scorer.options]
//! model = "some-checkpoint"
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adherence::NegativeFindingPatterns;
use crate::corpus::DEFAULT_MAX_REJECT_RATIO;
use crate::cost::RateConfig;
use crate::eval::{AveragingMode, EvalConfig};
use crate::lexical::{BleuConfig, F1Averaging, LabelVocabulary};
use crate::scorer::ClientConfig;
use crate::template::TemplateSpec;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
    #[error("{path}: {reason}")]
    Parse { path: String, reason: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub averaging: AveragingMode,
    pub label_f1: F1Averaging,
    pub label_vocabulary: Option<PathBuf>,
    pub bleu: BleuConfig,
    pub rouge_beta: f64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            averaging: AveragingMode::Union,
            label_f1: F1Averaging::Micro,
            label_vocabulary: None,
            bleu: BleuConfig::default(),
            rouge_beta: 1.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdherenceSettings {
    /// Replaces the built-in patterns when set.
    pub negative_patterns: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScorerSettings {
    #[serde(flatten)]
    pub client: ClientConfig,
    pub options: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSettings {
    pub max_reject_ratio: f64,
}

impl Default for CorpusSettings {
    fn default() -> Self {
        CorpusSettings {
            max_reject_ratio: DEFAULT_MAX_REJECT_RATIO,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub eval: EvalSettings,
    pub adherence: AdherenceSettings,
    pub rates: RateConfig,
    pub scorer: ScorerSettings,
    pub corpus: CorpusSettings,
    /// Directory that relative paths resolve against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: "<config>".into(),
            reason: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(base) if p.is_relative() => base.join(p),
            _ => p.to_path_buf(),
        }
    }

    pub fn negative_patterns(&self) -> Result<NegativeFindingPatterns, ConfigError> {
        match &self.adherence.negative_patterns {
            None => Ok(NegativeFindingPatterns::default()),
            Some(p) => NegativeFindingPatterns::new(p).map_err(|e| ConfigError::Invalid(e.to_string())),
        }
    }

    pub fn eval_config(&self) -> Result<EvalConfig, ConfigError> {
        let label_vocabulary = match &self.eval.label_vocabulary {
            None => None,
            Some(p) => {
                let path = self.resolve(p);
                let text = std::fs::read_to_string(&path).map_err(|e| ConfigError::Io {
                    path: path.display().to_string(),
                    reason: e.to_string(),
                })?;
                Some(LabelVocabulary::from_lines(&text))
            }
        };
        if !(self.eval.rouge_beta.is_finite() && self.eval.rouge_beta > 0.0) {
            return Err(ConfigError::Invalid(format!("rouge_beta must be positive, got {}", self.eval.rouge_beta)));
        }
        Ok(EvalConfig {
            spec: TemplateSpec::chest_xray(),
            averaging: self.eval.averaging,
            bleu: self.eval.bleu,
            rouge_beta: self.eval.rouge_beta,
            label_f1: self.eval.label_f1,
            label_vocabulary,
            negatives: self.negative_patterns()?,
            scorer_options: self.scorer.options.clone(),
        })
    }
}
