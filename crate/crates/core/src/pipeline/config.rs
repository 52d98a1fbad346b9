use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::corpus::{DatasetConfig, Split};
use crate::gateway::{Endpoint, SummarizerSpec};
use crate::perturbation::{PerturbationKind, Selection};
use crate::retrieval::{Bm25Params, TopKStrategy};

/// Overrides `summarizer.endpoint` when set.
pub const SUMMARIZER_ENDPOINT_ENV: &str = "ODMDS_SUMMARIZER_ENDPOINT";
/// Overrides `transformer.endpoint` when set.
pub const TRANSFORMER_ENDPOINT_ENV: &str = "ODMDS_TRANSFORMER_ENDPOINT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSection {
    pub path: PathBuf,
    #[serde(flatten)]
    pub options: DatasetConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RetrieverKind {
    #[default]
    Sparse,
    Dense,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrieverConfig {
    pub kind: RetrieverKind,
    pub bm25: Bm25Params,
    /// Embedding store file; required for dense retrieval and embedding similarity.
    pub embeddings: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimilarityKind {
    #[default]
    Lexical,
    Embedding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub kinds: Vec<PerturbationKind>,
    pub selections: Vec<Selection>,
    pub fractions: Vec<f64>,
    pub similarity: SimilarityKind,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            kinds: vec![
                PerturbationKind::Addition,
                PerturbationKind::Deletion,
                PerturbationKind::Replacement,
                PerturbationKind::Duplication,
                PerturbationKind::Sorting,
            ],
            selections: vec![Selection::Random, Selection::Oracle],
            fractions: (0..=10).map(|i| i as f64 / 10.0).collect(),
            similarity: SimilarityKind::Lexical,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsConfig {
    pub stem: bool,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self { stem: true }
    }
}

fn default_transform_timeout() -> f64 {
    120.0
}

fn default_transform_retries() -> u32 {
    2
}

/// Endpoint used for backtranslation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformerConfig {
    pub endpoint: Endpoint,
    #[serde(default = "default_transform_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_transform_retries")]
    pub retries: u32,
}

impl TransformerConfig {
    pub fn as_spec(&self) -> SummarizerSpec {
        SummarizerSpec {
            id: "transformer".to_string(),
            endpoint: self.endpoint.clone(),
            max_input_tokens: usize::MAX,
            max_words_hint: None,
            timeout_secs: self.timeout_secs,
            retries: self.retries,
            max_in_flight: 1,
        }
    }
}

fn default_split() -> Split {
    Split::Test
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSection,
    #[serde(default)]
    pub retriever: RetrieverConfig,
    #[serde(default)]
    pub top_k: TopKStrategy,
    /// Split that is evaluated.
    #[serde(default = "default_split")]
    pub split: Split,
    pub summarizer: SummarizerSpec,
    #[serde(default)]
    pub transformer: Option<TransformerConfig>,
    #[serde(default)]
    pub perturbation: SweepConfig,
    #[serde(default)]
    pub metrics: MetricsConfig,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentConfig {
    /// Read a TOML (`.toml`) or JSON config. Relative paths are resolved
    /// against the config file's directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(|source| PipelineError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config: ExperimentConfig = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => {
                serde_json::from_str(&text).map_err(|e| PipelineError::Config(e.to_string()))?
            }
            _ => toml::from_str(&text).map_err(|e| PipelineError::Config(e.to_string()))?,
        };
        if let Some(base) = path.parent() {
            config.resolve_paths(base);
        }
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.dataset.path);
        fix(&mut self.output_dir);
        if let Some(e) = self.retriever.embeddings.as_mut() {
            fix(e);
        }
    }

    /// Apply endpoint overrides from the environment.
    pub fn apply_env(&mut self) -> Result<(), PipelineError> {
        if let Ok(url) = std::env::var(SUMMARIZER_ENDPOINT_ENV) {
            self.summarizer.endpoint = url
                .parse()
                .map_err(|e| PipelineError::Config(format!("{e}")))?;
        }
        if let Ok(url) = std::env::var(TRANSFORMER_ENDPOINT_ENV) {
            let endpoint: Endpoint = url
                .parse()
                .map_err(|e| PipelineError::Config(format!("{e}")))?;
            match self.transformer.as_mut() {
                Some(t) => t.endpoint = endpoint,
                None => {
                    self.transformer = Some(TransformerConfig {
                        endpoint,
                        timeout_secs: default_transform_timeout(),
                        retries: default_transform_retries(),
                    })
                }
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if let Some(f) = self
            .perturbation
            .fractions
            .iter()
            .find(|f| !(0.0..=1.0).contains(*f))
        {
            return bad(format!("perturbation fraction {f} is outside [0, 1]"));
        }
        if self.summarizer.max_input_tokens == 0 {
            return bad("summarizer.max_input_tokens must be positive".into());
        }
        if self.summarizer.max_in_flight == 0 {
            return bad("summarizer.max_in_flight must be positive".into());
        }
        let needs_store = self.retriever.kind == RetrieverKind::Dense
            || self.perturbation.similarity == SimilarityKind::Embedding;
        if needs_store && self.retriever.embeddings.is_none() {
            return bad(
                "retriever.embeddings is required for dense retrieval or embedding similarity"
                    .into(),
            );
        }
        if self
            .perturbation
            .kinds
            .contains(&PerturbationKind::Backtranslation)
            && self.transformer.is_none()
        {
            return bad("backtranslation needs a [transformer] endpoint".into());
        }
        Ok(())
    }
}
