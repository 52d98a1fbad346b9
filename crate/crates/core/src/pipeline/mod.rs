//! Experiment orchestration: closed-domain baseline, open-domain runs,
//! perturbation sweeps and open-domain training-set export.

mod config;
mod store;

use std::collections::HashMap;
use std::fs::File;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{
    DatasetSection, ExperimentConfig, MetricsConfig, RetrieverConfig, RetrieverKind,
    SimilarityKind, SweepConfig, TransformerConfig, SUMMARIZER_ENDPOINT_ENV,
    TRANSFORMER_ENDPOINT_ENV,
};
pub use store::{read_records, unix_now, ConditionEntry, Manifest, RunStore, MANIFEST_FILE};

use crate::baselines::{baseline_summary, BaselineError, BaselineKind};
use crate::corpus::{
    build_index, load_dataset, write_dataset, CorpusError, Dataset, Document, DocumentIndex,
    Example, IndexError, Split,
};
use crate::gateway::{Gateway, SummaryRequest};
use crate::metrics::{score_summary, ExampleScores, MetricReport, MetricsError, SummaryScores};
use crate::perturbation::{
    self, DocumentTransformer, PerturbationKind, PerturbationSpec, Provenance, Selection,
    SimilarityScorer,
};
use crate::retrieval::{
    bm25_rank, build_pseudo_query, count_retrieval_errors, dense_rank, resolve_k,
    retrieval_pr_at_k, EmbeddingStore, ErrorTally, RankedRetrieval, RetrievalError,
};
use crate::text::TokenizerConfig;

pub const BASELINE_CONDITION: &str = "baseline";
pub const OPEN_DOMAIN_CONDITION: &str = "open-domain";
pub const SWEEP_CSV: &str = "sweep.csv";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("i/o: {0}")]
    Stream(#[from] io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error("baseline has no record for example {0}")]
    BaselineMismatch(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalRecord {
    pub k: usize,
    pub retrieved: Vec<String>,
    pub precision: f64,
    pub recall: f64,
    pub errors: ErrorTally,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationRecord {
    pub spec: PerturbationSpec,
    pub provenance: Vec<Provenance>,
    pub removed: Vec<String>,
}

/// Outcome of one example under one condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleRecord {
    pub condition: String,
    pub example_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retrieval: Option<RetrievalRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationRecord>,
    /// Documents handed to the summarizer, in order.
    #[serde(default)]
    pub input_doc_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<SummaryScores>,
    /// ROUGE-Avg F1 minus the baseline's for the same example.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_rouge_avg: Option<f64>,
}

impl ExampleRecord {
    fn new(condition: &str, example_id: &str) -> Self {
        Self {
            condition: condition.to_string(),
            example_id: example_id.to_string(),
            error: None,
            retrieval: None,
            perturbation: None,
            input_doc_ids: Vec::new(),
            summary: None,
            model_id: None,
            scores: None,
            delta_rouge_avg: None,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none() && self.scores.is_some()
    }

    fn fail(mut self, error: impl ToString) -> Self {
        self.error = Some(error.to_string());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalSummary {
    pub examples: usize,
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub errors: ErrorTally,
}

/// Mean per-example delta and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaSummary {
    pub n: usize,
    pub mean: f64,
    pub ci68: f64,
}

impl DeltaSummary {
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                n,
                mean: 0.0,
                ci68: 0.0,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let ci68 = if n < 2 {
            0.0
        } else {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        };
        Self { n, mean, ci68 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub condition: String,
    pub config: ExperimentConfig,
    pub records: Vec<ExampleRecord>,
    /// Scores of successful records; significance against the baseline when one was given.
    pub report: MetricReport,
    pub retrieval: Option<RetrievalSummary>,
    pub delta: Option<DeltaSummary>,
}

impl ExperimentResult {
    /// Aggregate `records`, filling per-example deltas from `baseline`.
    pub fn from_records(
        condition: &str,
        config: &ExperimentConfig,
        mut records: Vec<ExampleRecord>,
        baseline: Option<&ExperimentResult>,
    ) -> Result<Self, PipelineError> {
        let base_scores: HashMap<&str, &SummaryScores> = baseline
            .map(|b| {
                b.report
                    .per_example
                    .iter()
                    .map(|e| (e.example_id.as_str(), &e.scores))
                    .collect()
            })
            .unwrap_or_default();
        for r in &mut records {
            r.delta_rouge_avg = match (&r.scores, base_scores.get(r.example_id.as_str())) {
                (Some(s), Some(b)) if r.error.is_none() => Some(s.rouge_avg - b.rouge_avg),
                _ => None,
            };
        }
        let per_example: Vec<ExampleScores> = records
            .iter()
            .filter(|r| r.is_ok())
            .map(|r| ExampleScores {
                example_id: r.example_id.clone(),
                scores: r.scores.expect("ok records carry scores"),
            })
            .collect();
        let mut report = MetricReport::new(per_example);

        let mut delta = None;
        if baseline.is_some() {
            let paired: Vec<&ExampleScores> = report
                .per_example
                .iter()
                .filter(|e| base_scores.contains_key(e.example_id.as_str()))
                .collect();
            if paired.len() >= 2 {
                let this = MetricReport::new(paired.iter().map(|e| (*e).clone()).collect());
                let that = MetricReport::new(
                    paired
                        .iter()
                        .map(|e| ExampleScores {
                            example_id: e.example_id.clone(),
                            scores: *base_scores[e.example_id.as_str()],
                        })
                        .collect(),
                );
                report.significance = MetricReport::compare(&that, &this)?;
            }
            let deltas: Vec<f64> = records.iter().filter_map(|r| r.delta_rouge_avg).collect();
            delta = Some(DeltaSummary::from_values(&deltas));
        }

        let retrieved: Vec<&RetrievalRecord> = records
            .iter()
            .filter_map(|r| r.retrieval.as_ref())
            .collect();
        let retrieval = (!retrieved.is_empty()).then(|| {
            let n = retrieved.len() as f64;
            let mut errors = ErrorTally::default();
            for r in &retrieved {
                errors += r.errors;
            }
            RetrievalSummary {
                examples: retrieved.len(),
                mean_precision: retrieved.iter().map(|r| r.precision).sum::<f64>() / n,
                mean_recall: retrieved.iter().map(|r| r.recall).sum::<f64>() / n,
                errors,
            }
        });

        Ok(Self {
            condition: condition.to_string(),
            config: config.clone(),
            records,
            report,
            retrieval,
            delta,
        })
    }

    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| !r.is_ok()).count()
    }

    /// Reload a finished condition from a run directory.
    pub fn load(
        store: &RunStore,
        condition: &str,
        config: &ExperimentConfig,
        baseline: Option<&ExperimentResult>,
    ) -> Result<Self, PipelineError> {
        let records = read_records(&store.records_path(condition))?;
        Self::from_records(condition, config, records, baseline)
    }
}

/// Persisted aggregate of one condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: String,
    pub examples: usize,
    pub failed: usize,
    pub metrics: MetricReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retrieval: Option<RetrievalSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_rouge_avg: Option<DeltaSummary>,
}

/// One row of the sweep CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub kind: PerturbationKind,
    pub selection: Selection,
    pub fraction: f64,
    pub mean_delta: f64,
    pub ci68: f64,
}

pub fn perturbation_condition(
    kind: PerturbationKind,
    selection: Selection,
    fraction: f64,
) -> String {
    format!("perturb-{kind}-{selection}-{fraction:.2}")
}

pub fn write_sweep_csv(writer: impl io::Write, points: &[SweepPoint]) -> Result<(), PipelineError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["kind", "selection", "fraction", "mean_delta", "ci68"])?;
    for p in points {
        w.write_record([
            p.kind.to_string(),
            p.selection.to_string(),
            p.fraction.to_string(),
            p.mean_delta.to_string(),
            p.ci68.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// A loaded dataset plus everything needed to run conditions over it.
pub struct Experiment {
    config: ExperimentConfig,
    dataset: Dataset,
    gateway: Gateway,
    transformer: Option<Gateway>,
    embeddings: Option<EmbeddingStore>,
    index: OnceLock<DocumentIndex>,
    store: RunStore,
    pool: rayon::ThreadPool,
}

impl Experiment {
    /// Load the dataset (and embeddings, if configured) named by `config`.
    pub fn load(config: ExperimentConfig) -> Result<Self, PipelineError> {
        let dataset = load_dataset(&config.dataset.path, &config.dataset.options)?;
        let embeddings = match &config.retriever.embeddings {
            Some(path) => Some(EmbeddingStore::load(path)?),
            None => None,
        };
        Self::from_parts(config, dataset, embeddings)
    }

    pub fn from_parts(
        config: ExperimentConfig,
        dataset: Dataset,
        embeddings: Option<EmbeddingStore>,
    ) -> Result<Self, PipelineError> {
        config.validate()?;
        if !dataset.has_split(config.split) {
            return Err(PipelineError::Config(format!(
                "dataset {} has no {} split",
                dataset.name, config.split
            )));
        }
        let store = RunStore::open(&config.output_dir)?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.summarizer.max_in_flight)
            .build()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        Ok(Self {
            gateway: Gateway::new(config.summarizer.clone()),
            transformer: config
                .transformer
                .as_ref()
                .map(|t| Gateway::new(t.as_spec())),
            config,
            dataset,
            embeddings,
            index: OnceLock::new(),
            store,
            pool,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn store(&self) -> &RunStore {
        &self.store
    }

    /// Index over every document of every split, built on first use.
    pub fn index(&self) -> &DocumentIndex {
        self.index
            .get_or_init(|| build_index(&self.dataset, &TokenizerConfig::default()))
    }

    /// Use a prebuilt index instead of building one.
    pub fn with_index(self, index: DocumentIndex) -> Self {
        let _ = self.index.set(index);
        self
    }

    pub fn examples(&self, split: Split) -> Vec<&Example> {
        self.dataset.split(split).collect()
    }

    fn scorer(&self) -> SimilarityScorer<'_> {
        match (self.config.perturbation.similarity, &self.embeddings) {
            (SimilarityKind::Embedding, Some(store)) => SimilarityScorer::Embedding(store),
            _ => SimilarityScorer::Lexical,
        }
    }

    /// Rank the index for one example down to `cutoff` documents.
    pub fn rank(&self, example: &Example, cutoff: usize) -> Result<RankedRetrieval, PipelineError> {
        Ok(match self.config.retriever.kind {
            RetrieverKind::Sparse => {
                let query = build_pseudo_query(example, self.config.dataset.options.query_source)?;
                bm25_rank(self.index(), &query, cutoff, &self.config.retriever.bm25)?
            }
            RetrieverKind::Dense => {
                let store = self.embeddings.as_ref().ok_or_else(|| {
                    PipelineError::Config("dense retrieval needs embeddings".into())
                })?;
                dense_rank(store, &example.example_id, cutoff)?
            }
        })
    }

    /// Rank the index for one example at its resolved k.
    pub fn retrieve(&self, example: &Example) -> Result<(RankedRetrieval, usize), PipelineError> {
        let k = resolve_k(self.config.top_k, &self.dataset, example);
        Ok((self.rank(example, k)?, k))
    }

    /// Summarize `docs` and score the result into `rec`.
    fn summarize_into(
        &self,
        example: &Example,
        docs: &[&Document],
        mut rec: ExampleRecord,
    ) -> ExampleRecord {
        rec.input_doc_ids = docs.iter().map(|d| d.doc_id.clone()).collect();
        let request = SummaryRequest {
            documents: docs.iter().map(|d| d.text.clone()).collect(),
            additional_input: example.additional_input.clone(),
            max_words: None,
        };
        match self.gateway.summarize(&request) {
            Ok(resp) => {
                rec.scores = Some(score_summary(
                    &resp.summary,
                    &example.reference_summary,
                    self.config.metrics.stem,
                ));
                rec.summary = Some(resp.summary);
                rec.model_id = Some(resp.model_id);
                rec
            }
            Err(e) => rec.fail(e),
        }
    }

    /// Run `work` over the evaluation split, resuming from records on disk,
    /// then persist and aggregate.
    fn run_condition<F>(
        &self,
        condition: &str,
        baseline: Option<&ExperimentResult>,
        work: F,
    ) -> Result<ExperimentResult, PipelineError>
    where
        F: Fn(&Example, ExampleRecord) -> ExampleRecord + Sync,
    {
        let started_at = unix_now();
        let examples = self.examples(self.config.split);
        let done = self.store.completed(condition)?;
        let partial = self.store.partial_writer(condition)?;
        let records: Vec<Result<ExampleRecord, PipelineError>> = self.pool.install(|| {
            examples
                .par_iter()
                .map(|ex| {
                    if let Some(rec) = done.get(&ex.example_id) {
                        return Ok(rec.clone());
                    }
                    let rec = work(ex, ExampleRecord::new(condition, &ex.example_id));
                    partial.append(&rec)?;
                    Ok(rec)
                })
                .collect()
        });
        let records = records.into_iter().collect::<Result<Vec<_>, _>>()?;
        let resumed = examples
            .iter()
            .filter(|e| done.contains_key(&e.example_id))
            .count();

        let result = ExperimentResult::from_records(condition, &self.config, records, baseline)?;
        self.store.finish(condition, &result.records)?;
        self.persist_report(&result)?;
        let failed = result.failures();
        self.store.record_condition(
            condition,
            ConditionEntry {
                examples: result.records.len(),
                succeeded: result.records.len() - failed,
                failed,
                resumed,
                started_at,
                finished_at: unix_now(),
            },
        )?;
        Ok(result)
    }

    fn persist_report(&self, result: &ExperimentResult) -> Result<(), PipelineError> {
        let report = ConditionReport {
            condition: result.condition.clone(),
            examples: result.records.len(),
            failed: result.failures(),
            metrics: result.report.clone(),
            retrieval: result.retrieval,
            delta_rouge_avg: result.delta,
        };
        let name = &result.condition;
        self.store
            .write_json(&self.store.path(&format!("{name}.report.json")), &report)?;
        self.store
            .write_atomic(&self.store.path(&format!("{name}.csv")), |w| {
                result.report.write_csv(w)?;
                Ok(())
            })
    }

    fn check_baseline(&self, baseline: &ExperimentResult) -> Result<(), PipelineError> {
        let covered: std::collections::HashSet<&str> = baseline
            .records
            .iter()
            .map(|r| r.example_id.as_str())
            .collect();
        match self
            .examples(self.config.split)
            .iter()
            .find(|e| !covered.contains(e.example_id.as_str()))
        {
            Some(e) => Err(PipelineError::BaselineMismatch(e.example_id.clone())),
            None => Ok(()),
        }
    }

    /// Summarize every example's ground-truth documents.
    pub fn run_baseline(&self) -> Result<ExperimentResult, PipelineError> {
        self.run_condition(BASELINE_CONDITION, None, |ex, rec| {
            let docs: Vec<&Document> = ex.input_docs.iter().collect();
            self.summarize_into(ex, &docs, rec)
        })
    }

    /// Summarize every example's retrieved top-k documents.
    pub fn run_open_domain(
        &self,
        baseline: Option<&ExperimentResult>,
    ) -> Result<ExperimentResult, PipelineError> {
        if let Some(b) = baseline {
            self.check_baseline(b)?;
        }
        self.run_condition(OPEN_DOMAIN_CONDITION, baseline, |ex, mut rec| {
            let (ranking, k) = match self.retrieve(ex) {
                Ok(r) => r,
                Err(e) => return rec.fail(e),
            };
            let retrieved: Vec<&str> = ranking.top(k).collect();
            let (precision, recall) =
                match retrieval_pr_at_k(retrieved.iter().copied(), ex.doc_ids()) {
                    Ok(pr) => pr,
                    Err(e) => return rec.fail(e),
                };
            rec.retrieval = Some(RetrievalRecord {
                k,
                retrieved: retrieved.iter().map(|s| s.to_string()).collect(),
                precision,
                recall,
                errors: count_retrieval_errors(retrieved.iter().copied(), ex.doc_ids()),
            });
            let index = self.index();
            let docs: Option<Vec<&Document>> =
                retrieved.iter().map(|id| index.document(id)).collect();
            match docs {
                Some(docs) => self.summarize_into(ex, &docs, rec),
                None => rec.fail("retrieved a document that is not in the index"),
            }
        })
    }

    /// One perturbation condition.
    pub fn run_perturbation(
        &self,
        kind: PerturbationKind,
        selection: Selection,
        fraction: f64,
        baseline: &ExperimentResult,
    ) -> Result<ExperimentResult, PipelineError> {
        self.check_baseline(baseline)?;
        let spec = PerturbationSpec {
            kind,
            fraction,
            selection,
            seed: self.config.seed,
        };
        let scorer = self.scorer();
        let transformer = self
            .transformer
            .as_ref()
            .map(|g| g as &dyn DocumentTransformer);
        let condition = perturbation_condition(kind, selection, fraction);
        self.run_condition(
            &condition,
            Some(baseline),
            |ex, mut rec| match perturbation::apply(&spec, ex, self.index(), &scorer, transformer) {
                Ok(p) => {
                    rec.perturbation = Some(PerturbationRecord {
                        spec,
                        provenance: p.provenance.clone(),
                        removed: p.removed.clone(),
                    });
                    let docs: Vec<&Document> = p.perturbed_docs.iter().collect();
                    self.summarize_into(ex, &docs, rec)
                }
                Err(e) => rec.fail(e),
            },
        )
    }

    /// Every grid point of the configured sweep; writes the sweep CSV.
    pub fn run_perturbation_sweep(
        &self,
        baseline: &ExperimentResult,
    ) -> Result<(Vec<ExperimentResult>, Vec<SweepPoint>), PipelineError> {
        let grid = &self.config.perturbation;
        let mut results = Vec::new();
        let mut points = Vec::new();
        for &kind in &grid.kinds {
            for &selection in &grid.selections {
                for &fraction in &grid.fractions {
                    let result = self.run_perturbation(kind, selection, fraction, baseline)?;
                    let delta = result.delta.unwrap_or(DeltaSummary {
                        n: 0,
                        mean: 0.0,
                        ci68: 0.0,
                    });
                    points.push(SweepPoint {
                        kind,
                        selection,
                        fraction,
                        mean_delta: delta.mean,
                        ci68: delta.ci68,
                    });
                    results.push(result);
                }
            }
        }
        self.store
            .write_atomic(&self.store.path(SWEEP_CSV), |w| write_sweep_csv(w, &points))?;
        Ok((results, points))
    }

    /// Replace every train example's documents with its retrieved top-k and
    /// write the result as a dataset file. Returns the number of examples.
    pub fn export_open_domain_trainset(&self, out: &Path) -> Result<usize, PipelineError> {
        let train = self.examples(Split::Train);
        if train.is_empty() {
            return Err(PipelineError::Config(format!(
                "dataset {} has no train split",
                self.dataset.name
            )));
        }
        let index = self.index();
        let exported: Vec<Result<Example, PipelineError>> = self.pool.install(|| {
            train
                .par_iter()
                .map(|ex| {
                    let (ranking, k) = self.retrieve(ex)?;
                    let input_docs = ranking
                        .top(k)
                        .map(|id| {
                            index.document(id).cloned().ok_or_else(|| {
                                PipelineError::Config(format!(
                                    "retrieved document {id} is not in the index"
                                ))
                            })
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    Ok(Example {
                        input_docs,
                        ..(*ex).clone()
                    })
                })
                .collect()
        });
        let exported = exported.into_iter().collect::<Result<Vec<_>, _>>()?;
        if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        let file = File::create(out).map_err(|source| PipelineError::Io {
            path: out.to_path_buf(),
            source,
        })?;
        write_dataset(file, &exported)?;
        Ok(exported.len())
    }
}

/// Run or resume the baseline condition.
pub fn run_baseline(config: ExperimentConfig) -> Result<ExperimentResult, PipelineError> {
    Experiment::load(config)?.run_baseline()
}

/// Baseline followed by the open-domain condition.
pub fn run_open_domain(
    config: ExperimentConfig,
) -> Result<(ExperimentResult, ExperimentResult), PipelineError> {
    let exp = Experiment::load(config)?;
    let baseline = exp.run_baseline()?;
    let open = exp.run_open_domain(Some(&baseline))?;
    Ok((baseline, open))
}

pub fn run_perturbation_sweep(
    config: ExperimentConfig,
) -> Result<(ExperimentResult, Vec<ExperimentResult>, Vec<SweepPoint>), PipelineError> {
    let exp = Experiment::load(config)?;
    let baseline = exp.run_baseline()?;
    let (results, points) = exp.run_perturbation_sweep(&baseline)?;
    Ok((baseline, results, points))
}

pub fn export_open_domain_trainset(
    config: ExperimentConfig,
    out: &Path,
) -> Result<usize, PipelineError> {
    Experiment::load(config)?.export_open_domain_trainset(out)
}

/// Per-metric paired t-tests of `b` against `a`.
pub fn compare(a: &MetricReport, b: &MetricReport) -> Result<MetricReport, PipelineError> {
    let mut out = b.clone();
    out.significance = MetricReport::compare(a, b)?;
    Ok(out)
}

/// Score one heuristic baseline over a split.
pub fn heuristic_baseline_report(
    kind: BaselineKind,
    dataset: &Dataset,
    split: Split,
    stem: bool,
) -> Result<MetricReport, PipelineError> {
    let per_example = dataset
        .split(split)
        .map(|ex| {
            let summary = baseline_summary(kind, ex, dataset)?;
            Ok(ExampleScores {
                example_id: ex.example_id.clone(),
                scores: score_summary(&summary, &ex.reference_summary, stem),
            })
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    Ok(MetricReport::new(per_example))
}
