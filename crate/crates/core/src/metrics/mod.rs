//! Summary scoring (ROUGE) and the statistics used to compare conditions.
//!
//! All scores live in `[0, 1]`; scaling to percentages is left to whatever
//! presents them.

mod report;
mod rouge;
mod stats;

use std::io;

use thiserror::Error;

pub use report::{
    mean_scores, ExampleScores, MetricField, MetricReport, SignificanceRow, SIGNIFICANCE_LEVEL,
};
pub use rouge::{
    lcs_len, preprocess, rouge_avg, rouge_l, rouge_l_tokens, rouge_n, rouge_n_tokens, rouge_tokens,
    score_summary, RougeScore, SummaryScores,
};
pub use stats::{
    binomial_test, fleiss_kappa, incomplete_beta, ln_gamma, paired_t_test, student_t_two_sided,
    TestResult,
};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("ragged ratings matrix: {0}")]
    RaggedMatrix(String),
    #[error("example {0} has no counterpart in the other report")]
    UnpairedExample(String),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}
