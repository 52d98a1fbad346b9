//! Turn multi-document summarization datasets into open-domain benchmarks.
//!
//! The crate covers the whole retrieve-then-summarize loop:
//!
//! - [`corpus`]: canonical JSON Lines datasets and the cross-split [`corpus::DocumentIndex`]
//! - [`retrieval`]: BM25 and dense dot-product ranking, top-k strategies, P@K/R@K, error tallies
//! - [`perturbation`]: addition, deletion, replacement, duplication, sorting and backtranslation
//! - [`metrics`]: ROUGE-1/2/L, ROUGE-Avg and the paired t-test, binomial test and Fleiss' kappa
//! - [`baselines`]: heuristic reference summaries
//! - [`gateway`]: the summarizer wire protocol and builtin summarizers
//! - [`pipeline`]: experiment orchestration and persistence

pub mod baselines;
pub mod corpus;
pub mod gateway;
pub mod metrics;
pub mod perturbation;
pub mod pipeline;
pub mod retrieval;
pub mod stem;
pub mod text;
