//! Sparse and dense ranking over the document index, pseudo-queries, top-k
//! strategies, and retrieval evaluation.

mod bm25;
mod dense;
mod eval;

use std::cmp::Ordering;
use std::fmt;
use std::io::{self, Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Dataset, Example, QuerySource};

pub use bm25::{bm25_rank, Bm25Params};
pub use dense::{dense_rank, dot, EmbeddingStore, VectorKind};
pub use eval::{count_retrieval_errors, retrieval_pr_at_k, ErrorTally};

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("query for example {example_id} has no indexable terms")]
    EmptyQuery { example_id: String },
    #[error("no {kind} vector for {id}")]
    MissingVector { kind: &'static str, id: String },
    #[error("example {example_id} has no {field}")]
    MissingField {
        example_id: String,
        field: &'static str,
    },
    #[error("cutoff must be at least 1")]
    InvalidCutoff,
    #[error("gold set is empty")]
    EmptyGold,
    #[error("retrieved set is empty")]
    EmptyRetrieval,
    #[error("embedding store: {0}")]
    Store(String),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub example_id: String,
    pub text: String,
}

/// Use the reference summary (or, for background-style datasets, the
/// additional input) as the query for an example.
pub fn build_pseudo_query(example: &Example, source: QuerySource) -> Result<Query, RetrievalError> {
    let text = match source {
        QuerySource::ReferenceSummary => example.reference_summary.clone(),
        QuerySource::AdditionalInput => example
            .additional_input
            .clone()
            .filter(|t| !t.trim().is_empty())
            .ok_or_else(|| RetrievalError::MissingField {
                example_id: example.example_id.clone(),
                field: "additional_input",
            })?,
    };
    Ok(Query {
        example_id: example.example_id.clone(),
        text,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDoc {
    pub doc_id: String,
    pub score: f64,
}

/// Documents ordered by non-increasing score; ties by ascending `doc_id`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedRetrieval {
    pub example_id: String,
    pub retriever_id: String,
    pub ranked: Vec<ScoredDoc>,
}

impl RankedRetrieval {
    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.ranked.iter().map(|d| d.doc_id.as_str())
    }

    pub fn top(&self, k: usize) -> impl Iterator<Item = &str> {
        self.doc_ids().take(k)
    }
}

/// Keep the `cutoff` best `(key, score)` pairs, ordered by score descending and
/// then key ascending. Keys must already order like doc ids.
pub(crate) fn top_by_score(mut items: Vec<(usize, f64)>, cutoff: usize) -> Vec<(usize, f64)> {
    let cmp = |a: &(usize, f64), b: &(usize, f64)| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(Ordering::Equal)
            .then(a.0.cmp(&b.0))
    };
    if cutoff < items.len() {
        items.select_nth_unstable_by(cutoff - 1, cmp);
        items.truncate(cutoff);
    }
    items.sort_unstable_by(cmp);
    items
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopKStrategy {
    #[default]
    Max,
    Mean,
    Oracle,
}

impl fmt::Display for TopKStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TopKStrategy::Max => "max",
            TopKStrategy::Mean => "mean",
            TopKStrategy::Oracle => "oracle",
        })
    }
}

impl FromStr for TopKStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "max" => Ok(TopKStrategy::Max),
            "mean" => Ok(TopKStrategy::Mean),
            "oracle" => Ok(TopKStrategy::Oracle),
            other => Err(format!("unknown top-k strategy {other:?}")),
        }
    }
}

/// Number of retrieved documents to keep for one example.
///
/// `max` uses the largest input set in the dataset, `mean` the rounded
/// (half-up) mean over the example's split, `oracle` the example's own gold
/// set size. Always at least 1.
pub fn resolve_k(strategy: TopKStrategy, dataset: &Dataset, example: &Example) -> usize {
    let k = match strategy {
        TopKStrategy::Max => dataset.stats().max_docs,
        TopKStrategy::Mean => round_half_up(dataset.split_stats(example.split).mean_docs),
        TopKStrategy::Oracle => example.input_docs.len(),
    };
    k.max(1)
}

pub(crate) fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor().max(0.0) as usize
}

/// Write rankings as `example_id,rank,doc_id,score` with 1-based ranks.
pub fn write_rankings<'a>(
    writer: impl Write,
    rankings: impl IntoIterator<Item = &'a RankedRetrieval>,
) -> Result<(), RetrievalError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["example_id", "rank", "doc_id", "score"])?;
    for r in rankings {
        for (i, d) in r.ranked.iter().enumerate() {
            w.write_record([
                r.example_id.as_str(),
                &(i + 1).to_string(),
                d.doc_id.as_str(),
                &d.score.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct RankRow {
    example_id: String,
    rank: usize,
    doc_id: String,
    score: f64,
}

/// Read rankings written by [`write_rankings`]. Rows are regrouped per example
/// in first-appearance order and re-sorted by rank.
pub fn read_rankings(
    reader: impl Read,
    retriever_id: &str,
) -> Result<Vec<RankedRetrieval>, RetrievalError> {
    let mut r = csv::Reader::from_reader(reader);
    let mut out: Vec<(RankedRetrieval, Vec<usize>)> = Vec::new();
    for row in r.deserialize() {
        let row: RankRow = row?;
        let idx = match out
            .iter()
            .position(|(rr, _)| rr.example_id == row.example_id)
        {
            Some(i) => i,
            None => {
                out.push((
                    RankedRetrieval {
                        example_id: row.example_id.clone(),
                        retriever_id: retriever_id.to_string(),
                        ranked: Vec::new(),
                    },
                    Vec::new(),
                ));
                out.len() - 1
            }
        };
        let (rr, ranks) = &mut out[idx];
        rr.ranked.push(ScoredDoc {
            doc_id: row.doc_id,
            score: row.score,
        });
        ranks.push(row.rank);
    }
    Ok(out
        .into_iter()
        .map(|(mut rr, ranks)| {
            let mut paired: Vec<_> = ranks.into_iter().zip(rr.ranked).collect();
            paired.sort_by_key(|(rank, _)| *rank);
            rr.ranked = paired.into_iter().map(|(_, d)| d).collect();
            rr
        })
        .collect())
}
