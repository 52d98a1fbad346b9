//! Okapi BM25 over the inverted index.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{top_by_score, Query, RankedRetrieval, RetrievalError, ScoredDoc};
use crate::corpus::DocumentIndex;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Bm25Params {
    /// Term-frequency saturation.
    pub k1: f64,
    /// Length normalization strength.
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    /// `ln(1 + (N - df + 0.5) / (df + 0.5))`, always positive.
    pub fn idf(&self, num_docs: usize, df: usize) -> f64 {
        let n = num_docs as f64;
        let df = df as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }
}

/// Rank every indexed document against the query and keep the best `cutoff`.
///
/// Each query token contributes once, so a term repeated in the query weighs
/// proportionally more. Terms absent from the index contribute nothing;
/// documents matching no term score 0 and fall back to `doc_id` order.
pub fn bm25_rank(
    index: &DocumentIndex,
    query: &Query,
    cutoff: usize,
    params: &Bm25Params,
) -> Result<RankedRetrieval, RetrievalError> {
    if cutoff == 0 {
        return Err(RetrievalError::InvalidCutoff);
    }
    let tokens = index.tokenizer().tokenize(&query.text);
    if tokens.is_empty() {
        return Err(RetrievalError::EmptyQuery {
            example_id: query.example_id.clone(),
        });
    }
    let mut query_tf: BTreeMap<String, u32> = BTreeMap::new();
    for t in tokens {
        *query_tf.entry(t).or_default() += 1;
    }

    let n = index.len();
    let avg_len = if index.avg_doc_len() > 0.0 {
        index.avg_doc_len()
    } else {
        1.0
    };
    let mut scores = vec![0.0f64; n];
    for (term, qtf) in &query_tf {
        let postings = index.postings(term);
        if postings.is_empty() {
            continue;
        }
        let idf = params.idf(n, postings.len());
        for p in postings {
            let tf = p.tf as f64;
            let dl = index.doc_len(p.doc) as f64;
            let norm = params.k1 * (1.0 - params.b + params.b * dl / avg_len);
            scores[p.doc as usize] += *qtf as f64 * idf * (tf * (params.k1 + 1.0)) / (tf + norm);
        }
    }

    let docs = index.documents();
    let ranked = top_by_score(scores.into_iter().enumerate().collect(), cutoff)
        .into_iter()
        .map(|(i, score)| ScoredDoc {
            doc_id: docs[i].doc_id.clone(),
            score,
        })
        .collect();
    Ok(RankedRetrieval {
        example_id: query.example_id.clone(),
        retriever_id: format!("bm25(k1={},b={})", params.k1, params.b),
        ranked,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, Split};
    use crate::text::TokenizerConfig;

    fn index(texts: &[(&str, &str)]) -> DocumentIndex {
        DocumentIndex::from_documents(
            texts.iter().map(|(id, t)| Document {
                doc_id: id.to_string(),
                text: t.to_string(),
                source_example_id: "e".into(),
                source_split: Split::Test,
            }),
            &TokenizerConfig::default(),
        )
    }

    fn query(text: &str) -> Query {
        Query {
            example_id: "q".into(),
            text: text.into(),
        }
    }

    #[test]
    fn unique_term_ranks_its_document_first() {
        let idx = index(&[("a", "red blue"), ("b", "green blue"), ("c", "blue blue")]);
        let r = bm25_rank(&idx, &query("green"), 3, &Bm25Params::default()).unwrap();
        assert_eq!(r.ranked[0].doc_id, "b");
        assert!(r.ranked[0].score > 0.0);
        assert_eq!(r.ranked[1].score, 0.0);
    }

    #[test]
    fn hand_computed_scores() {
        // N = 5, avgdl = (2 + 2 + 4 + 1 + 1) / 5 = 2
        let idx = index(&[
            ("d1", "x y"),
            ("d2", "x x"),
            ("d3", "y y y z"),
            ("d4", "w"),
            ("d5", "z"),
        ]);
        let p = Bm25Params::default();
        let r = bm25_rank(&idx, &query("x"), 5, &p).unwrap();
        // idf(df=2) = ln(1 + 3.5 / 2.5)
        let idf = (1.0f64 + 3.5 / 2.5).ln();
        let w = |tf: f64, dl: f64| idf * tf * 2.2 / (tf + 1.2 * (0.25 + 0.75 * dl / 2.0));
        assert_eq!(r.ranked[0].doc_id, "d2");
        assert!((r.ranked[0].score - w(2.0, 2.0)).abs() < 1e-12);
        assert_eq!(r.ranked[1].doc_id, "d1");
        assert!((r.ranked[1].score - w(1.0, 2.0)).abs() < 1e-12);
        let rest: Vec<_> = r.doc_ids().skip(2).collect();
        assert_eq!(rest, ["d3", "d4", "d5"]);
    }

    #[test]
    fn absent_terms_fall_back_to_doc_id_order() {
        let idx = index(&[("c", "one"), ("a", "two"), ("b", "three")]);
        let r = bm25_rank(&idx, &query("nothing here"), 2, &Bm25Params::default()).unwrap();
        assert_eq!(r.doc_ids().collect::<Vec<_>>(), ["a", "b"]);
        assert!(r.ranked.iter().all(|d| d.score == 0.0));
    }

    #[test]
    fn empty_query_and_zero_cutoff_rejected() {
        let idx = index(&[("a", "x")]);
        assert!(matches!(
            bm25_rank(&idx, &query(" ... "), 1, &Bm25Params::default()),
            Err(RetrievalError::EmptyQuery { .. })
        ));
        assert!(matches!(
            bm25_rank(&idx, &query("x"), 0, &Bm25Params::default()),
            Err(RetrievalError::InvalidCutoff)
        ));
    }
}
