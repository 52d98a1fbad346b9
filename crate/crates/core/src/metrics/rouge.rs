//! ROUGE-N and ROUGE-L with optional Porter stemming.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::stem::porter_stem;
use crate::text::tokenize;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl RougeScore {
    pub fn from_counts(overlap: usize, candidate_len: usize, reference_len: usize) -> Self {
        let precision = if candidate_len == 0 {
            0.0
        } else {
            overlap as f64 / candidate_len as f64
        };
        let recall = if reference_len == 0 {
            0.0
        } else {
            overlap as f64 / reference_len as f64
        };
        Self::from_pr(precision, recall)
    }

    pub fn from_pr(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            precision,
            recall,
            f1,
        }
    }
}

/// Leading/trailing whitespace stripped, newlines and tabs turned into
/// spaces, runs of spaces collapsed.
pub fn preprocess(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Lowercased tokens; with `stem`, tokens longer than three characters are
/// Porter-stemmed.
pub fn rouge_tokens(text: &str, stem: bool) -> Vec<String> {
    let tokens = tokenize(text);
    if !stem {
        return tokens;
    }
    tokens
        .into_iter()
        .map(|t| if t.len() > 3 { porter_stem(&t) } else { t })
        .collect()
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_default() += 1;
        }
    }
    counts
}

/// N-gram overlap with clipped counts, on pre-tokenized input.
pub fn rouge_n_tokens(candidate: &[String], reference: &[String], n: usize) -> RougeScore {
    assert!(n >= 1, "n-gram order must be positive");
    let cand = ngram_counts(candidate, n);
    let refc = ngram_counts(reference, n);
    let overlap = cand
        .iter()
        .map(|(g, c)| (*c).min(refc.get(g).copied().unwrap_or(0)))
        .sum();
    RougeScore::from_counts(
        overlap,
        candidate.len().saturating_sub(n - 1),
        reference.len().saturating_sub(n - 1),
    )
}

pub fn rouge_n(candidate: &str, reference: &str, n: usize, stem: bool) -> RougeScore {
    rouge_n_tokens(
        &rouge_tokens(candidate, stem),
        &rouge_tokens(reference, stem),
        n,
    )
}

/// Length of the longest common subsequence.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// LCS over the whole text as one token sequence (no sentence splitting).
pub fn rouge_l_tokens(candidate: &[String], reference: &[String]) -> RougeScore {
    RougeScore::from_counts(
        lcs_len(candidate, reference),
        candidate.len(),
        reference.len(),
    )
}

pub fn rouge_l(candidate: &str, reference: &str, stem: bool) -> RougeScore {
    rouge_l_tokens(
        &rouge_tokens(candidate, stem),
        &rouge_tokens(reference, stem),
    )
}

pub fn rouge_avg(r1_f1: f64, r2_f1: f64, rl_f1: f64) -> f64 {
    (r1_f1 + r2_f1 + rl_f1) / 3.0
}

/// ROUGE-1, ROUGE-2, ROUGE-L and their average F1 for one summary.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SummaryScores {
    pub rouge1: RougeScore,
    pub rouge2: RougeScore,
    #[serde(rename = "rougeL")]
    pub rouge_l: RougeScore,
    pub rouge_avg: f64,
}

/// Preprocess both texts and compute every ROUGE variant.
pub fn score_summary(candidate: &str, reference: &str, stem: bool) -> SummaryScores {
    let cand = rouge_tokens(&preprocess(candidate), stem);
    let refr = rouge_tokens(&preprocess(reference), stem);
    let rouge1 = rouge_n_tokens(&cand, &refr, 1);
    let rouge2 = rouge_n_tokens(&cand, &refr, 2);
    let rouge_l = rouge_l_tokens(&cand, &refr);
    SummaryScores {
        rouge1,
        rouge2,
        rouge_l,
        rouge_avg: rouge_avg(rouge1.f1, rouge2.f1, rouge_l.f1),
    }
}
