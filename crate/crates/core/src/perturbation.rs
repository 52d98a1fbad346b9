//! Document-level perturbations that simulate retrieval errors.
//!
//! Each perturbation edits an example's gold document set: adding irrelevant
//! documents from the rest of the index, deleting, replacing, duplicating or
//! reordering documents, or rewriting them through an external transformer
//! (backtranslation). Targets are picked either at random or by similarity to
//! the reference summary ("oracle").

use std::collections::{HashMap, HashSet};
use std::error::Error as StdError;
use std::fmt;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{Document, DocumentIndex, Example};
use crate::retrieval::{top_by_score, EmbeddingStore, RetrievalError};
use crate::text::TokenizerConfig;

#[derive(Debug, Error)]
pub enum PerturbationError {
    #[error("fraction {0} is outside [0, 1]")]
    InvalidFraction(f64),
    #[error("pool has {available} documents, {needed} needed")]
    PoolExhausted { needed: usize, available: usize },
    #[error("cannot select {needed} of {available} documents")]
    TooManyTargets { needed: usize, available: usize },
    #[error("backtranslation requires a document transformer")]
    TransformerUnavailable,
    #[error("document transformer failed: {0}")]
    Transformer(#[source] Box<dyn StdError + Send + Sync>),
    #[error("similarity: {0}")]
    Similarity(#[from] RetrievalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerturbationKind {
    Addition,
    Deletion,
    Replacement,
    Duplication,
    Sorting,
    Backtranslation,
}

impl PerturbationKind {
    pub const ALL: [PerturbationKind; 6] = [
        PerturbationKind::Addition,
        PerturbationKind::Deletion,
        PerturbationKind::Replacement,
        PerturbationKind::Duplication,
        PerturbationKind::Sorting,
        PerturbationKind::Backtranslation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PerturbationKind::Addition => "addition",
            PerturbationKind::Deletion => "deletion",
            PerturbationKind::Replacement => "replacement",
            PerturbationKind::Duplication => "duplication",
            PerturbationKind::Sorting => "sorting",
            PerturbationKind::Backtranslation => "backtranslation",
        }
    }
}

impl fmt::Display for PerturbationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PerturbationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown perturbation {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selection {
    Random,
    Oracle,
}

impl fmt::Display for Selection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Selection::Random => "random",
            Selection::Oracle => "oracle",
        })
    }
}

impl FromStr for Selection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(Selection::Random),
            "oracle" => Ok(Selection::Oracle),
            other => Err(format!("unknown selection {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub kind: PerturbationKind,
    pub fraction: f64,
    pub selection: Selection,
    pub seed: u64,
}

impl PerturbationSpec {
    pub fn validate(&self) -> Result<(), PerturbationError> {
        if !(0.0..=1.0).contains(&self.fraction) {
            return Err(PerturbationError::InvalidFraction(self.fraction));
        }
        Ok(())
    }
}

/// How a document ended up in a perturbed set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Kept,
    Added,
    Duplicated,
    Transformed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbedExample {
    pub example_id: String,
    pub perturbed_docs: Vec<Document>,
    pub applied: PerturbationSpec,
    /// One tag per entry of `perturbed_docs`.
    pub provenance: Vec<Provenance>,
    /// Gold documents dropped by deletion or replacement, in selection order.
    pub removed: Vec<String>,
}

/// Rewrites a document's text, e.g. by round-trip translation.
pub trait DocumentTransformer: Sync {
    fn transform(&self, text: &str) -> Result<String, Box<dyn StdError + Send + Sync>>;
}

/// Returns its input unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityTransformer;

impl DocumentTransformer for IdentityTransformer {
    fn transform(&self, text: &str) -> Result<String, Box<dyn StdError + Send + Sync>> {
        Ok(text.to_string())
    }
}

/// Similarity of a document to an example's reference summary.
#[derive(Debug, Clone, Copy, Default)]
pub enum SimilarityScorer<'a> {
    /// Cosine of unigram count vectors under the corpus tokenizer.
    #[default]
    Lexical,
    /// Dot product of the document vector with the example's query vector.
    Embedding(&'a EmbeddingStore),
}

impl SimilarityScorer<'_> {
    pub fn similarity(&self, doc: &Document, example: &Example) -> Result<f64, PerturbationError> {
        match self {
            SimilarityScorer::Lexical => {
                Ok(lexical_similarity(&doc.text, &example.reference_summary))
            }
            SimilarityScorer::Embedding(store) => {
                Ok(store.similarity(&doc.doc_id, &example.example_id)?)
            }
        }
    }
}

fn term_counts(tokens: Vec<String>) -> HashMap<String, u64> {
    let mut counts = HashMap::new();
    for t in tokens {
        *counts.entry(t).or_default() += 1;
    }
    counts
}

fn cosine_from_counts(dot: u64, norm_a: u64, norm_b: u64) -> f64 {
    if norm_a == 0 || norm_b == 0 {
        return 0.0;
    }
    dot as f64 / ((norm_a as f64).sqrt() * (norm_b as f64).sqrt())
}

/// Cosine similarity of unigram count vectors; 0 when either side has no tokens.
pub fn lexical_similarity(doc_text: &str, reference_text: &str) -> f64 {
    let tok = TokenizerConfig::default();
    let a = term_counts(tok.tokenize(doc_text));
    let b = term_counts(tok.tokenize(reference_text));
    let dot = a
        .iter()
        .map(|(t, c)| c * b.get(t).copied().unwrap_or(0))
        .sum();
    let na = a.values().map(|c| c * c).sum();
    let nb = b.values().map(|c| c * c).sum();
    cosine_from_counts(dot, na, nb)
}

/// Number of documents to perturb: `fraction * set_size` rounded half up.
/// Deletion never removes the last document.
pub fn n_from_fraction(fraction: f64, set_size: usize, kind: PerturbationKind) -> usize {
    let n = ((fraction * set_size as f64) + 0.5).floor().max(0.0) as usize;
    let cap = match kind {
        PerturbationKind::Deletion => set_size.saturating_sub(1),
        _ => set_size,
    };
    n.min(cap)
}

/// Independent RNG stream for one example and one purpose, so results do not
/// depend on the order examples are processed in.
fn rng_for(seed: u64, example_id: &str, purpose: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(example_id.as_bytes());
    h.update([0u8]);
    h.update(purpose.as_bytes());
    let digest = h.finalize();
    let mut bytes = [0u8; 32];
    bytes.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(bytes)
}

/// Positions (into `example.input_docs`) of the documents to perturb.
///
/// Oracle selection returns the `n` documents least similar to the reference,
/// ascending, ties by `doc_id`.
fn select_target_positions(
    example: &Example,
    n: usize,
    selection: Selection,
    scorer: &SimilarityScorer<'_>,
    seed: u64,
) -> Result<Vec<usize>, PerturbationError> {
    let docs = &example.input_docs;
    if n > docs.len() {
        return Err(PerturbationError::TooManyTargets {
            needed: n,
            available: docs.len(),
        });
    }
    match selection {
        Selection::Random => {
            let mut rng = rng_for(seed, &example.example_id, "targets");
            Ok(index::sample(&mut rng, docs.len(), n).into_vec())
        }
        Selection::Oracle => {
            let mut scored = docs
                .iter()
                .enumerate()
                .map(|(i, d)| Ok((i, scorer.similarity(d, example)?)))
                .collect::<Result<Vec<_>, PerturbationError>>()?;
            scored.sort_by(|a, b| {
                a.1.total_cmp(&b.1)
                    .then_with(|| docs[a.0].doc_id.cmp(&docs[b.0].doc_id))
            });
            Ok(scored.into_iter().take(n).map(|(i, _)| i).collect())
        }
    }
}

/// Gold documents to perturb, in selection order.
pub fn select_targets(
    example: &Example,
    n: usize,
    selection: Selection,
    scorer: &SimilarityScorer<'_>,
    seed: u64,
) -> Result<Vec<Document>, PerturbationError> {
    Ok(
        select_target_positions(example, n, selection, scorer, seed)?
            .into_iter()
            .map(|i| example.input_docs[i].clone())
            .collect(),
    )
}

/// Documents from the rest of the index (never from `example` itself).
///
/// Oracle selection returns the `n` pool documents most similar to the
/// reference, descending, ties by `doc_id`.
pub fn select_pool_docs(
    index: &DocumentIndex,
    example: &Example,
    n: usize,
    selection: Selection,
    scorer: &SimilarityScorer<'_>,
    seed: u64,
) -> Result<Vec<Document>, PerturbationError> {
    let own: HashSet<&str> = example.doc_ids().collect();
    let pool: Vec<u32> = index
        .documents()
        .iter()
        .enumerate()
        .filter(|(_, d)| {
            d.source_example_id != example.example_id && !own.contains(d.doc_id.as_str())
        })
        .map(|(i, _)| i as u32)
        .collect();
    if n > pool.len() {
        return Err(PerturbationError::PoolExhausted {
            needed: n,
            available: pool.len(),
        });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let docs = index.documents();
    let chosen: Vec<u32> = match selection {
        Selection::Random => {
            let mut rng = rng_for(seed, &example.example_id, "pool");
            index::sample(&mut rng, pool.len(), n)
                .into_iter()
                .map(|i| pool[i])
                .collect()
        }
        Selection::Oracle => {
            let sims = pool_similarities(index, example, &pool, scorer)?;
            let keyed = pool
                .iter()
                .zip(sims)
                .map(|(&d, s)| (d as usize, s))
                .collect();
            top_by_score(keyed, n)
                .into_iter()
                .map(|(d, _)| d as u32)
                .collect()
        }
    };
    Ok(chosen
        .into_iter()
        .map(|d| docs[d as usize].clone())
        .collect())
}

fn pool_similarities(
    index: &DocumentIndex,
    example: &Example,
    pool: &[u32],
    scorer: &SimilarityScorer<'_>,
) -> Result<Vec<f64>, PerturbationError> {
    match scorer {
        SimilarityScorer::Embedding(_) => pool
            .iter()
            .map(|&d| scorer.similarity(&index.documents()[d as usize], example))
            .collect(),
        SimilarityScorer::Lexical if *index.tokenizer() == TokenizerConfig::default() => {
            // Same cosine as `lexical_similarity`, with document-side counts
            // read from the postings instead of re-tokenizing every document.
            let reference = term_counts(index.tokenizer().tokenize(&example.reference_summary));
            let ref_norm: u64 = reference.values().map(|c| c * c).sum();
            let mut dots = vec![0u64; index.len()];
            for (term, qc) in &reference {
                for p in index.postings(term) {
                    dots[p.doc as usize] += qc * u64::from(p.tf);
                }
            }
            Ok(pool
                .iter()
                .map(|&d| cosine_from_counts(dots[d as usize], index.tf_sq_norm(d), ref_norm))
                .collect())
        }
        SimilarityScorer::Lexical => Ok(pool
            .iter()
            .map(|&d| {
                lexical_similarity(
                    &index.documents()[d as usize].text,
                    &example.reference_summary,
                )
            })
            .collect()),
    }
}

/// Apply one perturbation to an example's gold documents.
///
/// Kept documents stay in their original order; added or duplicated
/// documents follow them in selection order.
pub fn apply(
    spec: &PerturbationSpec,
    example: &Example,
    index: &DocumentIndex,
    scorer: &SimilarityScorer<'_>,
    transformer: Option<&dyn DocumentTransformer>,
) -> Result<PerturbedExample, PerturbationError> {
    spec.validate()?;
    let docs = &example.input_docs;
    let n = n_from_fraction(spec.fraction, docs.len(), spec.kind);
    let mut out = PerturbedExample {
        example_id: example.example_id.clone(),
        perturbed_docs: docs.clone(),
        applied: *spec,
        provenance: vec![Provenance::Kept; docs.len()],
        removed: Vec::new(),
    };
    if n == 0 {
        return Ok(out);
    }
    let targets = || select_target_positions(example, n, spec.selection, scorer, spec.seed);
    let pool = || select_pool_docs(index, example, n, spec.selection, scorer, spec.seed);

    match spec.kind {
        PerturbationKind::Addition => {
            for d in pool()? {
                out.perturbed_docs.push(d);
                out.provenance.push(Provenance::Added);
            }
        }
        PerturbationKind::Deletion | PerturbationKind::Replacement => {
            let removed = targets()?;
            let drop: HashSet<usize> = removed.iter().copied().collect();
            out.removed = removed.iter().map(|&i| docs[i].doc_id.clone()).collect();
            out.perturbed_docs = docs
                .iter()
                .enumerate()
                .filter(|(i, _)| !drop.contains(i))
                .map(|(_, d)| d.clone())
                .collect();
            out.provenance = vec![Provenance::Kept; out.perturbed_docs.len()];
            if spec.kind == PerturbationKind::Replacement {
                // i-th removed document is paired with the i-th added one
                for d in pool()? {
                    out.perturbed_docs.push(d);
                    out.provenance.push(Provenance::Added);
                }
            }
        }
        PerturbationKind::Duplication => {
            for i in targets()? {
                out.perturbed_docs.push(docs[i].clone());
                out.provenance.push(Provenance::Duplicated);
            }
        }
        PerturbationKind::Sorting => {
            let mut slots = targets()?;
            let mut moved = slots.clone();
            match spec.selection {
                Selection::Random => {
                    let mut rng = rng_for(spec.seed, &example.example_id, "sorting");
                    moved.shuffle(&mut rng);
                }
                Selection::Oracle => {
                    let sims = moved
                        .iter()
                        .map(|&i| Ok((i, scorer.similarity(&docs[i], example)?)))
                        .collect::<Result<HashMap<_, _>, PerturbationError>>()?;
                    moved.sort_by(|a, b| {
                        sims[b]
                            .total_cmp(&sims[a])
                            .then_with(|| docs[*a].doc_id.cmp(&docs[*b].doc_id))
                    });
                }
            }
            slots.sort_unstable();
            for (slot, from) in slots.into_iter().zip(moved) {
                out.perturbed_docs[slot] = docs[from].clone();
            }
        }
        PerturbationKind::Backtranslation => {
            let transformer = transformer.ok_or(PerturbationError::TransformerUnavailable)?;
            for i in targets()? {
                let text = transformer
                    .transform(&docs[i].text)
                    .map_err(PerturbationError::Transformer)?;
                out.perturbed_docs[i] = Document {
                    text,
                    ..docs[i].clone()
                };
                out.provenance[i] = Provenance::Transformed;
            }
        }
    }
    Ok(out)
}
