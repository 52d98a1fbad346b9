//! Perturbation invariants checked case by case.

use std::collections::{HashMap, HashSet};
use std::error::Error;

use odmds::corpus::{build_index, Document, DocumentIndex, Example};
use odmds::perturbation::{
    apply, lexical_similarity, n_from_fraction, DocumentTransformer, PerturbationKind,
    PerturbationSpec, PerturbedExample, Provenance, Selection, SimilarityScorer,
};
use odmds::text::TokenizerConfig;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{dataset, example, random_text};

/// Reverses word order, so transformed documents are recognisable.
pub struct Reverse;

impl DocumentTransformer for Reverse {
    fn transform(&self, text: &str) -> Result<String, Box<dyn Error + Send + Sync>> {
        Ok(text.split_whitespace().rev().collect::<Vec<_>>().join(" "))
    }
}

#[derive(Debug, Clone)]
pub struct Case {
    pub examples: Vec<Example>,
    pub kind: PerturbationKind,
    pub fraction: f64,
    pub selection: Selection,
    pub seed: u64,
}

pub fn case_strategy() -> impl Strategy<Value = Case> {
    (
        prop::collection::vec(1usize..8, 2..6),
        0usize..PerturbationKind::ALL.len(),
        prop_oneof![Just(0.0), Just(1.0), 0.0f64..=1.0],
        any::<bool>(),
        any::<u64>(),
        any::<u64>(),
    )
        .prop_map(|(sizes, kind, fraction, oracle, seed, text_seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(text_seed);
            let examples = sizes
                .iter()
                .enumerate()
                .map(|(e, &n)| {
                    let docs: Vec<String> =
                        (0..n).map(|_| random_text(&mut rng, 25, 1, 15)).collect();
                    let reference = random_text(&mut rng, 25, 1, 10);
                    example(&format!("e{e}"), &docs, &reference)
                })
                .collect();
            Case {
                examples,
                kind: PerturbationKind::ALL[kind],
                fraction,
                selection: if oracle {
                    Selection::Oracle
                } else {
                    Selection::Random
                },
                seed,
            }
        })
}

fn sim(doc: &Document, ex: &Example) -> f64 {
    lexical_similarity(&doc.text, &ex.reference_summary)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ids(docs: &[Document]) -> Vec<&str> {
    docs.iter().map(|d| d.doc_id.as_str()).collect()
}

/// Oracle pool picks must dominate every pool document left behind.
fn check_oracle_pool(
    index: &DocumentIndex,
    ex: &Example,
    added: &[&Document],
) -> Result<(), String> {
    let chosen: HashSet<&str> = added.iter().map(|d| d.doc_id.as_str()).collect();
    let own: HashSet<&str> = ex.doc_ids().collect();
    let best_left = index
        .documents()
        .iter()
        .filter(|d| !own.contains(d.doc_id.as_str()) && !chosen.contains(d.doc_id.as_str()))
        .map(|d| sim(d, ex))
        .fold(f64::NEG_INFINITY, f64::max);
    let worst_added = added
        .iter()
        .map(|d| sim(d, ex))
        .fold(f64::INFINITY, f64::min);
    ensure(worst_added >= best_left, || {
        format!("oracle pool pick {worst_added} below unchosen {best_left}")
    })?;
    let sims: Vec<f64> = added.iter().map(|d| sim(d, ex)).collect();
    ensure(sims.windows(2).all(|w| w[0] >= w[1]), || {
        format!("oracle additions not descending: {sims:?}")
    })
}

/// Oracle targets must be no more similar than any untouched gold document.
fn check_oracle_targets(ex: &Example, targets: &HashSet<&str>) -> Result<(), String> {
    let (hit, rest): (Vec<&Document>, Vec<&Document>) = ex
        .input_docs
        .iter()
        .partition(|d| targets.contains(d.doc_id.as_str()));
    let worst_rest = rest
        .iter()
        .map(|d| sim(d, ex))
        .fold(f64::INFINITY, f64::min);
    let best_hit = hit
        .iter()
        .map(|d| sim(d, ex))
        .fold(f64::NEG_INFINITY, f64::max);
    ensure(best_hit <= worst_rest, || {
        format!("oracle target similarity {best_hit} above kept {worst_rest}")
    })
}

fn check_one(
    case: &Case,
    index: &DocumentIndex,
    ex: &Example,
) -> Result<Option<PerturbedExample>, String> {
    let scorer = SimilarityScorer::Lexical;
    let gold = &ex.input_docs;
    let d = gold.len();

    for kind in PerturbationKind::ALL {
        let spec = PerturbationSpec {
            kind,
            fraction: 0.0,
            selection: case.selection,
            seed: case.seed,
        };
        let out = apply(&spec, ex, index, &scorer, Some(&Reverse)).map_err(|e| e.to_string())?;
        ensure(
            &out.perturbed_docs == gold && out.removed.is_empty(),
            || format!("fraction 0 changed {kind}"),
        )?;
        ensure(
            out.provenance.iter().all(|p| *p == Provenance::Kept),
            || "fraction 0 provenance".into(),
        )?;
    }

    let spec = PerturbationSpec {
        kind: case.kind,
        fraction: case.fraction,
        selection: case.selection,
        seed: case.seed,
    };
    let mut n = (case.fraction * d as f64 + 0.5).floor() as usize;
    if case.kind == PerturbationKind::Deletion {
        n = n.min(d - 1);
    }
    ensure(n == n_from_fraction(case.fraction, d, case.kind), || {
        "n_from_fraction".into()
    })?;
    let pool_size = index.len() - d;
    let result = apply(&spec, ex, index, &scorer, Some(&Reverse));
    let needs_pool = matches!(
        case.kind,
        PerturbationKind::Addition | PerturbationKind::Replacement
    );
    if needs_pool && n > pool_size {
        return ensure(result.is_err(), || "pool exhaustion not reported".into()).map(|_| None);
    }
    let out = result.map_err(|e| e.to_string())?;
    let again = apply(&spec, ex, index, &scorer, Some(&Reverse)).map_err(|e| e.to_string())?;
    ensure(out == again, || "same seed gave different output".into())?;

    let docs = &out.perturbed_docs;
    ensure(out.provenance.len() == docs.len(), || {
        "provenance length".into()
    })?;
    let gold_ids: HashSet<&str> = ex.doc_ids().collect();
    let added: Vec<&Document> = docs
        .iter()
        .zip(&out.provenance)
        .filter(|(_, p)| **p == Provenance::Added)
        .map(|(d, _)| d)
        .collect();
    let oracle = case.selection == Selection::Oracle;

    match case.kind {
        PerturbationKind::Addition => {
            ensure(docs.len() == d + n, || {
                format!("addition size {} != {}", docs.len(), d + n)
            })?;
            ensure(&docs[..d] == gold.as_slice(), || {
                "addition disturbed gold".into()
            })?;
            ensure(added.len() == n, || "addition provenance".into())?;
            let distinct: HashSet<&str> = added.iter().map(|d| d.doc_id.as_str()).collect();
            ensure(
                distinct.len() == n && distinct.is_disjoint(&gold_ids),
                || "added docs not fresh".into(),
            )?;
            if oracle {
                check_oracle_pool(index, ex, &added)?;
            }
        }
        PerturbationKind::Deletion | PerturbationKind::Replacement => {
            let expected = if case.kind == PerturbationKind::Deletion {
                d - n
            } else {
                d
            };
            ensure(docs.len() == expected, || {
                format!("{} size {} != {expected}", case.kind, docs.len())
            })?;
            ensure(!docs.is_empty(), || "empty document set".into())?;
            let removed: HashSet<&str> = out.removed.iter().map(String::as_str).collect();
            ensure(
                out.removed.len() == n && removed.len() == n && removed.is_subset(&gold_ids),
                || "removed set".into(),
            )?;
            let kept: Vec<&str> = ex.doc_ids().filter(|id| !removed.contains(id)).collect();
            ensure(ids(&docs[..d - n]) == kept, || {
                "kept docs out of order".into()
            })?;
            if case.kind == PerturbationKind::Replacement {
                ensure(added.len() == n, || "replacement additions".into())?;
                ensure(
                    added.iter().all(|a| !gold_ids.contains(a.doc_id.as_str())),
                    || "replacement reused gold".into(),
                )?;
                if oracle {
                    check_oracle_pool(index, ex, &added)?;
                }
            }
            if oracle {
                check_oracle_targets(ex, &removed)?;
            }
        }
        PerturbationKind::Duplication => {
            ensure(docs.len() == d + n, || "duplication size".into())?;
            ensure(&docs[..d] == gold.as_slice(), || {
                "duplication disturbed gold".into()
            })?;
            let dup: Vec<&Document> = docs[d..].iter().collect();
            ensure(dup.iter().all(|x| gold.contains(x)), || {
                "duplicate is not a gold copy".into()
            })?;
            let distinct: HashSet<&str> = dup.iter().map(|x| x.doc_id.as_str()).collect();
            ensure(distinct.len() == n, || "document duplicated twice".into())?;
            if oracle {
                check_oracle_targets(ex, &distinct)?;
            }
        }
        PerturbationKind::Sorting => {
            ensure(docs.len() == d, || "sorting size".into())?;
            let mut a = ids(docs);
            let mut b = ids(gold);
            let moved = a.iter().zip(&b).filter(|(x, y)| x != y).count();
            ensure(moved <= n, || {
                format!("sorting moved {moved} > {n} documents")
            })?;
            a.sort_unstable();
            b.sort_unstable();
            ensure(a == b, || "sorting changed the multiset".into())?;
            if oracle && n == d {
                let sims: Vec<f64> = docs.iter().map(|x| sim(x, ex)).collect();
                ensure(sims.windows(2).all(|w| w[0] >= w[1]), || {
                    "oracle sort not descending".into()
                })?;
            }
        }
        PerturbationKind::Backtranslation => {
            ensure(docs.len() == d, || "backtranslation size".into())?;
            let mut transformed = 0;
            for ((orig, now), p) in gold.iter().zip(docs).zip(&out.provenance) {
                ensure(orig.doc_id == now.doc_id, || {
                    "backtranslation moved a document".into()
                })?;
                if *p == Provenance::Transformed {
                    transformed += 1;
                    ensure(now.text == Reverse.transform(&orig.text).unwrap(), || {
                        "not transformed".into()
                    })?;
                } else {
                    ensure(orig == now, || "untouched document changed".into())?;
                }
            }
            ensure(transformed == n, || {
                format!("{transformed} transformed, expected {n}")
            })?;
        }
    }
    Ok(Some(out))
}

/// Check every invariant for every example of `case`, plus independence from
/// the order examples are processed in.
pub fn check_case(case: &Case) -> Result<(), String> {
    let ds = dataset(case.examples.clone());
    let index = build_index(&ds, &TokenizerConfig::default());
    let mut forward = HashMap::new();
    for ex in &case.examples {
        if let Some(out) = check_one(case, &index, ex)? {
            forward.insert(ex.example_id.clone(), out);
        }
    }
    let spec = PerturbationSpec {
        kind: case.kind,
        fraction: case.fraction,
        selection: case.selection,
        seed: case.seed,
    };
    for ex in case.examples.iter().rev() {
        if let Ok(out) = apply(
            &spec,
            ex,
            &index,
            &SimilarityScorer::Lexical,
            Some(&Reverse),
        ) {
            ensure(forward.get(&ex.example_id) == Some(&out), || {
                "result depends on processing order".into()
            })?;
        }
    }
    Ok(())
}
