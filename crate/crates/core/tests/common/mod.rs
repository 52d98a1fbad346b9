//! Shared fixtures and brute-force oracles for the integration tests.
#![allow(dead_code)]

pub mod props;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::thread;

use odmds::corpus::{read_dataset, Dataset, DatasetConfig, Document, Example, Split};
use odmds::retrieval::Bm25Params;
use odmds::text::tokenize;
use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::Value;

pub fn doc(example_id: &str, pos: usize, text: &str) -> Document {
    Document {
        doc_id: format!("{example_id}#{pos}"),
        text: text.to_string(),
        source_example_id: example_id.to_string(),
        source_split: Split::Test,
    }
}

pub fn example(id: &str, docs: &[String], reference: &str) -> Example {
    Example {
        example_id: id.to_string(),
        input_docs: docs
            .iter()
            .enumerate()
            .map(|(i, t)| doc(id, i, t))
            .collect(),
        reference_summary: reference.to_string(),
        additional_input: None,
        split: Split::Test,
    }
}

pub fn dataset(examples: Vec<Example>) -> Dataset {
    let mut ds = read_dataset(&b""[..], &DatasetConfig::default()).unwrap();
    ds.name = "synthetic".into();
    ds.examples = examples;
    ds
}

/// JSON Lines text of `examples` in the canonical dataset format.
pub fn to_jsonl(examples: &[Example]) -> String {
    let mut buf = Vec::new();
    odmds::corpus::write_dataset(&mut buf, examples).unwrap();
    String::from_utf8(buf).unwrap()
}

/// Examples whose vocabularies are pairwise disjoint. Document `j` holds
/// `docs - j` of the reference terms padded with private filler to a common
/// length, so BM25 ranks an example's own documents in file order.
pub fn disjoint_examples(n: usize, docs: usize, split: Split) -> Vec<Example> {
    (0..n)
        .map(|e| {
            let key = format!("{}{e}", &split.as_str()[..2]);
            let terms: Vec<String> = (0..docs).map(|t| format!("{key}q{t}")).collect();
            let texts: Vec<String> = (0..docs)
                .map(|j| {
                    let mut words: Vec<String> = terms[..docs - j].to_vec();
                    while words.len() < docs + 4 {
                        words.push(format!("{key}d{j}f{}", words.len()));
                    }
                    format!("{}. {key}end{j}.", words.join(" "))
                })
                .collect();
            let mut ex = example(&format!("{}-{e}", split.as_str()), &texts, &terms.join(" "));
            ex.split = split;
            for d in &mut ex.input_docs {
                d.source_split = split;
            }
            ex
        })
        .collect()
}

/// Random documents over a small vocabulary so terms repeat across documents.
pub fn random_text(rng: &mut impl Rng, vocab: usize, min: usize, max: usize) -> String {
    let len = rng.gen_range(min..=max);
    (0..len)
        .map(|_| format!("t{}", rng.gen_range(0..vocab)))
        .collect::<Vec<_>>()
        .join(" ")
}

/// BM25 over raw texts, scoring every document independently of any index.
pub fn brute_bm25(
    docs: &[(String, String)],
    query: &str,
    params: &Bm25Params,
) -> Vec<(String, f64)> {
    let tokenized: Vec<Vec<String>> = docs.iter().map(|(_, t)| tokenize(t)).collect();
    let n = docs.len() as f64;
    let total: usize = tokenized.iter().map(Vec::len).sum();
    let avg = if total > 0 { total as f64 / n } else { 1.0 };
    let mut qtf: BTreeMap<String, f64> = BTreeMap::new();
    for t in tokenize(query) {
        *qtf.entry(t).or_default() += 1.0;
    }
    let mut scored: Vec<(String, f64)> = docs
        .iter()
        .zip(&tokenized)
        .map(|((id, _), toks)| {
            let dl = toks.len() as f64;
            let mut score = 0.0;
            for (term, q) in &qtf {
                let df = tokenized.iter().filter(|d| d.contains(term)).count() as f64;
                if df == 0.0 {
                    continue;
                }
                let tf = toks.iter().filter(|t| *t == term).count() as f64;
                if tf == 0.0 {
                    continue;
                }
                let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
                score += q * idf * (tf * (params.k1 + 1.0))
                    / (tf + params.k1 * (1.0 - params.b + params.b * dl / avg));
            }
            (id.clone(), score)
        })
        .collect();
    sort_ranking(&mut scored);
    scored
}

/// Descending score, ties by ascending id.
pub fn sort_ranking(items: &mut [(String, f64)]) {
    items.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
}

/// Precision and recall by list scans.
pub fn brute_pr(retrieved: &[String], gold: &[String]) -> (f64, f64) {
    let mut r = retrieved.to_vec();
    r.sort();
    r.dedup();
    let mut g = gold.to_vec();
    g.sort();
    g.dedup();
    let hits = r.iter().filter(|x| g.contains(x)).count() as f64;
    (hits / r.len() as f64, hits / g.len() as f64)
}

/// (additions, deletions, replacements) by list scans.
pub fn brute_tally(retrieved: &[String], gold: &[String]) -> (usize, usize, usize) {
    let mut r = retrieved.to_vec();
    r.sort();
    r.dedup();
    let mut g = gold.to_vec();
    g.sort();
    g.dedup();
    let extra = r.iter().filter(|x| !g.contains(x)).count();
    let missing = g.iter().filter(|x| !r.contains(x)).count();
    let rep = extra.min(missing);
    (extra - rep, missing - rep, rep)
}

/// Random retrieved/gold id lists over a shared id space.
pub fn random_id_sets(rng: &mut impl Rng) -> (Vec<String>, Vec<String>) {
    let space: Vec<String> = (0..rng.gen_range(1..40)).map(|i| format!("d{i}")).collect();
    let ka = rng.gen_range(1..=space.len());
    let a: Vec<String> = space.choose_multiple(rng, ka).cloned().collect();
    let kb = rng.gen_range(1..=space.len());
    let b: Vec<String> = space.choose_multiple(rng, kb).cloned().collect();
    (a, b)
}

/// Experiment config with the builtin lead summarizer.
pub fn write_config(dir: &Path, dataset: &str, extra: &str) -> std::path::PathBuf {
    let path = dir.join("experiment.toml");
    let text = format!(
        r#"output_dir = "out"
seed = 13
top_k = "oracle"
{extra}

[dataset]
path = "{dataset}"

[summarizer]
id = "lead"
endpoint = "builtin:lead"
max_input_tokens = 100000
"#
    );
    fs::write(&path, text).unwrap();
    path
}

pub type Handler = dyn Fn(&str, &Value) -> (u16, Value) + Send + Sync;

/// Serve `handler` on an ephemeral port; returns the base URL.
pub fn serve(handler: Arc<Handler>) -> String {
    let server = tiny_http::Server::http("127.0.0.1:0").unwrap();
    let port = server.server_addr().to_ip().unwrap().port();
    thread::spawn(move || {
        for mut req in server.incoming_requests() {
            let handler = handler.clone();
            thread::spawn(move || {
                let mut body = String::new();
                req.as_reader().read_to_string(&mut body).unwrap();
                let parsed: Value = serde_json::from_str(&body).unwrap_or(Value::Null);
                let (status, reply) = handler(req.url(), &parsed);
                let response = tiny_http::Response::from_string(reply.to_string())
                    .with_status_code(status)
                    .with_header(
                        "Content-Type: application/json"
                            .parse::<tiny_http::Header>()
                            .unwrap(),
                    );
                let _ = req.respond(response);
            });
        }
    });
    format!("http://127.0.0.1:{port}")
}
