use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use odmds::baselines::BaselineKind;
use odmds::corpus::{load_dataset, DatasetConfig, DocumentIndex, Split};
use odmds::gateway::{Endpoint, Gateway, SummarizerSpec};
use odmds::metrics::{binomial_test, fleiss_kappa, ExampleScores, MetricReport};
use odmds::pipeline::{
    heuristic_baseline_report, read_records, Experiment, ExperimentConfig, ExperimentResult,
    RetrieverKind,
};
use odmds::retrieval::{
    build_pseudo_query, count_retrieval_errors, read_rankings, resolve_k, retrieval_pr_at_k,
    write_rankings, EmbeddingStore, ErrorTally, TopKStrategy, VectorKind,
};

#[derive(Parser)]
#[command(
    name = "odmds",
    version,
    about = "Open-domain multi-document summarization experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Experiment config (TOML or JSON).
    #[arg(short, long)]
    config: PathBuf,
    /// Prebuilt index; otherwise the index is built in memory.
    #[arg(long)]
    index: Option<PathBuf>,
    #[arg(long)]
    split: Option<Split>,
    #[arg(long)]
    top_k: Option<TopKStrategy>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long, value_parser = parse_retriever)]
    retriever: Option<RetrieverKind>,
}

fn parse_retriever(s: &str) -> Result<RetrieverKind, String> {
    match s {
        "sparse" | "bm25" => Ok(RetrieverKind::Sparse),
        "dense" => Ok(RetrieverKind::Dense),
        other => Err(format!("unknown retriever {other:?}")),
    }
}

impl ConfigArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut c = ExperimentConfig::load(&self.config)?;
        c.apply_env()?;
        if let Some(s) = self.split {
            c.split = s;
        }
        if let Some(k) = self.top_k {
            c.top_k = k;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(d) = &self.output_dir {
            c.output_dir = d.clone();
        }
        if let Some(r) = self.retriever {
            c.retriever.kind = r;
        }
        Ok(c)
    }

    fn experiment(&self) -> Result<Experiment> {
        let exp = Experiment::load(self.config()?)?;
        Ok(match &self.index {
            Some(path) => exp.with_index(
                DocumentIndex::load_from(path)
                    .with_context(|| format!("loading index {}", path.display()))?,
            ),
            None => exp,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build and save the cross-split document index, optionally embedding it.
    Index {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
        /// Embedding service; writes an embedding store for documents and queries.
        #[arg(long, env = "ODMDS_EMBED_ENDPOINT")]
        embed_endpoint: Option<String>,
        #[arg(long, requires = "embed_endpoint")]
        embeddings_out: Option<PathBuf>,
        #[arg(long, default_value_t = 32)]
        batch_size: usize,
    },
    /// Rank the index for every example of the evaluation split.
    Retrieve {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
        /// Ranking depth; defaults to the resolved k of each example.
        #[arg(long)]
        cutoff: Option<usize>,
    },
    /// P@K, R@K and error tallies per example.
    EvaluateRetrieval {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Rankings CSV from `retrieve`; retrieval is run when omitted.
        #[arg(long)]
        rankings: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize the ground-truth documents.
    RunBaseline {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Retrieve, then summarize; compares against the baseline.
    RunOpenDomain {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Run the configured perturbation grid against the baseline.
    PerturbSweep {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Score heuristic baselines; one CSV per baseline in the output directory.
    Baselines {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long = "kind")]
        kinds: Vec<BaselineKind>,
    },
    /// Write the train split with retrieved documents as a new dataset file.
    ExportTrainset {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Paired t-tests between two record files of the same examples.
    Compare { a: PathBuf, b: PathBuf },
    /// Dataset statistics and standalone significance tests.
    #[command(subcommand)]
    Stats(StatsCommand),
}

#[derive(Subcommand)]
enum StatsCommand {
    /// Dataset statistics per split.
    Dataset {
        path: PathBuf,
        #[arg(long)]
        max_input_docs: Option<usize>,
    },
    /// Exact two-sided binomial test against p = 0.5.
    Binomial { successes: u64, failures: u64 },
    /// Fleiss' kappa of a CSV of per-item category counts (no header).
    Kappa { ratings: PathBuf },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Index {
            cfg,
            out,
            embed_endpoint,
            embeddings_out,
            batch_size,
        } => index(&cfg, &out, embed_endpoint, embeddings_out, batch_size),
        Command::Retrieve { cfg, out, cutoff } => retrieve(&cfg, &out, cutoff),
        Command::EvaluateRetrieval { cfg, rankings, out } => {
            evaluate_retrieval(&cfg, rankings, out)
        }
        Command::RunBaseline { cfg } => {
            let result = cfg.experiment()?.run_baseline()?;
            print_result(&result);
            Ok(())
        }
        Command::RunOpenDomain { cfg } => {
            let exp = cfg.experiment()?;
            let baseline = exp.run_baseline()?;
            let open = exp.run_open_domain(Some(&baseline))?;
            print_result(&baseline);
            print_result(&open);
            Ok(())
        }
        Command::PerturbSweep { cfg } => {
            let exp = cfg.experiment()?;
            let baseline = exp.run_baseline()?;
            let (results, points) = exp.run_perturbation_sweep(&baseline)?;
            let failed: usize = results.iter().map(|r| r.failures()).sum();
            println!("{} grid points, {failed} failed example runs", points.len());
            for p in points {
                println!(
                    "{:<12} {:<7} {:>4.2}  mean_delta={:+.5}  ci68={:.5}",
                    p.kind.to_string(),
                    p.selection.to_string(),
                    p.fraction,
                    p.mean_delta,
                    p.ci68
                );
            }
            Ok(())
        }
        Command::Baselines { cfg, kinds } => baselines(&cfg, kinds),
        Command::ExportTrainset { cfg, out } => {
            let n = cfg.experiment()?.export_open_domain_trainset(&out)?;
            println!("wrote {n} examples to {}", out.display());
            Ok(())
        }
        Command::Compare { a, b } => compare(&a, &b),
        Command::Stats(s) => stats(s),
    }
}

fn print_result(r: &ExperimentResult) {
    let agg = &r.report.aggregate;
    println!(
        "{}: {} examples, {} failed, R1={:.4} R2={:.4} RL={:.4} avg={:.4}",
        r.condition,
        r.records.len(),
        r.failures(),
        agg.rouge1.f1,
        agg.rouge2.f1,
        agg.rouge_l.f1,
        agg.rouge_avg
    );
    if let Some(ret) = &r.retrieval {
        println!(
            "  P@K={:.4} R@K={:.4} additions={} deletions={} replacements={}",
            ret.mean_precision,
            ret.mean_recall,
            ret.errors.additions,
            ret.errors.deletions,
            ret.errors.replacements
        );
    }
    if let Some(d) = &r.delta {
        println!(
            "  delta ROUGE-Avg={:+.5} (se {:.5}, n={})",
            d.mean, d.ci68, d.n
        );
    }
    for row in &r.report.significance {
        println!(
            "  {:<10} t={:.3} p={:.3e}{}",
            row.metric.name(),
            row.test.statistic,
            row.test.p_value,
            if row.significant { " *" } else { "" }
        );
    }
}

fn index(
    cfg: &ConfigArgs,
    out: &Path,
    embed_endpoint: Option<String>,
    embeddings_out: Option<PathBuf>,
    batch_size: usize,
) -> Result<()> {
    let exp = cfg.experiment()?;
    let index = exp.index();
    index.save_to(out)?;
    println!(
        "indexed {} documents ({} terms) into {}",
        index.len(),
        index.vocabulary().count(),
        out.display()
    );

    let Some(endpoint) = embed_endpoint else {
        return Ok(());
    };
    let store_path = embeddings_out.unwrap_or_else(|| out.with_extension("embeddings.jsonl"));
    let endpoint: Endpoint = endpoint.parse()?;
    let gw = Gateway::new(SummarizerSpec {
        id: "embedder".into(),
        endpoint,
        ..SummarizerSpec::builtin_lead(usize::MAX)
    });
    let docs: Vec<(VectorKind, String, String)> = index
        .documents()
        .iter()
        .map(|d| (VectorKind::Doc, d.doc_id.clone(), d.text.clone()))
        .collect();
    let source = exp.config().dataset.options.query_source;
    let mut items = docs;
    for ex in &exp.dataset().examples {
        let q = build_pseudo_query(ex, source)?;
        items.push((VectorKind::Query, q.example_id, q.text));
    }
    let mut store: Option<EmbeddingStore> = None;
    for chunk in items.chunks(batch_size.max(1)) {
        let texts: Vec<String> = chunk.iter().map(|(_, _, t)| t.clone()).collect();
        let vectors = gw.embed(&texts)?;
        if vectors.len() != chunk.len() {
            bail!(
                "embedder returned {} vectors for {} texts",
                vectors.len(),
                chunk.len()
            );
        }
        for ((kind, id, _), v) in chunk.iter().zip(vectors) {
            let s = match store.as_mut() {
                Some(s) => s,
                None => store.insert(EmbeddingStore::new(v.len())?),
            };
            s.insert(*kind, id, v)?;
        }
    }
    if let Some(store) = store {
        store.write(File::create(&store_path)?)?;
        println!(
            "wrote {} embeddings to {}",
            items.len(),
            store_path.display()
        );
    }
    Ok(())
}

fn retrieve(cfg: &ConfigArgs, out: &Path, cutoff: Option<usize>) -> Result<()> {
    let exp = cfg.experiment()?;
    let mut rankings = Vec::new();
    for ex in exp.examples(exp.config().split) {
        let depth = cutoff.unwrap_or_else(|| resolve_k(exp.config().top_k, exp.dataset(), ex));
        rankings.push(exp.rank(ex, depth)?);
    }
    write_rankings(File::create(out)?, &rankings)?;
    println!(
        "wrote rankings for {} examples to {}",
        rankings.len(),
        out.display()
    );
    Ok(())
}

fn evaluate_retrieval(
    cfg: &ConfigArgs,
    rankings: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Result<()> {
    let exp = cfg.experiment()?;
    let examples = exp.examples(exp.config().split);
    let ranked = match rankings {
        Some(path) => read_rankings(BufReader::new(File::open(&path)?), "file")?,
        None => examples
            .iter()
            .map(|ex| exp.retrieve(ex).map(|(r, _)| r))
            .collect::<Result<Vec<_>, _>>()?,
    };
    let writer: Box<dyn Write> = match &out {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::sink()),
    };
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "example_id",
        "k",
        "precision",
        "recall",
        "additions",
        "deletions",
        "replacements",
    ])?;
    let mut total = ErrorTally::default();
    let (mut sum_p, mut sum_r, mut n) = (0.0, 0.0, 0usize);
    for r in &ranked {
        let Some(ex) = exp.dataset().example(&r.example_id) else {
            bail!("rankings mention unknown example {}", r.example_id);
        };
        let k = resolve_k(exp.config().top_k, exp.dataset(), ex);
        let top: Vec<&str> = r.top(k).collect();
        let (p, rec) = retrieval_pr_at_k(top.iter().copied(), ex.doc_ids())?;
        let tally = count_retrieval_errors(top.iter().copied(), ex.doc_ids());
        total += tally;
        sum_p += p;
        sum_r += rec;
        n += 1;
        w.write_record([
            ex.example_id.clone(),
            k.to_string(),
            p.to_string(),
            rec.to_string(),
            tally.additions.to_string(),
            tally.deletions.to_string(),
            tally.replacements.to_string(),
        ])?;
    }
    w.flush()?;
    if n == 0 {
        bail!("no examples to evaluate");
    }
    println!(
        "{n} examples: P@K={:.4} R@K={:.4} additions={} deletions={} replacements={}",
        sum_p / n as f64,
        sum_r / n as f64,
        total.additions,
        total.deletions,
        total.replacements
    );
    Ok(())
}

fn baselines(cfg: &ConfigArgs, kinds: Vec<BaselineKind>) -> Result<()> {
    let config = cfg.config()?;
    let dataset = load_dataset(&config.dataset.path, &config.dataset.options)?;
    std::fs::create_dir_all(&config.output_dir)?;
    let kinds = if kinds.is_empty() {
        BaselineKind::ALL.to_vec()
    } else {
        kinds
    };
    for kind in kinds {
        match heuristic_baseline_report(kind, &dataset, config.split, config.metrics.stem) {
            Ok(report) => {
                let path = config.output_dir.join(format!("baseline-{kind}.csv"));
                report.write_csv(File::create(&path)?)?;
                println!(
                    "{kind}: ROUGE-Avg {:.4} -> {}",
                    report.aggregate.rouge_avg,
                    path.display()
                );
            }
            Err(e) => eprintln!("{kind}: skipped ({e})"),
        }
    }
    Ok(())
}

fn load_scores(path: &Path) -> Result<MetricReport> {
    let records = read_records(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(MetricReport::new(
        records
            .into_iter()
            .filter(|r| r.is_ok())
            .map(|r| ExampleScores {
                example_id: r.example_id,
                scores: r.scores.expect("ok records carry scores"),
            })
            .collect(),
    ))
}

fn compare(a: &Path, b: &Path) -> Result<()> {
    let a = load_scores(a)?;
    let b = load_scores(b)?;
    let rows = MetricReport::compare(&a, &b)?;
    let mut w = csv::Writer::from_writer(io::stdout());
    w.write_record([
        "metric",
        "mean_a",
        "mean_b",
        "mean_delta",
        "t",
        "p_value",
        "n",
        "significant",
    ])?;
    for r in rows {
        w.write_record([
            r.metric.name().to_string(),
            r.mean_a.to_string(),
            r.mean_b.to_string(),
            r.mean_delta.to_string(),
            r.test.statistic.to_string(),
            r.test.p_value.to_string(),
            r.test.n.to_string(),
            r.significant.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn stats(cmd: StatsCommand) -> Result<()> {
    match cmd {
        StatsCommand::Dataset {
            path,
            max_input_docs,
        } => {
            let config = DatasetConfig {
                max_input_docs,
                ..DatasetConfig::default()
            };
            let ds = load_dataset(&path, &config)?;
            let mut out = serde_json::Map::new();
            out.insert("all".into(), serde_json::to_value(ds.stats())?);
            for split in [Split::Train, Split::Validation, Split::Test] {
                if ds.has_split(split) {
                    out.insert(
                        split.to_string(),
                        serde_json::to_value(ds.split_stats(split))?,
                    );
                }
            }
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
        StatsCommand::Binomial {
            successes,
            failures,
        } => {
            let r = binomial_test(successes, failures)?;
            println!(
                "proportion={} p_value={:e} n={}",
                r.statistic, r.p_value, r.n
            );
        }
        StatsCommand::Kappa { ratings } => {
            let mut reader = csv::ReaderBuilder::new()
                .has_headers(false)
                .from_reader(File::open(&ratings)?);
            let mut rows = Vec::new();
            for rec in reader.records() {
                let rec = rec?;
                rows.push(
                    rec.iter()
                        .map(|c| c.trim().parse::<u32>())
                        .collect::<Result<Vec<_>, _>>()?,
                );
            }
            println!("kappa={}", fleiss_kappa(&rows)?);
        }
    }
    Ok(())
}
