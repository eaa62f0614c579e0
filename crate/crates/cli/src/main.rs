use std::io::{self, BufWriter, Read, Write};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use css_core::error::Error;
use css_core::estimators::{
    estimate_frequent_itemsets, exact_count_oracle, EstimatorConfig, Predicate,
};
use css_core::graphs::{
    biclique_estimator, clique_estimator, exact_biclique_oracle, exact_clique_oracle, GraphConfig,
};
use css_core::hashing::HashFunction;
use css_core::io::{read_incidence, read_transactions};
use css_core::parallel::sample_stream;
use css_core::sampler::{sample_bset_range, sample_bset_tradeoff};
use css_core::sets::{BSet, Subset};
use css_core::sketch::{PartitionedSketch, SketchKind};

mod manifest;

use manifest::RunManifest;

#[derive(Parser, Debug)]
#[command(
    name = "css",
    version,
    about = "Consistent k-subset sampling over streams of small sets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List the sampled k-subsets of every transaction
    Sample(SampleArgs),
    /// Estimate the number of frequent k-itemsets in one pass
    Estimate(EstimateArgs),
    /// Exact count of frequent and distinct k-itemsets
    Oracle(OracleArgs),
    /// Clique and biclique estimators over incidence lists
    #[command(subcommand)]
    Graph(GraphCommand),
    /// Range-partitioned CountMin / Count-Sketch over k-itemsets
    Sketch(SketchArgs),
}

#[derive(Subcommand, Debug)]
enum GraphCommand {
    Cliques(CliqueArgs),
    Bicliques(BicliqueArgs),
}

#[derive(Args, Debug, Serialize)]
struct SampleArgs {
    /// Transaction file, or `-` for stdin
    #[arg(long)]
    input: String,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    q: u64,
    #[arg(long)]
    seed: u64,
    /// Fix this many of the largest elements of each half in an outer loop
    #[arg(long)]
    tradeoff: Option<usize>,
    /// Only output itemsets whose bucket lies in LO:HI (half-open)
    #[arg(long, value_parser = parse_range)]
    range: Option<(u64, u64)>,
}

#[derive(Args, Debug, Serialize)]
struct EstimateArgs {
    #[arg(long)]
    input: String,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    min_support: u64,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    b_max: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, hide = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    force_q: Option<u64>,
    #[arg(long, hide = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    sample_size: Option<usize>,
}

#[derive(Args, Debug, Serialize)]
struct OracleArgs {
    #[arg(long)]
    input: String,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    min_support: u64,
}

#[derive(Args, Debug, Serialize)]
struct GraphShared {
    #[arg(long)]
    input: String,
    #[arg(long)]
    gamma: f64,
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    max_degree: usize,
    #[arg(long)]
    seed: u64,
    /// Also report exact counts
    #[arg(long)]
    oracle: bool,
    #[arg(long, hide = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    force_q: Option<u64>,
    #[arg(long, hide = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    sample_size: Option<usize>,
}

#[derive(Args, Debug, Serialize)]
struct CliqueArgs {
    #[arg(long)]
    k: usize,
    #[command(flatten)]
    #[serde(flatten)]
    shared: GraphShared,
}

#[derive(Args, Debug, Serialize)]
struct BicliqueArgs {
    #[arg(long)]
    j: usize,
    #[arg(long)]
    min_left: u64,
    #[command(flatten)]
    #[serde(flatten)]
    shared: GraphShared,
}

#[derive(Args, Debug, Serialize)]
struct SketchArgs {
    #[arg(long)]
    input: String,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    width: u64,
    #[arg(long)]
    depth: usize,
    #[arg(long)]
    workers: usize,
    #[arg(long)]
    kind: SketchKind,
    #[arg(long)]
    seed: u64,
    /// Itemset to query, e.g. `1,2`
    #[arg(long, value_parser = parse_itemset)]
    query: Option<Subset>,
}

fn parse_range(s: &str) -> std::result::Result<(u64, u64), String> {
    let (lo, hi) = s.split_once(':').ok_or("expected LO:HI")?;
    let lo = lo.trim().parse().map_err(|e| format!("bad LO: {e}"))?;
    let hi = hi.trim().parse().map_err(|e| format!("bad HI: {e}"))?;
    Ok((lo, hi))
}

fn parse_itemset(s: &str) -> std::result::Result<Subset, String> {
    let items = s
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<u64>().map_err(|e| format!("bad item {t:?}: {e}")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Subset::from_unsorted(items).map_err(|e| e.to_string())
}

fn read_input(path: &str) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    if path == "-" {
        io::stdin().read_to_end(&mut buf).context("reading stdin")?;
    } else {
        buf = std::fs::read(path).with_context(|| format!("reading {path}"))?;
    }
    Ok(buf)
}

/// A report object whose first key is always `manifest`.
#[derive(Serialize)]
struct Report<'a> {
    manifest: &'a RunManifest,
    #[serde(flatten)]
    body: serde_json::Value,
}

fn write_report(
    out: &mut impl Write,
    manifest: &RunManifest,
    body: serde_json::Value,
) -> Result<()> {
    emit(out, &Report { manifest, body })
}

fn emit(out: &mut impl Write, value: &impl Serialize) -> Result<()> {
    serde_json::to_writer(&mut *out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// What the process should exit with after writing its report.
enum Outcome {
    Done,
    EstimationFailed,
}

fn run_sample(a: &SampleArgs, out: &mut impl Write) -> Result<Outcome> {
    let input = read_input(&a.input)?;
    if a.tradeoff.is_some() && a.range.is_some() {
        return Err(Error::InvalidParameter(
            "--tradeoff and --range are mutually exclusive".into(),
        )
        .into());
    }
    let h = HashFunction::new(a.seed, a.k, a.q)?;
    let sets: Vec<BSet> =
        read_transactions(&input[..], None).collect::<css_core::error::Result<_>>()?;
    let samples: Vec<Vec<Subset>> = match (a.tradeoff, a.range) {
        (Some(l), _) => sets
            .iter()
            .map(|t| sample_bset_tradeoff(t, &h, a.k, l))
            .collect::<css_core::error::Result<_>>()?,
        (_, Some((lo, hi))) => sets
            .iter()
            .map(|t| sample_bset_range(t, &h, a.k, lo..hi))
            .collect::<css_core::error::Result<_>>()?,
        _ => sample_stream(&sets, &h, a.k)?,
    };
    let manifest = RunManifest::new("sample", a, a.seed, &input);
    write_report(out, &manifest, json!({}))?;
    for (i, s) in samples.iter().enumerate() {
        emit(out, &json!({ "transaction": i, "samples": s }))?;
    }
    Ok(Outcome::Done)
}

fn run_estimate(a: &EstimateArgs, out: &mut impl Write) -> Result<Outcome> {
    let input = read_input(&a.input)?;
    let manifest = RunManifest::new("estimate", a, a.seed, &input);
    let mut cfg = EstimatorConfig::new(
        a.k,
        a.alpha,
        a.epsilon,
        a.delta,
        a.m,
        a.b_max,
        Predicate::MinSupport(a.min_support),
        a.seed,
    )?;
    if let Some(q) = a.force_q {
        cfg = cfg.with_fixed_q(q)?;
    }
    if let Some(s) = a.sample_size {
        cfg = cfg.with_sample_size(s);
    }
    let report = estimate_frequent_itemsets(read_transactions(&input[..], Some(a.b_max)), &cfg)?;
    write_report(out, &manifest, json!({ "report": report }))?;
    Ok(if report.is_failure() {
        Outcome::EstimationFailed
    } else {
        Outcome::Done
    })
}

fn run_oracle(a: &OracleArgs, out: &mut impl Write) -> Result<Outcome> {
    let input = read_input(&a.input)?;
    let manifest = RunManifest::new("oracle", a, 0, &input);
    if a.k < 1 {
        return Err(Error::InvalidParameter("k must be positive".into()).into());
    }
    let sets: Vec<BSet> =
        read_transactions(&input[..], None).collect::<css_core::error::Result<_>>()?;
    let (f, z) = exact_count_oracle(&sets, a.k, &Predicate::MinSupport(a.min_support))?;
    write_report(out, &manifest, json!({ "f": f, "z": z }))?;
    Ok(Outcome::Done)
}

fn graph_config(g: &GraphShared) -> Result<GraphConfig> {
    let mut cfg = GraphConfig::new(g.gamma, g.epsilon, g.delta, g.seed)?;
    if let Some(q) = g.force_q {
        cfg = cfg.with_fixed_q(q)?;
    }
    if let Some(s) = g.sample_size {
        cfg = cfg.with_sample_size(s);
    }
    Ok(cfg)
}

fn run_cliques(a: &CliqueArgs, out: &mut impl Write) -> Result<Outcome> {
    let input = read_input(&a.shared.input)?;
    let manifest = RunManifest::new("graph cliques", a, a.shared.seed, &input);
    let cfg = graph_config(&a.shared)?;
    let g = read_incidence(&input[..], Some(a.shared.max_degree))?;
    let report = clique_estimator(&g, a.k, &cfg)?;
    let mut v = json!({ "report": report });
    if a.shared.oracle {
        let (cliques, stars) = exact_clique_oracle(&g, a.k)?;
        v["oracle"] = json!({ "k_cliques": cliques, "stars": stars });
    }
    write_report(out, &manifest, v)?;
    Ok(if report.k_cliques_hat.is_none() {
        Outcome::EstimationFailed
    } else {
        Outcome::Done
    })
}

fn run_bicliques(a: &BicliqueArgs, out: &mut impl Write) -> Result<Outcome> {
    let input = read_input(&a.shared.input)?;
    let manifest = RunManifest::new("graph bicliques", a, a.shared.seed, &input);
    let cfg = graph_config(&a.shared)?;
    let g = read_incidence(&input[..], Some(a.shared.max_degree))?;
    let report = biclique_estimator(&g, a.min_left, a.j, &cfg)?;
    let mut v = json!({ "report": report });
    if a.shared.oracle {
        let (bicliques, adjacencies) = exact_biclique_oracle(&g, a.min_left, a.j)?;
        v["oracle"] = json!({ "bicliques": bicliques, "adjacencies": adjacencies });
    }
    write_report(out, &manifest, v)?;
    Ok(if report.bicliques_hat.is_none() {
        Outcome::EstimationFailed
    } else {
        Outcome::Done
    })
}

fn run_sketch(a: &SketchArgs, out: &mut impl Write) -> Result<Outcome> {
    let input = read_input(&a.input)?;
    let manifest = RunManifest::new("sketch", a, a.seed, &input);
    let mut sk = PartitionedSketch::new(a.kind, a.k, a.depth, a.width, a.workers, a.seed)?;
    let mut batch = Vec::with_capacity(1024);
    for t in read_transactions(&input[..], None) {
        batch.push(t?);
        if batch.len() == batch.capacity() {
            sk.update_batch(&batch)?;
            batch.clear();
        }
    }
    sk.update_batch(&batch)?;
    let mut v = json!({ "sketch": sk.dump() });
    if let Some(q) = &a.query {
        v["query"] = json!({ "itemset": q, "estimate": sk.query_frequency(q)? });
    }
    write_report(out, &manifest, v)?;
    Ok(Outcome::Done)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let result = match &cli.command {
        Command::Sample(a) => run_sample(a, &mut out),
        Command::Estimate(a) => run_estimate(a, &mut out),
        Command::Oracle(a) => run_oracle(a, &mut out),
        Command::Graph(GraphCommand::Cliques(a)) => run_cliques(a, &mut out),
        Command::Graph(GraphCommand::Bicliques(a)) => run_bicliques(a, &mut out),
        Command::Sketch(a) => run_sketch(a, &mut out),
    };
    let flushed = out.flush();
    match result {
        Ok(Outcome::Done) if flushed.is_ok() => ExitCode::SUCCESS,
        Ok(Outcome::Done) => ExitCode::from(1),
        Ok(Outcome::EstimationFailed) => {
            eprintln!("css: estimation failed: too few valid copies");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("css: {e:#}");
            let usage = e.downcast_ref::<Error>().is_some_and(Error::is_usage);
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}
