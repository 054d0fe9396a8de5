//! Command-line surface.
//!
//! Subcommands: `gen` (seeded synthetic corpus to embedding files),
//! `scenario <stability|insertion|cross|precision|distributed>` (run one
//! experiment, write its JSON report), and `report csv` (plot-data CSVs
//! from an existing report).
//!
//! `--seed` falls back to the `REPRORAG_SEED` environment variable (the
//! flag wins), then to 42. Exit codes: 0 success, 2 validation/usage
//! error, 1 runtime error. With `--json`, the summary on stdout is a
//! single machine-parseable JSON line.

use crate::core::{gen_synthetic, ExperimentConfig, PrecisionTag, SeedPolicy};
use crate::distributed::{ShardingStrategy, Transport};
use crate::harness::{self, desk, DeterminismMode, ReproReport};
use crate::index::IndexParams;
use crate::{io, Error, Result};
use clap::{Args, Parser, Subcommand};
use std::ffi::OsString;
use std::path::PathBuf;

pub const SEED_ENV_VAR: &str = "REPRORAG_SEED";
const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Parser)]
#[command(
    name = "reprorag",
    version,
    about = "Benchmark the reproducibility of vector-retrieval pipelines"
)]
struct Cli {
    /// Print a single machine-parseable JSON summary line on stdout
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a seeded synthetic corpus and query set as embedding files
    Gen(GenArgs),
    /// Run a reproducibility scenario and write its report
    #[command(subcommand)]
    Scenario(ScenarioCmd),
    /// Derive outputs from an existing report
    #[command(subcommand)]
    Report(ReportCmd),
}

#[derive(Debug, Args)]
struct GenArgs {
    /// Number of documents
    #[arg(long, default_value_t = desk::DOCS)]
    docs: usize,
    /// Number of queries
    #[arg(long, default_value_t = desk::QUERIES)]
    queries: usize,
    /// Embedding dimensionality
    #[arg(long, default_value_t = desk::DIMS)]
    dims: usize,
    /// Number of Gaussian mixture clusters
    #[arg(long, default_value_t = desk::CLUSTERS)]
    clusters: usize,
    /// Generator seed (falls back to REPRORAG_SEED, then 42)
    #[arg(long)]
    seed: Option<u64>,
    /// Output prefix; writes <prefix>_docs.rre1(.ids) and
    /// <prefix>_queries.rre1(.ids)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CommonScenarioArgs {
    /// Number of synthetic documents
    #[arg(long)]
    docs: Option<usize>,
    /// Number of synthetic queries
    #[arg(long, default_value_t = desk::QUERIES)]
    queries: usize,
    /// Embedding dimensionality
    #[arg(long, default_value_t = desk::DIMS)]
    dims: usize,
    /// Mixture clusters for the synthetic corpus
    #[arg(long, default_value_t = desk::CLUSTERS)]
    clusters: usize,
    /// Retrieval depth
    #[arg(long, default_value_t = desk::K)]
    k: usize,
    /// Repetition count
    #[arg(long, default_value_t = desk::RUNS)]
    runs: usize,
    /// Experiment seed (falls back to REPRORAG_SEED, then 42)
    #[arg(long)]
    seed: Option<u64>,
    /// Report output path (default: report_<scenario>.json)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the report without the wall-clock metadata block, so files
    /// from equal-seed runs are byte-identical
    #[arg(long)]
    redact_metadata: bool,
}

#[derive(Debug, Subcommand)]
enum ScenarioCmd {
    /// Repeated build+search runs of one index preset
    Stability {
        #[command(flatten)]
        common: CommonScenarioArgs,
        /// Index preset: flat_l2 | flat_ip | ivf | hnsw_accurate |
        /// hnsw_fast | lsh
        #[arg(long, default_value = "flat_l2")]
        index: String,
        /// Use time-based seeds instead of the fixed seed (sensitivity
        /// mode)
        #[arg(long)]
        non_deterministic: bool,
        /// Execute the repeated runs concurrently (output is unchanged)
        #[arg(long)]
        parallel_runs: bool,
    },
    /// Before/after agreement across an incremental insertion
    Insertion {
        #[command(flatten)]
        common: CommonScenarioArgs,
        #[arg(long, default_value = "flat_l2")]
        index: String,
        /// Fraction of the corpus indexed before the insertion
        #[arg(long, default_value_t = desk::SPLIT_RATIO)]
        split: f64,
    },
    /// Agreement between two embedding spaces over the same documents
    Cross {
        #[command(flatten)]
        common: CommonScenarioArgs,
        /// Embedding file for corpus A (with B files: bring-your-own
        /// spaces; otherwise two seeded synthetic spaces are generated)
        #[arg(long, requires_all = ["emb_a_queries", "emb_b_docs", "emb_b_queries"])]
        emb_a_docs: Option<PathBuf>,
        #[arg(long)]
        emb_a_queries: Option<PathBuf>,
        #[arg(long)]
        emb_b_docs: Option<PathBuf>,
        #[arg(long)]
        emb_b_queries: Option<PathBuf>,
    },
    /// The (precision format x determinism mode) drift matrix
    Precision {
        #[command(flatten)]
        common: CommonScenarioArgs,
    },
    /// Sharded scatter-gather retrieval matrix
    Distributed {
        #[command(flatten)]
        common: CommonScenarioArgs,
        /// Node count
        #[arg(long, default_value_t = desk::NODES)]
        nodes: u32,
        /// Restrict to one strategy: hash | range | random (default: all)
        #[arg(long)]
        sharding: Option<String>,
        /// Restrict to one index preset (default: flat_l2, ivf, hnsw, lsh)
        #[arg(long)]
        index: Option<String>,
        /// Message transport: channel | socket
        #[arg(long, default_value = "channel")]
        transport: String,
    },
}

#[derive(Debug, Subcommand)]
enum ReportCmd {
    /// Emit plot-data CSVs from a report file
    Csv {
        /// Input report (JSON)
        #[arg(long)]
        report: PathBuf,
        /// Output directory for the CSVs
        #[arg(long)]
        out_dir: PathBuf,
    },
}

/// Entry point; returns the process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            // clap prints help/version to stdout (exit 0) and usage errors
            // to stderr (exit 2)
            let code = if err.use_stderr() { 2 } else { 0 };
            let _ = err.print();
            return code;
        }
    };
    let json = cli.json;
    match run(cli) {
        Ok(summary) => {
            print_summary(&summary, json);
            0
        }
        Err(err) => {
            eprintln!("error: {err}");
            if err.is_validation() {
                2
            } else {
                1
            }
        }
    }
}

struct Summary {
    command: String,
    report_path: Option<PathBuf>,
    lines: Vec<String>,
    json_body: serde_json::Value,
}

fn print_summary(summary: &Summary, json: bool) {
    if json {
        let mut obj = serde_json::Map::new();
        obj.insert("command".into(), summary.command.clone().into());
        if let Some(path) = &summary.report_path {
            obj.insert("report".into(), path.display().to_string().into());
        }
        obj.insert("summary".into(), summary.json_body.clone());
        println!("{}", serde_json::Value::Object(obj));
    } else {
        for line in &summary.lines {
            println!("{line}");
        }
        if let Some(path) = &summary.report_path {
            println!("report written to {}", path.display());
        }
    }
}

fn resolve_seed(flag: Option<u64>) -> Result<u64> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var(SEED_ENV_VAR) {
        Ok(text) => text.parse::<u64>().map_err(|_| {
            Error::InvalidArgument(format!("{SEED_ENV_VAR}={text:?} is not a valid u64 seed"))
        }),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

fn parse_strategy(name: &str, seed: u64) -> Result<ShardingStrategy> {
    match name.to_ascii_lowercase().as_str() {
        "hash" => Ok(ShardingStrategy::Hash),
        "range" => Ok(ShardingStrategy::Range),
        "random" => Ok(ShardingStrategy::random_from(seed)),
        other => Err(Error::InvalidArgument(format!(
            "unknown sharding strategy {other:?} (expected hash, range, random)"
        ))),
    }
}

fn parse_transport(name: &str) -> Result<Transport> {
    match name.to_ascii_lowercase().as_str() {
        "channel" => Ok(Transport::Channel),
        "socket" => Ok(Transport::Socket),
        other => Err(Error::InvalidArgument(format!(
            "unknown transport {other:?} (expected channel, socket)"
        ))),
    }
}

fn run(cli: Cli) -> Result<Summary> {
    match cli.command {
        Command::Gen(args) => run_gen(args),
        Command::Scenario(cmd) => run_scenario(cmd),
        Command::Report(ReportCmd::Csv { report, out_dir }) => {
            let loaded = io::read_report(&report)?;
            let files = io::emit_plot_csv(&loaded, &out_dir)?;
            Ok(Summary {
                command: "report_csv".into(),
                report_path: None,
                lines: files
                    .iter()
                    .map(|f| format!("wrote {}", f.display()))
                    .collect(),
                json_body: serde_json::json!({
                    "files": files.iter().map(|f| f.display().to_string()).collect::<Vec<_>>(),
                }),
            })
        }
    }
}

fn run_gen(args: GenArgs) -> Result<Summary> {
    let seed = resolve_seed(args.seed)?;
    let (corpus, queries) = gen_synthetic(seed, args.docs, args.queries, args.dims, args.clusters)?;

    let prefix = args.out.as_os_str().to_string_lossy().into_owned();
    let docs_path = PathBuf::from(format!("{prefix}_docs.rre1"));
    let queries_path = PathBuf::from(format!("{prefix}_queries.rre1"));
    let doc_ids: Vec<String> = corpus.ids.iter().map(|d| d.0.clone()).collect();
    let query_ids: Vec<String> = queries.ids.iter().map(|q| q.0.clone()).collect();
    io::write_embeddings(&docs_path, &corpus.embeddings, Some(&doc_ids))?;
    io::write_embeddings(&queries_path, &queries.embeddings, Some(&query_ids))?;

    Ok(Summary {
        command: "gen".into(),
        report_path: None,
        lines: vec![
            format!(
                "generated {} docs / {} queries (dims {}, clusters {}, seed {})",
                args.docs, args.queries, args.dims, args.clusters, seed
            ),
            format!("wrote {}", docs_path.display()),
            format!("wrote {}", queries_path.display()),
        ],
        json_body: serde_json::json!({
            "seed": seed,
            "docs_file": docs_path.display().to_string(),
            "queries_file": queries_path.display().to_string(),
        }),
    })
}

fn run_scenario(cmd: ScenarioCmd) -> Result<Summary> {
    match cmd {
        ScenarioCmd::Stability {
            common,
            index,
            non_deterministic,
            parallel_runs,
        } => {
            let seed = resolve_seed(common.seed)?;
            let n_docs = common.docs.unwrap_or(desk::DOCS);
            let (corpus, queries) =
                gen_synthetic(seed, n_docs, common.queries, common.dims, common.clusters)?;
            let config = ExperimentConfig {
                index_params: IndexParams::preset(&index, n_docs)?,
                k: common.k,
                seed_policy: if non_deterministic {
                    SeedPolicy::NonDeterministic
                } else {
                    SeedPolicy::Deterministic { seed }
                },
                precision: PrecisionTag::FP32,
                n_runs: common.runs,
                shard_plan: None,
            };
            let mode = if parallel_runs {
                harness::RunMode::Parallel
            } else {
                harness::RunMode::Sequential
            };
            let report = harness::run_repeated_with(&config, &corpus, &queries, mode)?;
            finish_scenario("stability", report, common.out, common.redact_metadata)
        }
        ScenarioCmd::Insertion {
            common,
            index,
            split,
        } => {
            let seed = resolve_seed(common.seed)?;
            let n_docs = common.docs.unwrap_or(desk::DOCS_INSERTION);
            let (corpus, queries) =
                gen_synthetic(seed, n_docs, common.queries, common.dims, common.clusters)?;
            let params = IndexParams::preset(&index, (split * n_docs as f64).ceil() as usize)?;
            let report =
                harness::scenario_insertion(params, &corpus, split, &queries, common.k, seed)?;
            finish_scenario("insertion", report, common.out, common.redact_metadata)
        }
        ScenarioCmd::Cross {
            common,
            emb_a_docs,
            emb_a_queries,
            emb_b_docs,
            emb_b_queries,
        } => {
            let seed = resolve_seed(common.seed)?;
            let report = match (emb_a_docs, emb_a_queries, emb_b_docs, emb_b_queries) {
                (Some(ad), Some(aq), Some(bd), Some(bq)) => {
                    let corpus_a = io::read_corpus(&ad)?;
                    let queries_a = io::read_queries(&aq)?;
                    let corpus_b = io::read_corpus(&bd)?;
                    let queries_b = io::read_queries(&bq)?;
                    harness::scenario_cross_embedding(
                        (&corpus_a, &queries_a),
                        (&corpus_b, &queries_b),
                        common.k,
                    )?
                }
                (None, None, None, None) => {
                    // two independently seeded synthetic spaces over the
                    // same ids
                    let n_docs = common.docs.unwrap_or(desk::DOCS);
                    let seed_b = crate::rng::derive_stream(seed, 1);
                    let (corpus_a, queries_a) =
                        gen_synthetic(seed, n_docs, common.queries, common.dims, common.clusters)?;
                    let (corpus_b, queries_b) = gen_synthetic(
                        seed_b,
                        n_docs,
                        common.queries,
                        common.dims,
                        common.clusters,
                    )?;
                    harness::scenario_cross_embedding(
                        (&corpus_a, &queries_a),
                        (&corpus_b, &queries_b),
                        common.k,
                    )?
                }
                _ => {
                    return Err(Error::InvalidArgument(
                        "cross scenario needs all four --emb-* files or none".into(),
                    ))
                }
            };
            finish_scenario("cross", report, common.out, common.redact_metadata)
        }
        ScenarioCmd::Precision { common } => {
            let seed = resolve_seed(common.seed)?;
            let rows = common.docs.unwrap_or(1000);
            let report = harness::scenario_precision(
                seed,
                rows,
                common.dims,
                &PrecisionTag::ALL,
                &DeterminismMode::BOTH,
                common.runs,
            )?;
            finish_scenario("precision", report, common.out, common.redact_metadata)
        }
        ScenarioCmd::Distributed {
            common,
            nodes,
            sharding,
            index,
            transport,
        } => {
            let seed = resolve_seed(common.seed)?;
            let n_docs = common.docs.unwrap_or(desk::DOCS);
            let (corpus, queries) =
                gen_synthetic(seed, n_docs, common.queries, common.dims, common.clusters)?;
            let strategy_filter = sharding.map(|s| parse_strategy(&s, seed)).transpose()?;
            let index_filter = index
                .map(|name| IndexParams::preset(&name, n_docs / nodes.max(1) as usize))
                .transpose()?;
            let report = harness::scenario_distributed(
                &corpus,
                &queries,
                common.k,
                nodes,
                seed,
                common.runs,
                strategy_filter,
                index_filter,
                parse_transport(&transport)?,
            )?;
            finish_scenario("distributed", report, common.out, common.redact_metadata)
        }
    }
}

fn finish_scenario(
    name: &str,
    report: ReproReport,
    out: Option<PathBuf>,
    redact_metadata: bool,
) -> Result<Summary> {
    let path = out.unwrap_or_else(|| PathBuf::from(format!("report_{name}.json")));
    io::write_report(&report, &path, redact_metadata)?;

    let mut lines = vec![format!("scenario {name} complete")];
    for (metric, dist) in &report.metrics {
        lines.push(format!(
            "  {metric}: mean {:.4} median {:.4} min {:.4} max {:.4} std {:.4} (n={})",
            dist.mean, dist.median, dist.min, dist.max, dist.std, dist.n_queries
        ));
    }
    for (name, value) in &report.scalars {
        lines.push(format!("  {name}: {value:.4}"));
    }
    for (check, outcome) in &report.checks {
        lines.push(format!("  check {check}: {outcome}"));
    }

    let json_body = serde_json::json!({
        "scenario": report.scenario,
        "scalars": report.scalars,
        "metrics": report.metrics,
        "checks": report.checks,
    });
    Ok(Summary {
        command: format!("scenario_{name}"),
        report_path: Some(path),
        lines,
        json_body,
    })
}
