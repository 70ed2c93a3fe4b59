mod commands;
mod metrics;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "skyx",
    version,
    about = "Skyline explanations for GNN node classification"
)]
struct Cli {
    /// error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "warn")]
    log_level: log::LevelFilter,

    /// Write per-phase timings as CSV.
    #[arg(long, global = true)]
    metrics_out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Explain one node.
    Explain(ExplainArgs),
    /// Explain a batch of nodes in parallel.
    Batch(BatchArgs),
    /// Generate a synthetic benchmark graph.
    Gen(GenArgs),
    /// Train a GCN on a labeled graph.
    Train(TrainArgs),
    /// Exhaustively search the best explanation of a small neighborhood.
    Oracle(OracleArgs),
    /// Score explanation documents with quality indicators.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
struct ExplainArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Target node, as written in the graph document.
    #[arg(long)]
    node: i64,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value = "fdl+,fdl-,conc")]
    measures: String,
    #[arg(long, default_value = "op")]
    strategy: String,
    #[arg(long)]
    max_candidates: Option<usize>,
    /// Take peeling candidates in edge-id order instead of by estimated loss.
    #[arg(long)]
    no_prioritize: bool,
    /// Measures vouched monotone along a peeling path; enables early pruning
    /// when it lists every measure in use.
    #[arg(long, value_delimiter = ',')]
    prune: Vec<String>,
    #[arg(long, value_enum, default_value = "neighborhood")]
    conc_reference: ConcReference,
    /// Diversified explanation instead of dominance power.
    #[arg(long)]
    diversify: bool,
    /// Coverage weight of the diversity score.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Recorded in the output; explanation itself is deterministic.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Sidecar of every verified state; defaults to the output path with a
    /// `.csv` extension.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Transition graph of the run, in Graphviz format.
    #[arg(long)]
    dot: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ConcReference {
    Neighborhood,
    Graph,
}

#[derive(Debug, Args)]
struct BatchArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// JSON list of {node, k?, epsilon?, measures?, strategy?, max_candidates?}.
    #[arg(long)]
    queries: PathBuf,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Give every query a fresh edge-signal table.
    #[arg(long)]
    no_share: bool,
    /// Partition queries at random instead of by neighborhood overlap.
    #[arg(long)]
    no_cluster: bool,
    #[arg(long)]
    diversify: bool,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GraphKind {
    TreeCycles,
    BaShapes,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: GraphKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of attached motifs.
    #[arg(long)]
    motifs: Option<usize>,
    /// Tree-Cycles: depth of the binary tree.
    #[arg(long)]
    height: Option<u32>,
    /// Tree-Cycles: pad with random edges up to this many edges.
    #[arg(long)]
    target_edges: Option<usize>,
    /// BA-Shapes: nodes of the preferential-attachment base.
    #[arg(long)]
    base_nodes: Option<usize>,
    /// BA-Shapes: edges added per base node.
    #[arg(long)]
    attach: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Hidden layer widths.
    #[arg(long, value_delimiter = ',', default_value = "20,20,20")]
    hidden: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 0.0)]
    weight_decay: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Objective {
    Ds,
    Divs,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    node: i64,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value = "fdl+,fdl-,conc")]
    measures: String,
    #[arg(long, value_enum, default_value = "ds")]
    objective: Objective,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Largest neighborhood, in edges, to enumerate.
    #[arg(long, default_value_t = skyx_core::evalkit::DEFAULT_GUARD)]
    guard: usize,
    /// Defaults to standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Indicator {
    Ipf,
    Igd,
    Ms,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Explanation documents; their members together form the reference
    /// space of each target.
    #[arg(long, num_args = 1.., required = true)]
    explanations: Vec<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "ipf,igd,ms")]
    qi: Vec<Indicator>,
    /// Reference points per measure for the distance indicator.
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    env_logger::Builder::new()
        .filter_level(cli.log_level)
        .init();
    let mut metrics = metrics::Metrics::default();
    let outcome = match &cli.command {
        Command::Explain(args) => commands::explain(args, &mut metrics),
        Command::Batch(args) => commands::batch(args, &mut metrics),
        Command::Gen(args) => commands::gen(args, &mut metrics),
        Command::Train(args) => commands::train(args, &mut metrics),
        Command::Oracle(args) => commands::oracle(args, &mut metrics),
        Command::Eval(args) => commands::eval(args, &mut metrics),
    };
    let outcome = outcome.and_then(|()| match &cli.metrics_out {
        Some(path) => metrics.write(path),
        None => Ok(()),
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("skyx: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
