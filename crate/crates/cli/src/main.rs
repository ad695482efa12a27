//! Single binary exposing the analysis, generation, attack, training,
//! evaluation, gradient-check, and sweep workflows.
//!
//! Exit codes: 0 success, 1 validation/input error, 2 numeric failure,
//! 64 usage error.

mod commands;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

pub const SCHEMA_VERSION: u32 = 1;

const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (schema 1)");

#[derive(Parser)]
#[command(name = "hedge", about = "Homophily analytics and edge-generating GNN toolkit", version = VERSION)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Homophily metrics and the weighted density curve of a graph.
    Analyze {
        /// Graph envelope (JSON).
        graph: String,
        /// Relation view: "union" or a relation index.
        #[arg(long, default_value = "union")]
        relation: String,
        /// Kernel bandwidth; Silverman's rule when omitted.
        #[arg(long)]
        bandwidth: Option<f64>,
        /// Output directory for metrics.json and density.csv.
        #[arg(long, default_value = ".")]
        out: String,
    },
    /// Generate a synthetic two-class graph with exact per-class homophily.
    CsbmGen {
        /// Class-0 feature mean, comma-separated reals.
        #[arg(long, value_name = "V0,V1,...", allow_hyphen_values = true)]
        mu0: String,
        /// Class-1 feature mean, comma-separated reals.
        #[arg(long, value_name = "V0,V1,...", allow_hyphen_values = true)]
        mu1: String,
        /// Out-degree of every node.
        #[arg(long)]
        d: usize,
        #[arg(long)]
        h0: f64,
        #[arg(long)]
        h1: f64,
        /// Nodes per class.
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for graph.json (+ sidecars) and oracle.json.
        #[arg(long)]
        out: String,
    },
    /// Perturb a graph's edges (heterophily or random attack).
    Attack {
        #[arg(long, value_parser = ["heterophily", "random"])]
        kind: String,
        /// Target class for the heterophily attack.
        #[arg(long = "class", default_value_t = 0)]
        target_class: usize,
        #[arg(long)]
        ratio: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Relation to perturb.
        #[arg(long, default_value_t = 0)]
        relation: usize,
        /// Input graph envelope.
        input: String,
        /// Output graph envelope path.
        output: String,
    },
    /// Train a model and write its run artifacts.
    Train {
        /// Run configuration (JSON).
        #[arg(long)]
        config: String,
        /// Model to train when the config file does not name one
        /// (the config file takes precedence).
        #[arg(long, value_parser = ["hedge", "gcn", "sage", "mlp"])]
        model: Option<String>,
        /// Graph envelope.
        graph: String,
        /// Output run directory.
        #[arg(long)]
        out: String,
    },
    /// Re-evaluate a trained run directory against its graph.
    Eval {
        /// Run directory written by `train`.
        #[arg(long)]
        run: String,
        /// Graph envelope.
        graph: String,
    },
    /// Finite-difference gradient checks for every primitive and the
    /// end-to-end model loss.
    Gradcheck {
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Attack-ratio sweep: perturb, retrain every model, report.
    Sweep {
        /// Sweep configuration (JSON).
        #[arg(long)]
        config: String,
        /// Graph envelope.
        graph: String,
        /// Output directory for the CSV reports.
        #[arg(long)]
        out: String,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => match err.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                print!("{err}");
                std::process::exit(0);
            }
            _ => {
                eprint!("{err}");
                std::process::exit(64);
            }
        },
    };
    let result = match cli.command {
        Command::Analyze {
            graph,
            relation,
            bandwidth,
            out,
        } => commands::analyze(&graph, &relation, bandwidth, &out),
        Command::CsbmGen {
            mu0,
            mu1,
            d,
            h0,
            h1,
            n,
            seed,
            out,
        } => commands::csbm_gen(&mu0, &mu1, d, h0, h1, n, seed, &out),
        Command::Attack {
            kind,
            target_class,
            ratio,
            seed,
            relation,
            input,
            output,
        } => commands::attack(&kind, target_class, ratio, seed, relation, &input, &output),
        Command::Train {
            config,
            model,
            graph,
            out,
        } => commands::train(&config, model.as_deref(), &graph, &out),
        Command::Eval { run, graph } => commands::eval(&run, &graph),
        Command::Gradcheck { seed } => commands::gradcheck(seed),
        Command::Sweep { config, graph, out } => commands::sweep(&config, &graph, &out),
    };
    match result {
        Ok(()) => {}
        Err(err) => {
            eprintln!("error: {err}");
            let code = match err {
                hedge_core::Error::Numeric(_) => 2,
                _ => 1,
            };
            std::process::exit(code);
        }
    }
}
