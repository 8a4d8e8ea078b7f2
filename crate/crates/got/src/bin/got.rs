//! Command-line front end for the graph-of-thoughts harness.
//!
//! Exit codes: 0 on success, 2 for configuration problems (bad flags,
//! unreadable files, invalid plans), 3 for backend failures.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use got::engine::{EngineConfig, EngineError};
use got::goo::GraphOfOperations;
use got::llm::{CostModel, HttpConfig};
use got::metrics::{topology_table, TopologyShape};
use got::runner::{
    self, compare, load_records, run_batch, summarize, BackendSpec, RunnerError,
};
use got::schemes::{
    adapter_for, build_scheme, expected_llm_calls, generate_instance, Scheme, UseCase,
};

#[derive(Parser)]
#[command(
    name = "got",
    about = "Graph-of-thoughts prompting harness",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a batch of seeded runs and append records to a file.
    Run(RunArgs),
    /// Summarise a record file: error quantiles, calls, total cost.
    Summarize {
        /// Record file produced by `run`.
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Compare two record files side by side.
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
    /// Build a synthetic reasoning topology and print its metrics.
    Topology(TopologyArgs),
    /// Validate an operation-plan file.
    ValidateGoo {
        /// Path to a plan in the JSON plan format.
        #[arg(long)]
        config: PathBuf,
    },
    /// Write the built-in plan for a scheme to a plan file.
    ExportPlan(ExportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Prompting scheme: io, cot, cot-sc, tot, tot2, got.
    #[arg(long)]
    scheme: String,
    /// Task: sorting, intersection, keyword, doc_merge.
    #[arg(long)]
    usecase: String,
    /// Problem size (32, 64, or 128 for the list tasks).
    #[arg(long, default_value_t = 32)]
    size: usize,
    /// Number of seeded runs.
    #[arg(long, default_value_t = 1)]
    samples: u64,
    /// First seed; runs cover seed .. seed+samples.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Backend: mock-perfect, mock-faulty:<rate>, scripted:<path>, http.
    #[arg(long, default_value = "mock-perfect")]
    backend: String,
    /// Output record file (JSON lines, appended).
    #[arg(long)]
    out: PathBuf,
    /// Abort a run when its accumulated cost exceeds this many dollars.
    #[arg(long)]
    max_cost: Option<f64>,
    /// Optional JSON config for model pricing, retries, and concurrency.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct TopologyArgs {
    /// Shape: chain, multi-chain, kary-tree, hourglass.
    #[arg(long)]
    shape: String,
    /// Branching factor (multi-chain, kary-tree, hourglass).
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Total thoughts (chain, multi-chain).
    #[arg(long, default_value_t = 12)]
    n: usize,
    /// Depth (kary-tree, hourglass).
    #[arg(long, default_value_t = 3)]
    depth: usize,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    scheme: String,
    #[arg(long)]
    usecase: String,
    #[arg(long, default_value_t = 32)]
    size: usize,
    #[arg(long)]
    out: PathBuf,
}

/// Optional on-disk runner configuration.
#[derive(serde::Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    cost_model: Option<CostModel>,
    concurrency: Option<usize>,
    http: Option<HttpConfig>,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_BACKEND: u8 = 3;

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}

fn config_err<E: std::fmt::Display>(e: E) -> (u8, String) {
    (EXIT_CONFIG, e.to_string())
}

fn runner_err(e: RunnerError) -> (u8, String) {
    let code = match &e {
        RunnerError::Engine(EngineError::Backend(_)) => EXIT_BACKEND,
        RunnerError::Engine(EngineError::BudgetExceeded { .. }) => EXIT_BACKEND,
        _ => EXIT_CONFIG,
    };
    (code, e.to_string())
}

fn dispatch(cli: Cli) -> Result<(), (u8, String)> {
    match cli.command {
        Command::Run(args) => run_command(args),
        Command::Summarize { input } => {
            let records = load_records(&input).map_err(runner_err)?;
            match summarize(&records) {
                Some(summary) => println!("{summary}"),
                None => println!("no scored runs in {}", input.display()),
            }
            Ok(())
        }
        Command::Compare { a, b } => {
            let ra = load_records(&a).map_err(runner_err)?;
            let rb = load_records(&b).map_err(runner_err)?;
            print!("{}", compare(&ra, &rb));
            Ok(())
        }
        Command::Topology(args) => {
            let shape = parse_shape(&args)?;
            print!("{}", topology_table(&[shape]));
            Ok(())
        }
        Command::ValidateGoo { config } => {
            let raw = std::fs::read_to_string(&config).map_err(config_err)?;
            let goo = GraphOfOperations::from_json(&raw).map_err(config_err)?;
            let order = goo.validate().map_err(config_err)?;
            println!(
                "valid: {} operations, execution order {:?}",
                goo.ops.len(),
                order
            );
            Ok(())
        }
        Command::ExportPlan(args) => {
            let scheme = parse_scheme(&args.scheme)?;
            let use_case = parse_use_case(&args.usecase)?;
            let goo = build_scheme(scheme, use_case, args.size);
            std::fs::write(&args.out, goo.to_json().map_err(config_err)?)
                .map_err(config_err)?;
            println!("wrote {}", args.out.display());
            Ok(())
        }
    }
}

fn parse_scheme(name: &str) -> Result<Scheme, (u8, String)> {
    Scheme::parse(name).ok_or_else(|| config_err(format!("unknown scheme `{name}`")))
}

fn parse_use_case(name: &str) -> Result<UseCase, (u8, String)> {
    UseCase::parse(name).ok_or_else(|| config_err(format!("unknown use case `{name}`")))
}

fn parse_shape(args: &TopologyArgs) -> Result<TopologyShape, (u8, String)> {
    match args.shape.as_str() {
        "chain" => Ok(TopologyShape::Chain { n: args.n }),
        "multi-chain" | "multi_chain" => Ok(TopologyShape::MultiChain { k: args.k, n: args.n }),
        "kary-tree" | "kary_tree" | "tree" => {
            Ok(TopologyShape::KaryTree { k: args.k, depth: args.depth })
        }
        "hourglass" => Ok(TopologyShape::Hourglass { k: args.k, depth: args.depth }),
        other => Err(config_err(format!("unknown shape `{other}`"))),
    }
}

fn run_command(args: RunArgs) -> Result<(), (u8, String)> {
    let scheme = parse_scheme(&args.scheme)?;
    let use_case = parse_use_case(&args.usecase)?;

    let file_config: FileConfig = match &args.config {
        Some(path) => {
            let raw = std::fs::read_to_string(path).map_err(config_err)?;
            serde_json::from_str(&raw).map_err(config_err)?
        }
        None => FileConfig::default(),
    };

    let mut engine_config = EngineConfig::default();
    if let Some(model) = file_config.cost_model {
        engine_config.cost_model = model;
    }
    if let Some(concurrency) = file_config.concurrency {
        engine_config.concurrency = concurrency;
    }
    if let Some(dollars) = args.max_cost {
        if !(dollars > 0.0) {
            return Err(config_err("--max-cost must be positive"));
        }
        engine_config.max_cost_micros = Some((dollars * 1_000_000.0) as i64);
    }

    let mut backend = BackendSpec::parse(&args.backend).map_err(runner_err)?;
    if let (BackendSpec::Http(http), Some(custom)) = (&mut backend, file_config.http) {
        *http = custom;
    }

    // Surface the static call budget up front so the user can estimate cost.
    let instance = generate_instance(use_case, args.size, args.seed);
    let adapter = adapter_for(&instance);
    let (min_calls, max_calls) =
        expected_llm_calls(&build_scheme(scheme, use_case, args.size), adapter.as_ref())
            .map_err(config_err)?;
    if min_calls == max_calls {
        println!("plan issues {min_calls} llm calls per run");
    } else {
        println!("plan issues between {min_calls} and {max_calls} llm calls per run");
    }

    let records = run_batch(
        scheme,
        use_case,
        args.size,
        args.seed..args.seed + args.samples,
        &backend,
        &engine_config,
        &args.out,
    )
    .map_err(runner_err)?;

    println!(
        "completed {} runs -> {}",
        records.len(),
        args.out.display()
    );
    if let Some(summary) = runner::summarize(&records) {
        println!("{summary}");
    }
    Ok(())
}
