use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use online_neat::data::{DriftKind, SynthConfig};
use online_neat::fitness::DEFAULT_THRESHOLD;
use online_neat_cli::commands::{cmd_eval, cmd_run, cmd_synth, format_metrics};
use online_neat_cli::config::RunConfig;

#[derive(Parser)]
#[command(name = "online-neat", version, about = "Windowed online NEAT over record streams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve over a stream window by window and write reports.
    Run(RunArgs),
    /// Write a synthetic stream file.
    Synth(SynthArgs),
    /// Score a saved genome on a stream file.
    Eval(EvalArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Flat `key = value` file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Stream file (csv).
    #[arg(long, conflicts_with = "synth")]
    data: Option<String>,
    /// Synthetic stream spec, e.g. `n=5000,drift_at=2500,drift_kind=label_flip`.
    #[arg(long)]
    synth: Option<String>,
    #[arg(long)]
    window_size: Option<usize>,
    /// acc, pan, pro or pap.
    #[arg(long)]
    fitness: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// online or frozen-initial.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    population_size: Option<usize>,
    #[arg(long)]
    max_generations: Option<usize>,
    #[arg(long)]
    plateau_generations: Option<usize>,
    /// parallel or sequential.
    #[arg(long)]
    execution: Option<String>,
    /// Skip causal min-max scaling.
    #[arg(long)]
    no_normalize: bool,
    /// Any other config key, e.g. `--set distance_threshold=2.5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[arg(long, default_value_t = 5)]
    features: usize,
    #[arg(long, default_value_t = 0.75)]
    positive_fraction: f64,
    /// Index of the first record under the drifted concept.
    #[arg(long)]
    drift_at: Option<usize>,
    /// label_flip or boundary_rotation.
    #[arg(long, default_value = "label_flip")]
    drift_kind: String,
    /// Logistic label noise; omit for a separable boundary.
    #[arg(long)]
    sharpness: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output stream file; the manifest goes to `<out>.manifest`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    genome: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    /// Score raw features instead of causally scaled ones.
    #[arg(long)]
    no_normalize: bool,
}

fn resolve_run(args: RunArgs) -> Result<RunConfig> {
    let mut config = match &args.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    let flags: [(&str, Option<String>); 14] = [
        ("data", args.data),
        ("synth", args.synth),
        ("window_size", args.window_size.map(|v| v.to_string())),
        ("fitness", args.fitness),
        ("alpha", args.alpha.map(|v| v.to_string())),
        ("beta", args.beta.map(|v| v.to_string())),
        ("threshold", args.threshold.map(|v| v.to_string())),
        ("seed", args.seed.map(|v| v.to_string())),
        ("mode", args.mode),
        ("population_size", args.population_size.map(|v| v.to_string())),
        ("max_generations_per_window", args.max_generations.map(|v| v.to_string())),
        ("plateau_generations", args.plateau_generations.map(|v| v.to_string())),
        ("execution", args.execution),
        ("out", args.out),
    ];
    for (key, value) in flags {
        if let Some(value) = value {
            config.set(key, &value)?;
        }
    }
    for item in &args.set {
        let (key, value) = item
            .split_once('=')
            .with_context(|| format!("--set expects KEY=VALUE, got `{item}`"))?;
        config.set(key.trim(), value.trim())?;
    }
    if args.no_normalize {
        config.normalize = false;
    }
    Ok(config)
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Run(args) => {
            let config = resolve_run(args)?;
            let run = cmd_run(&config)?;
            let out = config.out.as_ref().expect("validated");
            println!("{} windows, report in {}", run.reports.len(), out.display());
        }
        Command::Synth(args) => {
            let config = SynthConfig {
                n_records: args.n,
                n_features: args.features,
                positive_fraction: args.positive_fraction,
                drift_at: args.drift_at,
                drift_kind: args.drift_kind.parse::<DriftKind>()?,
                sharpness: args.sharpness,
                seed: args.seed,
                ..SynthConfig::default()
            };
            cmd_synth(&config, &args.out)?;
        }
        Command::Eval(args) => {
            let metrics = cmd_eval(&args.genome, &args.data, args.threshold, !args.no_normalize)?;
            print!("{}", format_metrics(&metrics));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let text = e.to_string();
            eprintln!("{}", text.lines().next().unwrap_or("error: invalid arguments"));
            return ExitCode::from(2);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
