use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use snn_bench::config::{parse_sigma_list, Sweep};
use snn_bench::patterns::load_patterns;
use snn_bench::runner::{load_dataset, noise_accuracy, trace_trial, write_trace};
use snn_bench::{run_sweep, write_reports, BenchError, ExperimentSpec, RunOptions};
use snn_resume::network::parse_checkpoint;
use snn_resume::spike::derive_seed;
use snn_resume::{DistanceSpec, RngHandle};

#[derive(Parser)]
#[command(name = "snn-bench", version, about = "Multilayer ReSuMe benchmark experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the trials of one experiment configuration.
    Run {
        config: PathBuf,
        #[command(flatten)]
        common: RunArgs,
    },
    /// Run one configuration for each value of a parameter.
    Sweep {
        config: PathBuf,
        /// Configuration key to vary.
        #[arg(long)]
        param: String,
        /// Comma separated values.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Vec<String>,
        #[command(flatten)]
        common: RunArgs,
    },
    /// Accuracy of a saved network on jittered copies of saved patterns.
    NoiseEval {
        checkpoint: PathBuf,
        patterns: PathBuf,
        /// Jitter standard deviations: `a:b` in 1 ms steps or a list.
        #[arg(long, default_value = "1:10")]
        sigma_range: String,
        /// Noisy probes per jitter level.
        #[arg(long, default_value_t = 500)]
        count: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Van Rossum time constant used for classification.
        #[arg(long, default_value_t = 10.0)]
        tau_c: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Number of trials (overrides the config).
    #[arg(long)]
    trials: Option<usize>,
    /// Master seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// CSV output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use the configured full-scale trial count.
    #[arg(long, conflicts_with = "trials")]
    paper_scale: bool,
    /// Worker threads (default: one per core).
    #[arg(long)]
    workers: Option<usize>,
    /// Write each trial's checkpoint and patterns into this directory.
    #[arg(long)]
    save: Option<PathBuf>,
    /// Write the learning curve of trial 0 to this CSV file.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Print the convergence criterion of every run and exit.
    #[arg(long)]
    dry_run: bool,
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn execute(cli: Cli) -> Result<(), BenchError> {
    match cli.command {
        Command::Run { config, common } => run(&config, None, &common),
        Command::Sweep {
            config,
            param,
            values,
            common,
        } => run(&config, Some(Sweep::new(&param, &values)?), &common),
        Command::NoiseEval {
            checkpoint,
            patterns,
            sigma_range,
            count,
            seed,
            tau_c,
            out,
        } => noise_eval(&checkpoint, &patterns, &sigma_range, count, seed, tau_c, out.as_deref()),
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, BenchError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| BenchError::io(p, e))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_err(path: Option<&Path>) -> impl Fn(io::Error) -> BenchError + '_ {
    move |e| BenchError::io(path.unwrap_or(Path::new("<stdout>")), e)
}

fn run(config: &Path, sweep: Option<Sweep>, args: &RunArgs) -> Result<(), BenchError> {
    let mut spec = ExperimentSpec::load(config)?;
    if sweep.is_some() {
        spec.sweep = sweep;
    }
    if let Some(t) = args.trials {
        if t == 0 {
            return Err(BenchError::Invalid("--trials must be at least 1".into()));
        }
        spec.trials = t;
    }
    if args.paper_scale {
        spec.trials = spec.full_trials;
    }
    if let Some(s) = args.seed {
        spec.master_seed = s;
    }
    let specs = spec.expand_sweep()?;
    if args.dry_run {
        let mut out = io::stdout().lock();
        for s in &specs {
            writeln!(out, "{} trials, master seed {}: {}", s.trials, s.master_seed, s.criterion_description())
                .map_err(write_err(None))?;
        }
        return Ok(());
    }
    for s in &specs {
        eprintln!("running {}", s.criterion_description());
    }
    let options = RunOptions {
        workers: args.workers,
        save_dir: args.save.clone(),
    };
    let reports = run_sweep(&spec, &options)?;
    let out_path = args.out.as_deref();
    let mut out = output(out_path)?;
    write_reports(&mut out, &reports).and_then(|_| out.flush()).map_err(write_err(out_path))?;
    for r in &reports {
        eprintln!("{}", r.summary.csv_row(&r.name).trim_start_matches("# "));
    }

    if let Some(path) = &args.trace {
        let first = &specs[0];
        let iris = load_dataset(first)?;
        let rows = trace_trial(first, iris.as_deref(), 0)?;
        let mut file = output(Some(path))?;
        write_trace(&mut file, &rows).and_then(|_| file.flush()).map_err(|e| BenchError::io(path, e))?;
    }
    Ok(())
}

fn noise_eval(
    checkpoint: &Path,
    patterns: &Path,
    sigma_range: &str,
    count: usize,
    seed: u64,
    tau_c: f64,
    out_path: Option<&Path>,
) -> Result<(), BenchError> {
    let sigmas = parse_sigma_list(sigma_range).ok_or_else(|| BenchError::Value {
        key: "--sigma-range".into(),
        value: sigma_range.into(),
    })?;
    let text = std::fs::read_to_string(checkpoint).map_err(|e| BenchError::io(checkpoint, e))?;
    let (config, weights) = parse_checkpoint::<f64>(&text)?;
    let (pairs, _) = load_patterns(patterns)?;
    let distance = DistanceSpec::for_window(config.grid().window(), tau_c);
    let mut out = output(out_path)?;
    writeln!(out, "sigma,accuracy").map_err(write_err(out_path))?;
    for (i, &sigma) in sigmas.iter().enumerate() {
        let mut rng = RngHandle::new(derive_seed(seed, i as u64));
        let acc = noise_accuracy(&config, &distance, &weights, &pairs, sigma, count, &mut rng)?;
        writeln!(out, "{sigma},{acc:.4}").map_err(write_err(out_path))?;
    }
    out.flush().map_err(write_err(out_path))
}
