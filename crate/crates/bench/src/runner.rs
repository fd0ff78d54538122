//! Multi-trial execution, summaries and CSV output.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use snn_resume::learning::{class_targets, evaluate, noisy_pattern};
use snn_resume::network::format_checkpoint;
use snn_resume::spike::derive_seed;
use snn_resume::{
    init_weights_with, train_observed, DistanceSpec, IterationStats, NetworkConfig, PatternPair, RngHandle,
    ScalingParams, TrainingSet, WeightStore,
};

use crate::config::{ExperimentKind, ExperimentSpec};
use crate::error::BenchError;
use crate::experiments::{build_trial_data, load_iris, IrisSample, TrialData};
use crate::patterns::save_patterns;

pub const CSV_HEADER: &str = "experiment,trial,seed,converged,iterations,final_error,train_acc,test_acc";

#[derive(Clone, Debug, PartialEq)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub converged: bool,
    pub iterations: usize,
    pub final_error: f64,
    /// Percent correct on the training patterns.
    pub train_acc: f64,
    /// Percent correct on held-out patterns, when the experiment has them.
    pub test_acc: Option<f64>,
}

impl TrialResult {
    pub fn csv_row(&self, experiment: &str) -> String {
        let test = self.test_acc.map(|a| format!("{a:.4}")).unwrap_or_default();
        format!(
            "{experiment},{},{},{},{},{:.6},{:.4},{test}",
            self.trial, self.seed, self.converged, self.iterations, self.final_error, self.train_acc
        )
    }
}

/// Everything a trial produced; weights and patterns feed the noise sweep.
#[derive(Clone, Debug)]
pub struct TrialRun {
    pub result: TrialResult,
    pub weights: WeightStore<f64>,
    pub data: TrialData,
}

/// Mean accuracy (percent) per jitter level over converged trials.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseRow {
    pub sigma: f64,
    pub accuracy: f64,
    pub networks: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub trials: usize,
    pub converged: usize,
    pub convergence_pct: f64,
    /// Mean and standard error over converged trials.
    pub mean_iterations: Option<f64>,
    pub sem_iterations: Option<f64>,
    pub mean_train_acc: Option<f64>,
    pub mean_test_acc: Option<f64>,
}

impl Summary {
    /// Computed from the per-trial rows alone.
    pub fn from_rows(rows: &[TrialResult]) -> Self {
        let ok: Vec<&TrialResult> = rows.iter().filter(|r| r.converged).collect();
        let iters: Vec<f64> = ok.iter().map(|r| r.iterations as f64).collect();
        let (mean_iterations, sem_iterations) = mean_sem(&iters);
        let train: Vec<f64> = ok.iter().map(|r| r.train_acc).collect();
        let test: Vec<f64> = ok.iter().filter_map(|r| r.test_acc).collect();
        Self {
            trials: rows.len(),
            converged: ok.len(),
            convergence_pct: if rows.is_empty() { 0.0 } else { 100.0 * ok.len() as f64 / rows.len() as f64 },
            mean_iterations,
            sem_iterations,
            mean_train_acc: mean_sem(&train).0,
            mean_test_acc: mean_sem(&test).0,
        }
    }

    pub fn csv_row(&self, experiment: &str) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_default();
        format!(
            "# summary {experiment}: trials={} converged={} convergence_pct={:.1} iterations={}+-{} train_acc={} test_acc={}",
            self.trials,
            self.converged,
            self.convergence_pct,
            opt(self.mean_iterations),
            opt(self.sem_iterations),
            opt(self.mean_train_acc),
            opt(self.mean_test_acc)
        )
    }
}

/// Mean and standard error of the mean (sample deviation over sqrt n).
pub fn mean_sem(values: &[f64]) -> (Option<f64>, Option<f64>) {
    let n = values.len();
    if n == 0 {
        return (None, None);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (Some(mean), Some(0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (Some(mean), Some((var / n as f64).sqrt()))
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub name: String,
    pub rows: Vec<TrialResult>,
    pub summary: Summary,
    pub noise: Vec<NoiseRow>,
}

impl ExperimentReport {
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        self.write_body(out)
    }

    fn write_body<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        for row in &self.rows {
            writeln!(out, "{}", row.csv_row(&self.name))?;
        }
        writeln!(out, "{}", self.summary.csv_row(&self.name))?;
        if !self.noise.is_empty() {
            for n in &self.noise {
                writeln!(
                    out,
                    "# noise {}: sigma={} accuracy={:.4} networks={}",
                    self.name, n.sigma, n.accuracy, n.networks
                )?;
            }
        }
        Ok(())
    }
}

pub fn load_dataset(spec: &ExperimentSpec) -> Result<Option<Vec<IrisSample>>, BenchError> {
    match spec.kind {
        ExperimentKind::Iris => {
            let path = spec.iris_path.as_ref().ok_or_else(|| BenchError::MissingKey("iris_path".into()))?;
            Ok(Some(load_iris(path)?))
        }
        _ => Ok(None),
    }
}

/// Runs trial `index`, whose seed is derived from the master seed.
pub fn run_trial(spec: &ExperimentSpec, iris: Option<&[IrisSample]>, index: usize) -> Result<TrialRun, BenchError> {
    run_trial_observed(spec, iris, index, |_, _, _| {})
}

/// [`run_trial`] with a per-iteration callback (see [`train_observed`]).
pub fn run_trial_observed<F>(
    spec: &ExperimentSpec,
    iris: Option<&[IrisSample]>,
    index: usize,
    observe: F,
) -> Result<TrialRun, BenchError>
where
    F: FnMut(usize, &WeightStore<f64>, &IterationStats<f64>),
{
    let seed = derive_seed(spec.master_seed, index as u64);
    let mut rng = RngHandle::new(seed);
    let data = build_trial_data(spec, iris, &mut rng)?;
    let mut learning = spec.learning.clone();
    if let Some(s) = &learning.scaling {
        let max = spec.rate_max.unwrap_or_else(|| data.default_rate_max());
        learning.scaling = Some(ScalingParams::new(s.factor, s.min_spikes, max));
    }
    let initial = init_weights_with(&spec.network, &spec.init, &mut rng)?;
    let set = TrainingSet::new(data.train.clone()).with_jitter(spec.input_jitter, spec.target_jitter);
    let outcome = train_observed(&spec.network, &learning, &spec.convergence, &set, initial, &mut rng, observe)?;

    let distance = &spec.convergence.distance;
    let train_eval = evaluate(&spec.network, &outcome.weights, &set.patterns, &set.classes, distance)?;
    let test_acc = if data.test.is_empty() {
        None
    } else {
        let e = evaluate(&spec.network, &outcome.weights, &data.test, &set.classes, distance)?;
        Some(100.0 * e.accuracy())
    };
    Ok(TrialRun {
        result: TrialResult {
            trial: index,
            seed,
            converged: outcome.converged,
            iterations: outcome.iterations,
            final_error: outcome.final_error,
            train_acc: 100.0 * train_eval.accuracy(),
            test_acc,
        },
        weights: outcome.weights,
        data,
    })
}

/// One training iteration of a traced trial.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub error: f64,
    pub accuracy: f64,
    /// Euclidean distance between the current and the final weights.
    pub distance_to_final: f64,
}

pub const TRACE_HEADER: &str = "iteration,error,accuracy,distance_to_final";

/// Learning curve of trial `index`.
pub fn trace_trial(spec: &ExperimentSpec, iris: Option<&[IrisSample]>, index: usize) -> Result<Vec<TraceRow>, BenchError> {
    let mut snapshots = Vec::new();
    let run = run_trial_observed(spec, iris, index, |it, w, stats| snapshots.push((it, w.clone(), *stats)))?;
    Ok(snapshots
        .into_iter()
        .map(|(iteration, w, stats)| TraceRow {
            iteration,
            error: stats.error,
            accuracy: stats.accuracy,
            distance_to_final: w.distance(&run.weights),
        })
        .collect())
}

pub fn write_trace<W: Write>(out: &mut W, rows: &[TraceRow]) -> std::io::Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for r in rows {
        writeln!(out, "{},{:.6},{:.4},{:.6}", r.iteration, r.error, r.accuracy, r.distance_to_final)?;
    }
    Ok(())
}

/// Percent of `count` jittered copies of `patterns` classified correctly.
///
/// Probes cycle through the patterns; only input spikes are jittered and
/// responses are compared against the clean class targets.
pub fn noise_accuracy(
    config: &NetworkConfig<f64>,
    distance: &DistanceSpec<f64>,
    weights: &WeightStore<f64>,
    patterns: &[PatternPair<f64>],
    sigma: f64,
    count: usize,
    rng: &mut RngHandle,
) -> Result<f64, BenchError> {
    if patterns.is_empty() || count == 0 {
        return Err(BenchError::Invalid("noise evaluation needs patterns and a positive count".into()));
    }
    let classes = class_targets(patterns);
    let dt = config.grid().dt();
    let probes: Vec<PatternPair<f64>> = (0..count)
        .map(|i| noisy_pattern(&patterns[i % patterns.len()], sigma, 0.0, dt, rng))
        .collect();
    let e = evaluate(config, weights, &probes, &classes, distance)?;
    Ok(100.0 * e.accuracy())
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool, BenchError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| BenchError::Invalid(format!("thread pool: {e}")))
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses one per core.
    pub workers: Option<usize>,
    /// Directory receiving `trial_<i>.ckpt` and `trial_<i>.patterns`.
    pub save_dir: Option<PathBuf>,
}

/// Runs all trials on a bounded worker pool; results come back in trial order.
pub fn run_experiment(spec: &ExperimentSpec, workers: Option<usize>) -> Result<ExperimentReport, BenchError> {
    run_experiment_with(spec, &RunOptions { workers, save_dir: None })
}

pub fn run_experiment_with(spec: &ExperimentSpec, options: &RunOptions) -> Result<ExperimentReport, BenchError> {
    let iris = load_dataset(spec)?;
    let iris = iris.as_deref();
    let pool = pool(options.workers)?;
    let runs: Vec<TrialRun> = pool.install(|| {
        (0..spec.trials)
            .into_par_iter()
            .map(|i| run_trial(spec, iris, i))
            .collect::<Result<_, _>>()
    })?;
    if let Some(dir) = &options.save_dir {
        save_runs(spec, &runs, dir)?;
    }
    let noise = match &spec.noise {
        Some(n) => pool.install(|| noise_table(spec, &runs, &n.sigmas, n.patterns))?,
        None => Vec::new(),
    };
    let rows: Vec<TrialResult> = runs.into_iter().map(|r| r.result).collect();
    Ok(ExperimentReport {
        name: spec.name.clone(),
        summary: Summary::from_rows(&rows),
        rows,
        noise,
    })
}

fn save_runs(spec: &ExperimentSpec, runs: &[TrialRun], dir: &Path) -> Result<(), BenchError> {
    std::fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
    let window = spec.network.grid().window();
    for run in runs {
        let stem = format!("{}_trial_{}", file_stem(&spec.name), run.result.trial);
        let ckpt = dir.join(format!("{stem}.ckpt"));
        std::fs::write(&ckpt, format_checkpoint(&spec.network, &run.weights)).map_err(|e| BenchError::io(&ckpt, e))?;
        save_patterns(&dir.join(format!("{stem}.patterns")), &run.data.train, window)?;
    }
    Ok(())
}

fn file_stem(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
}

/// Accuracy versus test jitter over the converged networks of `runs`.
pub fn noise_table(spec: &ExperimentSpec, runs: &[TrialRun], sigmas: &[f64], count: usize) -> Result<Vec<NoiseRow>, BenchError> {
    let converged: Vec<&TrialRun> = runs.iter().filter(|r| r.result.converged).collect();
    sigmas
        .iter()
        .enumerate()
        .map(|(si, &sigma)| {
            let accs: Vec<f64> = converged
                .par_iter()
                .map(|run| {
                    let mut rng = RngHandle::new(derive_seed(run.result.seed, 1_000 + si as u64));
                    let distance = &spec.convergence.distance;
                    noise_accuracy(&spec.network, distance, &run.weights, &run.data.train, sigma, count, &mut rng)
                })
                .collect::<Result<_, _>>()?;
            Ok(NoiseRow {
                sigma,
                accuracy: mean_sem(&accs).0.unwrap_or(0.0),
                networks: accs.len(),
            })
        })
        .collect()
}

/// Runs every value of the spec's sweep (or the spec alone).
pub fn run_sweep(spec: &ExperimentSpec, options: &RunOptions) -> Result<Vec<ExperimentReport>, BenchError> {
    spec.expand_sweep()?.iter().map(|s| run_experiment_with(s, options)).collect()
}

/// One header followed by the rows, summary and noise lines of each report.
pub fn write_reports<W: Write>(out: &mut W, reports: &[ExperimentReport]) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in reports {
        r.write_body(out)?;
    }
    Ok(())
}
