//! Flat `key = value` experiment configuration.
//!
//! Blank lines and `#` comments are ignored. Unknown keys are rejected so
//! that typos surface as configuration errors. Every key has a default; see
//! [`ExperimentSpec::from_map`] and the shipped files under `configs/`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use snn_resume::{
    AccuracySet, ConvergenceSpec, DistanceSpec, ErrorMeasure, ErrorScope, LearningParams, NetworkConfig, NeuronParams,
    Normalization, ScalingParams, SimGrid, WeightInit,
};

use crate::error::BenchError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    /// Single-spike XOR with a reference input and delayed sub-connections.
    XorTiming,
    Iris,
    /// XOR encoded by spike trains over two input groups.
    XorSpikeTrain,
    /// Random input patterns with teacher-generated targets.
    Patterns,
    /// Random patterns learnt under input jitter.
    Generalise,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::XorTiming => "xor-timing",
            Self::Iris => "iris",
            Self::XorSpikeTrain => "xor-spiketrain",
            Self::Patterns => "patterns",
            Self::Generalise => "generalise",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "xor-timing" => Self::XorTiming,
            "iris" => Self::Iris,
            "xor-spiketrain" => Self::XorSpikeTrain,
            "patterns" => Self::Patterns,
            "generalise" => Self::Generalise,
            other => return Err(format!("unknown experiment `{other}`")),
        })
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Raw key/value pairs in file order (later keys override earlier ones).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigMap {
    entries: BTreeMap<String, String>,
    base_dir: Option<PathBuf>,
}

impl ConfigMap {
    pub fn parse(text: &str) -> Result<Self, BenchError> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| BenchError::Config {
                line: idx + 1,
                message: format!("expected `key = value`, found `{line}`"),
            })?;
            entries.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { entries, base_dir: None })
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        let mut map = Self::parse(&text)?;
        map.base_dir = path.parent().map(Path::to_path_buf);
        Ok(map)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), value.into());
    }

    pub fn remove(&mut self, key: &str) {
        self.entries.remove(key);
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Resolves a path value relative to the configuration file.
    pub fn resolve(&self, value: &str) -> PathBuf {
        let p = PathBuf::from(value);
        match &self.base_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p,
        }
    }
}

/// Spike-count constraint for generated trains: `min..=max`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CountRange {
    pub min: usize,
    pub max: Option<usize>,
}

/// Parameters of generated (Poisson) input and target trains.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorSpec {
    pub input_neurons: usize,
    pub patterns: usize,
    pub input_rate: f64,
    pub input_window: f64,
    pub input_min_isi: f64,
    pub input_spikes: CountRange,
    pub target_rate: f64,
    pub target_spikes: CountRange,
    pub teacher_init: WeightInit<f64>,
}

/// One configuration key evaluated at several values.
#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    pub param: String,
    pub values: Vec<String>,
}

impl Sweep {
    pub fn new(param: &str, values: &[String]) -> Result<Self, BenchError> {
        if !KNOWN_KEYS.contains(&param) || param.starts_with("sweep_") || param == "experiment" {
            return Err(BenchError::Value { key: "sweep_param".into(), value: param.into() });
        }
        let values: Vec<String> = values.iter().map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
        if values.is_empty() {
            return Err(BenchError::Invalid(format!("sweep over `{param}` has no values")));
        }
        Ok(Self { param: param.to_string(), values })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSpec {
    pub sigmas: Vec<f64>,
    pub patterns: usize,
}

/// Everything needed to run the trials of one experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub name: String,
    pub trials: usize,
    /// Full-scale trial count, used with `--paper-scale`.
    pub full_trials: usize,
    pub master_seed: u64,
    pub network: NetworkConfig<f64>,
    pub init: WeightInit<f64>,
    pub learning: LearningParams<f64>,
    /// `None` means "max target spike count + 2", resolved per trial.
    pub rate_max: Option<usize>,
    pub convergence: ConvergenceSpec<f64>,
    pub generator: GeneratorSpec,
    pub iris_path: Option<PathBuf>,
    pub train_fraction: f64,
    pub input_jitter: f64,
    pub target_jitter: f64,
    pub noise: Option<NoiseSpec>,
    pub sweep: Option<Sweep>,
    /// The source map, kept so sweeps can override single keys.
    pub source: ConfigMap,
}

pub const KNOWN_KEYS: &[&str] = &[
    "experiment",
    "name",
    "trials",
    "full_trials",
    "seed",
    "inputs",
    "hidden",
    "outputs",
    "sub_connections",
    "delay_step",
    "dt",
    "window",
    "threshold",
    "tau_psp",
    "tau_refr",
    "abs_refractory",
    "init_lo",
    "init_hi",
    "init_normalization",
    "a_plus",
    "a_minus",
    "a_minus_ratio",
    "tau_plus",
    "tau_minus",
    "non_hebbian",
    "scaling_factor",
    "rate_min",
    "rate_max",
    "max_iterations",
    "error_threshold",
    "error_scope",
    "error_measure",
    "min_accuracy",
    "accuracy_set",
    "accuracy_probes",
    "tau_c",
    "patterns",
    "input_rate",
    "input_window",
    "input_min_isi",
    "input_min_spikes",
    "input_max_spikes",
    "target_rate",
    "target_min_spikes",
    "target_max_spikes",
    "teacher_lo",
    "teacher_hi",
    "teacher_normalization",
    "iris_path",
    "train_fraction",
    "input_jitter",
    "target_jitter",
    "noise_sigmas",
    "noise_patterns",
    "sweep_param",
    "sweep_values",
];

fn parse_value<V: FromStr>(map: &ConfigMap, key: &str, default: V) -> Result<V, BenchError> {
    match map.get(key) {
        None | Some("") => Ok(default),
        Some(raw) => raw.parse().map_err(|_| BenchError::Value {
            key: key.to_string(),
            value: raw.to_string(),
        }),
    }
}

fn parse_optional<V: FromStr>(map: &ConfigMap, key: &str) -> Result<Option<V>, BenchError> {
    match map.get(key) {
        None | Some("") | Some("none") | Some("auto") => Ok(None),
        Some(raw) => raw.parse().map(Some).map_err(|_| BenchError::Value {
            key: key.to_string(),
            value: raw.to_string(),
        }),
    }
}

fn parse_normalization(map: &ConfigMap, key: &str, default: Normalization) -> Result<Normalization, BenchError> {
    match map.get(key) {
        None => Ok(default),
        Some("sub-connections") => Ok(Normalization::SubConnections),
        Some("fan-in") => Ok(Normalization::FanIn),
        Some(other) => Err(BenchError::Value {
            key: key.into(),
            value: other.into(),
        }),
    }
}

/// Parses `a:b` (integer steps of 1) or a comma separated list.
pub fn parse_sigma_list(raw: &str) -> Option<Vec<f64>> {
    if let Some((lo, hi)) = raw.split_once(':') {
        let (lo, hi): (f64, f64) = (lo.trim().parse().ok()?, hi.trim().parse().ok()?);
        if hi < lo {
            return None;
        }
        let n = (hi - lo).floor() as usize;
        return Some((0..=n).map(|i| lo + i as f64).collect());
    }
    raw.split(',').map(|v| v.trim().parse().ok()).collect()
}

struct Defaults {
    inputs: usize,
    hidden: usize,
    sub_connections: usize,
    dt: f64,
    window: f64,
    abs_refractory: f64,
    error_threshold: f64,
    error_scope: ErrorScope,
    min_accuracy: Option<f64>,
    accuracy_set: AccuracySet,
    patterns: usize,
    trials: usize,
    full_trials: usize,
}

fn defaults(kind: ExperimentKind) -> Defaults {
    match kind {
        ExperimentKind::XorTiming => Defaults {
            inputs: 3,
            hidden: 5,
            sub_connections: 12,
            dt: 0.1,
            window: 30.0,
            abs_refractory: 0.0,
            error_threshold: 0.2,
            error_scope: ErrorScope::Total,
            min_accuracy: None,
            accuracy_set: AccuracySet::Training,
            patterns: 4,
            trials: 20,
            full_trials: 100,
        },
        ExperimentKind::Iris => Defaults {
            inputs: 4,
            hidden: 10,
            sub_connections: 10,
            dt: 0.1,
            window: 30.0,
            abs_refractory: 0.0,
            error_threshold: 0.2,
            error_scope: ErrorScope::PerPattern,
            min_accuracy: Some(0.95),
            accuracy_set: AccuracySet::Training,
            patterns: 150,
            trials: 20,
            full_trials: 50,
        },
        ExperimentKind::XorSpikeTrain => Defaults {
            inputs: 40,
            hidden: 90,
            sub_connections: 1,
            dt: 0.5,
            window: 50.0,
            abs_refractory: 3.0,
            error_threshold: 3.0,
            error_scope: ErrorScope::Total,
            min_accuracy: Some(1.0),
            accuracy_set: AccuracySet::Training,
            patterns: 4,
            trials: 20,
            full_trials: 50,
        },
        ExperimentKind::Patterns => Defaults {
            inputs: 100,
            hidden: 260,
            sub_connections: 1,
            dt: 0.5,
            window: 100.0,
            abs_refractory: 3.0,
            error_threshold: 0.5,
            error_scope: ErrorScope::PerPattern,
            min_accuracy: Some(0.9),
            accuracy_set: AccuracySet::Training,
            patterns: 10,
            trials: 20,
            full_trials: 50,
        },
        ExperimentKind::Generalise => Defaults {
            inputs: 100,
            hidden: 210,
            sub_connections: 1,
            dt: 0.5,
            window: 500.0,
            abs_refractory: 3.0,
            error_threshold: 0.6,
            error_scope: ErrorScope::PerPattern,
            min_accuracy: Some(0.8),
            accuracy_set: AccuracySet::FreshNoisy { count: 30 },
            patterns: 3,
            trials: 20,
            full_trials: 50,
        },
    }
}

impl ExperimentSpec {
    pub fn load(path: &Path) -> Result<Self, BenchError> {
        Self::from_map(ConfigMap::load(path)?)
    }

    pub fn parse(text: &str) -> Result<Self, BenchError> {
        Self::from_map(ConfigMap::parse(text)?)
    }

    pub fn from_map(map: ConfigMap) -> Result<Self, BenchError> {
        if let Some(key) = map.keys().find(|k| !KNOWN_KEYS.contains(k)) {
            return Err(BenchError::UnknownKey(key.to_string()));
        }
        let kind: ExperimentKind = map
            .get("experiment")
            .ok_or_else(|| BenchError::MissingKey("experiment".into()))?
            .parse()
            .map_err(BenchError::Invalid)?;
        let d = defaults(kind);

        let sub_connections: usize = parse_value(&map, "sub_connections", d.sub_connections)?;
        let delay_step: f64 = parse_value(&map, "delay_step", 1.0)?;
        let delays: Vec<f64> = (0..sub_connections).map(|k| k as f64 * delay_step).collect();
        let dt: f64 = parse_value(&map, "dt", d.dt)?;
        let window: f64 = parse_value(&map, "window", d.window)?;
        let neuron = NeuronParams {
            threshold: parse_value(&map, "threshold", 0.7)?,
            tau_psp: parse_value(&map, "tau_psp", 7.0)?,
            tau_refr: parse_value(&map, "tau_refr", 12.0)?,
            abs_refractory: parse_value(&map, "abs_refractory", d.abs_refractory)?,
        };
        let grid = SimGrid::new(dt, window)?;
        let network = NetworkConfig::three_layer(
            parse_value(&map, "inputs", d.inputs)?,
            parse_value(&map, "hidden", d.hidden)?,
            parse_value(&map, "outputs", 1)?,
            delays,
            grid,
            neuron,
        )?;

        let init = WeightInit {
            lo: parse_value(&map, "init_lo", -0.2)?,
            hi: parse_value(&map, "init_hi", 0.8)?,
            normalization: parse_normalization(&map, "init_normalization", Normalization::SubConnections)?,
        };

        let a_plus: f64 = parse_value(&map, "a_plus", 1.2)?;
        let a_minus = match parse_optional::<f64>(&map, "a_minus_ratio")? {
            Some(ratio) => a_plus * ratio,
            None => parse_value(&map, "a_minus", 0.5)?,
        };
        let scaling_factor: f64 = parse_value(&map, "scaling_factor", 0.005)?;
        let rate_min: usize = parse_value(&map, "rate_min", 1)?;
        let rate_max = parse_optional::<usize>(&map, "rate_max")?;
        let learning = LearningParams {
            a_plus,
            a_minus,
            tau_plus: parse_value(&map, "tau_plus", 5.0)?,
            tau_minus: parse_value(&map, "tau_minus", 5.0)?,
            non_hebbian: parse_value(&map, "non_hebbian", 0.05)?,
            scaling: (scaling_factor > 0.0).then(|| ScalingParams::new(scaling_factor, rate_min, rate_max.unwrap_or(usize::MAX))),
            max_iterations: parse_value(&map, "max_iterations", 2000)?,
        };
        learning.validate()?;

        let scope = match map.get("error_scope") {
            None => d.error_scope,
            Some("total") => ErrorScope::Total,
            Some("per-pattern") => ErrorScope::PerPattern,
            Some(other) => return Err(BenchError::Value { key: "error_scope".into(), value: other.into() }),
        };
        let measure = match map.get("error_measure") {
            None | Some("squared") => ErrorMeasure::Squared,
            Some("distance") => ErrorMeasure::Distance,
            Some(other) => return Err(BenchError::Value { key: "error_measure".into(), value: other.into() }),
        };
        let probes: usize = parse_value(&map, "accuracy_probes", 30)?;
        let accuracy_set = match map.get("accuracy_set") {
            None => match d.accuracy_set {
                AccuracySet::FreshNoisy { .. } => AccuracySet::FreshNoisy { count: probes },
                other => other,
            },
            Some("training") => AccuracySet::Training,
            Some("fresh-noisy") => AccuracySet::FreshNoisy { count: probes },
            Some(other) => return Err(BenchError::Value { key: "accuracy_set".into(), value: other.into() }),
        };
        let min_accuracy = match map.get("min_accuracy") {
            None => d.min_accuracy,
            Some(_) => parse_optional::<f64>(&map, "min_accuracy")?,
        };
        let tau_c: f64 = parse_value(&map, "tau_c", 10.0)?;
        let mut distance = DistanceSpec::for_window(window, tau_c);
        distance.measure = measure;
        let convergence = ConvergenceSpec {
            error_threshold: parse_value(&map, "error_threshold", d.error_threshold)?,
            scope,
            min_accuracy,
            accuracy_set,
            distance,
        };

        let (rate, in_window, in_isi, in_min, in_max, t_rate, t_min, t_max) = match kind {
            ExperimentKind::XorSpikeTrain => (0.06, 30.0, 3.0, 1, None, 0.2, 3, Some(3)),
            ExperimentKind::Patterns => (0.05, 100.0, 3.0, 1, None, 0.0, 2, Some(4)),
            ExperimentKind::Generalise => (0.04, 500.0, 5.0, 15, Some(20), 0.0, 5, Some(7)),
            _ => (0.0, window, 0.0, 0, None, 0.0, 0, None),
        };
        // Teacher weights are the default range scaled by a gain that puts
        // the teacher output inside the target spike-count range often.
        let teacher_gain = if kind == ExperimentKind::Generalise { 3.5 } else { 3.0 };
        let (teacher_lo, teacher_hi) = (-0.2 * teacher_gain, 0.8 * teacher_gain);
        let generator = GeneratorSpec {
            input_neurons: network.n_inputs(),
            patterns: parse_value(&map, "patterns", d.patterns)?,
            input_rate: parse_value(&map, "input_rate", rate)?,
            input_window: parse_value(&map, "input_window", in_window)?,
            input_min_isi: parse_value(&map, "input_min_isi", in_isi)?,
            input_spikes: CountRange {
                min: parse_value(&map, "input_min_spikes", in_min)?,
                max: match map.get("input_max_spikes") {
                    None => in_max,
                    Some(_) => parse_optional(&map, "input_max_spikes")?,
                },
            },
            target_rate: parse_value(&map, "target_rate", t_rate)?,
            target_spikes: CountRange {
                min: parse_value(&map, "target_min_spikes", t_min)?,
                max: match map.get("target_max_spikes") {
                    None => t_max,
                    Some(_) => parse_optional(&map, "target_max_spikes")?,
                },
            },
            teacher_init: WeightInit {
                lo: parse_value(&map, "teacher_lo", teacher_lo)?,
                hi: parse_value(&map, "teacher_hi", teacher_hi)?,
                normalization: parse_normalization(&map, "teacher_normalization", Normalization::FanIn)?,
            },
        };

        let noise = match map.get("noise_sigmas") {
            None | Some("none") => None,
            Some(raw) => Some(NoiseSpec {
                sigmas: parse_sigma_list(raw).ok_or_else(|| BenchError::Value {
                    key: "noise_sigmas".into(),
                    value: raw.into(),
                })?,
                patterns: parse_value(&map, "noise_patterns", 500)?,
            }),
        };

        let sweep = match (map.get("sweep_param"), map.get("sweep_values")) {
            (None, None) => None,
            (Some(param), Some(values)) => {
                let values: Vec<String> = values.split(',').map(str::to_string).collect();
                Some(Sweep::new(param, &values)?)
            }
            (None, Some(_)) => return Err(BenchError::MissingKey("sweep_param".into())),
            (Some(_), None) => return Err(BenchError::MissingKey("sweep_values".into())),
        };

        let iris_path = map.get("iris_path").map(|p| map.resolve(p));
        let trials: usize = parse_value(&map, "trials", d.trials)?;
        if trials == 0 {
            return Err(BenchError::Invalid("trials must be at least 1".into()));
        }
        Ok(Self {
            kind,
            name: map.get("name").unwrap_or(kind.name()).to_string(),
            trials,
            full_trials: parse_value(&map, "full_trials", d.full_trials)?,
            master_seed: parse_value(&map, "seed", 1)?,
            network,
            init,
            learning,
            rate_max,
            convergence,
            generator,
            iris_path,
            train_fraction: parse_value(&map, "train_fraction", 0.75)?,
            input_jitter: parse_value(&map, "input_jitter", 0.0)?,
            target_jitter: parse_value(&map, "target_jitter", 0.0)?,
            noise,
            sweep,
            source: map,
        })
    }

    /// Re-parses with `key` overridden; used by sweeps.
    pub fn with_override(&self, key: &str, value: &str) -> Result<Self, BenchError> {
        let mut map = self.source.clone();
        map.set(key, value);
        Self::from_map(map)
    }

    /// One spec per sweep value, named `name[param=value]`, or just `self`.
    pub fn expand_sweep(&self) -> Result<Vec<Self>, BenchError> {
        let Some(sweep) = &self.sweep else {
            return Ok(vec![self.clone()]);
        };
        sweep
            .values
            .iter()
            .map(|v| {
                let mut map = self.source.clone();
                map.remove("sweep_param");
                map.remove("sweep_values");
                map.set(&sweep.param, v.as_str());
                let mut spec = Self::from_map(map)?;
                spec.name = format!("{}[{}={v}]", self.name, sweep.param);
                spec.trials = self.trials;
                spec.master_seed = self.master_seed;
                Ok(spec)
            })
            .collect()
    }

    /// Human-readable description of the stopping rule.
    pub fn criterion_description(&self) -> String {
        let c = &self.convergence;
        let scope = match c.scope {
            ErrorScope::Total => "summed over patterns",
            ErrorScope::PerPattern => "averaged per pattern",
        };
        let measure = match c.distance.measure {
            ErrorMeasure::Squared => "D^2",
            ErrorMeasure::Distance => "D",
        };
        let mut text = format!(
            "{}: van Rossum {measure} (tau_c={} ms, horizon={} ms) {scope} < {}",
            self.name, c.distance.tau_c, c.distance.horizon, c.error_threshold
        );
        if let Some(acc) = c.min_accuracy {
            let set = match c.accuracy_set {
                AccuracySet::Training => "training patterns".to_string(),
                AccuracySet::FreshNoisy { count } => format!("{count} fresh noisy patterns per iteration"),
            };
            text.push_str(&format!(" and accuracy >= {:.0}% on {set}", acc * 100.0));
        }
        text.push_str(&format!("; at most {} iterations", self.learning.max_iterations));
        text
    }
}
