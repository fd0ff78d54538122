//! Pattern sets of the benchmark experiments.

use std::path::Path;

use rand::seq::SliceRandom;
use snn_resume::network::respond;
use snn_resume::spike::{generate_poisson, split_train, PoissonSpec};
use snn_resume::{init_weights_with, Error, PatternPair, RngHandle, SpikeTrain, WeightStore};

use crate::config::{CountRange, ExperimentKind, ExperimentSpec};
use crate::error::BenchError;

/// Single-spike XOR: `(input A, input B, reference) -> target`, all in ms.
pub const XOR_TABLE: [([f64; 3], f64, usize); 4] = [
    ([0.0, 0.0, 0.0], 16.0, 0),
    ([0.0, 6.0, 0.0], 10.0, 1),
    ([6.0, 0.0, 0.0], 10.0, 1),
    ([6.0, 6.0, 0.0], 16.0, 0),
];

/// Target spike times of setosa, versicolor and virginica.
pub const IRIS_TARGETS: [f64; 3] = [10.0, 14.0, 18.0];
pub const IRIS_MAX_FEATURE: f64 = 8.0;

const TEACHER_ATTEMPTS: usize = 200;
const INPUT_ATTEMPTS: usize = 200;

pub fn build_xor_timing(spec: &ExperimentSpec) -> Vec<PatternPair<f64>> {
    let window = spec.network.grid().window();
    XOR_TABLE
        .iter()
        .map(|(inputs, target, label)| {
            PatternPair::new(
                inputs.iter().map(|&t| SpikeTrain::from_f64(&[t], window)).collect(),
                vec![SpikeTrain::from_f64(&[*target], window)],
                *label,
            )
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct IrisSample {
    pub features: [f64; 4],
    pub class: usize,
}

fn species_class(name: &str) -> Option<usize> {
    let lower = name.trim().to_ascii_lowercase();
    let bare = lower
        .trim_start_matches("iris-")
        .trim_start_matches("iris ")
        .trim_start_matches("i. ")
        .trim();
    match bare {
        "setosa" => Some(0),
        "versicolor" | "versicolour" => Some(1),
        "virginica" => Some(2),
        _ => None,
    }
}

/// Reads the 150-row Iris CSV (four measurements then the species name).
///
/// A header row is skipped when its first field is not numeric. Errors carry
/// the 1-based line number in the file.
pub fn load_iris(path: &Path) -> Result<Vec<IrisSample>, BenchError> {
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut samples = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let row = record.position().map_or(idx + 1, |p| line_of(&text, p.byte() as usize));
        let bad = |message: String| BenchError::Data { path: path.to_path_buf(), row, message };
        if record.iter().all(str::is_empty) {
            continue;
        }
        if idx == 0 && record.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        if record.len() != 5 {
            return Err(bad(format!("expected 5 fields, found {}", record.len())));
        }
        let mut features = [0.0; 4];
        for (i, slot) in features.iter_mut().enumerate() {
            let raw = &record[i];
            let v: f64 = raw.parse().map_err(|_| bad(format!("field {} `{raw}` is not a number", i + 1)))?;
            if !(0.0..=IRIS_MAX_FEATURE).contains(&v) {
                return Err(bad(format!("field {} value {v} outside [0, {IRIS_MAX_FEATURE}]", i + 1)));
            }
            *slot = v;
        }
        let class = species_class(&record[4]).ok_or_else(|| bad(format!("unknown species `{}`", &record[4])))?;
        samples.push(IrisSample { features, class });
    }
    Ok(samples)
}

/// 1-based line of the first non-terminator byte at or after `byte`.
///
/// The reader's own line counter does not count blank lines, and a record's
/// position can point at blank lines that precede it.
fn line_of(text: &str, byte: usize) -> usize {
    let bytes = text.as_bytes();
    let mut start = byte.min(bytes.len());
    while start < bytes.len() && matches!(bytes[start], b'\n' | b'\r') {
        start += 1;
    }
    bytes[..start].iter().filter(|&&b| b == b'\n').count() + 1
}

pub fn iris_pattern(sample: &IrisSample, window: f64) -> PatternPair<f64> {
    PatternPair::new(
        sample.features.iter().map(|&v| SpikeTrain::from_f64(&[v], window)).collect(),
        vec![SpikeTrain::from_f64(&[IRIS_TARGETS[sample.class]], window)],
        sample.class,
    )
}

/// Training set size of a random split: `floor(fraction * n)`.
pub fn split_sizes(n: usize, fraction: f64) -> (usize, usize) {
    let train = ((n as f64) * fraction).floor() as usize;
    (train, n - train)
}

/// Shuffled `fraction` / rest split of the Iris samples.
pub fn build_iris(
    spec: &ExperimentSpec,
    samples: &[IrisSample],
    rng: &mut RngHandle,
) -> (Vec<PatternPair<f64>>, Vec<PatternPair<f64>>) {
    let window = spec.network.grid().window();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(rng);
    let (n_train, _) = split_sizes(samples.len(), spec.train_fraction);
    let to_patterns = |idx: &[usize]| idx.iter().map(|&i| iris_pattern(&samples[i], window)).collect();
    (to_patterns(&order[..n_train]), to_patterns(&order[n_train..]))
}

fn with_window(train: SpikeTrain<f64>, window: f64) -> Result<SpikeTrain<f64>, BenchError> {
    Ok(SpikeTrain::new(train.into_times(), window)?)
}

/// Two symbol trains split from one parent, both meeting `count`.
fn split_pair(
    spec: &PoissonSpec<f64>,
    count: CountRange,
    window: f64,
    rng: &mut RngHandle,
) -> Result<(SpikeTrain<f64>, SpikeTrain<f64>), BenchError> {
    let ok = |t: &SpikeTrain<f64>| t.len() >= count.min && count.max.is_none_or(|m| t.len() <= m);
    for _ in 0..spec.max_attempts {
        let parent = generate_poisson(spec, rng)?;
        let (a, b) = split_train(&parent, rng);
        if ok(&a) && ok(&b) {
            return Ok((with_window(a, window)?, with_window(b, window)?));
        }
    }
    Err(Error::Unsatisfiable {
        attempts: spec.max_attempts,
        what: format!("split trains with {count:?} spikes"),
    }
    .into())
}

/// XOR over two groups of input neurons whose symbols are spike trains.
///
/// Every input neuron owns two symbol trains split from a common Poisson
/// parent; the two output classes likewise own two trains split from one
/// output parent.
pub fn build_xor_spiketrain(spec: &ExperimentSpec, rng: &mut RngHandle) -> Result<Vec<PatternPair<f64>>, BenchError> {
    let g = &spec.generator;
    let grid = spec.network.grid();
    let window = grid.window();
    let n_inputs = spec.network.n_inputs();
    if !n_inputs.is_multiple_of(2) {
        return Err(BenchError::Invalid(format!("xor-spiketrain needs an even input count, got {n_inputs}")));
    }
    // A parent must hold at least two spikes for both children to be nonempty.
    let input_spec = PoissonSpec::new(g.input_rate, g.input_window, grid.dt()).min_isi(g.input_min_isi);
    let symbols: Vec<(SpikeTrain<f64>, SpikeTrain<f64>)> = (0..n_inputs)
        .map(|_| split_pair(&input_spec, g.input_spikes, window, rng))
        .collect::<Result<_, _>>()?;
    let target_spec = PoissonSpec::new(g.target_rate, g.input_window, grid.dt()).min_isi(g.input_min_isi);
    let targets = split_pair(&target_spec, g.target_spikes, window, rng)?;

    let half = n_inputs / 2;
    let pick = |pair: &(SpikeTrain<f64>, SpikeTrain<f64>), bit: usize| if bit == 0 { pair.0.clone() } else { pair.1.clone() };
    Ok([(0, 0), (0, 1), (1, 0), (1, 1)]
        .into_iter()
        .map(|(x, y)| {
            let inputs = symbols
                .iter()
                .enumerate()
                .map(|(i, pair)| pick(pair, if i < half { x } else { y }))
                .collect();
            let label = x ^ y;
            PatternPair::new(inputs, vec![pick(&targets, label)], label)
        })
        .collect())
}

fn count_ok(train: &SpikeTrain<f64>, range: CountRange) -> bool {
    train.len() >= range.min && range.max.is_none_or(|m| train.len() <= m)
}

/// Random input patterns whose targets are produced by a randomly
/// initialized teacher network of the same topology.
///
/// For each pattern, inputs are redrawn until the teacher's output spike
/// counts fall within the target range; a teacher that cannot produce an
/// acceptable target is replaced.
pub fn build_random_classification(
    spec: &ExperimentSpec,
    rng: &mut RngHandle,
) -> Result<(Vec<PatternPair<f64>>, WeightStore<f64>), BenchError> {
    let g = &spec.generator;
    let config = &spec.network;
    let grid = config.grid();
    let input_spec = PoissonSpec::new(g.input_rate, g.input_window, grid.dt())
        .min_isi(g.input_min_isi)
        .spike_count(g.input_spikes.min, g.input_spikes.max);
    'teacher: for _ in 0..TEACHER_ATTEMPTS {
        let teacher = init_weights_with(config, &g.teacher_init, rng)?;
        let mut patterns = Vec::with_capacity(g.patterns);
        for label in 0..g.patterns {
            let mut found = None;
            for _ in 0..INPUT_ATTEMPTS {
                let inputs: Vec<SpikeTrain<f64>> = (0..config.n_inputs())
                    .map(|_| generate_poisson(&input_spec, rng).and_then(|t| SpikeTrain::new(t.into_times(), grid.window())))
                    .collect::<Result<_, _>>()?;
                let targets = respond(config, &teacher, &inputs)?;
                if targets.iter().all(|t| count_ok(t, g.target_spikes)) {
                    found = Some(PatternPair::new(inputs, targets, label));
                    break;
                }
            }
            match found {
                Some(p) => patterns.push(p),
                None => continue 'teacher,
            }
        }
        return Ok((patterns, teacher));
    }
    Err(Error::Unsatisfiable {
        attempts: TEACHER_ATTEMPTS,
        what: format!("teacher targets with {:?} spikes", g.target_spikes),
    }
    .into())
}

/// Training and held-out patterns of one trial.
#[derive(Clone, Debug)]
pub struct TrialData {
    pub train: Vec<PatternPair<f64>>,
    pub test: Vec<PatternPair<f64>>,
}

impl TrialData {
    /// Upper bound of the scaling band: largest target spike count + 2.
    pub fn default_rate_max(&self) -> usize {
        self.train
            .iter()
            .flat_map(|p| p.targets.iter().map(SpikeTrain::len))
            .max()
            .unwrap_or(0)
            + 2
    }
}

pub fn build_trial_data(
    spec: &ExperimentSpec,
    iris: Option<&[IrisSample]>,
    rng: &mut RngHandle,
) -> Result<TrialData, BenchError> {
    let (train, test) = match spec.kind {
        ExperimentKind::XorTiming => (build_xor_timing(spec), Vec::new()),
        ExperimentKind::Iris => {
            let samples = iris.ok_or_else(|| BenchError::MissingKey("iris_path".into()))?;
            build_iris(spec, samples, rng)
        }
        ExperimentKind::XorSpikeTrain => (build_xor_spiketrain(spec, rng)?, Vec::new()),
        ExperimentKind::Patterns | ExperimentKind::Generalise => (build_random_classification(spec, rng)?.0, Vec::new()),
    };
    Ok(TrialData { train, test })
}
