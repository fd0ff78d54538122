//! Multilayer ReSuMe: STDP/anti-STDP weight updates for the output and hidden
//! layers, synaptic scaling, and the online training loop.
//!
//! Output weights follow the time-integrated ReSuMe rule: STDP between hidden
//! spikes and target spikes, anti-STDP between hidden spikes and actual output
//! spikes, plus a non-Hebbian term proportional to the spike-count mismatch.
//! Hidden weights use the same STDP/anti-STDP construction between input
//! spikes and target/actual output spikes, weighted by the absolute values of
//! the output weights of every backward path.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::metrics::{classify, network_error, DistanceSpec};
use crate::network::{forward, ForwardPass, LayerWeights, NetworkConfig, WeightStore};
use crate::scalar::Scalar;
use crate::spike::{jitter_train, PatternPair, RngHandle, SpikeTrain};

/// Multiplicative homeostasis keeping every hidden and output neuron's spike
/// count within `[min_spikes, max_spikes]` per pattern.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalingParams<T> {
    /// Magnitude of the scaling factor `f`.
    pub factor: T,
    pub min_spikes: usize,
    pub max_spikes: usize,
}

impl<T: Scalar> ScalingParams<T> {
    pub fn new(factor: T, min_spikes: usize, max_spikes: usize) -> Self {
        Self {
            factor,
            min_spikes,
            max_spikes,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LearningParams<T> {
    pub a_plus: T,
    pub a_minus: T,
    pub tau_plus: T,
    pub tau_minus: T,
    /// Non-Hebbian term `a`.
    pub non_hebbian: T,
    /// `None` disables synaptic scaling.
    pub scaling: Option<ScalingParams<T>>,
    pub max_iterations: usize,
}

impl<T: Scalar> Default for LearningParams<T> {
    fn default() -> Self {
        Self {
            a_plus: T::lit(1.2),
            a_minus: T::lit(0.5),
            tau_plus: T::lit(5.0),
            tau_minus: T::lit(5.0),
            non_hebbian: T::lit(0.05),
            scaling: Some(ScalingParams::new(T::lit(0.005), 1, 3)),
            max_iterations: 2000,
        }
    }
}

impl<T: Scalar> LearningParams<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.into()));
        if !(self.a_plus >= T::zero() && self.a_minus >= T::zero() && self.non_hebbian >= T::zero()) {
            return bad("window amplitudes and non-Hebbian term must be non-negative");
        }
        if !(self.tau_plus > T::zero() && self.tau_minus > T::zero()) {
            return bad("window time constants must be positive");
        }
        if let Some(s) = &self.scaling {
            if !(s.factor > T::zero() && s.factor < T::one()) {
                return bad("scaling factor must lie in (0, 1)");
            }
            if s.min_spikes > s.max_spikes {
                return bad("scaling bounds must satisfy min <= max");
            }
        }
        Ok(())
    }
}

/// Learning window: `A+ exp(-s/tau+)` for `s > 0`, `-A- exp(s/tau-)` otherwise.
///
/// `s` is the post-synaptic minus the (delayed) pre-synaptic spike time.
pub fn learning_window<T: Scalar>(s: T, params: &LearningParams<T>) -> T {
    if s > T::zero() {
        params.a_plus * (-s / params.tau_plus).exp()
    } else {
        -params.a_minus * (s / params.tau_minus).exp()
    }
}

/// Sum of `W(t_post - (t_pre + shift))` over all spike pairs.
fn window_sum<T: Scalar>(post: &[T], pre: &[T], shift: T, params: &LearningParams<T>) -> T {
    let mut total = T::zero();
    for &tp in post {
        for &tq in pre {
            total = total + learning_window(tp - (tq + shift), params);
        }
    }
    total
}

/// Unnormalized ReSuMe term for one output neuron, one pre-synaptic train and
/// one sub-connection delay.
fn resume_term<T: Scalar>(
    pre: &SpikeTrain<T>,
    actual: &SpikeTrain<T>,
    target: &SpikeTrain<T>,
    delay: T,
    params: &LearningParams<T>,
) -> T {
    let count_gap = T::from_count(target.len()) - T::from_count(actual.len());
    params.non_hebbian * count_gap + window_sum(target.times(), pre.times(), delay, params)
        - window_sum(actual.times(), pre.times(), delay, params)
}

fn check_outputs<T: Scalar>(config: &NetworkConfig<T>, actual: &[SpikeTrain<T>], target: &[SpikeTrain<T>]) -> Result<()> {
    if actual.len() != config.n_outputs() || target.len() != config.n_outputs() {
        return Err(Error::Dimension(format!(
            "{} actual and {} target trains for {} output neurons",
            actual.len(),
            target.len(),
            config.n_outputs()
        )));
    }
    Ok(())
}

fn require_single_hidden<T: Scalar>(config: &NetworkConfig<T>) -> Result<usize> {
    match config.hidden_sizes() {
        [n_h] => Ok(*n_h),
        sizes => Err(Error::Unsupported(format!(
            "weight updates need exactly one hidden layer, network has {}",
            sizes.len()
        ))),
    }
}

/// Changes of the hidden-to-output weights for one pattern, shaped
/// `[output][hidden][k]`.
pub fn output_layer_delta<T: Scalar>(
    hidden: &[SpikeTrain<T>],
    actual: &[SpikeTrain<T>],
    target: &[SpikeTrain<T>],
    config: &NetworkConfig<T>,
    params: &LearningParams<T>,
) -> Result<LayerWeights<T>> {
    let n_h = require_single_hidden(config)?;
    check_outputs(config, actual, target)?;
    if hidden.len() != n_h {
        return Err(Error::Dimension(format!("{} hidden trains for {n_h} hidden neurons", hidden.len())));
    }
    let m = config.sub_connections();
    let norm = T::one() / T::from_count(m * n_h);
    let mut delta = LayerWeights::zeros(config.n_outputs(), n_h, m);
    for (o, (act, tgt)) in actual.iter().zip(target).enumerate() {
        for (h, train) in hidden.iter().enumerate() {
            for (k, &d) in config.delays().iter().enumerate() {
                delta.set(o, h, k, norm * resume_term(train, act, tgt, d, params));
            }
        }
    }
    Ok(delta)
}

/// Changes of the input-to-hidden weights for one pattern, shaped
/// `[hidden][input][k]`.
///
/// The error of every output neuron reaches a hidden neuron through all `m`
/// sub-connections; each path contributes with the absolute value of its
/// weight, so hidden weights move in the same direction as the output
/// weights they feed.
pub fn hidden_layer_delta<T: Scalar>(
    inputs: &[SpikeTrain<T>],
    actual: &[SpikeTrain<T>],
    target: &[SpikeTrain<T>],
    weights: &WeightStore<T>,
    config: &NetworkConfig<T>,
    params: &LearningParams<T>,
) -> Result<LayerWeights<T>> {
    let n_h = require_single_hidden(config)?;
    check_outputs(config, actual, target)?;
    weights.validate(config)?;
    let n_i = config.n_inputs();
    if inputs.len() != n_i {
        return Err(Error::Dimension(format!("{} input trains for {n_i} inputs", inputs.len())));
    }
    let m = config.sub_connections();
    let norm = T::one() / T::from_count(m * m * n_i * n_h);
    let out_w = weights.output();

    // The STDP term depends on (output, input, k) only.
    let terms: Vec<Vec<T>> = actual
        .iter()
        .zip(target)
        .map(|(act, tgt)| {
            inputs
                .iter()
                .flat_map(|inp| config.delays().iter().map(move |&d| resume_term(inp, act, tgt, d, params)))
                .collect()
        })
        .collect();

    let mut delta = LayerWeights::zeros(n_h, n_i, m);
    for h in 0..n_h {
        let row = delta.incoming_mut(h);
        for (o, term) in terms.iter().enumerate() {
            let path_weight: T = out_w.pair(o, h).iter().map(|w| w.abs()).sum();
            if path_weight == T::zero() {
                continue;
            }
            for (slot, &t) in row.iter_mut().zip(term) {
                *slot = *slot + norm * path_weight * t;
            }
        }
    }
    Ok(delta)
}

/// Weight changes of both layers for one presentation.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightDelta<T> {
    pub hidden: LayerWeights<T>,
    pub output: LayerWeights<T>,
}

impl<T: Scalar> WeightDelta<T> {
    pub fn is_zero(&self) -> bool {
        self.hidden.values().iter().chain(self.output.values()).all(|&d| d == T::zero())
    }

    pub fn apply(&self, weights: &mut WeightStore<T>) -> Result<()> {
        weights.hidden_mut().add_assign(&self.hidden)?;
        weights.output_mut().add_assign(&self.output)
    }
}

/// Both deltas, computed from the same (pre-update) weights.
pub fn resume_deltas<T: Scalar>(
    config: &NetworkConfig<T>,
    weights: &WeightStore<T>,
    inputs: &[SpikeTrain<T>],
    pass: &ForwardPass<T>,
    target: &[SpikeTrain<T>],
    params: &LearningParams<T>,
) -> Result<WeightDelta<T>> {
    Ok(WeightDelta {
        output: output_layer_delta(pass.hidden(), pass.output(), target, config, params)?,
        hidden: hidden_layer_delta(inputs, pass.output(), target, weights, config, params)?,
    })
}

/// `(1+f) w` for excitatory and `w / (1+f)` for inhibitory weights.
pub fn scale_weight<T: Scalar>(w: T, f: T) -> T {
    if w > T::zero() {
        (T::one() + f) * w
    } else if w < T::zero() {
        w / (T::one() + f)
    } else {
        w
    }
}

/// Scales the incoming weights of every hidden and output neuron whose spike
/// count in `pass` lies outside the configured range. Returns the number of
/// neurons scaled.
pub fn synaptic_scaling<T: Scalar>(weights: &mut WeightStore<T>, pass: &ForwardPass<T>, scaling: &ScalingParams<T>) -> usize {
    let mut scaled = 0;
    for (block, trains) in weights.layers_mut().iter_mut().zip(pass.layers()) {
        for (post, train) in trains.iter().enumerate() {
            let f = if train.len() < scaling.min_spikes {
                scaling.factor
            } else if train.len() > scaling.max_spikes {
                -scaling.factor
            } else {
                continue;
            };
            for w in block.incoming_mut(post) {
                *w = scale_weight(*w, f);
            }
            scaled += 1;
        }
    }
    scaled
}

/// Patterns presented during training and the class targets used for
/// classification.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSet<T> {
    pub patterns: Vec<PatternPair<T>>,
    /// `(label, target trains)` candidates, one per class.
    pub classes: Vec<(usize, Vec<SpikeTrain<T>>)>,
    /// Standard deviation (ms) of input jitter applied to every presentation.
    pub input_jitter: T,
    pub target_jitter: T,
}

impl<T: Scalar> TrainingSet<T> {
    /// Classes are taken from the first pattern carrying each label.
    pub fn new(patterns: Vec<PatternPair<T>>) -> Self {
        let classes = class_targets(&patterns);
        Self {
            patterns,
            classes,
            input_jitter: T::zero(),
            target_jitter: T::zero(),
        }
    }

    pub fn with_jitter(mut self, input_jitter: T, target_jitter: T) -> Self {
        self.input_jitter = input_jitter;
        self.target_jitter = target_jitter;
        self
    }
}

/// One `(label, targets)` entry per distinct label, sorted by label.
pub fn class_targets<T: Scalar>(patterns: &[PatternPair<T>]) -> Vec<(usize, Vec<SpikeTrain<T>>)> {
    let mut classes: Vec<(usize, Vec<SpikeTrain<T>>)> = Vec::new();
    for p in patterns {
        if !classes.iter().any(|(l, _)| *l == p.label) {
            classes.push((p.label, p.targets.clone()));
        }
    }
    classes.sort_by_key(|(l, _)| *l);
    classes
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorScope {
    /// Error summed over all patterns.
    Total,
    /// Error averaged per pattern.
    PerPattern,
}

/// Patterns the classification requirement is checked on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AccuracySet {
    /// The clean training patterns.
    Training,
    /// A fresh set of `count` patterns drawn each iteration from the training
    /// patterns with the training jitter applied to inputs.
    FreshNoisy { count: usize },
}

/// Stopping rule of one experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceSpec<T> {
    pub error_threshold: T,
    pub scope: ErrorScope,
    /// Required fraction of correctly classified patterns, if any.
    pub min_accuracy: Option<T>,
    pub accuracy_set: AccuracySet,
    pub distance: DistanceSpec<T>,
}

impl<T: Scalar> ConvergenceSpec<T> {
    pub fn is_met(&self, error: T, accuracy: T) -> bool {
        error < self.error_threshold && self.min_accuracy.is_none_or(|min| accuracy >= min)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationStats<T> {
    /// Network error in the units of the convergence scope.
    pub error: T,
    /// Fraction of correctly classified patterns.
    pub accuracy: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingOutcome<T> {
    pub converged: bool,
    pub iterations: usize,
    pub final_error: T,
    pub accuracy: T,
    pub weights: WeightStore<T>,
    pub history: Vec<IterationStats<T>>,
}

/// Summed network error and accuracy of `weights` on `patterns`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation<T> {
    pub total_error: T,
    pub correct: usize,
    pub count: usize,
}

impl<T: Scalar> Evaluation<T> {
    pub fn accuracy(&self) -> T {
        if self.count == 0 {
            T::zero()
        } else {
            T::from_count(self.correct) / T::from_count(self.count)
        }
    }

    pub fn mean_error(&self) -> T {
        if self.count == 0 {
            T::zero()
        } else {
            self.total_error / T::from_count(self.count)
        }
    }
}

pub fn evaluate<T: Scalar>(
    config: &NetworkConfig<T>,
    weights: &WeightStore<T>,
    patterns: &[PatternPair<T>],
    classes: &[(usize, Vec<SpikeTrain<T>>)],
    distance: &DistanceSpec<T>,
) -> Result<Evaluation<T>> {
    let mut total_error = T::zero();
    let mut correct = 0;
    for p in patterns {
        let output = forward(config, weights, &p.inputs)?.into_output();
        total_error = total_error + network_error(&output, &p.targets, distance)?;
        if classify(&output, classes, distance) == Some(p.label) {
            correct += 1;
        }
    }
    Ok(Evaluation {
        total_error,
        correct,
        count: patterns.len(),
    })
}

fn jittered<T: Scalar>(trains: &[SpikeTrain<T>], sigma: T, dt: T, rng: &mut RngHandle) -> Vec<SpikeTrain<T>> {
    trains.iter().map(|t| jitter_train(t, sigma, dt, rng)).collect()
}

/// Noisy copy of `pattern` with independent jitter on inputs and targets.
pub fn noisy_pattern<T: Scalar>(
    pattern: &PatternPair<T>,
    input_sigma: T,
    target_sigma: T,
    dt: T,
    rng: &mut RngHandle,
) -> PatternPair<T> {
    PatternPair {
        inputs: jittered(&pattern.inputs, input_sigma, dt, rng),
        targets: jittered(&pattern.targets, target_sigma, dt, rng),
        label: pattern.label,
    }
}

/// Trains `initial` on `data` until `convergence` holds or the iteration
/// budget runs out.
pub fn train<T: Scalar>(
    config: &NetworkConfig<T>,
    params: &LearningParams<T>,
    convergence: &ConvergenceSpec<T>,
    data: &TrainingSet<T>,
    initial: WeightStore<T>,
    rng: &mut RngHandle,
) -> Result<TrainingOutcome<T>> {
    train_observed(config, params, convergence, data, initial, rng, |_, _, _| {})
}

/// [`train`] with a callback invoked after every iteration with the
/// iteration number (1-based), the current weights and the iteration stats.
pub fn train_observed<T: Scalar, F>(
    config: &NetworkConfig<T>,
    params: &LearningParams<T>,
    convergence: &ConvergenceSpec<T>,
    data: &TrainingSet<T>,
    initial: WeightStore<T>,
    rng: &mut RngHandle,
    mut observe: F,
) -> Result<TrainingOutcome<T>>
where
    F: FnMut(usize, &WeightStore<T>, &IterationStats<T>),
{
    params.validate()?;
    require_single_hidden(config)?;
    initial.validate(config)?;
    if data.patterns.is_empty() {
        return Err(Error::InvalidParameter("training set is empty".into()));
    }
    for p in &data.patterns {
        if p.inputs.len() != config.n_inputs() || p.targets.len() != config.n_outputs() {
            return Err(Error::Dimension(format!(
                "pattern {} has {} inputs and {} targets for a {:?} network",
                p.label,
                p.inputs.len(),
                p.targets.len(),
                config.layer_sizes()
            )));
        }
    }

    let dt = config.grid().dt();
    let mut weights = initial;
    let mut order: Vec<usize> = (0..data.patterns.len()).collect();
    let mut history = Vec::new();
    let noisy = data.input_jitter > T::zero() || data.target_jitter > T::zero();

    for iteration in 1..=params.max_iterations {
        order.shuffle(rng);
        for &idx in &order {
            let clean = &data.patterns[idx];
            let presented;
            let pattern = if noisy {
                presented = noisy_pattern(clean, data.input_jitter, data.target_jitter, dt, rng);
                &presented
            } else {
                clean
            };
            let pass = forward(config, &weights, &pattern.inputs)?;
            let delta = resume_deltas(config, &weights, &pattern.inputs, &pass, &pattern.targets, params)?;
            delta.apply(&mut weights)?;
            if let Some(scaling) = &params.scaling {
                synaptic_scaling(&mut weights, &pass, scaling);
            }
        }

        let clean_eval = evaluate(config, &weights, &data.patterns, &data.classes, &convergence.distance)?;
        let accuracy = match convergence.accuracy_set {
            AccuracySet::Training => clean_eval.accuracy(),
            AccuracySet::FreshNoisy { count } => {
                let probes: Vec<PatternPair<T>> = (0..count)
                    .map(|i| {
                        let base = &data.patterns[i % data.patterns.len()];
                        noisy_pattern(base, data.input_jitter, T::zero(), dt, rng)
                    })
                    .collect();
                evaluate(config, &weights, &probes, &data.classes, &convergence.distance)?.accuracy()
            }
        };
        let error = match convergence.scope {
            ErrorScope::Total => clean_eval.total_error,
            ErrorScope::PerPattern => clean_eval.mean_error(),
        };
        let stats = IterationStats { error, accuracy };
        history.push(stats);
        observe(iteration, &weights, &stats);
        if convergence.is_met(error, accuracy) {
            return Ok(TrainingOutcome {
                converged: true,
                iterations: iteration,
                final_error: error,
                accuracy,
                weights,
                history,
            });
        }
    }

    let last = history.last().copied().unwrap_or(IterationStats {
        error: T::infinity(),
        accuracy: T::zero(),
    });
    Ok(TrainingOutcome {
        converged: false,
        iterations: params.max_iterations,
        final_error: last.error,
        accuracy: last.accuracy,
        weights,
        history,
    })
}
