//! Spike trains, pattern pairs and the stochastic generators used to build
//! datasets: pseudo-Poisson trains, random splitting and gaussian jitter.

use std::fmt::Write as _;
use std::io::{self, Write};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::scalar::{grid_index, Scalar};

/// Firing times (ms) of one neuron during one pattern presentation.
///
/// Times are strictly increasing and lie in `[0, window_end)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpikeTrain<T> {
    times: Vec<T>,
    window_end: T,
}

impl<T: Scalar> SpikeTrain<T> {
    pub fn new(times: Vec<T>, window_end: T) -> Result<Self> {
        if !(window_end > T::zero()) {
            return Err(Error::InvalidTrain(format!(
                "window end must be positive, got {window_end}"
            )));
        }
        for (idx, &t) in times.iter().enumerate() {
            if !t.is_finite() || t < T::zero() || t >= window_end {
                return Err(Error::InvalidTrain(format!(
                    "spike {idx} at {t} outside [0, {window_end})"
                )));
            }
            if idx > 0 && t <= times[idx - 1] {
                return Err(Error::InvalidTrain(format!(
                    "spike times not strictly increasing at index {idx}"
                )));
            }
        }
        Ok(Self { times, window_end })
    }

    pub fn empty(window_end: T) -> Self {
        Self {
            times: Vec::new(),
            window_end,
        }
    }

    /// Convenience constructor for literal times; panics on invalid input.
    pub fn from_f64(times: &[f64], window_end: f64) -> Self {
        Self::new(times.iter().map(|&t| T::lit(t)).collect(), T::lit(window_end))
            .expect("valid literal spike train")
    }

    pub(crate) fn from_sorted(times: Vec<T>, window_end: T) -> Self {
        debug_assert!(times.windows(2).all(|w| w[0] < w[1]));
        Self { times, window_end }
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn window_end(&self) -> T {
        self.window_end
    }

    /// Spike count, used as the firing rate per pattern window.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn into_times(self) -> Vec<T> {
        self.times
    }
}

/// Input trains, target trains and class label of one training example.
#[derive(Clone, Debug, PartialEq)]
pub struct PatternPair<T> {
    pub inputs: Vec<SpikeTrain<T>>,
    pub targets: Vec<SpikeTrain<T>>,
    pub label: usize,
}

impl<T: Scalar> PatternPair<T> {
    pub fn new(inputs: Vec<SpikeTrain<T>>, targets: Vec<SpikeTrain<T>>, label: usize) -> Self {
        Self {
            inputs,
            targets,
            label,
        }
    }
}

/// Seeded random number generator owned by a single trial.
///
/// Identical seeds give identical streams on every platform (ChaCha8).
#[derive(Clone, Debug)]
pub struct RngHandle {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RngHandle {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Deterministic child handle for stream `index`.
    ///
    /// Distinct indices map to distinct seeds for a fixed parent seed.
    pub fn derive(&self, index: u64) -> RngHandle {
        RngHandle::new(derive_seed(self.seed, index))
    }
}

/// Seed for stream `index` of `master`; injective in `index`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngCore for RngHandle {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

pub const DEFAULT_MAX_ATTEMPTS: usize = 10_000;

/// Parameters of the pseudo-Poisson generator.
///
/// Spikes are drawn as one Bernoulli trial per grid step with probability
/// `rate * dt`; steps closer than `min_isi` to the previous spike are skipped.
/// Trains whose count falls outside `[min_spikes, max_spikes]` are redrawn.
#[derive(Clone, Debug, PartialEq)]
pub struct PoissonSpec<T> {
    /// Spikes per ms.
    pub rate: T,
    pub window: T,
    pub dt: T,
    pub min_isi: T,
    pub min_spikes: usize,
    pub max_spikes: Option<usize>,
    pub max_attempts: usize,
}

impl<T: Scalar> PoissonSpec<T> {
    pub fn new(rate: T, window: T, dt: T) -> Self {
        Self {
            rate,
            window,
            dt,
            min_isi: T::zero(),
            min_spikes: 0,
            max_spikes: None,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
        }
    }

    pub fn min_isi(mut self, min_isi: T) -> Self {
        self.min_isi = min_isi;
        self
    }

    pub fn spike_count(mut self, min_spikes: usize, max_spikes: Option<usize>) -> Self {
        self.min_spikes = min_spikes;
        self.max_spikes = max_spikes;
        self
    }

    pub fn max_attempts(mut self, attempts: usize) -> Self {
        self.max_attempts = attempts;
        self
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.rate > T::zero()) {
            return bad(format!("rate must be positive, got {}", self.rate));
        }
        if !(self.window > T::zero()) || !(self.dt > T::zero()) {
            return bad("window and dt must be positive".into());
        }
        if self.rate * self.dt > T::one() {
            return bad(format!(
                "rate {} too high for step {} (probability above 1)",
                self.rate, self.dt
            ));
        }
        if self.min_isi < T::zero() {
            return bad("min_isi must be non-negative".into());
        }
        if let Some(max) = self.max_spikes {
            if self.min_spikes > max {
                return bad(format!("min_spikes {} > max_spikes {max}", self.min_spikes));
            }
        }
        Ok(())
    }
}

pub fn generate_poisson<T: Scalar>(spec: &PoissonSpec<T>, rng: &mut RngHandle) -> Result<SpikeTrain<T>> {
    spec.validate()?;
    if spec.max_spikes == Some(0) {
        return Ok(SpikeTrain::empty(spec.window));
    }
    let steps = grid_index(spec.window, spec.dt).max(0) as usize;
    let isi_steps = ((spec.min_isi / spec.dt) - T::lit(1e-9)).ceil().to_usize().unwrap_or(0).max(1);
    let p = (spec.rate * spec.dt).as_f64();
    let mut times = Vec::new();
    for _ in 0..spec.max_attempts {
        times.clear();
        let mut next_allowed = 0usize;
        for step in 0..steps {
            if step < next_allowed {
                continue;
            }
            if rng.random::<f64>() < p {
                let t = T::from_count(step) * spec.dt;
                if t >= spec.window {
                    break;
                }
                times.push(t);
                next_allowed = step + isi_steps;
            }
        }
        let n = times.len();
        if n >= spec.min_spikes && spec.max_spikes.is_none_or(|max| n <= max) {
            return Ok(SpikeTrain::from_sorted(times, spec.window));
        }
    }
    Err(Error::Unsatisfiable {
        attempts: spec.max_attempts,
        what: format!(
            "poisson train with {}..{:?} spikes at rate {} over {} ms",
            spec.min_spikes, spec.max_spikes, spec.rate, spec.window
        ),
    })
}

/// Distributes every spike of `parent` to one of two children with
/// probability 1/2 each.
pub fn split_train<T: Scalar>(parent: &SpikeTrain<T>, rng: &mut RngHandle) -> (SpikeTrain<T>, SpikeTrain<T>) {
    let mut left = Vec::new();
    let mut right = Vec::new();
    for &t in parent.times() {
        if rng.random::<bool>() {
            left.push(t);
        } else {
            right.push(t);
        }
    }
    (
        SpikeTrain::from_sorted(left, parent.window_end()),
        SpikeTrain::from_sorted(right, parent.window_end()),
    )
}

/// Moves every spike by an independent `N(0, sigma^2)` offset.
///
/// Moved spikes are clamped into the window (onto `0` or the last grid point
/// before the window end), re-sorted, and spikes landing on the same grid
/// step as an earlier one are merged.
pub fn jitter_train<T: Scalar>(train: &SpikeTrain<T>, sigma: T, dt: T, rng: &mut RngHandle) -> SpikeTrain<T> {
    if !(sigma > T::zero()) || train.is_empty() {
        return train.clone();
    }
    let window = train.window_end();
    let last = (window - dt).max(T::zero());
    let mut moved: Vec<T> = train
        .times()
        .iter()
        .map(|&t| {
            let z: f64 = StandardNormal.sample(rng);
            (t + sigma * T::lit(z)).max(T::zero()).min(last)
        })
        .collect();
    moved.sort_by(|a, b| a.partial_cmp(b).expect("finite spike times"));
    let mut merged: Vec<T> = Vec::with_capacity(moved.len());
    for t in moved {
        match merged.last() {
            Some(&prev) if grid_index(prev, dt) == grid_index(t, dt) || t <= prev => {}
            _ => merged.push(t),
        }
    }
    SpikeTrain::from_sorted(merged, window)
}

/// Writes trains in the line format `index: t1 t2 ...` (ms, 3 decimals).
pub fn write_trains<T: Scalar, W: Write>(out: &mut W, trains: &[SpikeTrain<T>]) -> io::Result<()> {
    out.write_all(format_trains(trains).as_bytes())
}

pub fn format_trains<T: Scalar>(trains: &[SpikeTrain<T>]) -> String {
    let mut text = String::new();
    for (idx, train) in trains.iter().enumerate() {
        let _ = write!(text, "{idx}:");
        for t in train.times() {
            let _ = write!(text, " {:.3}", t.as_f64());
        }
        text.push('\n');
    }
    text
}

/// Parses the line format produced by [`write_trains`].
///
/// Indices must cover `0..n` exactly once; blank lines and `#` comments are
/// skipped.
pub fn parse_trains<T: Scalar>(text: &str, window_end: T) -> Result<Vec<SpikeTrain<T>>> {
    parse_train_lines(text.lines().enumerate().map(|(i, l)| (i + 1, l)), window_end)
}

pub(crate) fn parse_train_lines<'a, T: Scalar>(
    lines: impl Iterator<Item = (usize, &'a str)>,
    window_end: T,
) -> Result<Vec<SpikeTrain<T>>> {
    let mut slots: Vec<Option<SpikeTrain<T>>> = Vec::new();
    for (line_no, raw) in lines {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| Error::Parse { line: line_no, message };
        let (idx, rest) = line
            .split_once(':')
            .ok_or_else(|| parse_err("expected `index: times...`".into()))?;
        let idx: usize = idx
            .trim()
            .parse()
            .map_err(|_| parse_err(format!("bad neuron index `{}`", idx.trim())))?;
        let times = rest
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .map(T::lit)
                    .map_err(|_| parse_err(format!("bad spike time `{tok}`")))
            })
            .collect::<Result<Vec<T>>>()?;
        let train = SpikeTrain::new(times, window_end).map_err(|e| parse_err(e.to_string()))?;
        if slots.len() <= idx {
            slots.resize(idx + 1, None);
        }
        if slots[idx].replace(train).is_some() {
            return Err(parse_err(format!("duplicate neuron index {idx}")));
        }
    }
    slots
        .into_iter()
        .enumerate()
        .map(|(idx, slot)| {
            slot.ok_or_else(|| Error::Parse {
                line: 0,
                message: format!("missing neuron index {idx}"),
            })
        })
        .collect()
}
