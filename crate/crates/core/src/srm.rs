//! Discrete-time Spike Response Model neurons.
//!
//! The membrane potential of a neuron is the after-potential of its most
//! recent spike plus the weighted post-synaptic potentials of all incoming
//! spikes. A spike is emitted on an upward threshold crossing between two
//! consecutive grid steps. During the absolute refractory period the
//! threshold is treated as infinite, so a potential still above threshold
//! when the period ends fires immediately.

use crate::error::{Error, Result};
use crate::scalar::{grid_index, Scalar};
use crate::spike::SpikeTrain;

#[derive(Clone, Debug, PartialEq)]
pub struct NeuronParams<T> {
    pub threshold: T,
    /// Time constant of the post-synaptic potential kernel (ms).
    pub tau_psp: T,
    /// Time constant of the after-potential kernel (ms).
    pub tau_refr: T,
    pub abs_refractory: T,
}

impl<T: Scalar> Default for NeuronParams<T> {
    fn default() -> Self {
        Self {
            threshold: T::lit(0.7),
            tau_psp: T::lit(7.0),
            tau_refr: T::lit(12.0),
            abs_refractory: T::zero(),
        }
    }
}

impl<T: Scalar> NeuronParams<T> {
    pub fn with_refractory(mut self, abs_refractory: T) -> Self {
        self.abs_refractory = abs_refractory;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > T::zero() && self.tau_psp > T::zero() && self.tau_refr > T::zero()) {
            return Err(Error::InvalidParameter(
                "threshold and kernel time constants must be positive".into(),
            ));
        }
        if !(self.abs_refractory >= T::zero()) {
            return Err(Error::InvalidParameter("absolute refractory period must be >= 0".into()));
        }
        Ok(())
    }
}

/// Simulation grid: `steps()` points `0, dt, 2dt, ...` covering `[0, window)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SimGrid<T> {
    dt: T,
    window: T,
    steps: usize,
}

impl<T: Scalar> SimGrid<T> {
    pub fn new(dt: T, window: T) -> Result<Self> {
        if !(dt > T::zero() && window > T::zero()) {
            return Err(Error::InvalidParameter("dt and window must be positive".into()));
        }
        let ratio = window / dt;
        let steps = ratio.round();
        if (ratio - steps).abs() > T::lit(1e-6) * steps.max(T::one()) {
            return Err(Error::InvalidParameter(format!(
                "window {window} is not a multiple of dt {dt}"
            )));
        }
        Ok(Self {
            dt,
            window,
            steps: steps.to_usize().unwrap_or(0),
        })
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn window(&self) -> T {
        self.window
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn time_of(&self, step: usize) -> T {
        T::from_count(step) * self.dt
    }

    /// Grid step nearest to `time`, or `None` when it falls outside the grid.
    pub fn step_of(&self, time: T) -> Option<usize> {
        let idx = grid_index(time, self.dt);
        (idx >= 0 && (idx as usize) < self.steps).then_some(idx as usize)
    }
}

/// Post-synaptic potential `(t/tau) exp(1 - t/tau)`, zero for `t <= 0`.
pub fn psp_kernel<T: Scalar>(t: T, tau: T) -> T {
    if t <= T::zero() {
        return T::zero();
    }
    let x = t / tau;
    x * (T::one() - x).exp()
}

/// After-potential `-threshold exp(-t/tau_r)`, zero for `t <= 0`.
pub fn after_potential<T: Scalar>(t: T, threshold: T, tau_r: T) -> T {
    if t <= T::zero() {
        return T::zero();
    }
    -threshold * (-t / tau_r).exp()
}

/// One weighted, delayed connection into a neuron.
#[derive(Clone, Copy, Debug)]
pub struct Afferent<'a, T> {
    pub train: &'a SpikeTrain<T>,
    pub weight: T,
    pub delay: T,
}

/// Simulates a single neuron driven by `incoming` over `grid`.
pub fn simulate_neuron<T: Scalar>(
    incoming: &[Afferent<'_, T>],
    params: &NeuronParams<T>,
    grid: &SimGrid<T>,
) -> SpikeTrain<T> {
    let mut drive = vec![T::zero(); grid.steps()];
    for aff in incoming {
        for &t in aff.train.times() {
            if let Some(step) = grid.step_of(t + aff.delay) {
                drive[step] = drive[step] + aff.weight;
            }
        }
    }
    run_neuron(&drive, params, grid, None)
}

/// Like [`simulate_neuron`] but also returns the membrane potential at every
/// grid step.
pub fn simulate_neuron_traced<T: Scalar>(
    incoming: &[Afferent<'_, T>],
    params: &NeuronParams<T>,
    grid: &SimGrid<T>,
) -> (SpikeTrain<T>, Vec<T>) {
    let mut drive = vec![T::zero(); grid.steps()];
    for aff in incoming {
        for &t in aff.train.times() {
            if let Some(step) = grid.step_of(t + aff.delay) {
                drive[step] = drive[step] + aff.weight;
            }
        }
    }
    let mut trace = Vec::with_capacity(grid.steps());
    let train = run_neuron(&drive, params, grid, Some(&mut trace));
    (train, trace)
}

/// Integrates a neuron whose summed synaptic weight arriving at step `n` is
/// `drive[n]`.
///
/// The sum of PSP kernels is propagated exactly with two exponentially
/// decaying accumulators: `a = sum w e^{-s/tau}` and
/// `b = sum w s e^{-s/tau}`, so that the synaptic potential is `(e/tau) b`.
pub(crate) fn run_neuron<T: Scalar>(
    drive: &[T],
    params: &NeuronParams<T>,
    grid: &SimGrid<T>,
    mut trace: Option<&mut Vec<T>>,
) -> SpikeTrain<T> {
    let dt = grid.dt();
    let decay = (-dt / params.tau_psp).exp();
    let decay_refr = (-dt / params.tau_refr).exp();
    let gain = T::one().exp() / params.tau_psp;
    let refractory_steps = grid_index(params.abs_refractory, dt).max(0) as usize;
    let threshold = params.threshold;

    let mut a = T::zero();
    let mut b = T::zero();
    let mut eta = T::zero();
    let mut prev_u = T::zero();
    let mut prev_blocked = false;
    let mut last_spike: Option<usize> = None;
    let mut spikes = Vec::new();

    for (step, &w) in drive.iter().enumerate().take(grid.steps()) {
        b = decay * (b + dt * a);
        a = decay * a + w;
        eta = eta * decay_refr;
        let u = eta + gain * b;
        if let Some(tr) = trace.as_deref_mut() {
            tr.push(u);
        }
        let refractory_ok = last_spike.is_none_or(|last| step - last >= refractory_steps);
        // The threshold is infinite while refractory, so its end counts as a
        // crossing when u is already above threshold.
        if refractory_ok && u >= threshold && (prev_u < threshold || prev_blocked) {
            spikes.push(grid.time_of(step));
            last_spike = Some(step);
            // Only the latest spike contributes an after-potential.
            eta = -threshold;
            prev_blocked = false;
        } else {
            prev_blocked = !refractory_ok;
        }
        prev_u = u;
    }
    SpikeTrain::from_sorted(spikes, grid.window())
}
