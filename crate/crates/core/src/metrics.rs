//! Van Rossum distance between spike trains, network error and
//! nearest-target classification.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::spike::SpikeTrain;

/// Exponentially filtered spike train `f(t) = sum_i exp(-(t - t_i)/tau_c) H(t - t_i)`.
#[derive(Clone, Copy, Debug)]
pub struct FilteredTrain<'a, T> {
    pub train: &'a SpikeTrain<T>,
    pub tau_c: T,
}

impl<T: Scalar> FilteredTrain<'_, T> {
    pub fn value_at(&self, t: T) -> T {
        self.train
            .times()
            .iter()
            .take_while(|&&ti| ti <= t)
            .map(|&ti| (-(t - ti) / self.tau_c).exp())
            .sum()
    }
}

/// `(2/tau) * integral_0^T of the product of the filtered kernels of spikes
/// at `a` and `b``, i.e. `exp(-|a-b|/tau) (1 - exp(-2(T - max)/tau))`.
fn overlap<T: Scalar>(a: T, b: T, tau_c: T, horizon: T) -> T {
    let late = a.max(b);
    if late >= horizon {
        return T::zero();
    }
    let two = T::lit(2.0);
    (-(a - b).abs() / tau_c).exp() * (T::one() - (-two * (horizon - late) / tau_c).exp())
}

fn cross_sum<T: Scalar>(x: &[T], y: &[T], tau_c: T, horizon: T) -> T {
    let mut total = T::zero();
    for &a in x {
        for &b in y {
            total = total + overlap(a, b, tau_c, horizon);
        }
    }
    total
}

/// Squared van Rossum distance `(1/tau_c) * integral_0^T (f - g)^2 dt`,
/// evaluated in closed form over the finite horizon `T`.
pub fn van_rossum_sq<T: Scalar>(x: &SpikeTrain<T>, y: &SpikeTrain<T>, tau_c: T, horizon: T) -> T {
    let (xs, ys) = (x.times(), y.times());
    if xs == ys {
        return T::zero();
    }
    let xx = cross_sum(xs, xs, tau_c, horizon);
    let yy = cross_sum(ys, ys, tau_c, horizon);
    let xy = cross_sum(xs, ys, tau_c, horizon);
    let d2 = (xx + yy - T::lit(2.0) * xy) / T::lit(2.0);
    d2.max(T::zero())
}

/// Integration horizon used for a pattern window: window + 5 tau_c.
pub fn default_horizon<T: Scalar>(window: T, tau_c: T) -> T {
    window + T::lit(5.0) * tau_c
}

/// Which quantity is summed into the network error.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ErrorMeasure {
    /// Squared distance `D^2`.
    #[default]
    Squared,
    /// Distance `D`.
    Distance,
}

/// Parameters of the van Rossum comparison.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistanceSpec<T> {
    pub tau_c: T,
    pub horizon: T,
    pub measure: ErrorMeasure,
}

impl<T: Scalar> DistanceSpec<T> {
    /// `tau_c` with the default horizon for `window`, measuring `D^2`.
    pub fn for_window(window: T, tau_c: T) -> Self {
        Self {
            tau_c,
            horizon: default_horizon(window, tau_c),
            measure: ErrorMeasure::Squared,
        }
    }

    pub fn distance(&self, x: &SpikeTrain<T>, y: &SpikeTrain<T>) -> T {
        let d2 = van_rossum_sq(x, y, self.tau_c, self.horizon);
        match self.measure {
            ErrorMeasure::Squared => d2,
            ErrorMeasure::Distance => d2.sqrt(),
        }
    }
}

/// Network error of one pattern: distance summed over output neurons.
pub fn network_error<T: Scalar>(actual: &[SpikeTrain<T>], target: &[SpikeTrain<T>], spec: &DistanceSpec<T>) -> Result<T> {
    if actual.len() != target.len() {
        return Err(Error::Dimension(format!(
            "{} output trains compared against {} targets",
            actual.len(),
            target.len()
        )));
    }
    Ok(actual.iter().zip(target).map(|(a, d)| spec.distance(a, d)).sum())
}

/// Label of the candidate target set closest to `output`.
///
/// Distances are summed over output neurons; ties go to the smallest label.
/// Returns `None` when there are no candidates.
pub fn classify<T: Scalar>(
    output: &[SpikeTrain<T>],
    candidates: &[(usize, Vec<SpikeTrain<T>>)],
    spec: &DistanceSpec<T>,
) -> Option<usize> {
    let mut best: Option<(T, usize)> = None;
    for (label, targets) in candidates {
        let d: T = output.iter().zip(targets).map(|(o, t)| spec.distance(o, t)).sum();
        best = match best {
            Some((bd, bl)) if bd < d || (bd == d && bl <= *label) => Some((bd, bl)),
            _ => Some((d, *label)),
        };
    }
    best.map(|(_, label)| label)
}
