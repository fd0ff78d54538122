//! Independent numerical oracles and exact-property sweeps.
//!
//! Each check returns a short report on success and a description of the
//! first violation otherwise. Shared by the oracle tests and the acceptance
//! target.
#![allow(dead_code)]

use rand::Rng;
use snn_resume::learning::{hidden_layer_delta, learning_window, output_layer_delta, scale_weight, synaptic_scaling};
use snn_resume::srm::{after_potential, psp_kernel};
use snn_resume::{
    forward, generate_poisson, init_weights, van_rossum_sq, LearningParams, NetworkConfig, NeuronParams, PoissonSpec,
    RngHandle, ScalingParams, SimGrid, SpikeTrain, WeightStore,
};

pub type Check = Result<String, String>;

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

/// PSP and after-potential identities; learning window against direct
/// evaluation of both exponential branches.
pub fn kernel_identities(samples: usize) -> Check {
    ensure(psp_kernel(7.0, 7.0) == 1.0, || format!("eps(tau) = {}", psp_kernel(7.0, 7.0)))?;
    for t in [0.0, -1e-9, -3.0, -100.0] {
        ensure(psp_kernel(t, 7.0) == 0.0, || format!("eps({t}) = {}", psp_kernel(t, 7.0)))?;
    }
    let eta0 = after_potential(1e-12, 0.7, 12.0);
    ensure(rel_err(eta0, -0.7) < 1e-12, || format!("eta(0+) = {eta0}"))?;

    let mut rng = RngHandle::new(1);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let p = LearningParams {
            a_plus: rng.random_range(0.1..2.0),
            a_minus: rng.random_range(0.0..1.5),
            tau_plus: rng.random_range(1.0..10.0),
            tau_minus: rng.random_range(1.0..10.0),
            ..LearningParams::default()
        };
        let s: f64 = rng.random_range(-40.0..40.0);
        let direct = if s > 0.0 {
            p.a_plus * (-s / p.tau_plus).exp()
        } else {
            -p.a_minus * (s / p.tau_minus).exp()
        };
        let w = learning_window(s, &p);
        if direct != 0.0 {
            worst = worst.max(rel_err(w, direct));
        } else {
            ensure(w == 0.0, || format!("W({s}) = {w}, expected 0"))?;
        }
    }
    let p = LearningParams::<f64>::default();
    ensure(learning_window(0.0, &p) == -p.a_minus, || "W(0) is not -A-".into())?;
    ensure(worst < 1e-12, || format!("W(s) worst relative error {worst:e}"))?;
    Ok(format!("eps(tau)=1, eps(t<=0)=0, eta(0+)=-theta, W(s) worst rel err {worst:.1e} over {samples} samples"))
}

/// `(1/tau) * integral_0^T (f - g)^2` by composite Simpson on every interval
/// between consecutive spikes, with at most 0.001 ms per sub-interval.
pub fn van_rossum_quadrature(x: &[f64], y: &[f64], tau: f64, horizon: f64) -> f64 {
    let filtered = |train: &[f64], t: f64| -> f64 {
        train.iter().filter(|&&s| s <= t).map(|&s| (-(t - s) / tau).exp()).sum()
    };
    let mut breaks: Vec<f64> = x.iter().chain(y).copied().filter(|&t| t < horizon).collect();
    breaks.push(0.0);
    breaks.push(horizon);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let mut total = 0.0;
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mut n = ((b - a) / 0.001).ceil() as usize;
        n += n % 2;
        let n = n.max(2);
        let h = (b - a) / n as f64;
        // Evaluate just inside the interval so jumps at `a` are included.
        let eps = 1e-12;
        let g = |t: f64| {
            let t = t.clamp(a + eps, b - eps);
            let d = filtered(x, t) - filtered(y, t);
            d * d
        };
        let mut s = g(a) + g(b);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * g(a + i as f64 * h);
        }
        total += s * h / 3.0;
    }
    total / tau
}

fn random_train(rng: &mut RngHandle, max_spikes: usize, window: f64) -> Vec<f64> {
    let n = rng.random_range(0..=max_spikes);
    let mut t: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..window)).collect();
    t.sort_by(f64::total_cmp);
    t
}

pub fn van_rossum_closed_form(pairs: usize) -> Check {
    let mut rng = RngHandle::new(7);
    let (window, tau) = (30.0, 10.0);
    let horizon = window + 5.0 * tau;
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    while checked < pairs {
        let xs = random_train(&mut rng, 4, window);
        let ys = random_train(&mut rng, 4, window);
        if xs.is_empty() && ys.is_empty() {
            continue;
        }
        let closed = van_rossum_sq(&SpikeTrain::from_f64(&xs, window), &SpikeTrain::from_f64(&ys, window), tau, horizon);
        let numeric = van_rossum_quadrature(&xs, &ys, tau, horizon);
        worst = worst.max(rel_err(closed, numeric));
        checked += 1;
    }
    ensure(worst < 1e-6, || format!("worst relative error {worst:e}"))?;

    let x = SpikeTrain::from_f64(&[3.0, 9.5, 20.0], window);
    let self_d = van_rossum_sq(&x, &x, tau, horizon);
    ensure(self_d == 0.0, || format!("D2(x,x) = {self_d}"))?;
    let single = van_rossum_sq(&SpikeTrain::from_f64(&[5.0], window), &SpikeTrain::from_f64(&[], window), tau, horizon);
    ensure((single - 0.5).abs() < 1e-3, || format!("single spike vs empty = {single}"))?;
    Ok(format!("worst rel err {worst:.1e} on {pairs} pairs, D2(x,x)=0, single-vs-empty={single:.6}"))
}

/// Learning-window integral by marching a grid of `step` ms.
///
/// Spike times are integer multiples of the step. Two exponential traces are
/// advanced by RK4 on `dx/dt = -x/tau`:
/// * `post_trace` holds `sum a_pre(s) [S_d - S_a](t - s)` over `s >= 0` and is
///   read at every pre-synaptic spike after same-time post spikes are added;
/// * `pre_trace` holds `sum a_post(s) S_pre(t - s)` over `s > 0` and is read
///   at every post spike before same-time pre spikes are added.
pub fn integrate_bracket(pre: &[i64], actual: &[i64], target: &[i64], p: &LearningParams<f64>, step: f64) -> f64 {
    let rk4 = |tau: f64| {
        let h = step / tau;
        1.0 - h + h * h / 2.0 - h * h * h / 6.0 + h * h * h * h / 24.0
    };
    let (decay_pre, decay_post) = (rk4(p.tau_plus), rk4(p.tau_minus));
    let last = pre.iter().chain(actual).chain(target).copied().max().unwrap_or(0);
    let first = pre.iter().chain(actual).chain(target).copied().min().unwrap_or(0);
    let mut pre_trace = 0.0;
    let mut post_trace = 0.0;
    let mut total = 0.0;
    for n in first..=last {
        pre_trace *= decay_pre;
        post_trace *= decay_post;
        let d = target.iter().filter(|&&t| t == n).count() as f64;
        let a = actual.iter().filter(|&&t| t == n).count() as f64;
        // Post spikes: [S_d - S_a] (a + integral a_post S_pre).
        total += (d - a) * (p.non_hebbian + pre_trace);
        post_trace += -p.a_minus * (d - a);
        let pre_here = pre.iter().filter(|&&t| t == n).count() as f64;
        total += pre_here * post_trace;
        pre_trace += p.a_plus * pre_here;
    }
    total
}

fn random_ticks(rng: &mut RngHandle, max: usize, window_ticks: i64, min: usize) -> Vec<i64> {
    let n = rng.random_range(min..=max);
    // Times on a 0.01 ms lattice, which the 0.001 ms grid contains.
    let mut t: Vec<i64> = (0..n).map(|_| rng.random_range(0..window_ticks / 10) * 10).collect();
    t.sort();
    t.dedup();
    t
}

fn to_train(ticks: &[i64], step: f64, window: f64) -> SpikeTrain<f64> {
    let times: Vec<f64> = ticks.iter().map(|&t| t as f64 * step).collect();
    SpikeTrain::from_f64(&times, window)
}

/// Closed-form output and hidden deltas against time integration, on
/// `instances` random single-pattern problems alternating m = 1 and m = 4.
pub fn weight_update_integration(instances: usize) -> Check {
    let step = 0.001;
    let window = 30.0;
    let window_ticks = (window / step) as i64;
    let mut rng = RngHandle::new(11);
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    for instance in 0..instances {
        let m = if instance % 2 == 0 { 1 } else { 4 };
        let (n_i, n_h) = (2, 3);
        let delays: Vec<f64> = (0..m).map(|k| k as f64 * 1.5).collect();
        let grid = SimGrid::new(0.1, window + 10.0).map_err(|e| e.to_string())?;
        let config = NetworkConfig::three_layer(n_i, n_h, 1, delays.clone(), grid, NeuronParams::default())
            .map_err(|e| e.to_string())?;
        let params = LearningParams {
            a_plus: rng.random_range(0.5..2.0),
            a_minus: rng.random_range(0.2..1.0),
            tau_plus: rng.random_range(2.0..8.0),
            tau_minus: rng.random_range(2.0..8.0),
            non_hebbian: rng.random_range(0.0..0.1),
            ..LearningParams::default()
        };
        let hidden: Vec<Vec<i64>> = (0..n_h).map(|_| random_ticks(&mut rng, 3, window_ticks, 0)).collect();
        let inputs: Vec<Vec<i64>> = (0..n_i).map(|_| random_ticks(&mut rng, 3, window_ticks, 1)).collect();
        let actual = random_ticks(&mut rng, 3, window_ticks, 0);
        let target = random_ticks(&mut rng, 3, window_ticks, 1);
        let w_end = window + 10.0;
        let hidden_trains: Vec<_> = hidden.iter().map(|t| to_train(t, step, w_end)).collect();
        let input_trains: Vec<_> = inputs.iter().map(|t| to_train(t, step, w_end)).collect();
        let actual_t = vec![to_train(&actual, step, w_end)];
        let target_t = vec![to_train(&target, step, w_end)];

        let mut weights = WeightStore::zeros(&config);
        for w in weights.output_mut().values_mut() {
            *w = rng.random_range(-1.0..1.0);
        }
        let out_delta =
            output_layer_delta(&hidden_trains, &actual_t, &target_t, &config, &params).map_err(|e| e.to_string())?;
        let hid_delta = hidden_layer_delta(&input_trains, &actual_t, &target_t, &weights, &config, &params)
            .map_err(|e| e.to_string())?;

        let shifted = |ticks: &[i64], d: f64| -> Vec<i64> { ticks.iter().map(|&t| t + (d / step).round() as i64).collect() };
        let mut compare = |closed: f64, numeric: f64, what: &str| -> Result<(), String> {
            compared += 1;
            if numeric.abs() > 1e-9 {
                worst = worst.max(rel_err(closed, numeric));
                Ok(())
            } else {
                ensure(closed.abs() < 1e-9, || format!("instance {instance} {what}: closed {closed}, numeric 0"))
            }
        };
        for (h, ticks) in hidden.iter().enumerate() {
            for (k, &d) in delays.iter().enumerate() {
                let numeric = integrate_bracket(&shifted(ticks, d), &actual, &target, &params, step) / (m * n_h) as f64;
                compare(out_delta.get(0, h, k), numeric, "output delta")?;
            }
        }
        for h in 0..n_h {
            let path: f64 = weights.output().pair(0, h).iter().map(|w| w.abs()).sum();
            for (i, ticks) in inputs.iter().enumerate() {
                for (k, &d) in delays.iter().enumerate() {
                    let bracket = integrate_bracket(&shifted(ticks, d), &actual, &target, &params, step);
                    let numeric = path * bracket / (m * m * n_i * n_h) as f64;
                    compare(hid_delta.get(h, i, k), numeric, "hidden delta")?;
                }
            }
        }
    }
    ensure(worst < 1e-6, || format!("worst relative error {worst:e}"))?;
    Ok(format!("worst rel err {worst:.1e} over {compared} weights in {instances} instances (m=1,4)"))
}

/// Single-spike sign properties with a = 0: the output delta is negative
/// when the output fires early and positive when late, flips sign exactly
/// when actual and target are swapped, and the hidden delta carries the same
/// sign for positive and negative output weights.
pub fn sign_properties(cases: usize) -> Check {
    let mut rng = RngHandle::new(13);
    let window = 60.0;
    let config = NetworkConfig::three_layer(1, 1, 1, vec![0.0], SimGrid::new(0.1, window).map_err(|e| e.to_string())?, NeuronParams::default())
        .map_err(|e| e.to_string())?;
    let p = LearningParams { non_hebbian: 0.0, ..LearningParams::default() };
    let tr = |t: f64| vec![SpikeTrain::from_f64(&[t], window)];
    let mut done = 0;
    while done < cases {
        let t_pre: f64 = rng.random_range(0.0..10.0);
        let gap_o: f64 = rng.random_range(0.1..15.0);
        let gap_d: f64 = rng.random_range(0.1..15.0);
        if (gap_o - gap_d).abs() < 1e-6 {
            continue;
        }
        // Both post spikes after the pre spike, or both before it.
        let (t_o, t_d, t_h) = if rng.random_bool(0.5) {
            (t_pre + gap_o, t_pre + gap_d, t_pre)
        } else {
            (t_pre, t_pre + (gap_d - gap_o), t_pre + gap_o.max(gap_d - gap_o) + 0.5)
        };
        if t_o < 0.0 || t_d < 0.0 {
            continue;
        }
        let err = |e: snn_resume::Error| e.to_string();
        let d_out = output_layer_delta(&tr(t_h), &tr(t_o), &tr(t_d), &config, &p).map_err(err)?.get(0, 0, 0);
        let swapped = output_layer_delta(&tr(t_h), &tr(t_d), &tr(t_o), &config, &p).map_err(err)?.get(0, 0, 0);
        let case = format!("t_o={t_o} t_d={t_d} t_h={t_h}");
        ensure(if t_o < t_d { d_out < 0.0 } else { d_out > 0.0 }, || format!("{case}: output delta {d_out}"))?;
        ensure(d_out == -swapped, || format!("{case}: {d_out} vs swapped {swapped}"))?;
        for w_oh in [-0.8, -0.1, 0.1, 0.8] {
            let mut weights = WeightStore::zeros(&config);
            weights.output_mut().set(0, 0, 0, w_oh);
            let d_hid = hidden_layer_delta(&tr(t_h), &tr(t_o), &tr(t_d), &weights, &config, &p).map_err(err)?.get(0, 0, 0);
            ensure(d_hid.signum() == d_out.signum(), || format!("{case} w_oh={w_oh}: hidden {d_hid}, output {d_out}"))?;
        }
        done += 1;
    }
    Ok(format!("{cases} random single-spike cases (pre-before-post and post-before-pre), w_oh in {{-0.8,-0.1,0.1,0.8}}"))
}

fn small_config(n_i: usize, n_h: usize, m: usize, refractory: f64) -> Result<NetworkConfig<f64>, String> {
    let delays = (0..m).map(|k| k as f64).collect();
    let grid = SimGrid::new(0.5, 40.0).map_err(|e| e.to_string())?;
    NetworkConfig::three_layer(n_i, n_h, 1, delays, grid, NeuronParams::default().with_refractory(refractory))
        .map_err(|e| e.to_string())
}

fn poisson_inputs(n: usize, rng: &mut RngHandle) -> Result<Vec<SpikeTrain<f64>>, String> {
    let spec = PoissonSpec::new(0.1, 40.0, 0.5);
    (0..n).map(|_| generate_poisson(&spec, rng).map_err(|e| e.to_string())).collect()
}

/// Output equal to target gives identically zero deltas in both layers.
pub fn zero_error_fixed_point(cases: usize) -> Check {
    let mut rng = RngHandle::new(17);
    let p = LearningParams::default();
    let mut nonempty = 0;
    for case in 0..cases {
        let m = 1 + case % 3;
        let config = small_config(3, 4, m, 0.0)?;
        let weights = init_weights(&config, -0.2, 1.5, &mut rng).map_err(|e| e.to_string())?;
        let inputs = poisson_inputs(3, &mut rng)?;
        let pass = forward(&config, &weights, &inputs).map_err(|e| e.to_string())?;
        let target = pass.output().to_vec();
        nonempty += usize::from(!target[0].is_empty());
        let out = output_layer_delta(pass.hidden(), pass.output(), &target, &config, &p).map_err(|e| e.to_string())?;
        let hid = hidden_layer_delta(&inputs, pass.output(), &target, &weights, &config, &p).map_err(|e| e.to_string())?;
        ensure(out.values().iter().chain(hid.values()).all(|&d| d == 0.0), || format!("case {case}: nonzero delta"))?;
    }
    Ok(format!("{cases} networks ({nonempty} with output spikes): all deltas exactly 0"))
}

/// Exact scaling factors with sign preservation, and neurons whose spike
/// count lies inside the band are left untouched.
pub fn scaling_properties(cases: usize) -> Check {
    let mut rng = RngHandle::new(19);
    for _ in 0..cases {
        let w: f64 = rng.random_range(-2.0..2.0);
        let f: f64 = rng.random_range(0.001..0.1);
        let (up, down) = (scale_weight(w, f), scale_weight(w, -f));
        ensure(up.signum() == w.signum() && down.signum() == w.signum(), || format!("sign flip at w={w}"))?;
        let exact = if w > 0.0 {
            up == (1.0 + f) * w && down == (1.0 - f) * w
        } else {
            up == w / (1.0 + f) && down == w / (1.0 - f)
        };
        ensure(exact, || format!("w={w} f={f}: up {up} down {down}"))?;
    }
    let (mut inside, mut outside) = (0, 0);
    for case in 0..cases {
        let config = small_config(3, 6, 1, 3.0)?;
        let weights = init_weights(&config, -0.2, 2.0, &mut rng).map_err(|e| e.to_string())?;
        let inputs = poisson_inputs(3, &mut rng)?;
        let pass = forward(&config, &weights, &inputs).map_err(|e| e.to_string())?;
        let scaling = ScalingParams::new(0.005, 1, 3);
        let mut scaled = weights.clone();
        let n = synaptic_scaling(&mut scaled, &pass, &scaling);
        let mut expected = 0;
        for (layer, trains) in pass.layers().iter().enumerate() {
            for (post, train) in trains.iter().enumerate() {
                let before = weights.layers()[layer].incoming(post);
                let after = scaled.layers()[layer].incoming(post);
                if (1..=3).contains(&train.len()) {
                    inside += 1;
                    ensure(before == after, || format!("case {case}: in-band neuron {layer}/{post} changed"))?;
                } else {
                    outside += 1;
                    expected += 1;
                    let f = if train.is_empty() { 0.005 } else { -0.005 };
                    ensure(before.iter().zip(after).all(|(&b, &a)| a == scale_weight(b, f)), || {
                        format!("case {case}: neuron {layer}/{post} not scaled by (1+f)^(+-1)")
                    })?;
                }
            }
        }
        ensure(n == expected, || format!("case {case}: reported {n} scaled neurons, expected {expected}"))?;
    }
    Ok(format!("{cases} weights exact, {inside} in-band neurons untouched, {outside} out-of-band scaled"))
}
