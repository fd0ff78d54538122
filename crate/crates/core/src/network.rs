//! Feed-forward topology with delayed sub-connections, weight storage and
//! layer-by-layer forward simulation.

use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::spike::{RngHandle, SpikeTrain};
use crate::srm::{run_neuron, NeuronParams, SimGrid};

/// Layer sizes, sub-connection delays, simulation grid and neuron constants.
///
/// `layer_sizes[0]` is the input layer and the last entry the output layer.
/// Every connection between consecutive layers consists of `delays.len()`
/// sub-connections, the k-th of which delays spikes by `delays[k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkConfig<T> {
    layer_sizes: Vec<usize>,
    delays: Vec<T>,
    grid: SimGrid<T>,
    neurons: Vec<NeuronParams<T>>,
}

impl<T: Scalar> NetworkConfig<T> {
    pub fn new(layer_sizes: Vec<usize>, delays: Vec<T>, grid: SimGrid<T>, neuron: NeuronParams<T>) -> Result<Self> {
        let computing = layer_sizes.len().saturating_sub(1);
        Self::with_layer_params(layer_sizes, delays, grid, vec![neuron; computing])
    }

    /// Input, one hidden and output layer.
    pub fn three_layer(
        n_inputs: usize,
        n_hidden: usize,
        n_outputs: usize,
        delays: Vec<T>,
        grid: SimGrid<T>,
        neuron: NeuronParams<T>,
    ) -> Result<Self> {
        Self::new(vec![n_inputs, n_hidden, n_outputs], delays, grid, neuron)
    }

    pub fn with_layer_params(
        layer_sizes: Vec<usize>,
        delays: Vec<T>,
        grid: SimGrid<T>,
        neurons: Vec<NeuronParams<T>>,
    ) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(Error::InvalidParameter(format!(
                "need at least two non-empty layers, got {layer_sizes:?}"
            )));
        }
        if neurons.len() != layer_sizes.len() - 1 {
            return Err(Error::Dimension(format!(
                "{} neuron parameter sets for {} computing layers",
                neurons.len(),
                layer_sizes.len() - 1
            )));
        }
        if delays.is_empty() {
            return Err(Error::InvalidParameter("at least one sub-connection required".into()));
        }
        for (k, &d) in delays.iter().enumerate() {
            if !(d >= T::zero()) {
                return Err(Error::InvalidParameter(format!("delay {k} is negative: {d}")));
            }
            if delays[..k].contains(&d) {
                return Err(Error::InvalidParameter(format!("duplicate delay {d}")));
            }
        }
        for params in &neurons {
            params.validate()?;
        }
        Ok(Self {
            layer_sizes,
            delays,
            grid,
            neurons,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn n_inputs(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn n_outputs(&self) -> usize {
        *self.layer_sizes.last().expect("validated non-empty")
    }

    /// Sizes of the hidden layers (may be empty).
    pub fn hidden_sizes(&self) -> &[usize] {
        &self.layer_sizes[1..self.layer_sizes.len() - 1]
    }

    /// Number of sub-connections per neuron pair.
    pub fn sub_connections(&self) -> usize {
        self.delays.len()
    }

    pub fn delays(&self) -> &[T] {
        &self.delays
    }

    pub fn grid(&self) -> &SimGrid<T> {
        &self.grid
    }

    /// Neuron constants of computing layer `layer` (0 = first hidden layer).
    pub fn neuron(&self, layer: usize) -> &NeuronParams<T> {
        &self.neurons[layer]
    }

    pub fn neurons(&self) -> &[NeuronParams<T>] {
        &self.neurons
    }
}

/// Weights of all sub-connections between two consecutive layers, stored
/// row-major as `[post][pre][k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerWeights<T> {
    n_post: usize,
    n_pre: usize,
    m: usize,
    values: Vec<T>,
}

impl<T: Scalar> LayerWeights<T> {
    pub fn zeros(n_post: usize, n_pre: usize, m: usize) -> Self {
        Self {
            n_post,
            n_pre,
            m,
            values: vec![T::zero(); n_post * n_pre * m],
        }
    }

    pub fn from_values(n_post: usize, n_pre: usize, m: usize, values: Vec<T>) -> Result<Self> {
        if values.len() != n_post * n_pre * m {
            return Err(Error::Dimension(format!(
                "{} values for a {n_post}x{n_pre}x{m} block",
                values.len()
            )));
        }
        Ok(Self {
            n_post,
            n_pre,
            m,
            values,
        })
    }

    pub fn n_post(&self) -> usize {
        self.n_post
    }

    pub fn n_pre(&self) -> usize {
        self.n_pre
    }

    pub fn sub_connections(&self) -> usize {
        self.m
    }

    fn offset(&self, post: usize, pre: usize, k: usize) -> usize {
        debug_assert!(post < self.n_post && pre < self.n_pre && k < self.m);
        (post * self.n_pre + pre) * self.m + k
    }

    pub fn get(&self, post: usize, pre: usize, k: usize) -> T {
        self.values[self.offset(post, pre, k)]
    }

    pub fn set(&mut self, post: usize, pre: usize, k: usize, value: T) {
        let idx = self.offset(post, pre, k);
        self.values[idx] = value;
    }

    /// The `m` sub-connection weights from `pre` to `post`.
    pub fn pair(&self, post: usize, pre: usize) -> &[T] {
        let start = self.offset(post, pre, 0);
        &self.values[start..start + self.m]
    }

    pub fn pair_mut(&mut self, post: usize, pre: usize) -> &mut [T] {
        let start = self.offset(post, pre, 0);
        &mut self.values[start..start + self.m]
    }

    /// All incoming weights of neuron `post`, `[pre][k]` row-major.
    pub fn incoming(&self, post: usize) -> &[T] {
        let len = self.n_pre * self.m;
        &self.values[post * len..(post + 1) * len]
    }

    pub fn incoming_mut(&mut self, post: usize) -> &mut [T] {
        let len = self.n_pre * self.m;
        &mut self.values[post * len..(post + 1) * len]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    fn same_shape(&self, other: &Self) -> bool {
        self.n_post == other.n_post && self.n_pre == other.n_pre && self.m == other.m
    }

    /// Adds `other` element-wise.
    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::Dimension("weight block shapes differ".into()));
        }
        for (w, d) in self.values.iter_mut().zip(&other.values) {
            *w = *w + *d;
        }
        Ok(())
    }
}

/// Trainable weights of every layer, input side first.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightStore<T> {
    layers: Vec<LayerWeights<T>>,
}

impl<T: Scalar> WeightStore<T> {
    pub fn zeros(config: &NetworkConfig<T>) -> Self {
        let m = config.sub_connections();
        let layers = config
            .layer_sizes()
            .windows(2)
            .map(|pair| LayerWeights::zeros(pair[1], pair[0], m))
            .collect();
        Self { layers }
    }

    pub fn from_layers(layers: Vec<LayerWeights<T>>) -> Self {
        Self { layers }
    }

    pub fn layers(&self) -> &[LayerWeights<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [LayerWeights<T>] {
        &mut self.layers
    }

    /// Input-to-first-hidden block.
    pub fn hidden(&self) -> &LayerWeights<T> {
        &self.layers[0]
    }

    pub fn hidden_mut(&mut self) -> &mut LayerWeights<T> {
        &mut self.layers[0]
    }

    /// Block feeding the output layer.
    pub fn output(&self) -> &LayerWeights<T> {
        self.layers.last().expect("at least one layer")
    }

    pub fn output_mut(&mut self) -> &mut LayerWeights<T> {
        self.layers.last_mut().expect("at least one layer")
    }

    /// Checks that the blocks match `config` and every value is finite.
    pub fn validate(&self, config: &NetworkConfig<T>) -> Result<()> {
        let sizes = config.layer_sizes();
        if self.layers.len() != sizes.len() - 1 {
            return Err(Error::Dimension(format!(
                "{} weight blocks for {} layers",
                self.layers.len(),
                sizes.len()
            )));
        }
        for (idx, (block, pair)) in self.layers.iter().zip(sizes.windows(2)).enumerate() {
            if block.n_pre != pair[0] || block.n_post != pair[1] || block.m != config.sub_connections() {
                return Err(Error::Dimension(format!("weight block {idx} does not match the topology")));
            }
            if block.values.iter().any(|w| !w.is_finite()) {
                return Err(Error::InvalidParameter(format!("weight block {idx} holds non-finite values")));
            }
        }
        Ok(())
    }

    /// Euclidean distance between two stores of the same shape.
    pub fn distance(&self, other: &Self) -> T {
        self.layers
            .iter()
            .zip(&other.layers)
            .flat_map(|(a, b)| a.values.iter().zip(&b.values))
            .map(|(&x, &y)| (x - y) * (x - y))
            .sum::<T>()
            .sqrt()
    }
}

/// Divisor applied to freshly drawn weights.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Normalization {
    /// Divide by the number of sub-connections per neuron pair.
    SubConnections,
    /// Divide by all incoming sub-connections of the receiving neuron
    /// (pre-synaptic layer size times sub-connections).
    FanIn,
}

/// Uniform weight initialization followed by normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightInit<T> {
    pub lo: T,
    pub hi: T,
    pub normalization: Normalization,
}

impl<T: Scalar> Default for WeightInit<T> {
    fn default() -> Self {
        Self {
            lo: T::lit(-0.2),
            hi: T::lit(0.8),
            normalization: Normalization::SubConnections,
        }
    }
}

/// Draws every weight i.i.d. from `U[lo, hi)` and divides it by the number of
/// sub-connections.
pub fn init_weights<T: Scalar>(config: &NetworkConfig<T>, lo: T, hi: T, rng: &mut RngHandle) -> Result<WeightStore<T>> {
    init_weights_with(
        config,
        &WeightInit {
            lo,
            hi,
            normalization: Normalization::SubConnections,
        },
        rng,
    )
}

pub fn init_weights_with<T: Scalar>(config: &NetworkConfig<T>, init: &WeightInit<T>, rng: &mut RngHandle) -> Result<WeightStore<T>> {
    if !(init.lo < init.hi) {
        return Err(Error::InvalidParameter(format!(
            "weight range [{}, {}) is empty",
            init.lo, init.hi
        )));
    }
    let m = config.sub_connections();
    let (lo, hi) = (init.lo.as_f64(), init.hi.as_f64());
    let mut store = WeightStore::zeros(config);
    for block in store.layers_mut() {
        let divisor = match init.normalization {
            Normalization::SubConnections => m,
            Normalization::FanIn => m * block.n_pre,
        };
        let divisor = T::from_count(divisor);
        for w in block.values_mut() {
            *w = T::lit(rng.random_range(lo..hi)) / divisor;
        }
    }
    Ok(store)
}

/// Spike trains of every computing layer for one presentation.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardPass<T> {
    layers: Vec<Vec<SpikeTrain<T>>>,
}

impl<T: Scalar> ForwardPass<T> {
    pub fn layers(&self) -> &[Vec<SpikeTrain<T>>] {
        &self.layers
    }

    /// First hidden layer.
    pub fn hidden(&self) -> &[SpikeTrain<T>] {
        &self.layers[0]
    }

    pub fn output(&self) -> &[SpikeTrain<T>] {
        self.layers.last().expect("at least one layer")
    }

    pub fn into_output(mut self) -> Vec<SpikeTrain<T>> {
        self.layers.pop().expect("at least one layer")
    }
}

/// Simulates the network layer by layer; all neuron state is reset for the
/// presentation.
pub fn forward<T: Scalar>(
    config: &NetworkConfig<T>,
    weights: &WeightStore<T>,
    inputs: &[SpikeTrain<T>],
) -> Result<ForwardPass<T>> {
    if inputs.len() != config.n_inputs() {
        return Err(Error::Dimension(format!(
            "{} input trains for {} input neurons",
            inputs.len(),
            config.n_inputs()
        )));
    }
    weights.validate(config)?;
    let grid = config.grid();
    let mut layers: Vec<Vec<SpikeTrain<T>>> = Vec::with_capacity(weights.layers().len());
    let mut drive = vec![T::zero(); grid.steps()];
    for (layer_idx, block) in weights.layers().iter().enumerate() {
        let pre_trains: &[SpikeTrain<T>] = if layer_idx == 0 { inputs } else { &layers[layer_idx - 1] };
        let arrivals = arrival_steps(pre_trains, config.delays(), grid);
        let params = config.neuron(layer_idx);
        let mut out = Vec::with_capacity(block.n_post());
        for post in 0..block.n_post() {
            drive.iter_mut().for_each(|d| *d = T::zero());
            for (pre, per_delay) in arrivals.iter().enumerate() {
                let w = block.pair(post, pre);
                for (k, steps) in per_delay.iter().enumerate() {
                    for &step in steps {
                        drive[step] = drive[step] + w[k];
                    }
                }
            }
            out.push(run_neuron(&drive, params, grid, None));
        }
        layers.push(out);
    }
    Ok(ForwardPass { layers })
}

/// Output trains only.
pub fn respond<T: Scalar>(
    config: &NetworkConfig<T>,
    weights: &WeightStore<T>,
    inputs: &[SpikeTrain<T>],
) -> Result<Vec<SpikeTrain<T>>> {
    forward(config, weights, inputs).map(ForwardPass::into_output)
}

/// `[pre][k] -> grid steps` at which the pre-synaptic spikes arrive.
fn arrival_steps<T: Scalar>(trains: &[SpikeTrain<T>], delays: &[T], grid: &SimGrid<T>) -> Vec<Vec<Vec<usize>>> {
    trains
        .iter()
        .map(|train| {
            delays
                .iter()
                .map(|&d| train.times().iter().filter_map(|&t| grid.step_of(t + d)).collect())
                .collect()
        })
        .collect()
}

const CHECKPOINT_MAGIC: &str = "# snn-resume weight checkpoint";

/// Serializes a network as a text checkpoint.
///
/// Layout: a header of `key values...` lines (`version`, `layers`, `delays`,
/// `dt`, `window`, one `neuron threshold tau_psp tau_refr abs_refractory`
/// line per computing layer), then for every weight block a
/// `weights n_post n_pre m` line followed by `n_post * n_pre` rows of `m`
/// values in `[post][pre][k]` row-major order.
pub fn format_checkpoint<T: Scalar>(config: &NetworkConfig<T>, weights: &WeightStore<T>) -> String {
    let mut text = String::new();
    let join = |values: &mut dyn Iterator<Item = f64>| values.map(|v| v.to_string()).collect::<Vec<_>>().join(" ");
    let _ = writeln!(text, "{CHECKPOINT_MAGIC}");
    let _ = writeln!(text, "version 1");
    let _ = writeln!(
        text,
        "layers {}",
        config.layer_sizes().iter().map(|n| n.to_string()).collect::<Vec<_>>().join(" ")
    );
    let _ = writeln!(text, "delays {}", join(&mut config.delays().iter().map(|d| d.as_f64())));
    let _ = writeln!(text, "dt {}", config.grid().dt().as_f64());
    let _ = writeln!(text, "window {}", config.grid().window().as_f64());
    for p in config.neurons() {
        let _ = writeln!(
            text,
            "neuron {} {} {} {}",
            p.threshold.as_f64(),
            p.tau_psp.as_f64(),
            p.tau_refr.as_f64(),
            p.abs_refractory.as_f64()
        );
    }
    for block in weights.layers() {
        let _ = writeln!(text, "weights {} {} {}", block.n_post(), block.n_pre(), block.sub_connections());
        for row in block.values().chunks(block.sub_connections()) {
            let _ = writeln!(text, "{}", join(&mut row.iter().map(|w| w.as_f64())));
        }
    }
    text
}

pub fn parse_checkpoint<T: Scalar>(text: &str) -> Result<(NetworkConfig<T>, WeightStore<T>)> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let err = |line: usize, message: String| Error::Parse { line, message };
    let nums = |line: usize, toks: &[&str]| -> Result<Vec<f64>> {
        toks.iter()
            .map(|t| t.parse::<f64>().map_err(|_| err(line, format!("bad number `{t}`"))))
            .collect()
    };

    let mut layer_sizes = None;
    let mut delays = None;
    let mut dt = None;
    let mut window = None;
    let mut neurons = Vec::new();
    let mut blocks = Vec::new();
    while let Some((line_no, line)) = lines.next() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks[0] {
            "version" => {
                if toks.get(1) != Some(&"1") {
                    return Err(err(line_no, "unsupported checkpoint version".into()));
                }
            }
            "layers" => {
                let sizes = toks[1..]
                    .iter()
                    .map(|t| t.parse::<usize>().map_err(|_| err(line_no, format!("bad layer size `{t}`"))))
                    .collect::<Result<Vec<_>>>()?;
                layer_sizes = Some(sizes);
            }
            "delays" => delays = Some(nums(line_no, &toks[1..])?.into_iter().map(T::lit).collect::<Vec<T>>()),
            "dt" => dt = nums(line_no, &toks[1..])?.first().copied(),
            "window" => window = nums(line_no, &toks[1..])?.first().copied(),
            "neuron" => {
                let v = nums(line_no, &toks[1..])?;
                if v.len() != 4 {
                    return Err(err(line_no, "neuron line needs 4 values".into()));
                }
                neurons.push(NeuronParams {
                    threshold: T::lit(v[0]),
                    tau_psp: T::lit(v[1]),
                    tau_refr: T::lit(v[2]),
                    abs_refractory: T::lit(v[3]),
                });
            }
            "weights" => {
                let dims = toks[1..]
                    .iter()
                    .map(|t| t.parse::<usize>().map_err(|_| err(line_no, format!("bad dimension `{t}`"))))
                    .collect::<Result<Vec<_>>>()?;
                let [n_post, n_pre, m] = dims[..] else {
                    return Err(err(line_no, "weights line needs 3 dimensions".into()));
                };
                let mut values = Vec::with_capacity(n_post * n_pre * m);
                for _ in 0..n_post * n_pre {
                    let (row_no, row) = lines
                        .next()
                        .ok_or_else(|| err(line_no, "truncated weight block".into()))?;
                    let row_vals = nums(row_no, &row.split_whitespace().collect::<Vec<_>>())?;
                    if row_vals.len() != m {
                        return Err(err(row_no, format!("expected {m} values, found {}", row_vals.len())));
                    }
                    values.extend(row_vals.into_iter().map(T::lit));
                }
                blocks.push(LayerWeights::from_values(n_post, n_pre, m, values)?);
            }
            other => return Err(err(line_no, format!("unknown key `{other}`"))),
        }
    }
    let missing = |what: &str| err(0, format!("checkpoint missing `{what}`"));
    let grid = SimGrid::new(
        T::lit(dt.ok_or_else(|| missing("dt"))?),
        T::lit(window.ok_or_else(|| missing("window"))?),
    )?;
    let config = NetworkConfig::with_layer_params(
        layer_sizes.ok_or_else(|| missing("layers"))?,
        delays.ok_or_else(|| missing("delays"))?,
        grid,
        neurons,
    )?;
    let store = WeightStore::from_layers(blocks);
    store.validate(&config)?;
    Ok((config, store))
}
