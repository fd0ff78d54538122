//! Feed-forward spiking neural networks of Spike Response Model neurons
//! trained with multilayer ReSuMe.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the scalar for the common cases.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod learning;
pub mod metrics;
pub mod network;
pub mod scalar;
pub mod spike;
pub mod srm;

pub use error::{Error, Result};
pub use learning::{
    evaluate, hidden_layer_delta, learning_window, output_layer_delta, resume_deltas, synaptic_scaling, train,
    train_observed, AccuracySet, ConvergenceSpec, ErrorScope, IterationStats, LearningParams, ScalingParams,
    TrainingOutcome, TrainingSet, WeightDelta,
};
pub use metrics::{classify, network_error, van_rossum_sq, DistanceSpec, ErrorMeasure};
pub use network::{
    forward, init_weights, init_weights_with, ForwardPass, LayerWeights, NetworkConfig, Normalization, WeightInit,
    WeightStore,
};
pub use scalar::Scalar;
pub use spike::{generate_poisson, jitter_train, split_train, PatternPair, PoissonSpec, RngHandle, SpikeTrain};
pub use srm::{after_potential, psp_kernel, simulate_neuron, Afferent, NeuronParams, SimGrid};

pub type SpikeTrain64 = SpikeTrain<f64>;
pub type SpikeTrain32 = SpikeTrain<f32>;
pub type PatternPair64 = PatternPair<f64>;
pub type PatternPair32 = PatternPair<f32>;
pub type NetworkConfig64 = NetworkConfig<f64>;
pub type NetworkConfig32 = NetworkConfig<f32>;
pub type WeightStore64 = WeightStore<f64>;
pub type WeightStore32 = WeightStore<f32>;
pub type LearningParams64 = LearningParams<f64>;
pub type LearningParams32 = LearningParams<f32>;
pub type NeuronParams64 = NeuronParams<f64>;
pub type NeuronParams32 = NeuronParams<f32>;
