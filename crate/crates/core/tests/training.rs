use snn_resume::network::respond;
use snn_resume::{
    init_weights, train, AccuracySet, ConvergenceSpec, DistanceSpec, ErrorScope, LearningParams, NetworkConfig,
    NeuronParams, PatternPair, RngHandle, Scalar, SimGrid, SpikeTrain, TrainingSet,
};

fn xor<T: Scalar>() -> (NetworkConfig<T>, TrainingSet<T>, ConvergenceSpec<T>) {
    let window = 30.0;
    let delays = (0..12).map(|k| T::lit(k as f64)).collect();
    let config = NetworkConfig::three_layer(
        3,
        5,
        1,
        delays,
        SimGrid::new(T::lit(0.1), T::lit(window)).unwrap(),
        NeuronParams::default(),
    )
    .unwrap();
    let rows = [([0.0, 0.0, 0.0], 16.0, 0), ([0.0, 6.0, 0.0], 10.0, 1), ([6.0, 0.0, 0.0], 10.0, 1), ([6.0, 6.0, 0.0], 16.0, 0)];
    let patterns = rows
        .iter()
        .map(|(inp, tgt, label)| {
            PatternPair::new(
                inp.iter().map(|&t| SpikeTrain::from_f64(&[t], window)).collect(),
                vec![SpikeTrain::from_f64(&[*tgt], window)],
                *label,
            )
        })
        .collect();
    let convergence = ConvergenceSpec {
        error_threshold: T::lit(0.2),
        scope: ErrorScope::Total,
        min_accuracy: None,
        accuracy_set: AccuracySet::Training,
        distance: DistanceSpec::for_window(T::lit(window), T::lit(10.0)),
    };
    (config, TrainingSet::new(patterns), convergence)
}

#[test]
fn xor_timing_converges_and_is_deterministic() {
    let (config, data, conv) = xor::<f64>();
    let params = LearningParams::default();
    let run = |seed| {
        let mut rng = RngHandle::new(seed);
        let w = init_weights(&config, -0.2, 0.8, &mut rng).unwrap();
        train(&config, &params, &conv, &data, w, &mut rng).unwrap()
    };
    let a = run(5);
    assert!(a.converged, "iterations {} error {}", a.iterations, a.final_error);
    assert!(a.final_error < 0.2);
    assert_eq!(a.history.len(), a.iterations);
    assert_eq!(a, run(5));

    // A converged network fires the 0-0 pattern near 16 ms.
    let out = respond(&config, &a.weights, &data.patterns[0].inputs).unwrap();
    assert_eq!(out[0].len(), 1);
    assert!((out[0].times()[0] - 16.0).abs() <= 1.0, "{:?}", out[0].times());
}

#[test]
fn training_runs_in_single_precision() {
    let (config, data, conv) = xor::<f32>();
    let params = LearningParams { max_iterations: 50, ..LearningParams::default() };
    let mut rng = RngHandle::new(5);
    let w = init_weights(&config, -0.2f32, 0.8, &mut rng).unwrap();
    let out = train(&config, &params, &conv, &data, w, &mut rng).unwrap();
    assert!(out.iterations <= 50);
    assert!(out.final_error.is_finite());
}

#[test]
fn rejects_mismatched_patterns() {
    let (config, mut data, conv) = xor::<f64>();
    data.patterns[2].inputs.pop();
    let mut rng = RngHandle::new(1);
    let w = init_weights(&config, -0.2, 0.8, &mut rng).unwrap();
    assert!(train(&config, &LearningParams::default(), &conv, &data, w, &mut rng).is_err());
}
