mod common;

use common::{forward_loss, numeric_gradient, relative_error};
use dfaforge::rnn::{encode, train, SecondOrderRnn, TrainConfig, RESPONSE_INDEX, STOP};
use dfaforge::{generate_dataset, GrammarId};
use proptest::prelude::*;

fn binary(max: usize) -> impl Strategy<Value = String> {
    prop::collection::vec(prop::bool::ANY, 0..=max)
        .prop_map(|v| v.into_iter().map(|b| if b { '1' } else { '0' }).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bptt_matches_finite_differences(
        n in 1usize..=5,
        s in binary(6),
        label in any::<bool>(),
        seed in any::<u64>(),
        scale in 0.1f64..2.0,
    ) {
        let h0 = SecondOrderRnn::random_h_init(n, seed ^ 1);
        let rnn = SecondOrderRnn::random(h0, scale, seed).unwrap();
        let mut grad = vec![0.0; rnn.weights().len()];
        let loss = rnn.loss_and_gradient(&encode(&s).unwrap(), label, &mut grad);
        prop_assert!((loss - forward_loss(&rnn, &s, label)).abs() < 1e-12);
        let numeric = numeric_gradient(&rnn, &s, label, 1e-6);
        prop_assert!(relative_error(&grad, &numeric) < 1e-4);
    }

    #[test]
    fn readout_is_response_neuron_after_stop(n in 1usize..=6, s in binary(10), seed in any::<u64>()) {
        let rnn = SecondOrderRnn::random(SecondOrderRnn::default_h_init(n), 1.0, seed).unwrap();
        let trace = rnn.run(&s).unwrap();
        prop_assert_eq!(trace.len(), s.len() + 2);
        let before = trace.state(s.len());
        let after = rnn.step(before, STOP);
        prop_assert_eq!(after[RESPONSE_INDEX], trace.readout());
        prop_assert_eq!(rnn.readout(&s).unwrap(), trace.readout());
    }
}

#[test]
fn training_lowers_the_loss() {
    let split = generate_dataset(GrammarId::new(4).unwrap(), 3, 8, 0.2, 0).unwrap();
    let cfg = TrainConfig {
        epochs: 5,
        seed: 3,
        ..Default::default()
    };
    let rnn = cfg.initial_model(SecondOrderRnn::default_h_init(6)).unwrap();
    let before = rnn.accuracy(&split.test);
    let out = train(rnn, &split.train, &cfg, &[2, 5]).unwrap();
    assert!(out.losses.last().unwrap() < out.losses.first().unwrap(), "{:?}", out.losses);
    assert!(out.model.accuracy(&split.test) >= before);
    assert_eq!(out.snapshots.iter().map(|s| s.0).collect::<Vec<_>>(), vec![2, 5]);
}

#[test]
fn model_file_round_trip() {
    let rnn = SecondOrderRnn::random(SecondOrderRnn::random_h_init(5, 1), 0.7, 8).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    rnn.save(&path, Some(8)).unwrap();
    let (back, seed) = SecondOrderRnn::load(&path).unwrap();
    assert_eq!(back, rnn);
    assert_eq!(seed, Some(8));
}
