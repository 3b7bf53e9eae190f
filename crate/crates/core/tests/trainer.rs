mod common;

use std::time::Duration;

use milptrain::dataset::{one_hot, Batch};
use milptrain::encodings::{build_lastlayer_lp, WeightWindow, WeightWindowRule};
use milptrain::model::Compiled;
use milptrain::network::{Layer, LayerSpec, Network};
use milptrain::simplex::{solve_lp, SolverConfig};
use milptrain::trainer::{
    committee_accuracy, committee_predict, init_network, train_batch, train_batched_stream,
    TrainConfig, TrainState,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Node-limited so results do not depend on machine speed.
fn quick_config(seed: u64) -> TrainConfig {
    TrainConfig {
        time_limit: None,
        node_limit: Some(300),
        max_while_iterations: 4,
        seed,
        ..TrainConfig::default()
    }
}

fn random_batch(rng: &mut ChaCha8Rng, m: usize, d: usize) -> Batch {
    let inputs = (0..m)
        .map(|_| (0..d).map(|_| rng.random_range(0.0..=1.0)).collect())
        .collect();
    let labels = (0..m).map(|_| rng.random_range(0..10)).collect();
    Batch::new(inputs, labels)
}

/// Output-layer loss: a zero target only charges positive outputs.
fn last_layer_loss(net: &Network, batch: &Batch) -> f64 {
    let layer = net.layers.last().unwrap();
    let mut loss = 0.0;
    for (x, t) in batch.inputs.iter().zip(&batch.targets) {
        for (j, &tj) in t.iter().enumerate() {
            let a = layer.pre_activation(j, x);
            loss += if tj == 0.0 { a.max(0.0) } else { (a - tj).abs() };
        }
    }
    loss
}

#[test]
fn single_layer_training_is_one_lp_per_neuron() {
    let mut rng = common::rng(41);
    let mut improved = 0;
    for case in 0..12 {
        let batch = random_batch(&mut rng, 12, 4);
        let config = quick_config(case);
        let net = init_network(&[LayerSpec::dense(4, 10)], &config).unwrap();
        let initial_loss = last_layer_loss(&net, &batch);
        let mut state = TrainState::new(net);
        let report = train_batch(&mut state, &batch, &config).unwrap();
        assert_eq!(report.stats.milps, 0, "case {case}");
        assert!(report.trace.len() <= 2, "case {case}: {:?}", report.trace);

        // least-l1 fit of every neuron, solved directly
        let mut best_loss = 0.0;
        for j in 0..10 {
            let column: Vec<f64> = batch.targets.iter().map(|t| t[j]).collect();
            let enc = build_lastlayer_lp(&LayerSpec::dense(4, 10), j, &batch.inputs, &column, None)
                .unwrap();
            let Compiled::Lp(lp) = enc.compile().unwrap() else { panic!() };
            best_loss += solve_lp(&lp, &SolverConfig::default()).unwrap().objective;
        }
        assert!(best_loss <= initial_loss + 1e-9);
        if report.trace[0] > report.initial_accuracy {
            improved += 1;
            let fitted = last_layer_loss(&state.best_net, &batch);
            assert!((fitted - best_loss).abs() <= 1e-6, "case {case}: {fitted} vs {best_loss}");
            assert!(fitted <= initial_loss + 1e-9);
        }
    }
    assert!(improved > 0);
}

#[test]
fn perfect_network_runs_one_iteration_and_skips_postprocessing() {
    let mut layer = Layer::zeros(LayerSpec::dense(10, 10));
    for j in 0..10 {
        layer.weights[j * 10 + j] = 1.0;
    }
    let net = Network::new(vec![layer]).unwrap();
    let labels = vec![3, 1, 4, 1, 5, 9, 2, 6];
    let batch = Batch::new(labels.iter().map(|&l| one_hot(l)).collect(), labels);
    let mut state = TrainState::new(net);
    let report = train_batch(&mut state, &batch, &quick_config(0)).unwrap();
    assert_eq!(report.initial_accuracy, 1.0);
    assert_eq!(report.trace.len(), 1);
    assert!(report.postprocess.is_none());
    assert_eq!(report.final_accuracy, 1.0);
}

#[test]
fn loop_invariants_on_small_networks() {
    let mut rng = common::rng(42);
    for case in 0..6 {
        let batch = random_batch(&mut rng, 8, 5);
        let config = quick_config(100 + case);
        let specs = [LayerSpec::dense(5, 3), LayerSpec::dense(3, 10)];
        let mut state = TrainState::new(init_network(&specs, &config).unwrap());
        let report = train_batch(&mut state, &batch, &config).unwrap();
        assert!(report.diagnostics.is_empty(), "{:?}", report.diagnostics);
        assert!(!report.trace.is_empty() && report.trace.len() <= config.max_while_iterations);
        // stops at the first non-improving iteration
        for w in report.trace.windows(2).take(report.trace.len().saturating_sub(2)) {
            assert!(w[1] > w[0], "case {case}: {:?}", report.trace);
        }
        let best = report
            .trace
            .iter()
            .copied()
            .fold(report.initial_accuracy, f64::max);
        assert_eq!(report.best_accuracy, best);
        assert!(report.best_accuracy >= report.initial_accuracy);
        let restored = state.best_net.accuracy(&batch.inputs, &batch.labels).unwrap();
        assert_eq!(restored, report.best_accuracy);
        match report.postprocess {
            None => assert_eq!(report.final_accuracy, report.best_accuracy),
            Some(p) => {
                assert_eq!(p.before, report.best_accuracy);
                assert!(report.final_accuracy >= report.best_accuracy);
            }
        }
        // the input targets of each layer have that layer's input width
        for (i, t) in state.target_values.iter().enumerate() {
            assert_eq!(t.len(), batch.len());
            assert!(t.iter().all(|row| row.len() == specs[i].outputs));
        }
        // dense weights never leave [-1, 1]
        assert!(state
            .net
            .layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.offsets))
            .all(|w| w.abs() <= 1.0 + 1e-12));
    }
}

#[test]
fn fixed_seed_gives_identical_weights() {
    let mut rng = common::rng(43);
    let batch = random_batch(&mut rng, 10, 6);
    let config = quick_config(7);
    let specs = [LayerSpec::dense(6, 4), LayerSpec::dense(4, 10)];
    let run = || {
        let mut state = TrainState::new(init_network(&specs, &config).unwrap());
        train_batch(&mut state, &batch, &config).unwrap();
        state.net
    };
    assert_eq!(run(), run());
}

#[test]
fn stream_respects_weight_windows() {
    let mut rng = common::rng(44);
    let batches: Vec<Batch> = (0..3).map(|_| random_batch(&mut rng, 8, 5)).collect();
    let config = TrainConfig {
        postprocess_every: 2,
        ..quick_config(3)
    };
    let specs = [LayerSpec::dense(5, 4), LayerSpec::dense(4, 10)];
    let net = init_network(&specs, &config).unwrap();
    let mut seen_rows = 0;
    let out = train_batched_stream(net, &batches, Some(&batches[0]), &config, |_| seen_rows += 1)
        .unwrap();
    assert_eq!(seen_rows, 3);
    assert_eq!(out.snapshots.len(), 4);
    for t in 2..=3 {
        for (prev, cur) in out.snapshots[t - 1].layers.iter().zip(&out.snapshots[t].layers) {
            let w = WeightWindow::around(prev, &WeightWindowRule::default());
            assert!(w.max_violation(cur) < 1e-9, "batch {t}");
        }
    }
    for r in &out.rows {
        assert!(r.test_accuracy.is_some());
        assert!((0.0..=1.0).contains(&r.cumulative_accuracy));
    }
    assert!(out.reports[1].postprocess.is_some() || out.rows[1].cumulative_accuracy == 1.0);
}

#[test]
fn single_batch_stream_equals_train_batch() {
    let mut rng = common::rng(45);
    let batch = random_batch(&mut rng, 8, 4);
    let config = quick_config(11);
    let specs = [LayerSpec::dense(4, 3), LayerSpec::dense(3, 10)];
    let net = init_network(&specs, &config).unwrap();
    let mut state = TrainState::new(net.clone());
    train_batch(&mut state, &batch, &config).unwrap();
    let out = train_batched_stream(net, std::slice::from_ref(&batch), None, &config, |_| {}).unwrap();
    assert_eq!(out.net, state.net);
}

#[test]
fn tied_layers_train_jointly() {
    let mut rng = common::rng(46);
    let batch = random_batch(&mut rng, 3, 16);
    let config = TrainConfig {
        init_range: (0.0, 1.0),
        time_limit: Some(Duration::from_secs(20)),
        ..quick_config(5)
    };
    let specs = [LayerSpec::conv(4, 4, 2), LayerSpec::dense(9, 10)];
    let mut state = TrainState::new(init_network(&specs, &config).unwrap());
    let report = train_batch(&mut state, &batch, &config).unwrap();
    assert!(report.diagnostics.is_empty(), "{:?}", report.diagnostics);
    assert!(state.net.layers[0].respects_tying());
    assert!(state.net.layers[0].offsets.iter().all(|&c| c == 0.0));
    assert!(report.best_accuracy >= report.initial_accuracy);
}

#[test]
fn committee_votes() {
    let mut rng = common::rng(47);
    let batch = random_batch(&mut rng, 30, 5);
    let specs = [LayerSpec::dense(5, 10)];
    let nets: Vec<Network> = (0..3)
        .map(|s| init_network(&specs, &TrainConfig { seed: s, ..TrainConfig::default() }).unwrap())
        .collect();
    let same = vec![nets[0].clone(), nets[0].clone(), nets[0].clone()];
    assert_eq!(
        committee_accuracy(&same, &batch).unwrap(),
        nets[0].accuracy(&batch.inputs, &batch.labels).unwrap()
    );
    for x in &batch.inputs {
        let votes: Vec<usize> = nets.iter().map(|n| n.predict(x).unwrap().label).collect();
        let label = committee_predict(&nets, x).unwrap();
        if votes[0] == votes[1] || votes[0] == votes[2] {
            assert_eq!(label, votes[0]);
        } else if votes[1] == votes[2] {
            assert_eq!(label, votes[1]);
        } else {
            let closest = nets
                .iter()
                .map(|n| n.predict(x).unwrap())
                .min_by(|a, b| a.distance().total_cmp(&b.distance()))
                .unwrap();
            assert_eq!(label, closest.label);
        }
    }
    assert!(committee_predict(&nets[..2], &batch.inputs[0]).is_err());
    assert!(committee_predict(&nets, &[0.5]).is_err());
}
