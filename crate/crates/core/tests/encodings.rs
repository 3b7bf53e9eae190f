mod common;

use milptrain::branch_bound::{solve_milp, MilpStatus};
use milptrain::encodings::{
    build_input_milp, build_lastlayer_lp, build_postprocess_lp, build_weight_milp,
    build_weight_milp_joint, enumerate_sign_patterns, BigM, InputWindowRule, WeightWindow,
    WeightWindowRule,
};
use milptrain::model::Compiled;
use milptrain::network::{Layer, LayerSpec};
use milptrain::simplex::{solve_lp, LpStatus, SolverConfig};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn relu_milp_matches_sign_pattern_enumeration() {
    let mut rng = common::rng(21);
    let cfg = SolverConfig::default();
    for case in 0..80 {
        let inst = common::random_neuron_instance(&mut rng, 3, 6);
        let d = inst.inputs[0].len();
        let spec = LayerSpec::dense(d, 1);
        let enc = build_weight_milp(
            &spec,
            0,
            &inst.inputs,
            &inst.targets,
            BigM::for_batch(d, &inst.inputs),
            None,
        )
        .unwrap();
        let s = solve_milp(&enc.compile().unwrap().into_milp(), &cfg, None).unwrap();
        assert_eq!(s.status, MilpStatus::Optimal, "case {case}");
        let oracle = enumerate_sign_patterns(&spec, 0, &inst.inputs, &inst.targets)
            .unwrap()
            .unwrap();
        assert!(
            (s.objective - oracle.objective).abs() <= 1e-6,
            "case {case}: milp {} oracle {}",
            s.objective,
            oracle.objective
        );
        // the extracted weights really achieve the reported objective
        let (w, c) = enc.extract(s.values.as_ref().unwrap())[0].clone();
        let achieved: f64 = inst
            .inputs
            .iter()
            .zip(&inst.targets)
            .map(|(x, t)| (common::relu_layer(&w, &[c], x)[0] - t).abs())
            .sum();
        assert!((achieved - s.objective).abs() <= 1e-6, "case {case}");
    }
}

#[test]
fn last_layer_lp_is_below_the_all_firing_relu_fit() {
    let mut rng = common::rng(22);
    let cfg = SolverConfig::default();
    for case in 0..40 {
        let d = rng.random_range(1..=3);
        let inputs: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..d).map(|_| rng.random_range(0.0..=1.0)).collect())
            .collect();
        let targets: Vec<f64> = (0..2).map(|_| f64::from(rng.random_range(0..=1u8))).collect();
        let spec = LayerSpec::dense(d, 1);
        let enc = build_lastlayer_lp(&spec, 0, &inputs, &targets, None).unwrap();
        let Compiled::Lp(lp) = enc.compile().unwrap() else { panic!() };
        let lp_sol = solve_lp(&lp, &cfg).unwrap();
        assert_eq!(lp_sol.status, LpStatus::Optimal);

        let relu = build_weight_milp(&spec, 0, &inputs, &targets, BigM::for_batch(d, &inputs), None)
            .unwrap();
        let mut milp = relu.compile().unwrap().into_milp();
        for &b in &milp.binary_vars {
            milp.base.lower[b] = 1.0;
        }
        let restricted = solve_milp(&milp, &cfg, None).unwrap();
        if restricted.status == MilpStatus::Optimal {
            assert!(lp_sol.objective <= restricted.objective + 1e-9, "case {case}");
        }
    }
}

#[test]
fn postprocess_forgives_small_deviations() {
    let spec = LayerSpec::dense(1, 1);
    // a zero input makes the output equal to the offset, which the window pins
    let pinned = |c: f64| WeightWindow {
        lower: vec![-1.0, c],
        upper: vec![1.0, c],
    };
    let cfg = SolverConfig::default();
    for (c, t, expected) in [(0.3, 0.0, 0.0), (0.6, 0.0, 0.11), (0.8, 1.0, 0.0), (-0.5, 1.0, 1.01)] {
        let w = pinned(c);
        let enc = build_postprocess_lp(&spec, 0, &[vec![0.0]], &[t], Some(&w)).unwrap();
        let Compiled::Lp(lp) = enc.compile().unwrap() else { panic!() };
        let s = solve_lp(&lp, &cfg).unwrap();
        assert!((s.objective - expected).abs() < 1e-9, "c {c} t {t}: {}", s.objective);
    }
}

#[test]
fn identity_input_proposal_hits_reachable_targets() {
    // o = x0 - x1 + 0.2 with windows around x~ = (0.5, 0.5)
    let mut layer = Layer::zeros(LayerSpec::dense(2, 2));
    layer.weights = vec![1.0, -1.0, 0.0, 1.0];
    layer.offsets = vec![0.2, 0.0];
    let rule = InputWindowRule::default();
    let enc = build_input_milp(
        &layer,
        3,
        &[0.0, 1.0],
        &[0.5, 0.5],
        BigM::new(2, 0.5),
        true,
        &rule,
    )
    .unwrap();
    assert_eq!(enc.model.binaries().count(), 0);
    let Compiled::Lp(lp) = enc.compile().unwrap() else { panic!() };
    let s = solve_lp(&lp, &SolverConfig::default()).unwrap();
    // o1 = x1 can reach at most 0.65, so the unit target costs 0.35
    assert!((s.objective - 0.35).abs() < 1e-9, "{}", s.objective);
    let x = enc.extract(s.values.as_ref().unwrap());
    assert!((x[1] - 0.65).abs() < 1e-9);
    assert!(x[0] - x[1] + 0.2 <= 1e-9);
    assert!(enc.model.lookup("x_3_1").is_some());
}

fn arb_dense() -> impl Strategy<Value = (Layer, Vec<Vec<f64>>)> {
    (1usize..=4, 1usize..=3, 1usize..=4).prop_flat_map(|(d, n, m)| {
        (
            proptest::collection::vec(-1.0..=1.0f64, n * d + n),
            proptest::collection::vec(proptest::collection::vec(0.0..=1.0f64, d), m),
        )
            .prop_map(move |(params, inputs)| {
                let mut layer = Layer::zeros(LayerSpec::dense(d, n));
                layer.weights = params[..n * d].to_vec();
                layer.offsets = params[n * d..].to_vec();
                (layer, inputs)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fixed_weights_reproduce_the_forward_pass((layer, inputs) in arb_dense(), t in 0.0..2.0f64) {
        let (d, n) = (layer.spec.inputs, layer.spec.outputs);
        let big_m = BigM::for_batch(d, &inputs);
        for j in 0..n {
            let targets = vec![t; inputs.len()];
            let enc = build_weight_milp(&layer.spec, j, &inputs, &targets, big_m, None).unwrap();
            let values = enc.assignment_for_layer(&layer);
            let milp = enc.compile().unwrap().into_milp();
            prop_assert!(milp.base.max_violation(&values) <= 1e-9);
            for (k, x) in inputs.iter().enumerate() {
                let expected = common::relu_layer(&layer.weights, &layer.offsets, x)[j];
                prop_assert!((values[enc.samples[k][0].o.index()] - expected).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn relaxation_completion_is_feasible((layer, inputs) in arb_dense(), seed in any::<u64>()) {
        let d = layer.spec.inputs;
        let window = WeightWindow::around(&layer, &WeightWindowRule::default());
        let targets = vec![1.0; inputs.len()];
        let enc = build_weight_milp(&layer.spec, 0, &inputs, &targets, BigM::for_batch(d, &inputs), Some(&window)).unwrap();
        let mut rng = common::rng(seed);
        let noise: Vec<f64> = (0..enc.model.num_vars()).map(|_| rng.random_range(-2.0..2.0)).collect();
        let values = enc.complete(&noise);
        let milp = enc.compile().unwrap().into_milp();
        prop_assert!(milp.check_candidate(&values, 1e-9).is_some());
    }

    #[test]
    fn relu_input_proposal_accepts_current_inputs((layer, inputs) in arb_dense(), t in 0.0..2.0f64) {
        let n = layer.spec.outputs;
        let big_m = BigM::for_batch(layer.spec.inputs, &inputs);
        let enc = build_input_milp(&layer, 0, &vec![t; n], &inputs[0], big_m, false, &InputWindowRule::default()).unwrap();
        let values = enc.assignment(&inputs[0]);
        let milp = enc.compile().unwrap().into_milp();
        prop_assert!(milp.base.max_violation(&values) <= 1e-9);
        let expected = common::relu_layer(&layer.weights, &layer.offsets, &inputs[0]);
        for (j, vars) in enc.outputs.iter().enumerate() {
            prop_assert!((values[vars.o.index()] - expected[j]).abs() <= 1e-8);
        }
    }
}

#[test]
fn tied_layer_semantics() {
    let spec = LayerSpec::conv(4, 4, 2);
    let mut rng = common::rng(23);
    for _ in 0..20 {
        let kernel: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let mut layer = Layer::zeros(spec.clone());
        let desc = spec.descriptor();
        for (cls, positions) in desc.classes.iter().enumerate() {
            for &p in positions {
                layer.weights[p] = kernel[cls];
            }
        }
        assert!(layer.respects_tying());
        let inputs: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..16).map(|_| rng.random_range(0.0..=1.0)).collect())
            .collect();
        let targets = vec![vec![0.5; spec.outputs]; 3];
        let enc = build_weight_milp_joint(&spec, &inputs, &targets, BigM::for_batch(16, &inputs), None)
            .unwrap();
        let values = enc.assignment_for_layer(&layer);
        let milp = enc.compile().unwrap().into_milp();
        assert!(milp.base.max_violation(&values) <= 1e-9);
        for (k, x) in inputs.iter().enumerate() {
            let out = layer.apply(x).out;
            for (j, vars) in enc.samples[k].iter().enumerate() {
                assert!((values[vars.o.index()] - out[j]).abs() <= 1e-8);
            }
        }
        let mut back = Layer::zeros(spec.clone());
        enc.install(&values, &mut back);
        assert_eq!(back.weights, layer.weights);
    }
}
