//! Fits one ReLU neuron to a few samples twice: as a big-M MILP and by
//! enumerating every sign pattern of the pre-activations.

use milptrain::branch_bound::solve_milp;
use milptrain::encodings::{build_weight_milp, enumerate_sign_patterns, BigM};
use milptrain::network::LayerSpec;
use milptrain::simplex::SolverConfig;

pub fn main() -> Result<(), Box<dyn std::error::Error>> {
    let inputs = vec![
        vec![0.1, 0.9],
        vec![0.8, 0.2],
        vec![0.5, 0.5],
        vec![0.0, 0.3],
        vec![1.0, 1.0],
    ];
    let targets = [0.0, 1.2, 0.4, 0.0, 1.5];
    let spec = LayerSpec::dense(2, 1);
    let big_m = BigM::for_batch(2, &inputs);
    println!("big-M {:.3}", big_m.value);

    let enc = build_weight_milp(&spec, 0, &inputs, &targets, big_m, None)?;
    println!(
        "MILP: {} variables, {} binaries, {} rows",
        enc.model.num_vars(),
        enc.model.binaries().count(),
        enc.model.num_constraints()
    );
    let sol = solve_milp(&enc.compile()?.into_milp(), &SolverConfig::default(), None)?;
    let (w, c) = enc.extract(sol.values.as_deref().unwrap_or_default())[0].clone();
    println!("MILP objective {:.6} with w = {w:.4?}, c = {c:.4}", sol.objective);

    if let Some(fit) = enumerate_sign_patterns(&spec, 0, &inputs, &targets)? {
        println!(
            "enumeration objective {:.6} (pattern {:05b}) with w = {:.4?}, c = {:.4}",
            fit.objective, fit.pattern, fit.weights, fit.offset
        );
    }
    Ok(())
}
