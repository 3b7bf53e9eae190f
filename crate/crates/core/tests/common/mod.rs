//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use milptrain::branch_bound::MilpProblem;
use milptrain::simplex::{solve_lp, Constraint, LpProblem, Relation, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random LP with finite box bounds, `n <= 5` variables and `<= 8` rows.
pub fn random_boxed_lp(rng: &mut ChaCha8Rng) -> LpProblem {
    let n = rng.random_range(1..=5);
    let rows = rng.random_range(0..=8);
    let mut lower = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    for _ in 0..n {
        let l: f64 = rng.random_range(-3.0..1.0);
        lower.push(l);
        upper.push(l + rng.random_range(0.0..4.0));
    }
    let objective = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    let mut p = LpProblem::new(n).with_objective(objective).with_bounds(lower, upper);
    for _ in 0..rows {
        let coeffs: Vec<f64> = (0..n)
            .map(|_| if rng.random_bool(0.2) { 0.0 } else { rng.random_range(-2.0..2.0) })
            .collect();
        let relation = match rng.random_range(0..10) {
            0 => Relation::Eq,
            1..=5 => Relation::Le,
            _ => Relation::Ge,
        };
        let rhs = rng.random_range(-2.0..3.0);
        p.add_constraint(Constraint::dense(&coeffs, relation, rhs));
    }
    p
}

/// Solves the square system `a x = b` by Gaussian elimination with partial
/// pivoting; `None` when (numerically) singular.
pub fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let p = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[p][col].abs() < 1e-10 {
            return None;
        }
        a.swap(p, col);
        b.swap(p, col);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[r][k] -= f * a[col][k];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

fn dense_row(c: &Constraint, n: usize) -> Vec<f64> {
    let mut row = vec![0.0; n];
    for &(j, a) in &c.terms {
        row[j] = a;
    }
    row
}

/// Minimum objective over all basic feasible points of a boxed LP, found by
/// intersecting every `n`-subset of constraint and bound hyperplanes.
/// `None` when no vertex is feasible.
pub fn vertex_enumeration(p: &LpProblem) -> Option<f64> {
    let n = p.num_vars;
    let mut planes: Vec<(Vec<f64>, f64)> = p
        .constraints
        .iter()
        .filter(|c| c.terms.iter().any(|&(_, a)| a != 0.0))
        .map(|c| (dense_row(c, n), c.rhs))
        .collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e.clone(), p.lower[j]));
        planes.push((e, p.upper[j]));
    }
    let mut best: Option<f64> = None;
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        let a = idx.iter().map(|&i| planes[i].0.clone()).collect();
        let b = idx.iter().map(|&i| planes[i].1).collect();
        if let Some(x) = solve_square(a, b) {
            if p.max_violation(&x) <= 1e-9 {
                let obj = p.objective_value(&x);
                best = Some(best.map_or(obj, |b: f64| b.min(obj)));
            }
        }
        // next combination
        let total = planes.len();
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if idx[i] < total - n + i {
                idx[i] += 1;
                for k in i + 1..n {
                    idx[k] = idx[k - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Best objective over all `2^k` fixings of the binaries, each fixing solved
/// as an LP. `None` when every fixing is infeasible.
pub fn fixing_enumeration(p: &MilpProblem) -> Option<f64> {
    let k = p.binary_vars.len();
    assert!(k <= 16);
    let cfg = SolverConfig::default();
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << k) {
        let mut lp = p.base.clone();
        let mut skip = false;
        for (bit, &var) in p.binary_vars.iter().enumerate() {
            let v = f64::from((mask >> bit) & 1);
            if v < lp.lower[var] || v > lp.upper[var] {
                skip = true;
            }
            lp.lower[var] = v;
            lp.upper[var] = v;
        }
        if skip {
            continue;
        }
        let s = solve_lp(&lp, &cfg).expect("well-formed");
        if s.is_optimal() {
            best = Some(best.map_or(s.objective, |b: f64| b.min(s.objective)));
        }
    }
    best
}

/// Random MILP with `k <= 12` binaries mixed with continuous variables.
pub fn random_milp(rng: &mut ChaCha8Rng, max_binaries: usize) -> MilpProblem {
    let k = rng.random_range(1..=max_binaries);
    let c = rng.random_range(0..=3);
    let n = k + c;
    let mut lower = vec![0.0; n];
    let mut upper = vec![1.0; n];
    for j in k..n {
        lower[j] = rng.random_range(-2.0..0.0);
        upper[j] = rng.random_range(0.0..2.0);
    }
    let objective = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    let mut base = LpProblem::new(n).with_objective(objective).with_bounds(lower, upper);
    let rows = rng.random_range(1..=6);
    for _ in 0..rows {
        let coeffs: Vec<f64> = (0..n)
            .map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random_range(-2.0..2.0) })
            .collect();
        let relation = if rng.random_bool(0.5) { Relation::Le } else { Relation::Ge };
        let rhs = rng.random_range(-1.0..2.0);
        base.add_constraint(Constraint::dense(&coeffs, relation, rhs));
    }
    MilpProblem::new(base, (0..k).collect())
}

/// Single-neuron fitting instance: inputs uniform in `[0, 1]`, targets in
/// `[0, 2]`.
pub struct NeuronInstance {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

pub fn random_neuron_instance(rng: &mut ChaCha8Rng, max_d: usize, max_m: usize) -> NeuronInstance {
    let d = rng.random_range(1..=max_d);
    let m = rng.random_range(1..=max_m);
    NeuronInstance {
        inputs: (0..m)
            .map(|_| (0..d).map(|_| rng.random_range(0.0..=1.0)).collect())
            .collect(),
        targets: (0..m).map(|_| rng.random_range(0.0..=2.0)).collect(),
    }
}

/// Plain ReLU forward pass of one layer, written out independently.
pub fn relu_layer(weights: &[f64], offsets: &[f64], x: &[f64]) -> Vec<f64> {
    let d = x.len();
    offsets
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let a: f64 = c + (0..d).map(|i| weights[j * d + i] * x[i]).sum::<f64>();
            if a > 0.0 {
                a
            } else {
                0.0
            }
        })
        .collect()
}
