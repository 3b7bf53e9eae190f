mod common;

use milptrain::branch_bound::{solve_milp, MilpStatus};
use milptrain::simplex::{solve_lp, LpStatus, SolverConfig};
use proptest::prelude::*;

#[test]
fn lp_matches_vertex_enumeration() {
    let mut rng = common::rng(11);
    let cfg = SolverConfig::default();
    let mut feasible = 0;
    for case in 0..400 {
        let p = common::random_boxed_lp(&mut rng);
        let s = solve_lp(&p, &cfg).unwrap();
        match common::vertex_enumeration(&p) {
            Some(best) => {
                feasible += 1;
                assert_eq!(s.status, LpStatus::Optimal, "case {case}");
                assert!(
                    (s.objective - best).abs() <= 1e-8,
                    "case {case}: simplex {} vs oracle {best}",
                    s.objective
                );
                let v = s.values.as_ref().unwrap();
                assert!(p.max_violation(v) <= 1e-9, "case {case}");
                assert!((p.objective_value(v) - s.objective).abs() <= 1e-10);
            }
            None => assert_eq!(s.status, LpStatus::Infeasible, "case {case}"),
        }
    }
    assert!(feasible > 100, "only {feasible} feasible instances");
}

#[test]
fn milp_matches_fixing_enumeration() {
    let mut rng = common::rng(12);
    let cfg = SolverConfig::default();
    for case in 0..120 {
        let p = common::random_milp(&mut rng, 12);
        let s = solve_milp(&p, &cfg, None).unwrap();
        match common::fixing_enumeration(&p) {
            Some(best) => {
                assert_eq!(s.status, MilpStatus::Optimal, "case {case}");
                assert!((s.objective - best).abs() <= 1e-6, "case {case}: {} vs {best}", s.objective);
                let v = s.values.as_ref().unwrap();
                assert!(p.base.max_violation(v) <= 1e-9);
                for &b in &p.binary_vars {
                    assert!(v[b] == 0.0 || v[b] == 1.0);
                }
                assert!(s.best_bound <= s.objective + 1e-8);
                assert!(s
                    .incumbent_history
                    .windows(2)
                    .all(|w| w[0].0 <= w[1].0 && w[1].1 <= w[0].1));
            }
            None => assert_eq!(s.status, MilpStatus::Infeasible, "case {case}"),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lp_solves_are_deterministic(seed in any::<u64>()) {
        let p = common::random_boxed_lp(&mut common::rng(seed));
        let cfg = SolverConfig::default();
        let a = solve_lp(&p, &cfg).unwrap();
        let b = solve_lp(&p, &cfg).unwrap();
        prop_assert_eq!(a.status, b.status);
        if a.is_optimal() {
            prop_assert_eq!(a.objective.to_bits(), b.objective.to_bits());
        }
    }

    #[test]
    fn milp_warm_start_never_worsens(seed in any::<u64>()) {
        let p = common::random_milp(&mut common::rng(seed), 8);
        let cfg = SolverConfig::default();
        let cold = solve_milp(&p, &cfg, None).unwrap();
        if let Some(v) = cold.values.as_ref() {
            let warm = solve_milp(&p, &cfg, Some(v)).unwrap();
            prop_assert_eq!(warm.incumbent_history[0].0, 0);
            prop_assert!(warm.incumbent_history[0].1 <= cold.objective + 1e-12);
            prop_assert!((warm.objective - cold.objective).abs() <= 1e-6);
        }
    }
}
