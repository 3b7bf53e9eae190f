//! A small production-planning LP solved with the bounded simplex.

use milptrain::simplex::{solve_lp, Constraint, LpProblem, Relation, SolverConfig};

pub fn main() -> Result<(), Box<dyn std::error::Error>> {
    // maximize 3x + 5y  <=>  minimize -3x - 5y
    let mut lp = LpProblem::new(2)
        .with_objective(vec![-3.0, -5.0])
        .with_bounds(vec![0.0, 0.0], vec![4.0, f64::INFINITY]);
    lp.add_constraint(Constraint::dense(&[0.0, 2.0], Relation::Le, 12.0));
    lp.add_constraint(Constraint::dense(&[3.0, 2.0], Relation::Le, 18.0));

    let sol = solve_lp(&lp, &SolverConfig::default())?;
    let x = sol.values.as_deref().unwrap_or(&[]);
    println!("status {:?} after {} pivots", sol.status, sol.iterations);
    println!("x = {:?}, objective {}", x, sol.objective);
    println!("largest violation {:.1e}", lp.max_violation(x));
    Ok(())
}
