//! A knapsack with a continuous filler solved by branch and bound.

use milptrain::branch_bound::solve_milp;
use milptrain::model::{LinExpr, Model, VarKind};
use milptrain::simplex::{Relation, SolverConfig};

pub fn main() -> Result<(), Box<dyn std::error::Error>> {
    let values = [10.0, 13.0, 7.0, 8.0, 4.0];
    let weights = [5.0, 7.0, 4.0, 5.0, 3.0];
    let mut m = Model::new();
    let items: Vec<_> = (0..values.len())
        .map(|i| m.add_var(format!("take_{i}"), 0.0, 1.0, VarKind::Binary))
        .collect::<Result<_, _>>()?;
    let sand = m.add_var("sand", 0.0, 2.0, VarKind::Continuous)?;

    let mut load = LinExpr::new().term(sand, 1.0);
    let mut value = LinExpr::new().term(sand, -0.5);
    for (i, &v) in items.iter().enumerate() {
        load.add(v, weights[i]);
        value.add(v, -values[i]);
    }
    m.add_constraint(load, Relation::Le, 15.0, "capacity")?;
    m.set_objective(value)?;

    let sol = solve_milp(&m.compile()?.into_milp(), &SolverConfig::default(), None)?;
    println!("status {:?}, value {}", sol.status, -sol.objective);
    println!("{} nodes, incumbents found at {:?}", sol.nodes_explored, sol.incumbent_history);
    if let Some(v) = &sol.values {
        for (i, h) in items.iter().enumerate() {
            println!("item {i}: {}", v[h.index()]);
        }
        println!("sand: {}", v[sand.index()]);
    }
    Ok(())
}
