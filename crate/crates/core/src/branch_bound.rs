//! LP-relaxation branch-and-bound for problems whose integer variables are
//! all binary.
//!
//! Nodes are explored best-bound first; from every popped node the search
//! dives depth-first (rounding side first) until the dive is pruned or hits
//! an integral point. Child relaxations are re-solved with the dual simplex
//! from the parent's basis, so a dive costs a handful of pivots per level.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use log::debug;

use crate::simplex::{Engine, EngineStatus, LpProblem, SolverConfig, SolverError};

#[derive(Debug, Clone, PartialEq)]
pub struct MilpProblem {
    pub base: LpProblem,
    /// Indices of the binary variables, ascending.
    pub binary_vars: Vec<usize>,
}

impl MilpProblem {
    pub fn new(base: LpProblem, mut binary_vars: Vec<usize>) -> Self {
        binary_vars.sort_unstable();
        binary_vars.dedup();
        Self { base, binary_vars }
    }

    /// Binary variables must lie in `0..num_vars` with bounds `[0, 1]`; a
    /// binary may also be pinned by bounds `[0, 0]` or `[1, 1]`.
    pub fn validate(&self) -> Result<(), SolverError> {
        self.base.validate()?;
        for &b in &self.binary_vars {
            if b >= self.base.num_vars {
                return Err(SolverError::InvalidBinary(b));
            }
            let (l, u) = (self.base.lower[b], self.base.upper[b]);
            let ok = matches!((l, u), (0.0, 1.0) | (0.0, 0.0) | (1.0, 1.0));
            if !ok {
                return Err(SolverError::InvalidBinary(b));
            }
        }
        Ok(())
    }

    /// Rounds the binaries of `values` and checks every bound and row.
    pub fn check_candidate(&self, values: &[f64], tol: f64) -> Option<Vec<f64>> {
        if values.len() != self.base.num_vars || values.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let mut v = values.to_vec();
        for &b in &self.binary_vars {
            v[b] = v[b].round();
        }
        (self.base.max_violation(&v) <= tol).then_some(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MilpStatus {
    Optimal,
    Infeasible,
    /// A node or time limit fired; the incumbent is returned.
    FeasibleAtLimit,
    /// A limit fired before any feasible point was found.
    NoIncumbentAtLimit,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpSolution {
    pub status: MilpStatus,
    pub values: Option<Vec<f64>>,
    pub objective: f64,
    pub best_bound: f64,
    pub nodes_explored: usize,
    /// `(node count, objective)` at every incumbent improvement.
    pub incumbent_history: Vec<(usize, f64)>,
}

impl MilpSolution {
    pub fn has_incumbent(&self) -> bool {
        self.values.is_some()
    }
}

/// Proposes a full assignment from a node's relaxation values. Proposals are
/// verified like warm starts before they become incumbents.
pub type Heuristic<'a> = &'a (dyn Fn(&[f64]) -> Option<Vec<f64>> + Sync);

pub fn solve_milp(
    problem: &MilpProblem,
    config: &SolverConfig,
    warm_start: Option<&[f64]>,
) -> Result<MilpSolution, SolverError> {
    solve_milp_with(problem, config, warm_start, None)
}

pub fn solve_milp_with(
    problem: &MilpProblem,
    config: &SolverConfig,
    warm_start: Option<&[f64]>,
    heuristic: Option<Heuristic<'_>>,
) -> Result<MilpSolution, SolverError> {
    problem.validate()?;
    Search::new(problem, config, heuristic).run(warm_start)
}

#[derive(Debug, Clone)]
struct Node {
    /// Per binary: -1 free, 0 or 1 fixed.
    fixings: Vec<i8>,
    bound: f64,
    depth: usize,
    seq: usize,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // BinaryHeap pops the greatest: lowest bound, then deepest, then oldest.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&other.depth))
            .then(other.seq.cmp(&self.seq))
    }
}

struct Search<'a> {
    problem: &'a MilpProblem,
    config: &'a SolverConfig,
    heuristic: Option<Heuristic<'a>>,
    engine: Option<Engine>,
    /// Fixings currently applied to the engine.
    applied: Vec<i8>,
    /// Original bounds of each binary.
    base_fix: Vec<i8>,
    incumbent: Option<Vec<f64>>,
    incumbent_obj: f64,
    history: Vec<(usize, f64)>,
    nodes: usize,
    seq: usize,
    started: Instant,
}

enum DiveEnd {
    Done,
    Limit(f64),
}

impl<'a> Search<'a> {
    fn new(
        problem: &'a MilpProblem,
        config: &'a SolverConfig,
        heuristic: Option<Heuristic<'a>>,
    ) -> Self {
        let base_fix = problem
            .binary_vars
            .iter()
            .map(|&b| {
                let (l, u) = (problem.base.lower[b], problem.base.upper[b]);
                if l == u {
                    l as i8
                } else {
                    -1
                }
            })
            .collect::<Vec<_>>();
        Self {
            problem,
            config,
            heuristic,
            engine: None,
            applied: base_fix.clone(),
            base_fix,
            incumbent: None,
            incumbent_obj: f64::INFINITY,
            history: Vec::new(),
            nodes: 0,
            seq: 0,
            started: Instant::now(),
        }
    }

    fn gap(&self) -> f64 {
        self.config
            .abs_gap
            .max(self.config.rel_gap * self.incumbent_obj.abs())
    }

    fn prunable(&self, bound: f64) -> bool {
        self.incumbent.is_some() && bound >= self.incumbent_obj - self.gap()
    }

    fn limit_hit(&self) -> bool {
        if let Some(n) = self.config.node_limit {
            if self.nodes >= n {
                return true;
            }
        }
        if let Some(t) = self.config.time_limit {
            if self.started.elapsed() >= t {
                return true;
            }
        }
        false
    }

    fn offer(&mut self, values: &[f64]) -> bool {
        let Some(v) = self.problem.check_candidate(values, self.config.feasibility_tol) else {
            return false;
        };
        let obj = self.problem.base.objective_value(&v);
        if obj < self.incumbent_obj {
            self.incumbent_obj = obj;
            self.incumbent = Some(v);
            self.history.push((self.nodes, obj));
            true
        } else {
            false
        }
    }

    fn apply(&mut self, fixings: &[i8]) {
        let engine = self.engine.as_mut().expect("engine initialized");
        for (k, (&want, have)) in fixings.iter().zip(self.applied.iter_mut()).enumerate() {
            if want != *have {
                let var = self.problem.binary_vars[k];
                let (lo, hi) = match want {
                    0 => (0.0, 0.0),
                    1 => (1.0, 1.0),
                    _ => (0.0, 1.0),
                };
                engine.set_bounds(var, lo, hi);
                *have = want;
            }
        }
    }

    /// Solves the relaxation at `fixings`, rebuilding the engine from scratch
    /// if warm reoptimization breaks down numerically.
    fn relax(&mut self, fixings: &[i8]) -> Result<EngineStatus, SolverError> {
        self.apply(fixings);
        let warm = self.engine.as_mut().expect("engine initialized").reoptimize();
        match warm {
            Ok(EngineStatus::IterationLimit) | Err(SolverError::Singular) => {
                debug!("branch-and-bound: rebuilding relaxation at node {}", self.nodes);
                self.cold(fixings)
            }
            other => other,
        }
    }

    fn cold(&mut self, fixings: &[i8]) -> Result<EngineStatus, SolverError> {
        let mut engine = Engine::new(&self.problem.base, self.config)?;
        for (k, &f) in fixings.iter().enumerate() {
            let var = self.problem.binary_vars[k];
            match f {
                0 => engine.set_bounds(var, 0.0, 0.0),
                1 => engine.set_bounds(var, 1.0, 1.0),
                _ => engine.set_bounds(var, 0.0, 1.0),
            }
        }
        let status = engine.solve()?;
        self.engine = Some(engine);
        self.applied = fixings.to_vec();
        Ok(status)
    }

    fn most_fractional(&self, values: &[f64], fixings: &[i8]) -> Option<(usize, f64)> {
        let tol = self.config.integrality_tol;
        let mut best: Option<(usize, f64, f64)> = None;
        for (k, &var) in self.problem.binary_vars.iter().enumerate() {
            if fixings[k] >= 0 {
                continue;
            }
            let v = values[var];
            let frac = (v - v.round()).abs();
            if frac <= tol {
                continue;
            }
            let dist = (v - 0.5).abs();
            if best.is_none_or(|(_, _, d)| dist < d) {
                best = Some((k, v, dist));
            }
        }
        best.map(|(k, v, _)| (k, v))
    }

    /// Fixes the binaries to their rounded values and re-solves so the
    /// returned point is exactly consistent with integral binaries.
    fn polish(&mut self, values: &[f64], fixings: &[i8]) -> Result<(), SolverError> {
        if self.offer(values) {
            return Ok(());
        }
        let rounded: Vec<i8> = self
            .problem
            .binary_vars
            .iter()
            .map(|&b| values[b].round() as i8)
            .collect();
        if self.relax(&rounded)? == EngineStatus::Optimal {
            let v = self.engine.as_ref().expect("engine initialized").values().to_vec();
            self.offer(&v);
        }
        self.apply(fixings);
        Ok(())
    }

    fn push(&mut self, heap: &mut BinaryHeap<Node>, fixings: Vec<i8>, bound: f64, depth: usize) {
        self.seq += 1;
        heap.push(Node {
            fixings,
            bound,
            depth,
            seq: self.seq,
        });
    }

    fn dive(&mut self, heap: &mut BinaryHeap<Node>, start: Node) -> Result<DiveEnd, SolverError> {
        let mut node = start;
        loop {
            if self.limit_hit() {
                return Ok(DiveEnd::Limit(node.bound));
            }
            self.nodes += 1;
            let status = if self.nodes == 1 {
                let fixings = node.fixings.clone();
                self.cold(&fixings)?
            } else {
                self.relax(&node.fixings)?
            };
            match status {
                EngineStatus::Optimal => {}
                EngineStatus::Infeasible => return Ok(DiveEnd::Done),
                EngineStatus::Unbounded => return Err(SolverError::NonFinite("relaxation objective")),
                EngineStatus::IterationLimit => {
                    debug!("branch-and-bound: node {} abandoned at pivot limit", self.nodes);
                    return Ok(DiveEnd::Limit(node.bound));
                }
            }
            let engine = self.engine.as_ref().expect("engine initialized");
            let bound = engine.objective().max(node.bound);
            if self.prunable(bound) {
                return Ok(DiveEnd::Done);
            }
            let values = engine.values().to_vec();
            if let Some(h) = self.heuristic {
                if let Some(candidate) = h(&values) {
                    self.offer(&candidate);
                }
            }
            let Some((k, v)) = self.most_fractional(&values, &node.fixings) else {
                self.polish(&values, &node.fixings)?;
                return Ok(DiveEnd::Done);
            };
            if self.prunable(bound) {
                return Ok(DiveEnd::Done);
            }
            let first: i8 = if v >= 0.5 { 1 } else { 0 };
            let mut other = node.fixings.clone();
            other[k] = 1 - first;
            self.push(heap, other, bound, node.depth + 1);
            node.fixings[k] = first;
            node.bound = bound;
            node.depth += 1;
        }
    }

    fn run(mut self, warm_start: Option<&[f64]>) -> Result<MilpSolution, SolverError> {
        if let Some(ws) = warm_start {
            if !self.offer(ws) {
                debug!("branch-and-bound: warm start rejected (infeasible after rounding)");
            }
        }
        let mut heap = BinaryHeap::new();
        let root = Node {
            fixings: self.base_fix.clone(),
            bound: f64::NEG_INFINITY,
            depth: 0,
            seq: 0,
        };
        let mut limit_bound: Option<f64> = None;
        let mut next = Some(root);
        while let Some(node) = next.take().or_else(|| heap.pop()) {
            if self.prunable(node.bound) {
                continue;
            }
            let end = self.dive(&mut heap, node)?;
            if let DiveEnd::Limit(b) = end {
                limit_bound = Some(b);
                break;
            }
        }

        let open_bound = heap
            .iter()
            .map(|n| n.bound)
            .chain(limit_bound)
            .fold(f64::INFINITY, f64::min);
        let limited = limit_bound.is_some();
        let status = match (&self.incumbent, limited) {
            (Some(_), false) => MilpStatus::Optimal,
            (Some(_), true) => MilpStatus::FeasibleAtLimit,
            (None, false) => MilpStatus::Infeasible,
            (None, true) => MilpStatus::NoIncumbentAtLimit,
        };
        let best_bound = if limited {
            open_bound.min(self.incumbent_obj)
        } else {
            self.incumbent_obj
        };
        Ok(MilpSolution {
            status,
            objective: self.incumbent_obj,
            best_bound,
            nodes_explored: self.nodes,
            incumbent_history: self.history,
            values: self.incumbent,
        })
    }
}
