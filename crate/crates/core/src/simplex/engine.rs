// Indexed loops read better than iterator chains for the dense basis algebra.
#![allow(clippy::needless_range_loop)]

use super::{LpProblem, LpSolution, LpStatus, Relation, SolverConfig, SolverError};

const PIVOT_TOL: f64 = 1e-9;
const RATIO_TIE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic variable without finite bounds, parked at its current value.
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum EngineStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

impl From<EngineStatus> for LpStatus {
    fn from(s: EngineStatus) -> Self {
        match s {
            EngineStatus::Optimal => LpStatus::Optimal,
            EngineStatus::Infeasible => LpStatus::Infeasible,
            EngineStatus::Unbounded => LpStatus::Unbounded,
            EngineStatus::IterationLimit => LpStatus::IterationLimit,
        }
    }
}

/// Bounded-variable revised simplex over `[structural | slack | artificial]`
/// columns. Row `i` reads `a_i x + s_i + sigma_i r_i = b_i`, where the slack
/// bounds encode the relation and the artificial `r_i` is only free to move
/// during phase one.
pub(crate) struct Engine {
    m: usize,
    n: usize,
    cols: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    state: Vec<VarState>,
    x: Vec<f64>,
    basis: Vec<usize>,
    binv: Vec<f64>,
    since_refactor: usize,
    refactor_every: usize,
    iterations: usize,
    budget: usize,
    iteration_limit: usize,
    feas_tol: f64,
    opt_tol: f64,
    stall_threshold: usize,
    degenerate_run: usize,
    bland: bool,
    trivially_infeasible: bool,
    xb_dirty: bool,
    y: Vec<f64>,
    alpha: Vec<f64>,
}

impl Engine {
    pub(crate) fn new(problem: &LpProblem, config: &SolverConfig) -> Result<Self, SolverError> {
        let n = problem.num_vars;
        let mut trivially_infeasible = false;
        let rows: Vec<_> = problem
            .constraints
            .iter()
            .filter(|c| {
                let empty = c.terms.iter().all(|&(_, a)| a == 0.0);
                if empty && c.violation(&[]) > config.feasibility_tol {
                    trivially_infeasible = true;
                }
                !empty
            })
            .collect();
        let m = rows.len();
        let ncols = n + 2 * m;

        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); ncols];
        for (i, row) in rows.iter().enumerate() {
            for &(j, a) in &row.terms {
                if a != 0.0 {
                    cols[j].push((i, a));
                }
            }
        }
        let mut lower = Vec::with_capacity(ncols);
        let mut upper = Vec::with_capacity(ncols);
        lower.extend_from_slice(&problem.lower);
        upper.extend_from_slice(&problem.upper);
        for row in &rows {
            let (l, u) = match row.relation {
                Relation::Le => (0.0, f64::INFINITY),
                Relation::Ge => (f64::NEG_INFINITY, 0.0),
                Relation::Eq => (0.0, 0.0),
            };
            lower.push(l);
            upper.push(u);
        }
        lower.extend(std::iter::repeat_n(0.0, m));
        upper.extend(std::iter::repeat_n(0.0, m));

        let mut cost = vec![0.0; ncols];
        cost[..n].copy_from_slice(&problem.objective);

        let mut state = vec![VarState::AtLower; ncols];
        let mut x = vec![0.0; ncols];
        for j in 0..n + m {
            let (l, u) = (lower[j], upper[j]);
            if l.is_finite() {
                state[j] = VarState::AtLower;
                x[j] = l;
            } else if u.is_finite() {
                state[j] = VarState::AtUpper;
                x[j] = u;
            } else {
                state[j] = VarState::Free;
                x[j] = 0.0;
            }
        }

        // Residual of each row with every variable at its starting value.
        let rhs: Vec<f64> = rows.iter().map(|r| r.rhs).collect();
        let mut resid = rhs.clone();
        for j in 0..n {
            if x[j] != 0.0 {
                for &(i, a) in &cols[j] {
                    resid[i] -= a * x[j];
                }
            }
        }

        let mut basis = Vec::with_capacity(m);
        let mut binv = vec![0.0; m * m];
        for (i, row) in rows.iter().enumerate() {
            let slack = n + i;
            let art = n + m + i;
            let r = resid[i];
            let slack_ok = match row.relation {
                Relation::Le => r >= 0.0,
                Relation::Ge => r <= 0.0,
                Relation::Eq => false,
            };
            cols[slack].push((i, 1.0));
            if slack_ok {
                cols[art].push((i, 1.0));
                state[slack] = VarState::Basic;
                x[slack] = r;
                basis.push(slack);
                binv[i * m + i] = 1.0;
            } else {
                let sigma = if r >= 0.0 { 1.0 } else { -1.0 };
                cols[art].push((i, sigma));
                upper[art] = f64::INFINITY;
                state[art] = VarState::Basic;
                x[art] = r.abs();
                basis.push(art);
                binv[i * m + i] = sigma;
            }
        }

        Ok(Self {
            m,
            n,
            cols,
            rhs,
            cost,
            lower,
            upper,
            state,
            x,
            basis,
            binv,
            since_refactor: 0,
            refactor_every: m.max(100),
            iterations: 0,
            budget: 0,
            iteration_limit: config.iteration_limit,
            feas_tol: config.feasibility_tol,
            opt_tol: config.optimality_tol,
            stall_threshold: 2 * (n + m),
            degenerate_run: 0,
            bland: false,
            trivially_infeasible,
            xb_dirty: false,
            y: vec![0.0; m],
            alpha: vec![0.0; m],
        })
    }

    /// Structural variable values of the current basic solution.
    pub(crate) fn values(&self) -> &[f64] {
        &self.x[..self.n]
    }

    pub(crate) fn objective(&self) -> f64 {
        self.cost[..self.n]
            .iter()
            .zip(&self.x[..self.n])
            .map(|(c, x)| c * x)
            .sum()
    }

    /// Phase one followed by phase two from the current basis.
    pub(crate) fn solve(&mut self) -> Result<EngineStatus, SolverError> {
        self.budget = 0;
        if self.trivially_infeasible {
            return Ok(EngineStatus::Infeasible);
        }
        let art_start = self.n + self.m;
        if (art_start..self.n + 2 * self.m).any(|j| self.upper[j] > 0.0) {
            let mut phase1 = vec![0.0; self.cost.len()];
            for j in art_start..self.cost.len() {
                if self.upper[j] > 0.0 {
                    phase1[j] = 1.0;
                }
            }
            match self.primal(&phase1)? {
                EngineStatus::Optimal => {}
                EngineStatus::IterationLimit => return Ok(EngineStatus::IterationLimit),
                // phase one is bounded below by zero
                _ => return Ok(EngineStatus::Infeasible),
            }
            let scale = self.rhs.iter().fold(1.0_f64, |acc, b| acc.max(b.abs()));
            let infeas: f64 = self.x[art_start..].iter().sum();
            if infeas > self.feas_tol * scale {
                return Ok(EngineStatus::Infeasible);
            }
            for j in art_start..self.cost.len() {
                self.upper[j] = 0.0;
                if self.state[j] != VarState::Basic {
                    self.x[j] = 0.0;
                    self.state[j] = VarState::AtLower;
                }
            }
        }
        let cost = std::mem::take(&mut self.cost);
        let status = self.primal(&cost);
        self.cost = cost;
        match status? {
            EngineStatus::Optimal => self.finish(),
            other => Ok(other),
        }
    }

    /// Changes the bounds of a structural variable; the basis is kept.
    pub(crate) fn set_bounds(&mut self, j: usize, lo: f64, hi: f64) {
        debug_assert!(j < self.n && lo <= hi);
        self.lower[j] = lo;
        self.upper[j] = hi;
        match self.state[j] {
            VarState::Basic => {}
            VarState::AtUpper if hi.is_finite() => {
                self.x[j] = hi;
                self.xb_dirty = true;
            }
            _ if lo.is_finite() => {
                self.state[j] = VarState::AtLower;
                self.x[j] = lo;
                self.xb_dirty = true;
            }
            _ if hi.is_finite() => {
                self.state[j] = VarState::AtUpper;
                self.x[j] = hi;
                self.xb_dirty = true;
            }
            _ => self.state[j] = VarState::Free,
        }
    }

    /// Re-solves after bound changes, starting from the current basis.
    pub(crate) fn reoptimize(&mut self) -> Result<EngineStatus, SolverError> {
        self.budget = 0;
        if self.trivially_infeasible {
            return Ok(EngineStatus::Infeasible);
        }
        if self.xb_dirty {
            self.recompute_xb();
        }
        self.repair()
    }

    fn repair(&mut self) -> Result<EngineStatus, SolverError> {
        match self.dual()? {
            EngineStatus::Optimal => {}
            other => return Ok(other),
        }
        let cost = std::mem::take(&mut self.cost);
        let status = self.primal(&cost);
        self.cost = cost;
        match status? {
            EngineStatus::Optimal => self.finish(),
            other => Ok(other),
        }
    }

    /// Refactorizes, recomputes the basic values, and repairs any drift.
    fn finish(&mut self) -> Result<EngineStatus, SolverError> {
        for _ in 0..3 {
            self.refactor()?;
            if self.max_basic_infeasibility() <= self.feas_tol {
                return Ok(EngineStatus::Optimal);
            }
            match self.dual()? {
                EngineStatus::Optimal => {}
                other => return Ok(other),
            }
            let cost = std::mem::take(&mut self.cost);
            let status = self.primal(&cost);
            self.cost = cost;
            match status? {
                EngineStatus::Optimal => {}
                other => return Ok(other),
            }
        }
        self.refactor()?;
        Ok(EngineStatus::Optimal)
    }

    pub(crate) fn solution(&self, problem: &LpProblem, status: EngineStatus) -> LpSolution {
        match status {
            EngineStatus::Optimal => {
                let values: Vec<f64> = self.x[..self.n]
                    .iter()
                    .enumerate()
                    .map(|(j, &v)| v.clamp(problem.lower[j], problem.upper[j]))
                    .collect();
                LpSolution {
                    status: LpStatus::Optimal,
                    objective: problem.objective_value(&values),
                    values: Some(values),
                    iterations: self.iterations,
                }
            }
            other => LpSolution {
                status: other.into(),
                values: None,
                objective: match other {
                    EngineStatus::Infeasible => f64::INFINITY,
                    EngineStatus::Unbounded => f64::NEG_INFINITY,
                    _ => f64::NAN,
                },
                iterations: self.iterations,
            },
        }
    }

    fn max_basic_infeasibility(&self) -> f64 {
        self.basis
            .iter()
            .map(|&j| (self.lower[j] - self.x[j]).max(self.x[j] - self.upper[j]))
            .fold(0.0, f64::max)
    }

    fn tick(&mut self) -> Result<bool, SolverError> {
        if self.budget >= self.iteration_limit {
            return Ok(false);
        }
        if self.since_refactor >= self.refactor_every {
            self.refactor()?;
        }
        Ok(true)
    }

    fn note_step(&mut self, step: f64) {
        if step.abs() <= RATIO_TIE {
            self.degenerate_run += 1;
            if self.degenerate_run > self.stall_threshold {
                self.bland = true;
            }
        } else {
            self.degenerate_run = 0;
            self.bland = false;
        }
        self.iterations += 1;
        self.budget += 1;
    }

    fn is_fixed(&self, j: usize) -> bool {
        self.lower[j] == self.upper[j]
    }

    /// y = c_B^T B^{-1}
    fn compute_duals(&mut self, cost: &[f64]) {
        let m = self.m;
        self.y.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.binv[i * m..(i + 1) * m];
                for (yk, b) in self.y.iter_mut().zip(row) {
                    *yk += cb * b;
                }
            }
        }
    }

    fn reduced_cost(&self, cost: &[f64], j: usize) -> f64 {
        let mut d = cost[j];
        for &(i, a) in &self.cols[j] {
            d -= self.y[i] * a;
        }
        d
    }

    /// alpha = B^{-1} A_j
    fn ftran(&mut self, j: usize) {
        let m = self.m;
        self.alpha.iter_mut().for_each(|v| *v = 0.0);
        for &(r, a) in &self.cols[j] {
            for i in 0..m {
                self.alpha[i] += self.binv[i * m + r] * a;
            }
        }
    }

    fn pivot(&mut self, r: usize, entering: usize) {
        let m = self.m;
        let piv = self.alpha[r];
        {
            let row = &mut self.binv[r * m..(r + 1) * m];
            row.iter_mut().for_each(|v| *v /= piv);
        }
        let pivot_row: Vec<f64> = self.binv[r * m..(r + 1) * m].to_vec();
        for i in 0..m {
            let f = self.alpha[i];
            if i != r && f != 0.0 {
                let row = &mut self.binv[i * m..(i + 1) * m];
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
            }
        }
        self.basis[r] = entering;
        self.state[entering] = VarState::Basic;
        self.since_refactor += 1;
    }

    fn refactor(&mut self) -> Result<(), SolverError> {
        let m = self.m;
        // Gauss-Jordan on [B | I].
        let mut b = vec![0.0; m * m];
        for (k, &j) in self.basis.iter().enumerate() {
            for &(i, a) in &self.cols[j] {
                b[i * m + k] = a;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for col in 0..m {
            let (p, best) = (col..m)
                .map(|r| (r, b[r * m + col].abs()))
                .fold((col, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
            if best < 1e-13 {
                return Err(SolverError::Singular);
            }
            if p != col {
                for k in 0..m {
                    b.swap(p * m + k, col * m + k);
                    inv.swap(p * m + k, col * m + k);
                }
            }
            let piv = b[col * m + col];
            for k in 0..m {
                b[col * m + k] /= piv;
                inv[col * m + k] /= piv;
            }
            let brow: Vec<f64> = b[col * m..(col + 1) * m].to_vec();
            let irow: Vec<f64> = inv[col * m..(col + 1) * m].to_vec();
            for r in 0..m {
                let f = b[r * m + col];
                if r != col && f != 0.0 {
                    for k in 0..m {
                        b[r * m + k] -= f * brow[k];
                        inv[r * m + k] -= f * irow[k];
                    }
                }
            }
        }
        // Row k of B^{-1} yields the basic variable in column k of B.
        self.binv = inv;
        self.since_refactor = 0;
        self.recompute_xb();
        Ok(())
    }

    fn recompute_xb(&mut self) {
        let m = self.m;
        let mut resid = self.rhs.clone();
        for (j, col) in self.cols.iter().enumerate() {
            if self.state[j] != VarState::Basic && self.x[j] != 0.0 {
                for &(i, a) in col {
                    resid[i] -= a * self.x[j];
                }
            }
        }
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            let v: f64 = row.iter().zip(&resid).map(|(b, r)| b * r).sum();
            self.x[self.basis[i]] = v;
        }
        self.xb_dirty = false;
    }

    /// Primal simplex from a primal feasible basis under `cost`.
    fn primal(&mut self, cost: &[f64]) -> Result<EngineStatus, SolverError> {
        let ncols = self.cols.len();
        loop {
            if !self.tick()? {
                return Ok(EngineStatus::IterationLimit);
            }
            self.compute_duals(cost);

            let mut entering: Option<(usize, f64)> = None;
            for j in 0..ncols {
                let st = self.state[j];
                if st == VarState::Basic || self.is_fixed(j) {
                    continue;
                }
                let d = self.reduced_cost(cost, j);
                let score = match st {
                    VarState::AtLower if d < -self.opt_tol => -d,
                    VarState::AtUpper if d > self.opt_tol => d,
                    VarState::Free if d.abs() > self.opt_tol => d.abs(),
                    _ => continue,
                };
                if self.bland {
                    entering = Some((j, d));
                    break;
                }
                if entering.is_none_or(|(k, dk)| {
                    let best = dk.abs();
                    score > best || (score == best && j < k)
                }) {
                    entering = Some((j, d));
                }
            }
            let Some((q, dq)) = entering else {
                return Ok(EngineStatus::Optimal);
            };
            let dir = if dq < 0.0 { 1.0 } else { -1.0 };
            self.ftran(q);

            let mut step = f64::INFINITY;
            let mut leave: Option<(usize, bool)> = None;
            for i in 0..self.m {
                let a = self.alpha[i];
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let var = self.basis[i];
                let rate = -dir * a;
                let (lim, to_lower) = if rate < 0.0 {
                    if !self.lower[var].is_finite() {
                        continue;
                    }
                    ((self.x[var] - self.lower[var]) / -rate, true)
                } else {
                    if !self.upper[var].is_finite() {
                        continue;
                    }
                    ((self.upper[var] - self.x[var]) / rate, false)
                };
                let lim = lim.max(0.0);
                let better = match leave {
                    None => true,
                    Some((r, _)) => {
                        if lim < step - RATIO_TIE {
                            true
                        } else if lim <= step + RATIO_TIE {
                            if self.bland {
                                var < self.basis[r]
                            } else {
                                a.abs() > self.alpha[r].abs()
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    step = if leave.is_none() { lim } else { step.min(lim) };
                    leave = Some((i, to_lower));
                }
            }

            let range = self.upper[q] - self.lower[q];
            if range.is_finite() && range <= step {
                // bound flip
                let delta = dir * range;
                for i in 0..self.m {
                    let var = self.basis[i];
                    self.x[var] -= self.alpha[i] * delta;
                }
                if dir > 0.0 {
                    self.x[q] = self.upper[q];
                    self.state[q] = VarState::AtUpper;
                } else {
                    self.x[q] = self.lower[q];
                    self.state[q] = VarState::AtLower;
                }
                self.note_step(range);
                continue;
            }
            let Some((r, to_lower)) = leave else {
                return Ok(EngineStatus::Unbounded);
            };
            let delta = dir * step;
            for i in 0..self.m {
                let var = self.basis[i];
                self.x[var] -= self.alpha[i] * delta;
            }
            self.x[q] += delta;
            let p = self.basis[r];
            if to_lower {
                self.x[p] = self.lower[p];
                self.state[p] = VarState::AtLower;
            } else {
                self.x[p] = self.upper[p];
                self.state[p] = VarState::AtUpper;
            }
            self.pivot(r, q);
            self.note_step(step);
        }
    }

    /// Dual simplex from a dual feasible basis under the phase-two cost.
    fn dual(&mut self) -> Result<EngineStatus, SolverError> {
        let m = self.m;
        let ncols = self.cols.len();
        loop {
            if !self.tick()? {
                return Ok(EngineStatus::IterationLimit);
            }
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                let var = self.basis[i];
                let v = self.x[var];
                let infeas = (self.lower[var] - v).max(v - self.upper[var]);
                if infeas > self.feas_tol {
                    let better = match leave {
                        None => true,
                        Some((r, best)) => {
                            if self.bland {
                                var < self.basis[r]
                            } else {
                                infeas > best
                            }
                        }
                    };
                    if better {
                        leave = Some((i, infeas));
                    }
                }
            }
            let Some((r, _)) = leave else {
                return Ok(EngineStatus::Optimal);
            };
            let p = self.basis[r];
            let to_lower = self.x[p] < self.lower[p];

            let cost = std::mem::take(&mut self.cost);
            self.compute_duals(&cost);
            let rho: Vec<f64> = self.binv[r * m..(r + 1) * m].to_vec();
            let mut entering: Option<(usize, f64, f64)> = None;
            for j in 0..ncols {
                let st = self.state[j];
                if st == VarState::Basic || self.is_fixed(j) {
                    continue;
                }
                let mut arj = 0.0;
                for &(i, a) in &self.cols[j] {
                    arj += rho[i] * a;
                }
                if arj.abs() <= PIVOT_TOL {
                    continue;
                }
                let eligible = match (st, to_lower) {
                    (VarState::AtLower, true) => arj < 0.0,
                    (VarState::AtUpper, true) => arj > 0.0,
                    (VarState::AtLower, false) => arj > 0.0,
                    (VarState::AtUpper, false) => arj < 0.0,
                    (VarState::Free, _) => true,
                    (VarState::Basic, _) => false,
                };
                if !eligible {
                    continue;
                }
                let d = self.reduced_cost(&cost, j);
                let slack = match st {
                    VarState::AtLower => d.max(0.0),
                    VarState::AtUpper => (-d).max(0.0),
                    _ => d.abs(),
                };
                let ratio = slack / arj.abs();
                let better = match entering {
                    None => true,
                    Some((k, best, best_a)) => {
                        if ratio < best - RATIO_TIE {
                            true
                        } else if ratio <= best + RATIO_TIE {
                            if self.bland {
                                j < k
                            } else {
                                arj.abs() > best_a
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    entering = Some((j, ratio, arj.abs()));
                }
            }
            self.cost = cost;
            let Some((q, ratio, _)) = entering else {
                return Ok(EngineStatus::Infeasible);
            };

            self.ftran(q);
            let target = if to_lower { self.lower[p] } else { self.upper[p] };
            let t = (self.x[p] - target) / self.alpha[r];
            for i in 0..m {
                let var = self.basis[i];
                self.x[var] -= self.alpha[i] * t;
            }
            self.x[q] += t;
            self.x[p] = target;
            self.state[p] = if to_lower {
                VarState::AtLower
            } else {
                VarState::AtUpper
            };
            self.pivot(r, q);
            self.note_step(ratio);
        }
    }
}
