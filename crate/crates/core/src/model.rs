//! Named variables, linear expressions and constraints, compiled into solver
//! problems or written out in CPLEX LP text format.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io;

use thiserror::Error;

use crate::branch_bound::MilpProblem;
use crate::simplex::{Constraint, LpProblem, Relation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarHandle(usize);

impl VarHandle {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub kind: VarKind,
}

/// Sum of `coefficient * variable` terms.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    terms: Vec<(VarHandle, f64)>,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn term(mut self, var: VarHandle, coeff: f64) -> Self {
        self.terms.push((var, coeff));
        self
    }

    pub fn add(&mut self, var: VarHandle, coeff: f64) {
        self.terms.push((var, coeff));
    }

    pub fn terms(&self) -> &[(VarHandle, f64)] {
        &self.terms
    }

    /// Merges repeated variables, keeping first-appearance order.
    fn merged(&self) -> Vec<(usize, f64)> {
        let mut pos: HashMap<usize, usize> = HashMap::new();
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(self.terms.len());
        for &(v, a) in &self.terms {
            match pos.get(&v.0) {
                Some(&k) => out[k].1 += a,
                None => {
                    pos.insert(v.0, out.len());
                    out.push((v.0, a));
                }
            }
        }
        out
    }
}

impl From<VarHandle> for LinExpr {
    fn from(v: VarHandle) -> Self {
        LinExpr::new().term(v, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedConstraint {
    pub name: String,
    pub terms: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("`{0}` is not a valid LP-format name")]
    InvalidName(String),
    #[error("variable `{name}` has inverted bounds [{lower}, {upper}]")]
    InvertedBounds { name: String, lower: f64, upper: f64 },
    #[error("binary variable `{0}` must have bounds within [0, 1]")]
    BinaryBounds(String),
    #[error("expression references unknown variable #{0}")]
    UnknownVariable(usize),
    #[error("non-finite coefficient or right-hand side in `{0}`")]
    NonFinite(String),
    #[error("model has no variables")]
    Empty,
}

/// A compiled model: an LP when there are no binaries, a MILP otherwise.
#[derive(Debug, Clone, PartialEq)]
pub enum Compiled {
    Lp(LpProblem),
    Milp(MilpProblem),
}

impl Compiled {
    pub fn into_milp(self) -> MilpProblem {
        match self {
            Compiled::Lp(lp) => MilpProblem::new(lp, Vec::new()),
            Compiled::Milp(m) => m,
        }
    }
}

/// A minimization model under construction.
#[derive(Debug, Clone, Default)]
pub struct Model {
    vars: Vec<Variable>,
    names: HashMap<String, usize>,
    constraints: Vec<NamedConstraint>,
    constraint_names: HashMap<String, usize>,
    objective: LinExpr,
}

fn valid_name(name: &str) -> bool {
    const SPECIAL: &str = "!\"#$%&()/,.;?@_`'{}|~";
    let Some(first) = name.chars().next() else {
        return false;
    };
    name.len() <= 255
        && !first.is_ascii_digit()
        && first != '.'
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || SPECIAL.contains(c))
}

impl Model {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        lower: f64,
        upper: f64,
        kind: VarKind,
    ) -> Result<VarHandle, ModelError> {
        let name = name.into();
        if !valid_name(&name) {
            return Err(ModelError::InvalidName(name));
        }
        if self.names.contains_key(&name) {
            return Err(ModelError::DuplicateName(name));
        }
        if lower.is_nan() || upper.is_nan() || lower > upper {
            return Err(ModelError::InvertedBounds { name, lower, upper });
        }
        if kind == VarKind::Binary && (lower < 0.0 || upper > 1.0) {
            return Err(ModelError::BinaryBounds(name));
        }
        let id = self.vars.len();
        self.names.insert(name.clone(), id);
        self.vars.push(Variable {
            name,
            lower,
            upper,
            kind,
        });
        Ok(VarHandle(id))
    }

    pub fn set_bounds(&mut self, var: VarHandle, lower: f64, upper: f64) -> Result<(), ModelError> {
        let v = self
            .vars
            .get_mut(var.0)
            .ok_or(ModelError::UnknownVariable(var.0))?;
        if lower.is_nan() || upper.is_nan() || lower > upper {
            return Err(ModelError::InvertedBounds {
                name: v.name.clone(),
                lower,
                upper,
            });
        }
        v.lower = lower;
        v.upper = upper;
        Ok(())
    }

    fn check_expr(&self, expr: &LinExpr) -> Result<(), ModelError> {
        match expr.terms.iter().find(|(v, _)| v.0 >= self.vars.len()) {
            Some((v, _)) => Err(ModelError::UnknownVariable(v.0)),
            None => Ok(()),
        }
    }

    pub fn add_constraint(
        &mut self,
        expr: LinExpr,
        relation: Relation,
        rhs: f64,
        name: impl Into<String>,
    ) -> Result<usize, ModelError> {
        let name = name.into();
        self.check_expr(&expr)?;
        if !valid_name(&name) {
            return Err(ModelError::InvalidName(name));
        }
        if self.constraint_names.contains_key(&name) {
            return Err(ModelError::DuplicateName(name));
        }
        let terms = expr.merged();
        if !rhs.is_finite() || terms.iter().any(|(_, a)| !a.is_finite()) {
            return Err(ModelError::NonFinite(name));
        }
        let id = self.constraints.len();
        self.constraint_names.insert(name.clone(), id);
        self.constraints.push(NamedConstraint {
            name,
            terms,
            relation,
            rhs,
        });
        Ok(id)
    }

    pub fn set_objective(&mut self, expr: LinExpr) -> Result<(), ModelError> {
        self.check_expr(&expr)?;
        if expr.terms.iter().any(|(_, a)| !a.is_finite()) {
            return Err(ModelError::NonFinite("objective".into()));
        }
        self.objective = expr;
        Ok(())
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn var(&self, v: VarHandle) -> &Variable {
        &self.vars[v.0]
    }

    pub fn variables(&self) -> &[Variable] {
        &self.vars
    }

    pub fn constraints(&self) -> &[NamedConstraint] {
        &self.constraints
    }

    pub fn lookup(&self, name: &str) -> Option<VarHandle> {
        self.names.get(name).map(|&i| VarHandle(i))
    }

    pub fn binaries(&self) -> impl Iterator<Item = VarHandle> + '_ {
        self.vars
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind == VarKind::Binary)
            .map(|(i, _)| VarHandle(i))
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective
            .merged()
            .iter()
            .map(|&(j, a)| a * values[j])
            .sum()
    }

    /// Index-faithful translation: variable `i` of the model is variable `i`
    /// of the problem and constraint `r` is row `r`.
    pub fn compile(&self) -> Result<Compiled, ModelError> {
        if self.vars.is_empty() {
            return Err(ModelError::Empty);
        }
        let n = self.vars.len();
        let mut objective = vec![0.0; n];
        for (j, a) in self.objective.merged() {
            objective[j] += a;
        }
        let mut lp = LpProblem::new(n).with_objective(objective).with_bounds(
            self.vars.iter().map(|v| v.lower).collect(),
            self.vars.iter().map(|v| v.upper).collect(),
        );
        for c in &self.constraints {
            lp.add_constraint(Constraint::new(c.terms.clone(), c.relation, c.rhs));
        }
        let binaries: Vec<usize> = self.binaries().map(VarHandle::index).collect();
        Ok(if binaries.is_empty() {
            Compiled::Lp(lp)
        } else {
            Compiled::Milp(MilpProblem::new(lp, binaries))
        })
    }

    /// Renders the model in CPLEX LP format with `\n` line endings.
    pub fn to_lp_string(&self) -> Result<String, ModelError> {
        if self.vars.is_empty() {
            return Err(ModelError::Empty);
        }
        let mut out = String::new();
        out.push_str("\\ written by milptrain\n");
        out.push_str("Minimize\n");
        let obj = self.objective.merged();
        if obj.is_empty() {
            let _ = writeln!(out, " obj: 0 {}", self.vars[0].name);
        } else {
            let _ = writeln!(out, " obj: {}", self.render_terms(&obj));
        }
        out.push_str("Subject To\n");
        for c in &self.constraints {
            let lhs = if c.terms.is_empty() {
                format!("0 {}", self.vars[0].name)
            } else {
                self.render_terms(&c.terms)
            };
            let _ = writeln!(
                out,
                " {}: {} {} {}",
                c.name,
                lhs,
                c.relation.symbol(),
                num(c.rhs)
            );
        }
        out.push_str("Bounds\n");
        for v in &self.vars {
            if v.kind == VarKind::Binary && v.lower == 0.0 && v.upper == 1.0 {
                continue;
            }
            let line = match (v.lower.is_finite(), v.upper.is_finite()) {
                _ if v.lower == v.upper => format!("{} = {}", v.name, num(v.lower)),
                (true, true) => format!("{} <= {} <= {}", num(v.lower), v.name, num(v.upper)),
                (true, false) => format!("{} >= {}", v.name, num(v.lower)),
                (false, true) => format!("-inf <= {} <= {}", v.name, num(v.upper)),
                (false, false) => format!("{} free", v.name),
            };
            let _ = writeln!(out, " {line}");
        }
        let binaries: Vec<&str> = self
            .vars
            .iter()
            .filter(|v| v.kind == VarKind::Binary)
            .map(|v| v.name.as_str())
            .collect();
        if !binaries.is_empty() {
            out.push_str("Binary\n");
            for chunk in binaries.chunks(8) {
                let _ = writeln!(out, " {}", chunk.join(" "));
            }
        }
        out.push_str("End\n");
        Ok(out)
    }

    pub fn export_lp_format<W: io::Write>(&self, mut dest: W) -> io::Result<()> {
        let text = self
            .to_lp_string()
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e))?;
        dest.write_all(text.as_bytes())?;
        dest.flush()
    }

    fn render_terms(&self, terms: &[(usize, f64)]) -> String {
        let mut s = String::new();
        for (k, &(j, a)) in terms.iter().enumerate() {
            if k > 0 && k % 6 == 0 {
                // CPLEX caps line length; continuation lines start with a blank
                s.push_str("\n  ");
            }
            let name = &self.vars[j].name;
            match (k, a < 0.0 || (a == 0.0 && a.is_sign_negative())) {
                (0, false) => {
                    let _ = write!(s, "{} {name}", num(a));
                }
                (0, true) => {
                    let _ = write!(s, "- {} {name}", num(-a));
                }
                (_, false) => {
                    let _ = write!(s, " + {} {name}", num(a));
                }
                (_, true) => {
                    let _ = write!(s, " - {} {name}", num(-a));
                }
            }
        }
        s
    }
}

/// Shortest representation that parses back to the same `f64`.
fn num(v: f64) -> String {
    if v == f64::INFINITY {
        "+inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else if v == 0.0 || (1e-5..1e15).contains(&v.abs()) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_var_handles_and_kinds() {
        let mut m = Model::new();
        let w = m.add_var("w_0_0", -1.0, 1.0, VarKind::Continuous).unwrap();
        assert_eq!(w.index(), 0);
        let b = m.add_var("b_0_0", 0.0, 1.0, VarKind::Binary).unwrap();
        assert_eq!(m.var(b).kind, VarKind::Binary);
        assert!(matches!(
            m.add_var("z", 2.0, 1.0, VarKind::Continuous),
            Err(ModelError::InvertedBounds { .. })
        ));
        assert!(matches!(
            m.add_var("w_0_0", 0.0, 1.0, VarKind::Continuous),
            Err(ModelError::DuplicateName(_))
        ));
        assert!(matches!(
            m.add_var("bad name", 0.0, 1.0, VarKind::Continuous),
            Err(ModelError::InvalidName(_))
        ));
    }

    #[test]
    fn constraint_round_trip() {
        let mut m = Model::new();
        let x = m.add_var("x", 0.0, 10.0, VarKind::Continuous).unwrap();
        let y = m.add_var("y", 0.0, 10.0, VarKind::Continuous).unwrap();
        m.add_constraint(LinExpr::new().term(x, 1.0).term(y, 2.0), Relation::Le, 3.0, "c0")
            .unwrap();
        m.add_constraint(LinExpr::from(x), Relation::Eq, 1.0, "c1").unwrap();
        let Compiled::Lp(lp) = m.compile().unwrap() else {
            panic!("expected an LP");
        };
        assert_eq!(lp.constraints[0].terms, vec![(0, 1.0), (1, 2.0)]);
        assert_eq!(lp.constraints[0].relation, Relation::Le);
        assert_eq!(lp.constraints[0].rhs, 3.0);
        assert_eq!(lp.constraints[1].relation, Relation::Eq);
    }

    #[test]
    fn unknown_handle_is_rejected() {
        let mut m = Model::new();
        m.add_var("x", 0.0, 1.0, VarKind::Continuous).unwrap();
        let err = m
            .add_constraint(LinExpr::new().term(VarHandle(5), 1.0), Relation::Le, 1.0, "c")
            .unwrap_err();
        assert_eq!(err, ModelError::UnknownVariable(5));
    }

    #[test]
    fn compile_collects_binaries() {
        let mut m = Model::new();
        assert_eq!(m.compile().unwrap_err(), ModelError::Empty);
        m.add_var("x", 0.0, 1.0, VarKind::Continuous).unwrap();
        m.add_var("b_0_0", 0.0, 1.0, VarKind::Binary).unwrap();
        m.add_var("b_1_0", 0.0, 1.0, VarKind::Binary).unwrap();
        let Compiled::Milp(p) = m.compile().unwrap() else {
            panic!("expected a MILP");
        };
        assert_eq!(p.binary_vars, vec![1, 2]);
    }

    #[test]
    fn repeated_terms_are_merged() {
        let mut m = Model::new();
        let x = m.add_var("x", 0.0, 1.0, VarKind::Continuous).unwrap();
        m.add_constraint(LinExpr::new().term(x, 1.0).term(x, 2.5), Relation::Ge, 0.0, "c")
            .unwrap();
        assert_eq!(m.constraints()[0].terms, vec![(0, 3.5)]);
    }

    #[test]
    fn lp_format_skeleton() {
        let mut m = Model::new();
        let x = m.add_var("x", 0.0, 10.0, VarKind::Continuous).unwrap();
        let b = m.add_var("b_0_0", 0.0, 1.0, VarKind::Binary).unwrap();
        m.set_objective(LinExpr::from(x)).unwrap();
        m.add_constraint(LinExpr::from(x), Relation::Ge, 3.0, "lo").unwrap();
        m.add_constraint(LinExpr::new().term(x, 1.0).term(b, -0.1), Relation::Le, 9.5, "hi")
            .unwrap();
        let text = m.to_lp_string().unwrap();
        let lines: Vec<&str> = text.lines().map(str::trim).collect();
        assert!(lines.contains(&"Minimize"));
        assert!(lines.contains(&"Subject To"));
        assert!(lines.contains(&"obj: 1 x"));
        assert!(lines.contains(&"lo: 1 x >= 3"));
        assert!(lines.contains(&"0 <= x <= 10"));
        assert!(lines.contains(&"hi: 1 x - 0.1 b_0_0 <= 9.5"));
        let bin = lines.iter().position(|l| *l == "Binary").unwrap();
        assert_eq!(lines[bin + 1], "b_0_0");
        assert_eq!(*lines.last().unwrap(), "End");
        assert!(!text.contains('\r'));
    }

    #[test]
    fn numbers_survive_printing() {
        for v in [0.1, 1.0 / 3.0, -2.5e-7, 123456.789012345, 1e-300, 3.0, 6.02e23] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
    }
}
