//! Optimization problems that fit one layer of a network.
//!
//! Weight problems treat the layer inputs as data and the weights as
//! variables; input problems do the opposite. ReLU is encoded with one
//! binary firing indicator `b` per neuron and sample:
//!
//! ```text
//! a = c + sum_i w_i x_i
//! -M (1 - b) <= a     <= M b
//! -M (1 - b) <= o - a <= M (1 - b)
//!  0         <= o     <= M b
//! o - t = dp - dm,   dp, dm >= 0
//! ```
//!
//! The output layer drops the ReLU (`o = a`) and only charges `dp` when the
//! target is zero, since a negative output would be clipped to zero anyway.

use std::fmt;

use thiserror::Error;

use crate::model::{Compiled, LinExpr, Model, ModelError, VarHandle, VarKind};
use crate::network::{Layer, LayerSpec};
use crate::simplex::{solve_lp, Relation, SolverConfig, SolverError};

/// Largest slack allowed in the post-processing fit.
pub const POSTPROCESS_SLACK: f64 = 0.49;

/// Upper bound on `|a|` and `o` for any weights in `[-1, 1]` and any input
/// inside the proposal windows of data bounded by `m_tilde`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BigM {
    pub m_tilde: f64,
    pub value: f64,
}

impl BigM {
    pub fn new(inputs: usize, m_tilde: f64) -> Self {
        debug_assert!(m_tilde >= 0.0);
        Self {
            m_tilde,
            value: inputs as f64 * (1.1 * m_tilde + 0.1) + 1.0,
        }
    }

    /// Uses the largest input component of the batch.
    pub fn for_batch(inputs: usize, batch: &[Vec<f64>]) -> Self {
        let m_tilde = batch
            .iter()
            .flatten()
            .fold(0.0_f64, |acc, &v| acc.max(v));
        Self::new(inputs, m_tilde)
    }
}

/// Limits how far a weight may move from its value on the previous batch:
/// `w~ -/+ (factor |w~| + pad)`, intersected with `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightWindowRule {
    pub factor: f64,
    pub pad: f64,
}

impl Default for WeightWindowRule {
    fn default() -> Self {
        Self {
            factor: 0.6,
            pad: 0.01,
        }
    }
}

impl WeightWindowRule {
    pub fn bounds(&self, prev: f64) -> (f64, f64) {
        let r = self.factor * prev.abs() + self.pad;
        ((prev - r).max(-1.0), (prev + r).min(1.0))
    }
}

/// Per-position bounds for a whole layer: `n * d` weights (row-major)
/// followed by `n` offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightWindow {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl WeightWindow {
    pub fn around(layer: &Layer, rule: &WeightWindowRule) -> Self {
        let (lower, upper) = layer
            .weights
            .iter()
            .chain(&layer.offsets)
            .map(|&w| rule.bounds(w))
            .unzip();
        Self { lower, upper }
    }

    fn weight(&self, d: usize, neuron: usize, input: usize) -> (f64, f64) {
        let p = neuron * d + input;
        (self.lower[p].max(-1.0), self.upper[p].min(1.0))
    }

    fn offset(&self, n: usize, d: usize, neuron: usize) -> (f64, f64) {
        let p = n * d + neuron;
        (self.lower[p].max(-1.0), self.upper[p].min(1.0))
    }

    pub fn contains(&self, layer: &Layer, tol: f64) -> bool {
        layer
            .weights
            .iter()
            .chain(&layer.offsets)
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(&w, (&l, &u))| w >= l - tol && w <= u + tol)
    }

    /// Largest distance of any weight or offset outside its interval.
    pub fn max_violation(&self, layer: &Layer) -> f64 {
        layer
            .weights
            .iter()
            .chain(&layer.offsets)
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&w, (&l, &u))| (l - w).max(w - u).max(0.0))
            .fold(0.0, f64::max)
    }
}

/// Bounds on a proposed input around its previous value `x~`:
/// `[max(0, shrink x~ - pad), grow x~ + pad]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputWindowRule {
    pub grow: f64,
    pub shrink: f64,
    pub pad: f64,
}

impl Default for InputWindowRule {
    fn default() -> Self {
        Self {
            grow: 1.1,
            shrink: 0.9,
            pad: 0.1,
        }
    }
}

impl InputWindowRule {
    pub fn bounds(&self, prev: f64) -> (f64, f64) {
        ((self.shrink * prev - self.pad).max(0.0), self.grow * prev + self.pad)
    }
}

#[derive(Debug, Error)]
pub enum EncodingError {
    #[error("empty batch")]
    EmptyBatch,
    #[error("input component {value} of sample {sample} is negative")]
    NegativeInput { sample: usize, value: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("neuron {neuron} out of range for a layer with {outputs} outputs")]
    NeuronOutOfRange { neuron: usize, outputs: usize },
    #[error("target {0} is not 0 or 1")]
    NonBinaryTarget(f64),
    #[error("layer shares weights across neurons; build the joint problem instead")]
    CoupledNeurons,
    #[error("sign-pattern enumeration is limited to {max} samples, got {got}")]
    TooManySamples { got: usize, max: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// How the outputs of the encoded neurons relate to their targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMode {
    /// ReLU outputs with binaries, objective `sum dp + dm`.
    Relu,
    /// `o = a`, objective `dp` for zero targets and `dp + dm` for ones.
    Linear,
    /// [`FitMode::Linear`] plus slacks that forgive deviations up to 0.49.
    PostProcess,
}

impl fmt::Display for FitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FitMode::Relu => "relu",
            FitMode::Linear => "linear",
            FitMode::PostProcess => "postprocess",
        })
    }
}

/// Variables attached to one (sample, neuron) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleVars {
    pub a: VarHandle,
    pub o: VarHandle,
    pub b: Option<VarHandle>,
    pub dp: VarHandle,
    pub dm: VarHandle,
    pub s: Option<VarHandle>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightRef {
    Var(VarHandle),
    Zero,
}

/// Fills in the dependent variables of one (sample, neuron) pair given its
/// pre-activation, so that every row of the encoding holds.
fn fill_sample(values: &mut [f64], vars: &SampleVars, mode: FitMode, a: f64, t: f64) {
    values[vars.a.index()] = a;
    let o = match mode {
        FitMode::Relu => a.max(0.0),
        _ => a,
    };
    values[vars.o.index()] = o;
    if let Some(b) = vars.b {
        values[b.index()] = if a > 0.0 { 1.0 } else { 0.0 };
    }
    let dp = (o - t).max(0.0);
    let dm = (t - o).max(0.0);
    values[vars.dp.index()] = dp;
    values[vars.dm.index()] = dm;
    if let Some(s) = vars.s {
        let delta = if t == 0.0 { dp } else { dp + dm };
        values[s.index()] = delta.min(POSTPROCESS_SLACK);
    }
}

/// Adds the variables and rows linking `a`, `o` and the deviation pair for
/// one (sample, neuron) pair. `a` must already be defined by the caller.
#[allow(clippy::too_many_arguments)]
fn add_output_block(
    model: &mut Model,
    objective: &mut LinExpr,
    mode: FitMode,
    k: usize,
    j: usize,
    a: VarHandle,
    t: f64,
    big_m: f64,
) -> Result<SampleVars, ModelError> {
    let tag = format!("{k}_{j}");
    let dp = model.add_var(format!("dp_{tag}"), 0.0, f64::INFINITY, VarKind::Continuous)?;
    let dm = model.add_var(format!("dm_{tag}"), 0.0, f64::INFINITY, VarKind::Continuous)?;
    let (o, b) = match mode {
        FitMode::Relu => {
            let o = model.add_var(format!("o_{tag}"), 0.0, big_m, VarKind::Continuous)?;
            let b = model.add_var(format!("b_{tag}"), 0.0, 1.0, VarKind::Binary)?;
            // -M (1 - b) <= a <= M b
            model.add_constraint(
                LinExpr::new().term(a, 1.0).term(b, -big_m),
                Relation::Le,
                0.0,
                format!("fire_hi_{tag}"),
            )?;
            model.add_constraint(
                LinExpr::new().term(a, 1.0).term(b, -big_m),
                Relation::Ge,
                -big_m,
                format!("fire_lo_{tag}"),
            )?;
            // -M (1 - b) <= o - a <= M (1 - b)
            model.add_constraint(
                LinExpr::new().term(o, 1.0).term(a, -1.0).term(b, big_m),
                Relation::Le,
                big_m,
                format!("pass_hi_{tag}"),
            )?;
            model.add_constraint(
                LinExpr::new().term(o, 1.0).term(a, -1.0).term(b, -big_m),
                Relation::Ge,
                -big_m,
                format!("pass_lo_{tag}"),
            )?;
            // o <= M b
            model.add_constraint(
                LinExpr::new().term(o, 1.0).term(b, -big_m),
                Relation::Le,
                0.0,
                format!("out_{tag}"),
            )?;
            (o, Some(b))
        }
        FitMode::Linear | FitMode::PostProcess => (a, None),
    };
    // o - t = dp - dm
    model.add_constraint(
        LinExpr::new().term(o, 1.0).term(dp, -1.0).term(dm, 1.0),
        Relation::Eq,
        t,
        format!("dev_{tag}"),
    )?;
    let mut s = None;
    match mode {
        FitMode::Relu => {
            objective.add(dp, 1.0);
            objective.add(dm, 1.0);
        }
        FitMode::Linear | FitMode::PostProcess => {
            objective.add(dp, 1.0);
            if t != 0.0 {
                objective.add(dm, 1.0);
            }
            if mode == FitMode::PostProcess {
                let sv = model.add_var(
                    format!("s_{tag}"),
                    0.0,
                    POSTPROCESS_SLACK,
                    VarKind::Continuous,
                )?;
                // s <= delta
                let mut row = LinExpr::new().term(sv, 1.0).term(dp, -1.0);
                if t != 0.0 {
                    row.add(dm, -1.0);
                }
                model.add_constraint(row, Relation::Le, 0.0, format!("slack_{tag}"))?;
                objective.add(sv, -1.0);
                s = Some(sv);
            }
        }
    }
    Ok(SampleVars {
        a,
        o,
        b,
        dp,
        dm,
        s,
    })
}

fn check_batch(d: usize, inputs: &[Vec<f64>]) -> Result<(), EncodingError> {
    if inputs.is_empty() {
        return Err(EncodingError::EmptyBatch);
    }
    for (k, x) in inputs.iter().enumerate() {
        if x.len() != d {
            return Err(EncodingError::Dimension(format!(
                "sample {k} has {} components, layer expects {d}",
                x.len()
            )));
        }
        if let Some(&v) = x.iter().find(|&&v| v < 0.0 || v.is_nan()) {
            return Err(EncodingError::NegativeInput { sample: k, value: v });
        }
    }
    Ok(())
}

fn check_binary_targets(targets: &[f64]) -> Result<(), EncodingError> {
    match targets.iter().find(|&&t| t != 0.0 && t != 1.0) {
        Some(&t) => Err(EncodingError::NonBinaryTarget(t)),
        None => Ok(()),
    }
}

/// A weight-fitting problem over some neurons of one layer.
#[derive(Debug, Clone)]
pub struct WeightEncoding {
    pub model: Model,
    pub mode: FitMode,
    pub big_m: BigM,
    /// Layer neurons covered by this problem.
    pub neurons: Vec<usize>,
    pub inputs_per_neuron: usize,
    /// `neurons.len() * d`, row-major.
    pub weights: Vec<WeightRef>,
    pub offsets: Vec<WeightRef>,
    /// `[sample][local neuron]`
    pub samples: Vec<Vec<SampleVars>>,
    data: Vec<Vec<f64>>,
    /// `[sample][local neuron]`
    targets: Vec<Vec<f64>>,
}

impl WeightEncoding {
    pub fn compile(&self) -> Result<Compiled, EncodingError> {
        Ok(self.model.compile()?)
    }

    /// Complete assignment for the given weights, `weight(local, i)` and
    /// `offset(local)`. Values of weight variables are read once per class.
    pub fn assignment_with(
        &self,
        weight: impl Fn(usize, usize) -> f64,
        offset: impl Fn(usize) -> f64,
    ) -> Vec<f64> {
        let mut values = vec![0.0; self.model.num_vars()];
        let d = self.inputs_per_neuron;
        for (p, r) in self.weights.iter().enumerate() {
            if let WeightRef::Var(v) = r {
                values[v.index()] = weight(p / d, p % d);
            }
        }
        for (l, r) in self.offsets.iter().enumerate() {
            if let WeightRef::Var(v) = r {
                values[v.index()] = offset(l);
            }
        }
        self.fill_from_weight_values(&mut values);
        values
    }

    /// Warm start from the current weights of `layer`.
    pub fn assignment_for_layer(&self, layer: &Layer) -> Vec<f64> {
        self.assignment_with(
            |l, i| layer.weight(self.neurons[l], i),
            |l| layer.offsets[self.neurons[l]],
        )
    }

    /// Completes an assignment from the weight variables of `relaxed`
    /// (clamped to their bounds), e.g. an LP relaxation.
    pub fn complete(&self, relaxed: &[f64]) -> Vec<f64> {
        let mut values = vec![0.0; self.model.num_vars()];
        for r in self.weights.iter().chain(&self.offsets) {
            if let WeightRef::Var(v) = r {
                let var = self.model.var(*v);
                values[v.index()] = relaxed[v.index()].clamp(var.lower, var.upper);
            }
        }
        self.fill_from_weight_values(&mut values);
        values
    }

    fn read(&self, values: &[f64], r: WeightRef) -> f64 {
        match r {
            WeightRef::Var(v) => values[v.index()],
            WeightRef::Zero => 0.0,
        }
    }

    fn fill_from_weight_values(&self, values: &mut [f64]) {
        let d = self.inputs_per_neuron;
        for (k, x) in self.data.iter().enumerate() {
            for (l, vars) in self.samples[k].iter().enumerate() {
                let mut a = self.read(values, self.offsets[l]);
                for (i, &xi) in x.iter().enumerate() {
                    if xi != 0.0 {
                        a += self.read(values, self.weights[l * d + i]) * xi;
                    }
                }
                fill_sample(values, vars, self.mode, a, self.targets[k][l]);
            }
        }
    }

    /// Weight rows and offsets of the encoded neurons.
    pub fn extract(&self, values: &[f64]) -> Vec<(Vec<f64>, f64)> {
        let d = self.inputs_per_neuron;
        (0..self.neurons.len())
            .map(|l| {
                let row = (0..d).map(|i| self.read(values, self.weights[l * d + i])).collect();
                (row, self.read(values, self.offsets[l]))
            })
            .collect()
    }

    /// Writes the extracted weights into `layer`.
    pub fn install(&self, values: &[f64], layer: &mut Layer) {
        let d = self.inputs_per_neuron;
        for (l, (row, c)) in self.extract(values).into_iter().enumerate() {
            let j = self.neurons[l];
            layer.weights[j * d..(j + 1) * d].copy_from_slice(&row);
            layer.offsets[j] = c;
        }
    }
}

/// Weight problem for a set of neurons that may share tied weights.
#[allow(clippy::too_many_arguments)]
fn build_weight_model(
    spec: &LayerSpec,
    neurons: &[usize],
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    mode: FitMode,
    big_m: BigM,
    window: Option<&WeightWindow>,
) -> Result<WeightEncoding, EncodingError> {
    let (d, n) = (spec.inputs, spec.outputs);
    check_batch(d, inputs)?;
    if targets.len() != inputs.len() || targets.iter().any(|t| t.len() != neurons.len()) {
        return Err(EncodingError::Dimension(format!(
            "expected {} target rows of width {}",
            inputs.len(),
            neurons.len()
        )));
    }
    if let Some(&j) = neurons.iter().find(|&&j| j >= n) {
        return Err(EncodingError::NeuronOutOfRange { neuron: j, outputs: n });
    }
    if let Some(w) = window {
        if w.lower.len() != n * d + n || w.upper.len() != n * d + n {
            return Err(EncodingError::Dimension("weight window size".into()));
        }
    }
    let desc = spec.descriptor();
    let class_of = desc.class_of();

    let mut model = Model::new();
    let mut class_vars: Vec<Option<VarHandle>> = vec![None; desc.classes.len()];
    let mut weights = Vec::with_capacity(neurons.len() * d);
    for &j in neurons {
        for i in 0..d {
            let p = j * d + i;
            if desc.zero[p] {
                weights.push(WeightRef::Zero);
                continue;
            }
            let (lo, hi) = window.map_or((-1.0, 1.0), |w| w.weight(d, j, i));
            let r = match class_of[p] {
                Some(cls) => match class_vars[cls] {
                    Some(v) => v,
                    None => {
                        let v = model.add_var(format!("w_{j}_{i}"), lo, hi, VarKind::Continuous)?;
                        class_vars[cls] = Some(v);
                        v
                    }
                },
                None => model.add_var(format!("w_{j}_{i}"), lo, hi, VarKind::Continuous)?,
            };
            weights.push(WeightRef::Var(r));
        }
    }
    let mut offsets = Vec::with_capacity(neurons.len());
    for &j in neurons {
        if spec.offsets_fixed_zero {
            offsets.push(WeightRef::Zero);
        } else {
            let (lo, hi) = window.map_or((-1.0, 1.0), |w| w.offset(n, d, j));
            offsets.push(WeightRef::Var(model.add_var(
                format!("c_{j}"),
                lo,
                hi,
                VarKind::Continuous,
            )?));
        }
    }

    let m = big_m.value;
    let mut objective = LinExpr::new();
    let mut samples = Vec::with_capacity(inputs.len());
    for (k, x) in inputs.iter().enumerate() {
        let mut row_vars = Vec::with_capacity(neurons.len());
        for (l, &j) in neurons.iter().enumerate() {
            let (a_lo, a_hi) = match mode {
                FitMode::Relu => (-m, m),
                _ => (f64::NEG_INFINITY, f64::INFINITY),
            };
            let a = model.add_var(format!("a_{k}_{j}"), a_lo, a_hi, VarKind::Continuous)?;
            // a - c - sum_i w_i x_i = 0
            let mut def = LinExpr::new().term(a, 1.0);
            if let WeightRef::Var(c) = offsets[l] {
                def.add(c, -1.0);
            }
            for (i, &xi) in x.iter().enumerate() {
                if let (WeightRef::Var(w), true) = (weights[l * d + i], xi != 0.0) {
                    def.add(w, -xi);
                }
            }
            model.add_constraint(def, Relation::Eq, 0.0, format!("def_{k}_{j}"))?;
            row_vars.push(add_output_block(
                &mut model,
                &mut objective,
                mode,
                k,
                j,
                a,
                targets[k][l],
                m,
            )?);
        }
        samples.push(row_vars);
    }
    model.set_objective(objective)?;
    Ok(WeightEncoding {
        model,
        mode,
        big_m,
        neurons: neurons.to_vec(),
        inputs_per_neuron: d,
        weights,
        offsets,
        samples,
        data: inputs.to_vec(),
        targets: targets.to_vec(),
    })
}

fn column(targets: &[f64]) -> Vec<Vec<f64>> {
    targets.iter().map(|&t| vec![t]).collect()
}

fn single_neuron(spec: &LayerSpec, neuron: usize) -> Result<(), EncodingError> {
    if neuron >= spec.outputs {
        return Err(EncodingError::NeuronOutOfRange {
            neuron,
            outputs: spec.outputs,
        });
    }
    if spec.couples_neurons() {
        return Err(EncodingError::CoupledNeurons);
    }
    Ok(())
}

/// ReLU weight MILP for neuron `neuron`: minimize `sum_k |o_k - t_k|`.
pub fn build_weight_milp(
    spec: &LayerSpec,
    neuron: usize,
    inputs: &[Vec<f64>],
    targets: &[f64],
    big_m: BigM,
    window: Option<&WeightWindow>,
) -> Result<WeightEncoding, EncodingError> {
    single_neuron(spec, neuron)?;
    build_weight_model(
        spec,
        &[neuron],
        inputs,
        &column(targets),
        FitMode::Relu,
        big_m,
        window,
    )
}

/// ReLU weight MILP over all neurons of a layer at once; required when
/// neurons share tied weights. `targets` is `[sample][neuron]`.
pub fn build_weight_milp_joint(
    spec: &LayerSpec,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    big_m: BigM,
    window: Option<&WeightWindow>,
) -> Result<WeightEncoding, EncodingError> {
    let neurons: Vec<usize> = (0..spec.outputs).collect();
    build_weight_model(spec, &neurons, inputs, targets, FitMode::Relu, big_m, window)
}

/// Output-layer weight LP for one neuron with one-hot targets.
pub fn build_lastlayer_lp(
    spec: &LayerSpec,
    neuron: usize,
    inputs: &[Vec<f64>],
    targets: &[f64],
    window: Option<&WeightWindow>,
) -> Result<WeightEncoding, EncodingError> {
    single_neuron(spec, neuron)?;
    check_binary_targets(targets)?;
    let big_m = BigM::for_batch(spec.inputs, inputs);
    build_weight_model(
        spec,
        &[neuron],
        inputs,
        &column(targets),
        FitMode::Linear,
        big_m,
        window,
    )
}

/// Output-layer re-fit for one neuron in which deviations up to 0.49 are
/// free: minimize `sum_k (delta_k - s_k)` with `0 <= s_k <= min(delta_k, 0.49)`.
pub fn build_postprocess_lp(
    spec: &LayerSpec,
    neuron: usize,
    inputs: &[Vec<f64>],
    targets: &[f64],
    window: Option<&WeightWindow>,
) -> Result<WeightEncoding, EncodingError> {
    single_neuron(spec, neuron)?;
    check_binary_targets(targets)?;
    let big_m = BigM::for_batch(spec.inputs, inputs);
    build_weight_model(
        spec,
        &[neuron],
        inputs,
        &column(targets),
        FitMode::PostProcess,
        big_m,
        window,
    )
}

/// Input proposal for one sample: the layer weights are constants and the
/// `d` inputs are variables confined to their windows.
#[derive(Debug, Clone)]
pub struct InputEncoding {
    pub model: Model,
    pub mode: FitMode,
    pub x: Vec<VarHandle>,
    pub outputs: Vec<SampleVars>,
    weights: Vec<f64>,
    offsets: Vec<f64>,
    targets: Vec<f64>,
}

impl InputEncoding {
    pub fn compile(&self) -> Result<Compiled, EncodingError> {
        Ok(self.model.compile()?)
    }

    pub fn assignment(&self, x: &[f64]) -> Vec<f64> {
        let mut values = vec![0.0; self.model.num_vars()];
        for (h, &v) in self.x.iter().zip(x) {
            let var = self.model.var(*h);
            values[h.index()] = v.clamp(var.lower, var.upper);
        }
        self.fill(&mut values);
        values
    }

    /// Completes an assignment from the input variables of `relaxed`.
    pub fn complete(&self, relaxed: &[f64]) -> Vec<f64> {
        let x: Vec<f64> = self.x.iter().map(|h| relaxed[h.index()]).collect();
        self.assignment(&x)
    }

    fn fill(&self, values: &mut [f64]) {
        let d = self.x.len();
        for (j, vars) in self.outputs.iter().enumerate() {
            let row = &self.weights[j * d..(j + 1) * d];
            let mut a = self.offsets[j];
            for (w, h) in row.iter().zip(&self.x) {
                a += w * values[h.index()];
            }
            fill_sample(values, vars, self.mode, a, self.targets[j]);
        }
    }

    pub fn extract(&self, values: &[f64]) -> Vec<f64> {
        self.x.iter().map(|h| values[h.index()]).collect()
    }
}

/// Input-proposal problem for sample `sample` of a layer with fixed
/// weights. `last_layer` selects the linear output fit (targets must then
/// be 0/1); otherwise the ReLU MILP is built.
#[allow(clippy::too_many_arguments)]
pub fn build_input_milp(
    layer: &Layer,
    sample: usize,
    targets: &[f64],
    prev_input: &[f64],
    big_m: BigM,
    last_layer: bool,
    window: &InputWindowRule,
) -> Result<InputEncoding, EncodingError> {
    let (d, n) = (layer.spec.inputs, layer.spec.outputs);
    check_batch(d, std::slice::from_ref(&prev_input.to_vec()))?;
    if targets.len() != n {
        return Err(EncodingError::Dimension(format!(
            "{} targets for a layer with {n} outputs",
            targets.len()
        )));
    }
    let mode = if last_layer {
        check_binary_targets(targets)?;
        FitMode::Linear
    } else {
        FitMode::Relu
    };
    let mut model = Model::new();
    let x: Vec<VarHandle> = prev_input
        .iter()
        .enumerate()
        .map(|(i, &prev)| {
            let (lo, hi) = window.bounds(prev);
            model.add_var(format!("x_{sample}_{i}"), lo, hi, VarKind::Continuous)
        })
        .collect::<Result<_, _>>()?;
    let m = big_m.value;
    let mut objective = LinExpr::new();
    let mut outputs = Vec::with_capacity(n);
    for j in 0..n {
        let (a_lo, a_hi) = match mode {
            FitMode::Relu => (-m, m),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        };
        let a = model.add_var(format!("a_{sample}_{j}"), a_lo, a_hi, VarKind::Continuous)?;
        let mut def = LinExpr::new().term(a, 1.0);
        for (i, &w) in layer.row(j).iter().enumerate() {
            if w != 0.0 {
                def.add(x[i], -w);
            }
        }
        model.add_constraint(def, Relation::Eq, layer.offsets[j], format!("def_{sample}_{j}"))?;
        outputs.push(add_output_block(
            &mut model,
            &mut objective,
            mode,
            sample,
            j,
            a,
            targets[j],
            m,
        )?);
    }
    model.set_objective(objective)?;
    Ok(InputEncoding {
        model,
        mode,
        x,
        outputs,
        weights: layer.weights.clone(),
        offsets: layer.offsets.clone(),
        targets: targets.to_vec(),
    })
}

/// Result of the exhaustive sign-pattern search.
#[derive(Debug, Clone, PartialEq)]
pub struct SignPatternFit {
    pub objective: f64,
    pub weights: Vec<f64>,
    pub offset: f64,
    /// Bit `k` set means sample `k` was on the firing side.
    pub pattern: u32,
}

pub const MAX_SIGN_PATTERN_SAMPLES: usize = 16;

/// Exact single-neuron weight fit without binaries: one LP per assignment
/// of pre-activation signs (`a <= 0, o = 0` or `a >= 0, o = a`).
pub fn enumerate_sign_patterns(
    spec: &LayerSpec,
    neuron: usize,
    inputs: &[Vec<f64>],
    targets: &[f64],
) -> Result<Option<SignPatternFit>, EncodingError> {
    single_neuron(spec, neuron)?;
    let d = spec.inputs;
    check_batch(d, inputs)?;
    let m = inputs.len();
    if m > MAX_SIGN_PATTERN_SAMPLES {
        return Err(EncodingError::TooManySamples {
            got: m,
            max: MAX_SIGN_PATTERN_SAMPLES,
        });
    }
    if targets.len() != m {
        return Err(EncodingError::Dimension("one target per sample".into()));
    }
    let desc = spec.descriptor();
    let cfg = SolverConfig::default();
    let mut best: Option<SignPatternFit> = None;
    for pattern in 0u32..(1 << m) {
        let mut model = Model::new();
        let w: Vec<Option<VarHandle>> = (0..d)
            .map(|i| {
                if desc.zero[neuron * d + i] {
                    Ok(None)
                } else {
                    model
                        .add_var(format!("w_{neuron}_{i}"), -1.0, 1.0, VarKind::Continuous)
                        .map(Some)
                }
            })
            .collect::<Result<_, _>>()?;
        let c = if spec.offsets_fixed_zero {
            None
        } else {
            Some(model.add_var(format!("c_{neuron}"), -1.0, 1.0, VarKind::Continuous)?)
        };
        let mut objective = LinExpr::new();
        for (k, x) in inputs.iter().enumerate() {
            let mut a = LinExpr::new();
            for (i, &xi) in x.iter().enumerate() {
                if let Some(h) = w[i] {
                    a.add(h, xi);
                }
            }
            if let Some(c) = c {
                a.add(c, 1.0);
            }
            let dp = model.add_var(format!("dp_{k}"), 0.0, f64::INFINITY, VarKind::Continuous)?;
            let dm = model.add_var(format!("dm_{k}"), 0.0, f64::INFINITY, VarKind::Continuous)?;
            objective.add(dp, 1.0);
            objective.add(dm, 1.0);
            let firing = pattern >> k & 1 == 1;
            let sign_rel = if firing { Relation::Ge } else { Relation::Le };
            model.add_constraint(a.clone(), sign_rel, 0.0, format!("sign_{k}"))?;
            if firing {
                // a - dp + dm = t
                let mut dev = a;
                dev.add(dp, -1.0);
                dev.add(dm, 1.0);
                model.add_constraint(dev, Relation::Eq, targets[k], format!("dev_{k}"))?;
            } else {
                // 0 - t = dp - dm
                model.add_constraint(
                    LinExpr::new().term(dp, 1.0).term(dm, -1.0),
                    Relation::Eq,
                    -targets[k],
                    format!("dev_{k}"),
                )?;
            }
        }
        model.set_objective(objective)?;
        let Compiled::Lp(lp) = model.compile()? else {
            unreachable!("no binaries in a sign-pattern LP");
        };
        let sol = solve_lp(&lp, &cfg)?;
        let Some(values) = sol.values else { continue };
        if best.as_ref().is_none_or(|b| sol.objective < b.objective) {
            best = Some(SignPatternFit {
                objective: sol.objective,
                weights: w.iter().map(|h| h.map_or(0.0, |h| values[h.index()])).collect(),
                offset: c.map_or(0.0, |c| values[c.index()]),
                pattern,
            });
        }
    }
    Ok(best)
}
