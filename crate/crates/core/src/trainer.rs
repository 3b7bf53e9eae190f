//! Layer-by-layer training with LPs and MILPs.
//!
//! Each while-iteration walks from the output layer back to the first
//! layer. Every layer first gets new weights that fit its current targets;
//! then, with those weights fixed, every sample's inputs to the layer are
//! re-optimized and become the targets of the layer below.

use std::io::{self, Write};
use std::time::{Duration, Instant};

use log::{debug, info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::branch_bound::{solve_milp_with, MilpStatus};
use crate::dataset::Batch;
use crate::encodings::{
    build_input_milp, build_lastlayer_lp, build_postprocess_lp, build_weight_milp,
    build_weight_milp_joint, BigM, EncodingError, InputWindowRule, WeightWindow, WeightWindowRule,
};
use crate::model::Compiled;
use crate::network::{Layer, LayerSpec, Network, NetworkError};
use crate::simplex::{solve_lp, LpStatus, SolverConfig, SolverError};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("committee: {0}")]
    Committee(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Data the periodic post-processing fit runs on in a batch stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PostprocessScope {
    /// All batches trained so far.
    Seen,
    /// Every batch of the stream, including those not trained yet.
    All,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub max_while_iterations: usize,
    pub time_limit: Option<Duration>,
    pub node_limit: Option<usize>,
    pub batch_size: usize,
    pub weight_window: WeightWindowRule,
    pub input_window: InputWindowRule,
    /// Post-process after every this many batches of a stream; 0 disables.
    pub postprocess_every: usize,
    pub postprocess_scope: PostprocessScope,
    pub seed: u64,
    pub init_range: (f64, f64),
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_while_iterations: 10,
            time_limit: Some(Duration::from_secs(30)),
            node_limit: Some(50_000),
            batch_size: 100,
            weight_window: WeightWindowRule::default(),
            input_window: InputWindowRule::default(),
            postprocess_every: 10,
            postprocess_scope: PostprocessScope::Seen,
            seed: 0,
            init_range: (-1.0, 1.0),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let positive = [
            ("weight window factor", self.weight_window.factor),
            ("weight window pad", self.weight_window.pad),
            ("input window grow", self.input_window.grow),
            ("input window shrink", self.input_window.shrink),
            ("input window pad", self.input_window.pad),
        ];
        if let Some((name, v)) = positive.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(TrainError::Config(format!("{name} must be positive, got {v}")));
        }
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch size must be at least 1".into()));
        }
        let (lo, hi) = self.init_range;
        if !(lo < hi && lo >= -1.0 && hi <= 1.0) {
            return Err(TrainError::Config(format!(
                "init range [{lo}, {hi}] must be a non-empty part of [-1, 1]"
            )));
        }
        Ok(())
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            node_limit: self.node_limit,
            time_limit: self.time_limit,
            ..SolverConfig::default()
        }
    }
}

/// Random network drawn from `config.init_range` with `config.seed`.
pub fn init_network(specs: &[LayerSpec], config: &TrainConfig) -> Result<Network, TrainError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    Ok(Network::random(specs.to_vec(), config.init_range, &mut rng)?)
}

#[derive(Debug, Clone)]
pub struct TrainState {
    pub net: Network,
    /// `[layer][sample][neuron]` targets of the latest iteration.
    pub target_values: Vec<Vec<Vec<f64>>>,
    pub best_net: Network,
    pub best_accuracy: f64,
    pub last_accuracy: f64,
    /// Weights after the previous batch; bounds the next batch's weights.
    pub prev_batch_net: Option<Network>,
}

impl TrainState {
    pub fn new(net: Network) -> Self {
        Self {
            target_values: vec![Vec::new(); net.layers.len()],
            best_net: net.clone(),
            net,
            best_accuracy: 0.0,
            last_accuracy: -1.0,
            prev_batch_net: None,
        }
    }

    fn windows(&self, rule: &WeightWindowRule) -> Option<Vec<WeightWindow>> {
        self.prev_batch_net
            .as_ref()
            .map(|p| p.layers.iter().map(|l| WeightWindow::around(l, rule)).collect())
    }
}

/// Counts of subproblem solves.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolveStats {
    pub lps: usize,
    pub milps: usize,
    /// MILPs stopped by a node or time limit.
    pub at_limit: usize,
    pub nodes: usize,
}

impl SolveStats {
    fn merge(&mut self, other: SolveStats) {
        self.lps += other.lps;
        self.milps += other.milps;
        self.at_limit += other.at_limit;
        self.nodes += other.nodes;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchReport {
    pub initial_accuracy: f64,
    /// Accuracy after each while-iteration.
    pub trace: Vec<f64>,
    pub best_accuracy: f64,
    pub final_accuracy: f64,
    pub postprocess: Option<PostprocessOutcome>,
    pub stats: SolveStats,
    pub diagnostics: Vec<String>,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PostprocessOutcome {
    pub before: f64,
    pub after: f64,
    pub accepted: bool,
}

struct Solved {
    values: Vec<f64>,
    stats: SolveStats,
}

/// Solves an encoded subproblem, never returning anything worse than the
/// warm start. `complete` turns a relaxation point into a feasible one.
fn solve_encoded(
    compiled: Compiled,
    solver: &SolverConfig,
    warm: Vec<f64>,
    complete: &(dyn Fn(&[f64]) -> Vec<f64> + Sync),
) -> Result<Solved, SolverError> {
    let mut stats = SolveStats::default();
    match compiled {
        Compiled::Lp(lp) => {
            stats.lps = 1;
            let sol = solve_lp(&lp, solver)?;
            let warm_obj = lp.objective_value(&warm);
            let values = match (sol.status, sol.values) {
                (LpStatus::Optimal, Some(v)) if sol.objective <= warm_obj => complete(&v),
                (status, _) => {
                    if status != LpStatus::Optimal {
                        debug!("LP ended {status:?}; keeping the warm start");
                    }
                    warm
                }
            };
            Ok(Solved { values, stats })
        }
        Compiled::Milp(milp) => {
            stats.milps = 1;
            let heuristic = |v: &[f64]| Some(complete(v));
            let sol = solve_milp_with(&milp, solver, Some(&warm), Some(&heuristic))?;
            stats.nodes = sol.nodes_explored;
            if matches!(
                sol.status,
                MilpStatus::FeasibleAtLimit | MilpStatus::NoIncumbentAtLimit
            ) {
                stats.at_limit = 1;
            }
            Ok(Solved {
                values: sol.values.unwrap_or(warm),
                stats,
            })
        }
    }
}

/// Refits the weights of `layer` to `targets` (`[sample][neuron]`).
fn update_weights(
    layer: &mut Layer,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    window: Option<&WeightWindow>,
    last: bool,
    solver: &SolverConfig,
) -> Result<SolveStats, TrainError> {
    let spec = layer.spec.clone();
    let mut stats = SolveStats::default();
    if spec.couples_neurons() {
        let big_m = BigM::for_batch(spec.inputs, inputs);
        let enc = build_weight_milp_joint(&spec, inputs, targets, big_m, window)?;
        let warm = enc.assignment_for_layer(layer);
        let solved = solve_encoded(enc.compile()?, solver, warm, &|v| enc.complete(v))?;
        enc.install(&solved.values, layer);
        return Ok(solved.stats);
    }
    let current = &*layer;
    let fits = (0..spec.outputs)
        .into_par_iter()
        .map(|j| {
            let column: Vec<f64> = targets.iter().map(|t| t[j]).collect();
            let enc = if last {
                build_lastlayer_lp(&spec, j, inputs, &column, window)?
            } else {
                let big_m = BigM::for_batch(spec.inputs, inputs);
                build_weight_milp(&spec, j, inputs, &column, big_m, window)?
            };
            let warm = enc.assignment_for_layer(current);
            let solved = solve_encoded(enc.compile()?, solver, warm, &|v| enc.complete(v))?;
            let fit = enc.extract(&solved.values).remove(0);
            Ok((fit, solved.stats))
        })
        .collect::<Result<Vec<_>, TrainError>>()?;
    let d = spec.inputs;
    for (j, ((row, c), s)) in fits.into_iter().enumerate() {
        layer.weights[j * d..(j + 1) * d].copy_from_slice(&row);
        layer.offsets[j] = c;
        stats.merge(s);
    }
    Ok(stats)
}

/// Proposes new inputs for every sample so that `layer` (weights fixed)
/// gets closer to `targets`.
fn propose_inputs(
    layer: &Layer,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    last: bool,
    rule: &InputWindowRule,
    solver: &SolverConfig,
) -> Result<(Vec<Vec<f64>>, SolveStats), TrainError> {
    let big_m = BigM::for_batch(layer.spec.inputs, inputs);
    let proposals = inputs
        .par_iter()
        .zip(targets)
        .enumerate()
        .map(|(k, (x, t))| {
            let enc = build_input_milp(layer, k, t, x, big_m, last, rule)?;
            let warm = enc.assignment(x);
            let solved = solve_encoded(enc.compile()?, solver, warm, &|v| enc.complete(v))?;
            Ok((enc.extract(&solved.values), solved.stats))
        })
        .collect::<Result<Vec<_>, TrainError>>()?;
    let mut stats = SolveStats::default();
    let xs = proposals
        .into_iter()
        .map(|(x, s)| {
            stats.merge(s);
            x
        })
        .collect();
    Ok((xs, stats))
}

/// Inputs of every layer for every sample: `[layer][sample][component]`.
fn layer_inputs(net: &Network, inputs: &[Vec<f64>]) -> Result<Vec<Vec<Vec<f64>>>, TrainError> {
    let mut per_layer = vec![inputs.to_vec()];
    for (i, layer) in net.layers.iter().enumerate().take(net.layers.len() - 1) {
        let next = per_layer[i].iter().map(|x| layer.apply(x).out).collect();
        per_layer.push(next);
    }
    Ok(per_layer)
}

/// One backward sweep over all layers.
fn sweep(
    state: &mut TrainState,
    batch: &Batch,
    windows: Option<&[WeightWindow]>,
    config: &TrainConfig,
    solver: &SolverConfig,
) -> Result<SolveStats, TrainError> {
    let depth = state.net.layers.len();
    let xs = layer_inputs(&state.net, &batch.inputs)?;
    let mut stats = SolveStats::default();
    state.target_values = vec![Vec::new(); depth];
    state.target_values[depth - 1] = batch.targets.clone();
    for i in (0..depth).rev() {
        let last = i == depth - 1;
        let window = windows.map(|w| &w[i]);
        let started = Instant::now();
        let s = update_weights(
            &mut state.net.layers[i],
            &xs[i],
            &state.target_values[i],
            window,
            last,
            solver,
        )?;
        debug!(
            "layer {i}: weights refit ({} LPs, {} MILPs, {} at limit) in {:.2?}",
            s.lps,
            s.milps,
            s.at_limit,
            started.elapsed()
        );
        stats.merge(s);
        if i > 0 {
            let started = Instant::now();
            let (proposals, s) = propose_inputs(
                &state.net.layers[i],
                &xs[i],
                &state.target_values[i],
                last,
                &config.input_window,
                solver,
            )?;
            debug!("layer {i}: inputs proposed in {:.2?}", started.elapsed());
            stats.merge(s);
            state.target_values[i - 1] = proposals;
        }
    }
    Ok(stats)
}

fn check_batch(net: &Network, batch: &Batch) -> Result<(), TrainError> {
    if batch.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    let d = net.input_width();
    if let Some(x) = batch.inputs.iter().find(|x| x.len() != d) {
        return Err(TrainError::Dimension(format!(
            "network expects {d} inputs, batch has {}",
            x.len()
        )));
    }
    if batch.targets.iter().any(|t| t.len() != net.output_width()) {
        return Err(TrainError::Dimension(format!(
            "network has {} outputs, targets do not match",
            net.output_width()
        )));
    }
    Ok(())
}

/// Trains on one batch until accuracy stops improving, then restores the
/// best weights seen and, if the batch is still not fitted perfectly,
/// refits the output layer with the post-processing LP.
pub fn train_batch(
    state: &mut TrainState,
    batch: &Batch,
    config: &TrainConfig,
) -> Result<BatchReport, TrainError> {
    run_batch(state, batch, config, true)
}

fn run_batch(
    state: &mut TrainState,
    batch: &Batch,
    config: &TrainConfig,
    postprocess: bool,
) -> Result<BatchReport, TrainError> {
    config.validate()?;
    check_batch(&state.net, batch)?;
    let started = Instant::now();
    let solver = config.solver();
    let windows = state.windows(&config.weight_window);
    let initial = state.net.accuracy(&batch.inputs, &batch.labels)?;
    state.best_net = state.net.clone();
    state.best_accuracy = initial;
    state.last_accuracy = -1.0;
    let mut accuracy = 0.0;
    let mut trace = Vec::new();
    let mut stats = SolveStats::default();
    let mut diagnostics = Vec::new();

    while accuracy > state.last_accuracy
        && accuracy < 1.0
        && trace.len() < config.max_while_iterations
    {
        state.last_accuracy = accuracy;
        match sweep(state, batch, windows.as_deref(), config, &solver) {
            Ok(s) => stats.merge(s),
            Err(e) => {
                warn!("iteration {} aborted: {e}", trace.len() + 1);
                diagnostics.push(format!("iteration {}: {e}", trace.len() + 1));
                accuracy = state.net.accuracy(&batch.inputs, &batch.labels)?;
                break;
            }
        }
        accuracy = state.net.accuracy(&batch.inputs, &batch.labels)?;
        trace.push(accuracy);
        info!(
            "iteration {}: accuracy {accuracy:.4} ({:.1?} so far)",
            trace.len(),
            started.elapsed()
        );
        if accuracy > state.best_accuracy {
            state.best_accuracy = accuracy;
            state.best_net = state.net.clone();
        }
    }
    if accuracy < 1.0 {
        state.net = state.best_net.clone();
    }

    let mut outcome = None;
    if postprocess && state.best_accuracy < 1.0 {
        let window = windows.as_ref().and_then(|w| w.last());
        match postprocess_last_layer(&mut state.net, &batch.inputs, &batch.labels, window, &solver) {
            Ok(o) => outcome = Some(o),
            Err(e) => {
                warn!("post-processing failed: {e}");
                diagnostics.push(format!("post-processing: {e}"));
            }
        }
    }
    let final_accuracy = state.net.accuracy(&batch.inputs, &batch.labels)?;
    Ok(BatchReport {
        initial_accuracy: initial,
        trace,
        best_accuracy: state.best_accuracy,
        final_accuracy,
        postprocess: outcome,
        stats,
        diagnostics,
        elapsed: started.elapsed(),
    })
}

/// Refits the output layer so that every deviation below 0.49 is free.
/// The new weights are kept only if accuracy on `inputs` does not drop.
pub fn postprocess_last_layer(
    net: &mut Network,
    inputs: &[Vec<f64>],
    labels: &[usize],
    window: Option<&WeightWindow>,
    solver: &SolverConfig,
) -> Result<PostprocessOutcome, TrainError> {
    if inputs.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    let before = net.accuracy(inputs, labels)?;
    let xs = layer_inputs(net, inputs)?.pop().expect("at least one layer");
    let last = net.layers.last().expect("at least one layer");
    let spec = last.spec.clone();
    let n = spec.outputs;
    let fits = (0..n)
        .into_par_iter()
        .map(|j| {
            let column: Vec<f64> = labels.iter().map(|&l| if l == j { 1.0 } else { 0.0 }).collect();
            let enc = build_postprocess_lp(&spec, j, &xs, &column, window)?;
            let warm = enc.assignment_for_layer(last);
            let solved = solve_encoded(enc.compile()?, solver, warm, &|v| enc.complete(v))?;
            Ok(enc.extract(&solved.values).remove(0))
        })
        .collect::<Result<Vec<_>, TrainError>>()?;
    let mut candidate = net.clone();
    let layer = candidate.layers.last_mut().expect("at least one layer");
    let d = spec.inputs;
    for (j, (row, c)) in fits.into_iter().enumerate() {
        layer.weights[j * d..(j + 1) * d].copy_from_slice(&row);
        layer.offsets[j] = c;
    }
    let after = candidate.accuracy(inputs, labels)?;
    let accepted = after >= before;
    if accepted {
        *net = candidate;
    } else {
        info!("post-processing lowered accuracy {before:.4} -> {after:.4}; discarded");
    }
    Ok(PostprocessOutcome {
        before,
        after,
        accepted,
    })
}

/// One row of the metrics table written while streaming batches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub batch: usize,
    pub batch_accuracy: f64,
    pub cumulative_accuracy: f64,
    pub test_accuracy: Option<f64>,
    pub wall_time: Duration,
}

pub const METRICS_HEADER: &str = "batch,batch_accuracy,cumulative_accuracy,test_accuracy,wall_time_s";

impl MetricsRow {
    pub fn csv(&self) -> String {
        let test = self.test_accuracy.map_or(String::new(), |a| format!("{a:.6}"));
        format!(
            "{},{:.6},{:.6},{test},{:.3}",
            self.batch,
            self.batch_accuracy,
            self.cumulative_accuracy,
            self.wall_time.as_secs_f64()
        )
    }
}

pub fn write_metrics_csv<W: Write>(rows: &[MetricsRow], mut dest: W) -> io::Result<()> {
    writeln!(dest, "{METRICS_HEADER}")?;
    for r in rows {
        writeln!(dest, "{}", r.csv())?;
    }
    dest.flush()
}

#[derive(Debug, Clone)]
pub struct StreamOutcome {
    pub net: Network,
    pub rows: Vec<MetricsRow>,
    pub reports: Vec<BatchReport>,
    /// Network after each batch, starting with the untrained one.
    pub snapshots: Vec<Network>,
}

/// Trains batch after batch, bounding every weight by a window around its
/// value after the previous batch. The output layer is post-processed
/// every `postprocess_every` batches and after the last one. `on_row` sees
/// each metrics row as soon as it is known.
pub fn train_batched_stream(
    net: Network,
    batches: &[Batch],
    test: Option<&Batch>,
    config: &TrainConfig,
    mut on_row: impl FnMut(&MetricsRow),
) -> Result<StreamOutcome, TrainError> {
    config.validate()?;
    if batches.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    let started = Instant::now();
    let solver = config.solver();
    let mut state = TrainState::new(net);
    let mut rows = Vec::with_capacity(batches.len());
    let mut reports = Vec::with_capacity(batches.len());
    let mut snapshots = vec![state.net.clone()];
    for (t, batch) in batches.iter().enumerate() {
        if t > 0 {
            state.prev_batch_net = Some(state.net.clone());
        }
        let mut report = run_batch(&mut state, batch, config, false)?;
        let seen = Batch::concat(&batches[..=t]);
        let due = config.postprocess_every > 0
            && ((t + 1) % config.postprocess_every == 0 || t + 1 == batches.len());
        let data = match config.postprocess_scope {
            PostprocessScope::Seen => seen.clone(),
            PostprocessScope::All => Batch::concat(batches),
        };
        if due && state.net.accuracy(&data.inputs, &data.labels)? < 1.0 {
            let windows = state.windows(&config.weight_window);
            let window = windows.as_ref().and_then(|w| w.last());
            match postprocess_last_layer(&mut state.net, &data.inputs, &data.labels, window, &solver) {
                Ok(o) => report.postprocess = Some(o),
                Err(e) => {
                    warn!("post-processing after batch {} failed: {e}", t + 1);
                    report.diagnostics.push(format!("post-processing: {e}"));
                }
            }
        }
        let row = MetricsRow {
            batch: t + 1,
            batch_accuracy: state.net.accuracy(&batch.inputs, &batch.labels)?,
            cumulative_accuracy: state.net.accuracy(&seen.inputs, &seen.labels)?,
            test_accuracy: test
                .map(|b| state.net.accuracy(&b.inputs, &b.labels))
                .transpose()?,
            wall_time: started.elapsed(),
        };
        on_row(&row);
        rows.push(row);
        reports.push(report);
        snapshots.push(state.net.clone());
    }
    Ok(StreamOutcome {
        net: state.net,
        rows,
        reports,
        snapshots,
    })
}

/// Majority vote of three networks. When all three disagree, the network
/// whose winning output is closest to one decides.
pub fn committee_predict(nets: &[Network], x: &[f64]) -> Result<usize, TrainError> {
    if nets.len() != 3 {
        return Err(TrainError::Committee(format!(
            "expected 3 networks, got {}",
            nets.len()
        )));
    }
    let d = nets[0].input_width();
    if nets.iter().any(|n| n.input_width() != d) || x.len() != d {
        return Err(TrainError::Committee(format!(
            "input widths differ (sample has {})",
            x.len()
        )));
    }
    let preds = nets
        .iter()
        .map(|n| n.predict(x))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(vote(&preds.iter().map(|p| (p.label, p.distance())).collect::<Vec<_>>()))
}

/// `(label, |o_label - 1|)` per voter.
fn vote(votes: &[(usize, f64)]) -> usize {
    for (i, &(label, _)) in votes.iter().enumerate() {
        if votes[i + 1..].iter().any(|&(l, _)| l == label) {
            return label;
        }
    }
    votes
        .iter()
        .fold(None, |best: Option<(usize, f64)>, &(l, dist)| match best {
            Some((_, bd)) if bd <= dist => best,
            _ => Some((l, dist)),
        })
        .map(|(l, _)| l)
        .expect("three voters")
}

/// Committee accuracy over a batch.
pub fn committee_accuracy(nets: &[Network], batch: &Batch) -> Result<f64, TrainError> {
    if batch.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    let mut hits = 0;
    for (x, &l) in batch.inputs.iter().zip(&batch.labels) {
        if committee_predict(nets, x)? == l {
            hits += 1;
        }
    }
    Ok(hits as f64 / batch.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn majority_and_fallback() {
        assert_eq!(vote(&[(3, 0.5), (3, 0.1), (7, 0.0)]), 3);
        assert_eq!(vote(&[(7, 0.0), (3, 0.5), (3, 0.1)]), 3);
        assert_eq!(vote(&[(1, 0.1), (2, 0.3), (3, 0.2)]), 1);
        assert_eq!(vote(&[(1, 0.2), (2, 0.2), (3, 0.2)]), 1);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(matches!(bad.validate(), Err(TrainError::Config(_))));
        let bad = TrainConfig {
            init_range: (0.5, 0.5),
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn metrics_rows() {
        let row = MetricsRow {
            batch: 2,
            batch_accuracy: 0.5,
            cumulative_accuracy: 0.25,
            test_accuracy: None,
            wall_time: Duration::from_millis(1500),
        };
        assert_eq!(row.csv(), "2,0.500000,0.250000,,1.500");
        let mut out = Vec::new();
        write_metrics_csv(&[row], &mut out).unwrap();
        assert!(String::from_utf8(out).unwrap().starts_with(METRICS_HEADER));
    }
}
