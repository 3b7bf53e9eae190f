//! ReLU feedforward networks built from `o = relu(W x + c)` blocks.

use std::fmt::Write as _;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

pub const MODEL_HEADER: &str = "milptrain-model v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    pub fn apply(self, a: f64) -> f64 {
        match self {
            Activation::Relu => a.max(0.0),
            Activation::Identity => a,
        }
    }

    fn token(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        }
    }
}

/// Weight sharing pattern of a layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tying {
    None,
    /// Single feature map over an `height x width` input, square `kernel`,
    /// stride 1, no padding.
    Conv {
        height: usize,
        width: usize,
        kernel: usize,
    },
}

impl Tying {
    pub fn id(&self) -> String {
        match *self {
            Tying::None => "none".into(),
            Tying::Conv {
                height,
                width,
                kernel,
            } => format!("conv{height}x{width}k{kernel}"),
        }
    }

    /// Input and output widths implied by the pattern, if any.
    pub fn shape(&self) -> Option<(usize, usize)> {
        match *self {
            Tying::None => None,
            Tying::Conv {
                height,
                width,
                kernel,
            } => Some((
                height * width,
                (height + 1).saturating_sub(kernel) * (width + 1).saturating_sub(kernel),
            )),
        }
    }

    /// Partition of the `n x d` weight positions (row-major, `l * d + i`)
    /// into equality classes plus a fixed-zero mask. Positions in no class
    /// and not masked are free.
    pub fn descriptor(&self, inputs: usize, outputs: usize) -> TyingDescriptor {
        match *self {
            Tying::None => TyingDescriptor {
                classes: Vec::new(),
                zero: vec![false; inputs * outputs],
            },
            Tying::Conv {
                height: _,
                width,
                kernel,
            } => {
                let out_w = width + 1 - kernel;
                let mut classes = vec![Vec::new(); kernel * kernel];
                let mut zero = vec![true; inputs * outputs];
                for l in 0..outputs {
                    let (r, c) = (l / out_w, l % out_w);
                    for kr in 0..kernel {
                        for kc in 0..kernel {
                            let i = (r + kr) * width + (c + kc);
                            let pos = l * inputs + i;
                            zero[pos] = false;
                            classes[kr * kernel + kc].push(pos);
                        }
                    }
                }
                TyingDescriptor { classes, zero }
            }
        }
    }
}

impl FromStr for Tying {
    type Err = NetworkError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "none" {
            return Ok(Tying::None);
        }
        let bad = || NetworkError::Parse(format!("unknown tying `{s}`"));
        let rest = s.strip_prefix("conv").ok_or_else(bad)?;
        let (hw, k) = rest.split_once('k').ok_or_else(bad)?;
        let (h, w) = hw.split_once('x').ok_or_else(bad)?;
        let parse = |t: &str| t.parse::<usize>().map_err(|_| bad());
        let (height, width, kernel) = (parse(h)?, parse(w)?, parse(k)?);
        if kernel == 0 || kernel > height || kernel > width {
            return Err(bad());
        }
        Ok(Tying::Conv {
            height,
            width,
            kernel,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TyingDescriptor {
    pub classes: Vec<Vec<usize>>,
    pub zero: Vec<bool>,
}

impl TyingDescriptor {
    /// Class index of every position, `None` for free or masked positions.
    pub fn class_of(&self) -> Vec<Option<usize>> {
        let mut out = vec![None; self.zero.len()];
        for (k, class) in self.classes.iter().enumerate() {
            for &p in class {
                out[p] = Some(k);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSpec {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
    pub tying: Tying,
    pub offsets_fixed_zero: bool,
}

impl LayerSpec {
    pub fn dense(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            activation: Activation::Relu,
            tying: Tying::None,
            offsets_fixed_zero: false,
        }
    }

    /// Convolutional layer with zero offsets.
    pub fn conv(height: usize, width: usize, kernel: usize) -> Self {
        let tying = Tying::Conv {
            height,
            width,
            kernel,
        };
        let (inputs, outputs) = tying.shape().expect("conv has a shape");
        Self {
            inputs,
            outputs,
            activation: Activation::Relu,
            tying,
            offsets_fixed_zero: true,
        }
    }

    pub fn descriptor(&self) -> TyingDescriptor {
        self.tying.descriptor(self.inputs, self.outputs)
    }

    /// Whether neurons share weight variables, which rules out solving one
    /// problem per neuron.
    pub fn couples_neurons(&self) -> bool {
        let d = self.inputs;
        self.descriptor().classes.iter().any(|class| {
            class
                .first()
                .is_some_and(|&p0| class.iter().any(|&p| p / d != p0 / d))
        })
    }

    fn validate(&self) -> Result<(), NetworkError> {
        if self.inputs == 0 || self.outputs == 0 {
            return Err(NetworkError::Dimension("layer with zero width".into()));
        }
        if let Some((d, n)) = self.tying.shape() {
            if (d, n) != (self.inputs, self.outputs) {
                return Err(NetworkError::Dimension(format!(
                    "tying {} implies {d}x{n}, layer is {}x{}",
                    self.tying.id(),
                    self.inputs,
                    self.outputs
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    /// `outputs x inputs`, row-major.
    pub weights: Vec<f64>,
    pub offsets: Vec<f64>,
}

impl Layer {
    pub fn zeros(spec: LayerSpec) -> Self {
        Self {
            weights: vec![0.0; spec.inputs * spec.outputs],
            offsets: vec![0.0; spec.outputs],
            spec,
        }
    }

    pub fn weight(&self, neuron: usize, input: usize) -> f64 {
        self.weights[neuron * self.spec.inputs + input]
    }

    pub fn row(&self, neuron: usize) -> &[f64] {
        let d = self.spec.inputs;
        &self.weights[neuron * d..(neuron + 1) * d]
    }

    pub fn pre_activation(&self, neuron: usize, x: &[f64]) -> f64 {
        self.offsets[neuron] + self.row(neuron).iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    /// Pre-activations and outputs for one input vector.
    pub fn apply(&self, x: &[f64]) -> LayerRecord {
        let pre: Vec<f64> = (0..self.spec.outputs)
            .map(|j| self.pre_activation(j, x))
            .collect();
        let out = pre.iter().map(|&a| self.spec.activation.apply(a)).collect();
        LayerRecord { pre, out }
    }

    /// Tied positions equal and masked positions zero.
    pub fn respects_tying(&self) -> bool {
        let desc = self.spec.descriptor();
        let masked_ok = desc
            .zero
            .iter()
            .zip(&self.weights)
            .all(|(&z, &w)| !z || w == 0.0);
        let tied_ok = desc.classes.iter().all(|class| {
            class
                .first()
                .is_none_or(|&p0| class.iter().all(|&p| self.weights[p] == self.weights[p0]))
        });
        let offsets_ok = !self.spec.offsets_fixed_zero || self.offsets.iter().all(|&c| c == 0.0);
        masked_ok && tied_ok && offsets_ok
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerRecord {
    pub pre: Vec<f64>,
    pub out: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub outputs: Vec<f64>,
    pub label: usize,
}

impl Prediction {
    pub fn from_outputs(outputs: Vec<f64>) -> Self {
        let label = closest_to_one(&outputs);
        Self { outputs, label }
    }

    /// `|o_label - 1|`
    pub fn distance(&self) -> f64 {
        (self.outputs[self.label] - 1.0).abs()
    }
}

/// Index of the output closest to one; ties go to the lowest index.
pub fn closest_to_one(outputs: &[f64]) -> usize {
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for (j, &o) in outputs.iter().enumerate() {
        let dist = (o - 1.0).abs();
        if dist < best_dist {
            best = j;
            best_dist = dist;
        }
    }
    best
}

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("unsupported model file version: `{0}`")]
    Version(String),
    #[error("model file ends early: {0}")]
    Truncated(String),
    #[error("malformed model file: {0}")]
    Parse(String),
    #[error("empty input")]
    Empty,
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub layers: Vec<Layer>,
}

impl Network {
    pub fn new(layers: Vec<Layer>) -> Result<Self, NetworkError> {
        if layers.is_empty() {
            return Err(NetworkError::Empty);
        }
        for layer in &layers {
            layer.spec.validate()?;
            let (d, n) = (layer.spec.inputs, layer.spec.outputs);
            if layer.weights.len() != d * n || layer.offsets.len() != n {
                return Err(NetworkError::Dimension(format!(
                    "layer {d}x{n} holds {} weights and {} offsets",
                    layer.weights.len(),
                    layer.offsets.len()
                )));
            }
        }
        for pair in layers.windows(2) {
            if pair[0].spec.outputs != pair[1].spec.inputs {
                return Err(NetworkError::Dimension(format!(
                    "layer output width {} feeds input width {}",
                    pair[0].spec.outputs, pair[1].spec.inputs
                )));
            }
        }
        Ok(Self { layers })
    }

    /// Uniform random weights on `[lo, hi]`; tied classes share one draw,
    /// masked positions and fixed offsets are zero.
    pub fn random<R: Rng>(
        specs: Vec<LayerSpec>,
        (lo, hi): (f64, f64),
        rng: &mut R,
    ) -> Result<Self, NetworkError> {
        let mut layers = Vec::with_capacity(specs.len());
        for spec in specs {
            spec.validate()?;
            let desc = spec.descriptor();
            let class_of = desc.class_of();
            let class_vals: Vec<f64> = desc
                .classes
                .iter()
                .map(|_| rng.random_range(lo..=hi))
                .collect();
            let mut layer = Layer::zeros(spec);
            for p in 0..layer.weights.len() {
                layer.weights[p] = match (desc.zero[p], class_of[p]) {
                    (true, _) => 0.0,
                    (false, Some(k)) => class_vals[k],
                    (false, None) => rng.random_range(lo..=hi),
                };
            }
            if !layer.spec.offsets_fixed_zero {
                for c in &mut layer.offsets {
                    *c = rng.random_range(lo..=hi);
                }
            }
            layers.push(layer);
        }
        Self::new(layers)
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].spec.inputs
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().expect("non-empty").spec.outputs
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<LayerRecord>, NetworkError> {
        if x.len() != self.input_width() {
            return Err(NetworkError::Dimension(format!(
                "input has {} components, network expects {}",
                x.len(),
                self.input_width()
            )));
        }
        let mut records: Vec<LayerRecord> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let input = records.last().map_or(x, |r| r.out.as_slice());
            let rec = layer.apply(input);
            records.push(rec);
        }
        Ok(records)
    }

    pub fn outputs(&self, x: &[f64]) -> Result<Vec<f64>, NetworkError> {
        Ok(self.forward(x)?.pop().expect("non-empty").out)
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction, NetworkError> {
        Ok(Prediction::from_outputs(self.outputs(x)?))
    }

    /// Fraction of samples whose predicted label matches.
    pub fn accuracy<X: AsRef<[f64]>>(&self, inputs: &[X], labels: &[usize]) -> Result<f64, NetworkError> {
        if inputs.is_empty() {
            return Err(NetworkError::Empty);
        }
        if inputs.len() != labels.len() {
            return Err(NetworkError::Dimension(format!(
                "{} inputs but {} labels",
                inputs.len(),
                labels.len()
            )));
        }
        let mut correct = 0usize;
        for (x, &label) in inputs.iter().zip(labels) {
            if self.predict(x.as_ref())?.label == label {
                correct += 1;
            }
        }
        Ok(correct as f64 / inputs.len() as f64)
    }

    pub fn save<W: Write>(&self, mut dest: W) -> Result<(), NetworkError> {
        let mut s = String::new();
        s.push_str(MODEL_HEADER);
        s.push('\n');
        for layer in &self.layers {
            let spec = &layer.spec;
            let _ = write!(
                s,
                "layer {} {} {} {}",
                spec.inputs,
                spec.outputs,
                spec.activation.token(),
                spec.tying.id()
            );
            // conv layers default to zero offsets, dense ones to free offsets
            let default_zero = spec.tying != Tying::None;
            if spec.offsets_fixed_zero != default_zero {
                s.push_str(if spec.offsets_fixed_zero { " zero-offsets" } else { " free-offsets" });
            }
            s.push('\n');
            for j in 0..spec.outputs {
                write_row(&mut s, layer.row(j));
            }
            write_row(&mut s, &layer.offsets);
        }
        dest.write_all(s.as_bytes())?;
        dest.flush()?;
        Ok(())
    }

    pub fn load<R: BufRead>(source: R) -> Result<Self, NetworkError> {
        let mut lines = source.lines();
        let mut next_line = |what: &str| -> Result<String, NetworkError> {
            loop {
                match lines.next() {
                    None => return Err(NetworkError::Truncated(format!("expected {what}"))),
                    Some(line) => {
                        let line = line?;
                        if !line.trim().is_empty() {
                            return Ok(line);
                        }
                    }
                }
            }
        };
        let header = next_line("header").map_err(|e| match e {
            NetworkError::Truncated(_) => NetworkError::Version(String::new()),
            other => other,
        })?;
        if header.trim() != MODEL_HEADER {
            return Err(NetworkError::Version(header.trim().to_string()));
        }
        let mut layers = Vec::new();
        loop {
            let line = match next_line("layer") {
                Ok(l) => l,
                Err(NetworkError::Truncated(_)) if !layers.is_empty() => break,
                Err(e) => return Err(e),
            };
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() < 5 || toks[0] != "layer" {
                return Err(NetworkError::Parse(format!("expected layer header, got `{line}`")));
            }
            let parse_usize = |t: &str| {
                t.parse::<usize>()
                    .map_err(|_| NetworkError::Parse(format!("bad width `{t}`")))
            };
            let (d, n) = (parse_usize(toks[1])?, parse_usize(toks[2])?);
            let activation = match toks[3] {
                "relu" => Activation::Relu,
                "identity" => Activation::Identity,
                other => return Err(NetworkError::Parse(format!("unknown activation `{other}`"))),
            };
            let tying: Tying = toks[4].parse()?;
            let offsets_fixed_zero = match toks.get(5) {
                None => tying != Tying::None,
                Some(&"zero-offsets") => true,
                Some(&"free-offsets") => false,
                Some(other) => return Err(NetworkError::Parse(format!("unknown flag `{other}`"))),
            };
            let spec = LayerSpec {
                inputs: d,
                outputs: n,
                activation,
                tying,
                offsets_fixed_zero,
            };
            spec.validate()?;
            let mut weights = Vec::with_capacity(d * n);
            for j in 0..n {
                let row = parse_row(&next_line(&format!("weight row {j}"))?)?;
                if row.len() != d {
                    return Err(NetworkError::Dimension(format!(
                        "weight row {j} has {} values, header says {d}",
                        row.len()
                    )));
                }
                weights.extend(row);
            }
            let offsets = parse_row(&next_line("offset row")?)?;
            if offsets.len() != n {
                return Err(NetworkError::Dimension(format!(
                    "offset row has {} values, header says {n}",
                    offsets.len()
                )));
            }
            layers.push(Layer {
                spec,
                weights,
                offsets,
            });
        }
        Self::new(layers)
    }
}

fn write_row(s: &mut String, values: &[f64]) {
    for (k, v) in values.iter().enumerate() {
        if k > 0 {
            s.push(' ');
        }
        // 17 significant digits reproduce any f64 exactly
        let _ = write!(s, "{v:.16e}");
    }
    s.push('\n');
}

fn parse_row(line: &str) -> Result<Vec<f64>, NetworkError> {
    line.split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| NetworkError::Parse(format!("bad number `{t}`")))
        })
        .collect()
}
