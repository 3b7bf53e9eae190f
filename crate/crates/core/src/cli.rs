//! The `milptrain` command line: `train`, `eval` and `export-lp`.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use thiserror::Error;

use crate::branch_bound::solve_milp;
use crate::dataset::{load_split, make_batches, Batch, DatasetError, ImageSet, Split};
use crate::encodings::{build_weight_milp, build_weight_milp_joint, BigM, EncodingError};
use crate::network::{LayerSpec, Network, NetworkError, Tying};
use crate::simplex::SolverError;
use crate::trainer::{
    committee_accuracy, init_network, train_batched_stream, PostprocessScope,
    TrainConfig, TrainError, METRICS_HEADER,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("bad architecture `{0}`: {1}")]
    Arch(String, String),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("{0}: {1}")]
    Io(PathBuf, io::Error),
}

/// Layer chain written as `dense:784-8-8-8-10` or `conv7x7k3+dense:25-10`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchSpec {
    pub text: String,
    pub layers: Vec<LayerSpec>,
}

impl FromStr for ArchSpec {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |why: &str| CliError::Arch(s.to_string(), why.to_string());
        let mut layers: Vec<LayerSpec> = Vec::new();
        for part in s.split('+') {
            if let Some(widths) = part.strip_prefix("dense:") {
                let widths = widths
                    .split('-')
                    .map(|w| w.parse::<usize>().ok().filter(|&w| w > 0))
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| bad("widths must be positive integers"))?;
                if widths.len() < 2 {
                    return Err(bad("a dense chain needs at least two widths"));
                }
                if let Some(prev) = layers.last() {
                    if prev.outputs != widths[0] {
                        return Err(bad(&format!(
                            "{} outputs feed a dense chain starting at {}",
                            prev.outputs, widths[0]
                        )));
                    }
                }
                layers.extend(widths.windows(2).map(|w| LayerSpec::dense(w[0], w[1])));
            } else if part.starts_with("conv") {
                let Tying::Conv {
                    height,
                    width,
                    kernel,
                } = part.parse::<Tying>().map_err(|e| bad(&e.to_string()))?
                else {
                    return Err(bad("expected convHxWkK"));
                };
                let spec = LayerSpec::conv(height, width, kernel);
                if let Some(prev) = layers.last() {
                    if prev.outputs != spec.inputs {
                        return Err(bad("conv input does not match the previous layer"));
                    }
                }
                layers.push(spec);
            } else {
                return Err(bad(&format!("unknown part `{part}`")));
            }
        }
        Ok(Self {
            text: s.to_string(),
            layers,
        })
    }
}

impl ArchSpec {
    pub fn has_conv(&self) -> bool {
        self.layers.iter().any(|l| l.tying != Tying::None)
    }
}

#[derive(Debug, Parser)]
#[command(name = "milptrain", version, about = "Train ReLU networks with LPs and MILPs")]
pub struct Cli {
    /// Log progress (set RUST_LOG for finer control).
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train on consecutive batches of the training split.
    Train(TrainArgs),
    /// Print the accuracy of a model or a committee of three.
    Eval(EvalArgs),
    /// Write one neuron's weight MILP in LP format.
    ExportLp(ExportArgs),
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s
        .split_once(',')
        .ok_or_else(|| format!("expected LO,HI, got `{s}`"))?;
    let p = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
    Ok((p(lo)?, p(hi)?))
}

fn parse_scope(s: &str) -> Result<PostprocessScope, String> {
    match s {
        "seen" => Ok(PostprocessScope::Seen),
        "all" => Ok(PostprocessScope::All),
        _ => Err(format!("expected `seen` or `all`, got `{s}`")),
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Directory holding the IDX files.
    #[arg(long)]
    pub data_dir: PathBuf,
    #[arg(long, default_value = "dense:784-8-8-8-10")]
    pub arch: String,
    #[arg(long, default_value_t = 100)]
    pub batch_size: usize,
    /// Number of consecutive batches to train on.
    #[arg(long, default_value_t = 1)]
    pub batches: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Wall-time cap per subproblem, in seconds.
    #[arg(long, default_value_t = 30.0)]
    pub time_limit: f64,
    /// Branch-and-bound node cap per subproblem.
    #[arg(long, default_value_t = 50_000)]
    pub node_limit: usize,
    /// Refit the output layer after this many batches (0 disables).
    #[arg(long, default_value_t = 10)]
    pub postprocess_every: usize,
    /// Data used by the periodic refit: `seen` batches or `all` of them.
    #[arg(long, default_value = "seen", value_parser = parse_scope)]
    pub postprocess_scope: PostprocessScope,
    #[arg(long, default_value = "model.txt")]
    pub model_out: PathBuf,
    #[arg(long, default_value = "metrics.csv")]
    pub metrics_out: PathBuf,
    /// Initial weights are uniform on LO,HI; defaults to -1,1 and to 0,1
    /// for architectures with a convolution.
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    pub init_range: Option<(f64, f64)>,
    /// Maximum while-iterations per batch.
    #[arg(long, default_value_t = 10)]
    pub max_iterations: usize,
    /// Worker threads for independent subproblems.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Evaluate on at most this many test images after each batch.
    #[arg(long)]
    pub test_limit: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, required_unless_present = "committee", conflicts_with = "committee")]
    pub model: Option<PathBuf>,
    /// Three model files voting by majority.
    #[arg(long, num_args = 3, value_names = ["A", "B", "C"])]
    pub committee: Option<Vec<PathBuf>>,
    #[arg(long)]
    pub data_dir: PathBuf,
    /// `train` or `test`.
    #[arg(long, default_value = "test")]
    pub split: Split,
    /// Use only the first this many images.
    #[arg(long)]
    pub limit: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Zero-based layer index.
    #[arg(long)]
    pub layer: usize,
    /// Zero-based neuron index within the layer.
    #[arg(long)]
    pub neuron: usize,
    /// Number of leading training images used as samples.
    #[arg(long)]
    pub samples: usize,
    #[arg(long)]
    pub data_dir: PathBuf,
    #[arg(long, default_value = "train")]
    pub split: Split,
    #[arg(long)]
    pub out: PathBuf,
    /// Also solve the problem and print its objective.
    #[arg(long)]
    pub solve: bool,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |e| CliError::Io(path.to_path_buf(), e)
}

fn load_model(path: &Path) -> Result<Network, CliError> {
    let f = File::open(path).map_err(io_err(path))?;
    Network::load(BufReader::new(f)).map_err(|e| match e {
        NetworkError::Io(e) => CliError::Io(path.to_path_buf(), e),
        other => CliError::Invalid(format!("{}: {other}", path.display())),
    })
}

/// Loads a split and matches it to the network's input width: 784 uses the
/// images as they are, 49 uses their 4x4 block means.
fn load_for_width(
    dir: &Path,
    split: Split,
    width: usize,
    limit: Option<usize>,
) -> Result<ImageSet, CliError> {
    let mut set = load_split(dir, split)?;
    if let Some(n) = limit {
        set = set.take(n);
    }
    if set.width() == width {
        return Ok(set);
    }
    let small = set.downsampled()?;
    if small.width() == width {
        return Ok(small);
    }
    Err(CliError::Invalid(format!(
        "network takes {width} inputs, images have {} (or {} downsampled)",
        set.width(),
        small.width()
    )))
}

fn whole(set: &ImageSet) -> Result<Batch, CliError> {
    let n = set.len().max(1);
    Ok(make_batches(set, n)?.remove(0))
}

fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match jobs {
        None => Ok(f()),
        Some(0) => Err(CliError::Invalid("--jobs must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Invalid(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

pub fn cmd_train(args: &TrainArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let arch: ArchSpec = args.arch.parse()?;
    if args.batches == 0 {
        return Err(CliError::Invalid("--batches must be at least 1".into()));
    }
    if !(args.time_limit > 0.0 && args.time_limit.is_finite()) {
        return Err(CliError::Invalid("--time-limit must be positive".into()));
    }
    let config = TrainConfig {
        max_while_iterations: args.max_iterations,
        time_limit: Some(Duration::from_secs_f64(args.time_limit)),
        node_limit: Some(args.node_limit),
        batch_size: args.batch_size,
        postprocess_every: args.postprocess_every,
        postprocess_scope: args.postprocess_scope,
        seed: args.seed,
        init_range: args
            .init_range
            .unwrap_or(if arch.has_conv() { (0.0, 1.0) } else { (-1.0, 1.0) }),
        ..TrainConfig::default()
    };
    config.validate()?;
    let width = arch.layers[0].inputs;
    let train = load_for_width(
        &args.data_dir,
        Split::Train,
        width,
        Some(args.batches.saturating_mul(args.batch_size)),
    )?;
    let batches = make_batches(&train, args.batch_size)?;
    if batches.len() < args.batches {
        warn!("only {} batches available", batches.len());
    }
    let test = match load_for_width(&args.data_dir, Split::Test, width, args.test_limit) {
        Ok(set) if !set.is_empty() => Some(whole(&set)?),
        Ok(_) => None,
        Err(e) => {
            warn!("no test accuracy: {e}");
            None
        }
    };
    let net = init_network(&arch.layers, &config)?;
    info!(
        "training {} on {} batches of up to {} images",
        arch.text,
        batches.len(),
        args.batch_size
    );

    let metrics = File::create(&args.metrics_out).map_err(io_err(&args.metrics_out))?;
    let mut metrics = BufWriter::new(metrics);
    writeln!(metrics, "{METRICS_HEADER}").map_err(io_err(&args.metrics_out))?;
    let mut write_failed = None;
    let outcome = with_jobs(args.jobs, || {
        train_batched_stream(net, &batches, test.as_ref(), &config, |row| {
            info!("{}", row.csv());
            if let Err(e) = writeln!(metrics, "{}", row.csv()).and_then(|_| metrics.flush()) {
                write_failed.get_or_insert(e);
            }
        })
    })??;
    if let Some(e) = write_failed {
        return Err(CliError::Io(args.metrics_out.clone(), e));
    }

    let f = File::create(&args.model_out).map_err(io_err(&args.model_out))?;
    outcome.net.save(BufWriter::new(f)).map_err(|e| match e {
        NetworkError::Io(e) => CliError::Io(args.model_out.clone(), e),
        other => other.into(),
    })?;
    let last = outcome.rows.last().expect("at least one batch");
    let stdout_err = |e| CliError::Io(PathBuf::from("<stdout>"), e);
    writeln!(out, "batch accuracy {:.4}", last.batch_accuracy).map_err(stdout_err)?;
    writeln!(out, "cumulative accuracy {:.4}", last.cumulative_accuracy).map_err(stdout_err)?;
    match last.test_accuracy {
        Some(a) => writeln!(out, "test accuracy {a:.4}"),
        None => writeln!(out, "test accuracy n/a"),
    }
    .map_err(stdout_err)?;
    Ok(())
}

pub fn cmd_eval(args: &EvalArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let nets = match (&args.model, &args.committee) {
        (Some(m), None) => vec![load_model(m)?],
        (None, Some(paths)) => paths.iter().map(|p| load_model(p)).collect::<Result<_, _>>()?,
        _ => return Err(CliError::Invalid("give --model or --committee".into())),
    };
    let width = nets[0].input_width();
    if nets.iter().any(|n| n.input_width() != width) {
        return Err(CliError::Invalid("committee members take different inputs".into()));
    }
    let set = load_for_width(&args.data_dir, args.split, width, args.limit)?;
    if set.is_empty() {
        return Err(DatasetError::Empty.into());
    }
    let batch = whole(&set)?;
    let accuracy = if nets.len() == 3 {
        committee_accuracy(&nets, &batch)?
    } else {
        nets[0].accuracy(&batch.inputs, &batch.labels)?
    };
    writeln!(out, "accuracy {accuracy:.4} on {} images", batch.len())
        .map_err(|e| CliError::Io(PathBuf::from("<stdout>"), e))?;
    Ok(())
}

pub fn cmd_export_lp(args: &ExportArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let net = load_model(&args.model)?;
    let depth = net.layers.len();
    if args.layer >= depth {
        return Err(CliError::Invalid(format!(
            "layer {} out of range (network has {depth})",
            args.layer
        )));
    }
    let spec = net.layers[args.layer].spec.clone();
    if args.neuron >= spec.outputs {
        return Err(CliError::Invalid(format!(
            "neuron {} out of range (layer has {})",
            args.neuron, spec.outputs
        )));
    }
    if args.samples == 0 {
        return Err(EncodingError::EmptyBatch.into());
    }
    let set = load_for_width(&args.data_dir, args.split, net.input_width(), Some(args.samples))?;
    let batch = whole(&set)?;
    // Inputs of the chosen layer; hidden layers are fitted to their current
    // outputs, the output layer to the labels.
    let mut xs = batch.inputs.clone();
    for layer in &net.layers[..args.layer] {
        xs = xs.iter().map(|x| layer.apply(x).out).collect();
    }
    let targets: Vec<Vec<f64>> = if args.layer + 1 == depth {
        batch.targets.clone()
    } else {
        xs.iter().map(|x| net.layers[args.layer].apply(x).out).collect()
    };
    let big_m = BigM::for_batch(spec.inputs, &xs);
    let enc = if spec.couples_neurons() {
        build_weight_milp_joint(&spec, &xs, &targets, big_m, None)?
    } else {
        let column: Vec<f64> = targets.iter().map(|t| t[args.neuron]).collect();
        build_weight_milp(&spec, args.neuron, &xs, &column, big_m, None)?
    };
    let f = File::create(&args.out).map_err(io_err(&args.out))?;
    enc.model
        .export_lp_format(BufWriter::new(f))
        .map_err(io_err(&args.out))?;
    let stdout_err = |e| CliError::Io(PathBuf::from("<stdout>"), e);
    writeln!(
        out,
        "wrote {} ({} variables, {} binaries, {} constraints)",
        args.out.display(),
        enc.model.num_vars(),
        enc.model.binaries().count(),
        enc.model.num_constraints()
    )
    .map_err(stdout_err)?;
    if args.solve {
        let milp = enc.compile()?.into_milp();
        let warm = enc.assignment_for_layer(&net.layers[args.layer]);
        let sol = solve_milp(&milp, &crate::simplex::SolverConfig::default(), Some(&warm))?;
        writeln!(out, "objective {} ({:?})", sol.objective, sol.status).map_err(stdout_err)?;
    }
    Ok(())
}

pub fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Train(a) => cmd_train(a, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::ExportLp(a) => cmd_export_lp(a, out),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code: 0 on success, 1 on runtime errors, 2 on usage errors.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .try_init();
    let stdout = io::stdout();
    match dispatch(&cli, &mut stdout.lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
