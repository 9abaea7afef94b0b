//! `avm run ...`: load data, run one learner, write the trace and an
//! optional model snapshot.
//!
//! Exit codes: 0 success, 1 data or I/O error, 2 usage error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::coverage::Geometry;
use crate::data::{Dataset, MinMaxTable, Task};
use crate::error::AvmError;
use crate::harness::{run_batch, run_stream, RunOptions, TrainedModel};
use crate::kernel::KernelSpec;
use crate::learner::{Algorithm, LearnerConfig, OutputMode, YMax};
use crate::loss::{LossKind, LossSpec};
use crate::model::SnapshotHeader;

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "avm",
    version,
    about = "Approximation vector machine experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train one learner and emit a JSON-lines metrics trace.
    Run(RunArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Online,
    Batch,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long, value_parser = parse_from_str::<Task>)]
    task: Task,
    #[arg(long, value_enum)]
    mode: Mode,
    #[arg(long, value_parser = parse_from_str::<LossKind>)]
    loss: LossKind,
    #[arg(long)]
    gamma: f64,
    #[arg(long)]
    lambda: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 0.0)]
    beta: f64,
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    #[arg(long, value_parser = parse_from_str::<Geometry>)]
    coverage: Geometry,
    #[arg(long, default_value = "final", value_parser = parse_from_str::<OutputMode>)]
    output: OutputMode,
    /// Batch iterations; defaults to 5 × training size.
    #[arg(long)]
    iters: Option<u64>,
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Min-max normalize explicit feature values (fit on the training set).
    #[arg(long)]
    normalize: bool,
    /// Overrides the inferred feature dimensionality.
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    metrics_out: Option<PathBuf>,
    #[arg(long)]
    model_out: Option<PathBuf>,
    #[arg(long)]
    checkpoint_every: Option<u64>,
    /// `sgd` runs the exact kernel SGD baseline with no approximation.
    #[arg(long, default_value = "avm", value_parser = parse_from_str::<Algorithm>)]
    algorithm: Algorithm,
    /// Permute the training set with the run seed before learning.
    #[arg(long)]
    shuffle: bool,
    /// Label bound for the ℓ₂ ball projection; tracked from the data if unset.
    #[arg(long)]
    y_max: Option<f64>,
}

fn parse_from_str<T>(s: &str) -> Result<T, String>
where
    T: std::str::FromStr<Err = AvmError>,
{
    s.parse::<T>().map_err(|e| match e {
        AvmError::InvalidParameter(msg) => msg,
        other => other.to_string(),
    })
}

enum Failure {
    Usage(String),
    Data(String),
}

impl From<AvmError> for Failure {
    fn from(e: AvmError) -> Self {
        match e {
            AvmError::InvalidParameter(msg) => Failure::Usage(msg),
            other => Failure::Data(other.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

/// Parses `argv` (program name first) and runs the command.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Run(args) => run(args),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("run `avm run --help` for usage");
            EXIT_USAGE
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            EXIT_DATA
        }
    }
}

fn loss_spec(args: &RunArgs) -> Result<LossSpec, Failure> {
    let spec = match args.loss {
        LossKind::Hinge => LossSpec::hinge(),
        LossKind::Logistic => LossSpec::logistic(),
        LossKind::SmoothHinge => LossSpec::smooth_hinge(args.tau)?,
        LossKind::L1 => LossSpec::l1(),
        LossKind::L2 => LossSpec::l2(),
        LossKind::EpsInsensitive => LossSpec::eps_insensitive(args.epsilon)?,
    };
    match args.task {
        Task::Regression if spec.kind.is_classification() => Err(Failure::Usage(format!(
            "loss '{}' needs class labels and cannot be used with --task regression",
            spec.kind
        ))),
        Task::Multiclass if !matches!(spec.kind, LossKind::Hinge | LossKind::Logistic) => {
            Err(Failure::Usage(format!(
                "multiclass learning supports hinge and logit losses, not '{}'",
                spec.kind
            )))
        }
        _ => Ok(spec),
    }
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let loss = loss_spec(&args)?;
    if matches!(args.mode, Mode::Batch) && args.test.is_none() {
        return Err(Failure::Usage("--mode batch requires --test".into()));
    }
    if args.task == Task::Multiclass && args.model_out.is_some() {
        return Err(Failure::Usage(
            "--model-out is only supported for binary and regression tasks".into(),
        ));
    }
    if args.dim == Some(0) {
        return Err(Failure::Usage("--dim must be at least 1".into()));
    }

    let mut train = Dataset::load(&args.train, args.task)?;
    let mut test = match &args.test {
        Some(path) => Some(train.load_companion(path)?),
        None => None,
    };
    if args.normalize {
        let table = MinMaxTable::fit(&train);
        train = table.apply(&train);
        test = test.map(|t| table.apply(&t));
    }
    if args.shuffle {
        train = train.shuffle(args.seed);
    }

    let inferred = train.dim.max(test.as_ref().map_or(0, |t| t.dim)).max(1);
    let mut config = LearnerConfig::new(KernelSpec::gaussian(args.gamma)?, args.lambda, args.delta);
    config.algorithm = args.algorithm;
    config.loss = loss;
    config.geometry = args.coverage;
    config.dim = args.dim.unwrap_or(inferred);
    config.beta = args.beta;
    config.rho = args.rho;
    config.output = args.output;
    config.seed = args.seed;
    config.y_max = args.y_max.map_or(YMax::Tracked, YMax::Fixed);
    config.validate()?;

    let opts = RunOptions {
        checkpoint_every: args.checkpoint_every,
    };
    if opts.checkpoint_every == Some(0) {
        return Err(Failure::Usage(
            "--checkpoint-every must be at least 1".into(),
        ));
    }
    let report = match (args.mode, &test) {
        (Mode::Online, _) => run_stream(&config, &train, opts)?,
        (Mode::Batch, Some(test)) => {
            let iters = args.iters.unwrap_or(5 * train.len() as u64);
            run_batch(&config, &train, test, iters, opts)?
        }
        (Mode::Batch, None) => unreachable!("checked above"),
    };

    match &args.metrics_out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            report.trace.write_jsonl(&mut w)?;
            w.flush()?;
            let s = &report.trace.summary;
            let mut line = format!(
                "t={} metric={:.6} model_size={} cells={} elapsed_s={:.3}",
                s.t, s.metric, s.model_size, s.cells, s.elapsed_s
            );
            if let Some(m) = s.test_metric {
                line.push_str(&format!(" test_metric={m:.6}"));
            }
            println!("{line}");
        }
        None => {
            let stdout = io::stdout();
            report.trace.write_jsonl(stdout.lock())?;
        }
    }

    if let Some(path) = &args.model_out {
        let TrainedModel::Scalar(model) = &report.model else {
            unreachable!("multiclass snapshots rejected above")
        };
        let header = SnapshotHeader {
            geometry: config.geometry,
            delta: config.delta,
            dim: config.dim,
        };
        let mut w = BufWriter::new(File::create(path)?);
        model.write_snapshot(&mut w, &header)?;
        w.flush()?;
    }
    Ok(())
}
