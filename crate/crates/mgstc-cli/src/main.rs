//! Command-line interface for the forecaster: offline training,
//! streaming evaluation with or without online updates, synthetic stream
//! generation, metric recomputation, and the augmentation-gap verifier.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mgstc_core::error::Error;

use config::ResolvedConfig;

#[derive(Parser)]
#[command(
    name = "mgstc",
    about = "Multi-grained spatial-temporal traffic forecasting with online drift adaptation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model offline with early stopping on validation MSE.
    Train(TrainArgs),
    /// Replay the test split as a stream, online or frozen.
    Stream(StreamArgs),
    /// Generate a synthetic stream from a drift plan.
    Synth(SynthArgs),
    /// Verify the augmentation gap bound numerically.
    VerifyAppendix(VerifyArgs),
    /// Recompute metrics from a saved prediction log.
    Eval(EvalArgs),
}

/// Configuration file plus per-field overrides (flags win over the file).
#[derive(Args, Debug, Default)]
struct Overrides {
    /// Flat key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// History length T.
    #[arg(long)]
    history: Option<usize>,
    /// Prediction horizon tau.
    #[arg(long)]
    horizon: Option<usize>,
    /// Embedding dimension D.
    #[arg(long)]
    dim: Option<usize>,
    /// Chunk length C.
    #[arg(long)]
    chunk: Option<usize>,
    /// Stride S.
    #[arg(long)]
    stride: Option<usize>,
    /// Attention heads.
    #[arg(long)]
    heads: Option<usize>,
    /// Aggregator rows G.
    #[arg(long)]
    aggregators: Option<usize>,
    /// Feed-forward activation: gelu, relu, or tanh.
    #[arg(long)]
    activation: Option<String>,
    /// Enable or disable the spatial refinement stage.
    #[arg(long)]
    use_fgsa: Option<bool>,
    /// Learning rate.
    #[arg(long)]
    lr: Option<f64>,
    /// Batch size.
    #[arg(long)]
    batch_size: Option<usize>,
    /// Maximum training epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// Early-stopping patience in epochs.
    #[arg(long)]
    patience: Option<usize>,
    /// Fine-tuning replay coefficient.
    #[arg(long)]
    eta_fine: Option<f64>,
    /// Aggressive-update history coefficient.
    #[arg(long)]
    eta_aggr: Option<f64>,
    /// Drift threshold d.
    #[arg(long)]
    drift_threshold: Option<f64>,
    /// Recent buffer capacity.
    #[arg(long)]
    cap_b: Option<usize>,
    /// Historical repository capacity.
    #[arg(long)]
    cap_h: Option<usize>,
    /// Aggressive-update epochs.
    #[arg(long)]
    aggr_epochs: Option<usize>,
    /// Perturbation variance for history augmentation.
    #[arg(long)]
    xi: Option<f64>,
    /// Replay one sample per fine-tuning step instead of a mini-batch.
    #[arg(long)]
    replay_single: Option<bool>,
    /// Chronological split ratios train:val:test.
    #[arg(long)]
    split: Option<String>,
    /// Exponential smoothing factor applied on load.
    #[arg(long)]
    smooth: Option<f64>,
    /// Report metrics in denormalized units.
    #[arg(long)]
    denorm_metrics: Option<bool>,
    /// RNG seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl Overrides {
    fn resolve(&self) -> Result<ResolvedConfig, Error> {
        let mut resolved = ResolvedConfig::defaults();
        if let Some(path) = &self.config {
            resolved.apply_file(path)?;
        }
        macro_rules! apply {
            ($field:ident) => {
                if let Some(v) = &self.$field {
                    resolved.set(stringify!($field), &v.to_string())?;
                }
            };
        }
        apply!(history);
        apply!(horizon);
        apply!(dim);
        apply!(chunk);
        apply!(stride);
        apply!(heads);
        apply!(aggregators);
        apply!(activation);
        apply!(use_fgsa);
        apply!(lr);
        apply!(batch_size);
        apply!(epochs);
        apply!(patience);
        apply!(eta_fine);
        apply!(eta_aggr);
        apply!(drift_threshold);
        apply!(cap_b);
        apply!(cap_h);
        apply!(aggr_epochs);
        apply!(xi);
        apply!(replay_single);
        apply!(split);
        apply!(smooth);
        apply!(denorm_metrics);
        resolved.set("seed", &self.seed.to_string())?;
        resolved.validate()?;
        Ok(resolved)
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Input CSV (timestamp,<id_1>,...,<id_N>).
    #[arg(long)]
    data: PathBuf,
    /// Checkpoint output path.
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch training log (CSV).
    #[arg(long)]
    log: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct StreamArgs {
    /// Input CSV, split with the same ratios as training.
    #[arg(long)]
    data: PathBuf,
    /// Checkpoint produced by `train`.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Run the full online strategy.
    #[arg(long, conflicts_with = "frozen")]
    online: bool,
    /// Disable all updates (offline baseline).
    #[arg(long)]
    frozen: bool,
    /// Metrics CSV output (stdout when omitted).
    #[arg(long)]
    metrics_out: Option<PathBuf>,
    /// Drift-event log (one JSON object per line).
    #[arg(long)]
    drift_log: Option<PathBuf>,
    /// Prediction log (one JSON object per line).
    #[arg(long)]
    pred_out: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct SynthArgs {
    /// Drift plan file.
    #[arg(long)]
    plan: PathBuf,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// RNG seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct VerifyArgs {
    /// Number of sampled parameter tuples.
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    /// RNG seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EvalArgs {
    /// Prediction log written by `stream --pred-out`.
    #[arg(long)]
    pred: PathBuf,
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Train(args) => {
            let resolved = args.overrides.resolve()?;
            commands::train::run(&resolved, &args.data, &args.out, args.log.as_deref())?;
            Ok(())
        }
        Command::Stream(args) => {
            if !args.online && !args.frozen {
                return Err(Error::usage("stream requires --online or --frozen"));
            }
            let resolved = args.overrides.resolve()?;
            commands::stream::run(
                &resolved,
                &args.data,
                &args.checkpoint,
                args.online,
                args.metrics_out.as_deref(),
                args.drift_log.as_deref(),
                args.pred_out.as_deref(),
            )?;
            Ok(())
        }
        Command::Synth(args) => commands::synth::run(&args.plan, &args.out, args.seed),
        Command::VerifyAppendix(args) => {
            commands::verify::run(args.trials, args.seed)?;
            Ok(())
        }
        Command::Eval(args) => {
            commands::eval::run(&args.pred)?;
            Ok(())
        }
    }
}

/// 0 success, 1 usage/config, 2 data format, 3 numeric fault.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Usage(_) | Error::Dimension { .. } | Error::Domain(_) => 1,
        Error::Parse { .. } | Error::Format(_) | Error::Io(_) => 2,
        Error::Numeric { .. } => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            if matches!(err.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{err}");
                return ExitCode::SUCCESS;
            }
            eprint!("{err}");
            return ExitCode::from(1);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
