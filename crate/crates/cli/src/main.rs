//! Command-line front end for the forecasting toolkit.
//!
//! Five subcommands cover the full workflow on a quarterly CSV: summary
//! statistics, a unit-root test, each model on its own, and a side-by-side
//! comparison. Options merge as flags > config file > defaults, and every
//! run that writes artifacts also writes a manifest that pins the seed,
//! the effective config, and the input checksum.

use clap::{Args, Parser, Subcommand, ValueEnum};
use quartercast::lstm::Activation;
use quartercast::pipeline::{
    self, adf_to_text, run_adf, run_compare, run_describe, run_lstm, run_sarima, Manifest, OutDir,
    OutputFormat, PipelineError, RunConfig, CV_FOLDS,
};
use quartercast::series::{load_csv, TimeSeries};
use quartercast::unitroot::AdfSpec;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "quartercast",
    version,
    about = "Quarterly series forecasting: SARIMA and a two-layer LSTM, side by side"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Descriptive statistics for the series
    Describe(CommonArgs),
    /// Augmented Dickey-Fuller unit-root test
    Adf(AdfArgs),
    /// SARIMA order search, fit, and holdout forecast
    Sarima(ModelArgs),
    /// LSTM grid search, final fit, and holdout forecast
    Lstm(ModelArgs),
    /// Both models on the same split, with a metrics table
    Compare(ModelArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// CSV file with a 'period,value' header and YYYY-Qn period labels
    #[arg(long)]
    data: Option<PathBuf>,
    /// JSON config file; any flag given here overrides it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for artifacts (must be empty or absent; created if needed)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base random seed
    #[arg(long)]
    seed: Option<u64>,
    /// Artifact format for single-table commands
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Args)]
struct AdfArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Deterministic regressors to include
    #[arg(long, value_enum, default_value_t = SpecArg::Constant)]
    spec: SpecArg,
    /// Highest augmentation lag to consider (default: Schwert rule)
    #[arg(long)]
    max_lag: Option<usize>,
}

#[derive(Args)]
struct ModelArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Observations held out for evaluation
    #[arg(long)]
    holdout: Option<usize>,
    /// Input window length for the LSTM
    #[arg(long)]
    lookback: Option<usize>,
    /// Standardize LSTM inputs using training-set statistics
    #[arg(long)]
    scale: bool,
    /// Parallel worker threads for searches
    #[arg(long)]
    workers: Option<usize>,
    /// SARIMA candidate values, comma separated
    #[arg(long, value_delimiter = ',')]
    sarima_p: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    sarima_d: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    sarima_q: Option<Vec<usize>>,
    /// Seasonal counterparts of p/d/q
    #[arg(long, value_delimiter = ',')]
    sarima_sp: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    sarima_sd: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    sarima_sq: Option<Vec<usize>>,
    /// Season length
    #[arg(long)]
    season: Option<usize>,
    /// LSTM grid axes, comma separated
    #[arg(long, value_delimiter = ',')]
    lstm_epochs: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    lstm_dropouts: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    lstm_units: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    lstm_batches: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    lstm_l2: Option<Vec<f64>>,
    /// Learning rate shared by every trial
    #[arg(long)]
    lstm_learning_rate: Option<f64>,
    /// Cell activation
    #[arg(long, value_enum)]
    lstm_activation: Option<ActivationArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

impl From<FormatArg> for OutputFormat {
    fn from(value: FormatArg) -> Self {
        match value {
            FormatArg::Json => OutputFormat::Json,
            FormatArg::Csv => OutputFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SpecArg {
    NoConstant,
    Constant,
    ConstantTrend,
}

impl From<SpecArg> for AdfSpec {
    fn from(value: SpecArg) -> Self {
        match value {
            SpecArg::NoConstant => AdfSpec::NoConstant,
            SpecArg::Constant => AdfSpec::Constant,
            SpecArg::ConstantTrend => AdfSpec::ConstantTrend,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ActivationArg {
    Relu,
    Tanh,
}

impl From<ActivationArg> for Activation {
    fn from(value: ActivationArg) -> Self {
        match value {
            ActivationArg::Relu => Activation::Relu,
            ActivationArg::Tanh => Activation::Tanh,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Describe(args) => cmd_describe(args),
        Command::Adf(args) => cmd_adf(args),
        Command::Sarima(args) => cmd_sarima(args),
        Command::Lstm(args) => cmd_lstm(args),
        Command::Compare(args) => cmd_compare(args),
    }
    .map_err(|e| e.to_string())
}

/// Build the effective config: defaults, then the config file, then flags.
fn effective_config(common: &CommonArgs, model: Option<&ModelArgs>) -> Result<RunConfig, PipelineError> {
    let mut config = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
                path: path.clone(),
                source,
            })?;
            serde_json::from_str(&text)
                .map_err(|e| PipelineError::BadConfig(format!("{}: {e}", path.display())))?
        }
        None => RunConfig::new(""),
    };
    if let Some(data) = &common.data {
        config.data = data.clone();
    }
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(format) = common.format {
        config.format = format.into();
    }
    if let Some(args) = model {
        if let Some(h) = args.holdout {
            config.holdout = h;
        }
        if let Some(l) = args.lookback {
            config.lookback = l;
        }
        if args.scale {
            config.scale = true;
        }
        if let Some(w) = args.workers {
            config.workers = w;
        }
        let s = &mut config.sarima;
        for (axis, flag) in [
            (&mut s.p, &args.sarima_p),
            (&mut s.d, &args.sarima_d),
            (&mut s.q, &args.sarima_q),
            (&mut s.seasonal_p, &args.sarima_sp),
            (&mut s.seasonal_d, &args.sarima_sd),
            (&mut s.seasonal_q, &args.sarima_sq),
        ] {
            if let Some(values) = flag {
                *axis = values.clone();
            }
        }
        if let Some(season) = args.season {
            config.sarima.s = season;
        }
        let l = &mut config.lstm;
        if let Some(v) = &args.lstm_epochs {
            l.epochs = v.clone();
        }
        if let Some(v) = &args.lstm_dropouts {
            l.dropouts = v.clone();
        }
        if let Some(v) = &args.lstm_units {
            l.units = v.clone();
        }
        if let Some(v) = &args.lstm_batches {
            l.batch_sizes = v.clone();
        }
        if let Some(v) = &args.lstm_l2 {
            l.l2_lambdas = v.clone();
        }
        if let Some(lr) = args.lstm_learning_rate {
            l.learning_rate = lr;
        }
        if let Some(a) = args.lstm_activation {
            l.activation = a.into();
        }
    }
    config.out = common.out.clone().or(config.out);
    config.validate()?;
    Ok(config)
}

fn load_series(config: &RunConfig) -> Result<TimeSeries, PipelineError> {
    Ok(load_csv(&config.data)?)
}

fn init_workers(config: &RunConfig) {
    // Errors only if a global pool already exists, which is harmless.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build_global();
}

/// Write artifacts plus the manifest, keeping the directory only if every
/// file lands.
fn with_out_dir(
    config: &RunConfig,
    started_unix_ms: u64,
    write: impl FnOnce(&mut OutDir) -> Result<(), PipelineError>,
) -> Result<(), PipelineError> {
    let Some(out) = &config.out else {
        return Ok(());
    };
    let mut dir = OutDir::prepare(out)?;
    write(&mut dir)?;
    let manifest = Manifest::new(config, pipeline::sha256_file(&config.data)?, started_unix_ms);
    pipeline::write_manifest(&mut dir, &manifest)?;
    let kept = dir.commit();
    println!("artifacts written to {}", kept.display());
    Ok(())
}

fn cmd_describe(args: CommonArgs) -> Result<(), PipelineError> {
    let started = pipeline::unix_ms();
    let config = effective_config(&args, None)?;
    let series = load_series(&config)?;
    let report = run_describe(&series)?;
    print!("{}", report.to_text());
    with_out_dir(&config, started, |dir| {
        pipeline::write_describe_artifacts(dir, &report, config.format)
    })
}

fn cmd_adf(args: AdfArgs) -> Result<(), PipelineError> {
    let started = pipeline::unix_ms();
    let config = effective_config(&args.common, None)?;
    let series = load_series(&config)?;
    let result = run_adf(&series, args.spec.into(), args.max_lag)?;
    print!("{}", adf_to_text(&result));
    with_out_dir(&config, started, |dir| {
        pipeline::write_adf_artifacts(dir, &result, config.format)
    })
}

fn forecast_block(periods: &[String], actual: &[f64], forecast: &[f64]) -> String {
    let mut out = String::from("holdout forecast\n  period   actual           forecast\n");
    for ((p, a), f) in periods.iter().zip(actual).zip(forecast) {
        let _ = writeln!(out, "  {p}  {a:<15.4}  {f:<15.4}");
    }
    out
}

fn metrics_line(m: &quartercast::metrics::MetricsReport) -> String {
    format!("metrics: MAPE {:.2}%  MAE {:.4}  MSE {:.4}\n", m.mape, m.mae, m.mse)
}

const CV_NOTE: &str = "note: cross-validation uses expanding-window (rolling-origin) folds; \
validation blocks always follow their training data in time.\n";

fn cmd_sarima(args: ModelArgs) -> Result<(), PipelineError> {
    let started = pipeline::unix_ms();
    let config = effective_config(&args.common, Some(&args))?;
    init_workers(&config);
    let series = load_series(&config)?;
    let run = run_sarima(&series, &config.sarima, config.holdout)?;
    println!(
        "SARIMA order search over {} candidates\nbest order      {}\naic             {:.4}\nlog-likelihood  {:.4}\nconverged       {}",
        run.search.table.len(),
        run.best.order,
        run.best.aic,
        run.best.loglik,
        run.best.converged
    );
    print!(
        "{}",
        forecast_block(&run.holdout_periods, &run.holdout_actual, &run.forecasts)
    );
    print!("{}", metrics_line(&run.metrics));
    with_out_dir(&config, started, |dir| {
        pipeline::write_sarima_artifacts(dir, &run)
    })
}

fn cmd_lstm(args: ModelArgs) -> Result<(), PipelineError> {
    let started = pipeline::unix_ms();
    let config = effective_config(&args.common, Some(&args))?;
    init_workers(&config);
    let series = load_series(&config)?;
    print!("{CV_NOTE}");
    let run = run_lstm(
        &series,
        &config.lstm_space(),
        config.holdout,
        CV_FOLDS,
        config.scale,
        config.seed,
    )?;
    let best = &run.search.best().config;
    println!(
        "LSTM grid search over {} configurations ({CV_FOLDS}-fold CV)\nbest config     epochs={} dropout={} units={} batch={} l2={}\ncv mean mse     {:.6}\nfinal seed      {}",
        run.search.trials.len(),
        best.epochs,
        best.recurrent_dropout,
        best.units,
        best.batch_size,
        best.l2_lambda,
        run.search.best().outcome.as_ref().map(|s| s.mean_mse).unwrap_or(f64::NAN),
        run.model.config.seed
    );
    print!(
        "{}",
        forecast_block(&run.holdout_periods, &run.holdout_actual, &run.forecasts)
    );
    print!("{}", metrics_line(&run.metrics));
    with_out_dir(&config, started, |dir| {
        pipeline::write_lstm_artifacts(dir, &run, CV_FOLDS)
    })
}

fn cmd_compare(args: ModelArgs) -> Result<(), PipelineError> {
    let started = pipeline::unix_ms();
    let config = effective_config(&args.common, Some(&args))?;
    init_workers(&config);
    let series = load_series(&config)?;
    print!("{CV_NOTE}");
    let run = run_compare(&series, &config)?;
    println!(
        "SARIMA best order  {}\nLSTM best config   epochs={} dropout={} units={} batch={} l2={}\n",
        run.sarima.best.order,
        run.lstm.model.config.epochs,
        run.lstm.model.config.recurrent_dropout,
        run.lstm.model.config.units,
        run.lstm.model.config.batch_size,
        run.lstm.model.config.l2_lambda
    );
    print!("{}", run.comparison.to_text());
    with_out_dir(&config, started, |dir| {
        pipeline::write_compare_artifacts(dir, &run, CV_FOLDS)
    })
}
