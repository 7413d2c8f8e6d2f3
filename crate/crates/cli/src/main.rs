mod commands;
mod fitfile;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Exit codes.
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_NONCONVERGENCE: u8 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(m: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: m.into() }
    }
    pub fn data(m: impl Into<String>) -> Self {
        Self { code: EXIT_DATA, message: m.into() }
    }
    pub fn nonconvergence(m: impl Into<String>) -> Self {
        Self { code: EXIT_NONCONVERGENCE, message: m.into() }
    }
}

impl From<ebsignal::Error> for CliError {
    fn from(e: ebsignal::Error) -> Self {
        use ebsignal::Error as E;
        let code = match e {
            E::InvalidArgument(_) => EXIT_USAGE,
            E::NoConvergedFit { .. } | E::SingularHessian => EXIT_NONCONVERGENCE,
            _ => EXIT_DATA,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        Self::data(format!("{e:#}"))
    }
}

#[derive(Parser)]
#[command(
    name = "ebsignal",
    version,
    about = "Empirical Bayes signal detection for adverse-event by drug report tables"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one model and write a fit JSON.
    Fit(FitArgs),
    /// Grid-tune general-gamma (alpha) or efron (p, c0) and write the selected fit.
    Tune(TuneArgs),
    /// Apply the detection rule to a fit; writes a 0/1 matrix CSV and prints the count.
    Detect(DetectArgs),
    /// Print fit diagnostics and write per-cell posterior summaries.
    Summarize(SummarizeArgs),
    /// Emit heatmap or eyeplot data as JSON, optionally with an SVG.
    PlotData(PlotArgs),
    /// Run a simulation study from a JSON config.
    Simulate(SimulateArgs),
    /// Generate multinomial tables from a reference table.
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    #[value(name = "GPS")]
    Gps,
    #[value(name = "K-gamma")]
    KGamma,
    #[value(name = "general-gamma")]
    GeneralGamma,
    #[value(name = "KM")]
    Km,
    #[value(name = "efron")]
    Efron,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TuneModelArg {
    #[value(name = "general-gamma")]
    GeneralGamma,
    #[value(name = "efron")]
    Efron,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum NullArg {
    Subtable,
    Marginal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ScaleArg {
    Log,
    Linear,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CriterionArg {
    #[value(name = "AIC")]
    Aic,
    #[value(name = "BIC")]
    Bic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    Heatmap,
    Eyeplot,
}

#[derive(Args, Debug)]
pub struct TableArgs {
    /// Table CSV: header row of drug names, first column of AE names.
    pub table: PathBuf,
    /// Null expected-count estimator.
    #[arg(long, value_enum, default_value = "subtable")]
    pub null_method: NullArg,
    /// Fall back to the marginal estimator when a reference count is zero.
    #[arg(long)]
    pub fallback_marginal: bool,
    /// AE row to use as the reference category (default: last row).
    #[arg(long)]
    pub reference_ae: Option<String>,
    /// Drug column to use as the reference category (default: last column).
    #[arg(long)]
    pub reference_drug: Option<String>,
}

#[derive(Args, Debug)]
pub struct SupportArgs {
    /// Support grid size for KM (default 100) and efron (default 120).
    #[arg(long)]
    pub support_size: Option<usize>,
    #[arg(long, value_enum)]
    pub support_scale: Option<ScaleArg>,
}

#[derive(Args, Debug)]
pub struct EcmArgs {
    /// Relative convergence tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Initial number of components for general-gamma.
    #[arg(long)]
    pub n_components: Option<usize>,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[command(flatten)]
    pub table: TableArgs,
    #[arg(long, value_enum)]
    pub model: ModelArg,
    /// Dirichlet hyperparameter (general-gamma).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Number of components (K-gamma).
    #[arg(long)]
    pub k: Option<usize>,
    /// Spline degrees of freedom (efron).
    #[arg(long)]
    pub p: Option<usize>,
    /// Penalty weight (efron).
    #[arg(long)]
    pub c0: Option<f64>,
    #[command(flatten)]
    pub support: SupportArgs,
    #[command(flatten)]
    pub ecm: EcmArgs,
    #[arg(long, env = "EBSIGNAL_SEED", default_value_t = 1)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Args, Debug)]
pub struct TuneArgs {
    #[command(flatten)]
    pub table: TableArgs,
    #[arg(long, value_enum, default_value = "general-gamma")]
    pub model: TuneModelArg,
    /// Alpha grid (default 0,0.1,0.3,0.5,0.7,0.9).
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    /// Efron p grid (default 40,60,80,100,120).
    #[arg(long, value_delimiter = ',')]
    pub p_grid: Option<Vec<usize>>,
    /// Efron c0 grid (default 1e-5,1e-4,1e-3,1e-2,1e-1).
    #[arg(long, value_delimiter = ',')]
    pub c0_grid: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value = "AIC")]
    pub criterion: CriterionArg,
    #[command(flatten)]
    pub support: SupportArgs,
    #[command(flatten)]
    pub ecm: EcmArgs,
    #[arg(long, env = "EBSIGNAL_SEED", default_value_t = 1)]
    pub seed: u64,
    /// Selected fit JSON.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Also write the tuning report as CSV.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DetectArgs {
    pub fit: PathBuf,
    #[arg(long, default_value_t = 1.001)]
    pub cutoff: f64,
    #[arg(long, default_value_t = 0.95)]
    pub prob: f64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Args, Debug)]
pub struct SummarizeArgs {
    pub fit: PathBuf,
    /// Credible level of the equi-tailed interval.
    #[arg(long, default_value_t = 0.9)]
    pub level: f64,
    #[arg(long, default_value_t = 1.001)]
    pub cutoff: f64,
    /// Per-cell summary CSV.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PlotArgs {
    pub fit: PathBuf,
    #[arg(long = "type", value_enum)]
    pub kind: PlotKind,
    #[arg(long = "num-top-aes", default_value_t = 10)]
    pub num_top_aes: usize,
    /// Eyeplot: drop cells with fewer reports.
    #[arg(long = "n-threshold", default_value_t = 1)]
    pub n_threshold: u64,
    #[arg(long)]
    pub log_scale: bool,
    #[arg(long, default_value_t = 0.9)]
    pub level: f64,
    #[arg(long, default_value_t = 1.001)]
    pub cutoff: f64,
    #[arg(long, default_value_t = 0.95)]
    pub prob: f64,
    /// Show these AEs instead of the top-ranked ones (repeatable).
    #[arg(long = "ae")]
    pub ae_names: Vec<String>,
    /// Restrict to these drugs (repeatable).
    #[arg(long = "drug")]
    pub drug_names: Vec<String>,
    #[arg(long)]
    pub text_shift: Option<f64>,
    #[arg(long)]
    pub text_size: Option<f64>,
    #[arg(long)]
    pub x_lim_scalar: Option<f64>,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Also write a minimal SVG rendering.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    pub config: PathBuf,
    /// Output directory; receives metrics.csv and run.json.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the config replicate count.
    #[arg(long)]
    pub n_sim: Option<usize>,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub table: TableArgs,
    /// 1-based signal cell "row,col" (repeatable).
    #[arg(long = "signal-cell")]
    pub signal_cells: Vec<String>,
    /// Signal strength at the signal cells.
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Structural zeros where E is at or below this quantile of E.
    #[arg(long, conflicts_with = "zero_prob")]
    pub zi_quantile: Option<f64>,
    /// Independent structural zeros with this probability.
    #[arg(long)]
    pub zero_prob: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub n_tables: usize,
    #[arg(long, env = "EBSIGNAL_SEED", default_value_t = 1)]
    pub seed: u64,
    /// Output directory for table_0001.csv, ...
    #[arg(short, long)]
    pub output: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(a) => commands::fit(a),
        Command::Tune(a) => commands::tune(a),
        Command::Detect(a) => commands::detect(a),
        Command::Summarize(a) => commands::summarize(a),
        Command::PlotData(a) => commands::plot_data(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Generate(a) => commands::generate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
