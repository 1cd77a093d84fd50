//! `sqstat`: command-line front end for the squeezed-ensemble engine.

mod commands;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sqstat_core::Error;

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  2  usage, configuration or parse error
  3  model validation error
  4  numerical error (domain, cutoff, instability, unavailable quantity)
  5  I/O error

On failure a JSON object {\"error\", \"message\", \"exit_code\"} is written to stderr.
Set SQSTAT_LOG (error, warn, info, debug, trace) to control log output; default warn.";

#[derive(Parser, Debug)]
#[command(name = "sqstat", version, about = "Generalized-ensemble statistical mechanics with squeezed statistics")]
#[command(after_help = EXIT_CODES)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Φ, entropies and observed conjugates at one environment point.
    Compute(ComputeArgs),
    /// Stability matrix and second moments of the fluctuating variables.
    Fluct(FluctArgs),
    /// Integrate the squeezed Boltzmann equation on a 2-D velocity lattice.
    Kinetics(KineticsArgs),
    /// Infer the squeeze from equilibrium ratios, or evaluate a
    /// superstatistical Boltzmann factor.
    Infer(InferArgs),
    /// Thermodynamic states along one environment variable.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Identity,
    Tsallis,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum XiArg {
    One,
    Soft,
}

#[derive(Args, Debug)]
pub struct OutputArgs {
    /// Write the result here instead of stdout.
    #[arg(long, value_name = "PATH")]
    pub out: Option<std::path::PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct SqueezeArgs {
    /// Squeeze family; overrides the model file's.
    #[arg(long, value_enum)]
    pub squeeze: Option<FamilyArg>,
    /// Tsallis index.
    #[arg(long)]
    pub q: Option<f64>,
}

#[derive(Args, Debug)]
#[group(id = "source", required = true, multiple = false, args = ["model", "model_file"])]
pub struct ModelArgs {
    /// Built-in model: two_level, spin_half_paramagnet, einstein_solid, lattice_gas.
    #[arg(long)]
    pub model: Option<String>,
    /// Model JSON file.
    #[arg(long, value_name = "PATH")]
    pub model_file: Option<std::path::PathBuf>,
    /// Model parameter, repeatable.
    #[arg(long = "param", value_name = "K=V")]
    pub params: Vec<String>,
    /// Fixed intensive variable, repeatable.
    #[arg(long = "y", value_name = "K=V")]
    pub y: Vec<String>,
    /// Fixed extensive variable, repeatable.
    #[arg(long = "X", value_name = "K=V")]
    pub x: Vec<String>,
    #[command(flatten)]
    pub squeeze: SqueezeArgs,
}

#[derive(Args, Debug)]
pub struct ComputeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Also write the model, environment and squeeze as a model file.
    #[arg(long, value_name = "PATH")]
    pub emit_model: Option<std::path::PathBuf>,
}

#[derive(Args, Debug)]
pub struct FluctArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Fluctuating intensive variables (default: every fixed intensive).
    #[arg(long = "var", value_name = "NAME")]
    pub vars: Vec<String>,
}

#[derive(Args, Debug)]
pub struct KineticsArgs {
    #[arg(long, default_value_t = 2)]
    pub lattice_radius: u32,
    /// Step size (default: the stability bound of the initial state).
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    #[arg(long, value_enum, default_value = "one")]
    pub xi: XiArg,
    /// Trace row interval in steps (0 keeps only the end points).
    #[arg(long, default_value_t = 100)]
    pub trace_every: usize,
    /// Seed of the random initial populations.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Stop once every |dF/dt| is below this value.
    #[arg(long)]
    pub stop_below: Option<f64>,
    #[command(flatten)]
    pub squeeze: SqueezeArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
#[group(id = "input", required = true, multiple = false, args = ["data", "density"])]
pub struct InferArgs {
    /// CSV of equilibrium ratios with header `ln_g,ratio`.
    #[arg(long, value_name = "CSV")]
    pub data: Option<std::path::PathBuf>,
    /// RMS residual above which the data are reported as not a power law.
    #[arg(long, default_value_t = sqstat_core::inference::DEFAULT_POWER_LAW_THRESHOLD)]
    pub threshold: f64,
    /// CSV of a β density with header `beta,f`.
    #[arg(long, value_name = "CSV")]
    pub density: Option<std::path::PathBuf>,
    /// Energy at which to evaluate the superstatistical factor, repeatable.
    #[arg(long = "energy", value_name = "E", requires = "density")]
    pub energies: Vec<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Environment variable to sweep.
    #[arg(long)]
    pub axis: String,
    #[arg(long)]
    pub from: f64,
    #[arg(long)]
    pub to: f64,
    /// Number of points, at least 2.
    #[arg(long)]
    pub steps: usize,
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: &'a str,
    message: String,
    exit_code: u8,
}

fn exit_code(e: &Error) -> u8 {
    match e.kind() {
        "invalid_argument" | "parse" => 2,
        "invalid_model" => 3,
        "io" => 5,
        _ => 4,
    }
}

fn fail(kind: &str, message: String, code: u8) -> ExitCode {
    let report = ErrorReport { error: kind, message, exit_code: code };
    eprintln!("{}", serde_json::to_string(&report).expect("error report serializes"));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SQSTAT_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.render().to_string().trim_end().to_string(), 2),
    };
    let result = match &cli.command {
        Command::Compute(a) => commands::compute(a),
        Command::Fluct(a) => commands::fluct(a),
        Command::Kinetics(a) => commands::kinetics(a),
        Command::Infer(a) => commands::infer(a),
        Command::Sweep(a) => commands::sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), e.to_string(), exit_code(&e)),
    }
}
