mod commands;
mod source;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use hsrecon_core::Error as CoreError;

#[derive(Parser, Debug)]
#[command(name = "hsrecon", version, about = "Reconstruct measures from their half-space masses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(tag = "subcommand", rename_all = "snake_case")]
enum Command {
    /// Tabulate half-space masses mu(S) of a measure.
    Forward(ForwardArgs),
    /// Distance potential on a grid, from half-space masses only.
    Potential(RunArgs),
    /// Full pipeline: half-space masses -> potential -> density.
    Reconstruct(RunArgs),
    /// Radon transform of a gridded density and its odd-dimensional inversion.
    Radon(RadonArgs),
    /// Run the identity checks; exit status 1 if any residual is out of tolerance.
    Verify(VerifyArgs),
    /// Print alpha_n, sphere areas and c_m.
    Constants(ConstantsArgs),
}

/// Where the measure comes from. Exactly one of these is used.
#[derive(Args, Debug, Clone, Serialize)]
pub struct InputArgs {
    /// Discrete measure, one `weight,x1,...,xn` record per line.
    #[arg(long, conflicts_with_all = ["grid", "fixture"])]
    pub measure: Option<PathBuf>,
    /// Gridded density: path of the JSON header (data in the sibling .bin file).
    #[arg(long, conflicts_with = "fixture")]
    pub grid: Option<PathBuf>,
    /// Built-in measure: gaussian, delta, two-point, gaussian-pair.
    #[arg(long)]
    pub fixture: Option<String>,
    /// Dimension of a fixture (files carry their own).
    #[arg(long)]
    pub dim: Option<usize>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct GridArgs {
    /// Grid bounds `lo,hi` on every axis.
    #[arg(long, default_value = "-4,4", allow_hyphen_values = true)]
    pub bounds: String,
    /// Grid spacing.
    #[arg(long, default_value_t = 0.25)]
    pub h: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ForwardArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Half-spaces, one `omega1,...,omegan,p` record per line.
    #[arg(long, conflicts_with = "random")]
    pub halfspaces: Option<PathBuf>,
    /// Number of random half-spaces to tabulate instead.
    #[arg(long)]
    pub random: Option<usize>,
    /// Offsets of random half-spaces are drawn from [-radius, radius].
    #[arg(long, default_value_t = 4.0)]
    pub radius: f64,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output CSV file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct RunArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Laplacian power; the grid dimension is 2m - 1.
    #[arg(long)]
    pub m: Option<u32>,
    /// Treat an even-dimensional measure as lying in one dimension higher.
    #[arg(long)]
    pub embed: bool,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Directions per Monte Carlo estimate.
    #[arg(long, default_value_t = 20_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Gaussian smoothing width in cells (default 1 when m >= 2, else 0).
    #[arg(long)]
    pub mollify: Option<f64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    #[serde(skip)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct RadonArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Number of projection directions.
    #[arg(long, default_value_t = 10_000)]
    pub directions: usize,
    /// Use the deterministic golden-angle spiral instead of random directions (3D only).
    #[arg(long)]
    pub spiral: bool,
    /// Offset spacing of the sinogram (default: h).
    #[arg(long)]
    pub dp: Option<f64>,
    /// Spacing of the inversion grid (default: 2h).
    #[arg(long)]
    pub inv_h: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    #[serde(skip)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct VerifyArgs {
    /// Directions for the Crofton normalization checks.
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Also write the table to this CSV file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ConstantsArgs {
    /// Largest dimension listed.
    #[arg(long, default_value_t = 7)]
    pub dim: usize,
}

/// Failure classes mapped onto exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Exit 1.
    Verification(String),
    /// Exit 2.
    Usage(String),
    /// Exit 3.
    Io(String),
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Io(_) | CoreError::Json(_) | CoreError::Parse { .. } => CliError::Io(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn set_threads(threads: Option<usize>) {
    if let Some(n) = threads {
        // Fails only if a pool exists already, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = cli.command.clone();
    let result = match cli.command {
        Command::Forward(a) => commands::forward(&a),
        Command::Potential(a) => {
            set_threads(a.threads);
            commands::potential(&a, &config)
        }
        Command::Reconstruct(a) => {
            set_threads(a.threads);
            commands::reconstruct_cmd(&a, &config)
        }
        Command::Radon(a) => {
            set_threads(a.threads);
            commands::radon(&a, &config)
        }
        Command::Verify(a) => commands::verify(&a),
        Command::Constants(a) => commands::constants(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Verification(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Io(msg)) => {
            eprintln!("i/o error: {msg}");
            ExitCode::from(3)
        }
    }
}
