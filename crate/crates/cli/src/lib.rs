//! Command-line front end: parameter loading, protocol stages and figure-data
//! emission.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pacs_core::params::{conversion_factor, ParamsConfig};
use pacs_core::SystemParams;

pub mod grid;
pub mod output;
pub mod prepare;
pub mod scan;
pub mod units;
pub mod validate;

/// Exit code for a failed validation or unconverged scan row.
pub const EXIT_VALIDATION: u8 = 1;
/// Exit code for malformed or out-of-range input.
pub const EXIT_BAD_INPUT: u8 = 2;

/// Write pulse of the figure parameters: G_b = 10⁸ s⁻¹, τ_b = 10 ns.
pub const WRITE_COUPLING: f64 = 1e8;
pub const WRITE_DURATION: f64 = 1e-8;
/// Readout pulse of the figure parameters: G_r = 5×10⁸ s⁻¹, τ_r = 40 ns.
pub const READOUT_COUPLING: f64 = 5e8;
pub const READOUT_DURATION: f64 = 4e-8;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    BadInput(String),
    #[error("{0}")]
    Failed(String),
    #[error(transparent)]
    Core(#[from] pacs_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::BadInput(_) => EXIT_BAD_INPUT,
            CliError::Core(pacs_core::Error::InvalidInput(_) | pacs_core::Error::OutOfValidity(_) | pacs_core::Error::Json(_)) => {
                EXIT_BAD_INPUT
            }
            _ => EXIT_VALIDATION,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "pacs", version, about = "Phonon-added coherent states in cavity optomechanics")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Shipped parameter preset.
    #[arg(long, global = true, default_value = "simon17", conflicts_with = "config")]
    pub preset: String,
    /// Parameter file (JSON) instead of a preset.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Fock-space truncation.
    #[arg(long, global = true, default_value_t = 40)]
    pub nmax: usize,
    /// Truncation-convergence tolerance.
    #[arg(long, global = true, default_value_t = 1e-6)]
    pub tol: f64,
    /// Allow inputs outside the documented validity range.
    #[arg(long, global = true)]
    pub force: bool,
}

#[derive(Debug, Clone, Args)]
pub struct DriveArgs {
    /// Pump power, e.g. 50uW.
    #[arg(long = "P0", default_value = "50uW", value_parser = units::power)]
    pub p0: f64,
    /// Probe power, e.g. 0.5uW.
    #[arg(long = "P1", default_value = "0.5uW", value_parser = units::power)]
    pub p1: f64,
    /// Bath temperature, e.g. 1K; defaults to the parameter set.
    #[arg(long = "T", value_parser = units::temperature)]
    pub temperature: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ConversionArgs {
    /// Write conversion factor Z; defaults to the figure write pulse.
    #[arg(long)]
    pub z: Option<f64>,
    /// Readout conversion factor B; defaults to the figure readout pulse.
    #[arg(long)]
    pub b: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct BetaArgs {
    #[arg(long, default_value_t = 0.0)]
    pub beta_min: f64,
    #[arg(long, default_value_t = 4.0)]
    pub beta_max: f64,
    #[arg(long, default_value_t = 0.1)]
    pub beta_step: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Coherent-state preparation: mean field, covariance and probe modulation.
    Prepare(DriveArgs),
    /// Integrate the nonlinear mean-field equations and fit the harmonic tail.
    Meanfield {
        #[command(flatten)]
        drives: DriveArgs,
        /// Mechanical-beat periods used in the harmonic fit.
        #[arg(long, default_value_t = 20)]
        periods: usize,
        /// Mechanical-beat periods written to the trajectory file.
        #[arg(long, default_value_t = 200)]
        record_periods: usize,
    },
    /// Single-PACS statistics: Mandel Q and quadrature squeezing grids.
    PacsScan {
        #[command(flatten)]
        conversion: ConversionArgs,
        #[command(flatten)]
        beta: BetaArgs,
        /// Readout factors for the Q and variance curves.
        #[arg(long, value_delimiter = ',', default_value = "0.01,0.15,0.25,0.5,0.75")]
        b_list: Vec<f64>,
        /// θ samples over [0, π] for the (|β|, θ) grid.
        #[arg(long, default_value_t = 33)]
        theta_points: usize,
        /// B samples over [0.01, 0.99] for the (|β|, B) grid.
        #[arg(long, default_value_t = 50)]
        b_points: usize,
    },
    /// Residual thermal occupation: truncated statistics against the full pipeline.
    ThermalScan {
        #[command(flatten)]
        conversion: ConversionArgs,
        #[command(flatten)]
        beta: BetaArgs,
        /// n̄₀ values of the Q grid.
        #[arg(long, value_delimiter = ',', default_value = "0,0.05,0.1,0.15,0.2,0.25,0.3,0.35,0.4,0.45")]
        n0_list: Vec<f64>,
        /// n̄₀ values of the variance curves.
        #[arg(long, value_delimiter = ',', default_value = "0,0.2,0.45")]
        n0_curves: Vec<f64>,
    },
    /// Invariant suite with one pass/fail line per property.
    Validate {
        #[command(flatten)]
        conversion: ConversionArgs,
        /// Override the readout duration τ_r, e.g. 40ns.
        #[arg(long, value_parser = units::time)]
        tau_r: Option<f64>,
        /// Largest ratio accepted for a "much less than" timing relation.
        #[arg(long, default_value_t = pacs_core::params::MUCH_LESS_RATIO)]
        threshold: f64,
        /// Largest |β| of the truncation-convergence probe.
        #[arg(long, default_value_t = 3.0)]
        beta_max: f64,
    },
}

/// Parameter set resolved from `--preset`/`--config`.
pub struct Resolved {
    pub params: SystemParams,
    pub name: String,
}

impl Resolved {
    pub fn config(&self) -> ParamsConfig {
        ParamsConfig::from_params(&self.params, Some(self.name.clone()))
    }
}

pub fn resolve_params(global: &GlobalArgs) -> Result<Resolved, CliError> {
    match &global.config {
        Some(path) => {
            let params = SystemParams::load(path).map_err(|e| CliError::BadInput(format!("{}: {e}", path.display())))?;
            Ok(Resolved { params, name: path.display().to_string() })
        }
        None => {
            let params = SystemParams::preset(&global.preset).map_err(|e| CliError::BadInput(e.to_string()))?;
            Ok(Resolved { params, name: global.preset.clone() })
        }
    }
}

/// (Z, B) from explicit flags or the figure pulses.
pub fn conversion_factors(params: &SystemParams, args: &ConversionArgs) -> Result<(f64, f64), CliError> {
    let z = args.z.unwrap_or_else(|| conversion_factor(WRITE_COUPLING, WRITE_DURATION, params.kappa));
    let b = args.b.unwrap_or_else(|| conversion_factor(READOUT_COUPLING, READOUT_DURATION, params.kappa));
    if !(z > 0.0 && z <= 1.0) {
        return Err(CliError::BadInput(format!("Z must lie in (0, 1], got {z}")));
    }
    if !(0.0..1.0).contains(&b) {
        return Err(CliError::BadInput(format!("B must lie in [0, 1), got {b}")));
    }
    Ok((z, b))
}

fn check_global(global: &GlobalArgs) -> Result<(), CliError> {
    if global.nmax < 2 {
        return Err(CliError::BadInput(format!("--nmax must be at least 2, got {}", global.nmax)));
    }
    if !(global.tol > 0.0 && global.tol.is_finite()) {
        return Err(CliError::BadInput(format!("--tol must be > 0, got {}", global.tol)));
    }
    Ok(())
}

/// Runs a parsed command; `Ok(false)` means a validation failure was reported.
pub fn execute(cli: &Cli) -> Result<bool, CliError> {
    check_global(&cli.global)?;
    let resolved = resolve_params(&cli.global)?;
    match &cli.command {
        Command::Prepare(drives) => prepare::run_prepare(&cli.global, &resolved, drives),
        Command::Meanfield { drives, periods, record_periods } => {
            prepare::run_meanfield(&cli.global, &resolved, drives, *periods, *record_periods)
        }
        Command::PacsScan { conversion, beta, b_list, theta_points, b_points } => {
            scan::run_pacs_scan(&cli.global, &resolved, conversion, beta, b_list, *theta_points, *b_points)
        }
        Command::ThermalScan { conversion, beta, n0_list, n0_curves } => {
            scan::run_thermal_scan(&cli.global, &resolved, conversion, beta, n0_list, n0_curves)
        }
        Command::Validate { conversion, tau_r, threshold, beta_max } => {
            validate::run_validate(&cli.global, &resolved, conversion, *tau_r, *threshold, *beta_max)
        }
    }
}

/// Parses arguments, runs the command and maps the outcome to an exit code.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_BAD_INPUT) } else { ExitCode::SUCCESS };
        }
    };
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_VALIDATION),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
