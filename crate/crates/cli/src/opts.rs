//! Flag grammar and config-file merging.

use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "pll-lockin",
    version,
    about = "Lock-in range toolkit for a PLL with an active PI filter"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Numeric lock-in frequency with every estimate.
    Lockin,
    /// Pull-out frequency (twice the lock-in frequency) with every estimate.
    Pullout,
    /// Traced separatrix, in reduced and filter-state coordinates.
    Separatrix,
    /// Trajectory of the filter-state system from `(theta0, x0)`.
    Simulate,
    /// Lock-in diagram over a `(k0/tau1, tau2)` grid.
    Sweep,
    /// Closed-form estimates next to the numeric value.
    Estimate,
    /// Recovered phase-detector gains.
    PdTable,
    /// Pull-out estimates over a `(k0/tau1, tau2)` grid.
    Compare,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Loop gain.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub k0: Option<f64>,
    /// Integrating time constant of the filter.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub tau1: Option<f64>,
    /// Proportional time constant of the filter (0 for the undamped loop).
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub tau2: Option<f64>,
    /// Frequency deviation of the reference from the free-running VCO.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub omega: Option<f64>,
    /// Initial phase error for `simulate`.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub theta0: Option<f64>,
    /// Initial filter state for `simulate`.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub x0: Option<f64>,
    /// Integration horizon for `simulate`.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub tmax: Option<f64>,
    /// Time step of the trajectory integrator.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub h: Option<f64>,
    /// Launch offset from the saddle when tracing the separatrix.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub eps: Option<f64>,
    /// Phase step when tracing the separatrix.
    #[arg(long = "h-theta", global = true, allow_negative_numbers = true)]
    pub h_theta: Option<f64>,
    /// Grid of `k0/tau1` values for `sweep` and `compare`.
    #[arg(
        long,
        global = true,
        value_delimiter = ',',
        allow_negative_numbers = true
    )]
    pub ratios: Option<Vec<f64>>,
    /// Grid of `tau2` values for `sweep` and `compare`.
    #[arg(
        long = "tau2-values",
        global = true,
        value_delimiter = ',',
        allow_negative_numbers = true
    )]
    pub tau2_values: Option<Vec<f64>>,
    /// Output format (default json).
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// JSON file whose keys mirror the flag names.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct ConfigFile {
    k0: Option<f64>,
    tau1: Option<f64>,
    tau2: Option<f64>,
    omega: Option<f64>,
    theta0: Option<f64>,
    x0: Option<f64>,
    tmax: Option<f64>,
    h: Option<f64>,
    eps: Option<f64>,
    #[serde(alias = "h_theta")]
    h_theta: Option<f64>,
    ratios: Option<Vec<f64>>,
    #[serde(alias = "tau2_values")]
    tau2_values: Option<Vec<f64>>,
    format: Option<Format>,
    out: Option<PathBuf>,
}

/// Command-line flags layered over the config file, if any.
pub fn resolve(flags: Flags) -> Result<Flags, CliError> {
    let Some(path) = flags.config.clone() else {
        return Ok(flags);
    };
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::Usage(format!("--config: cannot read {}: {e}", path.display())))?;
    let cfg: ConfigFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("--config: {}: {e}", path.display())))?;
    Ok(Flags {
        k0: flags.k0.or(cfg.k0),
        tau1: flags.tau1.or(cfg.tau1),
        tau2: flags.tau2.or(cfg.tau2),
        omega: flags.omega.or(cfg.omega),
        theta0: flags.theta0.or(cfg.theta0),
        x0: flags.x0.or(cfg.x0),
        tmax: flags.tmax.or(cfg.tmax),
        h: flags.h.or(cfg.h),
        eps: flags.eps.or(cfg.eps),
        h_theta: flags.h_theta.or(cfg.h_theta),
        ratios: flags.ratios.or(cfg.ratios),
        tau2_values: flags.tau2_values.or(cfg.tau2_values),
        format: flags.format.or(cfg.format),
        config: Some(path),
        out: flags.out.or(cfg.out),
    })
}

pub fn required(value: Option<f64>, flag: &str) -> Result<f64, CliError> {
    value.ok_or_else(|| CliError::Usage(format!("missing required flag {flag}")))
}

pub fn finite(value: f64, flag: &str) -> Result<f64, CliError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(CliError::Usage(format!(
            "{flag}: must be finite, got {value}"
        )))
    }
}
