//! Command-line front end: configuration, single solves, sweeps, phase
//! diagrams, spectra and the self-test.

mod config;
mod output;
mod run;

pub use config::{read_bath_rows, Axis, Format, Method, Model, Overrides, RunConfig, SWEEPABLE};
pub use output::{Cell, Table};
pub use run::{
    cmd_phase_diagram, cmd_solve, cmd_spectrum, cmd_sweep, solve_point, sweep_points, PointOutcome,
    PointStatus, SweepPoint,
};

use thiserror::Error;

use crate::dynamics::DynamicsError;
use crate::metrics::MetricsError;
use crate::spectral::SpectralError;
use crate::spectrum::SpectrumError;

/// Environment variable consulted when `--jobs` is not given.
pub const JOBS_ENV: &str = "QSLB_DEFAULT_JOBS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("{0}")]
    UndefinedQsl(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 1,
            CliError::Numerical(_) => 2,
            CliError::UndefinedQsl(_) => 3,
        }
    }
}

impl From<SpectralError> for CliError {
    fn from(e: SpectralError) -> Self {
        match e {
            SpectralError::InvalidParameter(msg) => CliError::Config(msg),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<SpectrumError> for CliError {
    fn from(e: SpectrumError) -> Self {
        match e {
            SpectrumError::InvalidParameter(msg) => CliError::Config(msg),
            SpectrumError::Spectral(inner) => inner.into(),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::InvalidGrid(msg) => CliError::Config(msg),
            DynamicsError::Spectral(inner) => inner.into(),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::UndefinedQsl { .. } => CliError::UndefinedQsl(e.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

/// Worker count: explicit value, else [`JOBS_ENV`], else available parallelism.
pub fn resolve_jobs(explicit: Option<usize>) -> usize {
    explicit
        .or_else(|| {
            std::env::var(JOBS_ENV)
                .ok()
                .and_then(|v| v.trim().parse().ok())
        })
        .filter(|&j| j > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}
