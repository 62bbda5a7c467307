use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use polysketch::kernels::sketch::DEFAULT_SAMPLE_CONSTANT;
use polysketch::tensor_sketch::SketchSize;
use polysketch::transforms::CALIBRATED_OSE_CONSTANT;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Sketch the kernel named by `--kernel` (polynomial by default).
    Sketch,
    Gaussian,
    Ntk,
    Pconv,
    /// Preconditioned gradient descent on the Gaussian kernel system.
    Solve,
    /// Polynomial kernel ridge regression.
    Krr,
    /// Timing sweep over a grid of (n, d, p, eps).
    Bench,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Poly,
    Gaussian,
    Ntk,
    Pconv,
}

/// Everything a run depends on. Echoed verbatim into its report, so a report
/// alone is enough to reproduce the run.
#[derive(Debug, Clone, PartialEq, Parser, Serialize, Deserialize)]
#[command(name = "polysketch", version, about = "Tensor sketches of polynomial and dot-product kernels")]
pub struct RunConfig {
    #[arg(value_enum)]
    pub command: Command,

    /// Kernel to sketch; implied by the gaussian/ntk/pconv commands.
    #[arg(long, value_enum)]
    pub kernel: Option<KernelKind>,

    /// Polynomial degree p (sketch with the poly kernel, krr).
    #[arg(long, default_value_t = 2)]
    pub degree: usize,

    #[arg(long, default_value_t = 0.25)]
    pub eps: f64,

    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,

    /// Ridge parameter (krr).
    #[arg(long)]
    pub lambda: Option<f64>,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Explicit power-of-two sketch dimension, overriding the planned one.
    #[arg(long)]
    pub m: Option<usize>,

    /// Leading constant of the planned sketch dimensions.
    #[arg(long, default_value_t = CALIBRATED_OSE_CONSTANT)]
    pub ose_constant: f64,

    /// Data matrix: native `d n` text or CSV with one point per row.
    #[arg(long)]
    pub input: Option<PathBuf>,

    /// Targets y for solve and krr, one value per line.
    #[arg(long)]
    pub targets: Option<PathBuf>,

    /// Numeric artifact: the sketch, the solution vector, or the bench CSV.
    #[arg(long)]
    pub output: Option<PathBuf>,

    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub report: Option<PathBuf>,

    /// Compare against the dense oracle and attach the measured error.
    #[arg(long)]
    pub exact_check: bool,

    /// Repeat the run with this many derived seeds and summarize the checks.
    #[arg(long, default_value_t = 1)]
    pub trials: usize,

    /// Decay exponent a of the pconv coefficients C_l = (l+1)^(-a).
    #[arg(long, default_value_t = 2.5)]
    pub exponent: f64,

    /// Leading constant of the sampled-term count.
    #[arg(long, default_value_t = DEFAULT_SAMPLE_CONSTANT)]
    pub sample_constant: f64,

    /// Bench grid: comma-separated values per axis.
    #[arg(long, value_delimiter = ',', default_values_t = [8])]
    pub grid_n: Vec<usize>,

    #[arg(long, value_delimiter = ',', default_values_t = [256, 512, 1024, 2048])]
    pub grid_d: Vec<usize>,

    #[arg(long, value_delimiter = ',', default_values_t = [4])]
    pub grid_p: Vec<usize>,

    #[arg(long, value_delimiter = ',', default_values_t = [0.25])]
    pub grid_eps: Vec<f64>,

    /// Timed repetitions per bench cell, after one discarded warm-up.
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
}

fn open_unit(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!("--{name} must lie in (0, 1), got {v}")))
    }
}

impl RunConfig {
    /// Checks every flag and fills in the kernel implied by the command.
    pub fn validate(mut self) -> Result<Self, CliError> {
        let implied = match self.command {
            Command::Gaussian | Command::Solve => Some(KernelKind::Gaussian),
            Command::Ntk => Some(KernelKind::Ntk),
            Command::Pconv => Some(KernelKind::Pconv),
            Command::Krr | Command::Bench => Some(KernelKind::Poly),
            Command::Sketch => None,
        };
        self.kernel = match (implied, self.kernel) {
            (Some(k), Some(given)) if k != given => {
                return Err(CliError::Config(format!(
                    "--kernel {given:?} conflicts with the {:?} command",
                    self.command
                )))
            }
            (Some(k), _) => Some(k),
            (None, given) => Some(given.unwrap_or(KernelKind::Poly)),
        };

        open_unit("eps", self.eps)?;
        open_unit("delta", self.delta)?;
        if self.degree == 0 && matches!(self.kernel, Some(KernelKind::Poly)) {
            return Err(CliError::Config("--degree must be at least 1".into()));
        }
        if let Some(m) = self.m {
            if !m.is_power_of_two() {
                return Err(CliError::Config(format!("--m must be a power of two, got {m}")));
            }
        }
        if !(self.ose_constant > 0.0 && self.ose_constant.is_finite()) {
            return Err(CliError::Config("--ose-constant must be positive".into()));
        }
        if !(self.sample_constant > 0.0 && self.sample_constant.is_finite()) {
            return Err(CliError::Config("--sample-constant must be positive".into()));
        }
        if !(self.exponent > 1.0 && self.exponent.is_finite()) {
            return Err(CliError::Config(format!(
                "--exponent must exceed 1 for a convergent series, got {}",
                self.exponent
            )));
        }
        if self.trials == 0 {
            return Err(CliError::Config("--trials must be at least 1".into()));
        }
        if self.trials > 1 && !self.exact_check {
            return Err(CliError::Config("--trials > 1 needs --exact-check".into()));
        }

        match self.command {
            Command::Bench => {
                if self.reps == 0 {
                    return Err(CliError::Config("--reps must be at least 1".into()));
                }
                let axes = [
                    self.grid_n.is_empty(),
                    self.grid_d.is_empty(),
                    self.grid_p.is_empty(),
                    self.grid_eps.is_empty(),
                ];
                if axes.iter().any(|&e| e) {
                    return Err(CliError::Config("every bench grid axis needs a value".into()));
                }
                if self.grid_n.contains(&0) || self.grid_d.contains(&0) || self.grid_p.contains(&0)
                {
                    return Err(CliError::Config("bench grid sizes must be positive".into()));
                }
                for &e in &self.grid_eps {
                    open_unit("grid-eps", e)?;
                }
            }
            _ => {
                if self.input.is_none() {
                    return Err(CliError::Config("--input is required".into()));
                }
            }
        }
        if matches!(self.command, Command::Solve | Command::Krr) && self.targets.is_none() {
            return Err(CliError::Config("--targets is required".into()));
        }
        if self.command == Command::Krr {
            match self.lambda {
                Some(l) if l > 0.0 && l.is_finite() => {}
                Some(l) => return Err(CliError::Config(format!("--lambda must be positive, got {l}"))),
                None => return Err(CliError::Config("--lambda is required for krr".into())),
            }
        }
        Ok(self)
    }

    pub fn kernel(&self) -> KernelKind {
        self.kernel.unwrap_or(KernelKind::Poly)
    }

    pub fn sketch_size(&self) -> SketchSize {
        match self.m {
            Some(m) => SketchSize::Explicit(m),
            None => SketchSize::Theorem {
                ose_constant: self.ose_constant,
            },
        }
    }
}
