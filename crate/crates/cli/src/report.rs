use polysketch::oracle::SpectralReport;
use polysketch::tensor_sketch::DimPlan;
use serde::{Deserialize, Serialize};

use crate::bench::BenchRow;
use crate::config::RunConfig;

/// Wall-clock time per phase, in milliseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub ingest: f64,
    pub sketch: f64,
    pub solve: f64,
    pub verify: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorInfo {
    pub kind: String,
    pub message: String,
    pub exit_code: i32,
}

/// Pass counts over repeated seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trials: usize,
    pub passed: usize,
    /// Worst value of the command's check metric across trials.
    pub worst_metric: f64,
    pub metrics: Vec<f64>,
}

/// One run: the configuration, what was built, how it checked out, and how
/// long each phase took. Fields that do not apply to a command are omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub config: RunConfig,
    pub success: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorInfo>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_total: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim_plan: Option<DimPlan>,
    /// Truncation degree of the Taylor series.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
    /// End of the exact prefix for sampled plans.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degrees: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampled_degrees: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub large_norm_branch: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iteration_cap: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_hat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inner_rows: Option<usize>,
    /// Final `‖WᵀWx̂ − y‖/‖y‖` as seen by the solver.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sketched_residual: Option<f64>,
    /// `‖WᵀWx_t − y‖` per iteration, starting from `x_0 = 0`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual_history: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outer_rows: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_hypothesis_holds: Option<bool>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_measured: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectral: Option<SpectralReport>,
    /// `‖Gx̂ − y‖/‖y‖` against the exact kernel.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relative_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub opt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub check_passed: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<TrialSummary>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub bench: Option<Vec<BenchRow>>,

    pub timings_ms: Timings,
}

impl ReportRecord {
    pub fn new(config: RunConfig) -> Self {
        Self {
            config,
            success: true,
            error: None,
            n: None,
            d: None,
            radius: None,
            m_total: None,
            dim_plan: None,
            q: None,
            s: None,
            tail_bound: None,
            degrees: None,
            sampled_degrees: None,
            large_norm_branch: None,
            iterations: None,
            iteration_cap: None,
            kappa_hat: None,
            inner_rows: None,
            sketched_residual: None,
            residual_history: None,
            cost: None,
            outer_rows: None,
            s_lambda: None,
            lambda_hypothesis_holds: None,
            eps_measured: None,
            spectral: None,
            relative_residual: None,
            opt: None,
            cost_ratio: None,
            check_passed: None,
            trials: None,
            bench: None,
            timings_ms: Timings::default(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports contain only serializable values")
    }

    /// The report with every timing zeroed: what must be identical across
    /// re-runs with the same seed.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        r.timings_ms = Timings::default();
        if let Some(rows) = &mut r.bench {
            for row in rows {
                row.clear_timings();
            }
        }
        r
    }
}
