//! Dispatch from a validated [`RunConfig`] to the library, with optional
//! verification against the dense oracles.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use polysketch::kernels::{
    gaussian_kernel_exact, gaussian_sketch, ntk_kernel_exact, ntk_sketch, poly_kernel_exact,
    sampled_pconv_sketch, series_kernel_exact, KernelSketchOptions, PowerSeries, SketchedKernel,
};
use polysketch::oracle::spectral_sandwich;
use polysketch::rng::{derive_seed, role};
use polysketch::solvers::{krr_exact, krr_solve, precond_gd_solve, KrrOptions, PrecondOptions};
use polysketch::tensor_sketch::{plan_dims, TensorSketcher};
use polysketch::{DataMatrix, SketchError};

use crate::bench::{run_grid, write_csv, BenchGrid};
use crate::config::{Command, KernelKind, RunConfig};
use crate::error::{sketch_error_kind, sketch_exit_code, CliError};
use crate::io::{load_matrix, load_vector, save_matrix, save_vector};
use crate::report::{ErrorInfo, ReportRecord, TrialSummary};

/// Largest `n` for which `--exact-check` will form and decompose dense `n × n` oracles.
pub const EXACT_CHECK_GUARD: usize = 512;

/// Tail allowed in the reference kernel of a p-convergent series, relative to `eps`.
const REFERENCE_TAIL_FRACTION: f64 = 1e-3;

enum Artifact {
    Matrix(DMatrix<f64>),
    Vector(Vec<f64>),
}

struct Check {
    passed: bool,
    metric: f64,
}

fn ms_since(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Runs one command. Configuration and ingestion problems come back as `Err`;
/// failures inside the computation are recorded in the report with
/// `success = false` so the caller still has something to write out.
pub fn run_command(config: &RunConfig) -> Result<ReportRecord, CliError> {
    let config = config.clone().validate()?;
    let mut report = ReportRecord::new(config.clone());

    if config.command == Command::Bench {
        let outcome = run_bench(&config, &mut report);
        return finish(report, outcome);
    }

    let start = Instant::now();
    let input = config.input.as_deref().expect("validated");
    let x = load_matrix(input)?;
    let y = match &config.targets {
        Some(path) => {
            let y = load_vector(path)?;
            if y.len() != x.len() {
                return Err(CliError::Config(format!(
                    "{} has {} targets but the data has {} points",
                    path.display(),
                    y.len(),
                    x.len()
                )));
            }
            Some(y)
        }
        None => None,
    };
    report.timings_ms.ingest = ms_since(start);
    report.n = Some(x.len());
    report.d = Some(x.dim());
    report.radius = Some(x.radius());

    if config.exact_check && x.len() > EXACT_CHECK_GUARD {
        return Err(SketchError::GuardExceeded(format!(
            "--exact-check is limited to n <= {EXACT_CHECK_GUARD} (EXACT_CHECK_GUARD), got n = {}",
            x.len()
        ))
        .into());
    }

    let outcome = run_with_trials(&config, &x, y.as_deref(), &mut report);
    finish(report, outcome)
}

fn finish(
    mut report: ReportRecord,
    outcome: Result<(), CliError>,
) -> Result<ReportRecord, CliError> {
    match outcome {
        Ok(()) => Ok(report),
        Err(CliError::Sketch(e)) => {
            report.success = false;
            report.error = Some(ErrorInfo {
                kind: sketch_error_kind(&e).to_string(),
                message: e.to_string(),
                exit_code: sketch_exit_code(&e),
            });
            Ok(report)
        }
        Err(other) => Err(other),
    }
}

fn run_with_trials(
    config: &RunConfig,
    x: &DataMatrix,
    y: Option<&[f64]>,
    report: &mut ReportRecord,
) -> Result<(), CliError> {
    let (artifact, check) = run_once(config, x, y, config.seed, report)?;
    if let Some(path) = &config.output {
        match &artifact {
            Artifact::Matrix(m) => save_matrix(path, m)?,
            Artifact::Vector(v) => save_vector(path, v)?,
        }
    }
    if let Some(first) = check {
        report.check_passed = Some(first.passed);
        if config.trials > 1 {
            let mut metrics = vec![first.metric];
            let mut passed = usize::from(first.passed);
            for t in 1..config.trials {
                let seed = derive_seed(config.seed, role::TRIAL, t as u64);
                let mut scratch = ReportRecord::new(config.clone());
                let (_, check) = run_once(config, x, y, seed, &mut scratch)?;
                let check = check.expect("exact check is on");
                passed += usize::from(check.passed);
                metrics.push(check.metric);
            }
            report.trials = Some(TrialSummary {
                trials: config.trials,
                passed,
                worst_metric: metrics.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                metrics,
            });
        }
    }
    Ok(())
}

fn run_once(
    config: &RunConfig,
    x: &DataMatrix,
    y: Option<&[f64]>,
    seed: u64,
    report: &mut ReportRecord,
) -> Result<(Artifact, Option<Check>), CliError> {
    match config.command {
        Command::Sketch | Command::Gaussian | Command::Ntk | Command::Pconv => {
            sketch_command(config, x, seed, report)
        }
        Command::Solve => solve_command(config, x, y.expect("validated"), seed, report),
        Command::Krr => krr_command(config, x, y.expect("validated"), seed, report),
        Command::Bench => unreachable!("bench has no input data"),
    }
}

fn kernel_options(config: &RunConfig) -> KernelSketchOptions {
    KernelSketchOptions {
        size: config.sketch_size(),
        sample_constant: config.sample_constant,
    }
}

fn record_kernel(report: &mut ReportRecord, k: &SketchedKernel) {
    report.m_total = Some(k.m_total);
    report.q = Some(k.plan.q);
    report.tail_bound = Some(k.plan.tail_bound);
    report.degrees = Some(k.degrees());
    if k.plan.is_sampled() {
        report.s = Some(k.plan.s);
        report.sampled_degrees = Some(k.sampled_degrees());
    }
    report.large_norm_branch = k.large_norm_branch;
}

fn sketch_command(
    config: &RunConfig,
    x: &DataMatrix,
    seed: u64,
    report: &mut ReportRecord,
) -> Result<(Artifact, Option<Check>), CliError> {
    let (eps, delta) = (config.eps, config.delta);
    let opts = kernel_options(config);
    let series = PowerSeries::inverse_power(config.exponent);

    let start = Instant::now();
    let (z, approx) = match config.kernel() {
        KernelKind::Poly => {
            let p = config.degree;
            let m = match config.m {
                Some(m) => m,
                None => {
                    let plan = plan_dims(x.len(), x.dim(), p, eps, delta, config.ose_constant)?;
                    report.dim_plan = Some(plan);
                    plan.m
                }
            };
            let z = TensorSketcher::new(x.dim(), m, p, seed)?.sketch_matrix(x)?.values;
            report.m_total = Some(m);
            let gram = z.transpose() * &z;
            (z, gram)
        }
        kind => {
            let k = match kind {
                KernelKind::Gaussian => gaussian_sketch(x, eps, delta, seed, &opts)?,
                KernelKind::Ntk => ntk_sketch(x, eps, delta, seed, &opts)?,
                _ => sampled_pconv_sketch(x, &series, config.exponent, eps, delta, seed, &opts)?,
            };
            record_kernel(report, &k);
            (k.stacked(), k.gram())
        }
    };
    report.timings_ms.sketch += ms_since(start);

    if !config.exact_check {
        return Ok((Artifact::Matrix(z), None));
    }
    let start = Instant::now();
    let exact = match config.kernel() {
        KernelKind::Poly => poly_kernel_exact(x, config.degree),
        KernelKind::Gaussian => gaussian_kernel_exact(x),
        KernelKind::Ntk => ntk_kernel_exact(x)?,
        KernelKind::Pconv => {
            let (q, _) = series.truncation(x.len(), x.radius(), REFERENCE_TAIL_FRACTION * eps)?;
            series_kernel_exact(x, &series, 0..=q, true)
        }
    };
    let spectral = spectral_sandwich(&approx, &exact, eps)?;
    report.timings_ms.verify += ms_since(start);
    let check = Check {
        passed: spectral.passed,
        metric: spectral.eps_measured,
    };
    report.eps_measured = Some(spectral.eps_measured);
    report.spectral = Some(spectral);
    Ok((Artifact::Matrix(z), Some(check)))
}

fn solve_command(
    config: &RunConfig,
    x: &DataMatrix,
    y: &[f64],
    seed: u64,
    report: &mut ReportRecord,
) -> Result<(Artifact, Option<Check>), CliError> {
    let opts = PrecondOptions {
        kernel: kernel_options(config),
        ..PrecondOptions::default()
    };
    let start = Instant::now();
    let (x_hat, pr) = precond_gd_solve(x, y, config.eps, config.delta, seed, &opts)?;
    report.timings_ms.solve += ms_since(start);

    let y_norm = DVector::from_column_slice(y).norm();
    report.m_total = Some(pr.m_total);
    report.q = Some(pr.q);
    report.iterations = Some(pr.iterations);
    report.iteration_cap = Some(pr.iteration_cap);
    report.kappa_hat = Some(pr.kappa_hat);
    report.inner_rows = Some(pr.inner_rows);
    report.sketched_residual = pr.residuals.last().map(|r| r / y_norm);
    report.residual_history = Some(pr.residuals);

    if !config.exact_check {
        return Ok((Artifact::Vector(x_hat), None));
    }
    let start = Instant::now();
    let g = gaussian_kernel_exact(x);
    let residual = (&g * DVector::from_column_slice(&x_hat) - DVector::from_column_slice(y))
        .norm()
        / y_norm;
    report.timings_ms.verify += ms_since(start);
    report.relative_residual = Some(residual);
    Ok((
        Artifact::Vector(x_hat),
        Some(Check {
            passed: residual <= config.eps,
            metric: residual,
        }),
    ))
}

fn krr_command(
    config: &RunConfig,
    x: &DataMatrix,
    y: &[f64],
    seed: u64,
    report: &mut ReportRecord,
) -> Result<(Artifact, Option<Check>), CliError> {
    let lambda = config.lambda.expect("validated");
    let opts = KrrOptions {
        size: config.sketch_size(),
        delta: config.delta,
        ..KrrOptions::default()
    };
    let start = Instant::now();
    let (x_star, cost, kr) = krr_solve(x, y, config.degree, lambda, config.eps, seed, &opts)?;
    report.timings_ms.solve += ms_since(start);
    report.m_total = Some(kr.t);
    report.outer_rows = Some(kr.outer_rows);
    report.s_lambda = Some(kr.s_lambda);
    report.lambda_hypothesis_holds = Some(kr.hypothesis_holds);
    report.cost = Some(cost);

    if !config.exact_check {
        return Ok((Artifact::Vector(x_star), None));
    }
    let start = Instant::now();
    let (_, opt) = krr_exact(x, y, config.degree, lambda)?;
    report.timings_ms.verify += ms_since(start);
    let ratio = cost / opt;
    report.opt = Some(opt);
    report.cost_ratio = Some(ratio);
    Ok((
        Artifact::Vector(x_star),
        Some(Check {
            passed: cost <= (1.0 + config.eps) * opt,
            metric: ratio,
        }),
    ))
}

fn run_bench(config: &RunConfig, report: &mut ReportRecord) -> Result<(), CliError> {
    let grid = BenchGrid {
        n: config.grid_n.clone(),
        d: config.grid_d.clone(),
        p: config.grid_p.clone(),
        eps: config.grid_eps.clone(),
        delta: config.delta,
        size: config.sketch_size(),
        reps: config.reps,
        seed: config.seed,
    };
    let start = Instant::now();
    let rows = run_grid(&grid)?;
    report.timings_ms.sketch = ms_since(start);
    if let Some(path) = &config.output {
        let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
        write_csv(file, &rows).map_err(|e| CliError::Output(e.to_string()))?;
    }
    report.bench = Some(rows);
    Ok(())
}
