//! Dense kernel matrices computed straight from their definitions.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::series::PowerSeries;
use crate::data::DataMatrix;
use crate::error::{Result, SketchError};

/// Slack allowed on `|xᵢᵀxⱼ| ≤ 1` before the NTK closed form refuses an input.
pub const NTK_DOMAIN_TOLERANCE: f64 = 1e-9;

/// `P_ij = (xᵢᵀxⱼ)^p`; `p = 0` gives the all-ones matrix.
pub fn poly_kernel_exact(x: &DataMatrix, p: usize) -> DMatrix<f64> {
    let exp = i32::try_from(p).unwrap_or(i32::MAX);
    x.gram().map(|v| v.powi(exp))
}

/// `G_ij = exp(−‖xᵢ − xⱼ‖²/2)`, from pairwise differences.
pub fn gaussian_kernel_exact(x: &DataMatrix) -> DMatrix<f64> {
    let n = x.len();
    DMatrix::from_fn(n, n, |i, j| {
        let dist2: f64 = x
            .column(i)
            .iter()
            .zip(x.column(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        (-dist2 / 2.0).exp()
    })
}

/// The NTK profile `f(s) = (1/2 − arccos(s)/(2π))·s`, with `s` clamped into `[−1, 1]`
/// when it overshoots by at most [`NTK_DOMAIN_TOLERANCE`].
pub fn ntk_scalar(s: f64) -> Result<f64> {
    if !(s.abs() <= 1.0 + NTK_DOMAIN_TOLERANCE) {
        return Err(SketchError::Domain(format!(
            "NTK needs |<x, z>| <= 1, got {s}"
        )));
    }
    let s = s.clamp(-1.0, 1.0);
    Ok((0.5 - s.acos() / (2.0 * PI)) * s)
}

/// `K_ij = f(xᵢᵀxⱼ)` for the two-layer ReLU NTK.
pub fn ntk_kernel_exact(x: &DataMatrix) -> Result<DMatrix<f64>> {
    let gram = x.gram();
    let n = x.len();
    let mut k = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            k[(i, j)] = ntk_scalar(gram[(i, j)])?;
        }
    }
    Ok(k)
}

/// `Σ_{l ∈ terms} C_l·(XᵀX)^{∘deg(l)}`, plus the series' leading terms when asked.
/// Used as ground truth for truncated and sampled sketches.
pub fn series_kernel_exact(
    x: &DataMatrix,
    series: &PowerSeries,
    terms: std::ops::RangeInclusive<usize>,
    include_leading: bool,
) -> DMatrix<f64> {
    let gram = x.gram();
    let n = x.len();
    let mut k = DMatrix::zeros(n, n);
    let mut add = |degree: usize, c: f64| {
        let exp = i32::try_from(degree).unwrap_or(i32::MAX);
        k.zip_apply(&gram, |acc, g| *acc += c * g.powi(exp));
    };
    if include_leading {
        for &(degree, c) in series.leading() {
            add(degree, c);
        }
    }
    for l in terms {
        add(series.degree(l), series.coefficient(l));
    }
    k
}
