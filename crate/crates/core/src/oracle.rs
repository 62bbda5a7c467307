//! Brute-force ground truth and statistical verifiers.
//!
//! Nothing here touches a fast transform: tensor powers are formed
//! explicitly, spectral comparisons go through a dense symmetric
//! eigendecomposition, and every routine refuses inputs beyond its size
//! guard instead of approximating.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Result, SketchError};
use crate::rng::{derive_seed, role};

/// Largest `d^p` for which [`tensor_power_dense`] will materialize `X^{⊗p}`.
pub const TENSOR_POWER_GUARD: usize = 1 << 12;
/// Eigenvalues of `B` below this fraction of `λ_max(B)` span its null space.
pub const WHITENING_THRESHOLD: f64 = 1e-10;
/// `A` must vanish on `B`'s null space to this tolerance.
pub const NULL_SPACE_TOLERANCE: f64 = 1e-8;
/// Allowed asymmetry of matrices handed to the spectral check.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// Row-major Kronecker product of two vectors; index `i·len(b) + j` holds `a_i·b_j`.
pub fn kron_vec(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter()
        .flat_map(|x| b.iter().map(move |y| x * y))
        .collect()
}

/// Literal Kronecker product `A × B`.
pub fn kron_mat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (br, bc) = b.shape();
    DMatrix::from_fn(a.nrows() * br, a.ncols() * bc, |i, j| {
        a[(i / br, j / bc)] * b[(i % br, j % bc)]
    })
}

/// Applies the `k`-fold Kronecker power `A × A × … × A` to `v ∈ R^{c^k}`
/// one tensor mode at a time.
pub fn kron_power_apply(a: &DMatrix<f64>, k: usize, v: &[f64]) -> Result<Vec<f64>> {
    let (r, c) = a.shape();
    if c.checked_pow(k as u32) != Some(v.len()) {
        return Err(SketchError::InvalidDimension(format!(
            "vector of length {} is not in the domain of a {}-fold power of a {r}x{c} matrix",
            v.len(),
            k
        )));
    }
    let mut cur = v.to_vec();
    // Modes before `t` already have size r, modes after still have size c.
    for t in 0..k {
        let left = r.pow(t as u32);
        let right = c.pow((k - t - 1) as u32);
        let mut next = vec![0.0; left * r * right];
        for l in 0..left {
            for row in 0..r {
                let out = &mut next[(l * r + row) * right..(l * r + row + 1) * right];
                for col in 0..c {
                    let w = a[(row, col)];
                    if w == 0.0 {
                        continue;
                    }
                    let src = &cur[(l * c + col) * right..(l * c + col + 1) * right];
                    for (o, s) in out.iter_mut().zip(src) {
                        *o += w * s;
                    }
                }
            }
        }
        cur = next;
    }
    Ok(cur)
}

/// `X^{⊗p}` as an explicit `d^p × n` matrix.
pub fn tensor_power_dense(x: &DataMatrix, p: usize) -> Result<DMatrix<f64>> {
    let d = x.dim();
    let rows = d
        .checked_pow(p as u32)
        .filter(|&r| r <= TENSOR_POWER_GUARD)
        .ok_or_else(|| {
            SketchError::GuardExceeded(format!(
                "d^p = {d}^{p} exceeds the tensor-power guard {TENSOR_POWER_GUARD}"
            ))
        })?;
    let mut out = DMatrix::zeros(rows, x.len());
    for j in 0..x.len() {
        let col = x.column(j);
        let mut power = vec![1.0];
        for _ in 0..p {
            power = kron_vec(&power, col);
        }
        out.column_mut(j).copy_from_slice(&power);
    }
    Ok(out)
}

/// Outcome of checking `(1−ε)B ⪯ A ⪯ (1+ε)B`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    /// `max(|λ_max − 1|, |1 − λ_min|)` of the whitened `A`; infinite on structural failure.
    pub eps_measured: f64,
    pub min_eig: f64,
    pub max_eig: f64,
    pub rank_used: usize,
    pub threshold: f64,
    /// `A` does not vanish on the null space of `B`.
    pub structural_failure: bool,
    pub passed: bool,
}

fn symmetrized(m: &DMatrix<f64>, name: &str) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(SketchError::InvalidDimension(format!("{name} must be square")));
    }
    let scale = m.amax().max(1.0);
    let asym = (m - m.transpose()).amax();
    if asym > SYMMETRY_TOLERANCE * scale {
        return Err(SketchError::InvalidParameter(format!(
            "{name} is not symmetric (max asymmetry {asym:e})"
        )));
    }
    Ok((m + m.transpose()) * 0.5)
}

/// Measures how well `A` approximates `B` in the Loewner order, whitening by
/// `B^{−1/2}` on the range of `B`.
pub fn spectral_sandwich(a: &DMatrix<f64>, b: &DMatrix<f64>, eps: f64) -> Result<SpectralReport> {
    if a.shape() != b.shape() {
        return Err(SketchError::InvalidDimension(format!(
            "shape mismatch {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let a = symmetrized(a, "A")?;
    let b = symmetrized(b, "B")?;
    let eig = SymmetricEigen::new(b);
    let lmax = eig.eigenvalues.max();
    let cutoff = WHITENING_THRESHOLD * lmax.max(0.0);
    let n = a.nrows();
    let range: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > cutoff).collect();
    let null: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] <= cutoff).collect();

    if !null.is_empty() {
        let basis = eig.eigenvectors.select_columns(&null);
        let restricted = basis.transpose() * &a * &basis;
        if restricted.amax() > NULL_SPACE_TOLERANCE * a.amax().max(1.0) {
            return Ok(SpectralReport {
                eps_measured: f64::INFINITY,
                min_eig: f64::NAN,
                max_eig: f64::NAN,
                rank_used: range.len(),
                threshold: eps,
                structural_failure: true,
                passed: false,
            });
        }
    }
    if range.is_empty() {
        return Ok(SpectralReport {
            eps_measured: 0.0,
            min_eig: 1.0,
            max_eig: 1.0,
            rank_used: 0,
            threshold: eps,
            structural_failure: false,
            passed: true,
        });
    }
    let mut whiten = eig.eigenvectors.select_columns(&range);
    for (k, &i) in range.iter().enumerate() {
        whiten.column_mut(k).scale_mut(1.0 / eig.eigenvalues[i].sqrt());
    }
    let c = whiten.transpose() * &a * &whiten;
    let c = (&c + c.transpose()) * 0.5;
    let ev = SymmetricEigen::new(c).eigenvalues;
    let (min_eig, max_eig) = (ev.min(), ev.max());
    let eps_measured = (max_eig - 1.0).abs().max((1.0 - min_eig).abs());
    Ok(SpectralReport {
        eps_measured,
        min_eig,
        max_eig,
        rank_used: range.len(),
        threshold: eps,
        structural_failure: false,
        passed: eps_measured <= eps,
    })
}

/// A family of sketches indexed by seed, evaluated on one vector at a time.
pub trait SeededSketch {
    fn sketch(&self, seed: u64, v: &[f64]) -> Result<Vec<f64>>;
}

impl<F> SeededSketch for F
where
    F: Fn(u64, &[f64]) -> Result<Vec<f64>>,
{
    fn sketch(&self, seed: u64, v: &[f64]) -> Result<Vec<f64>> {
        self(seed, v)
    }
}

/// Empirical distribution of `‖S(Xy)‖² / ‖Xy‖²` over independent seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormRatioStats {
    pub trials: usize,
    pub mean: f64,
    /// Sample standard deviation; zero when `std_undefined`.
    pub std: f64,
    pub std_undefined: bool,
    pub q05: f64,
    pub q50: f64,
    pub q95: f64,
    pub min: f64,
    pub max: f64,
    /// Fraction of trials with `|ratio − 1| > ε`, when `ε` was given.
    pub failure_rate: Option<f64>,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Runs `trials` seeded sketches of `X·y`; trial `i` uses a seed derived from `(master_seed, i)`.
pub fn monte_carlo_norm_ratio<S: SeededSketch + ?Sized>(
    sketch: &S,
    x: &DMatrix<f64>,
    y: &[f64],
    trials: usize,
    master_seed: u64,
    eps: Option<f64>,
) -> Result<NormRatioStats> {
    if trials == 0 {
        return Err(SketchError::InvalidParameter("trials must be >= 1".into()));
    }
    if y.len() != x.ncols() {
        return Err(SketchError::InvalidDimension(format!(
            "y has length {}, X has {} columns",
            y.len(),
            x.ncols()
        )));
    }
    let v = x * nalgebra::DVector::from_column_slice(y);
    let base = v.norm_squared();
    if base == 0.0 {
        return Err(SketchError::UndefinedValue("X·y is the zero vector".into()));
    }
    let mut ratios = Vec::with_capacity(trials);
    for i in 0..trials {
        let seed = derive_seed(master_seed, role::TRIAL, i as u64);
        let out = sketch.sketch(seed, v.as_slice())?;
        ratios.push(out.iter().map(|a| a * a).sum::<f64>() / base);
    }
    let mean = ratios.iter().sum::<f64>() / trials as f64;
    let (std, std_undefined) = if trials == 1 {
        (0.0, true)
    } else {
        let var = ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
        (var.sqrt(), false)
    };
    let failure_rate = eps.map(|e| {
        ratios.iter().filter(|r| (*r - 1.0).abs() > e).count() as f64 / trials as f64
    });
    let mut sorted = ratios;
    sorted.sort_by(f64::total_cmp);
    Ok(NormRatioStats {
        trials,
        mean,
        std,
        std_undefined,
        q05: quantile(&sorted, 0.05),
        q50: quantile(&sorted, 0.5),
        q95: quantile(&sorted, 0.95),
        min: sorted[0],
        max: sorted[sorted.len() - 1],
        failure_rate,
    })
}
