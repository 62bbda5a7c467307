//! Sketch-preconditioned gradient descent for Gaussian kernel systems, and kernel
//! ridge regression on a tensor-sketched feature matrix with an outer SRHT.

use nalgebra::{DMatrix, DVector, SymmetricEigen, QR};
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{check_open_unit, Result, SketchError};
use crate::kernels::{gaussian_sketch, poly_kernel_exact, KernelSketchOptions};
use crate::rng::{derive_seed, role};
use crate::tensor_sketch::{SketchSize, TensorSketcher};
use crate::transforms::SrhtSketch;

/// Inner subspace-embedding accuracy used to build the preconditioner.
pub const DEFAULT_EPSILON0: f64 = 0.1;
/// Largest `n` accepted by [`krr_exact`].
pub const KRR_EXACT_GUARD: usize = 512;
/// Relative eigenvalue cutoff for pseudo-inverses and rank decisions.
const PINV_THRESHOLD: f64 = 1e-12;
/// `κ` is reported infinite when `σ_min < 1e−14·σ_max`.
const SINGULAR_RATIO: f64 = 1e-14;

/// `σ_max / σ_min` via a dense SVD.
pub fn condition_number(m: &DMatrix<f64>) -> Result<f64> {
    if m.is_empty() || m.iter().all(|&v| v == 0.0) {
        return Err(SketchError::InvalidParameter(
            "condition number of an empty or zero matrix".into(),
        ));
    }
    let sv = m.clone().singular_values();
    let (lo, hi) = (sv.min(), sv.max());
    if lo < SINGULAR_RATIO * hi {
        Ok(f64::INFINITY)
    } else {
        Ok(hi / lo)
    }
}

fn symmetric_eigenvalues(k: &DMatrix<f64>) -> Result<DVector<f64>> {
    if !k.is_square() {
        return Err(SketchError::InvalidDimension("matrix must be square".into()));
    }
    let asym = (k - k.transpose()).amax();
    if asym > 1e-10 * k.amax().max(1.0) {
        return Err(SketchError::InvalidParameter(format!(
            "matrix is not symmetric (max asymmetry {asym:e})"
        )));
    }
    Ok(SymmetricEigen::new((k + k.transpose()) * 0.5).eigenvalues)
}

/// `s_λ(K) = tr[K(K + λI)⁻¹] = Σ λᵢ/(λᵢ + λ)`. At `λ = 0` this is the numerical rank.
pub fn statistical_dimension(k: &DMatrix<f64>, lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(SketchError::InvalidParameter(format!(
            "lambda must be finite and non-negative, got {lambda}"
        )));
    }
    let mut ev: Vec<f64> = symmetric_eigenvalues(k)?
        .iter()
        .map(|&v| v.max(0.0))
        .collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    let cutoff = PINV_THRESHOLD * ev.first().copied().unwrap_or(0.0);
    Ok(ev
        .iter()
        .map(|&v| {
            if lambda == 0.0 {
                if v > cutoff {
                    1.0
                } else {
                    0.0
                }
            } else {
                v / (v + lambda)
            }
        })
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecondOptions {
    pub kernel: KernelSketchOptions,
    pub epsilon0: f64,
    /// Leading constant of the inner sketch size `l = c·n·ln(mn/(ε₀δ))·ln(n/δ)`.
    pub inner_constant: f64,
}

impl Default for PrecondOptions {
    fn default() -> Self {
        Self {
            kernel: KernelSketchOptions::default(),
            epsilon0: DEFAULT_EPSILON0,
            inner_constant: 1.0,
        }
    }
}

/// `W` together with the upper-triangular `R` making `S·W·R` orthonormal.
#[derive(Debug, Clone)]
pub struct PreconditionedSystem {
    pub w: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub epsilon0: f64,
    /// `κ(W·R)`.
    pub kappa_hat: f64,
    pub inner_rows: usize,
    /// `max |(SWR)ᵀ(SWR) − I|`.
    pub orthonormality_error: f64,
}

impl PreconditionedSystem {
    /// Sketches `W` with an SRHT of `l/ε₀²` rows and inverts the R factor of its QR.
    pub fn build(
        w: DMatrix<f64>,
        epsilon0: f64,
        inner_constant: f64,
        delta: f64,
        seed: u64,
    ) -> Result<Self> {
        check_open_unit("epsilon0", epsilon0)?;
        check_open_unit("delta", delta)?;
        if !(inner_constant > 0.0 && inner_constant.is_finite()) {
            return Err(SketchError::InvalidParameter(format!(
                "inner sketch constant must be positive, got {inner_constant}"
            )));
        }
        let (m, n) = w.shape();
        if m == 0 || n == 0 {
            return Err(SketchError::InvalidDimension("W must be non-empty".into()));
        }
        let (mf, nf) = (m as f64, n as f64);
        let l = inner_constant * nf * (mf * nf / (epsilon0 * delta)).ln() * (nf / delta).ln();
        let inner_rows = ((l / (epsilon0 * epsilon0)).ceil() as usize).max(n);
        let s = SrhtSketch::new(m, inner_rows, derive_seed(seed, role::SOLVER_OUTER, 1))?;
        let mut sw = DMatrix::zeros(inner_rows, n);
        for j in 0..n {
            let col = s.apply(w.column(j).as_slice())?;
            sw.column_mut(j).copy_from_slice(&col);
        }
        let r0 = QR::new(sw.clone()).r();
        let diag = r0.diagonal().map(f64::abs);
        if diag.min() <= PINV_THRESHOLD * diag.max() {
            return Err(SketchError::PreconditionerFailure(format!(
                "sketched W is numerically rank-deficient (|R| diagonal ratio {:e})",
                diag.min() / diag.max()
            )));
        }
        let r = r0
            .solve_upper_triangular(&DMatrix::identity(n, n))
            .ok_or_else(|| SketchError::PreconditionerFailure("R is singular".into()))?;
        let q = &sw * &r;
        let orthonormality_error = (q.transpose() * &q - DMatrix::<f64>::identity(n, n)).amax();
        let kappa_hat = condition_number(&(&w * &r))?;
        Ok(Self {
            w,
            r,
            epsilon0,
            kappa_hat,
            inner_rows,
            orthonormality_error,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecondReport {
    pub m_total: usize,
    pub q: usize,
    pub inner_rows: usize,
    pub kappa_hat: f64,
    pub orthonormality_error: f64,
    pub iterations: usize,
    pub iteration_cap: usize,
    /// Stopping threshold on `‖WᵀWRz − y‖`.
    pub threshold: f64,
    /// `‖WᵀWRz_t − y‖` for `t = 0..=iterations`.
    pub residuals: Vec<f64>,
    /// `‖Mz_t − Rᵀy‖` for `t = 0..=iterations`.
    pub preconditioned_residuals: Vec<f64>,
}

/// Solves `Gx ≈ y` for the Gaussian kernel of `X` by gradient descent on the
/// preconditioned system `M = RᵀWᵀWR`, with `W` sketched at accuracy `ε/4`.
///
/// Iterates `z ← z − M(Mz − Rᵀy)` from `z = 0` until `‖WᵀWRz − y‖ ≤ (ε/2)·‖y‖`
/// and returns `x̂ = Rz`. With `W` accurate to `ε/4`, that threshold leaves
/// `‖Gx̂ − y‖ ≤ ε‖y‖`.
pub fn precond_gd_solve(
    x: &DataMatrix,
    y: &[f64],
    eps: f64,
    delta: f64,
    seed: u64,
    opts: &PrecondOptions,
) -> Result<(Vec<f64>, PrecondReport)> {
    check_open_unit("eps", eps)?;
    check_open_unit("delta", delta)?;
    if y.len() != x.len() {
        return Err(SketchError::InvalidDimension(format!(
            "y has length {}, X has {} columns",
            y.len(),
            x.len()
        )));
    }
    if x.radius() > 1.0 + crate::kernels::sketch::RADIUS_TOLERANCE {
        return Err(SketchError::InvalidParameter(format!(
            "preconditioned solve needs columns in the unit ball, radius is {}",
            x.radius()
        )));
    }
    let kernel = gaussian_sketch(x, eps / 4.0, delta, seed, &opts.kernel)?;
    let system = PreconditionedSystem::build(
        kernel.stacked(),
        opts.epsilon0,
        opts.inner_constant,
        delta,
        seed,
    )?;
    let (z, mut report) = gradient_descent(&system, y, eps)?;
    report.m_total = kernel.m_total;
    report.q = kernel.plan.q;
    let x_hat = &system.r * DVector::from_column_slice(&z);
    Ok((x_hat.as_slice().to_vec(), report))
}

/// The iteration loop on an already preconditioned system; returns `z`.
pub fn gradient_descent(
    system: &PreconditionedSystem,
    y: &[f64],
    eps: f64,
) -> Result<(Vec<f64>, PrecondReport)> {
    let n = system.r.nrows();
    if y.len() != n {
        return Err(SketchError::InvalidDimension(format!(
            "y has length {}, system has {n} unknowns",
            y.len()
        )));
    }
    let y = DVector::from_column_slice(y);
    let wr = &system.w * &system.r;
    let m = wr.transpose() * &wr;
    let a = system.w.transpose() * &system.w;
    let rty = system.r.transpose() * &y;
    let threshold = eps / 2.0 * y.norm();
    let cap = (10.0 * (system.kappa_hat / eps).ln().max(0.0) + 50.0).ceil() as usize;

    let mut z = DVector::zeros(n);
    let true_residual = |z: &DVector<f64>| (&a * (&system.r * z) - &y).norm();
    let mut residuals = vec![true_residual(&z)];
    let mut precond = vec![(&m * &z - &rty).norm()];
    let mut iterations = 0;
    while residuals[iterations] > threshold {
        if iterations >= cap {
            return Err(SketchError::NonConvergence {
                iterations,
                residual: residuals[iterations],
            });
        }
        let g = &m * &z - &rty;
        z -= &m * g;
        iterations += 1;
        residuals.push(true_residual(&z));
        precond.push((&m * &z - &rty).norm());
    }
    let report = PrecondReport {
        m_total: system.w.nrows(),
        q: 0,
        inner_rows: system.inner_rows,
        kappa_hat: system.kappa_hat,
        orthonormality_error: system.orthonormality_error,
        iterations,
        iteration_cap: cap,
        threshold,
        residuals,
        preconditioned_residuals: precond,
    };
    Ok((z.as_slice().to_vec(), report))
}

/// `min_x ‖Kx − y‖² + λ‖Zx‖²` in the sketched feature space `Z ∈ R^{t×n}`.
#[derive(Debug, Clone)]
pub struct RidgeProblem {
    pub z: DMatrix<f64>,
    pub y: Vec<f64>,
    pub lambda: f64,
}

impl RidgeProblem {
    pub fn new(z: DMatrix<f64>, y: Vec<f64>, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(SketchError::InvalidParameter(format!(
                "lambda must be finite and non-negative, got {lambda}"
            )));
        }
        if z.ncols() != y.len() || z.is_empty() {
            return Err(SketchError::InvalidDimension(format!(
                "Z is {}x{}, y has length {}",
                z.nrows(),
                z.ncols(),
                y.len()
            )));
        }
        Ok(Self { z, y, lambda })
    }

    /// `ZᵀZ`.
    pub fn gram(&self) -> DMatrix<f64> {
        let g = self.z.transpose() * &self.z;
        (&g + g.transpose()) * 0.5
    }

    /// Minimizes `‖S(Zᵀz − y)‖² + λ‖z‖²` over `z ∈ R^t` through the identity
    /// `z = ZSᵀ(S ZᵀZ Sᵀ + λI)⁺ Sy`, then recovers `x` from `Zx = z` by least
    /// squares. Returns `x` and whether the recovery needed ridge jitter.
    pub fn solve_sketched(&self, s: &DMatrix<f64>) -> Result<(Vec<f64>, bool)> {
        let n = self.y.len();
        if s.ncols() != n {
            return Err(SketchError::InvalidDimension(format!(
                "outer sketch has {} columns, expected {n}",
                s.ncols()
            )));
        }
        let a = self.gram();
        let y = DVector::from_column_slice(&self.y);
        let mut g = s * &a * s.transpose();
        g = (&g + g.transpose()) * 0.5;
        for i in 0..g.nrows() {
            g[(i, i)] += self.lambda;
        }
        let u = pinv_apply(&g, &(s * y));
        // Zᵀz = A·Sᵀu; least squares for Zx = z is A x = Zᵀz.
        let rhs = &a * (s.transpose() * u);
        let eig = SymmetricEigen::new(a.clone());
        let top = eig.eigenvalues.max().max(0.0);
        let deficient = eig.eigenvalues.min() <= PINV_THRESHOLD * top;
        let mut lhs = a;
        if deficient {
            for i in 0..n {
                lhs[(i, i)] += PINV_THRESHOLD * top.max(f64::MIN_POSITIVE);
            }
        }
        let x = lhs
            .lu()
            .solve(&rhs)
            .ok_or_else(|| SketchError::Domain("feature Gram is singular".into()))?;
        Ok((x.as_slice().to_vec(), deficient))
    }
}

/// `A⁺b` for symmetric PSD `A`, dropping eigenvalues below 1e−12·λ_max.
fn pinv_apply(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let eig = SymmetricEigen::new(a.clone());
    let top = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let coords = eig.eigenvectors.transpose() * b;
    let scaled = DVector::from_iterator(
        coords.len(),
        coords.iter().zip(eig.eigenvalues.iter()).map(|(c, &l)| {
            if l > PINV_THRESHOLD * top {
                c / l
            } else {
                0.0
            }
        }),
    );
    &eig.eigenvectors * scaled
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OuterSketch {
    /// `m = c·ε⁻¹(s_λ + ln(1/ε))·ln(s_λ/ε)` rows, with `s_λ` measured on `ZᵀZ`.
    Auto { constant: f64 },
    Rows(usize),
    /// No outer sketch (`S = I`).
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KrrOptions {
    pub size: SketchSize,
    pub delta: f64,
    pub outer: OuterSketch,
}

impl Default for KrrOptions {
    fn default() -> Self {
        Self {
            size: SketchSize::default(),
            delta: 0.1,
            outer: OuterSketch::Auto { constant: 1.0 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KrrReport {
    /// Rows of `Z`.
    pub t: usize,
    pub outer_rows: usize,
    /// `s_λ(ZᵀZ)`.
    pub s_lambda: f64,
    pub lambda_max: f64,
    /// Whether `λ < ε⁻²·λ_max(K)` holds.
    pub hypothesis_holds: bool,
    pub jitter_used: bool,
}

/// `‖Kx − y‖² + λ·xᵀKx`.
pub fn krr_cost(k: &DMatrix<f64>, x: &[f64], y: &[f64], lambda: f64) -> f64 {
    let x = DVector::from_column_slice(x);
    let kx = k * &x;
    (&kx - DVector::from_column_slice(y)).norm_squared() + lambda * x.dot(&kx)
}

/// Degree-`p` polynomial kernel ridge regression through a tensor sketch `Z`
/// and an outer SRHT sized by the statistical dimension. Returns `x*` and its
/// cost under the exact kernel.
pub fn krr_solve(
    x: &DataMatrix,
    y: &[f64],
    p: usize,
    lambda: f64,
    eps: f64,
    seed: u64,
    opts: &KrrOptions,
) -> Result<(Vec<f64>, f64, KrrReport)> {
    check_open_unit("eps", eps)?;
    if y.len() != x.len() {
        return Err(SketchError::InvalidDimension(format!(
            "y has length {}, X has {} columns",
            y.len(),
            x.len()
        )));
    }
    let (n, d) = (x.len(), x.dim());
    let t = opts.size.resolve(n, d, p, eps, opts.delta)?;
    let z = TensorSketcher::new(d, t, p, seed)?.sketch_matrix(x)?.values;
    let problem = RidgeProblem::new(z, y.to_vec(), lambda)?;
    let s_lambda = statistical_dimension(&problem.gram(), lambda)?;

    let s = match opts.outer {
        OuterSketch::Identity => DMatrix::identity(n, n),
        OuterSketch::Rows(rows) => srht_dense(n, rows, seed)?,
        OuterSketch::Auto { constant } => {
            let rows = constant * (s_lambda + (1.0 / eps).ln()) * (s_lambda / eps).max(1.0f64.exp()).ln()
                / eps;
            srht_dense(n, (rows.ceil() as usize).max(1), seed)?
        }
    };
    let (x_star, jitter_used) = problem.solve_sketched(&s)?;

    let k = poly_kernel_exact(x, p);
    let lambda_max = SymmetricEigen::new(k.clone()).eigenvalues.max();
    let cost = krr_cost(&k, &x_star, y, lambda);
    let report = KrrReport {
        t,
        outer_rows: s.nrows(),
        s_lambda,
        lambda_max,
        hypothesis_holds: lambda < lambda_max / (eps * eps),
        jitter_used,
    };
    Ok((x_star, cost, report))
}

fn srht_dense(n: usize, rows: usize, seed: u64) -> Result<DMatrix<f64>> {
    Ok(SrhtSketch::new(n, rows, derive_seed(seed, role::SOLVER_OUTER, 0))?.to_dense())
}

/// Exact minimizer of `‖Kx − y‖² + λxᵀKx` for `K = (XᵀX)^{∘p}` from the
/// stationarity system `(K² + λK)x = Ky`, solved in the eigenbasis of `K`.
pub fn krr_exact(x: &DataMatrix, y: &[f64], p: usize, lambda: f64) -> Result<(Vec<f64>, f64)> {
    let n = x.len();
    if n > KRR_EXACT_GUARD {
        return Err(SketchError::GuardExceeded(format!(
            "exact KRR is limited to n <= {KRR_EXACT_GUARD}, got {n}"
        )));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(SketchError::InvalidParameter(format!(
            "lambda must be finite and non-negative, got {lambda}"
        )));
    }
    if y.len() != n {
        return Err(SketchError::InvalidDimension(format!(
            "y has length {}, X has {n} columns",
            y.len()
        )));
    }
    let k = poly_kernel_exact(x, p);
    let eig = SymmetricEigen::new(k.clone());
    let top = eig.eigenvalues.max().max(0.0);
    let coords = eig.eigenvectors.transpose() * DVector::from_column_slice(y);
    // Per eigenpair: (μ² + λμ)·x̃ = μ·ỹ, i.e. x̃ = ỹ/(μ + λ) on the range of K.
    let solved = DVector::from_iterator(
        n,
        coords.iter().zip(eig.eigenvalues.iter()).map(|(c, &mu)| {
            if mu > PINV_THRESHOLD * top {
                c / (mu + lambda)
            } else {
                0.0
            }
        }),
    );
    let x_opt = (&eig.eigenvectors * solved).as_slice().to_vec();
    let opt = krr_cost(&k, &x_opt, y, lambda);
    Ok((x_opt, opt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
        rand_chacha::ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_matrix(r: usize, c: usize, seed: u64) -> DMatrix<f64> {
        let mut g = rng(seed);
        DMatrix::from_fn(r, c, |_, _| g.random_range(-1.0..1.0))
    }

    fn ball_data(d: usize, n: usize, seed: u64) -> DataMatrix {
        let mut g = rng(seed);
        let mut m = random_matrix(d, n, seed + 1000);
        for mut c in m.column_iter_mut() {
            c.normalize_mut();
            c *= g.random_range(0.2..1.0);
        }
        DataMatrix::new(m).unwrap()
    }

    fn small_opts() -> PrecondOptions {
        PrecondOptions {
            kernel: KernelSketchOptions {
                size: SketchSize::Explicit(1024),
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn condition_number_cases() {
        assert_eq!(condition_number(&DMatrix::identity(3, 3)).unwrap(), 1.0);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0]));
        assert_relative_eq!(condition_number(&d).unwrap(), 4.0, epsilon = 1e-14);
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(condition_number(&singular).unwrap(), f64::INFINITY);
        assert!(condition_number(&DMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn condition_number_product_inequality() {
        for seed in 0..20 {
            let a = random_matrix(6, 6, seed);
            let b = random_matrix(6, 6, seed + 100);
            let kb = condition_number(&b).unwrap();
            let bound = condition_number(&(&a * &b)).unwrap() * condition_number(&a).unwrap();
            assert!(kb <= bound * (1.0 + 1e-12), "{kb} > {bound}");
        }
    }

    #[test]
    fn statistical_dimension_cases() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0]));
        assert_eq!(statistical_dimension(&d, 1.0).unwrap(), 2.0 / 3.0 + 1.0 / 2.0);
        let full = random_matrix(5, 5, 3);
        let k = full.transpose() * &full;
        assert_relative_eq!(statistical_dimension(&k, 0.0).unwrap(), 5.0);
        let mut prev = f64::INFINITY;
        for lambda in [0.0, 0.1, 1.0, 10.0, 1e3, 1e6, 1e12] {
            let s = statistical_dimension(&k, lambda).unwrap();
            assert!(s <= prev + 1e-12);
            prev = s;
        }
        assert!(prev < 1e-9);
        let low_rank = random_matrix(2, 5, 4);
        let k2 = low_rank.transpose() * &low_rank;
        assert!(statistical_dimension(&k2, 0.5).unwrap() <= 2.0);
        assert_relative_eq!(statistical_dimension(&k2, 0.0).unwrap(), 2.0);
        assert!(statistical_dimension(&k, -1.0).is_err());
    }

    #[test]
    fn krr_exact_degenerate_cases() {
        let x = DataMatrix::new(DMatrix::identity(3, 3)).unwrap();
        let y = vec![1.0, -2.0, 0.5];
        let (x_opt, opt) = krr_exact(&x, &y, 2, 0.0).unwrap();
        for (a, b) in x_opt.iter().zip(&y) {
            assert_relative_eq!(a, b, epsilon = 1e-14);
        }
        assert!(opt < 1e-28);

        // K = (XᵀX)² has null space spanned by (1, −1) when both columns coincide.
        let dup = DataMatrix::from_columns(&[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let y = vec![1.0, -1.0];
        let (x_opt, opt) = krr_exact(&dup, &y, 2, 0.7).unwrap();
        assert!(x_opt.iter().all(|v| v.abs() < 1e-14));
        assert_relative_eq!(opt, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn krr_exact_zeroes_the_gradient() {
        let x = DataMatrix::new(random_matrix(5, 8, 7)).unwrap();
        let y: Vec<f64> = (0..8).map(|i| (i as f64 * 0.7).sin()).collect();
        let (lambda, p) = (0.3, 2);
        let (x_opt, _) = krr_exact(&x, &y, p, lambda).unwrap();
        let k = poly_kernel_exact(&x, p);
        let h = 1e-6;
        let ynorm = DVector::from_column_slice(&y).norm();
        let mut grad2 = 0.0;
        for i in 0..8 {
            let mut plus = x_opt.clone();
            let mut minus = x_opt.clone();
            plus[i] += h;
            minus[i] -= h;
            let g = (krr_cost(&k, &plus, &y, lambda) - krr_cost(&k, &minus, &y, lambda)) / (2.0 * h);
            grad2 += g * g;
        }
        assert!(grad2.sqrt() <= 1e-6 * ynorm, "{}", grad2.sqrt());
        assert!(krr_exact(&DataMatrix::new(random_matrix(2, 513, 1)).unwrap(), &[0.0; 513], 2, 0.1)
            .is_err());
    }

    #[test]
    fn krr_identity_outer_sketch_solves_kernel_system() {
        let x = DataMatrix::new(random_matrix(6, 4, 12)).unwrap();
        let y = vec![0.5, -1.0, 0.25, 2.0];
        let opts = KrrOptions {
            size: SketchSize::Explicit(4096),
            outer: OuterSketch::Identity,
            ..Default::default()
        };
        let (x_star, cost, report) = krr_solve(&x, &y, 2, 0.0, 0.25, 5, &opts).unwrap();
        assert_eq!(report.outer_rows, 4);
        let k = poly_kernel_exact(&x, 2);
        let r = (&k * DVector::from_column_slice(&x_star) - DVector::from_column_slice(&y)).norm();
        assert!(r <= 0.25 * DVector::from_column_slice(&y).norm(), "{r}");
        let (_, opt) = krr_exact(&x, &y, 2, 0.0).unwrap();
        assert!(cost >= opt);
    }

    #[test]
    fn krr_cost_never_beats_optimum() {
        let x = DataMatrix::new(random_matrix(6, 8, 21)).unwrap();
        let y: Vec<f64> = (0..8).map(|i| i as f64 - 3.5).collect();
        let (_, opt) = krr_exact(&x, &y, 2, 0.5).unwrap();
        for seed in 0..5 {
            let (_, cost, _) = krr_solve(&x, &y, 2, 0.5, 0.25, seed, &KrrOptions::default()).unwrap();
            assert!(cost >= opt * (1.0 - 1e-12));
        }
    }

    #[test]
    fn precond_scalar_and_zero_rhs() {
        let x = DataMatrix::from_columns(&[vec![0.3, -0.4]]).unwrap();
        let (x_hat, report) = precond_gd_solve(&x, &[2.5], 0.1, 0.1, 3, &small_opts()).unwrap();
        assert!((x_hat[0] - 2.5).abs() <= 0.1 * 2.5, "{x_hat:?}");
        assert!(report.iterations <= report.iteration_cap);

        let x = ball_data(4, 3, 1);
        let (x_hat, report) = precond_gd_solve(&x, &[0.0; 3], 0.1, 0.1, 3, &small_opts()).unwrap();
        assert_eq!(x_hat, vec![0.0; 3]);
        assert_eq!(report.iterations, 0);
    }

    #[test]
    fn precond_preconditioner_quality_and_contraction() {
        let x = ball_data(6, 5, 9);
        let y = vec![1.0, -0.5, 0.3, 2.0, -1.2];
        let (x_hat, report) = precond_gd_solve(&x, &y, 0.1, 0.1, 11, &small_opts()).unwrap();
        assert!(report.orthonormality_error < 1e-8);
        assert!(report.kappa_hat <= 1.3, "{}", report.kappa_hat);
        let pr = &report.preconditioned_residuals;
        assert!(pr.windows(2).all(|w| w[1] <= 0.9 * w[0]), "{pr:?}");
        let g = crate::kernels::gaussian_kernel_exact(&x);
        let yv = DVector::from_column_slice(&y);
        let res = (&g * DVector::from_column_slice(&x_hat) - &yv).norm();
        assert!(res <= 0.1 * yv.norm(), "{res}");
    }

    #[test]
    fn precond_rejects_bad_inputs() {
        let dup = DataMatrix::from_columns(&[vec![0.5, 0.1], vec![0.5, 0.1]]).unwrap();
        assert!(matches!(
            precond_gd_solve(&dup, &[1.0, 2.0], 0.1, 0.1, 1, &small_opts()),
            Err(SketchError::PreconditionerFailure(_))
        ));
        let big = DataMatrix::from_columns(&[vec![2.0, 0.0]]).unwrap();
        assert!(matches!(
            precond_gd_solve(&big, &[1.0], 0.1, 0.1, 1, &small_opts()),
            Err(SketchError::InvalidParameter(_))
        ));
        let x = ball_data(3, 2, 2);
        assert!(precond_gd_solve(&x, &[1.0], 0.1, 0.1, 1, &small_opts()).is_err());
        assert!(precond_gd_solve(&x, &[1.0, 1.0], 1.5, 0.1, 1, &small_opts()).is_err());
    }
}
