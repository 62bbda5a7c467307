//! Taylor series of dot-product kernels and the plans that truncate or sample them.
//!
//! A kernel here is `K = Σ_j a_j (XᵀX)^{∘e_j} + Σ_l C_l (XᵀX)^{∘deg(l)}`: a few
//! always-exact leading terms followed by the series proper, whose term `l` has
//! coefficient `C_l > 0` and degree `deg(l) = step·l + offset`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{check_open_unit, Result, SketchError};

/// Terms summed before the remainder is extrapolated as a power law.
const POWER_LAW_START: usize = 1 << 14;
/// Give up on closing the tail beyond this many terms.
const MAX_TAIL_TERMS: usize = 1 << 22;
/// Central binomials up to this index are computed by exact products.
const NTK_PRODUCT_LIMIT: usize = 30;

type CoefficientFn = dyn Fn(usize) -> f64 + Send + Sync;

#[derive(Clone)]
pub struct PowerSeries {
    name: String,
    coefficient: Arc<CoefficientFn>,
    degree_step: usize,
    degree_offset: usize,
    leading: Vec<(usize, f64)>,
}

impl fmt::Debug for PowerSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PowerSeries")
            .field("name", &self.name)
            .field("degree_step", &self.degree_step)
            .field("degree_offset", &self.degree_offset)
            .field("leading", &self.leading)
            .finish()
    }
}

impl PowerSeries {
    /// Series `Σ_l C_l (XᵀX)^{∘l}`.
    pub fn new<F>(name: impl Into<String>, coefficient: F) -> Self
    where
        F: Fn(usize) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            coefficient: Arc::new(coefficient),
            degree_step: 1,
            degree_offset: 0,
            leading: Vec::new(),
        }
    }

    /// `C_l = 1/l!`, the series of `exp(xᵀz)`.
    pub fn exponential() -> Self {
        Self::new("exponential", |l| {
            if l <= 170 {
                1.0 / (1..=l).map(|k| k as f64).product::<f64>()
            } else {
                (-ln_gamma(l as f64 + 1.0)).exp()
            }
        })
    }

    /// `C_l = (l+1)^{−a}`.
    pub fn inverse_power(a: f64) -> Self {
        Self::new(format!("inverse_power({a})"), move |l| {
            (l as f64 + 1.0).powf(-a)
        })
    }

    /// `f(s) = s/4 + Σ_l C_l s^{2l+2}`, the Taylor series of the NTK profile.
    pub fn ntk() -> Self {
        Self::new("ntk", ntk_coefficient)
            .with_degrees(2, 2)
            .with_leading(vec![(1, 0.25)])
    }

    /// Term `l` has degree `step·l + offset`.
    pub fn with_degrees(mut self, step: usize, offset: usize) -> Self {
        self.degree_step = step;
        self.degree_offset = offset;
        self
    }

    /// `(degree, coefficient)` pairs sketched exactly in front of the series.
    pub fn with_leading(mut self, leading: Vec<(usize, f64)>) -> Self {
        self.leading = leading;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn coefficient(&self, l: usize) -> f64 {
        (self.coefficient)(l)
    }

    pub fn degree(&self, l: usize) -> usize {
        self.degree_step * l + self.degree_offset
    }

    pub fn leading(&self) -> &[(usize, f64)] {
        &self.leading
    }

    /// Bound on the Frobenius norm of term `l` over `n` points of radius `r`:
    /// `n·C_l·r^{2·deg(l)}`.
    pub fn term_bound(&self, l: usize, n: usize, r: f64) -> f64 {
        let deg = self.degree(l);
        let r2 = r * r;
        let power = if deg == 0 {
            1.0
        } else if r2 == 0.0 {
            0.0
        } else {
            (deg as f64 * r2.ln()).exp()
        };
        n as f64 * self.coefficient(l) * power
    }

    /// Tail bounds `tails[q] = Σ_{l>q} n·C_l·r^{2·deg(l)}` for every `q` up to
    /// the point where the remainder is negligible or certified below `target`.
    ///
    /// Summation stops when terms underflow below 1e−300, when a ratio test
    /// closes the remainder to below 1e−17 of the running sum (and half the
    /// target), or — for power-law coefficients at unit radius — after
    /// [`POWER_LAW_START`] terms with the remainder `t_L·(L+1)/(α−1)` from the
    /// fitted decay exponent α.
    pub fn tail_bounds(&self, n: usize, r: f64, target: f64) -> Result<Vec<f64>> {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(SketchError::InvalidParameter(format!(
                "radius must be finite and non-negative, got {r}"
            )));
        }
        let mut terms: Vec<f64> = Vec::new();
        let mut remainder = None;
        let mut sum = 0.0;
        for l in 0..MAX_TAIL_TERMS {
            let t = self.term_bound(l, n, r);
            if !t.is_finite() || t < 0.0 {
                return Err(divergent(self, r));
            }
            terms.push(t);
            sum += t;
            if l == 0 {
                continue;
            }
            if t < 1e-300 {
                if r == 0.0 || terms[l - 1] < 1e-300 || ratio_closes(&terms) {
                    remainder = Some(0.0);
                    break;
                }
                continue;
            }
            let prev = terms[l - 1];
            let rho = if prev > 0.0 { t / prev } else { f64::INFINITY };
            if rho < 0.999 {
                let rest = t * rho / (1.0 - rho);
                if rest <= (1e-17 * sum).min(0.5 * target) {
                    remainder = Some(rest);
                    break;
                }
            }
            if l >= POWER_LAW_START {
                let half = terms[l / 2];
                let alpha = (half / t).ln() / ((l as f64 + 1.0) / (l as f64 / 2.0 + 1.0)).ln();
                if !(alpha > 1.0) {
                    return Err(divergent(self, r));
                }
                if l.is_power_of_two() {
                    let rest = t * (l as f64 + 1.0) / (alpha - 1.0);
                    if rest <= 0.5 * target {
                        remainder = Some(rest);
                        break;
                    }
                }
            }
        }
        let remainder = remainder.ok_or_else(|| {
            SketchError::InvalidParameter(format!(
                "tail of series '{}' at radius {r} cannot be bounded below {target:e} within {MAX_TAIL_TERMS} terms",
                self.name
            ))
        })?;
        // Sum back to front so small tails keep full relative accuracy.
        let mut tails = vec![0.0; terms.len()];
        let mut acc = remainder;
        for q in (0..terms.len()).rev() {
            tails[q] = acc;
            acc += terms[q];
        }
        Ok(tails)
    }

    /// Smallest `q` with `Σ_{l>q} n·C_l·r^{2·deg(l)} ≤ target`, and that tail.
    pub fn truncation(&self, n: usize, r: f64, target: f64) -> Result<(usize, f64)> {
        let tails = self.tail_bounds(n, r, target)?;
        tails
            .iter()
            .position(|&t| t <= target)
            .map(|q| (q, tails[q]))
            .ok_or_else(|| divergent(self, r))
    }
}

fn ratio_closes(terms: &[f64]) -> bool {
    let k = terms.len();
    k >= 3 && terms[k - 1] <= terms[k - 2] && terms[k - 2] <= terms[k - 3]
}

fn divergent(series: &PowerSeries, r: f64) -> SketchError {
    SketchError::InvalidParameter(format!(
        "series '{}' diverges (or cannot be truncated) at radius {r}",
        series.name
    ))
}

/// NTK Taylor coefficient `C_l = binom(2l, l)·4^{−l} / ((2l+1)·2π)`.
pub fn ntk_coefficient(l: usize) -> f64 {
    let central = if l <= NTK_PRODUCT_LIMIT {
        (1..=l).fold(1.0, |acc, k| acc * (2 * k - 1) as f64 / (2 * k) as f64)
    } else {
        let lf = l as f64;
        (ln_gamma(2.0 * lf + 1.0) - 2.0 * ln_gamma(lf + 1.0) - lf * 4f64.ln()).exp()
    };
    central / ((2 * l + 1) as f64 * 2.0 * PI)
}

/// `f(s) ≈ s/4 + Σ_{l≤q} C_l s^{2l+2}`.
pub fn ntk_series_partial(s: f64, q: usize) -> f64 {
    s / 4.0
        + (0..=q)
            .map(|l| ntk_coefficient(l) * s.powi(2 * l as i32 + 2))
            .sum::<f64>()
}

/// Upper bound on `Σ_{l>q} C_l s^{2l+2}` for `|s| < 1`: the coefficients decrease,
/// so the tail is at most `C_{q+1}·s^{2q+4}/(1−s²)`.
pub fn ntk_series_tail_bound(s: f64, q: usize) -> f64 {
    let s2 = s * s;
    if s2 >= 1.0 {
        return f64::INFINITY;
    }
    ntk_coefficient(q + 1) * s2.powi(q as i32 + 2) / (1.0 - s2)
}

/// One degree eligible for sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampledTerm {
    pub term: usize,
    pub degree: usize,
    pub coefficient: f64,
    /// `C_l / T'`.
    pub probability: f64,
}

/// Which terms of a series are sketched exactly and which are sampled.
#[derive(Debug, Clone)]
pub struct TaylorPlan {
    pub series: PowerSeries,
    /// Last term kept; terms beyond `q` are dropped.
    pub q: usize,
    /// Terms `0..=s` are sketched exactly; `s = q` when nothing is sampled.
    pub s: usize,
    /// `Σ_{l>q} n·C_l·r^{2·deg(l)}` at the chosen `q`.
    pub tail_bound: f64,
    /// Terms `s+1..=q` with their sampling probabilities.
    pub sampled: Vec<SampledTerm>,
    /// `T' = Σ_{l=s+1}^{q} C_l`.
    pub tail_mass: f64,
    pub m_samples: usize,
    /// Gaussian kernels carry `D = diag(exp(−‖xᵢ‖²/2))` on both sides.
    pub diagonal_prefactor: bool,
    pub p_exponent: Option<f64>,
    /// The asymptotic truncation formula at constant 1, for comparison with `q`.
    pub q_asymptotic: f64,
}

impl TaylorPlan {
    /// Keeps every term up to the smallest `q` with tail `≤ ε/2`.
    pub fn truncated(
        series: PowerSeries,
        n: usize,
        r: f64,
        eps: f64,
        p_exponent: Option<f64>,
    ) -> Result<Self> {
        check_open_unit("eps", eps)?;
        let (q, tail_bound) = series.truncation(n, r, eps / 2.0)?;
        let q_asymptotic = match p_exponent {
            Some(p) => r * r + (n as f64 / eps).powf(1.0 / p),
            None => r * r + (n as f64 / eps).ln(),
        };
        let mut plan = Self::with_split(series, q, q, 0)?;
        plan.tail_bound = tail_bound;
        plan.p_exponent = p_exponent;
        plan.q_asymptotic = q_asymptotic;
        Ok(plan)
    }

    /// Truncates at `ε/2`, sketches an exact prefix of size `s` chosen from the
    /// exponent `p ∈ (1, 3)`, and samples `m_samples = c·ε⁻²n²s^{−2p}·ln(n/δ)`
    /// degrees from the rest.
    pub fn sampled(
        series: PowerSeries,
        n: usize,
        r: f64,
        eps: f64,
        delta: f64,
        p: f64,
        sample_constant: f64,
    ) -> Result<Self> {
        check_open_unit("delta", delta)?;
        if !(p > 1.0 && p < 3.0) {
            return Err(SketchError::InvalidParameter(format!(
                "sampling needs an exponent in (1, 3), got {p}"
            )));
        }
        if !(sample_constant > 0.0 && sample_constant.is_finite()) {
            return Err(SketchError::InvalidParameter(format!(
                "sample constant must be positive, got {sample_constant}"
            )));
        }
        let base = Self::truncated(series, n, r, eps, Some(p))?;
        let nf = n as f64;
        let s_raw = if p > 2.0 {
            (nf / eps).powf(2.0 / (1.0 + 2.0 * p))
        } else {
            nf.powf((2.0 + 2.0 / p) / (3.0 + 2.0 * p)) / eps.powf(2.0 / (3.0 + 2.0 * p))
        };
        let s = (s_raw.ceil() as usize).min(base.q);
        let m_samples = if s < base.q {
            let m = sample_constant * nf * nf * (s as f64).powf(-2.0 * p) * (nf / delta).ln()
                / (eps * eps);
            (m.ceil() as usize).max(1)
        } else {
            0
        };
        let mut plan = Self::with_split(base.series, base.q, s, m_samples)?;
        plan.tail_bound = base.tail_bound;
        plan.p_exponent = Some(p);
        plan.q_asymptotic = base.q_asymptotic;
        Ok(plan)
    }

    /// A plan with explicit `q`, `s` and sample count.
    pub fn with_split(series: PowerSeries, q: usize, s: usize, m_samples: usize) -> Result<Self> {
        if s > q {
            return Err(SketchError::InvalidParameter(format!(
                "exact prefix s={s} exceeds truncation q={q}"
            )));
        }
        for l in 0..=q {
            let c = series.coefficient(l);
            if !(c > 0.0 && c.is_finite()) {
                return Err(SketchError::InvalidParameter(format!(
                    "coefficient C_{l} = {c} of series '{}' is not positive",
                    series.name()
                )));
            }
        }
        let tail_mass: f64 = (s + 1..=q).map(|l| series.coefficient(l)).sum();
        let sampled = (s + 1..=q)
            .map(|l| {
                let c = series.coefficient(l);
                SampledTerm {
                    term: l,
                    degree: series.degree(l),
                    coefficient: c,
                    probability: c / tail_mass,
                }
            })
            .collect();
        Ok(Self {
            series,
            q,
            s,
            tail_bound: f64::NAN,
            sampled,
            tail_mass,
            m_samples: if s == q { 0 } else { m_samples },
            diagonal_prefactor: false,
            p_exponent: None,
            q_asymptotic: f64::NAN,
        })
    }

    pub fn with_diagonal_prefactor(mut self) -> Self {
        self.diagonal_prefactor = true;
        self
    }

    pub fn is_sampled(&self) -> bool {
        self.m_samples > 0
    }
}

/// Expected term index `Σ_l p_l·l` of one draw from the sampled range.
pub fn expected_sampled_degree(plan: &TaylorPlan) -> Result<f64> {
    if plan.sampled.is_empty() {
        return Err(SketchError::UndefinedValue(
            "plan has no sampled range".into(),
        ));
    }
    Ok(plan
        .sampled
        .iter()
        .map(|t| t.probability * t.term as f64)
        .sum())
}

/// Smallest `q` with `Σ_{l>q} n·r^{2l}/l! ≤ ε/2`.
pub fn gaussian_truncation_degree(r: f64, n: usize, eps: f64) -> Result<usize> {
    check_open_unit("eps", eps)?;
    if n == 0 {
        return Err(SketchError::InvalidDimension("n must be at least 1".into()));
    }
    Ok(PowerSeries::exponential().truncation(n, r, eps / 2.0)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn factorial(l: usize) -> f64 {
        (1..=l).map(|k| k as f64).product()
    }

    #[test]
    fn gaussian_truncation_small_cases() {
        assert_eq!(gaussian_truncation_degree(0.0, 5, 0.1).unwrap(), 0);
        for n in [1, 4, 8] {
            let q1 = gaussian_truncation_degree(1.0, n, 0.1).unwrap();
            let q2 = gaussian_truncation_degree(2.0, n, 0.1).unwrap();
            assert!(q1 <= q2);
        }
        // Σ_{l>q} 8/l! ≤ 0.05 by brute force.
        let tail = |q: usize| (q + 1..40).map(|l| 8.0 / factorial(l)).sum::<f64>();
        let expected = (0..40).find(|&q| tail(q) <= 0.05).unwrap();
        assert_eq!(expected, 5);
        assert_eq!(gaussian_truncation_degree(1.0, 8, 0.1).unwrap(), expected);
    }

    #[test]
    fn inverse_cube_truncation_matches_direct_sum() {
        // Σ_{l>q} 8/(l+1)³ ≤ 0.125, with the tail past 10⁶ terms closed by an integral.
        let tail = |q: usize| {
            let cutoff = 1_000_000usize;
            let head: f64 = (q + 1..cutoff).map(|l| 8.0 / ((l + 1) as f64).powi(3)).sum();
            head + 8.0 / (2.0 * (cutoff as f64).powi(2))
        };
        let expected = (0..100).find(|&q| tail(q) <= 0.125).unwrap();
        let (q, bound) = PowerSeries::inverse_power(3.0).truncation(8, 1.0, 0.125).unwrap();
        assert_eq!(q, expected);
        assert_relative_eq!(bound, tail(q), max_relative = 1e-4);
    }

    #[test]
    fn tails_are_monotone() {
        for series in [PowerSeries::exponential(), PowerSeries::inverse_power(2.5), PowerSeries::ntk()] {
            let tails = series.tail_bounds(4, 1.0, 0.01).unwrap();
            assert!(tails.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn divergent_series_rejected() {
        let err = PowerSeries::inverse_power(2.0).truncation(4, 1.5, 0.1).unwrap_err();
        assert!(matches!(err, SketchError::InvalidParameter(_)));
        assert!(PowerSeries::inverse_power(0.5).truncation(4, 1.0, 0.1).is_err());
    }

    #[test]
    fn ntk_coefficients() {
        assert_relative_eq!(ntk_coefficient(0), 1.0 / (2.0 * PI), epsilon = 1e-16);
        assert_relative_eq!(ntk_coefficient(0), 0.159155, epsilon = 1e-6);
        assert_relative_eq!(ntk_coefficient(1), 1.0 / (12.0 * PI), epsilon = 1e-16);
        assert_relative_eq!(ntk_coefficient(1), 0.026526, epsilon = 1e-6);
        for l in 1..=50usize {
            let lf = l as f64;
            let c = ntk_coefficient(l);
            let lower = 1.0 / ((4.0 * lf).sqrt() * (2.0 * lf + 1.0) * 2.0 * PI);
            let upper = 1.0 / ((3.0 * lf + 1.0).sqrt() * (2.0 * lf + 1.0) * 2.0 * PI);
            assert!(lower <= c && c <= upper, "l={l}: {lower} <= {c} <= {upper}");
        }
        // The product and log-gamma branches agree where they meet.
        let lf = 31.0f64;
        let via_gamma = (ln_gamma(2.0 * lf + 1.0) - 2.0 * ln_gamma(lf + 1.0) - lf * 4f64.ln()).exp()
            / (63.0 * 2.0 * PI);
        let via_product = (1..=31).fold(1.0, |a, k| a * (2 * k - 1) as f64 / (2 * k) as f64)
            / (63.0 * 2.0 * PI);
        assert_relative_eq!(via_gamma, via_product, max_relative = 1e-12);
        assert!(ntk_coefficient(10_000).is_finite() && ntk_coefficient(10_000) > 0.0);
    }

    #[test]
    fn ntk_series_matches_closed_form() {
        let f = crate::kernels::ntk_scalar(0.5).unwrap();
        for q in [0, 3, 10] {
            let err = f - ntk_series_partial(0.5, q);
            assert!(err >= -1e-15 && err <= ntk_series_tail_bound(0.5, q) + 1e-15);
        }
    }

    #[test]
    fn expected_degree_cases() {
        let single = TaylorPlan::with_split(PowerSeries::inverse_power(2.0), 5, 4, 3).unwrap();
        assert_eq!(expected_sampled_degree(&single).unwrap(), 5.0);

        let uniform = TaylorPlan::with_split(PowerSeries::new("flat", |_| 1.0), 4, 2, 3).unwrap();
        assert_relative_eq!(expected_sampled_degree(&uniform).unwrap(), 3.5, epsilon = 1e-15);

        let none = TaylorPlan::with_split(PowerSeries::exponential(), 3, 3, 0).unwrap();
        assert!(matches!(expected_sampled_degree(&none), Err(SketchError::UndefinedValue(_))));
    }

    #[test]
    fn expected_degree_inverse_power_bound() {
        // C_l = l^{−2.5} (C_0 is never sampled, any positive value works).
        let series = PowerSeries::new("l^-2.5", |l| (l.max(1) as f64).powf(-2.5));
        let (s, q, p) = (4usize, 100usize, 2.5f64);
        let plan = TaylorPlan::with_split(series, q, s, 1).unwrap();
        let d = expected_sampled_degree(&plan).unwrap();
        let num: f64 = (s + 1..=q).map(|l| (l as f64).powf(1.0 - p)).sum();
        let den: f64 = (s + 1..=q).map(|l| (l as f64).powf(-p)).sum();
        assert_relative_eq!(d, num / den, max_relative = 1e-12);
        // Integral comparison bound: Σ l^{1−p} ≤ ∫_s^q, Σ l^{−p} ≥ ∫_{s+1}^{q+1}.
        let (sf, qf) = (s as f64, q as f64);
        let upper = (p - 1.0) / (p - 2.0) * (sf.powf(2.0 - p) - qf.powf(2.0 - p))
            / ((sf + 1.0).powf(1.0 - p) - (qf + 1.0).powf(1.0 - p));
        assert!(d <= upper, "{d} <= {upper}");
        assert!(d > sf);
    }

    #[test]
    fn sampled_plan_probabilities_and_prefix() {
        let plan = TaylorPlan::sampled(PowerSeries::inverse_power(2.5), 4, 1.0, 0.3, 0.1, 2.5, 1.0)
            .unwrap();
        assert!(plan.s <= plan.q);
        let total: f64 = plan.sampled.iter().map(|t| t.probability).sum();
        if !plan.sampled.is_empty() {
            assert_relative_eq!(total, 1.0, epsilon = 1e-12);
        }
        assert!(plan.tail_bound <= 0.15);
        assert!(TaylorPlan::with_split(PowerSeries::exponential(), 2, 3, 0).is_err());
    }
}
