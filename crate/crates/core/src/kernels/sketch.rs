//! Sketched kernel matrices: one tensor sketch per kept (or sampled) Taylor term,
//! scaled and stacked.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use serde::{Deserialize, Serialize};

use super::series::{PowerSeries, TaylorPlan};
use crate::data::DataMatrix;
use crate::error::{check_open_unit, Result, SketchError};
use crate::rng::{derive_seed, role, stream};
use crate::tensor_sketch::{SketchSize, SketchedMatrix, TensorSketcher};

/// Leading constant of the sample count `c·ε⁻²n²s^{−2p}·ln(n/δ)`.
pub const DEFAULT_SAMPLE_CONSTANT: f64 = 1.0;
/// Inputs may exceed unit radius by this much where unit radius is required.
pub const RADIUS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSketchOptions {
    pub size: SketchSize,
    pub sample_constant: f64,
}

impl Default for KernelSketchOptions {
    fn default() -> Self {
        Self {
            size: SketchSize::default(),
            sample_constant: DEFAULT_SAMPLE_CONSTANT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockRole {
    Leading,
    Exact,
    Sampled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelBlock {
    pub role: BlockRole,
    /// Series index `l` (position in the leading list for leading blocks).
    pub term: usize,
    pub degree: usize,
    /// `α`: the block enters the Gram as `α²·ZᵀZ`.
    pub scale: f64,
    pub sketch: SketchedMatrix,
}

/// `W = (⊕ α_l Z_l)·D`.
#[derive(Debug, Clone)]
pub struct SketchedKernel {
    pub blocks: Vec<KernelBlock>,
    pub diagonal: Option<Vec<f64>>,
    pub m_total: usize,
    pub n: usize,
    pub plan: TaylorPlan,
    /// For sampled plans, whether `‖K̂‖_op ≥ (n/ε)·s^{−p}` — the regime where
    /// the exact prefix alone already suffices. Recorded, never acted on.
    pub large_norm_branch: Option<bool>,
}

impl SketchedKernel {
    /// `D(Σ α² ZᵀZ)D`, without forming `W`.
    pub fn gram(&self) -> DMatrix<f64> {
        let mut g = self.partial_gram(|_| true);
        if let Some(d) = &self.diagonal {
            for j in 0..self.n {
                for i in 0..self.n {
                    g[(i, j)] *= d[i] * d[j];
                }
            }
        }
        g
    }

    /// `Σ α² ZᵀZ` over the sampled blocks only (no diagonal): the estimate of
    /// the dropped middle of the series.
    pub fn sampled_gram(&self) -> DMatrix<f64> {
        self.partial_gram(|b| b.role == BlockRole::Sampled)
    }

    fn partial_gram(&self, keep: impl Fn(&KernelBlock) -> bool) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.n, self.n);
        for b in self.blocks.iter().filter(|b| keep(b)) {
            let z = &b.sketch.values;
            g.gemm_tr(b.scale * b.scale, z, z, 1.0);
        }
        (&g + g.transpose()) * 0.5
    }

    /// The stacked `m_total × n` matrix `W`.
    pub fn stacked(&self) -> DMatrix<f64> {
        let mut w = DMatrix::zeros(self.m_total, self.n);
        let mut row = 0;
        for b in &self.blocks {
            let rows = b.sketch.values.nrows();
            w.rows_mut(row, rows).copy_from(&(&b.sketch.values * b.scale));
            row += rows;
        }
        if let Some(d) = &self.diagonal {
            for (j, dj) in d.iter().enumerate() {
                w.column_mut(j).scale_mut(*dj);
            }
        }
        w
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.degree).collect()
    }

    pub fn sampled_degrees(&self) -> Vec<usize> {
        self.blocks
            .iter()
            .filter(|b| b.role == BlockRole::Sampled)
            .map(|b| b.degree)
            .collect()
    }
}

struct BlockSpec {
    role: BlockRole,
    term: usize,
    degree: usize,
    scale: f64,
}

/// Sketches the terms named by `plan`: leading terms, the exact prefix `0..=s`,
/// then `m_samples` degrees drawn with probability `p_l`, each with its own
/// independent sketch. Every block is sized as an `(ε/2, δ/#blocks)` embedding.
pub fn sketch_with_plan(
    x: &DataMatrix,
    plan: &TaylorPlan,
    eps: f64,
    delta: f64,
    seed: u64,
    opts: &KernelSketchOptions,
) -> Result<SketchedKernel> {
    check_open_unit("eps", eps)?;
    check_open_unit("delta", delta)?;
    let series = &plan.series;
    let mut specs: Vec<BlockSpec> = series
        .leading()
        .iter()
        .enumerate()
        .map(|(i, &(degree, c))| BlockSpec {
            role: BlockRole::Leading,
            term: i,
            degree,
            scale: c.sqrt(),
        })
        .collect();
    specs.extend((0..=plan.s).map(|l| BlockSpec {
        role: BlockRole::Exact,
        term: l,
        degree: series.degree(l),
        scale: series.coefficient(l).sqrt(),
    }));
    if plan.m_samples > 0 {
        let weights = WeightedIndex::new(plan.sampled.iter().map(|t| t.probability))
            .map_err(|e| SketchError::InvalidParameter(format!("sampling weights: {e}")))?;
        let mut rng = stream(seed, role::KERNEL_SAMPLING);
        let m = plan.m_samples as f64;
        for _ in 0..plan.m_samples {
            let t = plan.sampled[weights.sample(&mut rng)];
            specs.push(BlockSpec {
                role: BlockRole::Sampled,
                term: t.term,
                degree: t.degree,
                scale: (t.coefficient / (t.probability * m)).sqrt(),
            });
        }
    }

    let delta_block = delta / specs.len() as f64;
    let blocks = specs
        .into_iter()
        .enumerate()
        .map(|(i, spec)| {
            let block_seed = derive_seed(seed, role::KERNEL_BLOCK, i as u64);
            let sketch = sketch_block(x, spec.degree, eps / 2.0, delta_block, block_seed, &opts.size)?;
            Ok(KernelBlock {
                role: spec.role,
                term: spec.term,
                degree: spec.degree,
                scale: spec.scale,
                sketch,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let diagonal = plan
        .diagonal_prefactor
        .then(|| x.squared_norms().iter().map(|s| (-s / 2.0).exp()).collect());
    let m_total = blocks.iter().map(|b| b.sketch.values.nrows()).sum();
    let mut kernel = SketchedKernel {
        blocks,
        diagonal,
        m_total,
        n: x.len(),
        plan: plan.clone(),
        large_norm_branch: None,
    };
    if plan.is_sampled() {
        let p = plan.p_exponent.unwrap_or(1.0);
        let threshold = x.len() as f64 / eps * (plan.s.max(1) as f64).powf(-p);
        let norm = SymmetricEigen::new(kernel.gram()).eigenvalues.max();
        kernel.large_norm_branch = Some(norm >= threshold);
    }
    Ok(kernel)
}

/// `Z_l` for one term: the all-ones row at degree 0, otherwise a fresh tensor sketch.
fn sketch_block(
    x: &DataMatrix,
    degree: usize,
    eps: f64,
    delta: f64,
    seed: u64,
    size: &SketchSize,
) -> Result<SketchedMatrix> {
    if degree == 0 {
        return Ok(SketchedMatrix {
            values: DMatrix::from_element(1, x.len(), 1.0),
            degree: 0,
            seed,
            n: x.len(),
            d: x.dim(),
            m: 1,
        });
    }
    let m = size.resolve(x.len(), x.dim(), degree, eps, delta)?;
    TensorSketcher::new(x.dim(), m, degree, seed)?.sketch_matrix(x)
}

/// `W_g(X) = (⊕_{l≤q} Z_l/√(l!))·D` for the Gaussian kernel.
pub fn gaussian_sketch(
    x: &DataMatrix,
    eps: f64,
    delta: f64,
    seed: u64,
    opts: &KernelSketchOptions,
) -> Result<SketchedKernel> {
    let plan = TaylorPlan::truncated(PowerSeries::exponential(), x.len(), x.radius(), eps, None)?
        .with_diagonal_prefactor();
    sketch_with_plan(x, &plan, eps, delta, seed, opts)
}

/// Every term up to the truncation degree, sketched exactly.
pub fn pconv_sketch(
    x: &DataMatrix,
    series: &PowerSeries,
    p_exponent: f64,
    eps: f64,
    delta: f64,
    seed: u64,
    opts: &KernelSketchOptions,
) -> Result<SketchedKernel> {
    let plan = TaylorPlan::truncated(series.clone(), x.len(), x.radius(), eps, Some(p_exponent))?;
    sketch_with_plan(x, &plan, eps, delta, seed, opts)
}

/// Exact prefix plus coefficient-proportional sampling of the remaining terms.
/// Exponents outside `(1, 3)` fall back to [`pconv_sketch`].
pub fn sampled_pconv_sketch(
    x: &DataMatrix,
    series: &PowerSeries,
    p_exponent: f64,
    eps: f64,
    delta: f64,
    seed: u64,
    opts: &KernelSketchOptions,
) -> Result<SketchedKernel> {
    if !(p_exponent > 1.0 && p_exponent < 3.0) {
        return pconv_sketch(x, series, p_exponent, eps, delta, seed, opts);
    }
    require_unit_radius(x)?;
    let plan = TaylorPlan::sampled(
        series.clone(),
        x.len(),
        x.radius(),
        eps,
        delta,
        p_exponent,
        opts.sample_constant,
    )?;
    sketch_with_plan(x, &plan, eps, delta, seed, opts)
}

/// NTK sketch: a degree-1 block at scale 1/2 plus the even-degree series,
/// whose coefficients decay like `l^{−1.5}`.
pub fn ntk_sketch(
    x: &DataMatrix,
    eps: f64,
    delta: f64,
    seed: u64,
    opts: &KernelSketchOptions,
) -> Result<SketchedKernel> {
    require_unit_radius(x)?;
    sampled_pconv_sketch(x, &PowerSeries::ntk(), 1.5, eps, delta, seed, opts)
}

fn require_unit_radius(x: &DataMatrix) -> Result<()> {
    if x.radius() > 1.0 + RADIUS_TOLERANCE {
        return Err(SketchError::InvalidParameter(format!(
            "data radius {} exceeds 1",
            x.radius()
        )));
    }
    Ok(())
}
