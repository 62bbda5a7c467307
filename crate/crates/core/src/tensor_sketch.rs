//! Sketching `x^{⊗p}` with only two base sketches.
//!
//! A [`TensorSketcher`] holds one SRHT `T: R^d → R^m` and one TensorSRHT
//! `S: R^m × R^m → R^m`. The degree-`p` sketch repeatedly squares:
//! `w₀ = Tx`, `w_l = S(w_{l−1} × w_{l−1})` up to `q = 2^⌊log₂ p⌋`, then folds
//! in the levels named by the remaining set bits of `p` in increasing order.
//! The same `T` and `S` are reused at every node, so the whole sketch is a
//! deterministic function of two seed streams.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{check_open_unit, Result, SketchError};
use crate::oracle::{kron_power_apply, kron_vec};
use crate::rng::{derive_seed, role};
use crate::transforms::{
    ose_dims_raw, round_up_pow2, OseKind, PairScratch, SrhtSketch, TensorSrhtSketch,
    CALIBRATED_OSE_CONSTANT,
};

/// Largest `d^p` accepted by [`TensorSketcher::pi_dense`].
pub const PI_DENSE_GUARD: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq)]
pub struct TensorSketcher {
    t: SrhtSketch,
    s: TensorSrhtSketch,
    degree: usize,
    /// `log₂ q`.
    levels: usize,
    /// Set bits of the degree, increasing.
    bits: Vec<usize>,
    seed: u64,
}

impl TensorSketcher {
    /// Draws `T` and `S` from the two streams of `seed`. `m` must be a power of two.
    pub fn new(input_dim: usize, m: usize, degree: usize, seed: u64) -> Result<Self> {
        if degree == 0 {
            return Err(SketchError::InvalidParameter(
                "sketch degree must be at least 1".into(),
            ));
        }
        if !m.is_power_of_two() {
            return Err(SketchError::InvalidDimension(format!(
                "sketch dimension must be a power of two, got {m}"
            )));
        }
        let t = SrhtSketch::new(input_dim, m, derive_seed(seed, role::SKETCHER_T, 0))?;
        let s = TensorSrhtSketch::new(m, m, derive_seed(seed, role::SKETCHER_S, 0))?;
        let mut sk = Self::from_parts(t, s, degree)?;
        sk.seed = seed;
        Ok(sk)
    }

    pub fn from_parts(t: SrhtSketch, s: TensorSrhtSketch, degree: usize) -> Result<Self> {
        if degree == 0 {
            return Err(SketchError::InvalidParameter(
                "sketch degree must be at least 1".into(),
            ));
        }
        let m = t.output_dim();
        if s.factor_dim() != m || s.output_dim() != m {
            return Err(SketchError::InvalidDimension(format!(
                "TensorSRHT must map R^{m} x R^{m} to R^{m}, got factor {} and output {}",
                s.factor_dim(),
                s.output_dim()
            )));
        }
        let levels = (usize::BITS - 1 - degree.leading_zeros()) as usize;
        let bits = (0..=levels).filter(|&i| degree >> i & 1 == 1).collect();
        Ok(Self {
            t,
            s,
            degree,
            levels,
            bits,
            seed: 0,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn input_dim(&self) -> usize {
        self.t.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.t.output_dim()
    }

    /// `q = 2^⌊log₂ p⌋`.
    pub fn q(&self) -> usize {
        1 << self.levels
    }

    /// Indices of the set bits of `p`.
    pub fn bits(&self) -> &[usize] {
        &self.bits
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn srht(&self) -> &SrhtSketch {
        &self.t
    }

    pub fn tensor_srht(&self) -> &TensorSrhtSketch {
        &self.s
    }

    pub fn sketch_vector(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut ws = Workspace::new(self);
        let mut out = vec![0.0; self.output_dim()];
        self.sketch_into(x, &mut ws, &mut out)?;
        Ok(out)
    }

    fn sketch_into(&self, x: &[f64], ws: &mut Workspace, out: &mut [f64]) -> Result<()> {
        let Workspace {
            padded,
            pair,
            levels,
            z,
            tmp,
        } = ws;
        self.t.apply_with(x, padded, &mut levels[0])?;
        for l in 1..=self.levels {
            let (done, rest) = levels.split_at_mut(l);
            let prev = &done[l - 1];
            self.s.apply_pair_with(prev, prev, pair, &mut rest[0])?;
        }
        let (&lowest, higher) = self.bits.split_first().expect("degree >= 1 has a set bit");
        z.copy_from_slice(&levels[lowest]);
        for &i in higher {
            self.s.apply_pair_with(z, &levels[i], pair, tmp)?;
            std::mem::swap(z, tmp);
        }
        out.copy_from_slice(z);
        Ok(())
    }

    /// Sketches every column of `X`; column `j` of the result is `sketch_vector(X_{*,j})`.
    pub fn sketch_matrix(&self, x: &DataMatrix) -> Result<SketchedMatrix> {
        if x.dim() != self.input_dim() {
            return Err(SketchError::InvalidDimension(format!(
                "sketcher expects {} rows, data has {}",
                self.input_dim(),
                x.dim()
            )));
        }
        let m = self.output_dim();
        let mut values = DMatrix::zeros(m, x.len());
        let mut ws = Workspace::new(self);
        for j in 0..x.len() {
            let out = &mut values.as_mut_slice()[j * m..(j + 1) * m];
            self.sketch_into(x.column(j), &mut ws, out)?;
        }
        Ok(SketchedMatrix {
            values,
            degree: self.degree,
            seed: self.seed,
            n: x.len(),
            d: x.dim(),
            m,
        })
    }

    /// Explicit `Π^p = S¹·S²·S⁴⋯S^{p/2}·T^p` as an `m × d^p` matrix, built from
    /// the dense forms of `T` and `S`. Only for power-of-two `p` and tiny sizes.
    pub fn pi_dense(&self) -> Result<DMatrix<f64>> {
        let p = self.degree;
        if !p.is_power_of_two() {
            return Err(SketchError::InvalidParameter(format!(
                "dense Π^p is defined for power-of-two degrees, got {p}"
            )));
        }
        let d = self.input_dim();
        let cols = d
            .checked_pow(p as u32)
            .filter(|&c| c <= PI_DENSE_GUARD)
            .ok_or_else(|| {
                SketchError::GuardExceeded(format!(
                    "d^p = {d}^{p} exceeds the dense-operator guard {PI_DENSE_GUARD}"
                ))
            })?;
        let t = self.t.to_dense();
        let s = self.s.to_dense();
        let m = self.output_dim();
        let mut pi = DMatrix::zeros(m, cols);
        let mut digits = vec![0usize; p];
        for col in 0..cols {
            let mut rest = col;
            for slot in digits.iter_mut().rev() {
                *slot = rest % d;
                rest /= d;
            }
            // T^p e_J = T e_{j1} × … × T e_{jp}
            let mut v = vec![1.0];
            for &j in &digits {
                v = kron_vec(&v, t.column(j).as_slice());
            }
            // Apply S^{p/2}, then S^{p/4}, …, finally S¹.
            let mut copies = p / 2;
            while copies >= 1 {
                v = kron_power_apply(&s, copies, &v)?;
                copies /= 2;
            }
            pi.column_mut(col).copy_from_slice(&v);
        }
        Ok(pi)
    }
}

struct Workspace {
    padded: Vec<f64>,
    pair: PairScratch,
    levels: Vec<Vec<f64>>,
    z: Vec<f64>,
    tmp: Vec<f64>,
}

impl Workspace {
    fn new(sk: &TensorSketcher) -> Self {
        let m = sk.output_dim();
        Self {
            padded: vec![0.0; sk.t.padded_dim()],
            pair: PairScratch::new(m),
            levels: vec![vec![0.0; m]; sk.levels + 1],
            z: vec![0.0; m],
            tmp: vec![0.0; m],
        }
    }
}

/// `Z(S, T, X)`: the degree-`p` sketch of every column of `X`.
#[derive(Debug, Clone, PartialEq)]
pub struct SketchedMatrix {
    pub values: DMatrix<f64>,
    pub degree: usize,
    pub seed: u64,
    pub n: usize,
    pub d: usize,
    pub m: usize,
}

impl SketchedMatrix {
    /// `ZᵀZ`.
    pub fn gram(&self) -> DMatrix<f64> {
        self.values.transpose() * &self.values
    }
}

/// Sketch dimension and per-sketch accuracy chosen for a degree-`p` sketch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimPlan {
    pub m: usize,
    /// `ε / (3p)`, the accuracy each base sketch is sized for.
    pub eps_hat: f64,
    /// Unrounded SRHT and TensorSRHT requirements at `eps_hat`.
    pub srht_raw: f64,
    pub tensor_srht_raw: f64,
}

/// Sizes both base sketches as `(ε/3p, δ)` embeddings and keeps the larger
/// requirement, rounded up to a power of two. Expected total sketching time
/// is `Õ(nd + ε⁻²n²p²)`.
pub fn plan_dims(
    n: usize,
    d: usize,
    p: usize,
    eps: f64,
    delta: f64,
    ose_constant: f64,
) -> Result<DimPlan> {
    check_open_unit("eps", eps)?;
    check_open_unit("delta", delta)?;
    if p == 0 {
        return Err(SketchError::InvalidParameter(
            "degree must be at least 1".into(),
        ));
    }
    let eps_hat = eps / (3.0 * p as f64);
    let srht_raw = ose_dims_raw(n, d, eps_hat, delta, OseKind::Srht, ose_constant)?;
    let tensor_srht_raw = ose_dims_raw(n, d, eps_hat, delta, OseKind::TensorSrht, ose_constant)?;
    Ok(DimPlan {
        m: round_up_pow2(srht_raw.max(tensor_srht_raw))?,
        eps_hat,
        srht_raw,
        tensor_srht_raw,
    })
}

/// How sketch dimensions are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SketchSize {
    /// From [`plan_dims`] with the given leading constant.
    Theorem { ose_constant: f64 },
    /// A fixed power-of-two dimension for every degree.
    Explicit(usize),
}

impl Default for SketchSize {
    fn default() -> Self {
        SketchSize::Theorem {
            ose_constant: CALIBRATED_OSE_CONSTANT,
        }
    }
}

impl SketchSize {
    pub fn resolve(&self, n: usize, d: usize, p: usize, eps: f64, delta: f64) -> Result<usize> {
        match *self {
            SketchSize::Theorem { ose_constant } => {
                Ok(plan_dims(n, d, p, eps, delta, ose_constant)?.m)
            }
            SketchSize::Explicit(m) if m.is_power_of_two() => Ok(m),
            SketchSize::Explicit(m) => Err(SketchError::InvalidDimension(format!(
                "explicit sketch dimension must be a power of two, got {m}"
            ))),
        }
    }
}
