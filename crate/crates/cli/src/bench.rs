//! Timing sweeps for the degree-p sketch over a grid of (n, d, p, eps).
//!
//! Each cell draws unit-norm data, plans the sketch dimension, runs one
//! discarded warm-up and then `reps` timed repetitions of building and
//! applying the sketch. The exact Gram `(XᵀX)^{∘p}` is timed alongside as a
//! baseline.

use std::io::Write;
use std::time::Instant;

use nalgebra::DMatrix;
use polysketch::kernels::poly_kernel_exact;
use polysketch::rng::{derive_seed, role, stream};
use polysketch::tensor_sketch::{SketchSize, TensorSketcher};
use polysketch::{DataMatrix, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Column order of the bench CSV. Fixed; changing it breaks downstream plots.
pub const BENCH_COLUMNS: [&str; 9] = [
    "n",
    "d",
    "p",
    "eps",
    "m_total",
    "reps",
    "sketch_ms_median",
    "sketch_ms_min",
    "exact_ms_median",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub n: usize,
    pub d: usize,
    pub p: usize,
    pub eps: f64,
    pub m_total: usize,
    pub reps: usize,
    pub sketch_ms_median: f64,
    pub sketch_ms_min: f64,
    pub exact_ms_median: f64,
}

impl BenchRow {
    pub fn clear_timings(&mut self) {
        self.sketch_ms_median = 0.0;
        self.sketch_ms_min = 0.0;
        self.exact_ms_median = 0.0;
    }
}

#[derive(Debug, Clone)]
pub struct BenchGrid {
    pub n: Vec<usize>,
    pub d: Vec<usize>,
    pub p: Vec<usize>,
    pub eps: Vec<f64>,
    pub delta: f64,
    pub size: SketchSize,
    pub reps: usize,
    pub seed: u64,
}

/// `d × n` data with columns drawn uniformly from the unit sphere's
/// coordinate cube and normalized.
pub fn unit_columns(d: usize, n: usize, seed: u64) -> Result<DataMatrix> {
    let mut rng = stream(seed, role::TRIAL);
    let mut x = DMatrix::from_fn(d, n, |_, _| rng.random_range(-1.0..1.0));
    for mut c in x.column_iter_mut() {
        let norm = c.norm();
        if norm > 0.0 {
            c /= norm;
        }
    }
    DataMatrix::new(x)
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Times one cell. Sketch time covers drawing the sketch and applying it.
pub fn bench_cell(
    n: usize,
    d: usize,
    p: usize,
    eps: f64,
    grid: &BenchGrid,
    cell: u64,
) -> Result<BenchRow> {
    let seed = derive_seed(grid.seed, role::TRIAL, cell);
    let x = unit_columns(d, n, seed)?;
    let m = grid.size.resolve(n, d, p, eps, grid.delta)?;

    let sketch_once = || -> Result<f64> {
        let start = Instant::now();
        let z = TensorSketcher::new(d, m, p, seed)?.sketch_matrix(&x)?;
        std::hint::black_box(&z);
        Ok(elapsed_ms(start))
    };
    let exact_once = || {
        let start = Instant::now();
        std::hint::black_box(poly_kernel_exact(&x, p));
        elapsed_ms(start)
    };

    sketch_once()?;
    exact_once();
    let mut sketch_ms = Vec::with_capacity(grid.reps);
    let mut exact_ms = Vec::with_capacity(grid.reps);
    for _ in 0..grid.reps {
        sketch_ms.push(sketch_once()?);
        exact_ms.push(exact_once());
    }
    Ok(BenchRow {
        n,
        d,
        p,
        eps,
        m_total: m,
        reps: grid.reps,
        sketch_ms_min: sketch_ms.iter().copied().fold(f64::INFINITY, f64::min),
        sketch_ms_median: median(&mut sketch_ms),
        exact_ms_median: median(&mut exact_ms),
    })
}

/// Runs the grid in row-major order over (n, d, p, eps).
pub fn run_grid(grid: &BenchGrid) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    let mut cell = 0;
    for &n in &grid.n {
        for &d in &grid.d {
            for &p in &grid.p {
                for &eps in &grid.eps {
                    rows.push(bench_cell(n, d, p, eps, grid, cell)?);
                    cell += 1;
                }
            }
        }
    }
    Ok(rows)
}

pub fn write_csv<W: Write>(out: W, rows: &[BenchRow]) -> std::result::Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(BENCH_COLUMNS)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
