//! Exact kernel oracles, Taylor-truncation planning, and sketched approximations
//! of Gaussian, p-convergent and NTK kernels.

pub mod exact;
pub mod series;
pub mod sketch;

pub use exact::{
    gaussian_kernel_exact, ntk_kernel_exact, ntk_scalar, poly_kernel_exact, series_kernel_exact,
};
pub use series::{
    expected_sampled_degree, gaussian_truncation_degree, ntk_coefficient, ntk_series_partial,
    ntk_series_tail_bound, PowerSeries, SampledTerm, TaylorPlan,
};
pub use sketch::{
    gaussian_sketch, ntk_sketch, pconv_sketch, sampled_pconv_sketch, sketch_with_plan, BlockRole,
    KernelBlock, KernelSketchOptions, SketchedKernel,
};
