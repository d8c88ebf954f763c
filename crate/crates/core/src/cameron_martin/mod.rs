//! The Cameron-Martin space of fBm: the Volterra kernel, reproducing-kernel
//! arithmetic, the constrained energy minimizer, the projection onto the
//! kernel of the first-order term and the second-order bilinear form.

mod basis;
mod kernel;
mod minimizer;
mod projection;

pub use basis::{h_inner, CmBasis, CmElement, DEFAULT_NODES};
pub use kernel::{k_transform, kernel_eval, VolterraKernel};
pub use minimizer::{
    geodesic_minimizer, minimize_energy, minimize_energy_from, multi_start, IterationRecord, MinimizerOptions,
    MinimizerSolution, MultiStartReport,
};
pub use projection::{project_kernel, second_order_form, KernelProjection};
