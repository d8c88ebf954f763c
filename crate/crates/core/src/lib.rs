//! Numerical core for short-time density asymptotics of Young SDEs driven by
//! fractional Brownian motion with Hurst parameter in (1/2, 1).
//!
//! The crate is `no_std` and only needs `alloc`. Everything here is a pure
//! function of its inputs and a seed; file formats, configuration and thread
//! pools live in the `youngheat` companion crate.
//!
//! Module map:
//!
//! * [`fbm`]: exact fBm sampling and the covariance `R(s, t)`.
//! * [`young`]: grid norms, Young integrals, the Heun solver with Jacobians.
//! * [`expansion`]: exponent lattices, the Taylor hierarchy of the Itô map,
//!   remainders and the iterated-integral expansion at the starting point.
//! * [`malliavin`]: directional derivatives, the Malliavin covariance matrix
//!   and kernel density estimation of the transition density.
//! * [`cameron_martin`]: the Volterra kernel, reproducing-kernel arithmetic,
//!   the constrained energy minimizer, the projection and the bilinear form.
//! * [`asymptotics`]: series fitting and the on/off-diagonal pipelines.

#![no_std]
// NaN must fall through the `!(x < bound)` guards.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Grid code indexes several parallel arrays at once.
#![allow(clippy::needless_range_loop)]
#![allow(clippy::too_many_arguments)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod asymptotics;
pub mod cameron_martin;
mod error;
pub mod exec;
pub mod expansion;
pub mod fbm;
pub mod malliavin;
pub mod math;
pub mod models;
mod path;
pub mod stats;
pub mod young;

pub use error::{Error, Result};
pub use exec::{Executor, Sequential};
pub use fbm::{HurstParam, PathEnsemble};
pub use path::GridPath;
pub use young::VectorFieldSystem;
