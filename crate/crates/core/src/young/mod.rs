//! Grid norms, Young integrals and the Heun solver for
//! `dy = sigma(y) dx + b(y) c dt` together with its Jacobian flow.

use alloc::vec;
#[allow(unused_imports)]
use num_traits::Float;

use nalgebra::{DMatrix, DVector};

mod integral;
mod moments;
mod norms;
pub(crate) mod series;
mod solver;

pub use integral::{holder_exponent_estimate, young_integral};
pub use moments::{moment_report, MomentReport, NormMoments};
pub use norms::{besov_norm, holder_norm};
pub use solver::{endpoint_sensitivities, jacobian_series, solve_ode, EndpointSensitivity, YoungSolution};

/// Coefficients `V_0, ..., V_d` of a Young SDE on `R^n`.
///
/// `V_0` is the drift `b`; `V_1, ..., V_d` are the columns of `sigma`.
pub trait VectorFieldSystem: Send + Sync {
    fn state_dim(&self) -> usize;

    fn driver_dim(&self) -> usize;

    /// Highest derivative order `deriv` supports.
    fn max_order(&self) -> usize;

    /// Writes `V_i(y)` into `out`.
    fn eval(&self, i: usize, y: &[f64], out: &mut [f64]);

    /// Writes the symmetric multilinear derivative
    /// `nabla^k V_i(y) <dirs[0], ..., dirs[k-1]>` into `out`, `k = dirs.len()`.
    /// `k = 0` is `eval`.
    fn deriv(&self, i: usize, y: &[f64], dirs: &[&[f64]], out: &mut [f64]);

    /// Optional sup bound on the fields and derivatives, for diagnostics.
    fn declared_bound(&self) -> Option<f64> {
        None
    }
}

/// `sigma(y)` as an `n x d` matrix.
pub fn sigma_matrix<V: VectorFieldSystem + ?Sized>(vf: &V, y: &[f64]) -> DMatrix<f64> {
    let (n, d) = (vf.state_dim(), vf.driver_dim());
    let mut m = DMatrix::zeros(n, d);
    let mut col = vec![0.0; n];
    for i in 1..=d {
        vf.eval(i, y, &mut col);
        for r in 0..n {
            m[(r, i - 1)] = col[r];
        }
    }
    m
}

pub fn drift<V: VectorFieldSystem + ?Sized>(vf: &V, y: &[f64]) -> DVector<f64> {
    let mut v = vec![0.0; vf.state_dim()];
    vf.eval(0, y, &mut v);
    DVector::from_vec(v)
}

/// Jacobian matrix `nabla V_i(y)`.
pub fn field_jacobian<V: VectorFieldSystem + ?Sized>(vf: &V, i: usize, y: &[f64]) -> DMatrix<f64> {
    let n = vf.state_dim();
    let mut m = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; n];
    for c in 0..n {
        e[c] = 1.0;
        vf.deriv(i, y, &[&e], &mut col);
        e[c] = 0.0;
        for r in 0..n {
            m[(r, c)] = col[r];
        }
    }
    m
}

/// Smallest eigenvalue of `sigma(y) sigma(y)^T`; positive iff the columns span `R^n`.
pub fn ellipticity<V: VectorFieldSystem + ?Sized>(vf: &V, y: &[f64]) -> f64 {
    let s = sigma_matrix(vf, y);
    let g = &s * s.transpose();
    g.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Matrix view of a point of an `n*n`-dimensional path (row-major).
pub fn matrix_at(path: &crate::GridPath, i: usize) -> DMatrix<f64> {
    let n = (path.dims() as f64).sqrt() as usize;
    DMatrix::from_row_slice(n, n, path.point(i))
}

pub(crate) fn store_matrix(m: &DMatrix<f64>, out: &mut [f64]) {
    let n = m.nrows();
    for r in 0..n {
        for c in 0..m.ncols() {
            out[r * m.ncols() + c] = m[(r, c)];
        }
    }
}

pub(crate) fn check_order<V: VectorFieldSystem + ?Sized>(vf: &V, required: usize) -> crate::Result<()> {
    if vf.max_order() < required {
        Err(crate::Error::InsufficientDerivatives { required, available: vf.max_order() })
    } else {
        Ok(())
    }
}

pub(crate) fn check_driver<V: VectorFieldSystem + ?Sized>(
    vf: &V,
    driver: &crate::GridPath,
    a: &[f64],
) -> crate::Result<()> {
    if driver.dims() != vf.driver_dim() {
        return Err(crate::Error::mismatch("driver dimension differs from the number of diffusion fields"));
    }
    if a.len() != vf.state_dim() {
        return Err(crate::Error::invalid("initial point has the wrong dimension"));
    }
    Ok(())
}
