use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbm::{covariance, HurstParam};
use crate::math::chebyshev_nodes;
use crate::path::GridPath;

/// Default number of reproducing-kernel nodes.
pub const DEFAULT_NODES: usize = 32;

/// Coefficients of `sum_i c_i R(., t_i)` with `c_i` in `R^d`, stored node-major
/// (`coeffs[i * d + k]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmElement {
    pub coeffs: Vec<f64>,
}

impl CmElement {
    pub fn zeros(len: usize) -> Self {
        CmElement { coeffs: vec![0.0; len] }
    }

    pub fn scaled(&self, c: f64) -> Self {
        CmElement { coeffs: self.coeffs.iter().map(|v| c * v).collect() }
    }

    pub fn axpy(&self, c: f64, other: &CmElement) -> Self {
        CmElement { coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + c * b).collect() }
    }
}

/// Span of `{R(., t_i) e_k}` in the `d`-dimensional Cameron-Martin space.
#[derive(Debug, Clone)]
pub struct CmBasis {
    hurst: HurstParam,
    dims: usize,
    nodes: Vec<f64>,
    gram: DMatrix<f64>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl CmBasis {
    pub fn new(hurst: HurstParam, dims: usize, nodes: &[f64]) -> Result<Self> {
        if dims == 0 || nodes.is_empty() {
            return Err(Error::invalid("basis needs at least one node and one dimension"));
        }
        if nodes.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
            return Err(Error::invalid("basis nodes must lie in (0, 1]"));
        }
        let m = nodes.len();
        let gram = DMatrix::from_fn(m, m, |i, j| covariance(nodes[i], nodes[j], hurst));
        let chol = gram
            .clone()
            .cholesky()
            .ok_or_else(|| Error::SingularMatrix("Gram matrix of the node basis is not positive definite".into()))?;
        Ok(CmBasis { hurst, dims, nodes: nodes.to_vec(), gram, chol })
    }

    /// Chebyshev nodes in `(0, 1]`, always including `t = 1`.
    pub fn chebyshev(hurst: HurstParam, dims: usize, count: usize) -> Result<Self> {
        Self::new(hurst, dims, &chebyshev_nodes(count))
    }

    pub fn hurst(&self) -> HurstParam {
        self.hurst
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Number of coefficients: nodes times dimension.
    pub fn len(&self) -> usize {
        self.nodes.len() * self.dims
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Scalar Gram matrix `R(t_i, t_j)`.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Index of the node at `t = 1`, if present.
    pub fn terminal_node(&self) -> Option<usize> {
        self.nodes.iter().position(|t| (*t - 1.0).abs() < 1e-15)
    }

    /// `<x, y>_H = sum_ij R(t_i, t_j) x_i . y_j`.
    pub fn inner(&self, x: &CmElement, y: &CmElement) -> f64 {
        let d = self.dims;
        let m = self.nodes.len();
        let mut acc = 0.0;
        for i in 0..m {
            for j in 0..m {
                let g = self.gram[(i, j)];
                for k in 0..d {
                    acc += g * x.coeffs[i * d + k] * y.coeffs[j * d + k];
                }
            }
        }
        acc
    }

    pub fn norm_sq(&self, x: &CmElement) -> f64 {
        self.inner(x, x)
    }

    /// Applies the inverse of the full Gram matrix `G (x) Id_d` to a coefficient vector.
    pub fn solve_gram(&self, rhs: &[f64]) -> Vec<f64> {
        let (m, d) = (self.nodes.len(), self.dims);
        let mut out = vec![0.0; m * d];
        for k in 0..d {
            let col = DVector::from_iterator(m, (0..m).map(|i| rhs[i * d + k]));
            let sol = self.chol.solve(&col);
            for i in 0..m {
                out[i * d + k] = sol[i];
            }
        }
        out
    }

    /// Applies `G (x) Id_d`.
    pub fn apply_gram(&self, x: &[f64]) -> Vec<f64> {
        let (m, d) = (self.nodes.len(), self.dims);
        let mut out = vec![0.0; m * d];
        for i in 0..m {
            for j in 0..m {
                for k in 0..d {
                    out[i * d + k] += self.gram[(i, j)] * x[j * d + k];
                }
            }
        }
        out
    }

    /// Value of the element at time `t`.
    pub fn value_at(&self, x: &CmElement, t: f64, out: &mut [f64]) {
        let d = self.dims;
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, &ti) in self.nodes.iter().enumerate() {
            let r = covariance(t, ti, self.hurst);
            for k in 0..d {
                out[k] += r * x.coeffs[i * d + k];
            }
        }
    }

    pub fn path(&self, x: &CmElement, steps: usize) -> GridPath {
        GridPath::from_fn(self.dims, steps, |t, o| self.value_at(x, t, o))
    }

    /// Grid path of the basis element `R(., t_i) e_k`.
    pub fn basis_path(&self, i: usize, k: usize, steps: usize) -> GridPath {
        let ti = self.nodes[i];
        GridPath::from_fn(self.dims, steps, |t, o| {
            o.iter_mut().for_each(|v| *v = 0.0);
            o[k] = covariance(t, ti, self.hurst);
        })
    }

    /// Coefficients of the element whose value at `t_j` is `values[j]` (interpolation in the span).
    pub fn interpolate(&self, values: &[f64]) -> CmElement {
        CmElement { coeffs: self.solve_gram(values) }
    }
}

/// `<x, y>_H` through the Gram matrix of the node basis.
pub fn h_inner(x: &CmElement, y: &CmElement, basis: &CmBasis) -> f64 {
    basis.inner(x, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn basis(d: usize) -> CmBasis {
        CmBasis::chebyshev(HurstParam::new(0.75).unwrap(), d, DEFAULT_NODES).unwrap()
    }

    fn unit(b: &CmBasis, i: usize, k: usize) -> CmElement {
        let mut e = CmElement::zeros(b.len());
        e.coeffs[i * b.dims() + k] = 1.0;
        e
    }

    #[test]
    fn reproducing_identities() {
        let b = basis(1);
        let last = b.terminal_node().unwrap();
        assert!((h_inner(&unit(&b, last, 0), &unit(&b, last, 0), &b) - 1.0).abs() < 1e-15);
        let hu = b.hurst();
        for i in [0, 5, 17] {
            let ti = b.nodes()[i];
            let v = h_inner(&unit(&b, i, 0), &unit(&b, last, 0), &b);
            assert!((v - covariance(ti, 1.0, hu)).abs() < 1e-15);
            // lambda = R(., t0) - R(t0, 1) R(., 1) vanishes at 1 and is orthogonal to R(., 1).
            let lam = unit(&b, i, 0).axpy(-covariance(ti, 1.0, hu), &unit(&b, last, 0));
            let mut at1 = [0.0];
            b.value_at(&lam, 1.0, &mut at1);
            assert!(at1[0].abs() < 1e-15);
            assert!(h_inner(&unit(&b, last, 0), &lam, &b).abs() < 1e-10);
        }
    }

    #[test]
    fn duplicate_nodes_are_singular() {
        let hu = HurstParam::new(0.7).unwrap();
        assert!(matches!(CmBasis::new(hu, 1, &[0.5, 0.5, 1.0]), Err(Error::SingularMatrix(_))));
        assert!(CmBasis::new(hu, 1, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn gram_solve_round_trip() {
        let b = basis(2);
        let x: Vec<f64> = (0..b.len()).map(|i| (i as f64 * 0.37).sin()).collect();
        let back = b.solve_gram(&b.apply_gram(&x));
        let err = x.iter().zip(&back).map(|(a, c)| (a - c).abs()).fold(0.0, f64::max);
        assert!(err < 1e-4, "{err}");
    }

    proptest! {
        #[test]
        fn reproducing_property(c in proptest::collection::vec(-1.0..1.0f64, DEFAULT_NODES), j in 0usize..DEFAULT_NODES) {
            // <R(., t_j), x>_H = x(t_j).
            let b = basis(1);
            let x = CmElement { coeffs: c };
            let mut v = [0.0];
            b.value_at(&x, b.nodes()[j], &mut v);
            let ip = h_inner(&unit(&b, j, 0), &x, &b);
            prop_assert!((ip - v[0]).abs() < 1e-12);
        }
    }
}
