//! Derivatives of the Ito map in Cameron-Martin directions, the Malliavin
//! covariance matrix and Monte-Carlo density estimation.

mod density;

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::expansion::scaled_solution;
use crate::fbm::{fgn_autocovariance, FbmSampler, HurstParam, SamplerKind};
use crate::path::GridPath;
use crate::young::series::{heun, Algebra, Source, Term};
use crate::young::{matrix_at, sigma_matrix, VectorFieldSystem};

pub use density::{
    estimate_density, estimate_density_direct, kde, simulate_endpoints, simulate_endpoints_direct, Bandwidth,
    DensityEstimate,
};

/// Jet coefficients of `ytilde^eps(w + sum_k r_k dirs[k])`; index = subset of directions.
fn tangents<V: VectorFieldSystem + ?Sized>(
    eps: f64,
    gamma: &GridPath,
    w: &GridPath,
    dirs: &[&GridPath],
    vf: &V,
    a: &[f64],
    hurst: HurstParam,
) -> Result<Vec<GridPath>> {
    gamma.check_same_grid(w)?;
    for d in dirs {
        w.check_same_grid(d)?;
    }
    let alg = Algebra::subsets(dirs.len());
    let mut terms = vec![
        Term { mono: 0, source: Source::Path(gamma), scale: 1.0 },
        Term { mono: 0, source: Source::Path(w), scale: eps },
        Term { mono: 0, source: Source::Clock, scale: eps.powf(hurst.inv()) },
    ];
    for (k, d) in dirs.iter().enumerate() {
        terms.push(Term { mono: 1 << k, source: Source::Path(d), scale: eps });
    }
    heun(vf, &alg, a, w.steps(), &terms)
}

/// `xi^h`: derivative of the scaled solution in the direction `h` of the noise.
///
/// Computed as the exact derivative of the discrete scheme, so it agrees
/// with finite differences of `scaled_solution` up to the difference step.
pub fn directional_derivative<V: VectorFieldSystem + ?Sized>(
    eps: f64,
    gamma: &GridPath,
    w: &GridPath,
    h: &GridPath,
    vf: &V,
    a: &[f64],
    hurst: HurstParam,
) -> Result<GridPath> {
    Ok(tangents(eps, gamma, w, &[h], vf, a, hurst)?.swap_remove(1))
}

/// `xi^{k,h}`: second derivative in the directions `h` and `k`.
pub fn second_derivative<V: VectorFieldSystem + ?Sized>(
    eps: f64,
    gamma: &GridPath,
    w: &GridPath,
    h: &GridPath,
    k: &GridPath,
    vf: &V,
    a: &[f64],
    hurst: HurstParam,
) -> Result<GridPath> {
    Ok(tangents(eps, gamma, w, &[h, k], vf, a, hurst)?.swap_remove(3))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    pub matrix: DMatrix<f64>,
    pub eps: f64,
    pub det: f64,
    pub min_eigenvalue: f64,
}

impl CovarianceMatrix {
    fn from_matrix(matrix: DMatrix<f64>, eps: f64) -> Self {
        let det = matrix.determinant();
        let min_eigenvalue = matrix.clone().symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
        CovarianceMatrix { matrix, eps, det, min_eigenvalue }
    }
}

/// Malliavin covariance of `ytilde^eps_1` divided by `eps^2`:
/// `J_1 [sum_ij G_i G_j^T Cov(dw_i, dw_j)] J_1^T` with `G_i` the cell average
/// of `J^{-1} sigma(y)`. The weight `H(2H-1)|u-v|^{2H-2}` is integrated
/// exactly over every cell pair, which is the fGn autocovariance.
pub fn malliavin_covariance<V: VectorFieldSystem + ?Sized>(
    eps: f64,
    gamma: &GridPath,
    w: &GridPath,
    vf: &V,
    a: &[f64],
    hurst: HurstParam,
) -> Result<CovarianceMatrix> {
    let sol = scaled_solution(eps, gamma, w, vf, a, hurst)?;
    let n = w.steps();
    let corner: Vec<DMatrix<f64>> =
        (0..=n).map(|i| matrix_at(&sol.jac_inv, i) * sigma_matrix(vf, sol.y.point(i))).collect();
    let g: Vec<DMatrix<f64>> = (0..n).map(|i| (&corner[i] + &corner[i + 1]) * 0.5).collect();
    let c: Vec<f64> = (0..n).map(|k| fgn_autocovariance(k, w.dt(), hurst)).collect();
    let dim = vf.state_dim();
    let mut inner = DMatrix::zeros(dim, dim);
    for i in 0..n {
        let mut acc = &g[i] * c[0];
        for j in 0..n {
            if j != i {
                acc += &g[j] * c[i.abs_diff(j)];
            }
        }
        inner += &g[i] * acc.transpose();
    }
    let j1 = sol.jacobian(n);
    let m = &j1 * inner * j1.transpose();
    let m = (&m + m.transpose()) * 0.5;
    Ok(CovarianceMatrix::from_matrix(m, eps))
}

/// Empirical `E[|det C|^{-q}]^{1/q}` per scale and exponent, at `gamma = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NondegeneracyProfile {
    pub eps: Vec<f64>,
    pub q: Vec<f64>,
    /// `values[i][j]` for `eps[i]`, `q[j]`.
    pub values: Vec<Vec<f64>>,
    pub min_det: Vec<f64>,
    pub samples: usize,
}

impl NondegeneracyProfile {
    /// Largest over smallest value across scales for exponent `q[j]`.
    pub fn spread(&self, j: usize) -> f64 {
        let col: Vec<f64> = self.values.iter().map(|r| r[j]).collect();
        let max = col.iter().cloned().fold(0.0, f64::max);
        let min = col.iter().cloned().fold(f64::INFINITY, f64::min);
        max / min
    }
}

pub fn nondegeneracy_profile<V: VectorFieldSystem + ?Sized, E: Executor>(
    vf: &V,
    a: &[f64],
    hurst: HurstParam,
    eps_grid: &[f64],
    q_list: &[f64],
    steps: usize,
    count: usize,
    seed: u64,
    exec: &E,
) -> Result<NondegeneracyProfile> {
    if count == 0 || eps_grid.is_empty() {
        return Err(Error::invalid("need at least one sample and one scale"));
    }
    let sampler = FbmSampler::new(hurst, steps, SamplerKind::Auto)?;
    let d = vf.driver_dim();
    let zero = GridPath::zeros(d, steps);
    // The same noise is reused across scales.
    let dets: Vec<Result<Vec<f64>>> = exec.map_indexed(count, |m| {
        let w = sampler.sample_path(d, seed, m as u64);
        eps_grid.iter().map(|&e| malliavin_covariance(e, &zero, &w, vf, a, hurst).map(|c| c.det.abs())).collect()
    });
    let dets: Vec<Vec<f64>> = dets.into_iter().collect::<Result<_>>()?;
    let mut values = Vec::new();
    let mut min_det = Vec::new();
    for (i, _) in eps_grid.iter().enumerate() {
        let col: Vec<f64> = dets.iter().map(|r| r[i]).collect();
        min_det.push(col.iter().cloned().fold(f64::INFINITY, f64::min));
        values.push(
            q_list
                .iter()
                .map(|&q| {
                    let mean = col.iter().map(|v| v.powf(-q)).sum::<f64>() / count as f64;
                    mean.powf(1.0 / q)
                })
                .collect(),
        );
    }
    Ok(NondegeneracyProfile { eps: eps_grid.to_vec(), q: q_list.to_vec(), values, min_det, samples: count })
}
