use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::{holder_norm, solve_ode, VectorFieldSystem};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::fbm::{FbmSampler, HurstParam, SamplerKind};
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormMoments {
    /// `(q, E[X^q]^{1/q})` for `q` in 1, 2, 4, 8.
    pub moments: Vec<(f64, f64)>,
    /// `(p, quantile)` for p in 0.5, 0.9, 0.99, 1.
    pub quantiles: Vec<(f64, f64)>,
}

impl NormMoments {
    fn from_samples(xs: &[f64]) -> Self {
        let moments = [1.0, 2.0, 4.0, 8.0].iter().map(|&q| (q, stats::lq_norm(xs, q))).collect();
        let mut v = xs.to_vec();
        v.sort_by(|a, b| a.total_cmp(b));
        let quantiles = [0.5, 0.9, 0.99, 1.0].iter().map(|&p| (p, stats::quantile_sorted(&v, p))).collect();
        NormMoments { moments, quantiles }
    }

    pub fn moment(&self, q: f64) -> Option<f64> {
        self.moments.iter().find(|(k, _)| *k == q).map(|(_, v)| *v)
    }

    pub fn all_finite(&self) -> bool {
        self.moments.iter().chain(&self.quantiles).all(|(_, v)| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub alpha: f64,
    pub samples: usize,
    pub jacobian: NormMoments,
    pub jacobian_inv: NormMoments,
}

/// Empirical moments of the Hoelder norms of `J` and `Jinv` along
/// `dy = sigma(y) dw + b(y) dt` started at the origin.
pub fn moment_report<V: VectorFieldSystem + ?Sized, E: Executor>(
    hurst: HurstParam,
    vf: &V,
    alpha: f64,
    steps: usize,
    count: usize,
    seed: u64,
    exec: &E,
) -> Result<MomentReport> {
    if alpha >= hurst.value() || alpha <= 0.0 {
        return Err(Error::invalid("Hoelder exponent must lie in (0, H)"));
    }
    let sampler = FbmSampler::new(hurst, steps, SamplerKind::Auto)?;
    let a = alloc::vec![0.0; vf.state_dim()];
    let norms: Vec<Result<(f64, f64)>> = exec.map_indexed(count, |m| {
        let w = sampler.sample_path(vf.driver_dim(), seed, m as u64);
        let sol = solve_ode(vf, &w, 1.0, &a)?;
        Ok((holder_norm(&sol.jac, alpha), holder_norm(&sol.jac_inv, alpha)))
    });
    let norms: Vec<(f64, f64)> = norms.into_iter().collect::<Result<_>>()?;
    let j: Vec<f64> = norms.iter().map(|p| p.0).collect();
    let k: Vec<f64> = norms.iter().map(|p| p.1).collect();
    Ok(MomentReport {
        alpha,
        samples: count,
        jacobian: NormMoments::from_samples(&j),
        jacobian_inv: NormMoments::from_samples(&k),
    })
}
