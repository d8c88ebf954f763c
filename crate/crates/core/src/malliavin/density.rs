use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::fbm::{FbmSampler, HurstParam, SamplerKind};
use crate::math::normal_cdf;
use crate::path::GridPath;
use crate::stats;
use crate::young::{solve_ode, VectorFieldSystem};

pub const MIN_SAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Bandwidth {
    /// Per-coordinate Silverman rule.
    Silverman,
    /// Silverman bandwidth times a factor.
    Scaled(f64),
    /// The same bandwidth in every coordinate.
    Fixed(f64),
}

/// Gaussian-kernel estimate at `eval_points`, together with the same
/// estimate at half the bandwidth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub eval_points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub bandwidth: Vec<f64>,
    pub half_values: Vec<f64>,
    pub half_std_errors: Vec<f64>,
    pub sample_count: usize,
    /// Mass of the estimate over the bounding box of the samples.
    pub box_mass: f64,
}

fn silverman(samples: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = samples[0].len();
    let m = samples.len() as f64;
    let factor = (4.0 / (n as f64 + 2.0)).powf(1.0 / (n as f64 + 4.0)) * m.powf(-1.0 / (n as f64 + 4.0));
    (0..n)
        .map(|k| {
            let col: Vec<f64> = samples.iter().map(|s| s[k]).collect();
            let sd = stats::std_dev(&col);
            if sd > 0.0 && sd.is_finite() {
                Ok(sd * factor)
            } else {
                Err(Error::DegenerateBandwidth { component: k })
            }
        })
        .collect()
}

/// Values and standard errors of the product-kernel estimate.
fn evaluate(samples: &[Vec<f64>], eval: &[Vec<f64>], bw: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let norm: f64 = bw.iter().map(|b| b * (2.0 * core::f64::consts::PI).sqrt()).product();
    let m = samples.len() as f64;
    let mut values = Vec::with_capacity(eval.len());
    let mut errs = Vec::with_capacity(eval.len());
    for x in eval {
        let (mut s1, mut s2) = (0.0, 0.0);
        for s in samples {
            let mut q = 0.0;
            for k in 0..bw.len() {
                let z = (x[k] - s[k]) / bw[k];
                q += z * z;
            }
            let v = (-0.5 * q).exp() / norm;
            s1 += v;
            s2 += v * v;
        }
        let mean = s1 / m;
        let var = ((s2 - m * mean * mean) / (m - 1.0)).max(0.0);
        values.push(mean);
        errs.push((var / m).sqrt());
    }
    (values, errs)
}

pub fn kde(samples: &[Vec<f64>], eval_points: &[Vec<f64>], policy: Bandwidth) -> Result<DensityEstimate> {
    if samples.len() < 2 {
        return Err(Error::invalid("kernel density estimation needs at least two samples"));
    }
    let n = samples[0].len();
    if samples.iter().chain(eval_points).any(|s| s.len() != n) {
        return Err(Error::invalid("sample and evaluation points differ in dimension"));
    }
    let bandwidth = match policy {
        Bandwidth::Silverman => silverman(samples)?,
        Bandwidth::Scaled(f) if f > 0.0 => silverman(samples)?.into_iter().map(|b| b * f).collect(),
        Bandwidth::Fixed(b) if b > 0.0 => vec![b; n],
        _ => return Err(Error::invalid("bandwidth must be positive")),
    };
    let (values, std_errors) = evaluate(samples, eval_points, &bandwidth);
    let half: Vec<f64> = bandwidth.iter().map(|b| 0.5 * b).collect();
    let (half_values, half_std_errors) = evaluate(samples, eval_points, &half);
    let lo: Vec<f64> = (0..n).map(|k| samples.iter().map(|s| s[k]).fold(f64::INFINITY, f64::min)).collect();
    let hi: Vec<f64> = (0..n).map(|k| samples.iter().map(|s| s[k]).fold(f64::NEG_INFINITY, f64::max)).collect();
    let box_mass = samples
        .iter()
        .map(|s| {
            (0..n)
                .map(|k| normal_cdf((hi[k] - s[k]) / bandwidth[k]) - normal_cdf((lo[k] - s[k]) / bandwidth[k]))
                .product::<f64>()
        })
        .sum::<f64>()
        / samples.len() as f64;
    Ok(DensityEstimate {
        eval_points: eval_points.to_vec(),
        values,
        std_errors,
        bandwidth,
        half_values,
        half_std_errors,
        sample_count: samples.len(),
        box_mass,
    })
}

fn check_time(t: f64, count: usize) -> Result<()> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::invalid("time must lie in (0, 1]"));
    }
    if count < MIN_SAMPLES {
        return Err(Error::invalid(alloc::format!("density estimation needs at least {MIN_SAMPLES} samples")));
    }
    Ok(())
}

/// Endpoints `y_t(a)` simulated as `ytilde^eps_1` with `eps = t^H`.
pub fn simulate_endpoints<V: VectorFieldSystem + ?Sized, E: Executor>(
    vf: &V,
    a: &[f64],
    hurst: HurstParam,
    t: f64,
    steps: usize,
    count: usize,
    seed: u64,
    exec: &E,
) -> Result<Vec<Vec<f64>>> {
    check_time(t, count)?;
    let eps = t.powf(hurst.value());
    let sampler = FbmSampler::new(hurst, steps, SamplerKind::Auto)?;
    let d = vf.driver_dim();
    let out: Vec<Result<Vec<f64>>> = exec.map_indexed(count, |m| {
        let w = sampler.sample_path(d, seed, m as u64).scaled(eps);
        Ok(solve_ode(vf, &w, t, a)?.end().to_vec())
    });
    out.into_iter().collect()
}

/// Endpoints `y_t(a)` from fBm sampled directly on `[0, t]`.
pub fn simulate_endpoints_direct<V: VectorFieldSystem + ?Sized, E: Executor>(
    vf: &V,
    a: &[f64],
    hurst: HurstParam,
    t: f64,
    steps: usize,
    count: usize,
    seed: u64,
    exec: &E,
) -> Result<Vec<Vec<f64>>> {
    check_time(t, count)?;
    let sampler = FbmSampler::with_horizon(hurst, steps, t, SamplerKind::Auto)?;
    let d = vf.driver_dim();
    let out: Vec<Result<Vec<f64>>> = exec.map_indexed(count, |m| {
        let w: GridPath = sampler.sample_path(d, seed, m as u64);
        Ok(solve_ode(vf, &w, t, a)?.end().to_vec())
    });
    out.into_iter().collect()
}

pub fn estimate_density<V: VectorFieldSystem + ?Sized, E: Executor>(
    vf: &V,
    a: &[f64],
    hurst: HurstParam,
    t: f64,
    eval_points: &[Vec<f64>],
    steps: usize,
    count: usize,
    seed: u64,
    policy: Bandwidth,
    exec: &E,
) -> Result<DensityEstimate> {
    let samples = simulate_endpoints(vf, a, hurst, t, steps, count, seed, exec)?;
    kde(&samples, eval_points, policy)
}

pub fn estimate_density_direct<V: VectorFieldSystem + ?Sized, E: Executor>(
    vf: &V,
    a: &[f64],
    hurst: HurstParam,
    t: f64,
    eval_points: &[Vec<f64>],
    steps: usize,
    count: usize,
    seed: u64,
    policy: Bandwidth,
    exec: &E,
) -> Result<DensityEstimate> {
    let samples = simulate_endpoints_direct(vf, a, hurst, t, steps, count, seed, exec)?;
    kde(&samples, eval_points, policy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use crate::models;

    fn affine_kernel(a: f64, b: f64, t: f64, h: f64, x: f64) -> f64 {
        let s = t.powf(h);
        (-(a + b * t - x).powi(2) / (2.0 * s * s)).exp() / ((2.0 * core::f64::consts::PI).sqrt() * s)
    }

    #[test]
    fn affine_density_matches_closed_form() {
        let hu = HurstParam::new(0.75).unwrap();
        let vf = models::affine(0.5);
        let eval = vec![vec![1.0], vec![0.25], vec![-0.3]];
        let est =
            estimate_density(&vf, &[0.0], hu, 0.5, &eval, 8, 20_000, 7, Bandwidth::Silverman, &Sequential).unwrap();
        for (x, (v, se)) in eval.iter().zip(est.values.iter().zip(&est.std_errors)) {
            let exact = affine_kernel(0.0, 0.5, 0.5, 0.75, x[0]);
            assert!((v - exact).abs() < 4.0 * se + 0.02 * exact, "{x:?}: {v} vs {exact} (se {se})");
        }
        assert!((est.box_mass - 1.0).abs() < 0.02);
        assert_eq!(est.half_values.len(), 3);
    }

    #[test]
    fn direct_and_scaled_simulation_agree() {
        let hu = HurstParam::new(0.7).unwrap();
        let vf = models::sin_1d(0.5);
        let eval = vec![vec![0.3]];
        let a = [0.1];
        let s = estimate_density(&vf, &a, hu, 0.3, &eval, 32, 4000, 1, Bandwidth::Fixed(0.05), &Sequential).unwrap();
        let d =
            estimate_density_direct(&vf, &a, hu, 0.3, &eval, 32, 4000, 2, Bandwidth::Fixed(0.05), &Sequential).unwrap();
        let se = (s.std_errors[0].powi(2) + d.std_errors[0].powi(2)).sqrt();
        assert!((s.values[0] - d.values[0]).abs() < 3.0 * se, "{} {} {se}", s.values[0], d.values[0]);
    }

    #[test]
    fn degenerate_sample_rejected() {
        let hu = HurstParam::new(0.7).unwrap();
        let vf = models::constant(1, 1, &[0.0], &[0.0]);
        let err = estimate_density(&vf, &[0.0], hu, 0.5, &[vec![0.0]], 8, 200, 1, Bandwidth::Silverman, &Sequential)
            .unwrap_err();
        assert_eq!(err, Error::DegenerateBandwidth { component: 0 });
        let vf = models::affine(0.0);
        assert!(
            estimate_density(&vf, &[0.0], hu, 0.5, &[vec![0.0]], 8, 50, 1, Bandwidth::Silverman, &Sequential).is_err()
        );
    }

    #[test]
    fn two_dimensional_mass_and_values() {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = crate::fbm::path_rng(3, 0);
        let samples: Vec<Vec<f64>> = (0..4000)
            .map(|_| {
                let (x, y): (f64, f64) = (StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
                vec![x, 0.5 * x + 2.0 * y]
            })
            .collect();
        let est = kde(&samples, &[vec![0.0, 0.0], vec![1.0, -1.0]], Bandwidth::Silverman).unwrap();
        // Density of (x, x/2 + 2y) at the origin is 1 / (2 pi * 2).
        let exact = 1.0 / (4.0 * core::f64::consts::PI);
        assert!((est.values[0] - exact).abs() < 0.1 * exact, "{}", est.values[0]);
        assert!(est.values.iter().chain(&est.half_values).all(|v| *v >= 0.0));
        assert!((est.box_mass - 1.0).abs() < 0.02, "{}", est.box_mass);
    }
}
