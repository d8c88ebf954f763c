//! Series fitting of estimated densities against lattice exponents, and the
//! on-diagonal and off-diagonal verification pipelines.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::cameron_martin::{minimize_energy, MinimizerOptions, MinimizerSolution};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::expansion::{build_lattice, phi_hierarchy, LatticeExponent, LatticeKind};
use crate::fbm::HurstParam;
use crate::malliavin::{kde, simulate_endpoints, Bandwidth};
use crate::math::condition_number;
use crate::path::GridPath;
use crate::stats;
use crate::young::{ellipticity, sigma_matrix, VectorFieldSystem};

/// Condition number above which a design is flagged as ill-conditioned.
pub const ILL_CONDITIONED: f64 = 1e8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesFit {
    /// Lattice elements behind the columns, when the fit came from a pipeline.
    pub lattice: Vec<LatticeExponent>,
    /// Powers of `t` in the design.
    pub exponents: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Coefficients from sequential peeling.
    pub peeled: Vec<f64>,
    /// Weighted residual norm `sqrt(sum ((y - X c) / se)^2)`.
    pub residual_norm: f64,
    pub condition_number: f64,
    pub ill_conditioned: bool,
    pub t_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub value_std_errors: Vec<f64>,
}

impl SeriesFit {
    pub fn predict(&self, t: f64) -> f64 {
        self.exponents.iter().zip(&self.coefficients).map(|(e, c)| c * t.powf(*e)).sum()
    }

    /// Coefficient of the column with exponent `e`, if present.
    pub fn coefficient_at(&self, e: f64) -> Option<(f64, f64)> {
        self.exponents.iter().position(|x| (x - e).abs() < 1e-9).map(|i| (self.coefficients[i], self.std_errors[i]))
    }
}

/// Weighted least squares of `values` on the columns `t^e`, weights
/// `1 / std_errors^2`, plus a peeling cross-check.
pub fn fit_series(values: &[f64], std_errors: &[f64], t_grid: &[f64], exponents: &[f64]) -> Result<SeriesFit> {
    let (m, p) = (t_grid.len(), exponents.len());
    if values.len() != m || std_errors.len() != m {
        return Err(Error::invalid("values, standard errors and times differ in length"));
    }
    if p == 0 || m < p + 2 {
        return Err(Error::RankDeficient(alloc::format!(
            "{m} times cannot support {p} exponents (need at least p + 2)"
        )));
    }
    if std_errors.iter().any(|s| !(*s > 0.0 && s.is_finite())) || t_grid.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::invalid("standard errors and times must be positive"));
    }
    let x = DMatrix::from_fn(m, p, |i, j| t_grid[i].powf(exponents[j]) / std_errors[i]);
    let y = DVector::from_fn(m, |i, _| values[i] / std_errors[i]);
    let cond = condition_number(&x);
    if !(cond < 1e14) {
        return Err(Error::RankDeficient(alloc::format!("design condition number {cond:e}")));
    }
    let svd = x.clone().svd(true, true);
    let coef = svd.solve(&y, 1e-15).map_err(|e| Error::RankDeficient(e.into()))?;
    let resid = &y - &x * &coef;
    let xtx_inv = crate::math::inverse(&(x.transpose() * &x))
        .map_err(|_| Error::RankDeficient("normal matrix singular".into()))?;
    let std_errs: Vec<f64> = (0..p).map(|j| xtx_inv[(j, j)].max(0.0).sqrt()).collect();
    let peeled = peel(values, std_errors, t_grid, exponents);
    Ok(SeriesFit {
        lattice: Vec::new(),
        exponents: exponents.to_vec(),
        coefficients: coef.iter().copied().collect(),
        std_errors: std_errs,
        peeled,
        residual_norm: resid.norm(),
        condition_number: cond,
        ill_conditioned: cond > ILL_CONDITIONED,
        t_grid: t_grid.to_vec(),
        values: values.to_vec(),
        value_std_errors: std_errors.to_vec(),
    })
}

/// Leading term from the smallest-t half, subtracted, then the next term, and so on.
fn peel(values: &[f64], se: &[f64], t: &[f64], exps: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..t.len()).collect();
    order.sort_by(|&i, &j| t[i].total_cmp(&t[j]));
    let half = &order[..t.len().div_ceil(2)];
    let mut rest = values.to_vec();
    let mut out = Vec::with_capacity(exps.len());
    for &e in exps {
        let (mut num, mut den) = (0.0, 0.0);
        for &i in half {
            let x = t[i].powf(e);
            let w = 1.0 / (se[i] * se[i]);
            num += w * x * rest[i];
            den += w * x * x;
        }
        let c = num / den;
        for i in 0..t.len() {
            rest[i] -= c * t[i].powf(e);
        }
        out.push(c);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub hurst: HurstParam,
    pub steps: usize,
    pub samples: usize,
    pub seed: u64,
    pub t_grid: Vec<f64>,
    /// Largest lattice element (in units of the lattice, not of `t`) fitted.
    pub cutoff: f64,
    pub bandwidth: Bandwidth,
    /// Off-diagonal: a time is skipped when the target lies more than this
    /// many sample standard deviations from the sample mean.
    pub z_max: f64,
}

impl PipelineConfig {
    pub fn new(hurst: HurstParam) -> Self {
        PipelineConfig {
            hurst,
            steps: 64,
            samples: 100_000,
            seed: 0,
            t_grid: geometric_grid(0.8, 0.63 / 0.8, 8),
            cutoff: 2.0 / hurst.value() - 2.0,
            bandwidth: Bandwidth::Silverman,
            z_max: 3.0,
        }
    }
}

/// `start, start r, start r^2, ...` (`count` points).
pub fn geometric_grid(start: f64, ratio: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| start * ratio.powi(k as i32)).collect()
}

/// `count` geometric points from `hi` down to `lo`.
pub fn geometric_between(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![hi];
    }
    geometric_grid(hi, (lo / hi).powf(1.0 / (count - 1) as f64), count)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityPoint {
    pub t: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub half_bandwidth_estimate: f64,
    pub half_bandwidth_std_error: f64,
    /// Estimate after removing the known prefactor.
    pub normalized: f64,
    pub normalized_std_error: f64,
    /// Distance of the target from the sample mean in sample standard deviations.
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnDiagonalReport {
    pub fit: SeriesFit,
    pub points: Vec<DensityPoint>,
    /// `(2 pi)^{-n/2} det(sigma sigma^T)(a)^{-1/2}`.
    pub leading_constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffDiagonalReport {
    pub minimizer: MinimizerSolution,
    pub energy: f64,
    pub nu_bar: Vec<f64>,
    pub beta: f64,
    pub leading_coeff: f64,
    pub leading_std_error: f64,
    pub fit: SeriesFit,
    pub points: Vec<DensityPoint>,
    /// Times skipped by the tail floor.
    pub skipped: Vec<f64>,
}

/// Gaussian prediction for the leading on-diagonal constant.
pub fn leading_constant<V: VectorFieldSystem + ?Sized>(vf: &V, a: &[f64]) -> f64 {
    let s = sigma_matrix(vf, a);
    let det = (&s * s.transpose()).determinant();
    let n = vf.state_dim() as f64;
    (2.0 * core::f64::consts::PI).powf(-0.5 * n) / det.sqrt()
}

fn lattice_columns(kind: LatticeKind, cfg: &PipelineConfig) -> Result<(Vec<LatticeExponent>, Vec<f64>)> {
    let lat = build_lattice(kind, cfg.hurst, cfg.cutoff)?;
    let exps = lat.elements.iter().map(|e| e.value * cfg.hurst.value()).collect();
    Ok((lat.elements, exps))
}

/// Independent seed for time index `i`.
fn time_seed(seed: u64, i: usize) -> u64 {
    seed ^ (i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn estimate_at<V: VectorFieldSystem + ?Sized, E: Executor>(
    vf: &V,
    a: &[f64],
    target: &[f64],
    t: f64,
    i: usize,
    cfg: &PipelineConfig,
    exec: &E,
) -> Result<(DensityPoint, Vec<Vec<f64>>)> {
    let samples = simulate_endpoints(vf, a, cfg.hurst, t, cfg.steps, cfg.samples, time_seed(cfg.seed, i), exec)?;
    let est = kde(&samples, &[target.to_vec()], cfg.bandwidth)?;
    let mut z: f64 = 0.0;
    for k in 0..target.len() {
        let col: Vec<f64> = samples.iter().map(|s| s[k]).collect();
        z = z.max((target[k] - stats::mean(&col)).abs() / stats::std_dev(&col));
    }
    let p = DensityPoint {
        t,
        estimate: est.values[0],
        std_error: est.std_errors[0],
        half_bandwidth_estimate: est.half_values[0],
        half_bandwidth_std_error: est.half_std_errors[0],
        normalized: 0.0,
        normalized_std_error: 0.0,
        z,
    };
    Ok((p, samples))
}

fn check_elliptic_at<V: VectorFieldSystem + ?Sized>(vf: &V, a: &[f64]) -> Result<()> {
    let e = ellipticity(vf, a);
    if e > 1e-10 {
        Ok(())
    } else {
        Err(Error::DegenerateDiffusion { min_eigenvalue: e })
    }
}

/// Estimates `p(t, a, a)`, multiplies by `t^{nH}` and fits the exponents
/// `nu H`, `nu` in the third lattice up to the cutoff.
pub fn on_diagonal_pipeline<V: VectorFieldSystem + ?Sized, E: Executor>(
    vf: &V,
    a: &[f64],
    cfg: &PipelineConfig,
    exec: &E,
) -> Result<OnDiagonalReport> {
    check_elliptic_at(vf, a)?;
    let (lattice, exps) = lattice_columns(LatticeKind::L3, cfg)?;
    let n = vf.state_dim() as f64;
    let mut points = Vec::new();
    for (i, &t) in cfg.t_grid.iter().enumerate() {
        let (mut p, _) = estimate_at(vf, a, a, t, i, cfg, exec)?;
        let scale = t.powf(n * cfg.hurst.value());
        p.normalized = p.estimate * scale;
        p.normalized_std_error = p.std_error * scale;
        points.push(p);
    }
    let mut fit = fit_points(&points, &exps)?;
    fit.lattice = lattice;
    if fit.ill_conditioned {
        log::warn!("on-diagonal design is ill-conditioned (condition number {:e})", fit.condition_number);
    }
    Ok(OnDiagonalReport { fit, points, leading_constant: leading_constant(vf, a) })
}

fn fit_points(points: &[DensityPoint], exps: &[f64]) -> Result<SeriesFit> {
    let v: Vec<f64> = points.iter().map(|p| p.normalized).collect();
    let s: Vec<f64> = points.iter().map(|p| p.normalized_std_error).collect();
    let t: Vec<f64> = points.iter().map(|p| p.t).collect();
    fit_series(&v, &s, &t, exps)
}

/// `beta = <nu_bar, phi^{1/H}_1>` along the minimizer.
pub fn drift_exponent<V: VectorFieldSystem + ?Sized>(
    vf: &V,
    a: &[f64],
    sol: &MinimizerSolution,
    hurst: HurstParam,
) -> Result<f64> {
    let g = &sol.gamma_bar;
    let zero = GridPath::zeros(g.dims(), g.steps());
    let hier = phi_hierarchy(g, &zero, vf, a, hurst, hurst.inv())?;
    let phi = hier.phi(hurst.inv())?.end();
    Ok(sol.nu_bar.iter().zip(phi).map(|(n, p)| n * p).sum())
}

/// Estimates `p(t, a, a')`, divides by `exp(-E / (2 t^{2H}) + beta / t^{2H-1}) t^{-nH}`
/// and fits the exponents `lambda H`, `lambda` in the fourth lattice.
pub fn off_diagonal_pipeline<V: VectorFieldSystem + ?Sized, E: Executor>(
    vf: &V,
    a: &[f64],
    a_prime: &[f64],
    cfg: &PipelineConfig,
    minimizer: &MinimizerOptions,
    exec: &E,
) -> Result<OffDiagonalReport> {
    check_elliptic_at(vf, a)?;
    let sol = minimize_energy(vf, a, a_prime, cfg.hurst, minimizer)?;
    let beta = drift_exponent(vf, a, &sol, cfg.hurst)?;
    let (lattice, exps) = lattice_columns(LatticeKind::L4, cfg)?;
    let h = cfg.hurst.value();
    let n = vf.state_dim() as f64;
    let mut points = Vec::new();
    let mut skipped = Vec::new();
    for (i, &t) in cfg.t_grid.iter().enumerate() {
        let log_gauss = -sol.energy / (2.0 * t.powf(2.0 * h));
        if log_gauss < -690.0 {
            skipped.push(t);
            continue;
        }
        let (mut p, _) = estimate_at(vf, a, a_prime, t, i, cfg, exec)?;
        if p.z > cfg.z_max || p.estimate <= 0.0 {
            skipped.push(t);
            continue;
        }
        let scale = (-(log_gauss + beta / t.powf(2.0 * h - 1.0))).exp() * t.powf(n * h);
        p.normalized = p.estimate * scale;
        p.normalized_std_error = p.std_error * scale;
        points.push(p);
    }
    let mut fit = fit_points(&points, &exps)?;
    fit.lattice = lattice;
    let (leading_coeff, leading_std_error) = fit.coefficient_at(0.0).unwrap_or((f64::NAN, f64::NAN));
    Ok(OffDiagonalReport {
        energy: sol.energy,
        nu_bar: sol.nu_bar.clone(),
        minimizer: sol,
        beta,
        leading_coeff,
        leading_std_error,
        fit,
        points,
        skipped,
    })
}
