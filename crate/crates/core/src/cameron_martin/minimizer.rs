use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::basis::{CmBasis, CmElement, DEFAULT_NODES};
use crate::error::{Error, Result};
use crate::fbm::{covariance, path_rng, HurstParam};
use crate::math::{solve, solve_spd};
use crate::path::{euclid, GridPath};
use crate::young::{ellipticity, endpoint_sensitivities, solve_ode, VectorFieldSystem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimizerOptions {
    pub nodes: usize,
    pub steps: usize,
    /// Endpoint residual target.
    pub tolerance: f64,
    /// Stationarity residual target, in H-norm.
    pub stationarity_tolerance: f64,
    pub max_iterations: usize,
    /// Smallest admissible eigenvalue of `sigma sigma^T` along the path.
    pub ellipticity_floor: f64,
}

impl Default for MinimizerOptions {
    fn default() -> Self {
        MinimizerOptions {
            nodes: DEFAULT_NODES,
            steps: 512,
            tolerance: 1e-10,
            stationarity_tolerance: 1e-8,
            max_iterations: 100,
            ellipticity_floor: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub energy: f64,
    pub endpoint_residual: f64,
    pub stationarity_residual: f64,
    pub step_length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimizerSolution {
    pub gamma_bar: GridPath,
    pub nodes: Vec<f64>,
    pub coeffs: CmElement,
    pub nu_bar: Vec<f64>,
    /// `||gamma_bar||_H^2`.
    pub energy: f64,
    pub endpoint_residual: f64,
    pub stationarity_residual: f64,
    pub iterations: usize,
    pub trace: Vec<IterationRecord>,
}

/// Endpoint of the skeleton and its derivative in the basis coefficients.
struct Linearization {
    path: GridPath,
    end: Vec<f64>,
    /// `n x (nodes * d)`.
    jac: DMatrix<f64>,
}

/// Increments of `R(., t_i)` on the grid, per node.
fn basis_increments(basis: &CmBasis, steps: usize) -> Vec<Vec<f64>> {
    let hu = basis.hurst();
    basis
        .nodes()
        .iter()
        .map(|&ti| {
            (0..steps)
                .map(|s| {
                    covariance((s + 1) as f64 / steps as f64, ti, hu) - covariance(s as f64 / steps as f64, ti, hu)
                })
                .collect()
        })
        .collect()
}

fn linearize<V: VectorFieldSystem + ?Sized>(
    vf: &V,
    basis: &CmBasis,
    incr: &[Vec<f64>],
    c: &CmElement,
    a: &[f64],
    steps: usize,
) -> Result<Linearization> {
    let path = basis.path(c, steps);
    let sens = endpoint_sensitivities(vf, &path, 0.0, a)?;
    let (n, d) = (vf.state_dim(), basis.dims());
    let mut jac = DMatrix::zeros(n, basis.len());
    for (i, inc) in incr.iter().enumerate() {
        for (s, g) in sens.sens.iter().enumerate() {
            let dr = inc[s];
            for k in 0..d {
                for r in 0..n {
                    jac[(r, i * d + k)] += g[(r, k)] * dr;
                }
            }
        }
    }
    Ok(Linearization { path, end: sens.end, jac })
}

/// `G^{-1} A^T` (columns are the representers of the rows of `A`) and `C = A G^{-1} A^T`.
fn representers(basis: &CmBasis, jac: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = jac.nrows();
    let mut w = DMatrix::zeros(basis.len(), n);
    for r in 0..n {
        let row: Vec<f64> = jac.row(r).iter().copied().collect();
        let sol = basis.solve_gram(&row);
        for (j, v) in sol.into_iter().enumerate() {
            w[(j, r)] = v;
        }
    }
    let c = jac * &w;
    let c = (&c + c.transpose()) * 0.5;
    (w, c)
}

fn h_norm(basis: &CmBasis, x: &[f64]) -> f64 {
    let e = CmElement { coeffs: x.to_vec() };
    basis.norm_sq(&e).max(0.0).sqrt()
}

/// Multiplier `nu` minimizing `||c - G^{-1} A^T nu||_H` and that residual.
fn stationarity(
    basis: &CmBasis,
    lin: &Linearization,
    w: &DMatrix<f64>,
    cmat: &DMatrix<f64>,
    c: &CmElement,
) -> Result<(Vec<f64>, f64)> {
    let x = DVector::from_column_slice(&c.coeffs);
    let nu = solve_spd(cmat, &(&lin.jac * &x)).or_else(|_| solve(cmat, &(&lin.jac * &x)))?;
    let diff = &x - w * &nu;
    Ok((nu.iter().copied().collect(), h_norm(basis, diff.as_slice())))
}

fn check_elliptic<V: VectorFieldSystem + ?Sized>(
    vf: &V,
    points: impl Iterator<Item = Vec<f64>>,
    floor: f64,
) -> Result<()> {
    for p in points {
        let e = ellipticity(vf, &p);
        if !(e > floor) {
            return Err(Error::DegenerateDiffusion { min_eigenvalue: e });
        }
    }
    Ok(())
}

/// Minimizes `||gamma||_H^2` subject to `phi^0_1(gamma) = a'` over the span of
/// `R(., t_i) e_k` by Gauss-Newton on the Lagrange system.
pub fn minimize_energy<V: VectorFieldSystem + ?Sized>(
    vf: &V,
    a: &[f64],
    a_prime: &[f64],
    hurst: HurstParam,
    opts: &MinimizerOptions,
) -> Result<MinimizerSolution> {
    let basis = CmBasis::chebyshev(hurst, vf.driver_dim(), opts.nodes)?;
    minimize_energy_from(vf, a, a_prime, &basis, &CmElement::zeros(basis.len()), opts)
}

pub fn minimize_energy_from<V: VectorFieldSystem + ?Sized>(
    vf: &V,
    a: &[f64],
    a_prime: &[f64],
    basis: &CmBasis,
    init: &CmElement,
    opts: &MinimizerOptions,
) -> Result<MinimizerSolution> {
    let n = vf.state_dim();
    if a.len() != n || a_prime.len() != n {
        return Err(Error::invalid("endpoints have the wrong dimension"));
    }
    if basis.dims() != vf.driver_dim() || init.coeffs.len() != basis.len() {
        return Err(Error::invalid("basis does not match the driver dimension"));
    }
    check_elliptic(vf, core::iter::once(a.to_vec()), opts.ellipticity_floor)?;
    let steps = opts.steps;
    let incr = basis_increments(basis, steps);
    let target = DVector::from_column_slice(a_prime);
    let mut c = init.clone();
    let mut lin = linearize(vf, basis, &incr, &c, a, steps)?;
    let mut trace = Vec::new();
    for it in 0..=opts.max_iterations {
        let (w, cmat) = representers(basis, &lin.jac);
        let resid = euclid((DVector::from_column_slice(&lin.end) - &target).as_slice());
        let (nu, stat) = stationarity(basis, &lin, &w, &cmat, &c)?;
        let energy = basis.norm_sq(&c);
        if resid < opts.tolerance && stat < opts.stationarity_tolerance {
            let y = solve_ode(vf, &lin.path, 0.0, a)?;
            check_elliptic(vf, (0..=steps).map(|i| y.y.point(i).to_vec()), opts.ellipticity_floor)?;
            trace.push(IterationRecord {
                iteration: it,
                energy,
                endpoint_residual: resid,
                stationarity_residual: stat,
                step_length: 0.0,
            });
            return Ok(MinimizerSolution {
                gamma_bar: lin.path,
                nodes: basis.nodes().to_vec(),
                coeffs: c,
                nu_bar: nu,
                energy,
                endpoint_residual: resid,
                stationarity_residual: stat,
                iterations: it,
                trace,
            });
        }
        if it == opts.max_iterations {
            return Err(Error::NonConvergence { iterations: it, residual: resid.max(stat) });
        }
        // Linearized problem: min ||c'||^2 subject to end + A (c' - c) = a'.
        let x = DVector::from_column_slice(&c.coeffs);
        let rhs = &target - DVector::from_column_slice(&lin.end) + &lin.jac * &x;
        let nu_new = solve_spd(&cmat, &rhs).or_else(|_| solve(&cmat, &rhs))?;
        let full = &w * &nu_new;
        let dir: Vec<f64> = full.iter().zip(&c.coeffs).map(|(f, x)| f - x).collect();
        let rho = 2.0 * nu_new.iter().fold(0.0f64, |m, v| m.max(v.abs())) + 1.0;
        let merit = |e: f64, r: f64| 0.5 * e + rho * r;
        let old = merit(energy, resid);
        let mut step = 1.0;
        loop {
            let trial = CmElement { coeffs: c.coeffs.iter().zip(&dir).map(|(x, d)| x + step * d).collect() };
            let tl = linearize(vf, basis, &incr, &trial, a, steps);
            if let Ok(tl) = tl {
                let r = euclid((DVector::from_column_slice(&tl.end) - &target).as_slice());
                let e = basis.norm_sq(&trial);
                if merit(e, r) <= old + 1e-12 * (1.0 + old) || step < 1e-6 {
                    c = trial;
                    lin = tl;
                    break;
                }
            }
            step *= 0.5;
            if step < 1e-9 {
                return Err(Error::NonConvergence { iterations: it, residual: resid });
            }
        }
        trace.push(IterationRecord {
            iteration: it,
            energy,
            endpoint_residual: resid,
            stationarity_residual: stat,
            step_length: step,
        });
    }
    unreachable!("loop returns on the last iteration")
}

/// Shortcut for coefficient systems whose fields commute: the minimizer is
/// `gamma_t = v R(t, 1)` with `v` shot so that `phi^0_1 = a'`.
pub fn geodesic_minimizer<V: VectorFieldSystem + ?Sized>(
    vf: &V,
    a: &[f64],
    a_prime: &[f64],
    hurst: HurstParam,
    opts: &MinimizerOptions,
) -> Result<MinimizerSolution> {
    let (n, d) = (vf.state_dim(), vf.driver_dim());
    if n != d {
        return Err(Error::invalid("geodesic shooting needs as many driver components as state dimensions"));
    }
    if a.len() != n || a_prime.len() != n {
        return Err(Error::invalid("endpoints have the wrong dimension"));
    }
    check_elliptic(vf, core::iter::once(a.to_vec()), opts.ellipticity_floor)?;
    let steps = opts.steps;
    let driver = |v: &[f64]| {
        GridPath::from_fn(d, steps, |t, o| {
            let r = covariance(t, 1.0, hurst);
            for k in 0..d {
                o[k] = v[k] * r;
            }
        })
    };
    let dirs: Vec<GridPath> = (0..d)
        .map(|k| {
            GridPath::from_fn(d, steps, |t, o| {
                o.iter_mut().for_each(|x| *x = 0.0);
                o[k] = covariance(t, 1.0, hurst);
            })
        })
        .collect();
    let shoot = |v: &[f64]| -> Result<(Vec<f64>, DMatrix<f64>)> {
        let sens = endpoint_sensitivities(vf, &driver(v), 0.0, a)?;
        let mut b = DMatrix::zeros(n, d);
        for (k, dir) in dirs.iter().enumerate() {
            for (r, x) in sens.apply(dir).into_iter().enumerate() {
                b[(r, k)] = x;
            }
        }
        let f: Vec<f64> = sens.end.iter().zip(a_prime).map(|(y, t)| y - t).collect();
        Ok((f, b))
    };
    let mut v: Vec<f64> = a_prime.iter().zip(a).map(|(p, q)| p - q).collect();
    // Start from the flat guess sigma(a)^{-1} (a' - a).
    let s0 = crate::young::sigma_matrix(vf, a);
    if let Ok(x) = solve(&s0, &DVector::from_column_slice(&v)) {
        v = x.iter().copied().collect();
    }
    let mut trace = Vec::new();
    let mut iterations = 0;
    let (mut f, mut b) = shoot(&v)?;
    loop {
        let resid = euclid(&f);
        trace.push(IterationRecord {
            iteration: iterations,
            energy: euclid(&v).powi(2) * covariance(1.0, 1.0, hurst),
            endpoint_residual: resid,
            stationarity_residual: f64::NAN,
            step_length: 1.0,
        });
        if resid < opts.tolerance {
            break;
        }
        if iterations == opts.max_iterations {
            return Err(Error::NonConvergence { iterations, residual: resid });
        }
        let delta = solve(&b, &DVector::from_column_slice(&f))?;
        let mut step = 1.0;
        loop {
            let trial: Vec<f64> = v.iter().zip(delta.iter()).map(|(x, dx)| x - step * dx).collect();
            if let Ok((tf, tb)) = shoot(&trial) {
                if euclid(&tf) < resid || step < 1e-6 {
                    v = trial;
                    f = tf;
                    b = tb;
                    break;
                }
            }
            step *= 0.5;
            if step < 1e-9 {
                return Err(Error::NonConvergence { iterations, residual: resid });
            }
        }
        iterations += 1;
    }
    let gamma_bar = driver(&v);
    let y = solve_ode(vf, &gamma_bar, 0.0, a)?;
    check_elliptic(vf, (0..=steps).map(|i| y.y.point(i).to_vec()), opts.ellipticity_floor)?;
    // Energy through the one-node basis {R(., 1)}.
    let unit = CmBasis::new(hurst, d, &[1.0])?;
    let coeffs = CmElement { coeffs: v.clone() };
    let energy = unit.norm_sq(&coeffs);
    // <gamma, k>_H = v . k_1 and D_k phi^0_1 = B k_1 / R(1, 1) give nu = B^{-T} v R(1, 1).
    let bt = b.transpose() / covariance(1.0, 1.0, hurst);
    let nu: Vec<f64> = solve(&bt, &DVector::from_column_slice(&v))?.iter().copied().collect();
    // Stationarity measured against the full node basis.
    let basis = CmBasis::chebyshev(hurst, d, opts.nodes)?;
    let mut full = CmElement::zeros(basis.len());
    let last = basis.terminal_node().ok_or_else(|| Error::invalid("node basis lacks t = 1"))?;
    full.coeffs[last * d..(last + 1) * d].copy_from_slice(&v);
    let incr = basis_increments(&basis, steps);
    let lin = linearize(vf, &basis, &incr, &full, a, steps)?;
    let (w, cmat) = representers(&basis, &lin.jac);
    let (_, stat) = stationarity(&basis, &lin, &w, &cmat, &full)?;
    Ok(MinimizerSolution {
        gamma_bar,
        nodes: vec![1.0],
        coeffs,
        nu_bar: nu,
        energy,
        endpoint_residual: euclid(&f),
        stationarity_residual: stat,
        iterations,
        trace,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiStartReport {
    pub energies: Vec<f64>,
    pub failures: usize,
    /// Largest minus smallest converged energy.
    pub spread: f64,
    pub best: Option<MinimizerSolution>,
}

/// Runs `minimize_energy` from random starting points; disagreement between
/// the converged energies is reported, not resolved.
pub fn multi_start<V: VectorFieldSystem + ?Sized>(
    vf: &V,
    a: &[f64],
    a_prime: &[f64],
    hurst: HurstParam,
    opts: &MinimizerOptions,
    starts: usize,
    seed: u64,
) -> Result<MultiStartReport> {
    let basis = CmBasis::chebyshev(hurst, vf.driver_dim(), opts.nodes)?;
    let d = basis.dims();
    let last = basis.terminal_node().ok_or_else(|| Error::invalid("node basis lacks t = 1"))?;
    let scale = euclid(&a_prime.iter().zip(a).map(|(p, q)| p - q).collect::<Vec<_>>()).max(0.1);
    let mut energies = Vec::new();
    let mut failures = 0;
    let mut best: Option<MinimizerSolution> = None;
    for s in 0..starts {
        let mut rng = path_rng(seed, s as u64);
        let mut init = CmElement::zeros(basis.len());
        if s > 0 {
            // Random multiple of R(., 1) plus a few random node bumps.
            for k in 0..d {
                let z: f64 = StandardNormal.sample(&mut rng);
                init.coeffs[last * d + k] = scale * z;
            }
            for _ in 0..3 {
                let i = rng.gen_range(0..basis.nodes().len());
                for k in 0..d {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    init.coeffs[i * d + k] += 0.5 * scale * z;
                }
            }
        }
        match minimize_energy_from(vf, a, a_prime, &basis, &init, opts) {
            Ok(sol) => {
                energies.push(sol.energy);
                if best.as_ref().is_none_or(|b| sol.energy < b.energy) {
                    best = Some(sol);
                }
            }
            Err(Error::NonConvergence { .. }) => failures += 1,
            Err(e) => return Err(e),
        }
    }
    let max = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(MultiStartReport { spread: if energies.is_empty() { f64::NAN } else { max - min }, energies, failures, best })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;

    fn h(v: f64) -> HurstParam {
        HurstParam::new(v).unwrap()
    }

    #[test]
    fn flat_scalar_minimizer_is_reproducing_representer() {
        let vf = models::affine(0.5);
        let opts = MinimizerOptions::default();
        let sol = minimize_energy(&vf, &[0.2], &[1.0], h(0.75), &opts).unwrap();
        assert!((sol.energy - 0.64).abs() < 1e-9, "{}", sol.energy);
        assert!((sol.nu_bar[0] - 0.8).abs() < 1e-7);
        let exact = GridPath::from_fn(1, opts.steps, |t, o| o[0] = 0.8 * covariance(t, 1.0, h(0.75)));
        assert!(sol.gamma_bar.sup_distance(&exact).unwrap() < 1e-8);
        let geo = geodesic_minimizer(&vf, &[0.2], &[1.0], h(0.75), &opts).unwrap();
        assert!((geo.energy - 0.64).abs() < 1e-12 && (geo.nu_bar[0] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn coincident_endpoints_give_zero() {
        let vf = models::elliptic_2d();
        let opts = MinimizerOptions::default();
        let sol = minimize_energy(&vf, &[0.3, 0.1], &[0.3, 0.1], h(0.7), &opts).unwrap();
        assert_eq!(sol.energy, 0.0);
        assert_eq!(sol.iterations, 0);
        let geo = geodesic_minimizer(&models::commuting_frame_2d(), &[0.3, 0.1], &[0.3, 0.1], h(0.7), &opts).unwrap();
        assert!(geo.coeffs.coeffs.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn stationarity_at_analytic_solution() {
        let vf = models::affine(0.0);
        let hu = h(0.75);
        let opts = MinimizerOptions::default();
        let basis = CmBasis::chebyshev(hu, 1, opts.nodes).unwrap();
        let mut init = CmElement::zeros(basis.len());
        init.coeffs[basis.terminal_node().unwrap()] = 0.5;
        let sol = minimize_energy_from(&vf, &[0.0], &[0.5], &basis, &init, &opts).unwrap();
        assert_eq!(sol.iterations, 0);
        assert!(sol.stationarity_residual < 1e-10);
    }

    #[test]
    fn one_dimensional_metric_distance() {
        let vf = models::quadratic_metric();
        let opts = MinimizerOptions::default();
        let d = 10f64.sqrt() * (0.5 / 10f64.sqrt()).atan();
        let geo = geodesic_minimizer(&vf, &[0.0], &[0.5], h(0.75), &opts).unwrap();
        assert!((geo.energy - d * d).abs() / (d * d) < 1e-4, "{} vs {}", geo.energy, d * d);
        let sol = minimize_energy(&vf, &[0.0], &[0.5], h(0.75), &opts).unwrap();
        assert!((sol.energy - geo.energy).abs() / geo.energy < 1e-4);
        assert!(geo.stationarity_residual < 1e-6);
    }

    #[test]
    fn commuting_frame_agrees_with_geodesic() {
        let vf = models::commuting_frame_2d();
        let opts = MinimizerOptions::default();
        let (a, b) = ([0.1, -0.2], [0.6, 0.3]);
        let geo = geodesic_minimizer(&vf, &a, &b, h(0.7), &opts).unwrap();
        let sol = minimize_energy(&vf, &a, &b, h(0.7), &opts).unwrap();
        assert!((sol.energy - geo.energy).abs() / geo.energy < 1e-4, "{} vs {}", sol.energy, geo.energy);
        for k in 0..2 {
            assert!((sol.nu_bar[k] - geo.nu_bar[k]).abs() < 1e-4);
        }
        assert!(sol.endpoint_residual < 1e-9);
    }

    #[test]
    fn failures_are_reported() {
        let rd = models::rank_deficient_2d();
        let err = minimize_energy(&rd, &[0.0, 0.0], &[1.0, 0.0], h(0.7), &MinimizerOptions::default()).unwrap_err();
        assert!(matches!(err, Error::DegenerateDiffusion { .. }));
        let vf = models::sin_1d(0.0);
        let opts = MinimizerOptions { max_iterations: 1, ..Default::default() };
        assert!(matches!(minimize_energy(&vf, &[0.0], &[2.0], h(0.7), &opts), Err(Error::NonConvergence { .. })));
    }

    #[test]
    fn multi_start_agrees_on_elliptic_model() {
        let vf = models::elliptic_2d();
        let opts = MinimizerOptions { steps: 128, ..Default::default() };
        let rep = multi_start(&vf, &[0.0, 0.0], &[0.4, 0.2], h(0.7), &opts, 3, 9).unwrap();
        assert_eq!(rep.energies.len() + rep.failures, 3);
        assert!(rep.spread < 1e-6, "{:?}", rep.energies);
    }
}
