//! Verification suites. Each check compares a computed quantity against an
//! independent oracle at a fixed tolerance and records both.

use serde::{Deserialize, Serialize};
use youngheat_core::asymptotics::{
    geometric_between, geometric_grid, off_diagonal_pipeline, on_diagonal_pipeline, PipelineConfig,
};
use youngheat_core::cameron_martin::{
    h_inner, minimize_energy, project_kernel, second_order_form, CmBasis, CmElement, MinimizerOptions, VolterraKernel,
    DEFAULT_NODES,
};
use youngheat_core::expansion::{build_lattice, phi_hierarchy, remainder_from, scaled_solution, LatticeKind};
use youngheat_core::fbm::{covariance, sample_paths, FbmSampler, SamplerKind};
use youngheat_core::malliavin::{
    directional_derivative, estimate_density, nondegeneracy_profile, second_derivative, Bandwidth,
};
use youngheat_core::young::{holder_norm, solve_ode, young_integral};
use youngheat_core::{models, stats, Executor, GridPath, HurstParam, VectorFieldSystem};

use crate::error::{AppError, AppResult};
use crate::registry;

pub const SUITES: &[&str] = &["fbm", "young", "expansion", "malliavin", "cm", "on-diag", "off-diag", "properties"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub target: f64,
    pub tolerance: f64,
    /// `abs`, `rel`, `below` or `above`.
    pub kind: String,
    pub pass: bool,
}

impl Check {
    pub fn abs(name: impl Into<String>, value: f64, target: f64, tol: f64) -> Self {
        let pass = (value - target).abs() <= tol;
        Check { name: name.into(), value, target, tolerance: tol, kind: "abs".into(), pass }
    }

    pub fn rel(name: impl Into<String>, value: f64, target: f64, tol: f64) -> Self {
        let pass = ((value - target) / target).abs() <= tol;
        Check { name: name.into(), value, target, tolerance: tol, kind: "rel".into(), pass }
    }

    pub fn below(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Check { name: name.into(), value, target: bound, tolerance: 0.0, kind: "below".into(), pass: value < bound }
    }

    pub fn above(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Check { name: name.into(), value, target: bound, tolerance: 0.0, kind: "above".into(), pass: value > bound }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub schema_version: u32,
    pub suite: String,
    pub settings: VerifySettings,
    pub checks: Vec<Check>,
    pub pass: bool,
    #[serde(default)]
    pub details: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifySettings {
    pub seed: u64,
    pub hurst: f64,
    /// Model for the on/off-diagonal suites.
    pub model: String,
    pub b: Option<f64>,
    /// Overrides the Monte-Carlo sample count of every check.
    pub samples: Option<usize>,
}

impl Default for VerifySettings {
    fn default() -> Self {
        VerifySettings { seed: 1, hurst: 0.75, model: "affine".into(), b: None, samples: None }
    }
}

impl VerifySettings {
    fn h(&self) -> AppResult<HurstParam> {
        HurstParam::new(self.hurst).map_err(|e| AppError::Config(e.to_string()))
    }

    fn m(&self, default: usize) -> usize {
        self.samples.unwrap_or(default)
    }
}

pub fn run_suite<E: Executor>(name: &str, s: &VerifySettings, exec: &E) -> AppResult<SuiteReport> {
    let mut details = serde_json::Value::Null;
    let checks = match name {
        "fbm" => fbm_covariance(s, exec)?,
        "young" => young_properties(s)?,
        "expansion" => {
            let mut c = lattice_oracle();
            c.extend(remainder_orders(s, exec)?);
            c
        }
        "malliavin" => {
            let mut c = exact_affine_density(s, exec)?;
            c.extend(derivative_orders(s, exec)?);
            c.extend(nondegeneracy_contrast(s, exec)?);
            c.extend(directional_derivative_fd(s)?);
            c
        }
        "cm" => {
            let mut c = volterra_identity(s)?;
            c.extend(cm_properties(s)?);
            c
        }
        "on-diag" => {
            let (c, d) = on_diagonal(s, exec)?;
            details = d;
            c
        }
        "off-diag" => {
            let (c, d) = off_diagonal(s, exec)?;
            details = d;
            c
        }
        "properties" => property_suite(s)?,
        _ => return Err(AppError::Usage(format!("unknown suite `{name}`; available: {}", SUITES.join(", ")))),
    };
    let pass = checks.iter().all(|c| c.pass);
    Ok(SuiteReport { schema_version: 1, suite: name.into(), settings: s.clone(), checks, pass, details })
}

/// Empirical `Cov(w_s, w_t)` against `R(s, t)` at 20 grid pairs, each within
/// three standard errors of the product mean. `H`, `N = 128`, `M = 5000`.
pub fn fbm_covariance<E: Executor>(s: &VerifySettings, exec: &E) -> AppResult<Vec<Check>> {
    let (h, n) = (s.h()?, 128);
    let ens = sample_paths(h, 1, n, s.m(5000), s.seed, exec)?;
    let mut out = Vec::new();
    for k in 0..20 {
        let (i, j) = (6 * (k + 1), n - 5 * k);
        let (xi, xj) = (ens.values_at(i, 0), ens.values_at(j, 0));
        let prod: Vec<f64> = xi.iter().zip(&xj).map(|(a, b)| a * b).collect();
        let (ti, tj) = (i as f64 / n as f64, j as f64 / n as f64);
        let se = stats::std_error(&prod);
        out.push(Check::abs(format!("cov({ti:.4},{tj:.4})"), stats::mean(&prod), covariance(ti, tj, h), 3.0 * se));
    }
    Ok(out)
}

/// `max |R(t, T) - int_0^t K(t, s) K(T, s) ds|` over the Chebyshev node pairs.
pub fn volterra_identity(s: &VerifySettings) -> AppResult<Vec<Check>> {
    let h = s.h()?;
    let k = VolterraKernel::new(h);
    let nodes = youngheat_core::math::chebyshev_nodes(DEFAULT_NODES);
    let mut worst: f64 = 0.0;
    for (i, &t) in nodes.iter().enumerate() {
        for &tt in &nodes[i..] {
            let (lo, hi) = if t <= tt { (t, tt) } else { (tt, t) };
            worst = worst.max((covariance(lo, hi, h) - k.product_integral(lo, hi)).abs());
        }
    }
    Ok(vec![Check::below("volterra identity max error", worst, 1e-3)])
}

/// KDE of the affine model against its Gaussian closed form.
/// `b = 0.5`, `a = 0`, `a' = 1`, `t = 0.5`, `M = 1e5`.
pub fn exact_affine_density<E: Executor>(s: &VerifySettings, exec: &E) -> AppResult<Vec<Check>> {
    let h = s.h()?;
    let (b, a, ap, t) = (0.5, 0.0, 1.0, 0.5);
    let est = estimate_density(
        &models::affine(b),
        &[a],
        h,
        t,
        &[vec![ap]],
        64,
        s.m(100_000),
        s.seed,
        Bandwidth::Silverman,
        exec,
    )?;
    let s2 = t.powf(2.0 * h.value());
    let exact = (-(a + b * t - ap) * (a + b * t - ap) / (2.0 * s2)).exp() / (2.0 * std::f64::consts::PI * s2).sqrt();
    Ok(vec![Check::rel("affine density at t=0.5", est.values[0], exact, 0.05)])
}

fn pipeline_config(s: &VerifySettings, h: HurstParam, grid: Vec<f64>) -> PipelineConfig {
    let mut cfg = PipelineConfig::new(h);
    cfg.samples = s.m(100_000);
    cfg.seed = s.seed;
    cfg.t_grid = grid;
    cfg
}

/// On-diagonal fit over 8 geometric times in `[0.05, 0.8]`. The constant term
/// is compared with the Gaussian prediction; for the affine model the
/// `t^{1-H}` coefficient must vanish and the `t^{2-2H}` one equals
/// `-b^2 / (2 sqrt(2 pi))`.
pub fn on_diagonal<E: Executor>(s: &VerifySettings, exec: &E) -> AppResult<(Vec<Check>, serde_json::Value)> {
    let h = s.h()?;
    let vf = registry::resolve(&s.model, s.b)?;
    let a = vec![0.0; vf.state_dim()];
    let cfg = pipeline_config(s, h, geometric_between(0.05, 0.8, 8));
    let rep = on_diagonal_pipeline(&vf, &a, &cfg, exec)?;
    let fit = &rep.fit;
    let mut out = vec![Check::rel("c0", fit.coefficients[0], rep.leading_constant, 0.03)];
    let hv = h.value();
    if let Some((c, se)) = fit.coefficient_at(1.0 - hv) {
        out.push(Check::abs("c at t^(1-H)", c, 0.0, 2.0 * se));
    }
    if s.model == "affine" {
        let b = s.b.unwrap_or(0.5);
        let target = -b * b / (2.0 * (2.0 * std::f64::consts::PI).sqrt());
        let c = fit.coefficient_at(2.0 - 2.0 * hv).map_or(f64::NAN, |x| x.0);
        out.push(Check::rel("c at t^(2-2H)", c, target, 0.10));
    }
    Ok((out, serde_json::to_value(&rep).unwrap_or_default()))
}

/// Off-diagonal pipeline for `a = 0`, `a' = 1`: minimizer constants against
/// the affine closed forms and the leading fitted coefficient against
/// `(2 pi)^{-1/2}`.
pub fn off_diagonal<E: Executor>(s: &VerifySettings, exec: &E) -> AppResult<(Vec<Check>, serde_json::Value)> {
    let h = s.h()?;
    let vf = registry::resolve(&s.model, s.b)?;
    let n = vf.state_dim();
    let (a, ap) = (vec![0.0; n], vec![1.0; n]);
    let cfg = pipeline_config(s, h, geometric_grid(0.8, 0.63 / 0.8, 8));
    let rep = off_diagonal_pipeline(&vf, &a, &ap, &cfg, &MinimizerOptions::default(), exec)?;
    let mut out = vec![
        Check::below("endpoint residual", rep.minimizer.endpoint_residual, 1e-8),
        Check::below("stationarity residual", rep.minimizer.stationarity_residual, 1e-6),
    ];
    if s.model == "affine" {
        let b = s.b.unwrap_or(0.5);
        out.push(Check::abs("energy", rep.energy, 1.0, 1e-6));
        out.push(Check::abs("nu_bar", rep.nu_bar[0], 1.0, 1e-6));
        out.push(Check::abs("beta", rep.beta, b, 1e-6));
        out.push(Check::rel("alpha_0", rep.leading_coeff, 1.0 / (2.0 * std::f64::consts::PI).sqrt(), 0.05));
    }
    Ok((out, serde_json::to_value(&rep).unwrap_or_default()))
}

/// Log-log slopes of `E[||R^kappa||^2_{0.6-Hoelder}]^{1/2}` in `eps` for
/// `kappa = 1, 1/H, 2`: `sigma = sin + 2`, `b = 1`, base path from the
/// affine-model minimizer between 0 and 1, `N = 128`, `M = 500`.
pub fn remainder_orders<E: Executor>(s: &VerifySettings, exec: &E) -> AppResult<Vec<Check>> {
    let h = s.h()?;
    let n = 128;
    let opts = MinimizerOptions { steps: n, ..Default::default() };
    let gbar = minimize_energy(&models::affine(0.0), &[0.0], &[1.0], h, &opts)?.gamma_bar;
    let vf = models::sin_1d(1.0);
    let sampler = FbmSampler::new(h, n, SamplerKind::Auto)?;
    let kappas = [1.0, h.inv(), 2.0];
    let eps: Vec<f64> = (3..=8).map(|k| 0.5f64.powi(k)).collect();
    let per_path: Vec<Result<Vec<f64>, youngheat_core::Error>> = exec.map_indexed(s.m(500), |m| {
        let w = sampler.sample_path(1, s.seed, m as u64);
        let hier = phi_hierarchy(&gbar, &w, &vf, &[0.0], h, 2.0)?;
        let mut v = Vec::with_capacity(kappas.len() * eps.len());
        for &k in &kappas {
            for &e in &eps {
                v.push(holder_norm(&remainder_from(e, &hier, &vf, k)?, 0.6).powi(2));
            }
        }
        Ok(v)
    });
    let per_path: Vec<Vec<f64>> = per_path.into_iter().collect::<Result<_, _>>()?;
    let count = per_path.len() as f64;
    let mut out = Vec::new();
    for (ki, &k) in kappas.iter().enumerate() {
        let rms: Vec<f64> = (0..eps.len())
            .map(|j| (per_path.iter().map(|v| v[ki * eps.len() + j]).sum::<f64>() / count).sqrt())
            .collect();
        let slope = stats::log_log_slope(&eps, &rms).slope;
        out.push(Check::abs(format!("remainder slope kappa={k:.4}"), slope, k, 0.1));
    }
    Ok(out)
}

/// Slopes of the L2 norms of the first and second directional derivatives
/// at `gamma = 0` in the direction `R(., 1)`: `sigma = sin + 2`, `b = 1`.
pub fn derivative_orders<E: Executor>(s: &VerifySettings, exec: &E) -> AppResult<Vec<Check>> {
    let h = s.h()?;
    let n = 128;
    let vf = models::sin_1d(1.0);
    let zero = GridPath::zeros(1, n);
    let dir = GridPath::from_fn(1, n, |t, o| o[0] = covariance(t, 1.0, h));
    let sampler = FbmSampler::new(h, n, SamplerKind::Auto)?;
    let eps: Vec<f64> = (3..=8).map(|k| 0.5f64.powi(k)).collect();
    let rows: Vec<Result<Vec<(f64, f64)>, youngheat_core::Error>> = exec.map_indexed(s.m(500), |m| {
        let w = sampler.sample_path(1, s.seed, m as u64);
        eps.iter()
            .map(|&e| {
                let d1 = directional_derivative(e, &zero, &w, &dir, &vf, &[0.0], h)?.end()[0];
                let d2 = second_derivative(e, &zero, &w, &dir, &dir, &vf, &[0.0], h)?.end()[0];
                Ok((d1 * d1, d2 * d2))
            })
            .collect()
    });
    let rows: Vec<Vec<(f64, f64)>> = rows.into_iter().collect::<Result<_, _>>()?;
    let count = rows.len() as f64;
    let l2 = |pick: fn(&(f64, f64)) -> f64| -> Vec<f64> {
        (0..eps.len()).map(|j| (rows.iter().map(|r| pick(&r[j])).sum::<f64>() / count).sqrt()).collect()
    };
    let s1 = stats::log_log_slope(&eps, &l2(|p| p.0)).slope;
    let s2 = stats::log_log_slope(&eps, &l2(|p| p.1)).slope;
    Ok(vec![Check::abs("first derivative slope", s1, 1.0, 0.05), Check::abs("second derivative slope", s2, 2.0, 0.1)])
}

/// Elements of one lattice by direct enumeration of its definition.
pub fn brute_force_lattice(kind: LatticeKind, h: f64, cutoff: f64) -> Vec<f64> {
    const TOL: f64 = 1e-9;
    let first = |c: f64| -> Vec<f64> {
        let top = c.max(0.0).ceil() as i64 + 2;
        let mut v = Vec::new();
        for p in 0..=top {
            for q in 0..=top {
                let x = p as f64 + q as f64 / h;
                if x <= c + TOL {
                    v.push(x);
                }
            }
        }
        v
    };
    let shifted: Vec<f64> = first(cutoff + 1.0).into_iter().filter(|x| *x > TOL).map(|x| x - 1.0).collect();
    let excluded = [0.0, 1.0, 1.0 / h];
    let shifted2: Vec<f64> = first(cutoff + 2.0)
        .into_iter()
        .filter(|x| excluded.iter().all(|e| (x - e).abs() > TOL))
        .map(|x| x - 2.0)
        .filter(|x| *x >= -TOL)
        .collect();
    // Finite sums of generators (the empty sum only when 0 is a generator).
    let sums = |gens: &[f64]| -> Vec<f64> {
        let mut reach: Vec<f64> = gens.iter().copied().filter(|g| *g <= cutoff + TOL).collect();
        let positive: Vec<f64> = reach.iter().copied().filter(|g| *g > TOL).collect();
        let mut frontier = reach.clone();
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for x in &frontier {
                for g in &positive {
                    let y = x + g;
                    if y <= cutoff + TOL && !reach.iter().any(|r| (r - y).abs() < TOL) {
                        reach.push(y);
                        next.push(y);
                    }
                }
            }
            frontier = next;
        }
        reach
    };
    let mut v = match kind {
        LatticeKind::L1 => first(cutoff),
        LatticeKind::L2 => shifted.into_iter().filter(|x| *x <= cutoff + TOL).collect(),
        LatticeKind::L2Prime => shifted2.into_iter().filter(|x| *x <= cutoff + TOL).collect(),
        LatticeKind::L3 => sums(&shifted),
        LatticeKind::L3Prime => sums(&shifted2),
        LatticeKind::L4 => {
            let (a, b) = (sums(&shifted), sums(&shifted2));
            a.iter().flat_map(|x| b.iter().map(move |y| x + y)).filter(|z| *z <= cutoff + TOL).collect()
        }
    };
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() < TOL);
    v
}

/// All six lattices for `H` in {0.6, 0.75, 0.9} at cutoff 5 against the
/// enumeration above; the check value is the number of disagreeing elements.
pub fn lattice_oracle() -> Vec<Check> {
    let mut out = Vec::new();
    for hv in [0.6, 0.75, 0.9] {
        let h = HurstParam::new(hv).expect("admissible");
        for kind in LatticeKind::ALL {
            let want = brute_force_lattice(kind, hv, 5.0);
            let mismatches = match build_lattice(kind, h, 5.0) {
                Ok(lat) => {
                    let got = lat.values();
                    let pairs_ok =
                        lat.elements.iter().filter(|e| (e.p as f64 + e.q as f64 / hv - e.value).abs() > 1e-12).count();
                    let common = got.iter().zip(&want).filter(|(g, w)| (*g - *w).abs() > 1e-9).count();
                    common + got.len().abs_diff(want.len()) + pairs_ok
                }
                Err(_) => want.len().max(1),
            };
            out.push(Check::abs(format!("{kind} H={hv}"), mismatches as f64, 0.0, 0.0));
        }
    }
    out
}

/// `E[|det C|^{-1}]` over `eps` in {1, 1/2, 1/4, 1/8}: flat for the elliptic
/// model, growing for the rank-deficient one.
pub fn nondegeneracy_contrast<E: Executor>(s: &VerifySettings, exec: &E) -> AppResult<Vec<Check>> {
    let h = s.h()?;
    let grid = [1.0, 0.5, 0.25, 0.125];
    let m = s.m(200);
    let ell = nondegeneracy_profile(&models::elliptic_2d(), &[0.0, 0.0], h, &grid, &[1.0], 64, m, s.seed, exec)?;
    let rd = nondegeneracy_profile(&models::rank_deficient_2d(), &[0.0, 0.0], h, &grid, &[1.0], 64, m, s.seed, exec)?;
    let growth = rd.values[grid.len() - 1][0] / rd.values[0][0];
    Ok(vec![
        Check::below("elliptic profile spread", ell.spread(0), 1.5),
        Check::above("rank-deficient growth", growth, 10.0),
    ])
}

fn fbm_path(h: HurstParam, d: usize, n: usize, seed: u64, idx: u64) -> AppResult<GridPath> {
    Ok(FbmSampler::new(h, n, SamplerKind::Auto)?.sample_path(d, seed, idx))
}

fn smooth(d: usize, n: usize, f: f64) -> GridPath {
    GridPath::from_fn(d, n, |t, o| {
        for (k, v) in o.iter_mut().enumerate() {
            *v = 0.5 * (f * t + k as f64).sin() + 0.3 * t;
        }
    })
}

/// Young-integral bilinearity and Chasles, `J Jinv = Id`.
pub fn young_properties(s: &VerifySettings) -> AppResult<Vec<Check>> {
    let h = s.h()?;
    let n = 256;
    let (f, g, x) = (fbm_path(h, 1, n, s.seed, 0)?, fbm_path(h, 1, n, s.seed, 1)?, fbm_path(h, 1, n, s.seed, 2)?);
    let ifx = young_integral(&f, &x)?;
    let igx = young_integral(&g, &x)?;
    let isum = young_integral(&f.add(&g)?, &x)?;
    let scale = 1.0 + ifx.sup_norm() + igx.sup_norm();
    let lin1 = isum.sup_distance(&ifx.add(&igx)?)? / scale;
    let ifg = young_integral(&f, &x.add(&g)?)?;
    let iff = young_integral(&f, &g)?;
    let lin2 = ifg.sup_distance(&ifx.add(&iff)?)? / (scale + iff.sup_norm());
    let mut chasles: f64 = 0.0;
    for split in [1, n / 3, n / 2, n - 1] {
        let tail = |p: &GridPath| GridPath::from_values(1, n - split, p.values()[split..].to_vec());
        let second = young_integral(&tail(&f)?, &tail(&x)?)?.end()[0];
        chasles = chasles.max((ifx.get(split, 0) + second - ifx.end()[0]).abs() / scale);
    }
    let vf = models::elliptic_2d();
    let sol = solve_ode(&vf, &smooth(2, 1024, 3.0), 1.0, &[0.2, -0.1])?;
    let rough = solve_ode(&vf, &fbm_path(h, 2, 1024, s.seed, 3)?, 1.0, &[0.2, -0.1])?;
    Ok(vec![
        Check::below("integrand linearity", lin1, 1e-12),
        Check::below("integrator linearity", lin2, 1e-12),
        Check::below("Chasles", chasles, 1e-12),
        Check::below("J Jinv - Id, smooth driver", sol.identity_residual(), 1e-8),
        Check::below("J Jinv - Id, fBm driver", rough.identity_residual(), 1e-6),
    ])
}

/// Finite-difference error of the first directional derivative halves with the step.
pub fn directional_derivative_fd(s: &VerifySettings) -> AppResult<Vec<Check>> {
    let h = s.h()?;
    let vf = models::elliptic_2d();
    let (n, eps, a) = (128, 0.5, [0.2, -0.3]);
    let (g, w, dir) = (smooth(2, n, 0.4), fbm_path(h, 2, n, s.seed, 3)?, smooth(2, n, 2.1));
    let xi = directional_derivative(eps, &g, &w, &dir, &vf, &a, h)?;
    let base = scaled_solution(eps, &g, &w, &vf, &a, h)?;
    let mut errs = Vec::new();
    for r in [1e-2, 5e-3, 2.5e-3] {
        let plus = scaled_solution(eps, &g, &w.axpy(r, &dir)?, &vf, &a, h)?;
        errs.push(plus.y.sub(&base.y)?.scaled(1.0 / r).sup_distance(&xi)?);
    }
    Ok(vec![
        Check::abs("xi^h finite-difference ratio r=1e-2/5e-3", errs[0] / errs[1], 2.0, 0.2),
        Check::abs("xi^h finite-difference ratio r=5e-3/2.5e-3", errs[1] / errs[2], 2.0, 0.2),
        Check::below("xi^h finite-difference error at r=2.5e-3", errs[2] / (1.0 + xi.sup_norm()), 1e-2),
    ])
}

/// Reproducing-kernel identities, projection idempotence and annihilation,
/// and the diagonal of the second-order form.
pub fn cm_properties(s: &VerifySettings) -> AppResult<Vec<Check>> {
    let h = s.h()?;
    let basis = CmBasis::chebyshev(h, 1, DEFAULT_NODES)?;
    let last = basis.terminal_node().ok_or_else(|| AppError::Failed("basis lacks the node t = 1".into()))?;
    let unit = |i: usize| {
        let mut c = CmElement::zeros(basis.len());
        c.coeffs[i] = 1.0;
        c
    };
    let r11 = h_inner(&unit(last), &unit(last), &basis);
    let mut gram_err: f64 = 0.0;
    let mut repro_err: f64 = 0.0;
    let x = CmElement { coeffs: (0..basis.len()).map(|i| (i as f64 * 0.37).sin()).collect() };
    for (i, &ti) in basis.nodes().iter().enumerate() {
        for (j, &tj) in basis.nodes().iter().enumerate() {
            gram_err = gram_err.max((h_inner(&unit(i), &unit(j), &basis) - covariance(ti, tj, h)).abs());
        }
        let mut v = [0.0];
        basis.value_at(&x, ti, &mut v);
        repro_err = repro_err.max((h_inner(&x, &unit(i), &basis) - v[0]).abs());
    }

    let n = 256;
    let line = GridPath::from_fn(1, n, |t, o| o[0] = t);
    let p = project_kernel(&models::affine(0.5), &[0.0], &line, &basis)?;
    let (mut annihilation, mut idempotence): (f64, f64) = (0.0, 0.0);
    for m in 0..5 {
        let w = fbm_path(h, 1, n, s.seed, m)?;
        let pw = p.apply(&w)?;
        annihilation = annihilation.max(p.phi1(&pw)[0].abs());
        idempotence = idempotence.max(p.apply(&pw)?.sup_distance(&pw)?);
    }
    let representer = p.apply(&p.representer_paths[0])?.sup_norm();

    let vf = models::elliptic_2d();
    let a = [0.1, -0.1];
    let sol = minimize_energy(&vf, &a, &[0.5, 0.2], h, &MinimizerOptions { steps: n, ..Default::default() })?;
    let w = fbm_path(h, 2, n, s.seed, 7)?;
    let diag = second_order_form(&w, &w, &vf, &a, &sol.gamma_bar)?;
    let hier = phi_hierarchy(&sol.gamma_bar, &w, &vf, &a, h, 2.0)?;
    let phi2 = hier.phi(2.0)?.end();
    let psi_err = diag.iter().zip(phi2).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);

    Ok(vec![
        Check::abs("<R(.,1), R(.,1)>", r11, 1.0, 1e-12),
        Check::below("Gram matrix vs R(t_i, t_j)", gram_err, 1e-12),
        Check::below("reproducing property", repro_err, 1e-10),
        Check::below("phi1 of projected noise", annihilation, 1e-10),
        Check::below("projection idempotence", idempotence, 1e-10),
        Check::below("projection of the representer", representer, 1e-10),
        Check::below("psi(w,w) - phi^2_1(w)", psi_err, 1e-8),
    ])
}

/// Every deterministic property check.
pub fn property_suite(s: &VerifySettings) -> AppResult<Vec<Check>> {
    let mut c = young_properties(s)?;
    c.extend(directional_derivative_fd(s)?);
    c.extend(cm_properties(s)?);
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use youngheat_core::Sequential;

    #[test]
    fn brute_force_known_values() {
        let v = brute_force_lattice(LatticeKind::L1, 0.75, 3.0);
        let want = [0.0, 1.0, 4.0 / 3.0, 2.0, 7.0 / 3.0, 8.0 / 3.0, 3.0];
        assert_eq!(v.len(), want.len());
        for (a, b) in v.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(brute_force_lattice(LatticeKind::L2, 0.6, 0.0), vec![0.0]);
    }

    #[test]
    fn lattice_checks_pass() {
        assert!(lattice_oracle().iter().all(|c| c.pass));
    }

    #[test]
    fn unknown_suite_is_a_usage_error() {
        let err = run_suite("bogus", &VerifySettings::default(), &Sequential).unwrap_err();
        assert_eq!(err.exit_code(), crate::error::EXIT_USAGE);
    }

    #[test]
    fn check_constructors() {
        assert!(Check::rel("x", 1.04, 1.0, 0.05).pass);
        assert!(!Check::rel("x", 1.06, 1.0, 0.05).pass);
        assert!(!Check::below("x", f64::NAN, 1.0).pass);
        assert!(!Check::abs("x", f64::NAN, 0.0, 1.0).pass);
    }
}
