use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use super::lattice::{build_lattice, LatticeExponent, LatticeKind, MERGE_TOL};
use crate::error::{Error, Result};
use crate::fbm::HurstParam;
use crate::path::GridPath;
use crate::young::series::{heun, Algebra, Source, Term};
use crate::young::{solve_ode, VectorFieldSystem, YoungSolution};

/// Solution of `dy = sigma(y) (eps dw + dgamma) + b(y) eps^{1/H} dt`.
pub fn scaled_solution<V: VectorFieldSystem + ?Sized>(
    eps: f64,
    gamma: &GridPath,
    w: &GridPath,
    vf: &V,
    a: &[f64],
    hurst: HurstParam,
) -> Result<YoungSolution> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::invalid("scale must lie in [0, 1]"));
    }
    gamma.check_same_grid(w)?;
    let driver = gamma.axpy(eps, w)?;
    solve_ode(vf, &driver, eps.powf(hurst.inv()), a)
}

/// Taylor coefficients of the (discrete) Ito map around `gamma` in the scale.
///
/// The scheme is run over bivariate power series in `(eps, eps^{1/H})`; the
/// coefficient of `eps^p eps^{q/H}` is the exact derivative of the discrete
/// flow, and `phi^kappa` sums the coefficients of all pairs with
/// `p + q/H = kappa`.
#[derive(Debug, Clone)]
pub struct ExpansionHierarchy {
    pub hurst: HurstParam,
    pub base: GridPath,
    pub w: GridPath,
    pub a: Vec<f64>,
    pub kappas: Vec<LatticeExponent>,
    pub phi: Vec<GridPath>,
    /// Jacobian pair along `phi^0`.
    pub jtilde: YoungSolution,
}

impl ExpansionHierarchy {
    pub fn phi(&self, kappa: f64) -> Result<&GridPath> {
        self.kappas
            .iter()
            .position(|k| (k.value - kappa).abs() < MERGE_TOL)
            .map(|i| &self.phi[i])
            .ok_or(Error::NotInLattice(kappa))
    }

    pub fn kappa_max(&self) -> f64 {
        self.kappas.last().map(|k| k.value).unwrap_or(0.0)
    }

    /// `sum_{kappa <= kappa_m} eps^kappa phi^kappa`.
    pub fn partial_sum(&self, eps: f64, kappa_m: f64) -> Result<GridPath> {
        if kappa_m > self.kappa_max() + MERGE_TOL {
            return Err(Error::invalid("hierarchy does not reach the requested order"));
        }
        let mut acc = GridPath::zeros(self.phi[0].dims(), self.base.steps());
        for (k, p) in self.kappas.iter().zip(&self.phi) {
            if k.value <= kappa_m + MERGE_TOL {
                let c = if k.value == 0.0 { 1.0 } else { eps.powf(k.value) };
                acc = acc.axpy(c, p)?;
            }
        }
        Ok(acc)
    }
}

pub fn phi_hierarchy<V: VectorFieldSystem + ?Sized>(
    gamma: &GridPath,
    w: &GridPath,
    vf: &V,
    a: &[f64],
    hurst: HurstParam,
    kappa_max: f64,
) -> Result<ExpansionHierarchy> {
    gamma.check_same_grid(w)?;
    let lattice = build_lattice(LatticeKind::L1, hurst, kappa_max.max(0.0))?;
    lattice.require(kappa_max)?;
    let mut pairs: Vec<(u32, u32)> = Vec::new();
    let qmax = (kappa_max * hurst.value()).floor() as u32;
    for q in 0..=qmax {
        for p in 0..=(kappa_max.floor() as u32) {
            if LatticeExponent::new(p as i64, q as i64, hurst).value <= kappa_max + MERGE_TOL {
                pairs.push((p, q));
            }
        }
    }
    pairs.sort_by_key(|&(p, q)| (p + q, q));
    let alg = Algebra::power_series(&pairs);
    let terms = [
        Term { mono: 0, source: Source::Path(gamma), scale: 1.0 },
        Term { mono: pairs.iter().position(|&e| e == (1, 0)).unwrap_or(0), source: Source::Path(w), scale: 1.0 },
        Term { mono: pairs.iter().position(|&e| e == (0, 1)).unwrap_or(0), source: Source::Clock, scale: 1.0 },
    ];
    // Terms pointing at a truncated monomial would land on the base.
    let terms: Vec<Term<'_>> =
        terms.into_iter().enumerate().filter(|(i, t)| *i == 0 || t.mono != 0).map(|(_, t)| t).collect();
    let coeffs = heun(vf, &alg, a, gamma.steps(), &terms)?;

    let mut phi: Vec<GridPath> = Vec::new();
    for k in &lattice.elements {
        let mut acc = GridPath::zeros(vf.state_dim(), gamma.steps());
        for (m, &(p, q)) in pairs.iter().enumerate() {
            if (LatticeExponent::new(p as i64, q as i64, hurst).value - k.value).abs() < MERGE_TOL {
                acc = acc.add(&coeffs[m])?;
            }
        }
        phi.push(acc);
    }
    let jtilde = solve_ode(vf, gamma, 0.0, a)?;
    Ok(ExpansionHierarchy {
        hurst,
        base: gamma.clone(),
        w: w.clone(),
        a: a.to_vec(),
        kappas: lattice.elements,
        phi,
        jtilde,
    })
}

/// `ytilde^eps - sum_{kappa <= kappa_m} eps^kappa phi^kappa` for the `w`
/// the hierarchy was built on.
pub fn remainder<V: VectorFieldSystem + ?Sized>(
    eps: f64,
    hierarchy: &ExpansionHierarchy,
    vf: &V,
    kappa_m: f64,
) -> Result<GridPath> {
    let y = scaled_solution(eps, &hierarchy.base, &hierarchy.w, vf, &hierarchy.a, hierarchy.hurst)?;
    y.y.sub(&hierarchy.partial_sum(eps, kappa_m)?)
}

/// Remainder that starts at `kappa`: every lattice term strictly below it is removed.
pub fn remainder_from<V: VectorFieldSystem + ?Sized>(
    eps: f64,
    hierarchy: &ExpansionHierarchy,
    vf: &V,
    kappa: f64,
) -> Result<GridPath> {
    let below =
        hierarchy.kappas.iter().map(|k| k.value).filter(|v| *v < kappa - MERGE_TOL).fold(f64::NEG_INFINITY, f64::max);
    if below == f64::NEG_INFINITY {
        let y = scaled_solution(eps, &hierarchy.base, &hierarchy.w, vf, &hierarchy.a, hierarchy.hurst)?;
        return Ok(y.y);
    }
    remainder(eps, hierarchy, vf, below)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;
    use crate::young::{matrix_at, sigma_matrix, young_integral};
    use alloc::vec;

    fn h(v: f64) -> HurstParam {
        HurstParam::new(v).unwrap()
    }

    fn smooth(n: usize, f: f64) -> GridPath {
        GridPath::from_fn(1, n, move |t, o| o[0] = (f * t).sin() + 0.3 * t)
    }

    #[test]
    fn scaled_solution_limits() {
        let vf = models::sin_1d(0.4);
        let g = GridPath::from_fn(1, 64, |t, o| o[0] = 0.5 * t);
        let w = smooth(64, 3.0);
        let zero = scaled_solution(0.0, &g, &w, &vf, &[0.1], h(0.7)).unwrap();
        let phi0 = solve_ode(&vf, &g, 0.0, &[0.1]).unwrap();
        assert!(zero.y.sup_distance(&phi0.y).unwrap() < 1e-15);
        let one = scaled_solution(1.0, &GridPath::zeros(1, 64), &w, &vf, &[0.1], h(0.7)).unwrap();
        let direct = solve_ode(&vf, &w, 1.0, &[0.1]).unwrap();
        assert!(one.y.sup_distance(&direct.y).unwrap() < 1e-15);
    }

    #[test]
    fn affine_scaled_solution_closed_form() {
        let vf = models::affine(0.8);
        let hu = h(0.75);
        let g = GridPath::from_fn(1, 50, |t, o| o[0] = t * t);
        let w = smooth(50, 5.0);
        let eps = 0.3;
        let y = scaled_solution(eps, &g, &w, &vf, &[0.2], hu).unwrap();
        for i in 0..=50 {
            let t = i as f64 / 50.0;
            let exact = 0.2 + eps * w.get(i, 0) + g.get(i, 0) + 0.8 * eps.powf(1.0 / 0.75) * t;
            assert!((y.y.get(i, 0) - exact).abs() < 1e-13);
        }
    }

    #[test]
    fn affine_expansion_is_exact() {
        let vf = models::affine(0.6);
        let hu = h(0.75);
        let g = GridPath::from_fn(1, 40, |t, o| o[0] = -t);
        let w = smooth(40, 2.0);
        let hier = phi_hierarchy(&g, &w, &vf, &[0.5], hu, 1.0 / 0.75).unwrap();
        assert!(hier.phi(1.0).unwrap().sup_distance(&w.from_origin()).unwrap() < 1e-14);
        let b = GridPath::from_fn(1, 40, |t, o| o[0] = 0.6 * t);
        assert!(hier.phi(1.0 / 0.75).unwrap().sup_distance(&b).unwrap() < 1e-14);
        for eps in [0.0, 0.1, 0.7] {
            assert!(remainder(eps, &hier, &vf, 1.0 / 0.75).unwrap().sup_norm() < 1e-13);
        }
    }

    #[test]
    fn constant_sigma_terms() {
        let s = [1.0, 0.5, -0.2, 2.0];
        let vf = models::constant(2, 2, &s, &[0.0, 0.0]);
        let w = GridPath::from_fn(2, 32, |t, o| {
            o[0] = (2.0 * t).sin();
            o[1] = t * t;
        });
        let g = GridPath::zeros(2, 32);
        let hier = phi_hierarchy(&g, &w, &vf, &[0.0, 0.0], h(0.6), 2.0).unwrap();
        let phi1 = hier.phi(1.0).unwrap();
        for i in 0..=32 {
            let (x, y) = (w.get(i, 0), w.get(i, 1));
            assert!((phi1.get(i, 0) - (x + 0.5 * y)).abs() < 1e-14);
            assert!((phi1.get(i, 1) - (-0.2 * x + 2.0 * y)).abs() < 1e-14);
        }
        assert_eq!(hier.phi(2.0).unwrap().sup_norm(), 0.0);
    }

    #[test]
    fn starting_values_and_w_independence() {
        let vf = models::sin_1d(1.0);
        let hu = h(0.75);
        let g = GridPath::from_fn(1, 64, |t, o| o[0] = 0.7 * t);
        let h1 = phi_hierarchy(&g, &smooth(64, 3.0), &vf, &[0.2], hu, 2.0).unwrap();
        let h2 = phi_hierarchy(&g, &smooth(64, 7.0), &vf, &[0.2], hu, 2.0).unwrap();
        assert_eq!(h1.phi[0].start(), &[0.2]);
        for p in &h1.phi[1..] {
            assert_eq!(p.start(), &[0.0]);
        }
        assert_eq!(h1.phi(1.0 / 0.75).unwrap(), h2.phi(1.0 / 0.75).unwrap());
        assert!(h1.phi[0].sup_distance(&h1.jtilde.y).unwrap() < 1e-15);
    }

    #[test]
    fn first_term_matches_variation_of_constants() {
        // phi^1_t = J_t int_0^t J_s^{-1} sigma(phi^0_s) dw_s, continuous formula.
        let vf = models::elliptic_2d();
        let n = 1024;
        let g = GridPath::from_fn(2, n, |t, o| {
            o[0] = t;
            o[1] = -0.5 * t * t;
        });
        let w = GridPath::from_fn(2, n, |t, o| {
            o[0] = (4.0 * t).sin();
            o[1] = t.cos() - 1.0;
        });
        let hier = phi_hierarchy(&g, &w, &vf, &[0.3, -0.1], h(0.7), 1.0).unwrap();
        let sol = &hier.jtilde;
        let integrand = GridPath::from_fn(4, n, |_, _| {});
        let mut integrand = integrand;
        for i in 0..=n {
            let m = matrix_at(&sol.jac_inv, i) * sigma_matrix(&vf, sol.y.point(i));
            crate::young::store_matrix(&m, integrand.point_mut(i));
        }
        let inner = young_integral(&integrand, &w).unwrap();
        let phi1 = hier.phi(1.0).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..=n {
            let v = matrix_at(&sol.jac, i) * nalgebra::DVector::from_column_slice(inner.point(i));
            for r in 0..2 {
                worst = worst.max((v[r] - phi1.get(i, r)).abs());
            }
        }
        assert!(worst < 1e-5, "{worst}");
    }

    #[test]
    fn remainder_is_bounded_in_scale() {
        // Fixed smooth w: |R| / eps^{1 + 1/H} stays bounded as eps halves.
        let vf = models::sin_1d(1.0);
        let hu = h(0.75);
        let g = GridPath::from_fn(1, 256, |t, o| o[0] = 0.4 * t);
        let hier = phi_hierarchy(&g, &smooth(256, 3.0), &vf, &[0.0], hu, 2.0).unwrap();
        let mut ratios = vec![];
        for k in 2..=8 {
            let eps = 0.5f64.powi(k);
            let r = remainder(eps, &hier, &vf, 2.0).unwrap();
            ratios.push(crate::young::holder_norm(&r, 0.6) / eps.powf(1.0 + 1.0 / 0.75));
        }
        let (lo, hi) = ratios.iter().fold((f64::MAX, 0.0f64), |(l, u), r| (l.min(*r), u.max(*r)));
        assert!(hi / lo < 2.0, "{ratios:?}");
    }

    #[test]
    fn requested_order_must_be_in_lattice() {
        let vf = models::sin_1d(0.0);
        let g = GridPath::zeros(1, 8);
        assert!(matches!(phi_hierarchy(&g, &g, &vf, &[0.0], h(0.75), 1.5), Err(Error::NotInLattice(_))));
        let lin = models::constant(1, 1, &[1.0], &[0.0]);
        struct Capped<'a>(&'a crate::models::SeparableSystem);
        impl VectorFieldSystem for Capped<'_> {
            fn state_dim(&self) -> usize {
                1
            }
            fn driver_dim(&self) -> usize {
                1
            }
            fn max_order(&self) -> usize {
                1
            }
            fn eval(&self, i: usize, y: &[f64], out: &mut [f64]) {
                self.0.eval(i, y, out)
            }
            fn deriv(&self, i: usize, y: &[f64], dirs: &[&[f64]], out: &mut [f64]) {
                self.0.deriv(i, y, dirs, out)
            }
        }
        let err = phi_hierarchy(&g, &g, &Capped(&lin), &[0.0], h(0.75), 2.0).unwrap_err();
        assert!(matches!(err, Error::InsufficientDerivatives { required: 2, available: 1 }));
    }
}
