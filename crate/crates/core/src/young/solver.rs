use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{check_driver, check_order, field_jacobian, matrix_at, store_matrix, VectorFieldSystem};
use crate::error::{Error, Result};
use crate::path::GridPath;

/// Solution of the Young ODE with its Jacobian `J` and inverse Jacobian.
/// Matrix paths have `n * n` components, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YoungSolution {
    pub y: GridPath,
    pub jac: GridPath,
    pub jac_inv: GridPath,
}

impl YoungSolution {
    pub fn end(&self) -> &[f64] {
        self.y.end()
    }

    pub fn jacobian(&self, i: usize) -> DMatrix<f64> {
        matrix_at(&self.jac, i)
    }

    pub fn jacobian_inv(&self, i: usize) -> DMatrix<f64> {
        matrix_at(&self.jac_inv, i)
    }

    /// `max_i || J_i Jinv_i - Id ||_F`.
    pub fn identity_residual(&self) -> f64 {
        let n = self.y.dims();
        let id = DMatrix::<f64>::identity(n, n);
        (0..self.y.len()).map(|i| (self.jacobian(i) * self.jacobian_inv(i) - &id).norm()).fold(0.0, f64::max)
    }
}

/// One Heun cell: values needed by the Jacobian recursions and the adjoint.
struct Cell {
    next: Vec<f64>,
    /// `A(y)`, `A(y_pred)`: linearized increments at both stages.
    a0: DMatrix<f64>,
    a1: DMatrix<f64>,
    /// `sigma(y)`, `sigma(y_pred)`.
    s0: DMatrix<f64>,
    s1: DMatrix<f64>,
}

fn increment<V: VectorFieldSystem + ?Sized>(vf: &V, y: &[f64], dx: &[f64], dt: f64, out: &mut [f64], tmp: &mut [f64]) {
    vf.eval(0, y, tmp);
    for r in 0..out.len() {
        out[r] = tmp[r] * dt;
    }
    for (i, &d) in dx.iter().enumerate() {
        if d != 0.0 {
            vf.eval(i + 1, y, tmp);
            for r in 0..out.len() {
                out[r] += tmp[r] * d;
            }
        }
    }
}

fn linearized<V: VectorFieldSystem + ?Sized>(vf: &V, y: &[f64], dx: &[f64], dt: f64) -> DMatrix<f64> {
    let mut a = field_jacobian(vf, 0, y) * dt;
    for (i, &d) in dx.iter().enumerate() {
        if d != 0.0 {
            a += field_jacobian(vf, i + 1, y) * d;
        }
    }
    a
}

fn heun_cell<V: VectorFieldSystem + ?Sized>(vf: &V, y: &[f64], dx: &[f64], dt: f64, want_sigma: bool) -> Cell {
    let n = y.len();
    let mut f0 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    increment(vf, y, dx, dt, &mut f0, &mut tmp);
    let pred: Vec<f64> = y.iter().zip(&f0).map(|(a, b)| a + b).collect();
    let mut f1 = vec![0.0; n];
    increment(vf, &pred, dx, dt, &mut f1, &mut tmp);
    let next = (0..n).map(|r| y[r] + 0.5 * (f0[r] + f1[r])).collect();
    let (s0, s1) = if want_sigma {
        (super::sigma_matrix(vf, y), super::sigma_matrix(vf, &pred))
    } else {
        (DMatrix::zeros(0, 0), DMatrix::zeros(0, 0))
    };
    Cell { next, a0: linearized(vf, y, dx, dt), a1: linearized(vf, &pred, dx, dt), s0, s1 }
}

fn driver_increments(driver: &GridPath, i: usize) -> Vec<f64> {
    (0..driver.dims()).map(|k| driver.increment(i, k)).collect()
}

/// Heun scheme for `dy = sigma(y) dx + b(y) clock_scale dt`, `y_0 = a`.
///
/// `J` is advanced by the Heun step of the variational equation, which makes
/// it the exact derivative of the discrete flow; `Jinv` follows its own
/// equation `dJinv = -Jinv dM`.
pub fn solve_ode<V: VectorFieldSystem + ?Sized>(
    vf: &V,
    driver: &GridPath,
    clock_scale: f64,
    a: &[f64],
) -> Result<YoungSolution> {
    check_order(vf, 1)?;
    check_driver(vf, driver, a)?;
    let n = vf.state_dim();
    let steps = driver.steps();
    let dt = clock_scale * driver.dt();
    let id = DMatrix::<f64>::identity(n, n);
    let mut y = GridPath::zeros(n, steps);
    let mut jac = GridPath::zeros(n * n, steps);
    let mut jac_inv = GridPath::zeros(n * n, steps);
    y.point_mut(0).copy_from_slice(a);
    store_matrix(&id, jac.point_mut(0));
    store_matrix(&id, jac_inv.point_mut(0));
    let mut j = id.clone();
    let mut k = id.clone();
    for i in 0..steps {
        let dx = driver_increments(driver, i);
        let cell = heun_cell(vf, y.point(i), &dx, dt, false);
        if cell.next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: i + 1 });
        }
        let step = &id + 0.5 * (&cell.a0 + &cell.a1 * (&id + &cell.a0));
        let inv_step = &id - 0.5 * (&cell.a0 + (&id - &cell.a0) * &cell.a1);
        j = step * j;
        k *= inv_step;
        if j.iter().chain(k.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: i + 1 });
        }
        y.point_mut(i + 1).copy_from_slice(&cell.next);
        store_matrix(&j, jac.point_mut(i + 1));
        store_matrix(&k, jac_inv.point_mut(i + 1));
    }
    Ok(YoungSolution { y, jac, jac_inv })
}

/// Endpoint of the discrete flow together with its exact sensitivity to every
/// driver increment: `sens[i] = d y_N / d (x_{t_{i+1}} - x_{t_i})`, `n x d`.
#[derive(Debug, Clone)]
pub struct EndpointSensitivity {
    pub end: Vec<f64>,
    pub sens: Vec<DMatrix<f64>>,
}

impl EndpointSensitivity {
    /// Directional derivative of the endpoint along a driver perturbation `h`.
    pub fn apply(&self, h: &GridPath) -> Vec<f64> {
        let n = self.end.len();
        let mut out = vec![0.0; n];
        for (i, g) in self.sens.iter().enumerate() {
            for c in 0..g.ncols() {
                let dh = h.increment(i, c);
                if dh != 0.0 {
                    for r in 0..n {
                        out[r] += g[(r, c)] * dh;
                    }
                }
            }
        }
        out
    }
}

pub fn endpoint_sensitivities<V: VectorFieldSystem + ?Sized>(
    vf: &V,
    driver: &GridPath,
    clock_scale: f64,
    a: &[f64],
) -> Result<EndpointSensitivity> {
    check_order(vf, 1)?;
    check_driver(vf, driver, a)?;
    let n = vf.state_dim();
    let steps = driver.steps();
    let dt = clock_scale * driver.dt();
    let id = DMatrix::<f64>::identity(n, n);
    let mut y = a.to_vec();
    let mut cells = Vec::with_capacity(steps);
    for i in 0..steps {
        let dx = driver_increments(driver, i);
        let cell = heun_cell(vf, &y, &dx, dt, true);
        if cell.next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: i + 1 });
        }
        y = cell.next.clone();
        cells.push(cell);
    }
    // Backward sweep: P = d y_N / d y_{i+1}.
    let mut p = id.clone();
    let mut sens = vec![DMatrix::zeros(n, vf.driver_dim()); steps];
    for i in (0..steps).rev() {
        let c = &cells[i];
        let b = 0.5 * (&c.s0 + &c.a1 * &c.s0 + &c.s1);
        sens[i] = &p * b;
        p *= &id + 0.5 * (&c.a0 + &c.a1 * (&id + &c.a0));
    }
    Ok(EndpointSensitivity { end: y, sens })
}

/// Truncated Neumann series `Id + sum_{k <= k_max} M^[k]_{s,t}` for the
/// transition `J_t J_s^{-1}`, with `dM = sum_i nabla V_i(y) dx^i + nabla V_0(y) dt`
/// integrated by the trapezoid rule along the stored solution.
pub fn jacobian_series<V: VectorFieldSystem + ?Sized>(
    solution: &YoungSolution,
    driver: &GridPath,
    vf: &V,
    clock_scale: f64,
    k_max: usize,
    s: usize,
    t: usize,
) -> Result<DMatrix<f64>> {
    solution.y.check_same_grid(driver)?;
    if s >= t || t > driver.steps() {
        return Err(Error::invalid("need grid indices s < t"));
    }
    let n = vf.state_dim();
    let dt = clock_scale * driver.dt();
    let id = DMatrix::<f64>::identity(n, n);
    let mut total = id.clone();
    // Level k running integral on the grid points s..=t.
    let mut prev: Vec<DMatrix<f64>> = vec![id.clone(); t - s + 1];
    let mats: Vec<(DMatrix<f64>, DMatrix<f64>)> = (s..t)
        .map(|i| {
            let dx = driver_increments(driver, i);
            (linearized(vf, solution.y.point(i), &dx, dt), linearized(vf, solution.y.point(i + 1), &dx, dt))
        })
        .collect();
    for _ in 0..k_max {
        let mut next = vec![DMatrix::zeros(n, n); t - s + 1];
        for (c, (left, right)) in mats.iter().enumerate() {
            next[c + 1] = &next[c] + 0.5 * (left * &prev[c] + right * &prev[c + 1]);
        }
        total += &next[t - s];
        prev = next;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use crate::fbm::{FbmSampler, HurstParam, SamplerKind};
    use crate::models;
    use crate::young::{holder_norm, moment_report};

    fn smooth(dims: usize, n: usize, amp: f64) -> GridPath {
        GridPath::from_fn(dims, n, |t, o| {
            for (k, v) in o.iter_mut().enumerate() {
                *v = amp * ((2.0 + k as f64) * t).sin();
            }
        })
    }

    #[test]
    fn pure_drift_is_linear_in_time() {
        let vf = models::constant(1, 1, &[0.0], &[0.3]);
        let x = smooth(1, 16, 1.0);
        let sol = solve_ode(&vf, &x, 1.0, &[2.0]).unwrap();
        for i in 0..=16 {
            assert!((sol.y.get(i, 0) - (2.0 + 0.3 * sol.y.time(i))).abs() < 1e-14);
        }
    }

    #[test]
    fn affine_model_is_exact() {
        let vf = models::affine(0.5);
        let hp = HurstParam::new(0.75).unwrap();
        let w = FbmSampler::new(hp, 64, SamplerKind::Auto).unwrap().sample_path(1, 3, 0);
        let sol = solve_ode(&vf, &w, 1.0, &[1.0]).unwrap();
        for i in 0..=64 {
            let exact = 1.0 + w.get(i, 0) + 0.5 * w.time(i);
            assert!((sol.y.get(i, 0) - exact).abs() < 1e-14);
        }
        assert_eq!(sol.identity_residual(), 0.0);
    }

    #[test]
    fn linear_model_converges_quadratically() {
        let vf = models::linear_scalar();
        let err = |n: usize| {
            let x = smooth(1, n, 1.0);
            let sol = solve_ode(&vf, &x, 1.0, &[1.5]).unwrap();
            let exact = 1.5 * (x.end()[0] - x.start()[0]).exp();
            (sol.end()[0] - exact).abs() / exact
        };
        let (e1, e2) = (err(128), err(256));
        assert!(e1 < 1e-4);
        assert!((e1 / e2 - 4.0).abs() < 0.2, "ratio {}", e1 / e2);
    }

    #[test]
    fn jacobian_times_inverse_is_identity() {
        let vf = models::elliptic_2d();
        let x = smooth(2, 1024, 0.8);
        let sol = solve_ode(&vf, &x, 1.0, &[0.1, -0.3]).unwrap();
        assert!(sol.identity_residual() < 1e-8, "{}", sol.identity_residual());
    }

    #[test]
    fn refinement_on_fbm_paths() {
        // Pathwise distances fluctuate from path to path; average over a few.
        let vf = models::elliptic_2d();
        let hp = HurstParam::new(0.75).unwrap();
        let sampler = FbmSampler::new(hp, 1024, SamplerKind::Auto).unwrap();
        let mut dist = [0.0; 3];
        for m in 0..16 {
            let fine = sampler.sample_path(2, 9, m);
            let sols: Vec<GridPath> = [128, 256, 512, 1024]
                .iter()
                .map(|&n| {
                    solve_ode(&vf, &fine.restrict(n).unwrap(), 1.0, &[0.0, 0.0]).unwrap().y.restrict(128).unwrap()
                })
                .collect();
            for k in 0..3 {
                dist[k] += sols[k].sup_distance(&sols[k + 1]).unwrap() / 16.0;
            }
        }
        assert!(dist[0] / dist[1] >= 1.5 && dist[1] / dist[2] >= 1.5, "{dist:?}");
    }

    #[test]
    fn sensitivities_match_finite_differences() {
        let vf = models::elliptic_2d();
        let x = smooth(2, 200, 0.9);
        let h = GridPath::from_fn(2, 200, |t, o| {
            o[0] = t * t;
            o[1] = (4.0 * t).cos() - 1.0;
        });
        let a = [0.2, 0.4];
        let sens = endpoint_sensitivities(&vf, &x, 0.7, &a).unwrap();
        let base = solve_ode(&vf, &x, 0.7, &a).unwrap();
        assert_eq!(sens.end, base.end().to_vec());
        let d = sens.apply(&h);
        let r = 1e-6;
        let plus = solve_ode(&vf, &x.axpy(r, &h).unwrap(), 0.7, &a).unwrap();
        let minus = solve_ode(&vf, &x.axpy(-r, &h).unwrap(), 0.7, &a).unwrap();
        for k in 0..2 {
            let fd = (plus.end()[k] - minus.end()[k]) / (2.0 * r);
            assert!((fd - d[k]).abs() < 1e-7, "{fd} {}", d[k]);
        }
    }

    #[test]
    fn neumann_series() {
        let flat = models::constant(2, 2, &[1.0, 0.5, 0.0, 2.0], &[0.1, 0.0]);
        let x = smooth(2, 64, 1.0);
        let sol = solve_ode(&flat, &x, 1.0, &[0.0, 0.0]).unwrap();
        let id = DMatrix::<f64>::identity(2, 2);
        for k in [0, 1, 5] {
            assert_eq!(jacobian_series(&sol, &x, &flat, 1.0, k, 3, 40).unwrap(), id);
        }
        let vf = models::sin_1d(0.3);
        let sol = solve_ode(&vf, &x.component(0), 1.0, &[0.5]).unwrap();
        assert_eq!(jacobian_series(&sol, &x.component(0), &vf, 1.0, 0, 3, 40).unwrap(), DMatrix::<f64>::identity(1, 1));

        let lin = models::linear_scalar();
        let x = smooth(1, 1024, 0.5);
        let sol = solve_ode(&lin, &x, 1.0, &[1.0]).unwrap();
        let (s, t) = (100, 900);
        let series = jacobian_series(&sol, &x, &lin, 1.0, 8, s, t).unwrap();
        let direct = sol.jacobian(t)[(0, 0)] / sol.jacobian(s)[(0, 0)];
        assert!((series[(0, 0)] - direct).abs() < 1e-6, "{} {}", series[(0, 0)], direct);
        assert!(jacobian_series(&sol, &x, &lin, 1.0, 8, 5, 5).is_err());
    }

    #[test]
    fn insufficient_order_and_blow_up() {
        struct Order0;
        impl VectorFieldSystem for Order0 {
            fn state_dim(&self) -> usize {
                1
            }
            fn driver_dim(&self) -> usize {
                1
            }
            fn max_order(&self) -> usize {
                0
            }
            fn eval(&self, _: usize, y: &[f64], out: &mut [f64]) {
                out[0] = y[0] * y[0];
            }
            fn deriv(&self, _: usize, _: &[f64], _: &[&[f64]], _: &mut [f64]) {
                unreachable!()
            }
        }
        let x = smooth(1, 8, 1.0);
        assert!(matches!(solve_ode(&Order0, &x, 1.0, &[1.0]), Err(Error::InsufficientDerivatives { .. })));
        // y' = y^2 blows up before t = 1 from y_0 = 5 on a coarse grid.
        let quad = models::SeparableSystem::new(
            "blowup",
            1,
            1,
            alloc::vec![
                alloc::vec![models::Component::of(0, models::ScalarFn::Quadratic(0.0, 0.0, 1.0))],
                alloc::vec![models::Component::constant(0.0)],
            ],
        );
        let r = solve_ode(&quad, &GridPath::zeros(1, 200), 200.0, &[5.0]);
        assert!(matches!(r, Err(Error::NonFinite { .. })), "{r:?}");
    }

    #[test]
    fn moment_reports() {
        let hp = HurstParam::new(0.75).unwrap();
        let flat = models::constant(2, 2, &[1.0, 0.0, 0.0, 1.0], &[0.0, 0.0]);
        let r = moment_report(hp, &flat, 0.6, 32, 20, 1, &Sequential).unwrap();
        for (_, v) in r.jacobian.moments.iter().chain(&r.jacobian_inv.moments) {
            assert!((v - 2f64.sqrt()).abs() < 1e-14);
        }
        let vf = models::sin_1d(0.0);
        let a = moment_report(hp, &vf, 0.6, 64, 2000, 5, &Sequential).unwrap();
        assert!(a.jacobian.all_finite() && a.jacobian_inv.all_finite());
        let b = moment_report(hp, &vf, 0.6, 64, 4000, 5, &Sequential).unwrap();
        let (qa, qb) = (a.jacobian.moment(2.0).unwrap(), b.jacobian.moment(2.0).unwrap());
        assert!((qa / qb - 1.0).abs() < 0.1);
        assert!(moment_report(hp, &vf, 0.8, 64, 10, 5, &Sequential).is_err());
        let _ = holder_norm;
    }
}
