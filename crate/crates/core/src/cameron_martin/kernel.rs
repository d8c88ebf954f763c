use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::fbm::HurstParam;
use crate::math::GaussLegendre;
use crate::path::GridPath;

const NODES: usize = 64;

/// `K_H(t, s) = c_H s^{1/2-H} int_s^t (u - s)^{H-3/2} u^{H-1/2} du` with
/// `w_t = int_0^t K_H(t, s) dB_s` in law.
#[derive(Debug, Clone)]
pub struct VolterraKernel {
    hurst: HurstParam,
    c_h: f64,
    rule: GaussLegendre,
}

impl VolterraKernel {
    /// Kernel with `c_H` calibrated so that `int_0^1 K_H(1, s)^2 ds = R(1, 1) = 1`.
    pub fn new(hurst: HurstParam) -> Self {
        let mut k = VolterraKernel { hurst, c_h: 1.0, rule: GaussLegendre::new(NODES) };
        let raw = k.product_integral(1.0, 1.0);
        k.c_h = 1.0 / raw.sqrt();
        k
    }

    pub fn with_constant(hurst: HurstParam, c_h: f64) -> Self {
        VolterraKernel { hurst, c_h, rule: GaussLegendre::new(NODES) }
    }

    pub fn hurst(&self) -> HurstParam {
        self.hurst
    }

    pub fn constant(&self) -> f64 {
        self.c_h
    }

    /// `K_H(t, s)`; zero off the support `0 < s < t`.
    pub fn eval(&self, t: f64, s: f64) -> f64 {
        if s <= 0.0 || s >= t {
            return 0.0;
        }
        let h = self.hurst.value();
        // u = s + r^beta turns (u - s)^{H-3/2} du into beta dr.
        let beta = 1.0 / (h - 0.5);
        let top = (t - s).powf(h - 0.5);
        let inner = self.rule.integrate(0.0, top, |r| beta * (s + r.powf(beta)).powf(h - 0.5));
        self.c_h * s.powf(0.5 - h) * inner
    }

    /// `int_0^t f(s) ds` for `f ~ s^{p0}` at 0 and `f ~ (t - s)^{p1}` at `t`;
    /// both halves are mapped so the endpoint behaviour becomes smooth.
    pub fn singular_integral(&self, t: f64, p0: f64, p1: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let half = 0.5 * t;
        let (e0, e1) = (1.0 / (1.0 + p0), 1.0 / (1.0 + p1));
        let left = self.rule.integrate(0.0, 1.0, |x| {
            let s = half * x.powf(e0);
            half * e0 * x.powf(e0 - 1.0) * f(s)
        });
        let right = self.rule.integrate(0.0, 1.0, |x| {
            let s = t - half * x.powf(e1);
            half * e1 * x.powf(e1 - 1.0) * f(s)
        });
        left + right
    }

    /// `int_0^{t ^ T} K_H(t, s) K_H(T, s) ds`, which equals `R(t, T)`.
    pub fn product_integral(&self, t: f64, tt: f64) -> f64 {
        let (lo, hi) = if t <= tt { (t, tt) } else { (tt, t) };
        let h = self.hurst.value();
        let p1 = if hi > lo { h - 0.5 } else { 2.0 * h - 1.0 };
        self.singular_integral(lo, 1.0 - 2.0 * h, p1, |s| self.eval(lo, s) * self.eval(hi, s))
    }

    /// `(K_H h)(t) = int_0^t K_H(t, s) h(s) ds`.
    pub fn transform(&self, h: impl Fn(f64) -> f64, t: f64) -> f64 {
        let hv = self.hurst.value();
        self.singular_integral(t, 0.5 - hv, hv - 0.5, |s| self.eval(t, s) * h(s))
    }
}

pub fn kernel_eval(s: f64, t: f64, kernel: &VolterraKernel) -> f64 {
    kernel.eval(t, s)
}

/// `K_H h` sampled on the grid `i / steps`.
pub fn k_transform(h: impl Fn(f64) -> f64, kernel: &VolterraKernel, steps: usize) -> GridPath {
    let values: Vec<f64> = (0..=steps).map(|i| kernel.transform(&h, i as f64 / steps as f64)).collect();
    GridPath::from_values(1, steps, values).expect("one value per grid point")
}
