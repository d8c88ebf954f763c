//! Built-in coefficient systems.
//!
//! Every component of every field is a univariate function of one state
//! coordinate, `V_i^l(y) = f_{il}(y_{c_il})`. That covers all the canonical
//! models and gives exact derivatives of every order:
//! `nabla^k V_i^l <d_1..d_k> = f^{(k)}(y_c) prod_j d_j[c]`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

#[allow(unused_imports)]
use num_traits::Float;

use crate::young::VectorFieldSystem;

/// Smooth univariate building block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ScalarFn {
    /// `c`
    Const(f64),
    /// `c0 + c1 x + c2 x^2`
    Quadratic(f64, f64, f64),
    /// `offset + amp * sin(freq * x + phase)`
    Sine { offset: f64, amp: f64, freq: f64, phase: f64 },
}

impl ScalarFn {
    pub fn linear(c0: f64, c1: f64) -> Self {
        ScalarFn::Quadratic(c0, c1, 0.0)
    }

    /// `k`-th derivative at `x`.
    pub fn deriv(&self, k: usize, x: f64) -> f64 {
        match *self {
            ScalarFn::Const(c) => {
                if k == 0 {
                    c
                } else {
                    0.0
                }
            }
            ScalarFn::Quadratic(c0, c1, c2) => match k {
                0 => c0 + c1 * x + c2 * x * x,
                1 => c1 + 2.0 * c2 * x,
                2 => 2.0 * c2,
                _ => 0.0,
            },
            ScalarFn::Sine { offset, amp, freq, phase } => {
                let arg = freq * x + phase;
                let base = amp * freq.powi(k as i32);
                let v = match k % 4 {
                    0 => arg.sin(),
                    1 => arg.cos(),
                    2 => -arg.sin(),
                    _ => -arg.cos(),
                };
                if k == 0 {
                    offset + amp * v
                } else {
                    base * v
                }
            }
        }
    }

    fn bound(&self) -> Option<f64> {
        match *self {
            ScalarFn::Const(c) => Some(c.abs()),
            ScalarFn::Quadratic(c0, c1, c2) if c1 == 0.0 && c2 == 0.0 => Some(c0.abs()),
            ScalarFn::Quadratic(..) => None,
            ScalarFn::Sine { offset, amp, freq, .. } => Some(offset.abs() + amp.abs() * freq.abs().max(1.0).powi(4)),
        }
    }
}

/// One component `f(y_coord)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub coord: usize,
    pub f: ScalarFn,
}

impl Component {
    pub fn constant(c: f64) -> Self {
        Component { coord: 0, f: ScalarFn::Const(c) }
    }

    pub fn of(coord: usize, f: ScalarFn) -> Self {
        Component { coord, f }
    }
}

/// Coefficient system with coordinate-separable components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparableSystem {
    pub name: String,
    pub n: usize,
    pub d: usize,
    /// `fields[i][l]`: component `l` of `V_i`, `i = 0` the drift.
    pub fields: Vec<Vec<Component>>,
}

impl SeparableSystem {
    pub fn new(name: &str, n: usize, d: usize, fields: Vec<Vec<Component>>) -> Self {
        assert_eq!(fields.len(), d + 1, "need d + 1 fields");
        assert!(fields.iter().all(|f| f.len() == n), "every field needs n components");
        assert!(fields.iter().flatten().all(|c| c.coord < n));
        SeparableSystem { name: name.into(), n, d, fields }
    }
}

impl VectorFieldSystem for SeparableSystem {
    fn state_dim(&self) -> usize {
        self.n
    }

    fn driver_dim(&self) -> usize {
        self.d
    }

    fn max_order(&self) -> usize {
        usize::MAX
    }

    fn eval(&self, i: usize, y: &[f64], out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.fields[i]) {
            *o = c.f.deriv(0, y[c.coord]);
        }
    }

    fn deriv(&self, i: usize, y: &[f64], dirs: &[&[f64]], out: &mut [f64]) {
        let k = dirs.len();
        for (o, c) in out.iter_mut().zip(&self.fields[i]) {
            let mut prod = 1.0;
            for d in dirs {
                prod *= d[c.coord];
            }
            *o = if prod == 0.0 { 0.0 } else { c.f.deriv(k, y[c.coord]) * prod };
        }
    }

    fn declared_bound(&self) -> Option<f64> {
        self.fields.iter().flatten().map(|c| c.f.bound()).try_fold(0.0f64, |acc, b| b.map(|b| acc.max(b)))
    }
}

fn consts(values: &[f64]) -> Vec<Component> {
    values.iter().map(|&v| Component::constant(v)).collect()
}

/// `n = d = 1`, `sigma = 1`, `b = b0`: `y_t = a + w_t + b0 t`.
pub fn affine(b0: f64) -> SeparableSystem {
    SeparableSystem::new("affine", 1, 1, vec![consts(&[b0]), consts(&[1.0])])
}

/// Constant coefficients: `sigma = s` (`n x d`, row-major), `b = c`.
pub fn constant(n: usize, d: usize, s: &[f64], c: &[f64]) -> SeparableSystem {
    assert_eq!(s.len(), n * d);
    let mut fields = vec![consts(c)];
    for i in 0..d {
        fields.push((0..n).map(|r| Component::constant(s[r * d + i])).collect());
    }
    SeparableSystem::new("constant", n, d, fields)
}

/// `n = d = 1`, `sigma(y) = y`, `b = 0`.
pub fn linear_scalar() -> SeparableSystem {
    SeparableSystem::new("linear", 1, 1, vec![consts(&[0.0]), vec![Component::of(0, ScalarFn::linear(0.0, 1.0))]])
}

/// `n = d = 1`, `sigma(y) = sin(y) + 2`, `b = b0`.
pub fn sin_1d(b0: f64) -> SeparableSystem {
    let s = ScalarFn::Sine { offset: 2.0, amp: 1.0, freq: 1.0, phase: 0.0 };
    SeparableSystem::new("1d-sin", 1, 1, vec![consts(&[b0]), vec![Component::of(0, s)]])
}

/// `n = d = 1`, `sigma(y) = 1 + y^2 / 10`, `b = 0`.
pub fn quadratic_metric() -> SeparableSystem {
    SeparableSystem::new(
        "quadratic-metric",
        1,
        1,
        vec![consts(&[0.0]), vec![Component::of(0, ScalarFn::Quadratic(1.0, 0.0, 0.1))]],
    )
}

/// `V_1 = (f(y_1), 0)`, `V_2 = (0, g(y_2))`: commuting orthogonal frame.
pub fn commuting_frame_2d() -> SeparableSystem {
    let f = ScalarFn::Sine { offset: 1.5, amp: 0.5, freq: 1.0, phase: 0.0 };
    let g = ScalarFn::Quadratic(1.0, 0.0, 0.1);
    SeparableSystem::new(
        "2d-commuting-frame",
        2,
        2,
        vec![
            consts(&[0.0, 0.0]),
            vec![Component::of(0, f), Component::constant(0.0)],
            vec![Component::constant(0.0), Component::of(1, g)],
        ],
    )
}

/// Identity plus a small trigonometric perturbation; uniformly elliptic.
pub fn elliptic_2d() -> SeparableSystem {
    let p = |coord: usize, phase: f64| Component::of(coord, ScalarFn::Sine { offset: 0.0, amp: 0.2, freq: 1.0, phase });
    let one_plus = |coord: usize| Component::of(coord, ScalarFn::Sine { offset: 1.0, amp: 0.2, freq: 1.0, phase: 0.0 });
    SeparableSystem::new(
        "2d-elliptic",
        2,
        2,
        vec![vec![p(1, 0.0), p(0, 1.0)], vec![one_plus(1), p(0, 0.5)], vec![p(1, 1.5), one_plus(0)]],
    )
}

/// `sigma = [[1, 1], [0, 0]]` (both columns equal), `b = (0, y_1)`.
/// Ellipticity fails everywhere; the drift restores a density only through
/// the clock, so the Malliavin covariance degenerates as the scale shrinks.
pub fn rank_deficient_2d() -> SeparableSystem {
    SeparableSystem::new(
        "2d-rank-deficient",
        2,
        2,
        vec![
            vec![Component::constant(0.0), Component::of(0, ScalarFn::linear(0.0, 1.0))],
            consts(&[1.0, 0.0]),
            consts(&[1.0, 0.0]),
        ],
    )
}
