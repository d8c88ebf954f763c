//! Heun scheme over a truncated commutative algebra.
//!
//! The state is a polynomial `sum_m Y_m e_m` in basis monomials `e_m` with
//! `e_0 = 1`. Two algebras are used: bivariate power series in `(eps, delta)`
//! truncated to a downward-closed exponent set, which yields the exact Taylor
//! coefficients of the discrete Ito map, and square-free jets in a few
//! nilpotent variables, which yield exact mixed directional derivatives.

use alloc::vec;
use alloc::vec::Vec;

use super::{check_order, VectorFieldSystem};
use crate::error::{Error, Result};
use crate::path::GridPath;

pub(crate) struct Algebra {
    size: usize,
    #[cfg_attr(not(test), allow(dead_code))]
    /// `mul[a * size + b]`: index of `e_a e_b`, or `None` if truncated.
    mul: Vec<Option<usize>>,
    /// Per target monomial: ordered factorizations into non-unit monomials,
    /// weighted by `1/k!`.
    comps: Vec<Vec<(f64, Vec<usize>)>>,
    /// Per target monomial: all `(a, b)` with `e_a e_b = e_target`.
    pairs: Vec<Vec<(usize, usize)>>,
}

impl Algebra {
    /// Power series in two variables over the given exponent pairs, which
    /// must contain `(0, 0)` first and be closed under decreasing either entry.
    pub fn power_series(exps: &[(u32, u32)]) -> Self {
        assert_eq!(exps.first(), Some(&(0, 0)));
        let size = exps.len();
        let mut mul = vec![None; size * size];
        for (a, &(pa, qa)) in exps.iter().enumerate() {
            for (b, &(pb, qb)) in exps.iter().enumerate() {
                mul[a * size + b] = exps.iter().position(|&e| e == (pa + pb, qa + qb));
            }
        }
        Self::from_table(size, mul)
    }

    /// Square-free jets in `vars` nilpotent variables; monomial index = subset bitmask.
    pub fn subsets(vars: usize) -> Self {
        let size = 1usize << vars;
        let mut mul = vec![None; size * size];
        for a in 0..size {
            for b in 0..size {
                if a & b == 0 {
                    mul[a * size + b] = Some(a | b);
                }
            }
        }
        Self::from_table(size, mul)
    }

    fn from_table(size: usize, mul: Vec<Option<usize>>) -> Self {
        let mut comps: Vec<Vec<(f64, Vec<usize>)>> = vec![Vec::new(); size];
        let mut stack: Vec<(usize, Vec<usize>)> = vec![(0, Vec::new())];
        while let Some((prod, parts)) = stack.pop() {
            if !parts.is_empty() {
                let k = parts.len();
                let fact: f64 = (1..=k).map(|v| v as f64).product();
                comps[prod].push((1.0 / fact, parts.clone()));
            }
            for m in 1..size {
                if let Some(next) = mul[prod * size + m] {
                    let mut p = parts.clone();
                    p.push(m);
                    stack.push((next, p));
                }
            }
        }
        let mut pairs = vec![Vec::new(); size];
        for a in 0..size {
            for b in 0..size {
                if let Some(c) = mul[a * size + b] {
                    pairs[c].push((a, b));
                }
            }
        }
        Algebra { size, mul, comps, pairs }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[cfg(test)]
    pub fn product(&self, a: usize, b: usize) -> Option<usize> {
        self.mul[a * self.size + b]
    }

    /// Largest number of factors in any factorization: the derivative order needed.
    pub fn max_parts(&self) -> usize {
        self.comps.iter().flatten().map(|(_, p)| p.len()).max().unwrap_or(0)
    }

    /// `V_i` evaluated on a jet state (`state[m]` is the `e_m` coefficient).
    pub fn eval_field<V: VectorFieldSystem + ?Sized>(
        &self,
        vf: &V,
        i: usize,
        state: &[Vec<f64>],
        out: &mut [Vec<f64>],
    ) {
        let n = vf.state_dim();
        let mut tmp = vec![0.0; n];
        vf.eval(i, &state[0], &mut out[0]);
        for m in 1..self.size {
            out[m].iter_mut().for_each(|v| *v = 0.0);
            for (w, parts) in &self.comps[m] {
                if parts.iter().any(|&p| state[p].iter().all(|v| *v == 0.0)) {
                    continue;
                }
                let dirs: Vec<&[f64]> = parts.iter().map(|&p| state[p].as_slice()).collect();
                vf.deriv(i, &state[0], &dirs, &mut tmp);
                for r in 0..n {
                    out[m][r] += w * tmp[r];
                }
            }
        }
    }
}

/// Driver of the jet scheme: each term feeds `scale * increment` of its
/// source into monomial `mono`.
pub(crate) enum Source<'a> {
    /// Increments of a `d`-dimensional path feed channels `1..=d`.
    Path(&'a GridPath),
    /// `dt` feeds the drift channel.
    Clock,
}

pub(crate) struct Term<'a> {
    pub mono: usize,
    pub source: Source<'a>,
    pub scale: f64,
}

/// Runs the Heun scheme on the algebra and returns one path per monomial.
pub(crate) fn heun<V: VectorFieldSystem + ?Sized>(
    vf: &V,
    alg: &Algebra,
    a: &[f64],
    steps: usize,
    terms: &[Term<'_>],
) -> Result<Vec<GridPath>> {
    check_order(vf, alg.max_parts().max(1))?;
    let (n, d) = (vf.state_dim(), vf.driver_dim());
    let size = alg.size();
    for t in terms {
        if let Source::Path(p) = t.source {
            if p.steps() != steps || p.dims() != d {
                return Err(Error::mismatch("driver path does not fit the system or the grid"));
            }
        }
    }
    let dt = 1.0 / steps as f64;
    let mut out: Vec<GridPath> = (0..size).map(|_| GridPath::zeros(n, steps)).collect();
    out[0].point_mut(0).copy_from_slice(a);
    let mut state: Vec<Vec<f64>> = vec![vec![0.0; n]; size];
    state[0].copy_from_slice(a);
    // incr[i][m]: channel i (0 = clock), monomial m.
    let mut incr = vec![vec![0.0; size]; d + 1];
    let mut field = vec![vec![0.0; n]; size];
    let mut f0 = vec![vec![0.0; n]; size];
    let mut f1 = vec![vec![0.0; n]; size];
    let mut pred = vec![vec![0.0; n]; size];
    for s in 0..steps {
        incr.iter_mut().for_each(|c| c.iter_mut().for_each(|v| *v = 0.0));
        for t in terms {
            match t.source {
                Source::Clock => incr[0][t.mono] += t.scale * dt,
                Source::Path(p) => {
                    for k in 0..d {
                        incr[k + 1][t.mono] += t.scale * p.increment(s, k);
                    }
                }
            }
        }
        stage(vf, alg, &state, &incr, &mut field, &mut f0);
        for m in 0..size {
            for r in 0..n {
                pred[m][r] = state[m][r] + f0[m][r];
            }
        }
        stage(vf, alg, &pred, &incr, &mut field, &mut f1);
        for m in 0..size {
            for r in 0..n {
                state[m][r] += 0.5 * (f0[m][r] + f1[m][r]);
            }
            if state[m].iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { step: s + 1 });
            }
            out[m].point_mut(s + 1).copy_from_slice(&state[m]);
        }
    }
    Ok(out)
}

/// `F(Y) = sum_i V_i(Y) * incr_i` in the algebra.
fn stage<V: VectorFieldSystem + ?Sized>(
    vf: &V,
    alg: &Algebra,
    state: &[Vec<f64>],
    incr: &[Vec<f64>],
    field: &mut [Vec<f64>],
    out: &mut [Vec<f64>],
) {
    out.iter_mut().for_each(|o| o.iter_mut().for_each(|v| *v = 0.0));
    for (i, ch) in incr.iter().enumerate() {
        if ch.iter().all(|v| *v == 0.0) {
            continue;
        }
        alg.eval_field(vf, i, state, field);
        for (m, o) in out.iter_mut().enumerate() {
            for &(a, b) in &alg.pairs[m] {
                let c = ch[b];
                if c != 0.0 {
                    for (ov, fv) in o.iter_mut().zip(&field[a]) {
                        *ov += fv * c;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;
    use crate::young::solve_ode;

    #[test]
    fn subset_algebra_counts_set_partitions() {
        let alg = Algebra::subsets(3);
        let full = &alg.comps[0b111];
        // 13 ordered set partitions of a 3-set; weights 1/k! sum to Bell(3) = 5.
        assert_eq!(full.len(), 13);
        let total: f64 = full.iter().map(|(w, _)| w).sum();
        assert!((total - 5.0).abs() < 1e-14);
        assert_eq!(alg.max_parts(), 3);
    }

    #[test]
    fn power_series_needs_order_equal_to_total_degree() {
        let alg = Algebra::power_series(&[(0, 0), (1, 0), (0, 1), (2, 0), (1, 1)]);
        assert_eq!(alg.max_parts(), 2);
        assert_eq!(alg.product(1, 2), Some(4));
        assert_eq!(alg.product(3, 1), None);
    }

    #[test]
    fn base_coefficient_is_plain_heun() {
        let vf = models::sin_1d(0.7);
        let x = GridPath::from_fn(1, 64, |t, o| o[0] = (3.0 * t).sin());
        let alg = Algebra::power_series(&[(0, 0), (1, 0)]);
        let terms = [
            Term { mono: 0, source: Source::Path(&x), scale: 1.0 },
            Term { mono: 0, source: Source::Clock, scale: 1.0 },
        ];
        let out = heun(&vf, &alg, &[0.2], 64, &terms).unwrap();
        let plain = solve_ode(&vf, &x, 1.0, &[0.2]).unwrap();
        assert!(out[0].sup_distance(&plain.y).unwrap() < 1e-14);
        assert!(out[1].sup_norm() == 0.0);
    }
}
