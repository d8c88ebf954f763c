use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::lattice::{LatticeExponent, MERGE_TOL};
use crate::error::{Error, Result};
use crate::fbm::HurstParam;
use crate::path::GridPath;
use crate::young::series::Algebra;
use crate::young::{check_order, VectorFieldSystem};

/// One term `V_{j_m} ... V_{j_2} V_{j_1}(a)` of the expansion at the
/// starting point; `index[0]` is `j_1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaosTerm {
    pub index: Vec<usize>,
    pub weight: LatticeExponent,
    pub coeff: Vec<f64>,
}

/// Every multi-index `j` over `{0, ..., d}` with `||j|| <= cutoff`, where a
/// zero entry weighs `1/H` and any other entry weighs 1.
pub fn chaos_coefficients<V: VectorFieldSystem + ?Sized>(
    vf: &V,
    a: &[f64],
    hurst: HurstParam,
    cutoff: f64,
) -> Result<Vec<ChaosTerm>> {
    if a.len() != vf.state_dim() {
        return Err(Error::invalid("initial point has the wrong dimension"));
    }
    let d = vf.driver_dim();
    let mut indices: Vec<Vec<usize>> = Vec::new();
    let mut stack: Vec<Vec<usize>> = vec![Vec::new()];
    while let Some(j) = stack.pop() {
        for i in 0..=d {
            let mut next = j.clone();
            next.push(i);
            if weight(&next, hurst).value <= cutoff + MERGE_TOL {
                indices.push(next.clone());
                stack.push(next);
            }
        }
    }
    let longest = indices.iter().map(Vec::len).max().unwrap_or(0);
    if longest > 1 {
        check_order(vf, longest - 1)?;
    }
    indices.sort_by(|x, y| {
        weight(x, hurst).value.total_cmp(&weight(y, hurst).value).then(x.len().cmp(&y.len())).then(x.cmp(y))
    });
    Ok(indices
        .into_iter()
        .map(|index| ChaosTerm { weight: weight(&index, hurst), coeff: coefficient(vf, a, &index), index })
        .collect())
}

fn weight(j: &[usize], hurst: HurstParam) -> LatticeExponent {
    let q = j.iter().filter(|&&i| i == 0).count() as i64;
    LatticeExponent::new(j.len() as i64 - q, q, hurst)
}

/// `V_{j_m} ... V_{j_2} V_{j_1}(a)` where each `V` acts as a first-order
/// differential operator on the function to its right.
///
/// With nilpotent `e_2, ..., e_m`, set `z_m = a + e_m V_{j_m}(a)` and
/// `z_k = z_{k+1} + e_k V_{j_k}(z_{k+1})`; the `e_2 ... e_m` coefficient of
/// `V_{j_1}(z_2)` is the composed derivative.
fn coefficient<V: VectorFieldSystem + ?Sized>(vf: &V, a: &[f64], j: &[usize]) -> Vec<f64> {
    let n = vf.state_dim();
    let m = j.len();
    let mut out = vec![0.0; n];
    if m == 1 {
        vf.eval(j[0], a, &mut out);
        return out;
    }
    let alg = Algebra::subsets(m - 1);
    let size = alg.size();
    // Variable e_k (k = 2..=m) is bit k - 2.
    let mut z = vec![vec![0.0; n]; size];
    z[0].copy_from_slice(a);
    let mut field = vec![vec![0.0; n]; size];
    for k in (2..=m).rev() {
        alg.eval_field(vf, j[k - 1], &z, &mut field);
        let bit = 1usize << (k - 2);
        let mut next = z.clone();
        for s in 0..size {
            if s & bit == 0 {
                for r in 0..n {
                    next[s | bit][r] += field[s][r];
                }
            }
        }
        z = next;
    }
    alg.eval_field(vf, j[0], &z, &mut field);
    field[size - 1].clone()
}

/// Iterated integral over `0 <= t_m <= ... <= t_1 <= 1` of
/// `dw^{j_m}_{t_m} ... dw^{j_1}_{t_1}`; index 0 is the clock `t`, index
/// `i >= 1` is component `i - 1` of `w`.
pub fn iterated_integral(w: &GridPath, j: &[usize]) -> Result<f64> {
    if j.is_empty() {
        return Ok(1.0);
    }
    if let Some(&bad) = j.iter().find(|&&i| i > w.dims()) {
        return Err(Error::invalid(alloc::format!("index {bad} exceeds the driver dimension {}", w.dims())));
    }
    let n = w.steps();
    let incr = |i: usize, s: usize| if i == 0 { w.dt() } else { w.increment(s, i - 1) };
    let last = j[j.len() - 1];
    let mut run = vec![0.0; n + 1];
    for s in 0..n {
        run[s + 1] = run[s] + incr(last, s);
    }
    for &i in j[..j.len() - 1].iter().rev() {
        let mut next = vec![0.0; n + 1];
        for s in 0..n {
            next[s + 1] = next[s] + 0.5 * (run[s] + run[s + 1]) * incr(i, s);
        }
        run = next;
    }
    Ok(run[n])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;
    use crate::young::solve_ode;

    fn h(v: f64) -> HurstParam {
        HurstParam::new(v).unwrap()
    }

    #[test]
    fn first_order_terms() {
        let vf = models::elliptic_2d();
        let a = [0.3, 0.7];
        let terms = chaos_coefficients(&vf, &a, h(0.75), 1.0 / 0.75).unwrap();
        let mut v = [0.0; 2];
        for i in 0..=2 {
            let t = terms.iter().find(|t| t.index == [i]).unwrap();
            vf.eval(i, &a, &mut v);
            assert_eq!(t.coeff, v);
            let expect = if i == 0 { 1.0 / 0.75 } else { 1.0 };
            assert!((t.weight.value - expect).abs() < 1e-15);
        }
        assert!(terms.iter().all(|t| t.weight.value <= 1.0 / 0.75 + 1e-12));
        assert_eq!(terms.len(), 3);
    }

    #[test]
    fn linear_second_order_coefficient() {
        let vf = models::linear_scalar();
        let terms = chaos_coefficients(&vf, &[1.0], h(0.75), 2.0).unwrap();
        let t = terms.iter().find(|t| t.index == [1, 1]).unwrap();
        assert!((t.coeff[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn third_order_matches_hand_derivation() {
        // V(y) = sin y + 2: V V V' ... the operator V_3 V_2 V_1 in 1-D is
        // V (V (V)')' = V (V'^2 + V V'').
        let vf = models::sin_1d(0.0);
        let y = 0.4f64;
        let (v, v1, v2) = (y.sin() + 2.0, y.cos(), -y.sin());
        let terms = chaos_coefficients(&vf, &[y], h(0.75), 3.0).unwrap();
        let t = terms.iter().find(|t| t.index == [1, 1, 1]).unwrap();
        assert!((t.coeff[0] - v * (v1 * v1 + v * v2)).abs() < 1e-14);
    }

    #[test]
    fn simplex_integrals() {
        let w = GridPath::from_fn(1, 1024, |t, o| o[0] = (3.0 * t).sin() + t);
        assert!((iterated_integral(&w, &[0, 0]).unwrap() - 0.5).abs() < 1e-14);
        assert!((iterated_integral(&w, &[1]).unwrap() - w.end()[0]).abs() < 1e-15);
        let sq = iterated_integral(&w, &[1, 1]).unwrap();
        assert!((sq - 0.5 * w.end()[0] * w.end()[0]).abs() < 1e-6);
        // int_0^1 t dw_t where the inner integral runs over the clock.
        let twt: f64 = iterated_integral(&w, &[1, 0]).unwrap();
        let exact = 1.0 * w.end()[0] - iterated_integral(&w, &[0, 1]).unwrap();
        assert!((twt - exact).abs() < 1e-6);
        assert!(iterated_integral(&w, &[2]).is_err());
    }

    #[test]
    fn truncated_sum_reproduces_endpoint() {
        let vf = models::sin_1d(0.7);
        let hu = h(0.75);
        let n = 4096;
        let w = GridPath::from_fn(1, n, |t, o| o[0] = (2.0 * t).sin() - 0.5 * t);
        let a = [0.2];
        let cutoff = 2.0;
        let terms = chaos_coefficients(&vf, &a, hu, cutoff).unwrap();
        let ints: Vec<f64> = terms.iter().map(|t| iterated_integral(&w, &t.index).unwrap()).collect();
        let mut xs = vec![];
        let mut ys = vec![];
        for k in 3..=8 {
            let eps = 0.5f64.powi(k);
            let y = solve_ode(&vf, &w.scaled(eps), eps.powf(1.0 / 0.75), &a).unwrap();
            let mut sum = a[0];
            for (t, i) in terms.iter().zip(&ints) {
                sum += eps.powf(t.weight.value) * t.coeff[0] * i;
            }
            xs.push(eps);
            ys.push((y.end()[0] - sum).abs());
        }
        let fit = crate::stats::log_log_slope(&xs, &ys);
        // Next lattice value after 2 is 1 + 1/H.
        assert!((fit.slope - (1.0 + 1.0 / 0.75)).abs() < 0.15, "{} {ys:?}", fit.slope);
    }
}
