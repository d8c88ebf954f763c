#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::path::{euclid, GridPath};

/// `|x_0| + max_{s<t} |x_t - x_s| / (t - s)^alpha` over all grid pairs.
pub fn holder_norm(path: &GridPath, alpha: f64) -> f64 {
    let n = path.steps();
    let d = path.dims();
    let h = path.dt();
    // (k h)^{-alpha} for every lag k.
    let inv: alloc::vec::Vec<f64> = (0..=n).map(|k| if k == 0 { 0.0 } else { (k as f64 * h).powf(-alpha) }).collect();
    let mut best: f64 = 0.0;
    for i in 0..n {
        let xi = path.point(i);
        for j in i + 1..=n {
            let xj = path.point(j);
            let mut d2 = 0.0;
            for k in 0..d {
                let v = xj[k] - xi[k];
                d2 += v * v;
            }
            best = best.max(d2.sqrt() * inv[j - i]);
        }
    }
    euclid(path.start()) + best
}

/// Grid discretization of
/// `( int int_{s<t} |x_t - x_s|^m / |t - s|^{2 + m theta} ds dt )^{1/m}`.
///
/// On each pair of cells the difference quotient `|x_t - x_s| / (t - s)` is
/// frozen at the cell midpoints and the remaining weight `(t - s)^p`,
/// `p = m (1 - theta) - 2`, is integrated exactly. Diagonal cells use the cell
/// slope, which makes the rule exact for linear paths.
pub fn besov_norm(path: &GridPath, m: u32, theta: f64) -> Result<f64> {
    if m == 0 || !m.is_multiple_of(2) {
        return Err(Error::invalid("Besov exponent m must be a positive even integer"));
    }
    let mf = m as f64;
    let p = mf * (1.0 - theta) - 2.0;
    if p <= -1.0 {
        return Err(Error::invalid("Besov integral diverges on the diagonal for this (m, theta)"));
    }
    let n = path.steps();
    let h = path.dt();
    let big_f = |u: f64| if u <= 0.0 { 0.0 } else { u.powf(p + 2.0) / ((p + 1.0) * (p + 2.0)) };
    let scale = h.powf(p + 2.0);
    let weight: alloc::vec::Vec<f64> = (0..n)
        .map(|k| {
            if k == 0 {
                scale * big_f(1.0)
            } else {
                let k = k as f64;
                scale * (big_f(k + 1.0) - 2.0 * big_f(k) + big_f(k - 1.0))
            }
        })
        .collect();
    let d = path.dims();
    let mid = |i: usize, k: usize| 0.5 * (path.get(i, k) + path.get(i + 1, k));
    let mut acc = 0.0;
    for i in 0..n {
        for j in i..n {
            let mut d2 = 0.0;
            for k in 0..d {
                let v = if i == j { path.increment(i, k) } else { mid(j, k) - mid(i, k) };
                d2 += v * v;
            }
            let gap = if i == j { h } else { (j - i) as f64 * h };
            let q = d2.sqrt() / gap;
            acc += q.powi(m as i32) * weight[j - i];
        }
    }
    Ok(acc.powf(1.0 / mf))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn holder_of_constant_and_linear_paths() {
        let c = GridPath::constant(&[3.0, 4.0], 16);
        assert!((holder_norm(&c, 0.6) - 5.0).abs() < 1e-15);
        let lin = GridPath::from_fn(1, 64, |t, o| o[0] = t);
        assert!((holder_norm(&lin, 0.6) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn holder_matches_exhaustive_scan_for_square() {
        let n = 128;
        let p = GridPath::from_fn(1, n, |t, o| o[0] = t * t);
        let mut best: f64 = 0.0;
        for i in 0..=n {
            for j in 0..=n {
                if i < j {
                    let (s, t) = (i as f64 / n as f64, j as f64 / n as f64);
                    best = best.max((t * t - s * s) / (t - s).powf(0.6));
                }
            }
        }
        assert!((holder_norm(&p, 0.6) - best).abs() < 1e-13);
    }

    #[test]
    fn single_cell_grid() {
        let p = GridPath::from_fn(1, 1, |t, o| o[0] = 2.0 * t);
        assert!((holder_norm(&p, 0.7) - 2.0).abs() < 1e-15);
        assert!(besov_norm(&p, 4, 0.55).unwrap() > 0.0);
    }

    #[test]
    fn besov_linear_path_closed_form() {
        // int int_{s<t} (t-s)^{-0.2} = 1 / (0.8 * 1.8).
        let p = GridPath::from_fn(1, 64, |t, o| o[0] = t);
        let v = besov_norm(&p, 4, 0.55).unwrap().powi(4);
        let exact = 1.0 / (0.8 * 1.8);
        assert!((v - exact).abs() / exact < 1e-12, "{v} vs {exact}");
    }

    #[test]
    fn besov_zero_homogeneous_and_divergent() {
        let z = GridPath::zeros(2, 32);
        assert_eq!(besov_norm(&z, 6, 0.6).unwrap(), 0.0);
        let p = GridPath::from_fn(1, 32, |t, o| o[0] = (3.0 * t).sin());
        let a = besov_norm(&p, 6, 0.6).unwrap();
        let b = besov_norm(&p.scaled(2.0), 6, 0.6).unwrap();
        assert!((b / a - 2.0).abs() < 1e-13);
        assert!(besov_norm(&p, 4, 0.9).is_err());
        assert!(besov_norm(&p, 3, 0.5).is_err());
    }
}
