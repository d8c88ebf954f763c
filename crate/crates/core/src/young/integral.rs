#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::path::GridPath;
use crate::stats;

/// Running trapezoidal Riemann-Stieltjes integral `int_0^t f dx`.
///
/// Shapes: a scalar integrand multiplies every driver component (result has
/// the driver's dimension); otherwise `f` is an `n x d` matrix path stored
/// row-major and the result is the `n`-dimensional path `int f dx`.
pub fn young_integral(f: &GridPath, x: &GridPath) -> Result<GridPath> {
    f.check_same_grid(x)?;
    let d = x.dims();
    let n = if f.dims() == 1 {
        d
    } else if f.dims().is_multiple_of(d) {
        f.dims() / d
    } else {
        return Err(Error::mismatch("integrand dimension is neither 1 nor a multiple of the driver dimension"));
    };
    let est = holder_exponent_estimate(f) + holder_exponent_estimate(x);
    if est <= 1.0 {
        log::warn!("estimated Hoelder exponents sum to {est:.3}; the Young integral may not converge");
    }
    let mut out = GridPath::zeros(n, x.steps());
    for i in 0..x.steps() {
        for r in 0..n {
            let mut acc = 0.0;
            if f.dims() == 1 {
                acc = 0.5 * (f.get(i, 0) + f.get(i + 1, 0)) * x.increment(i, r);
            } else {
                for c in 0..d {
                    acc += 0.5 * (f.get(i, r * d + c) + f.get(i + 1, r * d + c)) * x.increment(i, c);
                }
            }
            let prev = out.get(i, r);
            out.point_mut(i + 1)[r] = prev + acc;
        }
    }
    Ok(out)
}

/// Rough Hoelder exponent: log-log slope of the mean increment size over lags 1, 2, 4, 8.
pub fn holder_exponent_estimate(path: &GridPath) -> f64 {
    let n = path.steps();
    let mut lags = alloc::vec::Vec::new();
    let mut sizes = alloc::vec::Vec::new();
    let mut lag = 1;
    while lag <= 8 && lag < n {
        let mut acc = 0.0;
        let mut cnt = 0;
        for i in 0..=n - lag {
            let mut d2 = 0.0;
            for k in 0..path.dims() {
                let v = path.get(i + lag, k) - path.get(i, k);
                d2 += v * v;
            }
            acc += d2.sqrt();
            cnt += 1;
        }
        let m = acc / cnt as f64;
        if m > 0.0 {
            lags.push(lag as f64 * path.dt());
            sizes.push(m);
        }
        lag *= 2;
    }
    if lags.len() < 2 {
        // Constant or nearly so: smooth.
        return 1.0;
    }
    stats::log_log_slope(&lags, &sizes).slope.min(1.0)
}
