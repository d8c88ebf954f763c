//! Fractional Brownian motion: covariance, exact samplers and the
//! self-similarity diagnostic.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{Complex, DMatrix};
#[allow(unused_imports)]
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::math::{fft, next_pow2};
use crate::path::GridPath;
use crate::stats;

/// Hurst parameter restricted to the open interval `(1/2, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct HurstParam(f64);

impl HurstParam {
    pub fn new(h: f64) -> Result<Self> {
        if h.is_finite() && h > 0.5 && h < 1.0 {
            Ok(HurstParam(h))
        } else {
            Err(Error::InvalidHurst(h))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// `1 / H`, the exponent of the time scale in `eps^{1/H}`.
    #[inline]
    pub fn inv(self) -> f64 {
        1.0 / self.0
    }
}

impl TryFrom<f64> for HurstParam {
    type Error = Error;
    fn try_from(h: f64) -> Result<Self> {
        HurstParam::new(h)
    }
}

impl From<HurstParam> for f64 {
    fn from(h: HurstParam) -> f64 {
        h.0
    }
}

/// `R(s, t) = (s^{2H} + t^{2H} - |t - s|^{2H}) / 2`.
pub fn covariance(s: f64, t: f64, h: HurstParam) -> f64 {
    let e = 2.0 * h.value();
    0.5 * (s.abs().powf(e) + t.abs().powf(e) - (t - s).abs().powf(e))
}

/// Autocovariance of fractional Gaussian noise with spacing `dt` at lag `k`.
pub fn fgn_autocovariance(k: usize, dt: f64, h: HurstParam) -> f64 {
    let e = 2.0 * h.value();
    let k = k as f64;
    0.5 * dt.powf(e) * ((k + 1.0).powf(e) - 2.0 * k.powf(e) + (k - 1.0).abs().powf(e))
}

/// Counter-based stream for path `index`: independent of every other index.
pub fn path_rng(seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SamplerKind {
    /// Cholesky up to `CHOLESKY_LIMIT` steps, circulant embedding above.
    Auto,
    Cholesky,
    Circulant,
}

pub const CHOLESKY_LIMIT: usize = 4096;

enum Factor {
    Cholesky(DMatrix<f64>),
    Circulant { sqrt_eig: Vec<f64> },
}

/// Exact sampler of scalar fBm on the grid `i * horizon / steps`.
pub struct FbmSampler {
    hurst: HurstParam,
    steps: usize,
    factor: Factor,
}

impl FbmSampler {
    pub fn new(hurst: HurstParam, steps: usize, kind: SamplerKind) -> Result<Self> {
        Self::with_horizon(hurst, steps, 1.0, kind)
    }

    /// Sampler on `[0, horizon]` instead of `[0, 1]`.
    pub fn with_horizon(hurst: HurstParam, steps: usize, horizon: f64, kind: SamplerKind) -> Result<Self> {
        if steps == 0 {
            return Err(Error::invalid("grid needs at least one step"));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::invalid("horizon must be positive"));
        }
        let kind = match kind {
            SamplerKind::Auto if steps <= CHOLESKY_LIMIT => SamplerKind::Cholesky,
            SamplerKind::Auto => SamplerKind::Circulant,
            k => k,
        };
        let dt = horizon / steps as f64;
        let factor = match kind {
            SamplerKind::Cholesky => {
                let gamma: Vec<f64> = (0..steps).map(|k| fgn_autocovariance(k, dt, hurst)).collect();
                let cov = DMatrix::from_fn(steps, steps, |i, j| gamma[i.abs_diff(j)]);
                let chol = cov
                    .cholesky()
                    .ok_or_else(|| Error::Factorization("increment covariance is not positive definite".into()))?;
                Factor::Cholesky(chol.unpack())
            }
            _ => {
                let m = next_pow2(steps);
                let mut c = vec![Complex::new(0.0, 0.0); 2 * m];
                for k in 0..=m {
                    let g = fgn_autocovariance(k, dt, hurst);
                    c[k] = Complex::new(g, 0.0);
                    if k > 0 && k < m {
                        c[2 * m - k] = Complex::new(g, 0.0);
                    }
                }
                fft(&mut c);
                let scale = c.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
                let mut sqrt_eig = Vec::with_capacity(2 * m);
                for z in &c {
                    if z.re < -1e-10 * scale {
                        return Err(Error::Factorization("circulant embedding has a negative eigenvalue".into()));
                    }
                    sqrt_eig.push((z.re.max(0.0) / (2 * m) as f64).sqrt());
                }
                Factor::Circulant { sqrt_eig }
            }
        };
        Ok(FbmSampler { hurst, steps, factor })
    }

    pub fn hurst(&self) -> HurstParam {
        self.hurst
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Fills `out` (length `steps + 1`) with one path starting at 0.
    pub fn sample_into<R: rand::Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let n = self.steps;
        assert_eq!(out.len(), n + 1);
        let mut incr = vec![0.0; n];
        match &self.factor {
            Factor::Cholesky(l) => {
                let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
                for i in 0..n {
                    let row = l.row(i);
                    let mut acc = 0.0;
                    for j in 0..=i {
                        acc += row[j] * z[j];
                    }
                    incr[i] = acc;
                }
            }
            Factor::Circulant { sqrt_eig } => {
                let mut w: Vec<Complex<f64>> = sqrt_eig
                    .iter()
                    .map(|s| {
                        let a: f64 = StandardNormal.sample(rng);
                        let b: f64 = StandardNormal.sample(rng);
                        Complex::new(s * a, s * b)
                    })
                    .collect();
                fft(&mut w);
                for i in 0..n {
                    incr[i] = w[i].re;
                }
            }
        }
        out[0] = 0.0;
        for i in 0..n {
            out[i + 1] = out[i] + incr[i];
        }
    }

    /// `d` independent components drawn from the stream of path `index`.
    pub fn sample_path(&self, dims: usize, seed: u64, index: u64) -> GridPath {
        let mut rng = path_rng(seed, index);
        let mut comps = vec![0.0; self.steps + 1];
        let mut path = GridPath::zeros(dims, self.steps);
        for k in 0..dims {
            self.sample_into(&mut rng, &mut comps);
            for i in 0..=self.steps {
                path.point_mut(i)[k] = comps[i];
            }
        }
        path
    }
}

/// A seeded collection of fBm paths sharing one grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEnsemble {
    pub hurst: HurstParam,
    pub seed: u64,
    pub paths: Vec<GridPath>,
}

impl PathEnsemble {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.paths.first().map_or(0, |p| p.dims())
    }

    pub fn steps(&self) -> usize {
        self.paths.first().map_or(0, |p| p.steps())
    }

    /// Values of component `k` at grid index `i` across the ensemble.
    pub fn values_at(&self, i: usize, k: usize) -> Vec<f64> {
        self.paths.iter().map(|p| p.get(i, k)).collect()
    }
}

pub fn sample_paths<E: Executor>(
    hurst: HurstParam,
    dims: usize,
    steps: usize,
    count: usize,
    seed: u64,
    exec: &E,
) -> Result<PathEnsemble> {
    sample_paths_with(hurst, dims, steps, count, seed, SamplerKind::Auto, exec)
}

pub fn sample_paths_with<E: Executor>(
    hurst: HurstParam,
    dims: usize,
    steps: usize,
    count: usize,
    seed: u64,
    kind: SamplerKind,
    exec: &E,
) -> Result<PathEnsemble> {
    if dims == 0 || count == 0 {
        return Err(Error::invalid("need at least one component and one path"));
    }
    let sampler = FbmSampler::new(hurst, steps, kind)?;
    let paths = exec.map_indexed(count, |m| sampler.sample_path(dims, seed, m as u64));
    Ok(PathEnsemble { hurst, seed, paths })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfSimilarityReport {
    pub scale: f64,
    /// `max |mean D| / s.e.(D)` over the checked pairs, with
    /// `D = w_{cs} w_{ct} - c^{2H} w_s w_t` per sample.
    pub max_standardized: f64,
    pub pairs_checked: usize,
    pub samples: usize,
    pub insufficient_samples: bool,
}

/// Below this many paths the standard errors are not trustworthy.
pub const MIN_SELF_SIMILARITY_SAMPLES: usize = 30;

pub fn self_similarity_check(ensemble: &PathEnsemble, c: f64) -> Result<SelfSimilarityReport> {
    let n = ensemble.steps();
    // The scale must itself be a grid fraction k / N.
    if !(c > 0.0 && c <= 1.0) || !is_integer(c * n as f64) {
        return Err(Error::Misaligned(c));
    }
    let aligned: Vec<usize> = (1..=n).filter(|&i| is_integer(c * i as f64)).collect();
    if aligned.is_empty() {
        return Err(Error::Misaligned(c));
    }
    // A handful of spread-out indices keeps the max over pairs honest.
    let take = aligned.len().min(8);
    let picks: Vec<usize> = (0..take).map(|k| aligned[(k + 1) * aligned.len() / take - 1]).collect();
    let factor = c.powf(2.0 * ensemble.hurst.value());
    let m = ensemble.len();
    let mut worst: f64 = 0.0;
    let mut pairs = 0;
    for k in 0..ensemble.dims() {
        for (a, &i) in picks.iter().enumerate() {
            for &j in &picks[a..] {
                let (ci, cj) = ((c * i as f64).round() as usize, (c * j as f64).round() as usize);
                let d: Vec<f64> = ensemble
                    .paths
                    .iter()
                    .map(|p| p.get(ci, k) * p.get(cj, k) - factor * p.get(i, k) * p.get(j, k))
                    .collect();
                let se = stats::std_error(&d);
                let z = if se > 0.0 { stats::mean(&d).abs() / se } else { 0.0 };
                worst = worst.max(z);
                pairs += 1;
            }
        }
    }
    Ok(SelfSimilarityReport {
        scale: c,
        max_standardized: worst,
        pairs_checked: pairs,
        samples: m,
        insufficient_samples: m < MIN_SELF_SIMILARITY_SAMPLES,
    })
}

/// `max |R(cs, ct) - c^{2H} R(s, t)|` over grid pairs, straight from the formula.
pub fn analytic_self_similarity(hurst: HurstParam, c: f64, steps: usize) -> f64 {
    let f = c.powf(2.0 * hurst.value());
    let mut worst: f64 = 0.0;
    for i in 0..=steps {
        for j in 0..=steps {
            let (s, t) = (i as f64 / steps as f64, j as f64 / steps as f64);
            worst = worst.max((covariance(c * s, c * t, hurst) - f * covariance(s, t, hurst)).abs());
        }
    }
    worst
}

fn is_integer(x: f64) -> bool {
    (x - x.round()).abs() < 1e-9
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use proptest::prelude::*;

    fn h(v: f64) -> HurstParam {
        HurstParam::new(v).unwrap()
    }

    #[test]
    fn hurst_rejects_boundary() {
        assert!(HurstParam::new(0.5).is_err());
        assert!(HurstParam::new(1.0).is_err());
        assert!(HurstParam::new(0.4).is_err());
        assert!(HurstParam::new(f64::NAN).is_err());
        assert!(HurstParam::new(0.51).is_ok());
    }

    #[test]
    fn covariance_values() {
        assert_eq!(covariance(1.0, 1.0, h(0.6)), 1.0);
        assert_eq!(covariance(0.3, 0.0, h(0.8)), 0.0);
        assert!((covariance(0.5, 0.5, h(0.75)) - 0.5f64.powf(1.5)).abs() < 1e-15);
        assert!((covariance(0.5, 1.0, h(0.75)) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn paths_start_at_zero_and_are_reproducible() {
        let e1 = sample_paths(h(0.7), 2, 64, 5, 11, &Sequential).unwrap();
        let e2 = sample_paths(h(0.7), 2, 64, 5, 11, &Sequential).unwrap();
        assert_eq!(e1, e2);
        assert!(e1.paths.iter().all(|p| p.start() == [0.0, 0.0]));
        let e3 = sample_paths(h(0.7), 2, 64, 5, 12, &Sequential).unwrap();
        assert_ne!(e1, e3);
    }

    #[test]
    fn near_brownian_terminal_variance() {
        let e = sample_paths(h(0.51), 1, 256, 2000, 42, &Sequential).unwrap();
        let w1 = e.values_at(256, 0);
        let sq: Vec<f64> = w1.iter().map(|x| x * x).collect();
        let z = (stats::mean(&sq) - 1.0) / stats::std_error(&sq);
        assert!(z.abs() < 3.0, "z = {z}");
    }

    #[test]
    fn components_are_uncorrelated() {
        let e = sample_paths(h(0.75), 2, 128, 5000, 7, &Sequential).unwrap();
        let prod: Vec<f64> = e.paths.iter().map(|p| p.get(128, 0) * p.get(128, 1)).collect();
        let z = stats::mean(&prod) / stats::std_error(&prod);
        assert!(z.abs() < 3.0, "z = {z}");
    }

    #[test]
    fn cross_time_covariance_matches_formula() {
        let e = sample_paths(h(0.75), 1, 128, 5000, 7, &Sequential).unwrap();
        let prod: Vec<f64> = e.paths.iter().map(|p| p.get(64, 0) * p.get(128, 0)).collect();
        let z = (stats::mean(&prod) - 0.5) / stats::std_error(&prod);
        assert!(z.abs() < 3.0, "z = {z}");
    }

    #[test]
    fn circulant_reproduces_exact_increment_covariance() {
        // The embedding is exact: average of Re(W_i) Re(W_j) over the spectral
        // representation equals the fGn autocovariance. Check by brute force.
        let hp = h(0.8);
        let s = FbmSampler::new(hp, 16, SamplerKind::Circulant).unwrap();
        let Factor::Circulant { sqrt_eig } = &s.factor else { panic!() };
        let m2 = sqrt_eig.len();
        for lag in 0..16 {
            let mut acc = 0.0;
            for (k, se) in sqrt_eig.iter().enumerate() {
                acc += se * se * (2.0 * core::f64::consts::PI * (k * lag) as f64 / m2 as f64).cos();
            }
            assert!((acc - fgn_autocovariance(lag, 1.0 / 16.0, hp)).abs() < 1e-13);
        }
    }

    #[test]
    fn samplers_agree_in_law() {
        let hp = h(0.75);
        let a = sample_paths_with(hp, 1, 128, 5000, 1, SamplerKind::Cholesky, &Sequential).unwrap();
        let b = sample_paths_with(hp, 1, 128, 5000, 2, SamplerKind::Circulant, &Sequential).unwrap();
        let d = stats::ks_two_sample(&a.values_at(128, 0), &b.values_at(128, 0));
        assert!(d < stats::ks_critical(0.01, 5000, 5000), "KS = {d}");
    }

    #[test]
    fn self_similarity_exact_and_empirical() {
        assert!(analytic_self_similarity(h(0.75), 0.5, 32) < 1e-15);
        let e = sample_paths(h(0.75), 1, 64, 5000, 3, &Sequential).unwrap();
        let r = self_similarity_check(&e, 0.5).unwrap();
        assert!(!r.insufficient_samples);
        assert!(r.max_standardized < 4.0, "{r:?}");
        let small = sample_paths(h(0.75), 1, 64, 10, 3, &Sequential).unwrap();
        assert!(self_similarity_check(&small, 0.5).unwrap().insufficient_samples);
        assert!(matches!(self_similarity_check(&e, 0.3), Err(Error::Misaligned(_))));
    }

    proptest! {
        #[test]
        fn covariance_symmetric_and_self_similar(s in 0.0..1.0f64, t in 0.0..1.0f64, c in 0.01..1.0f64, hv in 0.51..0.99f64) {
            let hp = h(hv);
            prop_assert_eq!(covariance(s, t, hp), covariance(t, s, hp));
            let lhs = covariance(c * s, c * t, hp);
            let rhs = c.powf(2.0 * hv) * covariance(s, t, hp);
            prop_assert!((lhs - rhs).abs() < 1e-13);
        }
    }
}
