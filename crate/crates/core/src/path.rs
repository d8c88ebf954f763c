use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A `dims`-dimensional path sampled on the uniform grid `t_i = i / steps`
/// of `[0, 1]`.
///
/// Values are stored time-major: the point at grid index `i` occupies
/// `values[i * dims .. (i + 1) * dims]`. Matrix-valued paths (Jacobians)
/// use `dims = n * n` with each matrix stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPath {
    dims: usize,
    steps: usize,
    values: Vec<f64>,
}

impl GridPath {
    pub fn zeros(dims: usize, steps: usize) -> Self {
        assert!(dims > 0 && steps > 0, "a grid path needs dims > 0 and steps > 0");
        GridPath { dims, steps, values: vec![0.0; dims * (steps + 1)] }
    }

    pub fn constant(point: &[f64], steps: usize) -> Self {
        let mut path = GridPath::zeros(point.len(), steps);
        for i in 0..=steps {
            path.point_mut(i).copy_from_slice(point);
        }
        path
    }

    /// Builds a path by evaluating `f(t, out)` at every grid time.
    pub fn from_fn(dims: usize, steps: usize, mut f: impl FnMut(f64, &mut [f64])) -> Self {
        let mut path = GridPath::zeros(dims, steps);
        for i in 0..=steps {
            let t = path.time(i);
            f(t, path.point_mut(i));
        }
        path
    }

    pub fn from_values(dims: usize, steps: usize, values: Vec<f64>) -> Result<Self> {
        if dims == 0 || steps == 0 {
            return Err(Error::invalid("a grid path needs dims > 0 and steps > 0"));
        }
        if values.len() != dims * (steps + 1) {
            return Err(Error::mismatch("value count does not match dims * (steps + 1)"));
        }
        Ok(GridPath { dims, steps, values })
    }

    /// Stacks scalar paths on a shared grid into one multi-dimensional path.
    pub fn stack(components: &[GridPath]) -> Result<Self> {
        let first = components.first().ok_or_else(|| Error::invalid("no components"))?;
        let steps = first.steps;
        let dims: usize = components.iter().map(|c| c.dims).sum();
        let mut out = GridPath::zeros(dims, steps);
        for i in 0..=steps {
            let mut offset = 0;
            for c in components {
                if c.steps != steps {
                    return Err(Error::mismatch("components live on different grids"));
                }
                out.point_mut(i)[offset..offset + c.dims].copy_from_slice(c.point(i));
                offset += c.dims;
            }
        }
        Ok(out)
    }

    #[inline]
    pub fn dims(&self) -> usize {
        self.dims
    }

    #[inline]
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of grid points, `steps + 1`.
    #[inline]
    pub fn len(&self) -> usize {
        self.steps + 1
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        1.0 / self.steps as f64
    }

    #[inline]
    pub fn time(&self, i: usize) -> f64 {
        i as f64 / self.steps as f64
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(move |i| self.time(i))
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.values[i * self.dims..(i + 1) * self.dims]
    }

    #[inline]
    pub fn point_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.dims..(i + 1) * self.dims]
    }

    #[inline]
    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.values[i * self.dims + k]
    }

    pub fn start(&self) -> &[f64] {
        self.point(0)
    }

    pub fn end(&self) -> &[f64] {
        self.point(self.steps)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn component(&self, k: usize) -> GridPath {
        assert!(k < self.dims);
        let values = (0..=self.steps).map(|i| self.get(i, k)).collect();
        GridPath { dims: 1, steps: self.steps, values }
    }

    /// Increment `x_{t_{i+1}} - x_{t_i}` of component `k`.
    #[inline]
    pub fn increment(&self, i: usize, k: usize) -> f64 {
        self.get(i + 1, k) - self.get(i, k)
    }

    pub fn same_grid(&self, other: &GridPath) -> bool {
        self.steps == other.steps
    }

    pub fn check_same_grid(&self, other: &GridPath) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::mismatch("paths live on different grids"))
        }
    }

    pub fn scaled(&self, c: f64) -> GridPath {
        GridPath { dims: self.dims, steps: self.steps, values: self.values.iter().map(|v| c * v).collect() }
    }

    /// `self + c * other`, pointwise.
    pub fn axpy(&self, c: f64, other: &GridPath) -> Result<GridPath> {
        self.check_same_grid(other)?;
        if self.dims != other.dims {
            return Err(Error::mismatch("dimension mismatch"));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + c * b).collect();
        Ok(GridPath { dims: self.dims, steps: self.steps, values })
    }

    pub fn sub(&self, other: &GridPath) -> Result<GridPath> {
        self.axpy(-1.0, other)
    }

    pub fn add(&self, other: &GridPath) -> Result<GridPath> {
        self.axpy(1.0, other)
    }

    /// Path shifted so that it starts at the origin.
    pub fn from_origin(&self) -> GridPath {
        let start = self.start().to_vec();
        let mut out = self.clone();
        for i in 0..=self.steps {
            for (v, s) in out.point_mut(i).iter_mut().zip(&start) {
                *v -= s;
            }
        }
        out
    }

    /// Sub-sampled path on the coarser grid with `coarse_steps` cells.
    pub fn restrict(&self, coarse_steps: usize) -> Result<GridPath> {
        if coarse_steps == 0 || !self.steps.is_multiple_of(coarse_steps) {
            return Err(Error::mismatch("coarse grid must divide the fine grid"));
        }
        let stride = self.steps / coarse_steps;
        let mut out = GridPath::zeros(self.dims, coarse_steps);
        for i in 0..=coarse_steps {
            out.point_mut(i).copy_from_slice(self.point(i * stride));
        }
        Ok(out)
    }

    /// Maximum over grid points of the Euclidean distance to `other`.
    pub fn sup_distance(&self, other: &GridPath) -> Result<f64> {
        self.check_same_grid(other)?;
        let mut best: f64 = 0.0;
        for i in 0..=self.steps {
            let d2: f64 = self.point(i).iter().zip(other.point(i)).map(|(a, b)| (a - b) * (a - b)).sum();
            best = best.max(d2.sqrt());
        }
        Ok(best)
    }

    pub fn sup_norm(&self) -> f64 {
        (0..=self.steps).map(|i| euclid(self.point(i))).fold(0.0, f64::max)
    }
}

#[inline]
pub(crate) fn euclid(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
