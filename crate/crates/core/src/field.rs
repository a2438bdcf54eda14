//! Scalar fields sampled on a [`GridSpec`].
//!
//! Invalid nodes (no data, or a derivative stencil that left the valid
//! region) hold `NaN`; stencil arithmetic propagates invalidity on its own.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, Point};

/// Anything that can be evaluated at an arbitrary physical point.
pub trait PointSampler: Sync {
    fn dim(&self) -> usize;

    /// Value at `p`, or `None` when `p` is outside the sampler's domain.
    fn sample(&self, p: Point) -> Option<f64>;
}

#[derive(Clone, Debug)]
pub struct ScalarField {
    grid: Arc<GridSpec>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Arc<GridSpec>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "field has {} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn from_fn(grid: Arc<GridSpec>, f: impl Fn(Point) -> f64) -> Self {
        let values = (0..grid.len()).map(|idx| f(grid.position(idx))).collect();
        ScalarField { grid, values }
    }

    /// Samples `src` at every node; nodes the sampler cannot reach are invalid.
    pub fn sample_from(grid: Arc<GridSpec>, src: &dyn PointSampler) -> Self {
        let values = (0..grid.len()).map(|idx| src.sample(grid.position(idx)).unwrap_or(f64::NAN)).collect();
        ScalarField { grid, values }
    }

    pub fn constant(grid: Arc<GridSpec>, c: f64) -> Self {
        let values = vec![c; grid.len()];
        ScalarField { grid, values }
    }

    pub fn invalid_like(grid: Arc<GridSpec>) -> Self {
        Self::constant(grid, f64::NAN)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn grid_arc(&self) -> &Arc<GridSpec> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    #[inline]
    pub fn is_valid(&self, idx: usize) -> bool {
        self.values[idx].is_finite()
    }

    pub fn ensure_same_grid(&self, other: &ScalarField) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || self.grid.same_layout(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_with(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<ScalarField> {
        self.ensure_same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(ScalarField { grid: self.grid.clone(), values })
    }

    pub fn scaled(&self, c: f64) -> ScalarField {
        self.map(|v| c * v)
    }

    /// Same values on a grid translated by `offset`; exact, no interpolation.
    pub fn translated(&self, offset: Point) -> ScalarField {
        ScalarField { grid: Arc::new(self.grid.translated(offset)), values: self.values.clone() }
    }

    /// Largest `|value|` over valid masked nodes.
    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .filter(|(i, v)| self.grid.in_mask(*i) && v.is_finite())
            .fold(0.0_f64, |m, (_, v)| m.max(v.abs()))
    }

    /// `max |self - other|` over masked nodes where both are valid.
    pub fn max_abs_diff(&self, other: &ScalarField) -> Result<f64> {
        self.ensure_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .enumerate()
            .filter(|(i, (a, b))| self.grid.in_mask(*i) && a.is_finite() && b.is_finite())
            .fold(0.0_f64, |m, (_, (a, b))| m.max((a - b).abs())))
    }

    /// Tensor-product cubic Lagrange interpolation; exact on cubic polynomials.
    pub fn interpolate(&self, p: Point) -> Option<f64> {
        let g = &*self.grid;
        let f = g.fractional(p);
        let (ix, wx) = cubic_weights(f[0], g.n()[0])?;
        if g.dim() == 1 {
            let mut acc = 0.0;
            for (a, w) in wx.iter().enumerate() {
                let v = self.values[g.index(ix + a, 0)];
                if !v.is_finite() {
                    return None;
                }
                acc += w * v;
            }
            return Some(acc);
        }
        let (iy, wy) = cubic_weights(f[1], g.n()[1])?;
        let mut acc = 0.0;
        for (b, wyb) in wy.iter().enumerate() {
            let mut row = 0.0;
            for (a, wxa) in wx.iter().enumerate() {
                let v = self.values[g.index(ix + a, iy + b)];
                if !v.is_finite() {
                    return None;
                }
                row += wxa * v;
            }
            acc += wyb * row;
        }
        Some(acc)
    }
}

impl PointSampler for ScalarField {
    fn dim(&self) -> usize {
        self.grid.dim()
    }

    fn sample(&self, p: Point) -> Option<f64> {
        self.interpolate(p)
    }
}

/// First node and the four Lagrange weights for fractional coordinate `t`.
fn cubic_weights(t: f64, n: usize) -> Option<(usize, [f64; 4])> {
    const SLACK: f64 = 1e-9;
    if n < 4 || t < -SLACK || t > (n - 1) as f64 + SLACK {
        return None;
    }
    let base = (t.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
    let s = t - base as f64;
    let w = [
        -(s - 1.0) * (s - 2.0) * (s - 3.0) / 6.0,
        s * (s - 2.0) * (s - 3.0) / 2.0,
        -s * (s - 1.0) * (s - 3.0) / 2.0,
        s * (s - 1.0) * (s - 2.0) / 6.0,
    ];
    Some((base, w))
}

/// Wraps a closure as a [`PointSampler`].
pub struct FnSampler<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(Point) -> f64 + Sync> FnSampler<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnSampler { dim, f }
    }
}

impl<F: Fn(Point) -> f64 + Sync> PointSampler for FnSampler<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn sample(&self, p: Point) -> Option<f64> {
        let v = (self.f)(p);
        v.is_finite().then_some(v)
    }
}
