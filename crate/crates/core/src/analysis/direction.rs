//! Flatness norms, third-derivative normalization and the normalized frame.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::{omega, SubRegion};
use crate::norms;
use crate::ops;

pub(crate) fn check_unit(eta: [f64; 2], dim: usize) -> Result<()> {
    let n = (0..dim).map(|a| eta[a] * eta[a]).sum::<f64>().sqrt();
    if (n - 1.0).abs() > 1e-10 || (dim == 1 && eta[1] != 0.0) {
        return Err(Error::NonUnitDirection(n));
    }
    Ok(())
}

/// `‖∇u − η(η·∇u)‖_{W^{2,2}(region)}`.
pub fn flatness(u: &ScalarField, eta: [f64; 2], region: &SubRegion) -> Result<f64> {
    check_unit(eta, u.grid().dim())?;
    let grad = ops::gradient(u)?;
    let tangential = ops::tangential_gradient(&grad, eta)?;
    Ok(norms::norm_sobolev_vector(&tangential, 2, region)?.value)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationReport {
    /// `ω_n / ‖D³u‖_{L²(B₁)}`.
    pub factor: f64,
    pub third_norm_b1: f64,
    /// `‖D³U‖_{L²(B₂)}` of the normalized field, over the nodes the grid has.
    pub kappa_value: f64,
    /// Nodes of `B₂` without a valid third-derivative stencil.
    pub kappa_skipped: usize,
}

/// `U = ω_n u / ‖D³u‖_{L²(B₁)}`.
///
/// A factor within `1e-12` of one (summation round-off in the norm) is
/// snapped to one, so normalizing an already normalized field returns it
/// unchanged.
pub fn normalize(u: &ScalarField) -> Result<(ScalarField, NormalizationReport)> {
    let dim = u.grid().dim();
    let d3 = norms::norm_derivative(u, 3, &SubRegion::centered(1.0))?.value;
    let size = norms::norm_l2(u, &SubRegion::centered(1.0))?.value;
    if !(d3 > 1e-8 * size) || !d3.is_finite() {
        return Err(Error::VanishingThirdDerivative);
    }
    let mut factor = omega(dim) / d3;
    if (factor - 1.0).abs() <= 1e-12 {
        factor = 1.0;
    }
    let scaled = if factor == 1.0 { u.clone() } else { u.scaled(factor) };
    let kappa = norms::norm_derivative(&scaled, 3, &SubRegion::centered(2.0))?;
    Ok((
        scaled,
        NormalizationReport { factor, third_norm_b1: d3, kappa_value: kappa.value, kappa_skipped: kappa.skipped },
    ))
}

/// `∇Δu` sampled on a region, for evaluating the normalized-frame objective.
#[derive(Clone, Debug)]
pub struct DirectionObjective {
    samples: Vec<[f64; 2]>,
    weight: f64,
    dim: usize,
    /// RMS of `∇Δu` that round-off in the stencils can produce.
    noise: f64,
}

impl DirectionObjective {
    pub fn new(u: &ScalarField, region: &SubRegion) -> Result<Self> {
        let g = u.grid();
        let gl = ops::gradient(&ops::laplacian(u)?)?;
        let dim = g.dim();
        let samples: Vec<[f64; 2]> = region
            .nodes(g)
            .into_iter()
            .filter(|&i| gl.iter().all(|c| c.is_valid(i)))
            .map(|i| {
                let mut v = [0.0; 2];
                for (a, c) in gl.iter().enumerate() {
                    v[a] = c.get(i);
                }
                v
            })
            .collect();
        if samples.is_empty() {
            return Err(Error::EmptyRegion);
        }
        let size =
            region.nodes(g).into_iter().map(|i| u.get(i)).filter(|v| v.is_finite()).fold(0.0f64, |m, v| m.max(v.abs()));
        let noise = 1e3 * f64::EPSILON * size / g.h().powi(3);
        Ok(DirectionObjective { samples, weight: g.cell_volume(), dim, noise })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `‖∇′_η Δu‖_{L²(region)}` evaluated directly.
    pub fn value(&self, eta: [f64; 2]) -> f64 {
        let mut sum = 0.0;
        for v in &self.samples {
            let p = v[0] * eta[0] + v[1] * eta[1];
            for a in 0..self.dim {
                let t = v[a] - eta[a] * p;
                sum += t * t;
            }
        }
        (sum * self.weight).sqrt()
    }

    /// `G = Σ (∇Δu)(∇Δu)ᵀ hⁿ`.
    pub fn gram(&self) -> [[f64; 2]; 2] {
        let mut m = [[0.0; 2]; 2];
        for v in &self.samples {
            for a in 0..2 {
                for b in 0..2 {
                    m[a][b] += v[a] * v[b];
                }
            }
        }
        m.map(|r| r.map(|x| x * self.weight))
    }

    /// Mean of `∇Δu` over the region; points toward the positivity side of
    /// a half-space profile.
    pub fn mean(&self) -> [f64; 2] {
        let n = self.samples.len() as f64;
        let s = self.samples.iter().fold([0.0, 0.0], |m, v| [m[0] + v[0], m[1] + v[1]]);
        [s[0] / n, s[1] / n]
    }

    /// Exhaustive minimization over `count` equally spaced unit vectors.
    pub fn sweep(&self, count: usize) -> ([f64; 2], f64) {
        let mut best = ([0.0, 1.0], f64::INFINITY);
        for k in 0..count {
            let phi = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
            let eta = [phi.sin(), phi.cos()];
            let v = self.value(eta);
            if v < best.1 {
                best = (eta, v);
            }
        }
        best
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionEstimate {
    pub eta: [f64; 2],
    /// Eigenvalues of the Gram matrix, largest first.
    pub eigenvalues: [f64; 2],
    /// Top eigenvalue not separated from the second one.
    pub degenerate: bool,
    /// `‖∇′_η Δu‖_{L²(region)}` at the returned direction.
    pub objective: f64,
}

/// Orients `eta` so that `η·e_n ≥ 0`; ties go to a positive first nonzero component.
pub(crate) fn orient_up(eta: [f64; 2], dim: usize) -> [f64; 2] {
    let last = eta[dim - 1];
    let flip = if last.abs() > 1e-15 { last < 0.0 } else { eta[0] < 0.0 };
    if flip {
        [-eta[0], -eta[1]]
    } else {
        eta
    }
}

/// Top eigenpair of a symmetric 2×2 matrix, with the eigenvalues in
/// decreasing order.
pub(crate) fn top_eigen(m: [[f64; 2]; 2]) -> ([f64; 2], [f64; 2]) {
    let (a, b, d) = (m[0][0], m[0][1], m[1][1]);
    let mean = 0.5 * (a + d);
    let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    let (l1, l2) = (mean + rad, mean - rad);
    // (l1 - d, b) and (b, l1 - a) both solve the eigen equation; take the
    // better conditioned one.
    let v1 = [l1 - d, b];
    let v2 = [b, l1 - a];
    let n1 = (v1[0] * v1[0] + v1[1] * v1[1]).sqrt();
    let n2 = (v2[0] * v2[0] + v2[1] * v2[1]).sqrt();
    let v = if n1 >= n2 && n1 > 0.0 {
        [v1[0] / n1, v1[1] / n1]
    } else if n2 > 0.0 {
        [v2[0] / n2, v2[1] / n2]
    } else {
        [1.0, 0.0]
    };
    (v, [l1, l2])
}

fn estimate(obj: &DirectionObjective, dim: usize) -> Result<DirectionEstimate> {
    let g = obj.gram();
    let trace = g[0][0] + g[1][1];
    let rms = (trace / (obj.weight * obj.len() as f64)).sqrt();
    if !(rms > obj.noise) || !trace.is_finite() {
        return Err(Error::DegenerateDirection);
    }
    if dim == 1 {
        let eta = [1.0, 0.0];
        return Ok(DirectionEstimate { eta, eigenvalues: [g[0][0], 0.0], degenerate: false, objective: 0.0 });
    }
    let (v, ev) = top_eigen(g);
    let degenerate = ev[0] - ev[1] <= 1e-8 * ev[0];
    let eta = if degenerate { [1.0, 0.0] } else { orient_up(v, dim) };
    Ok(DirectionEstimate { eta, eigenvalues: ev, degenerate, objective: obj.value(eta) })
}

/// Unit `η` minimizing `‖∇′_η Δu‖_{L²(region)}`, the top eigenvector of the
/// Gram matrix of `∇Δu`, oriented with `η·e_n ≥ 0`.
pub fn normalized_direction(u: &ScalarField, region: &SubRegion) -> Result<DirectionEstimate> {
    let obj = DirectionObjective::new(u, region)?;
    estimate(&obj, u.grid().dim())
}

/// Direction estimate oriented toward the side where `∇Δu` points on
/// average instead of by the `e_n` convention.
pub(crate) fn positive_side_direction(u: &ScalarField, region: &SubRegion) -> Result<DirectionEstimate> {
    let obj = DirectionObjective::new(u, region)?;
    let dim = u.grid().dim();
    let mut est = estimate(&obj, dim)?;
    let m = obj.mean();
    let dot = m[0] * est.eta[0] + m[1] * est.eta[1];
    let scale = (m[0] * m[0] + m[1] * m[1]).sqrt();
    if dot < -1e-12 * scale {
        est.eta = [-est.eta[0], -est.eta[1]];
    }
    Ok(est)
}
