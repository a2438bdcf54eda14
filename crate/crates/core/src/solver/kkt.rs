use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::field::ScalarField;

use super::assemble::QuadraticModel;
use super::problem::BiharmonicProblem;

/// Variational-inequality residuals of a candidate field.
///
/// Relative values divide by `max |u|` (primal), by the largest stencil
/// magnitude of the bilaplacian (dual, stationarity) and by both times the
/// domain volume (complementarity).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KKTReport {
    /// Smallest interior value.
    pub min_value: f64,
    /// Smallest interior discrete bilaplacian.
    pub min_bilaplacian: f64,
    /// `max(0, -min u)`.
    pub primal_violation: f64,
    /// `max(0, -min Δ²_h u)`.
    pub dual_violation: f64,
    /// Largest `|Δ²_h u|` where `u > 0`.
    pub stationarity: f64,
    /// `Σ |u Δ²_h u| hⁿ`.
    pub complementarity: f64,
    /// `Σ max(Δ²_h u, 0) hⁿ`.
    pub measure_mass: f64,
    pub energy: f64,
    pub iterations: usize,
    pub active_nodes: usize,
    pub unknowns: usize,
    pub value_scale: f64,
    pub bilaplacian_scale: f64,
    pub primal_relative: f64,
    pub dual_relative: f64,
    pub stationarity_relative: f64,
    pub complementarity_relative: f64,
}

impl KKTReport {
    /// Largest of the relative residuals.
    pub fn max_relative(&self) -> f64 {
        self.primal_relative.max(self.dual_relative).max(self.stationarity_relative).max(self.complementarity_relative)
    }

    pub fn within(&self, tol: f64) -> bool {
        self.max_relative() <= tol
    }
}

/// KKT report of a field on the problem grid; only the interior nodes of
/// `u` are read, the boundary comes from the problem.
pub fn kkt_residuals(u: &ScalarField, problem: &BiharmonicProblem) -> Result<KKTReport> {
    if !u.grid().same_layout(problem.grid()) {
        return Err(crate::error::Error::GridMismatch);
    }
    let model = QuadraticModel::new(problem)?;
    Ok(report(&model, &model.restrict(u.values()), 0))
}

pub(crate) fn report(model: &QuadraticModel, u: &[f64], iterations: usize) -> KKTReport {
    let bl = model.bilaplacian(u);
    let mag = model.bilaplacian_magnitude(u);
    let v = model.volume;
    let mut min_value = f64::INFINITY;
    let mut min_bl = f64::INFINITY;
    let mut stationarity: f64 = 0.0;
    let mut comp = 0.0;
    let mut mass = 0.0;
    let mut active = 0;
    for k in 0..u.len() {
        min_value = min_value.min(u[k]);
        min_bl = min_bl.min(bl[k]);
        comp += (u[k] * bl[k]).abs() * v;
        mass += bl[k].max(0.0) * v;
        if u[k] > 0.0 {
            stationarity = stationarity.max(bl[k].abs());
        } else {
            active += 1;
        }
    }
    let value_scale = u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let bilaplacian_scale = mag.iter().fold(0.0f64, |m, x| m.max(*x));
    let safe = |x: f64| if x > 0.0 { x } else { 1.0 };
    let primal = (-min_value).max(0.0);
    let dual = (-min_bl).max(0.0);
    let volume = v * u.len() as f64;
    KKTReport {
        min_value,
        min_bilaplacian: min_bl,
        primal_violation: primal,
        dual_violation: dual,
        stationarity,
        complementarity: comp,
        measure_mass: mass,
        energy: model.energy(u),
        iterations,
        active_nodes: active,
        unknowns: u.len(),
        value_scale,
        bilaplacian_scale,
        primal_relative: primal / safe(value_scale),
        dual_relative: dual / safe(bilaplacian_scale),
        stationarity_relative: stationarity / safe(bilaplacian_scale),
        complementarity_relative: comp / safe(value_scale * bilaplacian_scale * volume),
    }
}
