use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::{DomainShape, SubRegion};
use crate::norms;
use crate::ops;
use crate::oracle::Bump;

use super::problem::BiharmonicProblem;

/// Discrete `∫ Δ(∂_i u) Δ(ζ ∂_i u)` for a bump `ζ` inside the domain.
pub fn zeta_diagnostic(u: &ScalarField, axis: usize, zeta: &Bump) -> Result<f64> {
    let g = u.grid();
    if axis >= g.dim() {
        return Err(Error::InvalidParameter(format!("axis {axis} out of range for dimension {}", g.dim())));
    }
    let h = g.h();
    let reach = zeta.radius + 3.0 * h;
    let inside = match g.shape() {
        DomainShape::Disk { center, radius } => crate::grid::dist(zeta.center, *center) + reach < *radius,
        _ => (0..g.dim())
            .all(|a| zeta.center[a] - reach >= g.origin()[a] && zeta.center[a] + reach <= g.origin()[a] + g.extent(a)),
    };
    if !inside {
        return Err(Error::InvalidParameter("bump support must stay inside the domain".into()));
    }
    let d = ops::partial(u, axis)?;
    let zd =
        ScalarField::from_fn(g_arc(u), |p| zeta.value(p)).zip_with(&d, |z, v| if z == 0.0 { 0.0 } else { z * v })?;
    let ld = ops::laplacian(&d)?;
    let lzd = ops::laplacian(&zd)?;
    let mut sum = 0.0;
    for idx in g.box_nodes(zeta.center, zeta.radius + 2.0 * h) {
        let (a, b) = (ld.get(idx), lzd.get(idx));
        if b != 0.0 && a.is_finite() && b.is_finite() {
            sum += a * b;
        }
    }
    Ok(sum * g.cell_volume())
}

fn g_arc(u: &ScalarField) -> std::sync::Arc<crate::grid::GridSpec> {
    u.grid_arc().clone()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityRatios {
    /// `‖Δu‖_{L∞(B_{1/3})}`.
    pub laplacian_sup: f64,
    /// `‖u‖_{C^{1,α}(B_{1/2})}`, discrete.
    pub holder_norm: f64,
    pub alpha: f64,
    /// `‖u‖_{W^{2,2}(Ω)}`.
    pub sobolev_norm: f64,
    pub laplacian_ratio: f64,
    pub holder_ratio: f64,
}

/// Interior estimates relative to the global `W^{2,2}` norm. Balls are
/// centered at the domain center and scaled by its half-width.
pub fn regularity_ratios(u: &ScalarField, problem: &BiharmonicProblem) -> Result<RegularityRatios> {
    let g = problem.grid();
    if !u.grid().same_layout(g) {
        return Err(Error::GridMismatch);
    }
    let (center, half) = match g.shape() {
        DomainShape::Disk { center, radius } => (*center, *radius),
        _ => {
            let c = [g.origin()[0] + 0.5 * g.extent(0), g.origin()[1] + 0.5 * g.extent(1)];
            let half = if g.dim() == 1 { 0.5 * g.extent(0) } else { 0.5 * g.extent(0).min(g.extent(1)) };
            (c, half)
        }
    };
    let whole = SubRegion::ball(center, 4.0 * half + g.h() * 4.0);
    let sobolev = norms::norm_sobolev(u, 2, &whole)?.value;

    let lap = ops::laplacian(u)?;
    let laplacian_sup = g
        .ball_nodes(center, half / 3.0)
        .into_iter()
        .map(|i| lap.get(i))
        .filter(|v| v.is_finite())
        .fold(0.0f64, |m, v| m.max(v.abs()));

    let alpha = 0.5;
    let grad = ops::gradient(u)?;
    let nodes: Vec<usize> =
        g.ball_nodes(center, half / 2.0).into_iter().filter(|&i| grad.iter().all(|c| c.is_valid(i))).collect();
    let stride = (nodes.len() / 1200).max(1);
    let sample: Vec<usize> = nodes.iter().copied().step_by(stride).collect();
    let sup_u = nodes.iter().map(|&i| u.get(i).abs()).fold(0.0f64, f64::max);
    let gnorm = |i: usize| grad.iter().map(|c| c.get(i).powi(2)).sum::<f64>().sqrt();
    let sup_grad = nodes.iter().map(|&i| gnorm(i)).fold(0.0f64, f64::max);
    let mut quotient: f64 = 0.0;
    for (a, &i) in sample.iter().enumerate() {
        for &j in &sample[a + 1..] {
            let r = crate::grid::dist(g.position(i), g.position(j));
            let diff = grad.iter().map(|c| (c.get(i) - c.get(j)).powi(2)).sum::<f64>().sqrt();
            quotient = quotient.max(diff / r.powf(alpha));
        }
    }
    let holder_norm = sup_u + sup_grad + quotient;
    let safe = if sobolev > 0.0 { sobolev } else { f64::NAN };
    Ok(RegularityRatios {
        laplacian_sup,
        holder_norm,
        alpha,
        sobolev_norm: sobolev,
        laplacian_ratio: laplacian_sup / safe,
        holder_ratio: holder_norm / safe,
    })
}
