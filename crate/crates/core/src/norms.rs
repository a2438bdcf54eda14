//! Discrete L² and Sobolev norms over balls.
//!
//! Midpoint quadrature `Σ f² hⁿ` over node centers inside the ball and the
//! grid mask. Nodes where a component is invalid are skipped and counted.
//! Tensor components are summed over ordered index tuples (Frobenius), and
//! vector fields sum the squared norms of their components.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::SubRegion;
use crate::ops;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionNorm {
    pub value: f64,
    /// Nodes selected by the region.
    pub selected: usize,
    /// Largest number of selected nodes skipped by any derivative order.
    pub skipped: usize,
}

impl RegionNorm {
    pub fn skipped_fraction(&self) -> f64 {
        if self.selected == 0 {
            0.0
        } else {
            self.skipped as f64 / self.selected as f64
        }
    }
}

struct SquareSum {
    sum: f64,
    selected: usize,
    skipped: usize,
}

/// Σ over nodes of Σ_c f_c² hⁿ; a node is skipped if any component is invalid.
fn square_sum(components: &[&ScalarField], region: &SubRegion) -> Result<SquareSum> {
    let first = components.first().ok_or(Error::EmptyRegion)?;
    for c in &components[1..] {
        first.ensure_same_grid(c)?;
    }
    let g = first.grid();
    let nodes = region.nodes(g);
    let mut sum = 0.0;
    let mut skipped = 0;
    for &idx in &nodes {
        if components.iter().all(|c| c.is_valid(idx)) {
            sum += components.iter().map(|c| c.get(idx).powi(2)).sum::<f64>();
        } else {
            skipped += 1;
        }
    }
    if nodes.len() == skipped {
        return Err(Error::EmptyRegion);
    }
    Ok(SquareSum { sum: sum * g.cell_volume(), selected: nodes.len(), skipped })
}

/// `‖f‖_{L²(region)}`.
pub fn norm_l2(f: &ScalarField, region: &SubRegion) -> Result<RegionNorm> {
    let s = square_sum(&[f], region)?;
    Ok(RegionNorm { value: s.sum.sqrt(), selected: s.selected, skipped: s.skipped })
}

/// `‖Dᵏ f‖_{L²(region)}` for `k ∈ {0,1,2,3}`, Frobenius over components.
pub fn norm_derivative(f: &ScalarField, k: usize, region: &SubRegion) -> Result<RegionNorm> {
    let s = derivative_square_sum(f, k, region)?;
    Ok(RegionNorm { value: s.sum.sqrt(), selected: s.selected, skipped: s.skipped })
}

fn derivative_square_sum(f: &ScalarField, k: usize, region: &SubRegion) -> Result<SquareSum> {
    match k {
        0 => square_sum(&[f], region),
        1 => {
            let g = ops::gradient(f)?;
            square_sum(&g.iter().collect::<Vec<_>>(), region)
        }
        2 => {
            let h = ops::hessian(f)?;
            square_sum(&h.iter().flatten().collect::<Vec<_>>(), region)
        }
        3 => {
            let t = ops::third_derivatives(f)?;
            square_sum(&t.iter().collect::<Vec<_>>(), region)
        }
        other => Err(Error::InvalidParameter(format!("derivative order {other} not in 0..=3"))),
    }
}

/// `‖f‖_{W^{k,2}(region)} = (Σ_{j≤k} ‖Dʲ f‖²)^{1/2}`.
pub fn norm_sobolev(f: &ScalarField, k: usize, region: &SubRegion) -> Result<RegionNorm> {
    let mut total = 0.0;
    let mut selected = 0;
    let mut skipped = 0;
    for j in 0..=k {
        let s = derivative_square_sum(f, j, region)?;
        total += s.sum;
        selected = s.selected;
        skipped = skipped.max(s.skipped);
    }
    Ok(RegionNorm { value: total.sqrt(), selected, skipped })
}

/// Sobolev norm of a vector field: `(Σ_c ‖f_c‖²_{W^{k,2}})^{1/2}`.
pub fn norm_sobolev_vector(components: &[ScalarField], k: usize, region: &SubRegion) -> Result<RegionNorm> {
    let mut total = 0.0;
    let mut selected = 0;
    let mut skipped = 0;
    for c in components {
        let n = norm_sobolev(c, k, region)?;
        total += n.value * n.value;
        selected = n.selected;
        skipped = skipped.max(n.skipped);
    }
    Ok(RegionNorm { value: total.sqrt(), selected, skipped })
}

/// L² norm of a vector field.
pub fn norm_l2_vector(components: &[ScalarField], region: &SubRegion) -> Result<RegionNorm> {
    let s = square_sum(&components.iter().collect::<Vec<_>>(), region)?;
    Ok(RegionNorm { value: s.sum.sqrt(), selected: s.selected, skipped: s.skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{omega, GridSpec};
    use std::sync::Arc;

    #[test]
    fn constant_on_interval_ball() {
        // B_r = (-r, r) on a node-aligned grid: 2r/h nodes strictly inside.
        let g = Arc::new(GridSpec::interval(-1.0, 1.0, 201).unwrap());
        let f = ScalarField::constant(g, 3.0);
        let n = norm_l2(&f, &SubRegion::centered(0.5 + 1e-9)).unwrap();
        let expect = 3.0 * (2.0 * 0.5_f64).sqrt();
        assert!((n.value - expect).abs() < 3.0 * 0.01, "{} vs {expect}", n.value);
    }

    #[test]
    fn halfspace_cubic_third_derivative_norm_approaches_omega() {
        let mut errs = Vec::new();
        for n in [65, 129, 257] {
            let g = Arc::new(GridSpec::square([0.0, 0.0], 1.2, n).unwrap());
            let f = ScalarField::from_fn(g, |p| p[1].max(0.0).powi(3) / 6.0);
            let v = norm_derivative(&f, 3, &SubRegion::centered(1.0)).unwrap().value;
            errs.push((v - omega(2)).abs());
        }
        assert!(errs[2] < 0.02);
        assert!(errs[2] < errs[0]);
    }

    #[test]
    fn empty_region_errors() {
        let g = Arc::new(GridSpec::square([0.0, 0.0], 1.0, 11).unwrap());
        let f = ScalarField::constant(g, 1.0);
        assert!(matches!(norm_l2(&f, &SubRegion::ball([5.0, 5.0], 0.1)), Err(Error::EmptyRegion)));
    }

    #[test]
    fn sobolev_is_monotone_in_order_and_radius() {
        let g = Arc::new(GridSpec::square([0.0, 0.0], 1.0, 41).unwrap());
        let f = ScalarField::from_fn(g, |p| (2.0 * p[0]).sin() * p[1].cos() + p[1].powi(3));
        for r in [0.3, 0.6, 0.9] {
            let mut last = 0.0;
            for k in 0..=3 {
                let v = norm_sobolev(&f, k, &SubRegion::centered(r)).unwrap().value;
                assert!(v >= last);
                last = v;
            }
        }
        let a = norm_sobolev(&f, 2, &SubRegion::centered(0.4)).unwrap().value;
        let b = norm_sobolev(&f, 2, &SubRegion::centered(0.8)).unwrap().value;
        assert!(b >= a);
    }
}
