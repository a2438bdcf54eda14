//! Cubic blow-up rescaling `x ↦ f(r x + x₀) / r³`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{PointSampler, ScalarField};
use crate::grid::{GridSpec, Point};

/// Samples `x ↦ src(r x + x0) / r³` on `target`.
///
/// Masked target nodes whose preimage the source cannot evaluate raise
/// [`Error::OutsideDomain`]; unmasked ones are left invalid.
pub fn rescale(src: &dyn PointSampler, x0: Point, r: f64, target: &Arc<GridSpec>) -> Result<ScalarField> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::InvalidParameter(format!("rescale factor must lie in (0, 1), got {r}")));
    }
    scaled_sample(src, x0, r, target)
}

/// Same as [`rescale`] without the `r < 1` restriction; used for the
/// half-scale re-centering and for composing scales.
pub(crate) fn scaled_sample(src: &dyn PointSampler, x0: Point, r: f64, target: &Arc<GridSpec>) -> Result<ScalarField> {
    if src.dim() != target.dim() {
        return Err(Error::InvalidParameter("source and target dimensions differ".into()));
    }
    let inv = 1.0 / (r * r * r);
    let mut values = vec![f64::NAN; target.len()];
    for (idx, slot) in values.iter_mut().enumerate() {
        let x = target.position(idx);
        let p = [r * x[0] + x0[0], r * x[1] + x0[1]];
        match src.sample(p) {
            Some(v) => *slot = v * inv,
            None if target.in_mask(idx) => return Err(Error::OutsideDomain { point: p }),
            None => {}
        }
    }
    ScalarField::new(target.clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FnSampler;

    #[test]
    fn rejects_scale_outside_unit_interval() {
        let g = Arc::new(GridSpec::square([0.0, 0.0], 1.0, 9).unwrap());
        let s = FnSampler::new(2, |_| 1.0);
        assert!(rescale(&s, [0.0, 0.0], 1.0, &g).is_err());
        assert!(rescale(&s, [0.0, 0.0], 0.0, &g).is_err());
    }

    #[test]
    fn reports_points_outside_source() {
        let src_grid = Arc::new(GridSpec::square([0.0, 0.0], 0.2, 21).unwrap());
        let src = ScalarField::constant(src_grid, 1.0);
        let target = Arc::new(GridSpec::square([0.0, 0.0], 1.0, 11).unwrap());
        assert!(matches!(rescale(&src, [0.0, 0.0], 0.5, &target), Err(Error::OutsideDomain { .. })));
        assert!(rescale(&src, [0.0, 0.0], 0.1, &target).is_ok());
    }
}
