//! Centered finite-difference operators.
//!
//! Every operator is evaluated at each node whose full stencil lies inside
//! the grid; elsewhere the result is `NaN`. Nodes whose stencil touches an
//! invalid value come out invalid as well.

use crate::error::{Error, Result};
use crate::field::ScalarField;

/// Stencil tap: node offset and weight.
type Tap = ((isize, isize), f64);

fn require_nodes(f: &ScalarField, needed: usize) -> Result<()> {
    let g = f.grid();
    for axis in 0..g.dim() {
        if g.n()[axis] < needed {
            return Err(Error::GridTooSmall { needed, got: g.n()[axis] });
        }
    }
    Ok(())
}

fn apply(f: &ScalarField, taps: &[Tap], scale: f64) -> ScalarField {
    let g = f.grid();
    let [nx, ny] = g.n();
    let reach_x = taps.iter().map(|t| t.0 .0.unsigned_abs()).max().unwrap_or(0);
    let reach_y = taps.iter().map(|t| t.0 .1.unsigned_abs()).max().unwrap_or(0);
    let vals = f.values();
    let mut out = vec![f64::NAN; g.len()];
    for j in reach_y..ny.saturating_sub(reach_y) {
        for i in reach_x..nx.saturating_sub(reach_x) {
            let mut acc = 0.0;
            for &((di, dj), w) in taps {
                let ii = (i as isize + di) as usize;
                let jj = (j as isize + dj) as usize;
                acc += w * vals[jj * nx + ii];
            }
            out[j * nx + i] = acc * scale;
        }
    }
    ScalarField::new(f.grid_arc().clone(), out).expect("same grid")
}

fn unit(axis: usize, k: isize) -> (isize, isize) {
    if axis == 0 {
        (k, 0)
    } else {
        (0, k)
    }
}

/// 3-point (1D) or 5-point (2D) Laplacian.
pub fn laplacian(f: &ScalarField) -> Result<ScalarField> {
    require_nodes(f, 3)?;
    let d = f.grid().dim();
    let mut taps: Vec<Tap> = vec![((0, 0), -2.0 * d as f64)];
    for axis in 0..d {
        taps.push((unit(axis, 1), 1.0));
        taps.push((unit(axis, -1), 1.0));
    }
    let h = f.grid().h();
    Ok(apply(f, &taps, 1.0 / (h * h)))
}

/// Taps of the second-order biharmonic stencil (5-point in 1D, 13-point in 2D).
pub fn bilaplacian_taps(dim: usize) -> Vec<Tap> {
    if dim == 1 {
        return vec![((0, 0), 6.0), ((1, 0), -4.0), ((-1, 0), -4.0), ((2, 0), 1.0), ((-2, 0), 1.0)];
    }
    let mut taps = vec![((0, 0), 20.0)];
    for axis in 0..2 {
        for s in [-1, 1] {
            taps.push((unit(axis, s), -8.0));
            taps.push((unit(axis, 2 * s), 1.0));
        }
    }
    for dx in [-1, 1] {
        for dy in [-1, 1] {
            taps.push(((dx, dy), 2.0));
        }
    }
    taps
}

/// Discrete bilaplacian `Δ_h Δ_h`.
pub fn bilaplacian(f: &ScalarField) -> Result<ScalarField> {
    require_nodes(f, 5)?;
    let h = f.grid().h();
    Ok(apply(f, &bilaplacian_taps(f.grid().dim()), 1.0 / h.powi(4)))
}

/// Centered first derivative along `axis`.
pub fn partial(f: &ScalarField, axis: usize) -> Result<ScalarField> {
    require_nodes(f, 3)?;
    let h = f.grid().h();
    Ok(apply(f, &[(unit(axis, 1), 1.0), (unit(axis, -1), -1.0)], 0.5 / h))
}

pub fn gradient(f: &ScalarField) -> Result<Vec<ScalarField>> {
    (0..f.grid().dim()).map(|a| partial(f, a)).collect()
}

fn second(f: &ScalarField, a: usize, b: usize) -> ScalarField {
    let h = f.grid().h();
    if a == b {
        apply(f, &[(unit(a, 1), 1.0), ((0, 0), -2.0), (unit(a, -1), 1.0)], 1.0 / (h * h))
    } else {
        apply(f, &[((1, 1), 1.0), ((1, -1), -1.0), ((-1, 1), -1.0), ((-1, -1), 1.0)], 0.25 / (h * h))
    }
}

/// Symmetric Hessian, `out[a][b] = ∂_a ∂_b f`.
pub fn hessian(f: &ScalarField) -> Result<Vec<Vec<ScalarField>>> {
    require_nodes(f, 3)?;
    let d = f.grid().dim();
    let mut out: Vec<Vec<Option<ScalarField>>> = vec![vec![None; d]; d];
    for a in 0..d {
        for b in a..d {
            let s = second(f, a, b);
            out[b][a] = Some(s.clone());
            out[a][b] = Some(s);
        }
    }
    Ok(out.into_iter().map(|row| row.into_iter().map(Option::unwrap).collect()).collect())
}

fn third(f: &ScalarField, idx: [usize; 3]) -> ScalarField {
    let h = f.grid().h();
    let mut s = idx;
    s.sort_unstable();
    if s[0] == s[2] {
        let a = s[0];
        return apply(
            f,
            &[(unit(a, 2), 1.0), (unit(a, 1), -2.0), (unit(a, -1), 2.0), (unit(a, -2), -1.0)],
            0.5 / h.powi(3),
        );
    }
    // Two equal indices `p`, one distinct `q`: ∂_q of the 3-point ∂_pp.
    let (p, q) = if s[0] == s[1] { (s[0], s[2]) } else { (s[1], s[0]) };
    let mut taps = Vec::with_capacity(6);
    for (sq, sign) in [(1, 1.0), (-1, -1.0)] {
        for (sp, w) in [(1, 1.0), (0, -2.0), (-1, 1.0)] {
            let (a0, a1) = unit(p, sp);
            let (b0, b1) = unit(q, sq);
            taps.push(((a0 + b0, a1 + b1), sign * w));
        }
    }
    apply(f, &taps, 0.5 / h.powi(3))
}

/// All third derivatives, flattened: component `(a, b, c)` at `a*d*d + b*d + c`.
pub fn third_derivatives(f: &ScalarField) -> Result<Vec<ScalarField>> {
    require_nodes(f, 5)?;
    let d = f.grid().dim();
    let mut cache: std::collections::BTreeMap<[usize; 3], ScalarField> = Default::default();
    let mut out = Vec::with_capacity(d * d * d);
    for a in 0..d {
        for b in 0..d {
            for c in 0..d {
                let mut key = [a, b, c];
                key.sort_unstable();
                let comp = cache.entry(key).or_insert_with(|| third(f, key)).clone();
                out.push(comp);
            }
        }
    }
    Ok(out)
}

/// `∇u - η (η·∇u)`: the gradient with its `η` component removed.
pub fn tangential_gradient(grad: &[ScalarField], eta: [f64; 2]) -> Result<Vec<ScalarField>> {
    let d = grad.len();
    let mut proj = grad[0].scaled(eta[0]);
    for a in 1..d {
        proj = proj.zip_with(&grad[a], |p, g| p + eta[a] * g)?;
    }
    (0..d).map(|a| grad[a].zip_with(&proj, |g, p| g - eta[a] * p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use std::sync::Arc;

    fn grid2(n: usize) -> Arc<GridSpec> {
        Arc::new(GridSpec::square([0.1, -0.2], 1.0, n).unwrap())
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1.0)
    }

    #[test]
    fn laplacian_exact_on_quadratic() {
        let f = ScalarField::from_fn(grid2(21), |p| p[0] * p[0] + p[1] * p[1]);
        let l = laplacian(&f).unwrap();
        let mut count = 0;
        for v in l.values().iter().filter(|v| v.is_finite()) {
            assert!(rel_err(*v, 4.0) < 1e-10);
            count += 1;
        }
        assert_eq!(count, 19 * 19);
    }

    #[test]
    fn bilaplacian_of_quartic_1d() {
        let g = Arc::new(GridSpec::interval(-1.0, 1.0, 41).unwrap());
        let f = ScalarField::from_fn(g, |p| p[0].powi(4));
        let b = bilaplacian(&f).unwrap();
        for v in b.values().iter().filter(|v| v.is_finite()) {
            assert!(rel_err(*v, 24.0) < 1e-9, "{v}");
        }
    }

    #[test]
    fn third_derivative_of_halfspace_cubic() {
        let g = grid2(41);
        let f = ScalarField::from_fn(g.clone(), |p| p[1].max(0.0).powi(3) / 6.0);
        let d3 = third_derivatives(&f).unwrap();
        let h = g.h();
        for idx in 0..g.len() {
            let y = g.position(idx)[1];
            if !d3.iter().all(|c| c.is_valid(idx)) || y.abs() < 2.5 * h {
                continue;
            }
            let expect = if y > 0.0 { 1.0 } else { 0.0 };
            assert!((d3[7].get(idx) - expect).abs() < 1e-9);
            for c in 0..7 {
                assert!(d3[c].get(idx).abs() < 1e-9, "component {c} at y = {y}: {}", d3[c].get(idx));
            }
        }
    }

    #[test]
    fn linear_field_has_constant_gradient_and_zero_hessian() {
        let f = ScalarField::from_fn(grid2(15), |p| 3.0 * p[0] - 2.0 * p[1] + 1.0);
        let grad = gradient(&f).unwrap();
        let hess = hessian(&f).unwrap();
        for idx in 0..f.grid().len() {
            if grad[0].is_valid(idx) && hess[0][1].is_valid(idx) {
                assert!((grad[0].get(idx) - 3.0).abs() < 1e-12);
                assert!((grad[1].get(idx) + 2.0).abs() < 1e-12);
                for a in 0..2 {
                    for b in 0..2 {
                        assert!(hess[a][b].get(idx).abs() < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn too_small_grid_is_rejected() {
        let g = Arc::new(GridSpec::interval(0.0, 1.0, 4).unwrap());
        let f = ScalarField::constant(g, 1.0);
        assert!(matches!(bilaplacian(&f), Err(Error::GridTooSmall { needed: 5, got: 4 })));
        assert!(laplacian(&f).is_ok());
    }
}
