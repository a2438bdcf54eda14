//! Positivity sets and free-boundary extraction.

use std::collections::HashMap;
use std::ops::Range;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::{dist, GridSpec, Point};

/// `θ(h) = c_θ h³`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRule {
    pub c_theta: f64,
}

impl Default for ThresholdRule {
    fn default() -> Self {
        ThresholdRule { c_theta: 1.0 }
    }
}

impl ThresholdRule {
    pub fn threshold(&self, h: f64) -> f64 {
        self.c_theta * h * h * h
    }
}

/// Nodes with `u > θ`, together with the values used for sub-cell placement.
#[derive(Clone, Debug)]
pub struct PositivityMask {
    grid: Arc<GridSpec>,
    inside: Vec<bool>,
    /// Nodes that belong to the domain and carry a finite value.
    domain: Vec<bool>,
    values: Option<Vec<f64>>,
    threshold: f64,
}

impl PositivityMask {
    /// A bare mask; crossings are placed at edge midpoints.
    pub fn from_mask(grid: Arc<GridSpec>, inside: Vec<bool>) -> Result<Self> {
        if inside.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        let domain = grid.mask().to_vec();
        let inside = inside.iter().zip(&domain).map(|(a, b)| *a && *b).collect();
        Ok(PositivityMask { grid, inside, domain, values: None, threshold: 0.0 })
    }

    pub fn grid(&self) -> &Arc<GridSpec> {
        &self.grid
    }

    pub fn inside(&self) -> &[bool] {
        &self.inside
    }

    pub fn is_inside(&self, idx: usize) -> bool {
        self.inside[idx]
    }

    /// Domain nodes not in the positivity set.
    pub fn is_outside(&self, idx: usize) -> bool {
        self.domain[idx] && !self.inside[idx]
    }

    pub fn in_domain(&self, idx: usize) -> bool {
        self.domain[idx]
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn count(&self) -> usize {
        self.inside.iter().filter(|v| **v).count()
    }

    /// Fraction along the edge from inside node `a` toward outside node `b`
    /// at which the boundary is placed: `u^{1/3}` is extrapolated linearly
    /// from `a` and the next node inward, which is exact for cubic growth.
    fn crossing_fraction(&self, a: usize, b: usize) -> f64 {
        let Some(values) = &self.values else { return 0.5 };
        let (ia, ja) = self.grid.ij(a);
        let (ib, jb) = self.grid.ij(b);
        let di = ia as isize - ib as isize;
        let dj = ja as isize - jb as isize;
        let Some(a2) = self.grid.offset(a, di, dj) else { return 0.5 };
        if !self.inside[a2] {
            return 0.5;
        }
        let qa = values[a].cbrt();
        let q2 = values[a2].cbrt();
        if !(q2 > qa) {
            return 0.5;
        }
        (qa / (q2 - qa)).clamp(0.0, 2.0)
    }
}

impl PositivityMask {
    /// Projection of an inside node onto the zero line of the locally
    /// linear `u^{1/3}`; exact for cubic growth off a straight boundary.
    fn foot_point(&self, a: usize) -> Option<Point> {
        let values = self.values.as_ref()?;
        let g = &self.grid;
        if g.dim() != 2 {
            return None;
        }
        let h = g.h();
        let q = |i: usize| values[i].cbrt();
        let mut grad = [0.0; 2];
        for (axis, slot) in grad.iter_mut().enumerate() {
            let (di, dj) = if axis == 0 { (1, 0) } else { (0, 1) };
            let fwd = g.offset(a, di, dj).filter(|&i| self.inside[i]);
            let bwd = g.offset(a, -di, -dj).filter(|&i| self.inside[i]);
            let (fwd, bwd) = match (fwd, bwd) {
                // At the grid edge fall back to positive nodes below the threshold.
                (None, None) => {
                    let positive = |i: usize| self.domain[i] && values[i] > 0.0;
                    (g.offset(a, di, dj).filter(|&i| positive(i)), g.offset(a, -di, -dj).filter(|&i| positive(i)))
                }
                pair => pair,
            };
            *slot = match (fwd, bwd) {
                (Some(f), Some(b)) => (q(f) - q(b)) / (2.0 * h),
                (Some(f), None) => (q(f) - q(a)) / h,
                (None, Some(b)) => (q(a) - q(b)) / h,
                (None, None) => return None,
            };
        }
        let n2 = grad[0] * grad[0] + grad[1] * grad[1];
        if !(n2 > 0.0) {
            return None;
        }
        let step = q(a) / n2;
        if step * n2.sqrt() > 5.0 * h {
            return None;
        }
        let p = g.position(a);
        Some([p[0] - step * grad[0], p[1] - step * grad[1]])
    }
}

/// Nodes of the domain with `u > c_θ h³`.
pub fn positivity_set(u: &ScalarField, rule: &ThresholdRule) -> PositivityMask {
    let grid = u.grid_arc().clone();
    let theta = rule.threshold(grid.h());
    let domain: Vec<bool> = (0..grid.len()).map(|i| grid.in_mask(i) && u.is_valid(i)).collect();
    let inside = (0..grid.len()).map(|i| domain[i] && u.get(i) > theta).collect();
    PositivityMask { grid, inside, domain, values: Some(u.values().to_vec()), threshold: theta }
}

/// Free boundary as a height function `x_{1-a} = f(x_a)` over tangent axis `a`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphRepresentation {
    pub tangent_axis: usize,
    pub abscissa: Vec<f64>,
    pub height: Vec<f64>,
}

impl GraphRepresentation {
    /// Linear interpolation of the height; `None` outside the sampled range.
    pub fn height_at(&self, s: f64) -> Option<f64> {
        let k = self.abscissa.partition_point(|&x| x < s);
        if k == 0 {
            return (self.abscissa.first() == Some(&s)).then(|| self.height[0]);
        }
        if k == self.abscissa.len() {
            return None;
        }
        let (x0, x1) = (self.abscissa[k - 1], self.abscissa[k]);
        let t = (s - x0) / (x1 - x0);
        Some(self.height[k - 1] + t * (self.height[k] - self.height[k - 1]))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreeBoundary {
    pub points: Vec<Point>,
    /// Unit normals pointing into the positivity set.
    pub normals: Vec<[f64; 2]>,
    /// Point ranges of each traced curve, in order.
    pub polylines: Vec<Range<usize>>,
    pub closed: Vec<bool>,
    pub graph: Option<GraphRepresentation>,
}

impl FreeBoundary {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn nearest(&self, p: Point) -> Option<(usize, f64)> {
        self.points.iter().enumerate().map(|(k, q)| (k, dist(*q, p))).min_by(|a, b| a.1.total_cmp(&b.1))
    }

    /// CSV with columns `x,y,nx,ny,curve`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,nx,ny,curve\n");
        for (c, r) in self.polylines.iter().enumerate() {
            for k in r.clone() {
                let (p, n) = (self.points[k], self.normals[k]);
                out.push_str(&format!("{:?},{:?},{:?},{:?},{c}\n", p[0], p[1], n[0], n[1]));
            }
        }
        out
    }
}

struct Crossing {
    point: Point,
    /// Unit vector from the outside node toward the inside node.
    inward: [f64; 2],
}

fn crossing(mask: &PositivityMask, a: usize, b: usize) -> Crossing {
    let (inn, out) = if mask.inside[a] { (a, b) } else { (b, a) };
    let pi = mask.grid.position(inn);
    let po = mask.grid.position(out);
    let h = mask.grid.h();
    let inward = [(pi[0] - po[0]) / h, (pi[1] - po[1]) / h];
    if let Some(point) = mask.foot_point(inn) {
        return Crossing { point, inward };
    }
    let tau = mask.crossing_fraction(inn, out);
    Crossing { point: [pi[0] - tau * h * inward[0], pi[1] - tau * h * inward[1]], inward }
}

/// Traces `∂{u > θ}` inside the domain: root bracketing in 1D, marching
/// squares in 2D with crossings chained into polylines.
pub fn extract_free_boundary(mask: &PositivityMask) -> Result<FreeBoundary> {
    let g = &mask.grid;
    let [nx, ny] = g.n();
    let differs = |a: usize, b: usize| mask.domain[a] && mask.domain[b] && mask.inside[a] != mask.inside[b];

    if g.dim() == 1 {
        let mut points = Vec::new();
        let mut normals = Vec::new();
        for i in 0..nx - 1 {
            if differs(i, i + 1) {
                let c = crossing(mask, i, i + 1);
                points.push(c.point);
                normals.push(c.inward);
            }
        }
        if points.is_empty() {
            return Err(Error::EmptyBoundary);
        }
        let polylines = (0..points.len()).map(|k| k..k + 1).collect();
        let closed = vec![false; points.len()];
        return Ok(FreeBoundary { points, normals, polylines, closed, graph: None });
    }

    // Crossing per grid edge: horizontal edges 2*idx, vertical 2*idx+1.
    let mut edge_point: HashMap<usize, usize> = HashMap::new();
    let mut crossings: Vec<Crossing> = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let a = g.index(i, j);
            if i + 1 < nx && differs(a, a + 1) {
                edge_point.insert(2 * a, crossings.len());
                crossings.push(crossing(mask, a, a + 1));
            }
            if j + 1 < ny && differs(a, a + nx) {
                edge_point.insert(2 * a + 1, crossings.len());
                crossings.push(crossing(mask, a, a + nx));
            }
        }
    }
    if crossings.is_empty() {
        return Err(Error::EmptyBoundary);
    }

    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); crossings.len()];
    let mut link = |p: usize, q: usize| {
        adj[p].push(q);
        adj[q].push(p);
    };
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let c = [g.index(i, j), g.index(i + 1, j), g.index(i + 1, j + 1), g.index(i, j + 1)];
            if !c.iter().all(|&k| mask.domain[k]) {
                continue;
            }
            // bottom, right, top, left
            let edges = [2 * c[0], 2 * c[1] + 1, 2 * c[3], 2 * c[0] + 1];
            let hit: Vec<usize> = edges.iter().filter_map(|e| edge_point.get(e).copied()).collect();
            match hit.len() {
                2 => link(hit[0], hit[1]),
                4 => {
                    let ins = c.map(|k| mask.inside[k]);
                    let center_inside = match &mask.values {
                        Some(v) => c.iter().map(|&k| v[k]).sum::<f64>() / 4.0 > mask.threshold,
                        None => true,
                    };
                    let [b, r, t, l] = [hit[0], hit[1], hit[2], hit[3]];
                    // Diagonal c0/c2 inside, or c1/c3 inside.
                    if ins[0] == center_inside {
                        link(b, r);
                        link(l, t);
                    } else {
                        link(b, l);
                        link(r, t);
                    }
                }
                _ => {}
            }
        }
    }

    // Chain: open curves from their endpoints first, then cycles.
    let mut used = vec![false; crossings.len()];
    let mut order: Vec<usize> = Vec::with_capacity(crossings.len());
    let mut polylines = Vec::new();
    let mut closed = Vec::new();
    let starts: Vec<usize> = (0..crossings.len()).filter(|&k| adj[k].len() <= 1).chain(0..crossings.len()).collect();
    for s in starts {
        if used[s] {
            continue;
        }
        let begin = order.len();
        let mut cur = s;
        let mut prev = usize::MAX;
        loop {
            used[cur] = true;
            order.push(cur);
            match adj[cur].iter().copied().find(|&q| q != prev && !used[q]) {
                Some(next) => {
                    prev = cur;
                    cur = next;
                }
                None => break,
            }
        }
        let is_closed = order.len() - begin > 2 && adj[cur].contains(&s);
        polylines.push(begin..order.len());
        closed.push(is_closed);
    }

    let points: Vec<Point> = order.iter().map(|&k| crossings[k].point).collect();
    let mut normals = Vec::with_capacity(points.len());
    for (r, &is_closed) in polylines.iter().zip(&closed) {
        let len = r.len();
        for local in 0..len {
            let inward = crossings[order[r.start + local]].inward;
            let window: Vec<Point> = (-(WINDOW as isize)..=WINDOW as isize)
                .filter_map(|d| {
                    let l = local as isize + d;
                    if is_closed {
                        Some(points[r.start + l.rem_euclid(len as isize) as usize])
                    } else {
                        (0..len as isize).contains(&l).then(|| points[r.start + l as usize])
                    }
                })
                .collect();
            normals.push(window_normal(&window, inward));
        }
    }

    let graph = graph_of(&points, &normals, &polylines, &closed);
    Ok(FreeBoundary { points, normals, polylines, closed, graph })
}

/// Points on each side used for tangent estimates.
const WINDOW: usize = 3;

/// Normal to the principal axis of a point window, oriented along `inward`.
fn window_normal(window: &[Point], inward: [f64; 2]) -> [f64; 2] {
    if window.len() < 2 {
        return inward;
    }
    let n = window.len() as f64;
    let c = window.iter().fold([0.0, 0.0], |m, p| [m[0] + p[0] / n, m[1] + p[1] / n]);
    let mut cov = [[0.0; 2]; 2];
    for p in window {
        let d = [p[0] - c[0], p[1] - c[1]];
        for a in 0..2 {
            for b in 0..2 {
                cov[a][b] += d[a] * d[b];
            }
        }
    }
    if cov[0][0] + cov[1][1] == 0.0 {
        return inward;
    }
    let (t, _) = super::direction::top_eigen(cov);
    let mut nrm = [-t[1], t[0]];
    if nrm[0] * inward[0] + nrm[1] * inward[1] < 0.0 {
        nrm = [-nrm[0], -nrm[1]];
    }
    nrm
}

fn graph_of(
    points: &[Point],
    normals: &[[f64; 2]],
    polylines: &[Range<usize>],
    closed: &[bool],
) -> Option<GraphRepresentation> {
    if polylines.len() != 1 || closed[0] || points.len() < 2 {
        return None;
    }
    let mean = normals.iter().fold([0.0, 0.0], |m, n| [m[0] + n[0], m[1] + n[1]]);
    let axis = if mean[1].abs() >= mean[0].abs() { 0 } else { 1 };
    // Monotone along the curve up to local reordering of neighbouring crossings.
    let w = WINDOW.min(points.len() - 1);
    let steps: Vec<f64> = points.windows(w + 1).map(|s| s[w][axis] - s[0][axis]).collect();
    if !(steps.iter().all(|d| *d > 0.0) || steps.iter().all(|d| *d < 0.0)) {
        return None;
    }
    let mut pairs: Vec<(f64, f64)> = points.iter().map(|p| (p[axis], p[1 - axis])).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.dedup_by(|a, b| a.0 == b.0);
    Some(GraphRepresentation {
        tangent_axis: axis,
        abscissa: pairs.iter().map(|p| p.0).collect(),
        height: pairs.iter().map(|p| p.1).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{self, HalfspaceCubic, OneDimSolution, SlitExample};

    #[test]
    fn one_dim_oracle_boundary() {
        let sol = OneDimSolution::new(-6.0).unwrap();
        let grid = Arc::new(GridSpec::interval(0.0, 1.0, 257).unwrap());
        let u = oracle::sample(&sol, grid.clone());
        let mask = positivity_set(&u, &ThresholdRule::default());
        for i in 0..grid.len() {
            let x = grid.position(i)[0];
            if (x - 0.5).abs() > grid.h() && i > 0 && i + 1 < grid.len() {
                assert_eq!(mask.is_inside(i), x < 0.5, "x = {x}");
            }
        }
        let fb = extract_free_boundary(&mask).unwrap();
        assert_eq!(fb.len(), 1);
        // Exact for the cubic profile.
        assert!((fb.points[0][0] - 0.5).abs() < 1e-9, "{:?}", fb.points);
        assert_eq!(fb.normals[0], [-1.0, 0.0]);
    }

    #[test]
    fn halfspace_boundary_is_straight_line() {
        let grid = Arc::new(GridSpec::square([0.0, 0.0], 1.0, 81).unwrap());
        let u = oracle::sample(&HalfspaceCubic::at_angle(0.0), grid.clone());
        let mask = positivity_set(&u, &ThresholdRule::default());
        // θ = h³ excludes nodes with x₂ ≤ 6^{1/3} h.
        for i in 0..grid.len() {
            let y = grid.position(i)[1];
            if y < 0.0 || y > 2.0 * grid.h() {
                assert_eq!(mask.is_inside(i), y > 0.0);
            }
        }
        let fb = extract_free_boundary(&mask).unwrap();
        assert_eq!(fb.polylines.len(), 1);
        assert!(fb.points.iter().all(|p| p[1].abs() < 1e-9));
        assert!(fb.normals.iter().all(|n| (n[1] - 1.0).abs() < 1e-12));
        let graph = fb.graph.as_ref().unwrap();
        assert_eq!(graph.tangent_axis, 0);
        assert!(graph.height_at(0.3).unwrap().abs() < 1e-9);
    }

    #[test]
    fn rotated_halfspace_boundary_passes_through_origin() {
        let theta = 30f64.to_radians();
        let grid = Arc::new(GridSpec::square([0.0, 0.0], 1.0, 101).unwrap());
        let u = oracle::sample(&HalfspaceCubic::at_angle(theta), grid.clone());
        let fb = extract_free_boundary(&positivity_set(&u, &ThresholdRule::default())).unwrap();
        let eta = [theta.sin(), theta.cos()];
        for (p, n) in fb.points.iter().zip(&fb.normals) {
            assert!((p[0] * eta[0] + p[1] * eta[1]).abs() < grid.h(), "{p:?}");
            assert!((n[0] * eta[0] + n[1] * eta[1]) > 0.99, "{p:?} {n:?}");
        }
    }

    #[test]
    fn slit_boundary_hugs_the_segment() {
        let grid = Arc::new(GridSpec::disk([0.0, 0.0], 1.0, 129, 3).unwrap());
        let u = oracle::sample(&SlitExample, grid.clone());
        let fb = extract_free_boundary(&positivity_set(&u, &ThresholdRule::default())).unwrap();
        assert!(!fb.is_empty());
        for p in &fb.points {
            assert!(p[0] < 3.0 * grid.h() && p[1].abs() < 3.0 * grid.h(), "{p:?}");
        }
        assert!(fb.graph.is_none());
    }

    #[test]
    fn full_or_empty_mask_has_no_boundary() {
        let grid = Arc::new(GridSpec::square([0.0, 0.0], 1.0, 11).unwrap());
        let full = PositivityMask::from_mask(grid.clone(), vec![true; grid.len()]).unwrap();
        assert!(matches!(extract_free_boundary(&full), Err(Error::EmptyBoundary)));
        let empty = PositivityMask::from_mask(grid.clone(), vec![false; grid.len()]).unwrap();
        assert!(matches!(extract_free_boundary(&empty), Err(Error::EmptyBoundary)));
    }
}
