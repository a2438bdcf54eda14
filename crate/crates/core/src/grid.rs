//! Uniform isotropic grids over intervals, rectangles and masked disks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in physical coordinates. One-dimensional grids ignore the second
/// component.
pub type Point = [f64; 2];

/// Shape of the active domain on a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum DomainShape {
    Interval,
    Rectangle,
    /// Nodes with `|x - center| < radius` are active.
    Disk {
        center: Point,
        radius: f64,
    },
}

/// Uniform grid with identical spacing on every axis.
///
/// Nodes are stored row-major with the first axis fastest: node `(i, j)` has
/// index `j * n[0] + i` and position `origin + h * (i, j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    dim: usize,
    origin: Point,
    n: [usize; 2],
    h: f64,
    shape: DomainShape,
    mask: Vec<bool>,
}

/// Serializable description of a grid; the mask is recomputed on load.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridDescriptor {
    pub dimension: usize,
    pub origin: Vec<f64>,
    pub extent: Vec<f64>,
    pub n: Vec<usize>,
    pub spacing: f64,
    #[serde(flatten)]
    pub shape: DomainShape,
}

impl GridSpec {
    /// Interval `[a, b]` with `n` nodes.
    pub fn interval(a: f64, b: f64, n: usize) -> Result<Self> {
        if !(b > a) || n < 2 {
            return Err(Error::InvalidGrid(format!("interval needs b > a and n >= 2 (a = {a}, b = {b}, n = {n})")));
        }
        let h = (b - a) / (n - 1) as f64;
        Self::build(1, [a, 0.0], [n, 1], h, DomainShape::Interval)
    }

    /// Rectangle with lower-left node `origin`, `n` nodes per axis and spacing `h`.
    pub fn rectangle(origin: Point, n: [usize; 2], h: f64) -> Result<Self> {
        if n[0] < 2 || n[1] < 2 {
            return Err(Error::InvalidGrid("rectangle needs >= 2 nodes per axis".into()));
        }
        Self::build(2, origin, n, h, DomainShape::Rectangle)
    }

    /// Square `center ± half_width` with `n` nodes per axis.
    pub fn square(center: Point, half_width: f64, n: usize) -> Result<Self> {
        if !(half_width > 0.0) || n < 2 {
            return Err(Error::InvalidGrid("square needs half_width > 0, n >= 2".into()));
        }
        let h = 2.0 * half_width / (n - 1) as f64;
        Self::rectangle([center[0] - half_width, center[1] - half_width], [n, n], h)
    }

    /// Disk of `radius` about `center`, embedded in a square of `n` nodes per
    /// axis that leaves `margin` node layers between the disk and the edge.
    pub fn disk(center: Point, radius: f64, n: usize, margin: usize) -> Result<Self> {
        if !(radius > 0.0) || n < 2 * margin + 3 {
            return Err(Error::InvalidGrid(format!(
                "disk needs radius > 0 and n >= 2 * margin + 3 (n = {n}, margin = {margin})"
            )));
        }
        let h = 2.0 * radius / (n - 1 - 2 * margin) as f64;
        let half = radius + margin as f64 * h;
        Self::build(2, [center[0] - half, center[1] - half], [n, n], h, DomainShape::Disk { center, radius })
    }

    fn build(dim: usize, origin: Point, n: [usize; 2], h: f64, shape: DomainShape) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidGrid(format!("spacing must be positive, got {h}")));
        }
        let len = n[0] * n[1];
        let mut grid = GridSpec { dim, origin, n, h, shape, mask: Vec::new() };
        let mask = (0..len)
            .map(|idx| match &grid.shape {
                DomainShape::Interval | DomainShape::Rectangle => true,
                DomainShape::Disk { center, radius } => {
                    let p = grid.position(idx);
                    dist(p, *center) < *radius
                }
            })
            .collect();
        grid.mask = mask;
        Ok(grid)
    }

    pub fn from_descriptor(d: &GridDescriptor) -> Result<Self> {
        let origin = [d.origin[0], d.origin.get(1).copied().unwrap_or(0.0)];
        match d.dimension {
            1 => Self::build(1, origin, [d.n[0], 1], d.spacing, d.shape.clone()),
            2 => Self::build(2, origin, [d.n[0], d.n[1]], d.spacing, d.shape.clone()),
            other => Err(Error::InvalidGrid(format!("unsupported dimension {other}"))),
        }
    }

    pub fn descriptor(&self) -> GridDescriptor {
        let d = self.dim;
        GridDescriptor {
            dimension: d,
            origin: self.origin[..d].to_vec(),
            extent: (0..d).map(|a| self.extent(a)).collect(),
            n: self.n[..d].to_vec(),
            spacing: self.h,
            shape: self.shape.clone(),
        }
    }

    /// Same grid shifted so that node positions move by `offset`.
    pub fn translated(&self, offset: Point) -> Self {
        let mut g = self.clone();
        g.origin = [self.origin[0] + offset[0], self.origin[1] + offset[1]];
        if let DomainShape::Disk { center, .. } = &mut g.shape {
            *center = [center[0] + offset[0], center[1] + offset[1]];
        }
        g
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn n(&self) -> [usize; 2] {
        self.n
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    pub fn shape(&self) -> &DomainShape {
        &self.shape
    }

    pub fn extent(&self, axis: usize) -> f64 {
        (self.n[axis] - 1) as f64 * self.h
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.n[0] * self.n[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cell volume `h^dim`.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn in_mask(&self, idx: usize) -> bool {
        self.mask[idx]
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n[0] + i
    }

    pub fn ij(&self, idx: usize) -> (usize, usize) {
        (idx % self.n[0], idx / self.n[0])
    }

    /// Index of the node offset by `(di, dj)` from `idx`, if it exists.
    pub fn offset(&self, idx: usize, di: isize, dj: isize) -> Option<usize> {
        let (i, j) = self.ij(idx);
        let ii = i as isize + di;
        let jj = j as isize + dj;
        if ii < 0 || jj < 0 || ii >= self.n[0] as isize || jj >= self.n[1] as isize {
            return None;
        }
        Some(self.index(ii as usize, jj as usize))
    }

    pub fn position(&self, idx: usize) -> Point {
        let (i, j) = self.ij(idx);
        self.position_ij(i, j)
    }

    pub fn position_ij(&self, i: usize, j: usize) -> Point {
        if self.dim == 1 {
            [self.origin[0] + i as f64 * self.h, 0.0]
        } else {
            [self.origin[0] + i as f64 * self.h, self.origin[1] + j as f64 * self.h]
        }
    }

    /// Fractional node coordinates of a physical point.
    pub fn fractional(&self, p: Point) -> [f64; 2] {
        let fx = (p[0] - self.origin[0]) / self.h;
        let fy = if self.dim == 1 { 0.0 } else { (p[1] - self.origin[1]) / self.h };
        [fx, fy]
    }

    /// Node closest to `p`, if `p` lies within half a cell of the grid box.
    pub fn nearest_node(&self, p: Point) -> Option<usize> {
        let f = self.fractional(p);
        let i = f[0].round();
        let j = f[1].round();
        if i < 0.0 || j < 0.0 || i > (self.n[0] - 1) as f64 || j > (self.n[1] - 1) as f64 {
            return None;
        }
        Some(self.index(i as usize, j as usize))
    }

    /// Indices of masked nodes whose centers satisfy `|x - center| < radius`.
    pub fn ball_nodes(&self, center: Point, radius: f64) -> Vec<usize> {
        self.box_nodes(center, radius)
            .into_iter()
            .filter(|&idx| self.mask[idx] && dist(self.position(idx), center) < radius)
            .collect()
    }

    /// All nodes inside the axis-aligned box `center ± half` (mask ignored).
    pub fn box_nodes(&self, center: Point, half: f64) -> Vec<usize> {
        let f = self.fractional(center);
        let reach = half / self.h;
        let range = |c: f64, n: usize| {
            let lo = (c - reach).floor().max(0.0) as usize;
            let hi = ((c + reach).ceil().max(0.0) as usize).min(n - 1);
            (lo, hi)
        };
        let (i0, i1) = range(f[0], self.n[0]);
        let (j0, j1) = if self.dim == 1 { (0, 0) } else { range(f[1], self.n[1]) };
        let mut out = Vec::new();
        if f[0] + reach < 0.0 || (self.dim == 2 && f[1] + reach < 0.0) {
            return out;
        }
        for j in j0..=j1 {
            for i in i0..=i1 {
                out.push(self.index(i, j));
            }
        }
        out
    }

    pub fn same_layout(&self, other: &GridSpec) -> bool {
        self.dim == other.dim
            && self.n == other.n
            && self.h == other.h
            && self.origin == other.origin
            && self.shape == other.shape
    }
}

/// An open ball `B_r(x0)` used to select nodes for norms and sup estimates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubRegion {
    pub center: Point,
    pub radius: f64,
}

impl SubRegion {
    pub fn ball(center: Point, radius: f64) -> Self {
        SubRegion { center, radius }
    }

    /// Ball about the origin.
    pub fn centered(radius: f64) -> Self {
        SubRegion { center: [0.0, 0.0], radius }
    }

    pub fn nodes(&self, grid: &GridSpec) -> Vec<usize> {
        grid.ball_nodes(self.center, self.radius)
    }
}

pub fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Volume of the unit ball in dimension 1 or 2.
pub fn unit_ball_volume(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        _ => std::f64::consts::PI,
    }
}

/// `(|B_1| / 2)^{1/2}`, the third-derivative norm of `(1/6)(x_n)_+^3` on `B_1`.
pub fn omega(dim: usize) -> f64 {
    (unit_ball_volume(dim) / 2.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_is_isotropic() {
        let g = GridSpec::square([0.0, 0.0], 1.0, 21).unwrap();
        assert_eq!(g.h(), 0.1);
        assert!((g.extent(0) - 2.0).abs() < 1e-14);
        assert!((g.extent(1) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn disk_mask_uses_node_centers() {
        let g = GridSpec::disk([0.0, 0.0], 1.0, 41, 4).unwrap();
        for idx in 0..g.len() {
            let p = g.position(idx);
            assert_eq!(g.in_mask(idx), dist(p, [0.0, 0.0]) < 1.0);
        }
        // The disk boundary sits `margin` cells from the edge.
        assert!((g.origin()[0] + 1.0 + 4.0 * g.h()).abs() < 1e-12);
    }

    #[test]
    fn ball_selection_is_nonempty_at_two_cells() {
        let g = GridSpec::square([0.0, 0.0], 1.0, 33).unwrap();
        let r = 2.0 * g.h();
        let c = [0.013, -0.021];
        assert!(!SubRegion::ball(c, r).nodes(&g).is_empty());
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(GridSpec::interval(1.0, 0.0, 10).is_err());
        assert!(GridSpec::disk([0.0, 0.0], 1.0, 8, 4).is_err());
    }

    #[test]
    fn omega_matches_half_ball_volume() {
        assert!((omega(2) - (std::f64::consts::PI / 2.0).sqrt()).abs() < 1e-15);
        assert!((omega(2) - 1.25331).abs() < 1e-5);
        assert_eq!(omega(1), 1.0);
    }
}
