use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{DomainShape, GridSpec};
use crate::oracle::AnalyticField;

/// Which nodes are unknown, which carry boundary values `g`, and which are
/// ghosts set from the normal derivative `f`.
#[derive(Clone, Debug)]
pub struct NodeLayout {
    /// Interior masked nodes (the obstacle is enforced here), ascending.
    pub unknowns: Vec<usize>,
    /// First boundary layer carrying `g` and `f`, ascending.
    pub boundary: Vec<usize>,
    /// Second layer for masked disks (rectangles reflect across the edge instead), ascending.
    pub ghosts: Vec<usize>,
}

impl NodeLayout {
    pub fn new(grid: &GridSpec) -> Result<Self> {
        let mut unknowns = Vec::new();
        let mut boundary = Vec::new();
        let mut ghosts = Vec::new();
        let [nx, ny] = grid.n();
        match grid.shape() {
            DomainShape::Interval | DomainShape::Rectangle => {
                let need = 5;
                if nx < need || (grid.dim() == 2 && ny < need) {
                    return Err(Error::GridTooSmall {
                        needed: need,
                        got: nx.min(if grid.dim() == 2 { ny } else { nx }),
                    });
                }
                for idx in 0..grid.len() {
                    let (i, j) = grid.ij(idx);
                    let edge = i == 0 || i == nx - 1 || (grid.dim() == 2 && (j == 0 || j == ny - 1));
                    if edge {
                        boundary.push(idx);
                    } else {
                        unknowns.push(idx);
                    }
                }
            }
            DomainShape::Disk { .. } => {
                let neighbors = |idx: usize| {
                    [(1, 0), (-1, 0), (0, 1), (0, -1)].into_iter().filter_map(move |(di, dj)| grid.offset(idx, di, dj))
                };
                let mut class = vec![0u8; grid.len()];
                for idx in 0..grid.len() {
                    if grid.in_mask(idx) {
                        class[idx] = 1;
                        unknowns.push(idx);
                    }
                }
                for idx in 0..grid.len() {
                    if class[idx] == 0 && neighbors(idx).any(|q| class[q] == 1) {
                        class[idx] = 2;
                    }
                }
                for idx in 0..grid.len() {
                    if class[idx] == 2 {
                        boundary.push(idx);
                    } else if class[idx] == 0 && neighbors(idx).any(|q| class[q] == 2) {
                        ghosts.push(idx);
                    }
                }
                // Every boundary node needs all four neighbors on the grid.
                for &b in &boundary {
                    if neighbors(b).count() < 4 {
                        return Err(Error::InvalidGrid("disk needs at least two node layers of margin".into()));
                    }
                }
                if unknowns.is_empty() {
                    return Err(Error::InvalidGrid("disk mask contains no nodes".into()));
                }
            }
        }
        Ok(NodeLayout { unknowns, boundary, ghosts })
    }
}

/// Discrete biharmonic zero-obstacle problem: minimize `Σ (Δ_h u)² hⁿ` over
/// `u ≥ 0` at interior nodes with clamped data `u = g`, `∂u/∂ν = f`.
///
/// `f` is the outward normal derivative. Boundary values must be
/// nonnegative; `g = 0` is allowed.
#[derive(Clone, Debug)]
pub struct BiharmonicProblem {
    grid: Arc<GridSpec>,
    layout: NodeLayout,
    g: Vec<f64>,
    f: Vec<f64>,
    /// Exact second-layer values (disks with closed-form data only).
    ghost_values: Option<Vec<f64>>,
    source: DataSource,
}

/// Where the boundary data came from; closed-form data can be re-sampled on
/// coarser grids.
#[derive(Clone)]
enum DataSource {
    Oracle { field: Arc<dyn AnalyticField>, scale: f64 },
    Arrays,
}

impl std::fmt::Debug for DataSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DataSource::Oracle { scale, .. } => write!(f, "Oracle {{ scale: {scale} }}"),
            DataSource::Arrays => write!(f, "Arrays"),
        }
    }
}

impl BiharmonicProblem {
    /// Clamped data from explicit per-boundary-node arrays, in the order of
    /// [`NodeLayout::boundary`].
    pub fn from_arrays(grid: Arc<GridSpec>, g: Vec<f64>, f: Vec<f64>) -> Result<Self> {
        let layout = NodeLayout::new(&grid)?;
        let p = BiharmonicProblem { grid, layout, g, f, ghost_values: None, source: DataSource::Arrays };
        p.validate()?;
        Ok(p)
    }

    /// Clamped data read off a closed-form field. On disks the second layer
    /// is set from the field directly.
    pub fn from_oracle<F: AnalyticField + Clone + 'static>(grid: Arc<GridSpec>, oracle: &F) -> Result<Self> {
        Self::from_shared_oracle(grid, Arc::new(oracle.clone()))
    }

    pub fn from_shared_oracle(grid: Arc<GridSpec>, oracle: Arc<dyn AnalyticField>) -> Result<Self> {
        if oracle.dim() != grid.dim() {
            return Err(Error::BoundaryData("oracle and grid dimensions differ".into()));
        }
        let layout = NodeLayout::new(&grid)?;
        let g: Vec<f64> = layout.boundary.iter().map(|&b| oracle.value(grid.position(b))).collect();
        let f: Vec<f64> = layout
            .boundary
            .iter()
            .map(|&b| {
                let nu = outward_normal(&grid, b);
                let gr = oracle.gradient(grid.position(b));
                nu[0] * gr[0] + nu[1] * gr[1]
            })
            .collect();
        let ghost_values = match grid.shape() {
            DomainShape::Disk { .. } => Some(layout.ghosts.iter().map(|&q| oracle.value(grid.position(q))).collect()),
            _ => None,
        };
        let p = BiharmonicProblem {
            grid,
            layout,
            g,
            f,
            ghost_values,
            source: DataSource::Oracle { field: oracle, scale: 1.0 },
        };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        let n = self.layout.boundary.len();
        if self.g.len() != n || self.f.len() != n {
            return Err(Error::BoundaryData(format!(
                "expected {n} boundary values and normal derivatives, got {} and {}",
                self.g.len(),
                self.f.len()
            )));
        }
        if let Some(gv) = &self.ghost_values {
            if gv.len() != self.layout.ghosts.len() {
                return Err(Error::BoundaryData("ghost layer size mismatch".into()));
            }
        }
        if let Some(bad) = self.g.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::BoundaryData(format!("boundary value {bad} is negative or not finite")));
        }
        if self.f.iter().any(|v| !v.is_finite()) {
            return Err(Error::BoundaryData("normal derivative not finite".into()));
        }
        Ok(())
    }

    /// The problem with data `(c g, c f)`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::InvalidParameter(format!("scale must be positive, got {c}")));
        }
        let mut p = self.clone();
        p.g.iter_mut().for_each(|v| *v *= c);
        p.f.iter_mut().for_each(|v| *v *= c);
        if let Some(gv) = &mut p.ghost_values {
            gv.iter_mut().for_each(|v| *v *= c);
        }
        if let DataSource::Oracle { scale, .. } = &mut p.source {
            *scale *= c;
        }
        Ok(p)
    }

    /// The same problem on a grid with about twice the spacing, if one
    /// exists: closed-form data is re-sampled, explicit arrays are
    /// subsampled on intervals and rectangles with an odd node count.
    pub fn coarsened(&self) -> Option<Self> {
        let g = &self.grid;
        let [nx, ny] = g.n();
        let odd = |n: usize| n % 2 == 1;
        let coarse = match g.shape() {
            DomainShape::Interval => {
                if !odd(nx) || nx < 17 {
                    return None;
                }
                GridSpec::interval(g.origin()[0], g.origin()[0] + g.extent(0), nx.div_ceil(2)).ok()?
            }
            DomainShape::Rectangle => {
                if !odd(nx) || !odd(ny) || nx.min(ny) < 17 {
                    return None;
                }
                GridSpec::rectangle(g.origin(), [nx.div_ceil(2), ny.div_ceil(2)], 2.0 * g.h()).ok()?
            }
            DomainShape::Disk { center, radius } => {
                let cells = 2.0 * radius / g.h();
                let margin = ((nx as f64 - 1.0 - cells) / 2.0).round() as usize;
                let coarse_cells = (cells / 2.0).round() as usize;
                if coarse_cells < 16 {
                    return None;
                }
                GridSpec::disk(*center, *radius, coarse_cells + 1 + 2 * margin, margin).ok()?
            }
        };
        let coarse = Arc::new(coarse);
        match &self.source {
            DataSource::Oracle { field, scale } => {
                BiharmonicProblem::from_shared_oracle(coarse, field.clone()).ok()?.scaled(*scale).ok()
            }
            DataSource::Arrays => {
                if matches!(g.shape(), DomainShape::Disk { .. }) {
                    return None;
                }
                let mut slot = vec![usize::MAX; g.len()];
                for (b, &idx) in self.layout.boundary.iter().enumerate() {
                    slot[idx] = b;
                }
                let layout = NodeLayout::new(&coarse).ok()?;
                let mut gc = Vec::with_capacity(layout.boundary.len());
                let mut fc = Vec::with_capacity(layout.boundary.len());
                for &idx in &layout.boundary {
                    let (i, j) = coarse.ij(idx);
                    let b = slot[g.index(2 * i, 2 * j)];
                    if b == usize::MAX {
                        return None;
                    }
                    gc.push(self.g[b]);
                    fc.push(self.f[b]);
                }
                BiharmonicProblem::from_arrays(coarse, gc, fc).ok()
            }
        }
    }

    pub fn grid(&self) -> &Arc<GridSpec> {
        &self.grid
    }

    pub fn layout(&self) -> &NodeLayout {
        &self.layout
    }

    pub fn boundary_values(&self) -> &[f64] {
        &self.g
    }

    pub fn normal_derivatives(&self) -> &[f64] {
        &self.f
    }

    pub(crate) fn ghost_values(&self) -> Option<&[f64]> {
        self.ghost_values.as_deref()
    }
}

/// Outward unit normal at a boundary node. Rectangle corners get the
/// first-axis normal; their ghosts never feed an unknown.
pub fn outward_normal(grid: &GridSpec, idx: usize) -> [f64; 2] {
    match grid.shape() {
        DomainShape::Disk { center, .. } => {
            let p = grid.position(idx);
            let d = [p[0] - center[0], p[1] - center[1]];
            let r = (d[0] * d[0] + d[1] * d[1]).sqrt();
            [d[0] / r, d[1] / r]
        }
        _ => {
            let (i, j) = grid.ij(idx);
            let [nx, ny] = grid.n();
            if i == 0 {
                [-1.0, 0.0]
            } else if i == nx - 1 {
                [1.0, 0.0]
            } else if grid.dim() == 2 && j == 0 {
                [0.0, -1.0]
            } else if grid.dim() == 2 && j == ny - 1 {
                [0.0, 1.0]
            } else {
                [0.0, 0.0]
            }
        }
    }
}
