//! Quadratic model of the discrete energy.
//!
//! Each energy row is the 5-point (3-point in 1D) Laplacian at one node,
//! written as an affine function `L_s u + c_s` of the unknowns. The energy is
//! `J(u) = hⁿ Σ_s w_s (L_s u + c_s)²`. Interval and rectangle edge nodes carry
//! weight 1/2 and reflect their missing neighbor through the edge,
//! `u(ghost) = u(mirror) + 2h f`; this reproduces the 13-point bilaplacian
//! with the same ghost rule at every interior node. Disks use two fixed node
//! rings outside the mask and weight 1 on the first ring.

use faer::sparse::{SparseColMat, Triplet};

use crate::error::{Error, Result};
use crate::grid::{DomainShape, GridSpec};

use super::problem::{outward_normal, BiharmonicProblem};

#[derive(Clone, Debug)]
pub(crate) struct Row {
    pub entries: Vec<(usize, f64)>,
    pub constant: f64,
    pub weight: f64,
}

#[derive(Clone, Debug)]
pub struct QuadraticModel {
    pub(crate) unknowns: Vec<usize>,
    pub(crate) rows: Vec<Row>,
    /// Cell volume `hⁿ`.
    pub(crate) volume: f64,
    /// Full-grid values of fixed nodes; `NaN` at unknowns and unused nodes.
    pub(crate) fixed: Vec<f64>,
    /// Upper triangle of `A = 2hⁿ LᵀWL`, with `(row, col)` of each stored value.
    pub(crate) upper: SparseColMat<usize, f64>,
    pub(crate) entry_rc: Vec<(usize, usize)>,
    /// `b = -2hⁿ LᵀWc`, so that `∇J = A u - b`.
    pub(crate) rhs: Vec<f64>,
}

enum NodeRole {
    Unknown(usize),
    Fixed(f64),
    Outside,
}

impl QuadraticModel {
    pub fn new(problem: &BiharmonicProblem) -> Result<Self> {
        let grid = problem.grid();
        let layout = problem.layout();
        let h = grid.h();
        let dim = grid.dim();
        let h2 = h * h;

        let mut unknown_of = vec![usize::MAX; grid.len()];
        for (k, &idx) in layout.unknowns.iter().enumerate() {
            unknown_of[idx] = k;
        }
        let mut fixed = vec![f64::NAN; grid.len()];
        for (b, &idx) in layout.boundary.iter().enumerate() {
            fixed[idx] = problem.boundary_values()[b];
        }
        let mut boundary_of = vec![usize::MAX; grid.len()];
        for (b, &idx) in layout.boundary.iter().enumerate() {
            boundary_of[idx] = b;
        }
        if !layout.ghosts.is_empty() {
            let ghost_vals = match problem.ghost_values() {
                Some(v) => v.to_vec(),
                None => explicit_ghosts(problem, grid, &boundary_of),
            };
            for (&q, v) in layout.ghosts.iter().zip(ghost_vals) {
                fixed[q] = v;
            }
        }
        let role = |idx: usize| {
            if unknown_of[idx] != usize::MAX {
                NodeRole::Unknown(unknown_of[idx])
            } else if fixed[idx].is_finite() {
                NodeRole::Fixed(fixed[idx])
            } else {
                NodeRole::Outside
            }
        };

        let dirs: &[(isize, isize)] = if dim == 1 { &[(1, 0), (-1, 0)] } else { &[(1, 0), (-1, 0), (0, 1), (0, -1)] };
        let is_disk = matches!(grid.shape(), DomainShape::Disk { .. });
        let [nx, ny] = grid.n();

        let mut row_nodes: Vec<(usize, f64)> = layout.unknowns.iter().map(|&i| (i, 1.0)).collect();
        for &b in &layout.boundary {
            if is_disk {
                row_nodes.push((b, 1.0));
            } else {
                let (i, j) = grid.ij(b);
                let on_x = i == 0 || i == nx - 1;
                let on_y = dim == 2 && (j == 0 || j == ny - 1);
                if !(on_x && on_y) {
                    row_nodes.push((b, 0.5));
                }
            }
        }

        let mut rows = Vec::with_capacity(row_nodes.len());
        for &(s, weight) in &row_nodes {
            let mut entries: Vec<(usize, f64)> = Vec::with_capacity(6);
            let mut constant = 0.0;
            let mut add = |idx: usize, c: f64, constant: &mut f64| -> Result<()> {
                match role(idx) {
                    NodeRole::Unknown(k) => entries.push((k, c)),
                    NodeRole::Fixed(v) => *constant += c * v,
                    NodeRole::Outside => {
                        return Err(Error::InvalidGrid(format!("stencil at node {s} reaches an undefined node {idx}")))
                    }
                }
                Ok(())
            };
            add(s, -2.0 * dim as f64 / h2, &mut constant)?;
            for &(di, dj) in dirs {
                match grid.offset(s, di, dj) {
                    Some(q) => add(q, 1.0 / h2, &mut constant)?,
                    None => {
                        // Reflection through the edge node s.
                        let b = boundary_of[s];
                        if b == usize::MAX || is_disk {
                            return Err(Error::InvalidGrid(format!("node {s} misses a neighbor")));
                        }
                        let mirror =
                            grid.offset(s, -di, -dj).ok_or_else(|| Error::InvalidGrid("grid too thin".into()))?;
                        add(mirror, 1.0 / h2, &mut constant)?;
                        constant += 2.0 * h * problem.normal_derivatives()[b] / h2;
                    }
                }
            }
            entries.sort_unstable_by_key(|e| e.0);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
            for (k, c) in entries {
                match merged.last_mut() {
                    Some(last) if last.0 == k => last.1 += c,
                    _ => merged.push((k, c)),
                }
            }
            rows.push(Row { entries: merged, constant, weight });
        }

        let volume = grid.cell_volume();
        let m = layout.unknowns.len();
        let mut rhs = vec![0.0; m];
        let mut trips: Vec<(usize, usize, f64)> = Vec::with_capacity(rows.len() * 15);
        for r in &rows {
            let s = 2.0 * volume * r.weight;
            for (a, &(ka, ca)) in r.entries.iter().enumerate() {
                rhs[ka] -= s * ca * r.constant;
                for &(kb, cb) in &r.entries[a..] {
                    let (lo, hi) = if ka <= kb { (ka, kb) } else { (kb, ka) };
                    trips.push((hi, lo, s * ca * cb));
                }
            }
        }
        // Column-major order, duplicates merged.
        trips.sort_unstable_by_key(|t| (t.0, t.1));
        let mut merged: Vec<Triplet<usize, usize, f64>> = Vec::with_capacity(trips.len() / 3);
        for (col, row, v) in trips {
            match merged.last_mut() {
                Some(t) if t.row == row && t.col == col => t.val += v,
                _ => merged.push(Triplet::new(row, col, v)),
            }
        }
        let upper = SparseColMat::<usize, f64>::try_new_from_triplets(m, m, &merged)
            .map_err(|e| Error::LinearSolve(format!("{e:?}")))?;
        let mut entry_rc = Vec::with_capacity(merged.len());
        {
            let sym = upper.symbolic();
            let cp = sym.col_ptr();
            let ri = sym.row_idx();
            for c in 0..m {
                for p in cp[c]..cp[c + 1] {
                    entry_rc.push((ri[p], c));
                }
            }
        }
        Ok(QuadraticModel { unknowns: layout.unknowns.clone(), rows, volume, fixed, upper, entry_rc, rhs })
    }

    pub fn len(&self) -> usize {
        self.unknowns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unknowns.is_empty()
    }

    /// `L u + c` for every energy row.
    pub(crate) fn residuals(&self, u: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| r.constant + r.entries.iter().map(|&(k, c)| c * u[k]).sum::<f64>()).collect()
    }

    pub fn energy(&self, u: &[f64]) -> f64 {
        let res = self.residuals(u);
        self.volume * self.rows.iter().zip(&res).map(|(r, v)| r.weight * v * v).sum::<f64>()
    }

    /// Discrete bilaplacian `LᵀW(Lu + c)` at every unknown; equals `∇J / (2hⁿ)`.
    pub fn bilaplacian(&self, u: &[f64]) -> Vec<f64> {
        let res = self.residuals(u);
        let mut out = vec![0.0; self.len()];
        for (r, v) in self.rows.iter().zip(&res) {
            for &(k, c) in &r.entries {
                out[k] += r.weight * c * v;
            }
        }
        out
    }

    /// Per-unknown magnitude `|L|ᵀW(|L||u| + |c|)`, the natural size of the
    /// bilaplacian terms that cancel in [`Self::bilaplacian`].
    pub fn bilaplacian_magnitude(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for r in &self.rows {
            let mag = r.constant.abs() + r.entries.iter().map(|&(k, c)| (c * u[k]).abs()).sum::<f64>();
            for &(k, c) in &r.entries {
                out[k] += r.weight * c.abs() * mag;
            }
        }
        out
    }

    /// Gradient `∇J = A u - b`.
    pub fn gradient(&self, u: &[f64]) -> Vec<f64> {
        let s = 2.0 * self.volume;
        self.bilaplacian(u).into_iter().map(|v| s * v).collect()
    }

    /// Full-grid field values: unknowns from `u`, fixed nodes from the data.
    pub fn expand(&self, u: &[f64]) -> Vec<f64> {
        let mut out = self.fixed.clone();
        for (k, &idx) in self.unknowns.iter().enumerate() {
            out[idx] = u[k];
        }
        out
    }

    /// Restricts a full-grid field to the unknowns.
    pub fn restrict(&self, values: &[f64]) -> Vec<f64> {
        self.unknowns.iter().map(|&i| values[i]).collect()
    }
}

/// Second-ring values from explicit data: the first-order Taylor step
/// `g_p + ((q - p)·ν_p) f_p`, averaged over adjacent first-ring nodes `p`.
fn explicit_ghosts(problem: &BiharmonicProblem, grid: &GridSpec, boundary_of: &[usize]) -> Vec<f64> {
    let layout = problem.layout();
    layout
        .ghosts
        .iter()
        .map(|&q| {
            let xq = grid.position(q);
            let mut sum = 0.0;
            let mut count = 0usize;
            for (di, dj) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                if let Some(p) = grid.offset(q, di, dj) {
                    let b = boundary_of[p];
                    if b != usize::MAX {
                        let xp = grid.position(p);
                        let nu = outward_normal(grid, p);
                        let step = (xq[0] - xp[0]) * nu[0] + (xq[1] - xp[1]) * nu[1];
                        sum += problem.boundary_values()[b] + step * problem.normal_derivatives()[b];
                        count += 1;
                    }
                }
            }
            sum / count as f64
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::field::ScalarField;
    use crate::ops;
    use crate::oracle::{self, AnalyticField, OneDimSolution};

    fn dense_apply(model: &QuadraticModel, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; model.len()];
        for (p, &(r, c)) in model.entry_rc.iter().enumerate() {
            let v = model.upper.val()[p];
            out[r] += v * u[c];
            if r != c {
                out[c] += v * u[r];
            }
        }
        out
    }

    #[test]
    fn matrix_matches_gradient() {
        let grid = Arc::new(GridSpec::rectangle([0.0, 0.0], [9, 7], 0.125).unwrap());
        let g: Vec<f64> = (0..grid.len()).map(|i| i as f64 * 0.01).collect();
        let layout = crate::solver::problem::NodeLayout::new(&grid).unwrap();
        let gb: Vec<f64> = layout.boundary.iter().map(|&b| g[b]).collect();
        let fb: Vec<f64> = layout.boundary.iter().map(|&b| (b as f64).sin()).collect();
        let p = BiharmonicProblem::from_arrays(grid, gb, fb).unwrap();
        let model = QuadraticModel::new(&p).unwrap();
        let u: Vec<f64> = (0..model.len()).map(|k| (k as f64 * 0.7).cos()).collect();
        let au = dense_apply(&model, &u);
        let grad = model.gradient(&u);
        for k in 0..model.len() {
            assert!((au[k] - model.rhs[k] - grad[k]).abs() < 1e-9 * (1.0 + grad[k].abs()));
        }
    }

    #[test]
    fn interior_bilaplacian_matches_thirteen_point_stencil() {
        let grid = Arc::new(GridSpec::disk([0.0, 0.0], 1.0, 33, 3).unwrap());
        let smooth = |x: [f64; 2]| (x[0] * 1.3).sin() * (x[1] + 0.4).exp();
        let field = ScalarField::from_fn(grid.clone(), smooth);
        let layout = crate::solver::problem::NodeLayout::new(&grid).unwrap();
        let gb: Vec<f64> = layout.boundary.iter().map(|&b| field.get(b).abs()).collect();
        let fb = vec![0.0; gb.len()];
        let p = BiharmonicProblem::from_arrays(grid.clone(), gb, fb).unwrap();
        let model = QuadraticModel::new(&p).unwrap();
        let u = model.restrict(field.values());
        let bl = model.bilaplacian(&u);
        let reference = ops::bilaplacian(&field).unwrap();
        // Away from the boundary rings both agree exactly.
        for (k, &idx) in model.unknowns.iter().enumerate() {
            if grid.position(idx)[0].hypot(grid.position(idx)[1]) < 0.75 {
                assert!((bl[k] - reference.get(idx)).abs() < 1e-8 * (1.0 + reference.get(idx).abs()));
            }
        }
    }

    #[test]
    fn one_dim_oracle_energy_is_close() {
        let sol = OneDimSolution::new(-6.0).unwrap();
        let grid = Arc::new(GridSpec::interval(0.0, 1.0, 257).unwrap());
        let p = BiharmonicProblem::from_oracle(grid.clone(), &sol).unwrap();
        let model = QuadraticModel::new(&p).unwrap();
        let sampled = oracle::sample(&sol, grid);
        let e = model.energy(&model.restrict(sampled.values()));
        assert!((e - sol.energy()).abs() < 0.05 * sol.energy(), "{e}");
        assert_eq!(sol.dim(), 1);
    }
}
