//! Discrete biharmonic zero-obstacle solver.
//!
//! Primal active-set method: each outer iteration solves the equality
//! constrained problem with the current active nodes pinned to zero by one
//! sparse Cholesky factorization, then either takes the longest feasible
//! step (adding the blocking nodes) or, at a full step, releases active nodes
//! with negative multiplier `Δ²_h u`. Iterates stay feasible and the energy
//! never increases. A repeated active set switches to accelerated projected
//! gradient for a while before resuming with single releases.

mod assemble;
mod diagnostics;
mod kkt;
mod problem;

use std::collections::hash_map::DefaultHasher;
use std::collections::HashSet;
use std::hash::{Hash, Hasher};

use faer::prelude::*;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::Side;
use serde::{Deserialize, Serialize};

pub use assemble::QuadraticModel;
pub use diagnostics::{regularity_ratios, zeta_diagnostic, RegularityRatios};
pub use kkt::{kkt_residuals, KKTReport};
pub use problem::{outward_normal, BiharmonicProblem, NodeLayout};

use crate::error::{Error, Result};
use crate::field::ScalarField;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialGuess {
    /// Solution on a grid with twice the spacing, interpolated and clipped;
    /// falls back to `Projected` when the problem cannot be coarsened.
    Cascade,
    /// Unconstrained minimizer clipped at zero.
    Projected,
    /// Everything on the obstacle.
    Zero,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Relative KKT tolerance.
    pub kkt_tolerance: f64,
    pub max_iterations: usize,
    /// Relative residual accepted from each linear solve.
    pub linear_tolerance: f64,
    /// Cap on nodes released per iteration; `None` releases all candidates.
    pub release_limit: Option<usize>,
    /// Projected-gradient sweeps after a detected cycle.
    pub fallback_iterations: usize,
    pub initial: InitialGuess,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            kkt_tolerance: 1e-8,
            max_iterations: 500,
            linear_tolerance: 1e-10,
            release_limit: None,
            fallback_iterations: 5000,
            initial: InitialGuess::Cascade,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.kkt_tolerance > 0.0 && self.linear_tolerance > 0.0) {
            return Err(Error::InvalidParameter("solver tolerances must be positive".into()));
        }
        if self.max_iterations == 0 || self.release_limit == Some(0) {
            return Err(Error::InvalidParameter("iteration and release limits must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub field: ScalarField,
    pub report: KKTReport,
    /// Energy after every accepted iterate, starting with the initial guess.
    pub energy_history: Vec<f64>,
    pub used_fallback: bool,
}

struct EqualitySolver<'a> {
    model: &'a QuadraticModel,
    symbolic: SymbolicLlt<usize>,
    tol: f64,
}

impl<'a> EqualitySolver<'a> {
    fn new(model: &'a QuadraticModel, tol: f64) -> Result<Self> {
        let symbolic = SymbolicLlt::try_new(model.upper.symbolic(), Side::Upper)
            .map_err(|e| Error::LinearSolve(format!("{e:?}")))?;
        Ok(EqualitySolver { model, symbolic, tol })
    }

    /// Minimizer of the energy with `u = 0` on `active`.
    fn solve(&self, active: &[bool]) -> Result<Vec<f64>> {
        let m = self.model.len();
        let mut mat = self.model.upper.clone();
        for (v, &(r, c)) in mat.val_mut().iter_mut().zip(&self.model.entry_rc) {
            if r != c && (active[r] || active[c]) {
                *v = 0.0;
            }
        }
        let rhs: Vec<f64> = (0..m).map(|k| if active[k] { 0.0 } else { self.model.rhs[k] }).collect();
        let llt = Llt::try_new_with_symbolic(self.symbolic.clone(), mat.as_ref(), Side::Upper)
            .map_err(|e| Error::LinearSolve(format!("{e:?}")))?;
        let b = Col::<f64>::from_fn(m, |k| rhs[k]);
        let x = llt.solve(&b);
        let mut out: Vec<f64> = (0..m).map(|k| if active[k] { 0.0 } else { x[k] }).collect();
        // One step of refinement, then check the residual.
        let r = residual(&mat, &self.model.entry_rc, &out, &rhs);
        let dx = llt.solve(&Col::<f64>::from_fn(m, |k| r[k]));
        for k in 0..m {
            if !active[k] {
                out[k] += dx[k];
            }
        }
        let r = residual(&mat, &self.model.entry_rc, &out, &rhs);
        let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        let bn = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rn > self.tol * bn.max(f64::MIN_POSITIVE) && rn > 1e-300 {
            return Err(Error::LinearSolve(format!("residual {rn:e} against right-hand side {bn:e}")));
        }
        Ok(out)
    }
}

fn residual(mat: &faer::sparse::SparseColMat<usize, f64>, rc: &[(usize, usize)], x: &[f64], rhs: &[f64]) -> Vec<f64> {
    let mut r = rhs.to_vec();
    for (&v, &(i, j)) in mat.val().iter().zip(rc) {
        r[i] -= v * x[j];
        if i != j {
            r[j] -= v * x[i];
        }
    }
    r
}

/// Multilinear interpolation from the enclosing cell; `None` if a corner is
/// missing or invalid.
fn linear_interpolate(field: &ScalarField, p: crate::grid::Point) -> Option<f64> {
    let g = field.grid();
    let f = g.fractional(p);
    let [nx, ny] = g.n();
    let cell = |x: f64, n: usize| -> Option<(usize, f64)> {
        if n == 1 {
            return Some((0, 0.0));
        }
        if x < -1e-9 || x > (n - 1) as f64 + 1e-9 {
            return None;
        }
        let i = (x.floor().max(0.0) as usize).min(n - 2);
        Some((i, (x - i as f64).clamp(0.0, 1.0)))
    };
    let (i, tx) = cell(f[0], nx)?;
    let (j, ty) = if g.dim() == 1 { (0, 0.0) } else { cell(f[1], ny)? };
    let mut acc = 0.0;
    for (dj, wy) in [(0, 1.0 - ty), (1, ty)] {
        if g.dim() == 1 && dj == 1 {
            continue;
        }
        for (di, wx) in [(0, 1.0 - tx), (1, tx)] {
            let w = wx * if g.dim() == 1 { 1.0 } else { wy };
            if w == 0.0 {
                continue;
            }
            let v = field.get(g.index(i + di, j + dj));
            if !v.is_finite() {
                return None;
            }
            acc += w * v;
        }
    }
    Some(acc)
}

fn set_hash(active: &[bool]) -> u64 {
    let mut h = DefaultHasher::new();
    active.hash(&mut h);
    h.finish()
}

/// Solves the obstacle problem.
pub fn solve(problem: &BiharmonicProblem, config: &SolverConfig) -> Result<SolveOutcome> {
    config.validate()?;
    let model = QuadraticModel::new(problem)?;
    let m = model.len();
    let eq = EqualitySolver::new(&model, config.linear_tolerance)?;

    let coarse_start = match config.initial {
        InitialGuess::Cascade => {
            problem.coarsened().filter(|c| c.layout().unknowns.len() >= 64).and_then(|c| match solve(&c, config) {
                Ok(o) => Some(o.field),
                Err(Error::NonConvergence { best, .. }) => Some(best.field),
                Err(_) => None,
            })
        }
        _ => None,
    };
    let initial = match (config.initial, &coarse_start) {
        (InitialGuess::Cascade, Some(_)) => InitialGuess::Cascade,
        (InitialGuess::Zero, _) => InitialGuess::Zero,
        _ => InitialGuess::Projected,
    };
    let (mut u, mut active) = match initial {
        InitialGuess::Cascade => {
            let coarse = coarse_start.expect("coarse field");
            let grid = problem.grid();
            let start: Vec<f64> = model
                .unknowns
                .iter()
                .map(|&i| linear_interpolate(&coarse, grid.position(i)).unwrap_or(0.0).max(0.0))
                .collect();
            let active = start.iter().map(|&v| v <= 0.0).collect();
            (start, active)
        }
        InitialGuess::Projected => {
            let free = eq.solve(&vec![false; m])?;
            let active: Vec<bool> = free.iter().map(|&v| v <= 0.0).collect();
            (free.into_iter().map(|v| v.max(0.0)).collect::<Vec<f64>>(), active)
        }
        InitialGuess::Zero => (vec![0.0; m], vec![true; m]),
    };
    // Release down to a few hundred ulps of the stencil magnitude so the
    // returned multipliers are feasible well inside the KKT tolerance.
    let release_threshold = (0.1 * config.kkt_tolerance).min(1e-13);
    let mut history = vec![model.energy(&u)];
    let mut seen = HashSet::new();
    let mut single_release = false;
    let mut last_released: Vec<usize> = Vec::new();
    let mut used_fallback = false;

    let finish = |u: &[f64], iterations: usize, history: Vec<f64>, used_fallback: bool| -> Result<SolveOutcome> {
        let field = ScalarField::new(problem.grid().clone(), model.expand(u))?;
        Ok(SolveOutcome { field, report: kkt::report(&model, u, iterations), energy_history: history, used_fallback })
    };

    for it in 1..=config.max_iterations {
        let target = eq.solve(&active)?;
        let mut alpha: f64 = 1.0;
        for k in 0..m {
            if !active[k] && target[k] < 0.0 {
                alpha = alpha.min(u[k] / (u[k] - target[k]));
            }
        }
        if alpha < 1.0 {
            if let Some((next, next_active)) = projected_step(&model, &u, &target, &active, alpha) {
                u = next;
                active = next_active;
                last_released.clear();
                history.push(model.energy(&u));
                continue;
            }
            let mut blocked = Vec::new();
            for k in 0..m {
                if active[k] {
                    continue;
                }
                let hits = target[k] < 0.0 && u[k] / (u[k] - target[k]) <= alpha * (1.0 + 1e-12) + 1e-300;
                u[k] += alpha * (target[k] - u[k]);
                if hits || u[k] <= 0.0 {
                    u[k] = 0.0;
                    active[k] = true;
                    blocked.push(k);
                }
            }
            if alpha == 0.0
                && !last_released.is_empty()
                && last_released.iter().all(|k| blocked.binary_search(k).is_ok())
            {
                single_release = true;
            }
            last_released.clear();
        } else {
            u = target;
            let bl = model.bilaplacian(&u);
            let scale = model.bilaplacian_magnitude(&u).into_iter().fold(0.0f64, f64::max).max(f64::MIN_POSITIVE);
            let mut candidates: Vec<(f64, usize)> =
                (0..m).filter(|&k| active[k] && bl[k] < -release_threshold * scale).map(|k| (bl[k], k)).collect();
            if candidates.is_empty() {
                history.push(model.energy(&u));
                return finish(&u, it, history, used_fallback);
            }
            if !seen.insert(set_hash(&active)) {
                used_fallback = true;
                u = projected_gradient(&model, u, config.fallback_iterations);
                for k in 0..m {
                    active[k] = u[k] <= 0.0;
                }
                seen.clear();
                single_release = true;
                history.push(model.energy(&u));
                continue;
            }
            candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
            let limit = if single_release { 1 } else { config.release_limit.unwrap_or(usize::MAX) };
            single_release = false;
            last_released = candidates.iter().take(limit).map(|c| c.1).collect();
            last_released.sort_unstable();
            for &k in &last_released {
                active[k] = false;
            }
        }
        history.push(model.energy(&u));
    }
    let best = finish(&u, config.max_iterations, history, used_fallback)?;
    Err(Error::NonConvergence { iterations: config.max_iterations, best: Box::new(best) })
}

/// Projected search `P(u + t (target - u))` for `t = 1, 1/2, ...` down to the
/// blocking step, accepting the first point with strictly lower energy than
/// the exact blocking step would give. Nodes clipped to zero join the active set.
fn projected_step(
    model: &QuadraticModel,
    u: &[f64],
    target: &[f64],
    active: &[bool],
    alpha_block: f64,
) -> Option<(Vec<f64>, Vec<bool>)> {
    let blocked: Vec<f64> = u.iter().zip(target).map(|(a, b)| (a + alpha_block * (b - a)).max(0.0)).collect();
    let reference = model.energy(&blocked);
    let mut t = 1.0;
    while t > alpha_block * 2.0 {
        let cand: Vec<f64> = u
            .iter()
            .zip(target)
            .zip(active)
            .map(|((a, b), &act)| if act { 0.0 } else { (a + t * (b - a)).max(0.0) })
            .collect();
        if model.energy(&cand) < reference {
            let next_active = cand.iter().map(|&v| v <= 0.0).collect();
            return Some((cand, next_active));
        }
        t *= 0.5;
    }
    None
}

/// FISTA with adaptive restart on the bound constraint; returns the best
/// iterate seen, never worse than the start.
fn projected_gradient(model: &QuadraticModel, start: Vec<f64>, iterations: usize) -> Vec<f64> {
    let m = model.len();
    // Largest eigenvalue of A by power iteration on the homogeneous part.
    let apply = |x: &[f64]| -> Vec<f64> {
        let g = model.gradient(x);
        let g0 = model.gradient(&vec![0.0; m]);
        g.iter().zip(&g0).map(|(a, b)| a - b).collect()
    };
    let mut v: Vec<f64> = (0..m).map(|k| 1.0 + (k % 7) as f64 * 0.1).collect();
    let mut lmax = 1.0;
    for _ in 0..50 {
        let w = apply(&v);
        let n = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n == 0.0 {
            break;
        }
        lmax = n / v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v = w.into_iter().map(|x| x / n).collect();
    }
    let step = 1.0 / (1.1 * lmax);
    let mut best_e = model.energy(&start);
    let mut best = start.clone();
    let mut x = start.clone();
    let mut y = start;
    let mut t: f64 = 1.0;
    let mut prev_e = best_e;
    for _ in 0..iterations {
        let g = model.gradient(&y);
        let xn: Vec<f64> = y.iter().zip(&g).map(|(yi, gi)| (yi - step * gi).max(0.0)).collect();
        let e = model.energy(&xn);
        if e > prev_e {
            // Restart momentum.
            t = 1.0;
            y = x.clone();
            continue;
        }
        let tn = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / tn;
        y = xn.iter().zip(&x).map(|(a, b)| (a + beta * (a - b)).max(0.0)).collect();
        x = xn;
        t = tn;
        prev_e = e;
        if e < best_e {
            best_e = e;
            best = x.clone();
        }
    }
    best
}
