//! Blow-up traces `A_k` and boundary normals from local blow-ups.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{PointSampler, ScalarField};
use crate::grid::{dist, GridSpec, Point, SubRegion};
use crate::norms;
use crate::ops;
use crate::oracle::{self, AnalyticField, HalfspaceCubic, Sampled};
use crate::rescale::scaled_sample;

use super::boundary::FreeBoundary;
use super::direction::{check_unit, positive_side_direction};

/// What a trace is computed from.
#[derive(Clone, Copy)]
pub enum BlowupSource<'a> {
    /// A sampled field, evaluated by cubic interpolation.
    Field(&'a ScalarField),
    Analytic(&'a dyn AnalyticField),
}

impl BlowupSource<'_> {
    fn dim(&self) -> usize {
        match self {
            BlowupSource::Field(f) => f.grid().dim(),
            BlowupSource::Analytic(a) => a.dim(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlowupParams {
    /// Geometric scale `s ∈ (1/4, 1/2)`.
    pub s: f64,
    /// Last iterate `K`.
    pub iterations: usize,
    /// Weight `λ` of the `∇′Δu` term.
    pub lambda_weight: f64,
    /// First scale `r₀`; `r_k = r₀ s^k`. `None` picks 1 at the origin and
    /// 1/2 elsewhere (half-scale re-centering).
    pub base_scale: Option<f64>,
    /// Frame `e_n^{-1}` used by `A₀`.
    pub initial_frame: [f64; 2],
    /// Nodes per side of the blow-up grid on `[-2-4h, 2+4h]²`.
    pub target_nodes: usize,
    /// Compute the discretization floor from a half-space cubic.
    pub floor: bool,
}

impl Default for BlowupParams {
    fn default() -> Self {
        BlowupParams {
            s: 0.4,
            iterations: 4,
            lambda_weight: 1.0,
            base_scale: None,
            initial_frame: [0.0, 1.0],
            target_nodes: 129,
            floor: true,
        }
    }
}

impl BlowupParams {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.s > 0.25 && self.s < 0.5) {
            return Err(Error::InvalidParameter(format!("scale s = {} must lie in (1/4, 1/2)", self.s)));
        }
        if !(self.lambda_weight >= 0.0 && self.lambda_weight.is_finite()) {
            return Err(Error::InvalidParameter("lambda_weight must be finite and nonnegative".into()));
        }
        if let Some(r) = self.base_scale {
            if !(r > 0.0 && r <= 1.0) {
                return Err(Error::InvalidParameter(format!("base_scale {r} must lie in (0, 1]")));
            }
        }
        if self.target_nodes < 17 {
            return Err(Error::InvalidParameter("target_nodes must be at least 17".into()));
        }
        check_unit(self.initial_frame, dim)
    }
}

/// The sequence `A_k` with its components and fitted decay.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlowupTrace {
    pub center: Point,
    pub s: f64,
    pub lambda_weight: f64,
    /// `r_k`.
    pub scales: Vec<f64>,
    pub values: Vec<f64>,
    /// `‖∇′_{e^k} ΔF_k‖_{L²(B₁)} / ‖D³F_k‖_{L²(B₁)}`.
    pub laplacian_terms: Vec<f64>,
    /// `‖∇′_{e^{k-1}} F_k‖_{W^{2,2}(B₂)} / ‖D³F_k‖_{L²(B₁)}`.
    pub flatness_terms: Vec<f64>,
    pub third_norms: Vec<f64>,
    /// `e_n^k`, oriented toward the positivity side.
    pub directions: Vec<[f64; 2]>,
    /// Per-iterate discretization floor; empty when not computed.
    pub floor: Vec<f64>,
    /// Fitted geometric rate; `None` when fewer than two iterates clear the floor.
    pub beta: Option<f64>,
    pub alpha: Option<f64>,
    pub fit_points: usize,
    /// `A₀ = 0`.
    pub zero_start: bool,
    pub eta0: [f64; 2],
}

impl BlowupTrace {
    /// `A_{k+1} ≤ A_k + floor_{k+1}` for every k.
    pub fn non_increasing_within_floor(&self) -> bool {
        self.values.windows(2).enumerate().all(|(k, w)| {
            let f = self.floor.get(k + 1).copied().unwrap_or(0.0);
            w[1] <= w[0] + f
        })
    }
}

/// Absolute slack added to each floor value.
const FLOOR_EPS: f64 = 1e-12;

fn target_grid(n: usize) -> Result<Arc<GridSpec>> {
    // half-width 2 + 4h with h = 2w/(n-1): w = 2(n-1)/(n-9)
    let w = 2.0 * (n - 1) as f64 / (n - 9) as f64;
    Ok(Arc::new(GridSpec::square([0.0, 0.0], w, n)?))
}

struct Iterate {
    a: f64,
    lap: f64,
    flat: f64,
    d3: f64,
    dir: [f64; 2],
}

fn iterate(field: &ScalarField, previous: [f64; 2], lambda: f64, first: bool) -> Result<Iterate> {
    let b1 = SubRegion::centered(1.0);
    let b2 = SubRegion::centered(2.0);
    let d3 = norms::norm_derivative(field, 3, &b1)?.value;
    let size = norms::norm_l2(field, &b1)?.value;
    if !(d3 > 1e-8 * size) {
        return Err(Error::VanishingThirdDerivative);
    }
    let dir = match positive_side_direction(field, &b1) {
        Ok(est) => est.eta,
        Err(Error::DegenerateDirection) => previous,
        Err(e) => return Err(e),
    };
    let frame = if first { previous } else { dir };
    let gl = ops::gradient(&ops::laplacian(field)?)?;
    let lap = norms::norm_l2_vector(&ops::tangential_gradient(&gl, frame)?, &b1)?.value / d3;
    let grad = ops::gradient(field)?;
    let flat = norms::norm_sobolev_vector(&ops::tangential_gradient(&grad, previous)?, 2, &b2)?.value / d3;
    Ok(Iterate { a: lambda * lap + flat, lap, flat, d3, dir })
}

fn raw_trace(src: &dyn PointSampler, center: Point, params: &BlowupParams, r0: f64) -> Result<Vec<Iterate>> {
    let target = target_grid(params.target_nodes)?;
    let target = if src.dim() == 1 {
        // One-dimensional traces run on the x₁ axis of an interval.
        let w = target.extent(0) / 2.0;
        Arc::new(GridSpec::interval(-w, w, params.target_nodes)?)
    } else {
        target
    };
    let mut out: Vec<Iterate> = Vec::with_capacity(params.iterations + 1);
    let mut previous = params.initial_frame;
    for k in 0..=params.iterations {
        let r = r0 * params.s.powi(k as i32);
        let field = scaled_sample(src, center, r, &target)?;
        let it = iterate(&field, previous, params.lambda_weight, k == 0)?;
        previous = it.dir;
        out.push(it);
    }
    Ok(out)
}

/// Least-squares slope of `log A_k` against `k` over iterates above ten
/// times their floor.
fn fit_rate(values: &[f64], floor: &[f64]) -> (Option<f64>, usize) {
    let pts: Vec<(f64, f64)> = values
        .iter()
        .enumerate()
        .filter(|(k, a)| **a > 10.0 * floor.get(*k).copied().unwrap_or(FLOOR_EPS) && **a > 0.0)
        .map(|(k, a)| (k as f64, a.ln()))
        .collect();
    if pts.len() < 2 {
        return (None, pts.len());
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (Some((sxy / sxx).exp()), pts.len())
}

/// `A_k` for `F_k(x) = u(r_k x + x₀) / r_k³`, `r_k = r₀ s^k`, with the
/// frame renormalized at every step.
pub fn blowup_sequence(src: BlowupSource<'_>, center: Point, params: &BlowupParams) -> Result<BlowupTrace> {
    let dim = src.dim();
    params.validate(dim)?;
    let r0 = params.base_scale.unwrap_or(if center == [0.0, 0.0] { 1.0 } else { 0.5 });
    let iterates = match src {
        BlowupSource::Field(f) => raw_trace(f, center, params, r0)?,
        BlowupSource::Analytic(a) => raw_trace(&Sampled(a), center, params, r0)?,
    };
    let values: Vec<f64> = iterates.iter().map(|i| i.a).collect();
    let eta0 = iterates.last().map(|i| i.dir).unwrap_or(params.initial_frame);

    let floor = if params.floor {
        let cubic = HalfspaceCubic::with_dim(eta0, dim)?.shifted(center);
        let fp = BlowupParams { initial_frame: eta0, floor: false, ..params.clone() };
        let reference = match src {
            BlowupSource::Field(f) => {
                let sampled = oracle::sample(&cubic, f.grid_arc().clone());
                raw_trace(&sampled, center, &fp, r0)?
            }
            BlowupSource::Analytic(_) => raw_trace(&Sampled(&cubic), center, &fp, r0)?,
        };
        reference.iter().map(|i| i.a + FLOOR_EPS).collect()
    } else {
        Vec::new()
    };

    let zero_start = values[0] == 0.0;
    let (beta, fit_points) = if zero_start { (None, 0) } else { fit_rate(&values, &floor) };
    let alpha = beta.map(|b| b.ln() / params.s.ln());
    Ok(BlowupTrace {
        center,
        s: params.s,
        lambda_weight: params.lambda_weight,
        scales: (0..=params.iterations).map(|k| r0 * params.s.powi(k as i32)).collect(),
        values,
        laplacian_terms: iterates.iter().map(|i| i.lap).collect(),
        flatness_terms: iterates.iter().map(|i| i.flat).collect(),
        third_norms: iterates.iter().map(|i| i.d3).collect(),
        directions: iterates.iter().map(|i| i.dir).collect(),
        floor,
        beta,
        alpha,
        fit_points,
        zero_start,
        eta0,
    })
}

/// Normals from local blow-ups at the boundary points and the fitted
/// modulus `|η_x − η_y| ≤ C |x − y|^α`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalModulus {
    pub points: Vec<Point>,
    pub normals: Vec<[f64; 2]>,
    /// Prefactor making the bound hold for every fitted pair.
    pub c_hat: f64,
    pub alpha_hat: Option<f64>,
    /// Intercept of the regression line, `exp(b)`.
    pub c_regression: Option<f64>,
    pub r_squared: Option<f64>,
    pub pairs: usize,
    /// All normals agree to round-off.
    pub constant: bool,
}

/// Largest number of point pairs entering the regression.
const MAX_PAIRS: usize = 20_000;

pub fn normal_field_and_modulus(
    fb: &FreeBoundary,
    src: BlowupSource<'_>,
    params: &BlowupParams,
) -> Result<NormalModulus> {
    if fb.len() < 3 {
        return Err(Error::InvalidParameter(format!("need at least 3 boundary points, got {}", fb.len())));
    }
    let local = BlowupParams { floor: false, base_scale: params.base_scale.or(Some(0.5)), ..params.clone() };
    let normals: Vec<[f64; 2]> = fb
        .points
        .par_iter()
        .zip(fb.normals.par_iter())
        .map(|(p, n)| {
            let lp = BlowupParams { initial_frame: *n, ..local.clone() };
            blowup_sequence(src, *p, &lp).map(|t| t.eta0)
        })
        .collect::<Result<_>>()?;

    let n = fb.len();
    let total = n * (n - 1) / 2;
    let stride = total.div_ceil(MAX_PAIRS).max(1);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut raw = Vec::new();
    let mut k = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            k += 1;
            if k % stride != 0 {
                continue;
            }
            let dx = dist(fb.points[i], fb.points[j]);
            let de = dist(normals[i], normals[j]);
            if dx > 0.0 && de > 1e-12 {
                xs.push(dx.ln());
                ys.push(de.ln());
                raw.push((dx, de));
            }
        }
    }
    if raw.len() < 2 {
        return Ok(NormalModulus {
            points: fb.points.clone(),
            normals,
            c_hat: 0.0,
            alpha_hat: None,
            c_regression: None,
            r_squared: None,
            pairs: raw.len(),
            constant: true,
        });
    }
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    let c_hat = raw.iter().map(|(dx, de)| de / dx.powf(slope)).fold(0.0f64, f64::max);
    Ok(NormalModulus {
        points: fb.points.clone(),
        normals,
        c_hat,
        alpha_hat: Some(slope),
        c_regression: Some(intercept.exp()),
        r_squared: Some(r2),
        pairs: raw.len(),
        constant: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::boundary::{extract_free_boundary, positivity_set, ThresholdRule};
    use crate::oracle::OneDimSolution;

    fn params(k: usize) -> BlowupParams {
        BlowupParams { iterations: k, target_nodes: 65, ..Default::default() }
    }

    #[test]
    fn aligned_cubic_has_zero_trace() {
        let cubic = HalfspaceCubic::at_angle(0.0);
        let t = blowup_sequence(BlowupSource::Analytic(&cubic), [0.0, 0.0], &params(3)).unwrap();
        assert!(t.values.iter().all(|a| *a < 1e-10), "{:?}", t.values);
        assert!(t.directions.iter().all(|d| (d[1] - 1.0).abs() < 1e-12));
        assert!(t.beta.is_none());
    }

    #[test]
    fn rotated_cubic_drops_after_first_renormalization() {
        let theta = 0.3;
        let cubic = HalfspaceCubic::at_angle(theta);
        let t = blowup_sequence(BlowupSource::Analytic(&cubic), [0.0, 0.0], &params(3)).unwrap();
        assert!(t.values[0] > 0.1, "{:?}", t.values);
        for k in 1..=3 {
            assert!(
                t.values[k] < 0.05 * t.values[0] && t.values[k] <= t.floor[k] * 1.01,
                "{:?} {:?}",
                t.values,
                t.floor
            );
        }
        assert!((t.eta0[0] - theta.sin()).abs() < 2e-3 && (t.eta0[1] - theta.cos()).abs() < 2e-3, "{:?}", t.eta0);
        assert!(t.non_increasing_within_floor());
    }

    #[test]
    fn embedded_one_dim_oracle_points_down() {
        let sol = OneDimSolution::new(-6.0).unwrap().embedded();
        let p = BlowupParams { base_scale: Some(0.2), ..params(4) };
        let t = blowup_sequence(BlowupSource::Analytic(&sol), [0.0, 0.5], &p).unwrap();
        assert!(t.values.iter().skip(1).zip(&t.floor[1..]).all(|(a, f)| a <= f), "{:?} {:?}", t.values, t.floor);
        assert!((t.eta0[1] + 1.0).abs() < 1e-10);
    }

    #[test]
    fn rejects_scale_outside_range() {
        let cubic = HalfspaceCubic::at_angle(0.0);
        let p = BlowupParams { s: 0.6, ..params(2) };
        assert!(blowup_sequence(BlowupSource::Analytic(&cubic), [0.0, 0.0], &p).is_err());
    }

    #[test]
    fn field_source_must_cover_rescaled_balls() {
        let g = Arc::new(GridSpec::square([0.0, 0.0], 1.0, 41).unwrap());
        let u = oracle::sample(&HalfspaceCubic::at_angle(0.0), g);
        let p = BlowupParams { base_scale: Some(1.0), ..params(1) };
        assert!(matches!(blowup_sequence(BlowupSource::Field(&u), [0.0, 0.0], &p), Err(Error::OutsideDomain { .. })));
    }

    #[test]
    fn straight_boundary_has_constant_normals() {
        let g = Arc::new(GridSpec::square([0.0, 0.0], 1.2, 97).unwrap());
        let cubic = HalfspaceCubic::at_angle(0.0);
        let u = oracle::sample(&cubic, g);
        let mut fb = extract_free_boundary(&positivity_set(&u, &ThresholdRule::default())).unwrap();
        let keep: Vec<usize> = (0..fb.len()).filter(|&k| fb.points[k][0].abs() < 0.4).collect();
        fb.points = keep.iter().map(|&k| fb.points[k]).collect();
        fb.normals = keep.iter().map(|&k| fb.normals[k]).collect();
        let p = BlowupParams { iterations: 1, target_nodes: 33, ..Default::default() };
        let m = normal_field_and_modulus(&fb, BlowupSource::Analytic(&cubic), &p).unwrap();
        assert!(m.constant && m.alpha_hat.is_none());
        assert!(m.normals.iter().all(|n| (n[1] - 1.0).abs() < 1e-10));
    }

    #[test]
    fn two_points_are_rejected() {
        let fb = FreeBoundary {
            points: vec![[0.0, 0.0], [0.1, 0.0]],
            normals: vec![[0.0, 1.0]; 2],
            polylines: vec![0..2],
            closed: vec![false],
            graph: None,
        };
        let cubic = HalfspaceCubic::at_angle(0.0);
        assert!(normal_field_and_modulus(&fb, BlowupSource::Analytic(&cubic), &params(1)).is_err());
    }
}
