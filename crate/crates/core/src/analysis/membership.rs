//! Discrete check of the flatness class around a free-boundary point at the origin.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::{Point, SubRegion};
use crate::nta::{check_corkscrews, NTAParams, NtaChecker, NtaVerdict};

use super::boundary::{extract_free_boundary, positivity_set, ThresholdRule};
use super::direction::{flatness, normalize, NormalizationReport};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MembershipParams {
    pub kappa: f64,
    pub rho: f64,
    pub epsilon: f64,
    pub t: f64,
    pub threshold: ThresholdRule,
    /// Boundary points in `B₁` at which corkscrews are tested.
    pub boundary_points: usize,
    /// Radii per point, geometric in `[8h, ρ)`.
    pub radii: usize,
}

impl Default for MembershipParams {
    fn default() -> Self {
        MembershipParams {
            kappa: 3.0,
            rho: 0.5,
            epsilon: 0.1,
            t: 0.5,
            threshold: ThresholdRule::default(),
            boundary_points: 16,
            radii: 4,
        }
    }
}

impl MembershipParams {
    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
            }
        };
        pos("kappa", self.kappa)?;
        pos("rho", self.rho)?;
        pos("epsilon", self.epsilon)?;
        pos("t", self.t)?;
        if self.rho > 1.0 {
            return Err(Error::InvalidParameter("rho must not exceed 1".into()));
        }
        if self.boundary_points == 0 || self.radii == 0 {
            return Err(Error::InvalidParameter("need at least one boundary point and one radius".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatnessReport {
    pub params: MembershipParams,
    /// Distance from the origin to the nearest traced boundary point.
    pub origin_distance: f64,
    pub normalization: NormalizationReport,
    /// `‖∇′U‖_{W^{2,2}(B₂)}` of the normalized field in the `e_n` frame.
    pub flatness: f64,
    pub flatness_ok: bool,
    /// `‖D³U‖_{L²(B₂)} < κ`.
    pub kappa_ok: bool,
    /// Smallest `t ≥ 0` with no positive node in `B₂ ∩ {x_n < −t}`.
    pub t_measured: f64,
    pub vanish_ok: bool,
    pub nta: NtaVerdict,
    pub member: bool,
}

/// Evaluates the four class assumptions for `u` with `0 ∈ Γ_u`.
pub fn class_membership(u: &ScalarField, params: &MembershipParams) -> Result<FlatnessReport> {
    params.validate()?;
    let g = u.grid();
    let h = g.h();
    let dim = g.dim();
    let mask = positivity_set(u, &params.threshold);
    let fb = extract_free_boundary(&mask)?;
    let (_, origin_distance) = fb.nearest([0.0, 0.0]).ok_or(Error::EmptyBoundary)?;
    if origin_distance > std::f64::consts::SQRT_2 * h {
        return Err(Error::OriginNotOnFreeBoundary(origin_distance));
    }

    let (normalized, normalization) = normalize(u)?;
    let e_n = if dim == 1 { [1.0, 0.0] } else { [0.0, 1.0] };
    let flat = flatness(&normalized, e_n, &SubRegion::centered(2.0))?;

    let t_measured = g
        .ball_nodes([0.0, 0.0], 2.0)
        .into_iter()
        .filter(|&i| mask.is_inside(i))
        .map(|i| -g.position(i)[dim - 1])
        .fold(0.0f64, f64::max);

    let nta_params = NTAParams::coupled(params.rho)?;
    // The cubic threshold moves the mask boundary up to ~2h inward, which
    // smaller radii cannot resolve.
    let r_lo = 8.0 * h;
    let r_hi = params.rho * (1.0 - 1e-9);
    if r_lo >= r_hi {
        return Err(Error::InvalidParameter(format!("grid too coarse: 8h = {r_lo} is not below rho")));
    }
    let radii: Vec<f64> = if params.radii == 1 {
        vec![r_lo]
    } else {
        let q = (r_hi / r_lo).powf(1.0 / (params.radii - 1) as f64);
        (0..params.radii).map(|k| (r_lo * q.powi(k as i32)).min(r_hi)).collect()
    };
    let candidates: Vec<Point> =
        fb.points.iter().copied().filter(|p| crate::grid::dist(*p, [0.0, 0.0]) < 1.0).collect();
    let stride = candidates.len().div_ceil(params.boundary_points).max(1);
    let points: Vec<Point> = candidates.into_iter().step_by(stride).collect();
    let nta = check_corkscrews(&NtaChecker::new(&mask), &points, &radii, &nta_params)?;

    let flatness_ok = flat <= params.epsilon;
    let kappa_ok = normalization.kappa_value < params.kappa;
    let vanish_ok = t_measured <= params.t;
    let member = flatness_ok && kappa_ok && vanish_ok && nta.passed;
    Ok(FlatnessReport {
        params: params.clone(),
        origin_distance,
        normalization,
        flatness: flat,
        flatness_ok,
        kappa_ok,
        t_measured,
        vanish_ok,
        member,
        nta,
    })
}
