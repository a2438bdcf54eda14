//! Growth exponents from `sup_{B_r(x₀)} |f|` over a geometric ladder of radii.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::{DomainShape, Point};

pub enum HolderSource<'a> {
    Field(&'a ScalarField),
    /// Evaluated on a polar sample of each ball.
    Function(&'a (dyn Fn(Point) -> f64 + Sync)),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderFit {
    pub center: Point,
    pub radii: Vec<f64>,
    pub sups: Vec<f64>,
    /// Radii left out because the sup vanished there.
    pub dropped: Vec<f64>,
    pub exponent: f64,
    /// `exp` of the regression intercept.
    pub constant: f64,
    pub r_squared: f64,
    pub warnings: Vec<String>,
}

impl HolderFit {
    /// CSV with columns `r,sup`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,sup\n");
        for (r, s) in self.radii.iter().zip(&self.sups) {
            out.push_str(&format!("{r:?},{s:?}\n"));
        }
        out
    }
}

/// Radial and angular resolution of the polar sample.
const RADIAL: usize = 64;
const ANGULAR: usize = 256;

fn sup_function(f: &(dyn Fn(Point) -> f64 + Sync), x0: Point, r: f64) -> f64 {
    let mut sup = f(x0).abs();
    for i in 1..=RADIAL {
        let rho = r * i as f64 / RADIAL as f64;
        for j in 0..ANGULAR {
            let phi = 2.0 * std::f64::consts::PI * j as f64 / ANGULAR as f64;
            let v = f([x0[0] + rho * phi.cos(), x0[1] + rho * phi.sin()]);
            if v.is_finite() {
                sup = sup.max(v.abs());
            }
        }
    }
    sup
}

fn sup_field(f: &ScalarField, x0: Point, r: f64) -> f64 {
    f.grid()
        .ball_nodes(x0, r * (1.0 + 1e-12))
        .into_iter()
        .map(|i| f.get(i))
        .filter(|v| v.is_finite())
        .fold(0.0, |m: f64, v| m.max(v.abs()))
}

fn check_field_range(f: &ScalarField, x0: Point, r_min: f64, r_max: f64) -> Result<()> {
    let g = f.grid();
    if r_min < 2.0 * g.h() {
        return Err(Error::InvalidParameter(format!("r_min = {r_min} is below 2h = {}", 2.0 * g.h())));
    }
    let inside = match g.shape() {
        DomainShape::Disk { center, radius } => crate::grid::dist(x0, *center) + r_max <= *radius,
        _ => (0..g.dim()).all(|a| x0[a] - r_max >= g.origin()[a] && x0[a] + r_max <= g.origin()[a] + g.extent(a)),
    };
    if !inside {
        return Err(Error::InvalidParameter(format!("ball of radius {r_max} leaves the grid domain")));
    }
    Ok(())
}

/// Least-squares slope of `log sup_{B_r(x₀)} |f|` against `log r` over
/// `levels` geometrically spaced radii in `[r_min, r_max]`.
pub fn holder_exponent(src: HolderSource<'_>, x0: Point, r_min: f64, r_max: f64, levels: usize) -> Result<HolderFit> {
    if !(r_min > 0.0 && r_max > r_min) || levels < 2 {
        return Err(Error::InvalidParameter("need 0 < r_min < r_max and at least two levels".into()));
    }
    if let HolderSource::Field(f) = &src {
        check_field_range(f, x0, r_min, r_max)?;
    }
    let ratio = (r_max / r_min).powf(1.0 / (levels - 1) as f64);
    let mut radii = Vec::new();
    let mut sups = Vec::new();
    let mut dropped = Vec::new();
    let mut warnings = Vec::new();
    for k in 0..levels {
        let r = if k + 1 == levels { r_max } else { r_min * ratio.powi(k as i32) };
        let s = match &src {
            HolderSource::Field(f) => sup_field(f, x0, r),
            HolderSource::Function(f) => sup_function(*f, x0, r),
        };
        if s > 0.0 && s.is_finite() {
            radii.push(r);
            sups.push(s);
        } else {
            warnings.push(format!("sup vanishes at r = {r}; radius dropped"));
            dropped.push(r);
        }
    }
    if radii.len() < 2 {
        return Err(Error::InvalidParameter("fewer than two radii with a nonzero sup".into()));
    }
    let xs: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = sups.iter().map(|s| s.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    Ok(HolderFit {
        center: x0,
        radii,
        sups,
        dropped,
        exponent: slope,
        constant: (my - slope * mx).exp(),
        r_squared: if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 },
        warnings,
    })
}
