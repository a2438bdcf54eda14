//! Closed-form solutions of the zero-obstacle biharmonic problem, with
//! analytic derivatives up to third order.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{PointSampler, ScalarField};
use crate::grid::{GridSpec, Point};
use crate::quadrature::adaptive_simpson;

pub type Vec2 = [f64; 2];
pub type Mat2 = [[f64; 2]; 2];
pub type Tensor3 = [[[f64; 2]; 2]; 2];

/// A closed-form field with exact derivatives. One-dimensional fields use
/// only the first coordinate and the `[0]` components.
pub trait AnalyticField: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, p: Point) -> f64;
    fn gradient(&self, p: Point) -> Vec2;
    fn hessian(&self, p: Point) -> Mat2;
    fn third(&self, p: Point) -> Tensor3;

    fn laplacian(&self, p: Point) -> f64 {
        let h = self.hessian(p);
        (0..self.dim()).map(|a| h[a][a]).sum()
    }

    /// `∂_a Δu`.
    fn grad_laplacian(&self, p: Point) -> Vec2 {
        let t = self.third(p);
        let d = self.dim();
        let mut g = [0.0; 2];
        for (a, ga) in g.iter_mut().enumerate().take(d) {
            *ga = (0..d).map(|b| t[a][b][b]).sum();
        }
        g
    }
}

/// Adapts an [`AnalyticField`] to [`PointSampler`].
pub struct Sampled<'a>(pub &'a dyn AnalyticField);

impl PointSampler for Sampled<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn sample(&self, p: Point) -> Option<f64> {
        let v = self.0.value(p);
        v.is_finite().then_some(v)
    }
}

/// Renders an oracle onto a grid.
pub fn sample(oracle: &dyn AnalyticField, grid: Arc<GridSpec>) -> ScalarField {
    ScalarField::from_fn(grid, |p| oracle.value(p))
}

/// Renders the analytic Laplacian of an oracle onto a grid.
pub fn sample_laplacian(oracle: &dyn AnalyticField, grid: Arc<GridSpec>) -> ScalarField {
    ScalarField::from_fn(grid, |p| oracle.laplacian(p))
}

// ---------------------------------------------------------------------------
// One-dimensional solution on (0, 1)

/// `u₀(x) = (λ³/27) (x + 3/λ)₋³` with `(t)₋ = min(t, 0)`, the minimizer on
/// `(0, 1)` with `u(0) = 1`, `u'(0) = λ`, `u(1) = u'(1) = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OneDimSolution {
    lambda: f64,
    gamma: f64,
    coeff: f64,
}

impl OneDimSolution {
    pub fn new(lambda: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda >= -3.0 {
            return Err(Error::InvalidParameter(format!("boundary slope must satisfy λ < -3, got {lambda}")));
        }
        Ok(OneDimSolution { lambda, gamma: -3.0 / lambda, coeff: lambda.powi(3) / 27.0 })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Free-boundary point `γ = -3/λ`.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn coefficient(&self) -> f64 {
        self.coeff
    }

    /// `[u, u', u'', u''']` at `x`.
    pub fn derivatives(&self, x: f64) -> [f64; 4] {
        let t = (x - self.gamma).min(0.0);
        let c = self.coeff;
        let jump = if x < self.gamma { 6.0 * c } else { 0.0 };
        [c * t.powi(3), 3.0 * c * t * t, 6.0 * c * t, jump]
    }

    /// `∫₀¹ (u₀'')² = -4λ³/9`.
    pub fn energy(&self) -> f64 {
        -4.0 * self.lambda.powi(3) / 9.0
    }

    /// `F(γ) = (4/γ³)(λ²γ² + 3λγ + 3)`: least energy with free boundary at `γ`.
    pub fn energy_at(&self, gamma: f64) -> f64 {
        let l = self.lambda;
        4.0 / gamma.powi(3) * (l * l * gamma * gamma + 3.0 * l * gamma + 3.0)
    }

    /// `F'(γ) = -(4/γ⁴)(λγ + 3)²`.
    pub fn energy_slope(&self, gamma: f64) -> f64 {
        -4.0 / gamma.powi(4) * (self.lambda * gamma + 3.0).powi(2)
    }

    /// Mass of `Δ²u₀ = |u₀'''(γ⁻)| δ_γ`.
    pub fn measure_mass(&self) -> f64 {
        (6.0 * self.coeff).abs()
    }

    /// The same profile in 2D, varying along `x₂` and constant in `x₁`.
    pub fn embedded(&self) -> Embedded1D<OneDimSolution> {
        Embedded1D { profile: *self }
    }
}

/// Scalar profile `[u, u', u'', u''']` along one axis.
pub trait Profile: Send + Sync {
    fn profile(&self, t: f64) -> [f64; 4];

    fn profile_dim(&self) -> usize {
        1
    }
}

impl Profile for OneDimSolution {
    fn profile(&self, t: f64) -> [f64; 4] {
        self.derivatives(t)
    }
}

fn profile_value(dim: usize, p: Point) -> f64 {
    if dim == 1 {
        p[0]
    } else {
        p[1]
    }
}

macro_rules! profile_field {
    ($ty:ty) => {
        impl AnalyticField for $ty {
            fn dim(&self) -> usize {
                self.profile_dim()
            }
            fn value(&self, p: Point) -> f64 {
                self.profile(profile_value(self.dim(), p))[0]
            }
            fn gradient(&self, p: Point) -> Vec2 {
                let d = self.profile(profile_value(self.dim(), p));
                if self.dim() == 1 {
                    [d[1], 0.0]
                } else {
                    [0.0, d[1]]
                }
            }
            fn hessian(&self, p: Point) -> Mat2 {
                let d = self.profile(profile_value(self.dim(), p));
                let mut m = [[0.0; 2]; 2];
                let a = self.dim() - 1;
                m[a][a] = d[2];
                m
            }
            fn third(&self, p: Point) -> Tensor3 {
                let d = self.profile(profile_value(self.dim(), p));
                let mut t = [[[0.0; 2]; 2]; 2];
                let a = self.dim() - 1;
                t[a][a][a] = d[3];
                t
            }
        }
    };
}

profile_field!(OneDimSolution);

/// A one-dimensional profile embedded in the plane along `x₂`.
#[derive(Clone, Copy, Debug)]
pub struct Embedded1D<P> {
    pub profile: P,
}

impl<P: Profile> Profile for Embedded1D<P> {
    fn profile(&self, t: f64) -> [f64; 4] {
        self.profile.profile(t)
    }
}

impl<P: Profile> AnalyticField for Embedded1D<P> {
    fn dim(&self) -> usize {
        2
    }
    fn value(&self, p: Point) -> f64 {
        self.profile(p[1])[0]
    }
    fn gradient(&self, p: Point) -> Vec2 {
        [0.0, self.profile(p[1])[1]]
    }
    fn hessian(&self, p: Point) -> Mat2 {
        [[0.0, 0.0], [0.0, self.profile(p[1])[2]]]
    }
    fn third(&self, p: Point) -> Tensor3 {
        let mut t = [[[0.0; 2]; 2]; 2];
        t[1][1][1] = self.profile(p[1])[3];
        t
    }
}

/// `c₁ (a₁ - x_n)₊³ + c₂ (x_n - a₂)₊³`: the one-dimensional solutions, with
/// the negative part written so that each term is nonnegative.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OneDimFamily {
    c1: f64,
    c2: f64,
    a1: f64,
    a2: f64,
    dim: usize,
}

impl OneDimFamily {
    pub fn new(c1: f64, c2: f64, a1: f64, a2: f64, dim: usize) -> Result<Self> {
        if c1 < 0.0 || c2 < 0.0 || a1 > a2 || !(dim == 1 || dim == 2) {
            return Err(Error::InvalidParameter(format!(
                "family needs c1, c2 >= 0 and a1 <= a2 (c1 = {c1}, c2 = {c2}, a1 = {a1}, a2 = {a2})"
            )));
        }
        Ok(OneDimFamily { c1, c2, a1, a2, dim })
    }
}

impl Profile for OneDimFamily {
    fn profile(&self, t: f64) -> [f64; 4] {
        let l = (self.a1 - t).max(0.0);
        let r = (t - self.a2).max(0.0);
        let hl = if t < self.a1 { 1.0 } else { 0.0 };
        let hr = if t > self.a2 { 1.0 } else { 0.0 };
        [
            self.c1 * l.powi(3) + self.c2 * r.powi(3),
            -3.0 * self.c1 * l * l + 3.0 * self.c2 * r * r,
            6.0 * self.c1 * l + 6.0 * self.c2 * r,
            -6.0 * self.c1 * hl + 6.0 * self.c2 * hr,
        ]
    }

    fn profile_dim(&self) -> usize {
        self.dim
    }
}

profile_field!(OneDimFamily);

// ---------------------------------------------------------------------------
// Half-space cubic

/// `(1/6)(η·(x - x₀))₊³`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HalfspaceCubic {
    eta: Vec2,
    offset: Point,
    dim: usize,
}

impl HalfspaceCubic {
    pub fn new(eta: Vec2) -> Result<Self> {
        Self::with_dim(eta, 2)
    }

    pub fn with_dim(eta: Vec2, dim: usize) -> Result<Self> {
        let norm = if dim == 1 { eta[0].abs() } else { (eta[0] * eta[0] + eta[1] * eta[1]).sqrt() };
        if (norm - 1.0).abs() > 1e-12 || (dim == 1 && eta[1] != 0.0) {
            return Err(Error::NonUnitDirection(norm));
        }
        Ok(HalfspaceCubic { eta, offset: [0.0, 0.0], dim })
    }

    /// Direction at angle `theta` from `e₂` toward `e₁`: `(sin θ, cos θ)`.
    pub fn at_angle(theta: f64) -> Self {
        HalfspaceCubic { eta: [theta.sin(), theta.cos()], offset: [0.0, 0.0], dim: 2 }
    }

    pub fn shifted(mut self, x0: Point) -> Self {
        self.offset = x0;
        self
    }

    pub fn eta(&self) -> Vec2 {
        self.eta
    }

    pub fn rotated(&self, theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        let e = self.eta;
        HalfspaceCubic { eta: [c * e[0] + s * e[1], -s * e[0] + c * e[1]], offset: self.offset, dim: self.dim }
    }

    fn t(&self, p: Point) -> f64 {
        self.eta[0] * (p[0] - self.offset[0]) + self.eta[1] * (p[1] - self.offset[1])
    }
}

impl AnalyticField for HalfspaceCubic {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, p: Point) -> f64 {
        self.t(p).max(0.0).powi(3) / 6.0
    }
    fn gradient(&self, p: Point) -> Vec2 {
        let s = 0.5 * self.t(p).max(0.0).powi(2);
        [s * self.eta[0], s * self.eta[1]]
    }
    fn hessian(&self, p: Point) -> Mat2 {
        let s = self.t(p).max(0.0);
        let e = self.eta;
        [[s * e[0] * e[0], s * e[0] * e[1]], [s * e[1] * e[0], s * e[1] * e[1]]]
    }
    fn third(&self, p: Point) -> Tensor3 {
        let s = if self.t(p) > 0.0 { 1.0 } else { 0.0 };
        let e = self.eta;
        let mut t = [[[0.0; 2]; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    t[a][b][c] = s * e[a] * e[b] * e[c];
                }
            }
        }
        t
    }
}

// ---------------------------------------------------------------------------
// Slit example

/// `u = r^{5/2} (cos(φ/2) - cos(5φ/2)/5)`, `φ ∈ [-π, π)`: a solution in the
/// plane whose contact set is the slit `(-∞, 0] × {0}`. Its Laplacian is
/// `6 r^{1/2} cos(φ/2)`, so the solution is `C^{2,1/2}` and no better.
///
/// The [`AnalyticField`] impl evaluates the closed form everywhere (the
/// formula is a global solution); [`SlitExample::evaluate`] enforces the
/// unit ball.
#[derive(Clone, Copy, Debug, Default)]
pub struct SlitExample;

/// Value and Laplacian of the slit example at a point of `B₁`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlitValues {
    pub value: f64,
    pub laplacian: f64,
    pub gradient: Vec2,
}

fn polar(p: Point) -> (f64, f64) {
    let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
    let mut phi = p[1].atan2(p[0]);
    if phi >= PI {
        phi = -PI;
    }
    (r, phi)
}

/// `c z^a` in polar form.
fn zpow(r: f64, phi: f64, a: f64, c: f64) -> (f64, f64) {
    let m = c * r.powf(a);
    (m * (a * phi).cos(), m * (a * phi).sin())
}

/// Derivatives of `Re(z^a)`: value, gradient, Hessian, third tensor.
fn re_power(p: Point, a: f64) -> (f64, Vec2, Mat2, Tensor3) {
    let (r, phi) = polar(p);
    let (f0, _) = zpow(r, phi, a, 1.0);
    let (d1r, d1i) = zpow(r, phi, a - 1.0, a);
    let (d2r, d2i) = zpow(r, phi, a - 2.0, a * (a - 1.0));
    let (d3r, d3i) = zpow(r, phi, a - 3.0, a * (a - 1.0) * (a - 2.0));
    let g = [d1r, -d1i];
    let h = [[d2r, -d2i], [-d2i, -d2r]];
    let mut t = [[[0.0; 2]; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                let ny = i + j + k;
                t[i][j][k] = match ny {
                    0 => d3r,
                    1 => -d3i,
                    2 => -d3r,
                    _ => d3i,
                };
            }
        }
    }
    (f0, g, h, t)
}

impl SlitExample {
    /// Exact value, gradient and Laplacian for `|x| < 1`.
    pub fn evaluate(&self, p: Point) -> Result<SlitValues> {
        let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
        if r >= 1.0 {
            return Err(Error::InvalidParameter(format!("slit example is defined on B_1, got |x| = {r}")));
        }
        Ok(SlitValues { value: self.value(p), laplacian: self.laplacian(p), gradient: self.gradient(p) })
    }

    fn parts(&self, p: Point) -> (f64, Vec2, Mat2, Tensor3) {
        // u = ρ q - h / 5 with ρ = |x|², q = Re z^{1/2}, h = Re z^{5/2}.
        let (q, qg, qh, qt) = re_power(p, 0.5);
        let (hv, hg, hh, ht) = re_power(p, 2.5);
        let rho = p[0] * p[0] + p[1] * p[1];
        let x = p;
        let delta = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
        let value = rho * q - hv / 5.0;
        let mut g = [0.0; 2];
        let mut hm = [[0.0; 2]; 2];
        let mut t = [[[0.0; 2]; 2]; 2];
        for i in 0..2 {
            g[i] = 2.0 * x[i] * q + rho * qg[i] - hg[i] / 5.0;
            for j in 0..2 {
                hm[i][j] =
                    2.0 * delta(i, j) * q + 2.0 * x[i] * qg[j] + 2.0 * x[j] * qg[i] + rho * qh[i][j] - hh[i][j] / 5.0;
                for k in 0..2 {
                    t[i][j][k] = 2.0 * delta(i, j) * qg[k]
                        + 2.0 * delta(i, k) * qg[j]
                        + 2.0 * delta(j, k) * qg[i]
                        + 2.0 * x[i] * qh[j][k]
                        + 2.0 * x[j] * qh[i][k]
                        + 2.0 * x[k] * qh[i][j]
                        + rho * qt[i][j][k]
                        - ht[i][j][k] / 5.0;
                }
            }
        }
        (value, g, hm, t)
    }
}

impl AnalyticField for SlitExample {
    fn dim(&self) -> usize {
        2
    }
    fn value(&self, p: Point) -> f64 {
        let (r, phi) = polar(p);
        r.powf(2.5) * ((0.5 * phi).cos() - (2.5 * phi).cos() / 5.0)
    }
    fn gradient(&self, p: Point) -> Vec2 {
        if p == [0.0, 0.0] {
            return [0.0, 0.0];
        }
        self.parts(p).1
    }
    fn hessian(&self, p: Point) -> Mat2 {
        if p == [0.0, 0.0] {
            return [[0.0; 2]; 2];
        }
        self.parts(p).2
    }
    fn third(&self, p: Point) -> Tensor3 {
        if p == [0.0, 0.0] {
            return [[[f64::NAN; 2]; 2]; 2];
        }
        self.parts(p).3
    }
    fn laplacian(&self, p: Point) -> f64 {
        let (r, phi) = polar(p);
        6.0 * r.sqrt() * (0.5 * phi).cos()
    }
}

// ---------------------------------------------------------------------------
// Test functions and the slit measure

/// Radial C^∞ bump `A exp(1 - 1/(1 - s²))`, `s = |x - c|/R`, supported in `B_R(c)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: Point,
    pub radius: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
}

fn one() -> f64 {
    1.0
}

impl Bump {
    pub fn new(center: Point, radius: f64) -> Self {
        Bump { center, radius, amplitude: 1.0 }
    }

    pub fn value(&self, p: Point) -> f64 {
        let s2 = ((p[0] - self.center[0]).powi(2) + (p[1] - self.center[1]).powi(2)) / (self.radius * self.radius);
        if s2 >= 1.0 {
            0.0
        } else {
            self.amplitude * (1.0 - 1.0 / (1.0 - s2)).exp()
        }
    }

    pub fn sample(&self, grid: Arc<GridSpec>) -> ScalarField {
        ScalarField::from_fn(grid, |p| self.value(p))
    }
}

impl PointSampler for Bump {
    fn dim(&self) -> usize {
        2
    }
    fn sample(&self, p: Point) -> Option<f64> {
        Some(self.value(p))
    }
}

/// `6 ∫₀¹ r^{-1/2} f(r, π) dr`: the pairing of `Δ²u` for the slit example
/// with a test function supported inside `B₁`.
pub fn slit_measure_pairing(f: &Bump) -> Result<f64> {
    let reach = (f.center[0].powi(2) + f.center[1].powi(2)).sqrt() + f.radius;
    if reach >= 1.0 {
        return Err(Error::InvalidParameter(format!("test function support reaches |x| = {reach} >= 1")));
    }
    if f.amplitude == 0.0 || f.center[1].abs() >= f.radius {
        return Ok(0.0);
    }
    // Support meets the negative axis at (-r, 0) for r in (r_lo, r_hi).
    let half = (f.radius * f.radius - f.center[1] * f.center[1]).sqrt();
    let r_lo = (-f.center[0] - half).max(0.0);
    let r_hi = (-f.center[0] + half).min(1.0);
    if r_hi <= r_lo {
        return Ok(0.0);
    }
    // r = s² removes the endpoint singularity: 12 ∫ f(-s², 0) ds.
    let integrand = |s: f64| 12.0 * f.value([-s * s, 0.0]);
    Ok(adaptive_simpson(&integrand, r_lo.sqrt(), r_hi.sqrt(), 1e-13))
}

// ---------------------------------------------------------------------------
// Near one-dimensional data

/// Smooth seed-derived trigonometric sum `p(t) = Σ_m a_m sin(ω_m t + φ_m)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigPerturbation {
    pub amplitudes: Vec<f64>,
    pub frequencies: Vec<f64>,
    pub phases: Vec<f64>,
}

impl TrigPerturbation {
    /// `modes` terms with `|a_m| ≤ amplitude / m²`, `ω_m = m π / period`.
    pub fn from_seed(seed: u64, amplitude: f64, modes: usize, period: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = TrigPerturbation { amplitudes: vec![], frequencies: vec![], phases: vec![] };
        for m in 1..=modes {
            let mf = m as f64;
            out.amplitudes.push(amplitude * rng.random_range(-1.0..1.0) / (mf * mf));
            out.frequencies.push(mf * PI / period);
            out.phases.push(rng.random_range(0.0..2.0 * PI));
        }
        out
    }

    /// `[p, p', p'', p''']`.
    pub fn derivatives(&self, t: f64) -> [f64; 4] {
        let mut d = [0.0; 4];
        for ((a, w), ph) in self.amplitudes.iter().zip(&self.frequencies).zip(&self.phases) {
            let (s, c) = (w * t + ph).sin_cos();
            d[0] += a * s;
            d[1] += a * w * c;
            d[2] -= a * w * w * s;
            d[3] -= a * w * w * w * c;
        }
        d
    }
}

/// `(1/6)(x₂ - p(x₁))₊³`: a half-space cubic whose zero level set is the graph
/// of a small smooth perturbation. Used as clamped data for near
/// one-dimensional instances; it is not itself a solution.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbedHalfspace {
    pub perturbation: TrigPerturbation,
}

impl PerturbedHalfspace {
    fn parts(&self, p: Point) -> (f64, [f64; 4], f64) {
        let d = self.perturbation.derivatives(p[0]);
        let t = p[1] - d[0];
        (t, d, if t > 0.0 { 1.0 } else { 0.0 })
    }
}

impl AnalyticField for PerturbedHalfspace {
    fn dim(&self) -> usize {
        2
    }
    fn value(&self, p: Point) -> f64 {
        self.parts(p).0.max(0.0).powi(3) / 6.0
    }
    fn gradient(&self, p: Point) -> Vec2 {
        let (t, d, _) = self.parts(p);
        let f1 = 0.5 * t.max(0.0).powi(2);
        [-d[1] * f1, f1]
    }
    fn hessian(&self, p: Point) -> Mat2 {
        let (t, d, _) = self.parts(p);
        let tp = t.max(0.0);
        let f1 = 0.5 * tp * tp;
        let v = [-d[1], 1.0];
        let mut m = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                m[a][b] = tp * v[a] * v[b];
            }
        }
        m[0][0] += -d[2] * f1;
        m
    }
    fn third(&self, p: Point) -> Tensor3 {
        let (t, d, heav) = self.parts(p);
        let tp = t.max(0.0);
        let f1 = 0.5 * tp * tp;
        let v = [-d[1], 1.0];
        let w = |a: usize, b: usize| if a == 0 && b == 0 { -d[2] } else { 0.0 };
        let mut out = [[[0.0; 2]; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    let z = if a == 0 && b == 0 && c == 0 { -d[3] } else { 0.0 };
                    out[a][b][c] =
                        heav * v[a] * v[b] * v[c] + tp * (w(a, c) * v[b] + w(b, c) * v[a] + w(a, b) * v[c]) + f1 * z;
                }
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Named oracles for configs and problem files

/// Closed-form oracle selected by name in JSON configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum OracleSpec {
    /// One-dimensional solution with boundary slope `lambda`; `embedded`
    /// renders it in 2D varying along `x₂`.
    OneDim {
        lambda: f64,
        #[serde(default)]
        embedded: bool,
    },
    /// Half-space cubic with normal at `angle_deg` from `e₂` toward `e₁`.
    HalfspaceCubic {
        #[serde(default)]
        angle_deg: f64,
    },
    Slit,
    PerturbedHalfspace {
        amplitude: f64,
        #[serde(default = "default_modes")]
        modes: usize,
        #[serde(default = "default_period")]
        period: f64,
        #[serde(default)]
        seed: u64,
    },
}

fn default_modes() -> usize {
    3
}

fn default_period() -> f64 {
    2.0
}

impl OracleSpec {
    pub fn build(&self) -> Result<Arc<dyn AnalyticField>> {
        Ok(match self {
            OracleSpec::OneDim { lambda, embedded } => {
                let s = OneDimSolution::new(*lambda)?;
                if *embedded {
                    Arc::new(s.embedded())
                } else {
                    Arc::new(s)
                }
            }
            OracleSpec::HalfspaceCubic { angle_deg } => Arc::new(HalfspaceCubic::at_angle(angle_deg.to_radians())),
            OracleSpec::Slit => Arc::new(SlitExample),
            OracleSpec::PerturbedHalfspace { amplitude, modes, period, seed } => Arc::new(PerturbedHalfspace {
                perturbation: TrigPerturbation::from_seed(*seed, *amplitude, *modes, *period),
            }),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Central finite differences of an analytic field, as an independent check
    /// of the hand-derived derivative formulas.
    fn fd_check(f: &dyn AnalyticField, p: Point, tol: f64) {
        let e = 1e-5;
        let shift = |q: Point, a: usize, s: f64| {
            let mut q = q;
            q[a] += s;
            q
        };
        for a in 0..f.dim() {
            let g = (f.value(shift(p, a, e)) - f.value(shift(p, a, -e))) / (2.0 * e);
            assert!((g - f.gradient(p)[a]).abs() < tol, "grad[{a}] at {p:?}: {g} vs {:?}", f.gradient(p));
            for b in 0..f.dim() {
                let hb = (f.gradient(shift(p, b, e))[a] - f.gradient(shift(p, b, -e))[a]) / (2.0 * e);
                assert!((hb - f.hessian(p)[a][b]).abs() < tol, "hess[{a}][{b}] at {p:?}");
                for c in 0..f.dim() {
                    let tc = (f.hessian(shift(p, c, e))[a][b] - f.hessian(shift(p, c, -e))[a][b]) / (2.0 * e);
                    assert!((tc - f.third(p)[a][b][c]).abs() < tol, "third[{a}][{b}][{c}] at {p:?}");
                }
            }
        }
    }

    #[test]
    fn one_dim_boundary_values_and_energy() {
        let s = OneDimSolution::new(-6.0).unwrap();
        assert_eq!(s.gamma(), 0.5);
        let d = s.derivatives(0.0);
        assert!((d[0] - 1.0).abs() < 1e-14);
        assert!((d[1] + 6.0).abs() < 1e-14);
        let g = s.derivatives(0.5);
        assert_eq!([g[0], g[1], g[2]], [0.0, 0.0, 0.0]);
        assert!((s.energy() - 96.0).abs() < 1e-12);
        assert!((s.energy_at(s.gamma()) - 96.0).abs() < 1e-12);
        assert!((s.measure_mass() - 48.0).abs() < 1e-12);
        // Independent route: quadrature of (u'')² over (0, 1).
        let q = adaptive_simpson(&|x| s.derivatives(x)[2].powi(2), 0.0, 1.0, 1e-12);
        assert!((q - 96.0).abs() < 1e-8);

        let s4 = OneDimSolution::new(-4.0).unwrap();
        assert_eq!(s4.gamma(), 0.75);
        assert!((s4.energy() - 256.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn one_dim_rejects_shallow_slope() {
        assert!(OneDimSolution::new(-3.0).is_err());
        assert!(OneDimSolution::new(2.0).is_err());
    }

    #[test]
    fn one_dim_is_nonnegative_and_energy_curve_decreases() {
        let s = OneDimSolution::new(-5.0).unwrap();
        for k in 0..=200 {
            assert!(s.derivatives(k as f64 / 200.0)[0] >= 0.0);
        }
        let mut last = f64::INFINITY;
        for k in 1..=100 {
            let g = s.gamma() * k as f64 / 100.0;
            let f = s.energy_at(g);
            assert!(f <= last + 1e-9);
            assert!(s.energy_slope(g) <= 0.0);
            last = f;
        }
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        fd_check(&SlitExample, [0.31, 0.27], 1e-4);
        fd_check(&SlitExample, [-0.4, 0.2], 1e-4);
        fd_check(&SlitExample, [0.1, -0.6], 1e-4);
        fd_check(&HalfspaceCubic::at_angle(0.4), [0.3, 0.5], 1e-4);
        let pert = PerturbedHalfspace { perturbation: TrigPerturbation::from_seed(7, 0.1, 3, 2.0) };
        fd_check(&pert, [0.2, 0.6], 1e-4);
        fd_check(&OneDimFamily::new(1.0, 2.0, -0.5, 0.2, 2).unwrap(), [0.0, 0.6], 1e-4);
    }

    #[test]
    fn slit_values() {
        let s = SlitExample;
        assert!((s.value([1.0, 0.0]) - 0.8).abs() < 1e-14);
        assert!(s.value([-0.5, 1e-300]).abs() < 1e-14);
        assert!(s.value([-0.5, -1e-300]).abs() < 1e-14);
        assert!((s.laplacian([0.25, 0.0]) - 3.0).abs() < 1e-14);
        assert!(s.evaluate([0.8, 0.7]).is_err());
        // Laplacian from the Hessian agrees with the closed form.
        let p = [0.2, -0.37];
        let h = s.hessian(p);
        assert!((h[0][0] + h[1][1] - s.laplacian(p)).abs() < 1e-12);
        // Positive off the slit.
        for k in 0..64 {
            let phi = -PI + 2.0 * PI * (k as f64 + 0.5) / 64.0;
            assert!(s.value([0.5 * phi.cos(), 0.5 * phi.sin()]) > 0.0);
        }
    }

    #[test]
    fn harmonic_part_of_slit_is_harmonic() {
        for p in [[0.3, 0.1], [-0.2, 0.4], [0.5, -0.5]] {
            let (_, _, h, _) = re_power(p, 2.5);
            assert!((h[0][0] + h[1][1]).abs() < 1e-12);
        }
    }

    #[test]
    fn halfspace_rotation_equivariance() {
        let base = HalfspaceCubic::new([0.0, 1.0]).unwrap();
        let theta = 0.3;
        let rot = base.rotated(theta);
        let (s, c) = theta.sin_cos();
        for p in [[0.2, 0.3], [-0.5, 0.9], [0.7, -0.1]] {
            // The rotated evaluator at p equals the base at p rotated by θ.
            let q = [c * p[0] - s * p[1], s * p[0] + c * p[1]];
            assert!((rot.value(p) - base.value(q)).abs() < 1e-14);
        }
        assert!((base.value([0.0, 1.0]) - 1.0 / 6.0).abs() < 1e-15);
        assert!(HalfspaceCubic::new([1.0, 1.0]).is_err());
    }

    #[test]
    fn halfspace_vanishes_to_second_order_on_hyperplane() {
        let c = HalfspaceCubic::at_angle(0.7);
        let e = c.eta();
        let p = [3.0 * e[1], -3.0 * e[0]];
        assert_eq!(c.value(p).abs() + c.gradient(p)[0].abs() + c.gradient(p)[1].abs(), 0.0);
        assert!(c.hessian(p)[1][1].abs() < 1e-15);
    }

    #[test]
    fn measure_pairing_cases() {
        assert_eq!(slit_measure_pairing(&Bump { center: [-0.5, 0.0], radius: 0.3, amplitude: 0.0 }).unwrap(), 0.0);
        let v = slit_measure_pairing(&Bump::new([-0.5, 0.0], 0.3)).unwrap();
        assert!(v > 0.0);
        assert_eq!(slit_measure_pairing(&Bump::new([0.5, 0.0], 0.3)).unwrap(), 0.0);
        assert!(slit_measure_pairing(&Bump::new([-0.5, 0.0], 0.6)).is_err());
        // Independent check without the substitution, away from r = 0.
        let b = Bump::new([-0.5, 0.0], 0.3);
        let direct = adaptive_simpson(&|r| 6.0 * b.value([-r, 0.0]) / r.sqrt(), 0.2, 0.8, 1e-13);
        assert!((direct - v).abs() < 1e-10);
    }
}
