//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any fails.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};
use std::time::Instant;

use biharmonic_obstacle::analysis::{
    blowup_sequence, extract_free_boundary, holder_exponent, normalized_direction, positivity_set, BlowupParams,
    BlowupSource, DirectionObjective, HolderSource, PositivityMask, ThresholdRule,
};
use biharmonic_obstacle::experiment::discrete_pairing;
use biharmonic_obstacle::grid::{GridSpec, Point, SubRegion};
use biharmonic_obstacle::norms::norm_derivative;
use biharmonic_obstacle::nta::{check_corkscrews, NTAParams, NtaChecker};
use biharmonic_obstacle::ops;
use biharmonic_obstacle::oracle::{AnalyticField, Bump, HalfspaceCubic, OneDimSolution, OracleSpec, SlitExample};
use biharmonic_obstacle::solver::{solve, BiharmonicProblem, InitialGuess, SolveOutcome, SolverConfig};
use biharmonic_obstacle::ScalarField;

type Outcome = (bool, String);
type Criterion = (&'static str, fn() -> Outcome);

fn sci(v: &[f64]) -> String {
    let cells: Vec<String> = v.iter().map(|x| format!("{x:.2e}")).collect();
    format!("[{}]", cells.join(", "))
}

// ---------------------------------------------------------------------------
// Reference values computed here, independently of the library oracles.

/// `u₀ = (λ³/27)(x + 3/λ)₋³`.
fn one_dim_u(lambda: f64, x: f64) -> f64 {
    let t = (x + 3.0 / lambda).min(0.0);
    lambda.powi(3) / 27.0 * t.powi(3)
}

/// Composite Simpson rule with `m` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for k in 1..m {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(a + k as f64 * h);
    }
    s * h / 3.0
}

/// `∫₀¹ (u₀'')²` by quadrature of the second difference of the closed form.
fn one_dim_energy(lambda: f64) -> f64 {
    let e = 1e-4;
    let u2 = |x: f64| (one_dim_u(lambda, x + e) - 2.0 * one_dim_u(lambda, x) + one_dim_u(lambda, x - e)) / (e * e);
    let gamma = -3.0 / lambda;
    simpson(|x| u2(x).powi(2), 0.0, gamma - 2.0 * e, 4000)
}

/// Jump of `u₀'''` at `γ`, from a one-sided four-point difference (exact on cubics).
fn one_dim_mass(lambda: f64) -> f64 {
    let gamma = -3.0 / lambda;
    let e = 1e-2;
    let x = gamma - 4.0 * e;
    let f = |k: f64| one_dim_u(lambda, x + k * e);
    let left = (f(3.0) - 3.0 * f(2.0) + 3.0 * f(1.0) - f(0.0)) / e.powi(3);
    left.abs()
}

/// `u = r^{5/2} (cos(φ/2) − cos(5φ/2)/5)` with `φ ∈ (−π, π]`.
fn slit_u(p: Point) -> f64 {
    let r = p[0].hypot(p[1]);
    let phi = p[1].atan2(p[0]);
    r.powf(2.5) * ((phi / 2.0).cos() - (2.5 * phi).cos() / 5.0)
}

/// `Δu = 6 r^{1/2} cos(φ/2)`.
fn slit_laplacian(p: Point) -> f64 {
    let r = p[0].hypot(p[1]);
    6.0 * r.sqrt() * (p[1].atan2(p[0]) / 2.0).cos()
}

fn bump(center: Point, radius: f64, p: Point) -> f64 {
    let s2 = ((p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2)) / (radius * radius);
    if s2 >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s2)).exp()
    }
}

/// Scales another field; gives `(c g, c f)` boundary data without the
/// library's own scaling helper.
struct Scaled(f64, Arc<dyn AnalyticField>);

impl AnalyticField for Scaled {
    fn dim(&self) -> usize {
        self.1.dim()
    }
    fn value(&self, p: Point) -> f64 {
        self.0 * self.1.value(p)
    }
    fn gradient(&self, p: Point) -> [f64; 2] {
        self.1.gradient(p).map(|v| self.0 * v)
    }
    fn hessian(&self, p: Point) -> [[f64; 2]; 2] {
        self.1.hessian(p).map(|r| r.map(|v| self.0 * v))
    }
    fn third(&self, p: Point) -> [[[f64; 2]; 2]; 2] {
        self.1.third(p).map(|m| m.map(|r| r.map(|v| self.0 * v)))
    }
}

fn disk(n: usize) -> Arc<GridSpec> {
    Arc::new(GridSpec::disk([0.0, 0.0], 1.0, n, 3).unwrap())
}

fn masked_linf(a: &ScalarField, f: impl Fn(Point) -> f64) -> f64 {
    let g = a.grid();
    (0..g.len()).filter(|&i| a.is_valid(i)).map(|i| (a.get(i) - f(g.position(i))).abs()).fold(0.0, f64::max)
}

/// Slit solves at 128², 256² and 512² cells, timed.
fn slit_levels() -> &'static Vec<(usize, SolveOutcome, f64)> {
    static LEVELS: OnceLock<Vec<(usize, SolveOutcome, f64)>> = OnceLock::new();
    LEVELS.get_or_init(|| {
        [129, 257, 513]
            .into_iter()
            .map(|n| {
                let p = BiharmonicProblem::from_oracle(disk(n), &SlitExample).unwrap();
                let t = Instant::now();
                let out = solve(&p, &SolverConfig::default()).unwrap();
                (n, out, t.elapsed().as_secs_f64())
            })
            .collect()
    })
}

// ---------------------------------------------------------------------------

fn one_dim_solve(lambda: f64, n: usize) -> (SolveOutcome, f64, f64) {
    let exact = OneDimSolution::new(lambda).unwrap();
    let grid = Arc::new(GridSpec::interval(0.0, 1.0, n).unwrap());
    let problem = BiharmonicProblem::from_oracle(grid, &exact).unwrap();
    let t = Instant::now();
    let out = solve(&problem, &SolverConfig::default()).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let fb = extract_free_boundary(&positivity_set(&out.field, &ThresholdRule::default())).unwrap();
    (out, fb.points[0][0], secs)
}

fn criterion_1() -> Outcome {
    let n = 2049;
    let h = 1.0 / (n - 1) as f64;
    let (out, gamma_hat, secs) = one_dim_solve(-6.0, n);
    let energy = one_dim_energy(-6.0);
    let mut ok = (gamma_hat - 0.5).abs() <= 2.0 * h && (out.report.energy / energy - 1.0).abs() <= 0.01 && secs <= 10.0;
    let mut msg = format!("γ̂ = {gamma_hat:.6}, energy {:.5} vs {energy:.5}, {secs:.2} s;", out.report.energy);
    for lambda in [-4.0, -5.0, -6.0, -8.0] {
        let (_, g, secs) = one_dim_solve(lambda, n);
        let err = (g + 3.0 / lambda).abs();
        ok &= err <= 2.0 * h && secs <= 10.0;
        msg.push_str(&format!(" λ={lambda}: |γ̂−γ| = {err:.2e} ({secs:.2} s)"));
    }
    (ok, msg)
}

fn criterion_2() -> Outcome {
    let (out, _, _) = one_dim_solve(-6.0, 2049);
    let mass = one_dim_mass(-6.0);
    let rel = (out.report.measure_mass / mass - 1.0).abs();
    (rel <= 0.01, format!("mass {:.5} vs {mass:.5} (rel {rel:.2e})", out.report.measure_mass))
}

fn criterion_3() -> Outcome {
    let levels = slit_levels();
    let errs: Vec<f64> = levels.iter().map(|(_, o, _)| masked_linf(&o.field, slit_u)).collect();
    let ratios: Vec<f64> = errs.windows(2).map(|w| w[0] / w[1]).collect();
    let kkt = levels.iter().all(|(_, o, _)| {
        let r = &o.report;
        [r.primal_relative, r.dual_relative, r.stationarity_relative, r.complementarity_relative]
            .iter()
            .all(|&v| v <= 1e-8)
    });
    let worst = levels.iter().map(|(_, o, _)| o.report.max_relative()).fold(0.0, f64::max);
    let secs = levels.last().unwrap().2;
    let ok = ratios.iter().all(|&q| q >= 1.5) && kkt && secs <= 300.0;
    (ok, format!("L∞ errors {}, ratios {ratios:.2?}, max KKT {worst:.1e}, 512² in {secs:.1} s", sci(&errs)))
}

fn criterion_4() -> Outcome {
    let f = slit_laplacian;
    let analytic = holder_exponent(HolderSource::Function(&f), [0.0, 0.0], 0.01, 0.2, 12).unwrap().exponent;
    let (_, fine, _) = slit_levels().last().unwrap();
    let lap = ops::laplacian(&fine.field).unwrap();
    let solved = holder_exponent(HolderSource::Field(&lap), [0.0, 0.0], 0.01, 0.2, 12).unwrap().exponent;
    let ok = (analytic - 0.5).abs() <= 0.02 && (solved - 0.5).abs() <= 0.10;
    (ok, format!("analytic {analytic:.4}, solved 512² {solved:.4}"))
}

fn criterion_5() -> Outcome {
    let (c, r) = ([-0.5, 0.0], 0.3);
    // 6 ∫ r^{-1/2} f(-r, 0) dr with r = s².
    let exact = simpson(|s| 12.0 * bump(c, r, [-s * s, 0.0]), 0.2f64.sqrt(), 0.8f64.sqrt(), 20_000);
    let grid = Arc::new(GridSpec::square([0.0, 0.0], 1.0, 1025).unwrap());
    let u = ScalarField::from_fn(grid.clone(), slit_u);
    let discrete = discrete_pairing(&u, &Bump::new(c, r).sample(grid)).unwrap();
    let rel = (discrete / exact - 1.0).abs();
    (rel <= 0.02, format!("pairing {discrete:.6} vs {exact:.6} (rel {rel:.2e})"))
}

fn criterion_6() -> Outcome {
    let grid = Arc::new(GridSpec::square([0.0, 0.0], 1.2, 257).unwrap());
    let region = SubRegion::centered(1.0);
    let mut ok = true;
    let mut msg = String::new();
    for deg in [10.0f64, 30.0, 45.0] {
        let eta = [deg.to_radians().sin(), deg.to_radians().cos()];
        let u = ScalarField::from_fn(grid.clone(), |p| (eta[0] * p[0] + eta[1] * p[1]).max(0.0).powi(3) / 6.0);
        let est = normalized_direction(&u, &region).unwrap();
        let angle = est.eta[0].atan2(est.eta[1]).to_degrees();
        let (_, best) = DirectionObjective::new(&u, &region).unwrap().sweep(3600);
        let gap = est.objective - best;
        ok &= (angle - deg).abs() <= 0.5 && gap <= 1e-6;
        msg.push_str(&format!(" {deg}°: angle error {:.1e}°, gap {gap:.1e};", (angle - deg).abs()));
    }
    (ok, msg)
}

fn criterion_7() -> Outcome {
    let params = BlowupParams::default();
    let mut ok = true;
    let mut msg = String::from("exact:");
    // Exact one-dimensional profiles, analytic and aligned or rotated.
    let cases: Vec<(&str, Arc<dyn AnalyticField>, Point, BlowupParams)> = vec![
        ("cubic 0°", Arc::new(HalfspaceCubic::at_angle(0.0)), [0.0, 0.0], params.clone()),
        ("cubic 30°", Arc::new(HalfspaceCubic::at_angle(30f64.to_radians())), [0.0, 0.0], params.clone()),
        (
            "1D λ=−6",
            Arc::new(OneDimSolution::new(-6.0).unwrap().embedded()),
            [0.0, 0.5],
            BlowupParams { base_scale: Some(0.2), ..params.clone() },
        ),
    ];
    for (name, f, c, p) in &cases {
        let tr = blowup_sequence(BlowupSource::Analytic(&**f), *c, p).unwrap();
        let worst = (1..tr.values.len()).map(|k| tr.values[k] / tr.floor[k]).fold(0.0, f64::max);
        ok &= worst <= 1.01;
        msg.push_str(&format!(" {name} max A_k/floor_k (k≥1) {worst:.3};"));
    }
    // Solved near one-dimensional instance.
    let data = OracleSpec::PerturbedHalfspace { amplitude: 0.05, modes: 3, period: 2.0, seed: 1 }.build().unwrap();
    let grid = Arc::new(GridSpec::square([0.0, 0.0], 1.3, 769).unwrap());
    let out = solve(&BiharmonicProblem::from_shared_oracle(grid, data).unwrap(), &SolverConfig::default()).unwrap();
    let fb = extract_free_boundary(&positivity_set(&out.field, &ThresholdRule::default())).unwrap();
    let center = fb.points[fb.nearest([0.0, 0.0]).unwrap().0];
    let p = BlowupParams { s: 0.45, base_scale: Some(0.5), target_nodes: 65, ..params };
    let tr = blowup_sequence(BlowupSource::Field(&out.field), center, &p).unwrap();
    let floor_ok = tr.floor.len() == tr.values.len() && tr.floor.iter().all(|f| f.is_finite() && *f > 0.0);
    ok &= tr.non_increasing_within_floor() && floor_ok;
    msg.push_str(&format!(" solved A_k {}, floor {}", sci(&tr.values), sci(&tr.floor)));
    (ok, msg)
}

fn criterion_8() -> Outcome {
    let grid = Arc::new(GridSpec::square([0.0, 0.0], 1.0, 201).unwrap());
    let h = grid.h();
    let params = NTAParams::new(2.0, 1.0, 4.0).unwrap();
    let inside = (0..grid.len()).map(|i| grid.position(i)[1] > 0.0).collect();
    let half = PositivityMask::from_mask(grid.clone(), inside).unwrap();
    let radii: Vec<f64> = (0..8).map(|k| 8.0 * h * (0.5 / (8.0 * h)).powf(k as f64 / 7.0)).collect();
    let points = [[-0.3, 0.0], [0.0, 0.0], [0.3, 0.0]];
    let v = check_corkscrews(&NtaChecker::new(&half), &points, &radii, &params).unwrap();

    let slit = positivity_set(&ScalarField::from_fn(grid.clone(), slit_u), &ThresholdRule::default());
    let slit_points = [[-0.2, 0.0], [-0.4, 0.0], [-0.6, 0.0]];
    let slit_radii: Vec<f64> = (0..6).map(|k| 4.0 * h * (0.35 / (4.0 * h)).powf(k as f64 / 5.0)).collect();
    let s = check_corkscrews(&NtaChecker::new(&slit), &slit_points, &slit_radii, &params).unwrap();
    let all_fail = s.complement.iter().all(|r| !r.result.found());
    let ok = v.domain_ok && v.complement_ok && all_fail;
    (
        ok,
        format!(
            "half-plane domain {} / complement {} over {} tests; slit complement fails {}/{}",
            v.domain_ok,
            v.complement_ok,
            v.domain.len(),
            s.complement.iter().filter(|r| !r.result.found()).count(),
            s.complement.len()
        ),
    )
}

fn criterion_9() -> Outcome {
    let grid = disk(129);
    let slit: Arc<dyn AnalyticField> = Arc::new(SlitExample);
    let problem = BiharmonicProblem::from_shared_oracle(grid.clone(), slit.clone()).unwrap();
    let cfg = SolverConfig::default();
    let a = solve(&problem, &cfg).unwrap();
    let b = solve(&problem, &SolverConfig { initial: InitialGuess::Zero, ..cfg.clone() }).unwrap();
    let starts = a.field.max_abs_diff(&b.field).unwrap();
    let scaled = BiharmonicProblem::from_shared_oracle(grid, Arc::new(Scaled(3.0, slit))).unwrap();
    let c = solve(&scaled, &cfg).unwrap();
    let homog = c.field.max_abs_diff(&a.field.scaled(3.0)).unwrap() / c.field.max_abs();
    let ok = starts <= 10.0 * cfg.kkt_tolerance && homog <= 1e-9;
    (ok, format!("two starts differ by {starts:.1e}; homogeneity rel {homog:.1e}"))
}

/// `Σ a_ij x^i y^j` with exact Laplacian and bilaplacian.
struct Poly(Vec<(usize, usize, f64)>);

impl Poly {
    fn value(&self, p: Point) -> f64 {
        self.0.iter().map(|&(i, j, a)| a * p[0].powi(i as i32) * p[1].powi(j as i32)).sum()
    }
    fn lap(&self) -> Poly {
        let mut out = Vec::new();
        for &(i, j, a) in &self.0 {
            if i >= 2 {
                out.push((i - 2, j, a * (i * (i - 1)) as f64));
            }
            if j >= 2 {
                out.push((i, j - 2, a * (j * (j - 1)) as f64));
            }
        }
        Poly(out)
    }
}

fn full_poly(deg: usize) -> Poly {
    let mut terms = Vec::new();
    let mut k = 0.0f64;
    for i in 0..=deg {
        for j in 0..=deg - i {
            k += 1.0;
            terms.push((i, j, (1.3 * k).sin()));
        }
    }
    Poly(terms)
}

fn rel_interior_error(num: &ScalarField, exact: &Poly) -> f64 {
    let g = num.grid();
    let valid: Vec<usize> = (0..g.len()).filter(|&i| num.is_valid(i)).collect();
    let scale = valid.iter().map(|&i| exact.value(g.position(i)).abs()).fold(0.0, f64::max).max(1.0);
    valid.iter().map(|&i| (num.get(i) - exact.value(g.position(i))).abs()).fold(0.0, f64::max) / scale
}

fn criterion_10() -> Outcome {
    let grid = Arc::new(GridSpec::square([0.3, -0.2], 0.9, 41).unwrap());
    let p3 = full_poly(3);
    let p5 = full_poly(5);
    let lap =
        rel_interior_error(&ops::laplacian(&ScalarField::from_fn(grid.clone(), |p| p3.value(p))).unwrap(), &p3.lap());
    let bilap = rel_interior_error(
        &ops::bilaplacian(&ScalarField::from_fn(grid.clone(), |p| p5.value(p))).unwrap(),
        &p5.lap().lap(),
    );
    let omega = (PI / 2.0).sqrt();
    let mut errs = Vec::new();
    for n in [65, 129, 257] {
        let g = Arc::new(GridSpec::square([0.0, 0.0], 1.2, n).unwrap());
        let h = g.h();
        let f = ScalarField::from_fn(g, |p| p[1].max(0.0).powi(3) / 6.0);
        let v = norm_derivative(&f, 3, &SubRegion::centered(1.0)).unwrap().value;
        errs.push(((v - omega).abs(), h));
    }
    // O(h): error bounded by a fixed multiple of h on every level.
    let order_ok = errs.iter().all(|&(e, h)| e <= 2.0 * h);
    let ok = lap <= 1e-10 && bilap <= 1e-10 && order_ok;
    let rows: Vec<String> = errs.iter().map(|(e, h)| format!("{:.2}", e / h)).collect();
    (ok, format!("Δ rel {lap:.1e}, Δ² rel {bilap:.1e}, |‖D³‖−ω|/h = {}", rows.join(", ")))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("1 one-dimensional solution", criterion_1),
        ("2 measure mass", criterion_2),
        ("3 slit solution", criterion_3),
        ("4 optimal exponent", criterion_4),
        ("5 measure identity", criterion_5),
        ("6 normalized direction", criterion_6),
        ("7 blow-up traces", criterion_7),
        ("8 NTA verdicts", criterion_8),
        ("9 uniqueness and homogeneity", criterion_9),
        ("10 operator exactness", criterion_10),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|s| name.contains(s.as_str())) {
            continue;
        }
        let t = Instant::now();
        let (ok, detail) = f();
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {name}: {} ({:.1} s) {detail}",
            if ok { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
