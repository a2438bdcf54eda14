use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde_json::{json, Map, Value};

use crate::analysis::{
    blowup_sequence, class_membership, extract_free_boundary, holder_exponent, positivity_set, BlowupSource,
    HolderSource, PositivityMask, ThresholdRule,
};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::{GridSpec, Point};
use crate::io::{write_field, FieldFormat};
use crate::nta::{check_corkscrews, Corkscrew, CorkscrewRecord, NtaChecker};
use crate::ops;
use crate::oracle::{self, AnalyticField, Bump, HalfspaceCubic, OneDimSolution, OracleSpec, SlitExample};
use crate::solver::{kkt_residuals, solve, BiharmonicProblem, SolveOutcome, SolverConfig};

use super::config::*;
use super::study::convergence_study;

/// Summary and the files written by one run.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub summary: Value,
    pub files: Vec<PathBuf>,
}

struct Artifacts {
    dir: PathBuf,
    files: Vec<PathBuf>,
    header: Map<String, Value>,
}

impl Artifacts {
    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, body)?;
        self.files.push(path);
        Ok(())
    }

    fn field(&mut self, name: &str, field: &ScalarField) -> Result<()> {
        let format = if field.grid().len() > 20_000 { FieldFormat::Binary } else { FieldFormat::Csv };
        let side = write_field(&self.dir.join(name), field, format)?;
        self.files.push(side);
        Ok(())
    }

    fn summary(&mut self, status: &str, body: Value) -> Result<Value> {
        let mut map = self.header.clone();
        map.insert("status".into(), Value::from(status));
        if let Value::Object(b) = body {
            map.extend(b);
        }
        let v = Value::Object(map);
        self.text("summary.json", &(serde_json::to_string_pretty(&v)? + "\n"))?;
        Ok(v)
    }

    /// Solves, persisting the best iterate and a summary on non-convergence.
    fn solve(&mut self, problem: &BiharmonicProblem, config: &SolverConfig, name: &str) -> Result<SolveOutcome> {
        match solve(problem, config) {
            Err(Error::NonConvergence { iterations, best }) => {
                self.field(&format!("{name}_best"), &best.field)?;
                self.summary(
                    "non-convergence",
                    json!({ "iterations": iterations, "report": best.report, "used_fallback": best.used_fallback }),
                )?;
                Err(Error::NonConvergence { iterations, best })
            }
            other => other,
        }
    }
}

/// Machine-readable form of an error, as written to `error.json`.
pub fn error_json(err: &Error) -> Value {
    let class = match exit_code(err) {
        2 => "validation",
        3 => "non-convergence",
        _ => "runtime",
    };
    json!({ "status": "error", "class": class, "message": err.to_string() })
}

/// 2 for invalid input, 3 for solver non-convergence, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidGrid(_)
        | Error::GridTooSmall { .. }
        | Error::InvalidParameter(_)
        | Error::NonUnitDirection(_)
        | Error::BoundaryData(_)
        | Error::Json(_) => 2,
        Error::NonConvergence { .. } => 3,
        _ => 1,
    }
}

fn csv_rows(header: &str, rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = format!("{header}\n");
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn free_boundary_csv(u: &ScalarField) -> Option<String> {
    extract_free_boundary(&positivity_set(u, &ThresholdRule::default())).ok().map(|fb| fb.to_csv())
}

fn solve_field(
    arts: &mut Artifacts,
    oracle: &OracleSpec,
    domain: &DomainSpec,
    n: usize,
    solver: &SolverConfig,
) -> Result<(Arc<dyn AnalyticField>, SolveOutcome)> {
    solver.validate()?;
    let field = oracle.build()?;
    let grid = Arc::new(domain.grid(n)?);
    let problem = BiharmonicProblem::from_shared_oracle(grid, field.clone())?;
    let out = arts.solve(&problem, solver, "solution")?;
    Ok((field, out))
}

fn run_solve_1d(c: &Solve1dConfig, arts: &mut Artifacts) -> Result<Value> {
    c.solver.validate()?;
    let exact = OneDimSolution::new(c.lambda)?;
    let grid = Arc::new(GridSpec::interval(0.0, 1.0, c.n)?);
    let problem = BiharmonicProblem::from_oracle(grid.clone(), &exact)?;
    let out = arts.solve(&problem, &c.solver, "solution")?;
    let reference = oracle::sample(&exact, grid.clone());
    let fb = extract_free_boundary(&positivity_set(&out.field, &ThresholdRule::default()))?;
    let gamma_hat = fb.points[0][0];
    arts.field("solution", &out.field)?;
    arts.text(
        "profile.csv",
        &csv_rows(
            "x,u,u_exact",
            (0..grid.len()).map(|i| vec![grid.position(i)[0], out.field.get(i), reference.get(i)]),
        ),
    )?;
    Ok(json!({
        "n": c.n,
        "h": grid.h(),
        "lambda": c.lambda,
        "gamma_hat": gamma_hat,
        "gamma": exact.gamma(),
        "energy": out.report.energy,
        "energy_exact": exact.energy(),
        "mass": out.report.measure_mass,
        "mass_exact": exact.measure_mass(),
        "linf_error": out.field.max_abs_diff(&reference)?,
        "used_fallback": out.used_fallback,
        "kkt": out.report,
    }))
}

fn run_solve_2d(c: &Solve2dConfig, arts: &mut Artifacts) -> Result<Value> {
    let (field, out) = solve_field(arts, &c.oracle, &c.domain, c.n, &c.solver)?;
    let grid = out.field.grid_arc().clone();
    let reference = oracle::sample(&*field, grid.clone());
    arts.field("solution", &out.field)?;
    if let Some(csv) = free_boundary_csv(&out.field) {
        arts.text("free_boundary.csv", &csv)?;
    }
    Ok(json!({
        "n": c.n,
        "h": grid.h(),
        "linf_error": out.field.max_abs_diff(&reference)?,
        "energy_history": out.energy_history,
        "used_fallback": out.used_fallback,
        "kkt": out.report,
    }))
}

fn run_oracle_verify(c: &OracleVerifyConfig, arts: &mut Artifacts) -> Result<Value> {
    let field = c.oracle.build()?;
    let grid = Arc::new(c.domain.grid(c.n)?);
    let sample = oracle::sample(&*field, grid.clone());
    let problem = BiharmonicProblem::from_shared_oracle(grid.clone(), field)?;
    let report = kkt_residuals(&sample, &problem)?;
    arts.field("oracle", &sample)?;
    Ok(json!({ "n": c.n, "h": grid.h(), "kkt": report }))
}

fn run_blowup(c: &BlowupConfig, arts: &mut Artifacts) -> Result<Value> {
    let trace = match &c.source {
        FieldSource::Oracle { oracle } => {
            let f = oracle.build()?;
            blowup_sequence(BlowupSource::Analytic(&*f), c.center, &c.params)?
        }
        FieldSource::Sampled { oracle, domain, n } => {
            let f = oracle.build()?;
            let sample = oracle::sample(&*f, Arc::new(domain.grid(*n)?));
            blowup_sequence(BlowupSource::Field(&sample), c.center, &c.params)?
        }
        FieldSource::Solved { oracle, domain, n, solver } => {
            let (_, out) = solve_field(arts, oracle, domain, *n, solver)?;
            arts.field("solution", &out.field)?;
            blowup_sequence(BlowupSource::Field(&out.field), c.center, &c.params)?
        }
    };
    let rows = (0..trace.values.len()).map(|k| {
        vec![
            k as f64,
            trace.scales[k],
            trace.values[k],
            trace.laplacian_terms[k],
            trace.flatness_terms[k],
            trace.third_norms[k],
            trace.floor.get(k).copied().unwrap_or(f64::NAN),
            trace.directions[k][0],
            trace.directions[k][1],
        ]
    });
    arts.text("trace.csv", &csv_rows("k,r,a,laplacian_term,flatness_term,third_norm,floor,eta_x,eta_y", rows))?;
    Ok(json!({ "non_increasing_within_floor": trace.non_increasing_within_floor(), "trace": trace }))
}

fn run_membership(c: &MembershipConfig, arts: &mut Artifacts) -> Result<Value> {
    let f = c.oracle.build()?;
    let u = oracle::sample(&*f, Arc::new(GridSpec::square([0.0, 0.0], c.half_width, c.n)?));
    let report = class_membership(&u, &c.params)?;
    if let Some(csv) = free_boundary_csv(&u) {
        arts.text("free_boundary.csv", &csv)?;
    }
    Ok(json!({ "member": report.member, "report": report }))
}

fn run_nta(c: &NtaConfig, arts: &mut Artifacts) -> Result<Value> {
    c.params.validate()?;
    let grid = Arc::new(GridSpec::square([0.0, 0.0], c.half_width, c.n)?);
    let mask = match &c.mask {
        MaskSpec::HalfPlane => {
            let inside = (0..grid.len()).map(|i| grid.position(i)[1] > 0.0).collect();
            PositivityMask::from_mask(grid.clone(), inside)?
        }
        MaskSpec::Positivity { oracle } => {
            let f = oracle.build()?;
            positivity_set(&oracle::sample(&*f, grid.clone()), &ThresholdRule::default())
        }
    };
    let checker = NtaChecker::new(&mask);
    let verdict = check_corkscrews(&checker, &c.points, &c.radii, &c.params)?;
    let chains: Vec<Value> = c
        .chains
        .iter()
        .map(|q| match checker.harnack_chain(q.p1, q.p2, q.clearance, &c.params) {
            Ok(chain) => json!({ "query": q, "chain": chain }),
            Err(e) => json!({ "query": q, "error": e.to_string() }),
        })
        .collect();
    let side = |records: &[CorkscrewRecord], s: f64| {
        records
            .iter()
            .map(|r| {
                let (found, point, clearance) = match &r.result {
                    Corkscrew::Found { point, clearance, .. } => (1.0, *point, *clearance),
                    Corkscrew::NotFound { best } => (0.0, [f64::NAN; 2], *best),
                    Corkscrew::NoComplementNodes => (0.0, [f64::NAN; 2], f64::NAN),
                };
                vec![s, r.x0[0], r.x0[1], r.r, found, point[0], point[1], clearance]
            })
            .collect::<Vec<_>>()
    };
    let mut rows = side(&verdict.domain, 0.0);
    rows.extend(side(&verdict.complement, 1.0));
    arts.text("corkscrews.csv", &csv_rows("complement,x0,y0,r,found,px,py,clearance", rows))?;
    Ok(json!({ "passed": verdict.passed, "verdict": verdict, "chains": chains }))
}

fn run_exponent(c: &ExponentConfig, arts: &mut Artifacts) -> Result<Value> {
    let fit = match &c.target {
        ExponentTarget::SlitLaplacian => {
            let f = |p: Point| SlitExample.laplacian(p);
            holder_exponent(HolderSource::Function(&f), c.center, c.r_min, c.r_max, c.levels)?
        }
        ExponentTarget::HalfspaceLaplacian => {
            let cubic = HalfspaceCubic::at_angle(0.0);
            let f = move |p: Point| cubic.laplacian(p);
            holder_exponent(HolderSource::Function(&f), c.center, c.r_min, c.r_max, c.levels)?
        }
        ExponentTarget::RadialPower { p } => {
            let p = *p;
            let f = move |x: Point| (x[0] * x[0] + x[1] * x[1]).sqrt().powf(p);
            holder_exponent(HolderSource::Function(&f), c.center, c.r_min, c.r_max, c.levels)?
        }
        ExponentTarget::SolvedSlitLaplacian { n, solver } => {
            let (_, out) = solve_field(arts, &OracleSpec::Slit, &DomainSpec::default(), *n, solver)?;
            let lap = ops::laplacian(&out.field)?;
            holder_exponent(HolderSource::Field(&lap), c.center, c.r_min, c.r_max, c.levels)?
        }
    };
    arts.text("holder.csv", &fit.to_csv())?;
    Ok(json!({ "exponent": fit.exponent, "fit": fit }))
}

/// `Σ Δ_h u Δ_h f hⁿ` over nodes where both discrete Laplacians exist.
pub fn discrete_pairing(u: &ScalarField, f: &ScalarField) -> Result<f64> {
    u.ensure_same_grid(f)?;
    let (lu, lf) = (ops::laplacian(u)?, ops::laplacian(f)?);
    let vol = u.grid().cell_volume();
    Ok(lu
        .values()
        .iter()
        .zip(lf.values())
        .filter(|(a, b)| a.is_finite() && b.is_finite())
        .map(|(a, b)| a * b)
        .sum::<f64>()
        * vol)
}

fn run_measure(c: &MeasureConfig, arts: &mut Artifacts) -> Result<Value> {
    let bump = Bump::new(c.bump_center, c.bump_radius);
    let exact = oracle::slit_measure_pairing(&bump)?;
    let grid = Arc::new(GridSpec::square([0.0, 0.0], 1.0, c.n)?);
    let u = oracle::sample(&SlitExample, grid.clone());
    let discrete = discrete_pairing(&u, &bump.sample(grid.clone()))?;
    let relative_error = (discrete - exact).abs() / exact.abs().max(f64::MIN_POSITIVE);
    arts.text("pairing.csv", &csv_rows("n,h,discrete,exact", [vec![c.n as f64, grid.h(), discrete, exact]]))?;
    Ok(json!({ "n": c.n, "h": grid.h(), "discrete": discrete, "exact": exact, "relative_error": relative_error }))
}

fn run_study(c: &StudyConfig, arts: &mut Artifacts) -> Result<Value> {
    let table = convergence_study(&c.case, &c.ladder, &c.solver, |_, _| Ok(()))?;
    arts.text("study.csv", &table.to_csv())?;
    Ok(json!({ "table": table }))
}

/// Runs one experiment, writing `summary.json` and its tables into `out`.
///
/// Outputs depend only on the config, so identical configs give
/// byte-identical files.
pub fn run(config: &ExperimentConfig, out: &Path) -> Result<RunReport> {
    fs::create_dir_all(out)?;
    let mut header = Map::new();
    header.insert("kind".into(), Value::from(config.experiment.kind()));
    header.insert("version".into(), Value::from(env!("CARGO_PKG_VERSION")));
    header.insert("config_hash".into(), Value::from(config.hash()?));
    header.insert("seed".into(), config.seed.map(Value::from).unwrap_or(Value::Null));
    header.insert("config".into(), config.canonical()?);
    let mut arts = Artifacts { dir: out.to_path_buf(), files: Vec::new(), header };
    let body = match &config.experiment {
        Experiment::Solve1d(c) => run_solve_1d(c, &mut arts),
        Experiment::Solve2d(c) => run_solve_2d(c, &mut arts),
        Experiment::OracleVerify(c) => run_oracle_verify(c, &mut arts),
        Experiment::Blowup(c) => run_blowup(c, &mut arts),
        Experiment::Membership(c) => run_membership(c, &mut arts),
        Experiment::Nta(c) => run_nta(c, &mut arts),
        Experiment::Exponent(c) => run_exponent(c, &mut arts),
        Experiment::MeasureIdentity(c) => run_measure(c, &mut arts),
        Experiment::ConvergenceStudy(c) => run_study(c, &mut arts),
    }?;
    let summary = arts.summary("ok", body)?;
    Ok(RunReport { summary, files: arts.files })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_json(text: &str) -> (tempfile::TempDir, Result<RunReport>) {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::from_json(text).unwrap();
        let r = run(&cfg, dir.path());
        (dir, r)
    }

    #[test]
    fn solve_1d_summary() {
        let (dir, r) = run_json(r#"{"kind": "solve-1d", "n": 513}"#);
        let s = r.unwrap().summary;
        assert!((s["gamma_hat"].as_f64().unwrap() - 0.5).abs() < 2.0 / 512.0);
        assert!((s["energy"].as_f64().unwrap() / 96.0 - 1.0).abs() < 0.01);
        assert_eq!(s["config_hash"].as_str().unwrap().len(), 64);
        assert!(dir.path().join("profile.csv").exists() && dir.path().join("solution.json").exists());
    }

    #[test]
    fn exponent_of_slit_laplacian() {
        let (dir, r) = run_json(r#"{"kind": "exponent", "target": {"target": "slit-laplacian"}}"#);
        let e = r.unwrap().summary["exponent"].as_f64().unwrap();
        assert!((e - 0.5).abs() < 0.02, "{e}");
        assert!(dir.path().join("holder.csv").exists());
    }

    #[test]
    fn non_convergence_persists_best_iterate() {
        let (dir, r) = run_json(
            r#"{"kind": "solve-2d", "n": 65, "solver": {"max_iterations": 1, "initial": "zero", "fallback_iterations": 1}}"#,
        );
        let err = r.unwrap_err();
        assert_eq!(exit_code(&err), 3);
        let s: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
        assert_eq!(s["status"], "non-convergence");
        assert!(dir.path().join("solution_best.json").exists());
    }

    #[test]
    fn invalid_parameters_map_to_validation() {
        let (_, r) = run_json(r#"{"kind": "blowup", "params": {"s": 0.7}}"#);
        assert_eq!(exit_code(&r.unwrap_err()), 2);
        let (_, r) = run_json(r#"{"kind": "convergence-study", "ladder": [65, 129]}"#);
        assert_eq!(exit_code(&r.unwrap_err()), 2);
    }
}
