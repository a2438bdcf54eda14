use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::oracle::{self, OneDimSolution};
use crate::solver::{solve, BiharmonicProblem, SolveOutcome, SolverConfig};

use super::config::StudyCase;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub n: usize,
    pub h: f64,
    /// Max nodal error against the oracle over valid nodes.
    pub linf_error: f64,
    /// `|J_h − J|`; one-dimensional case only.
    pub energy_error: Option<f64>,
    /// Observed order against the previous level.
    pub linf_order: Option<f64>,
    pub energy_order: Option<f64>,
    pub iterations: usize,
    pub kkt_max_relative: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyTable {
    pub rows: Vec<StudyRow>,
    /// Every level is within `1e-10 · max|u|` of the oracle.
    pub at_roundoff: bool,
}

impl StudyTable {
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
        let mut out = String::from("n,h,linf_error,energy_error,linf_order,energy_order\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:?},{:?},{},{},{}\n",
                r.n,
                r.h,
                r.linf_error,
                opt(r.energy_error),
                opt(r.linf_order),
                opt(r.energy_order)
            ));
        }
        out
    }
}

/// `log(e₀/e₁) / log(h₀/h₁)`, or `None` when an error is not positive.
pub fn observed_order(e0: f64, e1: f64, h0: f64, h1: f64) -> Option<f64> {
    (e0 > 0.0 && e1 > 0.0 && e0.is_finite() && e1.is_finite()).then(|| (e0 / e1).ln() / (h0 / h1).ln())
}

pub fn validate_ladder(ladder: &[usize]) -> Result<()> {
    if ladder.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "a convergence study needs at least 3 levels, got {}",
            ladder.len()
        )));
    }
    if ladder.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(format!("ladder must be strictly increasing: {ladder:?}")));
    }
    Ok(())
}

/// Per-level errors against the case's oracle and observed orders.
///
/// `on_solve` sees every outcome, e.g. to persist fields.
pub fn convergence_study(
    case: &StudyCase,
    ladder: &[usize],
    solver: &SolverConfig,
    mut on_solve: impl FnMut(usize, &SolveOutcome) -> Result<()>,
) -> Result<StudyTable> {
    validate_ladder(ladder)?;
    solver.validate()?;
    let (field, exact_energy, domain) = match case {
        StudyCase::OneDim { lambda } => {
            let s = OneDimSolution::new(*lambda)?;
            (oracle::OracleSpec::OneDim { lambda: *lambda, embedded: false }.build()?, Some(s.energy()), None)
        }
        StudyCase::Planar { oracle, domain } => (oracle.build()?, None, Some(domain.clone())),
    };
    let mut rows: Vec<StudyRow> = Vec::with_capacity(ladder.len());
    let mut roundoff = true;
    for &n in ladder {
        let grid = Arc::new(match &domain {
            None => GridSpec::interval(0.0, 1.0, n)?,
            Some(d) => d.grid(n)?,
        });
        let problem = BiharmonicProblem::from_shared_oracle(grid.clone(), field.clone())?;
        let out = solve(&problem, solver)?;
        on_solve(n, &out)?;
        let exact = oracle::sample(&*field, grid.clone());
        let linf_error = out.field.max_abs_diff(&exact)?;
        roundoff &= linf_error <= 1e-10 * exact.max_abs().max(1.0);
        let energy_error = exact_energy.map(|e| (out.report.energy - e).abs());
        let (linf_order, energy_order) = match rows.last() {
            None => (None, None),
            Some(prev) => (
                observed_order(prev.linf_error, linf_error, prev.h, grid.h()),
                match (prev.energy_error, energy_error) {
                    (Some(a), Some(b)) => observed_order(a, b, prev.h, grid.h()),
                    _ => None,
                },
            ),
        };
        rows.push(StudyRow {
            n,
            h: grid.h(),
            linf_error,
            energy_error,
            linf_order,
            energy_order,
            iterations: out.report.iterations,
            kkt_max_relative: out.report.max_relative(),
        });
    }
    Ok(StudyTable { rows, at_roundoff: roundoff })
}
