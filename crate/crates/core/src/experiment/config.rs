use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::analysis::{BlowupParams, MembershipParams};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, Point};
use crate::nta::NTAParams;
use crate::oracle::OracleSpec;
use crate::solver::SolverConfig;

/// Computational domain of a solve, discretized with `n` nodes per axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DomainSpec {
    Interval {
        #[serde(default)]
        a: f64,
        #[serde(default = "one")]
        b: f64,
    },
    Disk {
        #[serde(default)]
        center: Point,
        #[serde(default = "one")]
        radius: f64,
        #[serde(default = "three")]
        margin: usize,
    },
    Square {
        #[serde(default)]
        center: Point,
        #[serde(default = "one")]
        half_width: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn three() -> usize {
    3
}

impl Default for DomainSpec {
    fn default() -> Self {
        DomainSpec::Disk { center: [0.0, 0.0], radius: 1.0, margin: 3 }
    }
}

impl DomainSpec {
    pub fn grid(&self, n: usize) -> Result<GridSpec> {
        match self {
            DomainSpec::Interval { a, b } => GridSpec::interval(*a, *b, n),
            DomainSpec::Disk { center, radius, margin } => GridSpec::disk(*center, *radius, n, *margin),
            DomainSpec::Square { center, half_width } => GridSpec::square(*center, *half_width, n),
        }
    }
}

fn default_slit() -> OracleSpec {
    OracleSpec::Slit
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Solve1dConfig {
    pub lambda: f64,
    pub n: usize,
    pub solver: SolverConfig,
}

impl Default for Solve1dConfig {
    fn default() -> Self {
        Solve1dConfig { lambda: -6.0, n: 2049, solver: SolverConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Solve2dConfig {
    /// Supplies the clamped boundary data and the comparison field.
    pub oracle: OracleSpec,
    pub domain: DomainSpec,
    pub n: usize,
    pub solver: SolverConfig,
}

impl Default for Solve2dConfig {
    fn default() -> Self {
        Solve2dConfig { oracle: default_slit(), domain: DomainSpec::default(), n: 257, solver: SolverConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleVerifyConfig {
    pub oracle: OracleSpec,
    pub domain: DomainSpec,
    pub n: usize,
}

impl Default for OracleVerifyConfig {
    fn default() -> Self {
        OracleVerifyConfig { oracle: default_slit(), domain: DomainSpec::default(), n: 257 }
    }
}

/// Field a blow-up trace is taken from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "from", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FieldSource {
    /// The closed form, evaluated exactly.
    Oracle { oracle: OracleSpec },
    /// The oracle rendered on a grid.
    Sampled { oracle: OracleSpec, domain: DomainSpec, n: usize },
    /// The obstacle solution with the oracle as clamped data.
    Solved {
        oracle: OracleSpec,
        domain: DomainSpec,
        n: usize,
        #[serde(default)]
        solver: SolverConfig,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlowupConfig {
    pub source: FieldSource,
    pub center: Point,
    pub params: BlowupParams,
}

impl Default for BlowupConfig {
    fn default() -> Self {
        BlowupConfig {
            source: FieldSource::Oracle { oracle: OracleSpec::HalfspaceCubic { angle_deg: 0.0 } },
            center: [0.0, 0.0],
            params: BlowupParams::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MembershipConfig {
    pub oracle: OracleSpec,
    /// Half-width of the sampling square around the origin.
    pub half_width: f64,
    pub n: usize,
    pub params: MembershipParams,
}

impl Default for MembershipConfig {
    fn default() -> Self {
        MembershipConfig {
            oracle: OracleSpec::HalfspaceCubic { angle_deg: 0.0 },
            half_width: 2.1,
            n: 169,
            params: MembershipParams::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mask", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MaskSpec {
    /// `{x₂ > 0}`.
    HalfPlane,
    /// Positivity set of an oracle.
    Positivity { oracle: OracleSpec },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainQuery {
    pub p1: Point,
    pub p2: Point,
    pub clearance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NtaConfig {
    pub mask: MaskSpec,
    pub half_width: f64,
    pub n: usize,
    pub params: NTAParams,
    /// Boundary points tested at every radius.
    pub points: Vec<Point>,
    pub radii: Vec<f64>,
    pub chains: Vec<ChainQuery>,
}

impl Default for NtaConfig {
    fn default() -> Self {
        NtaConfig {
            mask: MaskSpec::HalfPlane,
            half_width: 1.0,
            n: 201,
            params: NTAParams { m: 2.0, r0: 1.0, c_chain: 4.0 },
            points: vec![[0.0, 0.0]],
            radii: vec![0.1, 0.25, 0.5],
            chains: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "target", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ExponentTarget {
    /// `Δ` of the slit solution, evaluated in closed form.
    SlitLaplacian,
    HalfspaceLaplacian,
    /// `|x|^p`.
    RadialPower {
        p: f64,
    },
    /// Discrete `Δ` of the solved slit problem on the unit disk.
    SolvedSlitLaplacian {
        n: usize,
        #[serde(default)]
        solver: SolverConfig,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExponentConfig {
    pub target: ExponentTarget,
    pub center: Point,
    pub r_min: f64,
    pub r_max: f64,
    pub levels: usize,
}

impl Default for ExponentConfig {
    fn default() -> Self {
        ExponentConfig {
            target: ExponentTarget::SlitLaplacian,
            center: [0.0, 0.0],
            r_min: 0.01,
            r_max: 0.2,
            levels: 12,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasureConfig {
    /// Nodes per side of the square `[-1, 1]²`.
    pub n: usize,
    pub bump_center: Point,
    pub bump_radius: f64,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        MeasureConfig { n: 1025, bump_center: [-0.5, 0.0], bump_radius: 0.3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StudyCase {
    OneDim {
        #[serde(default = "minus_six")]
        lambda: f64,
    },
    Planar {
        oracle: OracleSpec,
        #[serde(default)]
        domain: DomainSpec,
    },
}

fn minus_six() -> f64 {
    -6.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub case: StudyCase,
    /// Node counts, strictly increasing.
    pub ladder: Vec<usize>,
    pub solver: SolverConfig,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            case: StudyCase::OneDim { lambda: -6.0 },
            ladder: vec![257, 513, 1025, 2049],
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    #[serde(rename = "solve-1d")]
    Solve1d(Solve1dConfig),
    #[serde(rename = "solve-2d")]
    Solve2d(Solve2dConfig),
    OracleVerify(OracleVerifyConfig),
    Blowup(BlowupConfig),
    Membership(MembershipConfig),
    Nta(NtaConfig),
    Exponent(ExponentConfig),
    MeasureIdentity(MeasureConfig),
    ConvergenceStudy(StudyConfig),
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Solve1d(_) => "solve-1d",
            Experiment::Solve2d(_) => "solve-2d",
            Experiment::OracleVerify(_) => "oracle-verify",
            Experiment::Blowup(_) => "blowup",
            Experiment::Membership(_) => "membership",
            Experiment::Nta(_) => "nta",
            Experiment::Exponent(_) => "exponent",
            Experiment::MeasureIdentity(_) => "measure-identity",
            Experiment::ConvergenceStudy(_) => "convergence-study",
        }
    }
}

/// A parsed experiment with its output directory and seed.
///
/// On disk this is one JSON object: the experiment fields tagged by
/// `kind`, plus optional `output` and `seed`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub output: Option<PathBuf>,
    /// Overrides the seed of every randomized perturbation in the config.
    pub seed: Option<u64>,
}

fn reseed(value: &mut Value, seed: u64) {
    match value {
        Value::Object(map) => {
            if map.get("name").and_then(Value::as_str) == Some("perturbed-halfspace") {
                map.insert("seed".into(), Value::from(seed));
            }
            for v in map.values_mut() {
                reseed(v, seed);
            }
        }
        Value::Array(items) => items.iter_mut().for_each(|v| reseed(v, seed)),
        _ => {}
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let mut value: Value = serde_json::from_str(text)?;
        let map =
            value.as_object_mut().ok_or_else(|| Error::InvalidParameter("config must be a JSON object".into()))?;
        let output = match map.remove("output") {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => Some(PathBuf::from(s)),
            Some(other) => return Err(Error::InvalidParameter(format!("output must be a string, got {other}"))),
        };
        let seed = match map.remove("seed") {
            None | Some(Value::Null) => None,
            Some(v) => Some(
                v.as_u64()
                    .ok_or_else(|| Error::InvalidParameter(format!("seed must be a nonnegative integer, got {v}")))?,
            ),
        };
        let experiment: Experiment = serde_json::from_value(value)?;
        let mut cfg = ExperimentConfig { experiment, output, seed };
        if let Some(s) = seed {
            cfg.set_seed(s)?;
        }
        Ok(cfg)
    }

    /// Sets the seed and applies it to randomized perturbations.
    pub fn set_seed(&mut self, seed: u64) -> Result<()> {
        let mut v = serde_json::to_value(&self.experiment)?;
        reseed(&mut v, seed);
        self.experiment = serde_json::from_value(v)?;
        self.seed = Some(seed);
        Ok(())
    }

    /// The experiment with all defaults filled in, as a JSON value.
    pub fn canonical(&self) -> Result<Value> {
        let mut v = serde_json::to_value(&self.experiment)?;
        if let Value::Object(map) = &mut v {
            if let Some(s) = self.seed {
                map.insert("seed".into(), Value::from(s));
            }
        }
        Ok(v)
    }

    /// SHA-256 of the canonical JSON; the output directory is excluded.
    pub fn hash(&self) -> Result<String> {
        let text = serde_json::to_string(&self.canonical()?)?;
        let digest = Sha256::digest(text.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }
}
