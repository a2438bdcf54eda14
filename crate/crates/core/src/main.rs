use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use biharmonic_obstacle::experiment::{error_json, exit_code, run, ExperimentConfig};
use biharmonic_obstacle::{Error, Result};

#[derive(Parser)]
#[command(name = "biharm-lab", version, about = "Biharmonic obstacle experiments driven by JSON configs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for randomized perturbations; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// solve-1d, solve-2d or oracle-verify.
    Solve(Common),
    Blowup(Common),
    Membership(Common),
    Nta(Common),
    Exponent(Common),
    /// measure-identity.
    Measure(Common),
    /// convergence-study.
    Study(Common),
    /// Any experiment kind.
    Run(Common),
}

impl Command {
    fn parts(&self) -> (&Common, &'static [&'static str]) {
        match self {
            Command::Solve(c) => (c, &["solve-1d", "solve-2d", "oracle-verify"]),
            Command::Blowup(c) => (c, &["blowup"]),
            Command::Membership(c) => (c, &["membership"]),
            Command::Nta(c) => (c, &["nta"]),
            Command::Exponent(c) => (c, &["exponent"]),
            Command::Measure(c) => (c, &["measure-identity"]),
            Command::Study(c) => (c, &["convergence-study"]),
            Command::Run(c) => (c, &[]),
        }
    }
}

fn load(common: &Common, kinds: &[&str]) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(&common.config)?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    let kind = cfg.experiment.kind();
    if !kinds.is_empty() && !kinds.contains(&kind) {
        return Err(Error::InvalidParameter(format!(
            "config kind {kind} does not match this subcommand ({})",
            kinds.join(", ")
        )));
    }
    if let Some(seed) = common.seed {
        cfg.set_seed(seed)?;
    }
    Ok(cfg)
}

fn report_error(err: &Error, out: Option<&Path>) {
    let body = error_json(err);
    eprintln!("{body}");
    if let Some(dir) = out {
        let _ = fs::create_dir_all(dir).and_then(|_| fs::write(dir.join("error.json"), format!("{body}\n")));
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, kinds) = cli.command.parts();
    let cfg = match load(common, kinds) {
        Ok(cfg) => cfg,
        Err(e) => {
            // An unreadable config file is still a validation failure.
            let e = match e {
                Error::Io(io) => Error::InvalidParameter(format!("cannot read {}: {io}", common.config.display())),
                other => other,
            };
            report_error(&e, common.out.as_deref());
            return ExitCode::from(exit_code(&e) as u8);
        }
    };
    let out = common.out.clone().or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("out"));
    match run(&cfg, &out) {
        Ok(report) => {
            let kind = report.summary["kind"].as_str().unwrap_or_default();
            println!("{kind}: wrote {} files to {}", report.files.len(), out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            report_error(&e, Some(&out));
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
