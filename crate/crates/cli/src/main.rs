//! `vislab`: point queries, sweeps, verification, simulation and estimation
//! for the reputation-visibility model.
//!
//! Exit codes: 0 success, 1 a verification claim failed, 2 bad input
//! (arguments, config, panel), 3 numerical failure (non-convergence, rank).

mod io;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;
use vislab_core::config::Document;
use vislab_core::econometrics::{estimate_panel, monte_carlo, MonteCarloSummary};
use vislab_core::lab::{verify_all, verify_claim, VerificationReport, CLAIMS};
use vislab_core::settings::uniform_grid;
use vislab_core::sign_test::{cutoff_slope_sign, sweep};
use vislab_core::sim::simulate;
use vislab_core::Belief;

use crate::manifest::ManifestBuilder;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{} claim(s) failed", .0)]
    VerificationFailed(usize),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Input(format!("{}: {e}", path.display()))
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::VerificationFailed(_) => 1,
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<vislab_core::Error> for CliError {
    fn from(e: vislab_core::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Input(e.to_string())
        }
    }
}

impl From<vislab_core::config::ConfigError> for CliError {
    fn from(e: vislab_core::config::ConfigError) -> Self {
        CliError::Input(format!("config: {e}"))
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "vislab",
    version,
    about = "Reputation and visibility: sign tests, simulation and estimation"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Scenario document (TOML). Built-in defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set vis_risky.sigma0=0.3`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Directory for artifacts.
    #[arg(long, env = "VISLAB_OUT_DIR", default_value = "vislab-out", global = true)]
    out_dir: PathBuf,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Base seed; overrides `simulation.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Full sign-test report at one belief, as JSON on stdout.
    Calc {
        #[arg(long)]
        pi: f64,
    },
    /// Sign test over a belief grid, written as CSV.
    Sweep {
        /// `start:stop:n`, inclusive.
        #[arg(long, default_value = "0.01:0.99:99")]
        grid: String,
        /// Output file name inside the output directory.
        #[arg(long, default_value = "sweep.csv")]
        out: String,
    },
    /// Run verification claims (`all` or a claim id).
    Verify {
        #[arg(default_value = "all")]
        selector: String,
    },
    /// Simulate a synthetic panel.
    Simulate {
        #[arg(long, default_value = "panel.csv")]
        out: String,
    },
    /// Estimate event studies, pooled DiD, first stage and 2SLS on a panel.
    Estimate {
        #[arg(long)]
        panel: PathBuf,
        /// Prefix for output file names.
        #[arg(long, default_value = "")]
        prefix: String,
    },
    /// Simulate and estimate many seeded replications; writes one row per
    /// replication plus sign and rejection frequencies.
    Montecarlo {
        /// Defaults to `simulation.replications`.
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long, default_value = "montecarlo.csv")]
        out: String,
    },
    /// Sweep plus verification bundled into one directory.
    Report {
        #[arg(long, default_value = "0.01:0.99:99")]
        grid: String,
    },
}

struct Ctx {
    doc: Document,
    /// Canonical text of the effective document, hashed into manifests.
    canonical: String,
    seed: u64,
    out_dir: PathBuf,
}

impl Ctx {
    fn load(common: &Common) -> Result<Self, CliError> {
        let mut doc = match &common.config {
            Some(p) => Document::load(p, &common.overrides)?,
            None => Document::parse_with_overrides(&Document::default().to_toml(), &common.overrides)?,
        };
        if let Some(s) = common.seed {
            doc.simulation.seed = s;
        }
        let canonical = doc.to_toml();
        Ok(Self {
            seed: doc.simulation.seed,
            doc,
            canonical,
            out_dir: common.out_dir.clone(),
        })
    }

    fn out_dir(&self, sub: Option<&str>) -> Result<PathBuf, CliError> {
        let dir = match sub {
            Some(s) => self.out_dir.join(s),
            None => self.out_dir.clone(),
        };
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        Ok(dir)
    }

    fn manifest(&self, command: &str, dir: &Path) -> ManifestBuilder {
        ManifestBuilder::new(command, &self.canonical, self.seed, dir)
    }
}

fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = || {
        CliError::Input(format!(
            "invalid grid `{spec}`; expected start:stop:n with 0 < start <= stop < 1"
        ))
    };
    let parts: Vec<&str> = spec.split(':').collect();
    let [a, b, n] = parts.as_slice() else {
        return Err(bad());
    };
    let start: f64 = a.trim().parse().map_err(|_| bad())?;
    let stop: f64 = b.trim().parse().map_err(|_| bad())?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    if n == 0 || !(start > 0.0 && start <= stop && stop < 1.0) || (n == 1 && start != stop) {
        return Err(bad());
    }
    Ok(uniform_grid(start, stop, n))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

fn run_verify(ctx: &Ctx, selector: &str, dir: &Path, m: &mut ManifestBuilder) -> Result<usize, CliError> {
    let settings = ctx.doc.numerics;
    let reports: Vec<VerificationReport> = if selector == "all" {
        verify_all(ctx.seed, &settings)?
    } else {
        if !CLAIMS.contains(&selector) {
            return Err(CliError::Input(format!(
                "unknown claim `{selector}`; known claims: all, {}",
                CLAIMS.join(", ")
            )));
        }
        vec![verify_claim(selector, ctx.seed, &settings)?]
    };
    let mut failed = 0;
    for r in &reports {
        println!("{}", r.summary());
        failed += usize::from(!r.passed);
        let path = dir.join(format!("{}.json", r.claim_id));
        write_json(&path, r)?;
        m.output(&path)?;
    }
    Ok(failed)
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.common.threads {
        if n == 0 {
            return Err(CliError::Input("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Input(format!("thread pool: {e}")))?;
    }
    let ctx = Ctx::load(&cli.common)?;
    let settings = ctx.doc.numerics;
    match cli.command {
        Command::Calc { pi } => {
            let pi = Belief::interior(pi).map_err(|e| CliError::Input(e.to_string()))?;
            let report = cutoff_slope_sign(pi, &ctx.doc.scenario()?, &settings)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
        }
        Command::Sweep { grid, out } => {
            let grid = parse_grid(&grid)?;
            let dir = ctx.out_dir(None)?;
            let mut m = ctx.manifest("sweep", &dir);
            let rows = sweep(&ctx.doc.scenario()?, &grid, &settings)?;
            let path = dir.join(out);
            io::write_sweep(&path, &rows)?;
            m.output(&path)?;
            m.finish()?;
            eprintln!("wrote {} rows to {}", rows.len(), path.display());
        }
        Command::Verify { selector } => {
            let dir = ctx.out_dir(Some("verify"))?;
            let mut m = ctx.manifest("verify", &dir);
            let failed = run_verify(&ctx, &selector, &dir, &mut m)?;
            m.finish()?;
            if failed > 0 {
                return Err(CliError::VerificationFailed(failed));
            }
        }
        Command::Simulate { out } => {
            let dir = ctx.out_dir(None)?;
            let mut m = ctx.manifest("simulate", &dir);
            let sim = simulate(&ctx.doc.sim_config()?)?;
            let path = dir.join(out);
            io::write_panel(&path, &sim.rows)?;
            m.output(&path)?;
            m.finish()?;
            eprintln!("wrote {} rows to {}", sim.rows.len(), path.display());
        }
        Command::Estimate { panel, prefix } => {
            let rows = io::read_panel(&panel)?;
            let dir = ctx.out_dir(None)?;
            let mut m = ctx.manifest("estimate", &dir);
            m.input(&panel)?;
            let spec = &ctx.doc.estimation;
            let est = estimate_panel(&rows, spec, &settings)?;
            let table = est.coefficient_table(&spec.interact_with);
            let files = [
                (format!("{prefix}coefficients.csv"), 0),
                (format!("{prefix}coefficients.json"), 1),
                (format!("{prefix}event_risky_share.csv"), 2),
                (format!("{prefix}event_succ_risky.csv"), 3),
            ];
            for (name, kind) in files {
                let path = dir.join(&name);
                match kind {
                    0 => io::write_table(&path, &table)?,
                    1 => write_json(&path, &est)?,
                    2 => io::write_series(&path, &est.event_risky)?,
                    _ => io::write_series(&path, &est.event_success)?,
                }
                m.output(&path)?;
            }
            m.finish()?;
            let (r, s) = (&est.event_risky, &est.event_success);
            println!(
                "risky_share post avg {:+.4} (pretrend p {:.3}); succ_risky post avg {:+.4} (pretrend p {:.3}); first stage {:+.4} (F {:.1})",
                r.post_avg, r.pretrend_p, s.post_avg, s.pretrend_p, est.first_stage.first_stage_coef, est.first_stage.first_stage_f
            );
            if est.first_stage.weak_instrument {
                eprintln!("warning: weak instrument (first-stage F below 10)");
            }
        }
        Command::Montecarlo { reps, out } => {
            let reps = reps.unwrap_or(ctx.doc.simulation.replications);
            if reps == 0 {
                return Err(CliError::Input("--reps must be positive".into()));
            }
            let dir = ctx.out_dir(None)?;
            let mut m = ctx.manifest("montecarlo", &dir);
            let runs = monte_carlo(&ctx.doc.sim_config()?, &ctx.doc.estimation, reps, &settings)?;
            let path = dir.join(&out);
            io::write_replications(&path, &runs)?;
            m.output(&path)?;
            let summary = MonteCarloSummary::from_replications(&runs);
            let spath = path.with_extension("summary.json");
            write_json(&spath, &summary)?;
            m.output(&spath)?;
            m.finish()?;
            println!(
                "{}",
                serde_json::to_string_pretty(&summary).expect("summary serializes")
            );
        }
        Command::Report { grid } => {
            let grid = parse_grid(&grid)?;
            let dir = ctx.out_dir(Some("report"))?;
            let vdir = dir.join("verify");
            std::fs::create_dir_all(&vdir).map_err(|e| CliError::io(&vdir, e))?;
            let mut m = ctx.manifest("report", &dir);
            let rows = sweep(&ctx.doc.scenario()?, &grid, &settings)?;
            let path = dir.join("sweep.csv");
            io::write_sweep(&path, &rows)?;
            m.output(&path)?;
            let cfg = dir.join("config.toml");
            std::fs::write(&cfg, &ctx.canonical).map_err(|e| CliError::io(&cfg, e))?;
            m.output(&cfg)?;
            let failed = run_verify(&ctx, "all", &vdir, &mut m)?;
            m.finish()?;
            if failed > 0 {
                return Err(CliError::VerificationFailed(failed));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("0.01:0.99:99").unwrap().len(), 99);
        assert_eq!(parse_grid("0.5:0.5:1").unwrap(), vec![0.5]);
        for bad in ["0:0.5:3", "0.2:0.1:3", "0.1:0.9", "0.1:0.9:0", "a:b:c", "0.1:1:5"] {
            assert!(parse_grid(bad).is_err(), "{bad}");
        }
    }
}
