//! Command-line entry point.
//!
//! Exit codes: 0 on success, 1 when hypothesis checks fail (failed checks
//! are data, the code just signals them) or on IO errors, 2 when a solve
//! does not converge, 3 on configuration errors.

use clap::{Parser, Subcommand};
use magnelast::config::{Config, ConfigError};
use magnelast::fields::StateFields;
use magnelast::harness::{
    dilation_ratio, hypothesis_check, minimize_at, recovery_gap, recovery_initializer,
    render_csv, render_rigidity_csv, rigidity_probe, run_sweep, CheckStatus, HarnessError,
    StateDump, DEFAULT_PROBE_AMPLITUDE,
};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "magnelast",
    version,
    about = "Variational magnetoelasticity on the unit square: minimize the finite-strain functional across loading scales and compare with its small-strain limit"
)]
struct Cli {
    /// JSON config file; built-in defaults apply when omitted
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output file (default depends on the subcommand)
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Override the config's random seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Suppress progress logs on stderr
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Minimize across the loading-scale ladder and write the sweep CSV
    Sweep {
        /// Solve ladder points concurrently (cold starts instead of the
        /// warm-start chain)
        #[arg(long)]
        parallel: bool,
    },
    /// Minimize the finite-strain functional at one loading scale
    Minimize {
        #[arg(long)]
        eps: f64,
    },
    /// Minimize the small-strain limit functional
    Linear,
    /// Evaluate the recovery initializer and its energy gap at one scale
    Recovery {
        #[arg(long)]
        eps: f64,
    },
    /// Sample the rigidity-ratio distribution and write a CSV
    Rigidity {
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
    /// Audit the stored-energy hypotheses and write a JSON report
    Check {
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
}

enum CliError {
    Config(ConfigError),
    Harness(HarnessError),
    Io(PathBuf, std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Harness(HarnessError::Config(_)) => 3,
            CliError::Harness(HarnessError::Demag(_))
            | CliError::Harness(HarnessError::InadmissibleStart { .. }) => 2,
            CliError::Harness(HarnessError::Grid(_)) | CliError::Io(..) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Harness(e) => write!(f, "{e}"),
            CliError::Io(path, e) => write!(f, "cannot write {}: {e}", path.display()),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        CliError::Harness(e)
    }
}

fn write_out(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

#[derive(Serialize)]
struct RecoveryDump {
    eps: f64,
    finite_internal: f64,
    linear_internal: f64,
    gap: f64,
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => Config::from_path(path)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let out_or = |default: &str| cli.out.clone().unwrap_or_else(|| PathBuf::from(default));

    match cli.cmd {
        Cmd::Sweep { parallel } => {
            let outcome = run_sweep(&cfg, cli.quiet, parallel)?;
            let path = out_or("sweep.csv");
            write_out(&path, &render_csv(&outcome.records))?;
            let all_converged = outcome.records.iter().all(|r| r.converged);
            println!(
                "s0 = {}, final gap = {}, wrote {} rows to {}",
                outcome.s0,
                outcome.records.last().map(|r| r.gap).unwrap_or(f64::NAN),
                outcome.records.len(),
                path.display()
            );
            if outcome.min_coercivity_margin < 0.0 {
                eprintln!(
                    "warning: coercivity margin dipped to {}",
                    outcome.min_coercivity_margin
                );
            }
            if outcome.max_overlap_cells > 0 {
                eprintln!(
                    "note: deformed mesh self-overlap touched {} box cells at the final states",
                    outcome.max_overlap_cells
                );
            }
            Ok(if all_converged {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Cmd::Minimize { eps } => {
            if !(eps > 0.0) || !eps.is_finite() {
                return Err(ConfigError::Invalid(format!(
                    "minimize needs a positive finite eps, got {eps}"
                ))
                .into());
            }
            let sys = cfg.build_system()?;
            let init = sys.initial_state();
            let out = minimize_at(&sys, Some(eps), &init, &cfg.solver_options())?;
            let path = out_or("state.json");
            let dump = StateDump::new(&sys.grid, &out.state, Some(eps));
            write_out(&path, &serde_json::to_string_pretty(&dump).unwrap())?;
            println!(
                "eps = {eps}: value = {}, iterations = {}, converged = {}, wrote {}",
                out.report.total,
                out.stats.iterations,
                out.stats.converged,
                path.display()
            );
            Ok(if out.stats.converged {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Cmd::Linear => {
            let sys = cfg.build_system()?;
            let init = sys.initial_state();
            let out = minimize_at(&sys, None, &init, &cfg.solver_options())?;
            let path = out_or("state.json");
            let dump = StateDump::new(&sys.grid, &out.state, None);
            write_out(&path, &serde_json::to_string_pretty(&dump).unwrap())?;
            println!(
                "limit: value = {}, iterations = {}, converged = {}, wrote {}",
                out.report.total,
                out.stats.iterations,
                out.stats.converged,
                path.display()
            );
            Ok(if out.stats.converged {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Cmd::Recovery { eps } => {
            if !(eps > 0.0) || !eps.is_finite() {
                return Err(ConfigError::Invalid(format!(
                    "recovery needs a positive finite eps, got {eps}"
                ))
                .into());
            }
            let sys = cfg.build_system()?;
            // the probe state extends the boundary datum across the body
            let mut state = StateFields::zero(&sys.grid);
            for node in 0..sys.grid.num_nodes() {
                state.u[node] = sys.boundary.eval(sys.grid.node_coord(node));
            }
            let rec = recovery_initializer(&state, &sys.grid, eps)
                .map_err(|_| HarnessError::InadmissibleStart { eps })?;
            let (fin, lin, gap) = recovery_gap(&sys, &rec, eps).map_err(|e| match e {
                magnelast::functional::EvalError::Demag(d) => HarnessError::Demag(d),
                magnelast::functional::EvalError::Inadmissible { .. } => {
                    HarnessError::InadmissibleStart { eps }
                }
            })?;
            let path = out_or("recovery.json");
            let dump = RecoveryDump {
                eps,
                finite_internal: fin,
                linear_internal: lin,
                gap,
            };
            write_out(&path, &serde_json::to_string_pretty(&dump).unwrap())?;
            println!("eps = {eps}: finite = {fin}, limit = {lin}, gap = {gap}, wrote {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Rigidity { samples } => {
            let out = rigidity_probe(
                cfg.grid.n,
                cfg.model.p,
                samples,
                cfg.seed,
                DEFAULT_PROBE_AMPLITUDE,
            );
            let path = out_or("rigidity.csv");
            write_out(&path, &render_rigidity_csv(&out))?;
            let dil = dilation_ratio(cfg.grid.n, cfg.model.p, 0.1);
            println!(
                "rigidity: {} samples, max ratio = {}, mean ratio = {}, skipped = {}, dilation ratio at delta 0.1 = {dil}, wrote {}",
                out.samples.len(),
                out.max_ratio,
                out.mean_ratio,
                out.skipped,
                path.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Check { samples } => {
            let model = magnelast::energy::StoredEnergyModel::new(cfg.model.p, cfg.model.a)
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
            let report = hypothesis_check(&model, samples, cfg.seed);
            let path = out_or("check.json");
            write_out(&path, &serde_json::to_string_pretty(&report).unwrap())?;
            for e in &report.entries {
                let tag = match e.status {
                    CheckStatus::Pass => "PASS",
                    CheckStatus::Fail => "FAIL",
                    CheckStatus::KnownDiscrepancy => "KNOWN-DISCREPANCY",
                };
                println!("{}: {tag} ({})", e.name, e.detail);
            }
            println!(
                "{} passed, {} failed, {} known discrepancies; wrote {}",
                report.passed,
                report.failed,
                report.known_discrepancies,
                path.display()
            );
            Ok(if report.has_failures() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            })
        }
    }
}
