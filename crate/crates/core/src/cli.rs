//! Command-line interface.
//!
//! Exit status: 0 when everything passed, 1 when a check failed or a run was
//! aborted, 2 on configuration or runtime errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::harness::verify;
use crate::io::config::{parse_config, RunConfig};
use crate::io::output::{sigma_csv, write_text, write_trajectory};
use crate::selfsimilar::{compare_with_pde, integrate_sigma, DEFAULT_TOL};
use crate::stepper::{run, RunOutcome, StepOptions, Trajectory};

#[derive(Debug, Parser)]
#[command(name = "stickyflow", version, about = "Lagrangian free-boundary viscous flow simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one simulation and write its trajectory.
    Run { config: PathBuf },
    /// Run one simulation per value of a key, in parallel.
    Sweep {
        config: PathBuf,
        /// `key=v1,v2,...`; repeat to sweep the product.
        #[arg(long, required = true)]
        vary: Vec<String>,
    },
    /// Run the verification checklist.
    Verify { config: PathBuf },
    /// Integrate the self-similar scale factor.
    Selfsimilar {
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long, allow_hyphen_values = true)]
        sigma0: f64,
        #[arg(long, allow_hyphen_values = true)]
        dsigma0: f64,
        #[arg(long)]
        t_end: f64,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        /// Also step the PDE from self-similar data and compare.
        #[arg(long)]
        compare: bool,
        #[arg(long, default_value_t = 512)]
        n_cells: usize,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        /// Write the `(t, sigma, sigma')` samples to this CSV file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Reads a config file and applies the output-directory override.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io { path: path.display().to_string(), message: e.to_string() })?;
    let mut config = parse_config(&text)?;
    config.apply_env();
    Ok(config)
}

fn write_run(config: &RunConfig, dir: &Path, traj: &Trajectory) -> Result<()> {
    write_trajectory(&traj.records, &dir.join("trajectory.csv"))?;
    write_text(&dir.join("config.ini"), &config.echo())
}

fn summary(traj: &Trajectory) -> String {
    let last = traj.records.last().expect("records start with t = 0");
    let status = match &traj.outcome {
        RunOutcome::Completed => "completed".to_string(),
        RunOutcome::Aborted { t, reason } => format!("aborted at t = {t}: {reason}"),
    };
    format!(
        "{status}; {} steps, t = {:.6}, kinetic = {:.6e}, domain = {:.10}",
        traj.steps.len() - 1,
        last.t,
        last.kinetic,
        last.domain_size
    )
}

fn parse_vary(arg: &str) -> Result<(String, Vec<String>)> {
    let (key, values) = arg.split_once('=').ok_or_else(|| Error::Config {
        line: None,
        key: arg.to_string(),
        message: "expected key=v1,v2,...".into(),
    })?;
    let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
    if values.is_empty() {
        return Err(Error::Config { line: None, key: key.into(), message: "no values to sweep".into() });
    }
    Ok((key.trim().to_string(), values))
}

fn sweep_configs(base: &RunConfig, vary: &[String]) -> Result<Vec<(String, RunConfig)>> {
    let mut configs = vec![(String::new(), base.clone())];
    for arg in vary {
        let (key, values) = parse_vary(arg)?;
        let mut next = Vec::with_capacity(configs.len() * values.len());
        for (label, config) in &configs {
            for v in &values {
                let mut c = config.clone();
                c.set(&key, v)?;
                let tag = format!("{key}={v}");
                let label = if label.is_empty() { tag } else { format!("{label},{tag}") };
                c.output_dir = base.output_dir.join(label.replace([',', '/'], "_"));
                next.push((label, c));
            }
        }
        configs = next;
    }
    Ok(configs)
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<u8> {
    match cli.command {
        Command::Run { config } => {
            let config = load_config(&config)?;
            let traj = run(&config)?;
            write_run(&config, &config.output_dir, &traj)?;
            let _ = writeln!(out, "{}", summary(&traj));
            Ok(if traj.completed() { 0 } else { 1 })
        }
        Command::Sweep { config, vary } => {
            let base = load_config(&config)?;
            let configs = sweep_configs(&base, &vary)?;
            let results: Vec<Result<(String, Trajectory)>> = configs
                .par_iter()
                .map(|(label, c)| {
                    let traj = run(c)?;
                    write_run(c, &c.output_dir, &traj)?;
                    Ok((label.clone(), traj))
                })
                .collect();
            let mut code = 0;
            for r in results {
                let (label, traj) = r?;
                let _ = writeln!(out, "{label}: {}", summary(&traj));
                if !traj.completed() {
                    code = 1;
                }
            }
            Ok(code)
        }
        Command::Verify { config } => {
            let config = load_config(&config)?;
            let v = verify(&config)?;
            write_run(&config, &config.output_dir, &v.trajectory)?;
            write_text(&config.output_dir.join("report.txt"), &v.report.to_string())?;
            let _ = write!(out, "{}", v.report);
            let failures = v.report.failures();
            let _ = writeln!(out, "{} checks, {failures} failed", v.report.checks.len());
            Ok(if v.report.passed() { 0 } else { 1 })
        }
        Command::Selfsimilar { alpha, sigma0, dsigma0, t_end, tol, compare, n_cells, dt, out: csv } => {
            let sol = integrate_sigma(alpha, sigma0, dsigma0, t_end, tol)?;
            let (sigma, dsigma) = sol.at(sol.t_end())?;
            let _ = writeln!(out, "gamma = {:.6}", sol.gamma);
            let _ = writeln!(out, "classification = {}", sol.classification.name());
            let _ = writeln!(out, "limit = {}", if sol.limit.is_finite() { format!("{:.6}", sol.limit) } else { "inf".into() });
            let _ = writeln!(out, "sigma({}) = {sigma:.6} (tol {tol:e})", sol.t_end());
            let _ = writeln!(out, "dsigma({}) = {dsigma:.6}", sol.t_end());
            if let Some(t) = sol.collapse {
                let _ = writeln!(out, "collapse at t = {t}");
            }
            if let Some(path) = csv {
                write_text(&path, &sigma_csv(&sol))?;
            }
            if !compare {
                return Ok(if sol.collapse.is_some() { 1 } else { 0 });
            }
            let cmp = compare_with_pde(&sol, n_cells, dt, 1.0, &StepOptions::default())?;
            let pass = cmp.sup_error <= 1e-2;
            let _ = writeln!(
                out,
                "{} PDE tracking: sup |eta - sigma x| = {:.6e}, limit 1.0e-2 (n = {n_cells}, dt = {dt}, stretch spread {:.3e})",
                if pass { "PASS" } else { "FAIL" },
                cmp.sup_error,
                cmp.stretch_spread
            );
            Ok(if pass { 0 } else { 1 })
        }
    }
}

/// Parses `args` and runs the command, writing human-readable output to `out`.
/// Returns the exit status.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if code == 0 { write!(out, "{e}") } else { write!(err, "{e}") };
            return code;
        }
    };
    match execute(cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            2
        }
    }
}
