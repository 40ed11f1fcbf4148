//! The verification checklist run by `stickyflow verify`.
//!
//! Each check compares one measured quantity with a limit. Checks that do not
//! apply to a configuration are reported as skipped.

use std::fmt;

use crate::diagnostics::{etax_envelope, fit_decay_rate, nsf_energy_functional, terminal_domain, DiagnosticsRecord};
use crate::error::Result;
use crate::io::RunConfig;
use crate::model::{DensityProfile, FlowKind, VelocityProfile};
use crate::selfsimilar::{integrate_sigma, DEFAULT_TOL};
use crate::stepper::{run_observed, TimeScheme, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

impl Status {
    pub fn label(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub status: Status,
    pub measured: f64,
    pub limit: f64,
    pub detail: String,
}

impl Check {
    /// Passes when `measured <= limit`.
    pub fn at_most(name: &'static str, measured: f64, limit: f64, detail: impl Into<String>) -> Check {
        let status = if measured <= limit { Status::Pass } else { Status::Fail };
        Check { name, status, measured, limit, detail: detail.into() }
    }

    /// Passes when `measured >= limit`.
    pub fn at_least(name: &'static str, measured: f64, limit: f64, detail: impl Into<String>) -> Check {
        let status = if measured >= limit { Status::Pass } else { Status::Fail };
        Check { name, status, measured, limit, detail: detail.into() }
    }

    pub fn skip(name: &'static str, detail: impl Into<String>) -> Check {
        Check { name, status: Status::Skip, measured: f64::NAN, limit: f64::NAN, detail: detail.into() }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.status == Status::Skip {
            return write!(f, "{} {}: {}", self.status.label(), self.name, self.detail);
        }
        write!(f, "{} {}: measured {:.6e}, limit {:.6e}", self.status.label(), self.name, self.measured, self.limit)?;
        if !self.detail.is_empty() {
            write!(f, " ({})", self.detail)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| c.status == Status::Fail).count()
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

pub struct Verification {
    pub report: Report,
    pub trajectory: Trajectory,
}

fn momentum_check(traj: &Trajectory) -> Check {
    let masses = crate::discretize::node_masses(&traj.data.rho0, &traj.grid);
    let scale: f64 = masses.iter().zip(&traj.data.v0).map(|(m, v)| m * v.abs()).sum();
    let p0 = traj.steps[0].momentum;
    let drift = traj.steps.iter().fold(0.0_f64, |m, s| m.max((s.momentum - p0).abs()));
    let rel = if scale > 0.0 { drift / scale } else { drift };
    Check::at_most("momentum drift", rel, 1e-12, "relative to int rho0 |v0|")
}

fn kinetic_monotone(traj: &Trajectory) -> Check {
    let worst = traj.steps.windows(2).fold(0.0_f64, |m, w| {
        let rise = w[1].kinetic - w[0].kinetic;
        m.max(if w[0].kinetic > 0.0 { rise / w[0].kinetic } else { rise })
    });
    let slack = crate::diagnostics::summation_tolerance(traj.grid.n_cells() + 1);
    Check::at_most("kinetic energy non-increasing", worst, slack, "largest relative rise per step, limit is summation round-off")
}

fn envelope_check(traj: &Trajectory) -> Check {
    let c1 = etax_envelope(&traj.data, &traj.params, &traj.grid);
    let violations = traj
        .steps
        .iter()
        .filter(|s| s.etax_min < 1.0 / c1 || s.etax_max > c1)
        .count();
    Check::at_most("eta_x envelope", violations as f64, 0.0, format!("violations of [1/c1, c1], c1 = {c1:.6}"))
}

fn decay_checks(traj: &Trajectory, checks: &mut Vec<Check>) {
    let t_end = traj.final_state.t;
    if traj.steps[0].kinetic == 0.0 {
        checks.push(Check::at_least("decay rates positive", 0.0, 0.0, "fluid at rest"));
        return;
    }
    let window = (2.0_f64.min(0.1 * t_end), 20.0_f64.min(t_end));
    type Series = fn(&DiagnosticsRecord) -> f64;
    let series: [(&str, Series); 3] = [
        ("int rho0 v^2", |r| 2.0 * r.kinetic),
        ("||v_x||^2", |r| r.h1_v * r.h1_v),
        ("int rho0 v_t^2", |r| r.l2_vt),
    ];
    let mut slowest = f64::INFINITY;
    let mut names = Vec::new();
    for (name, f) in series {
        let points: Vec<(f64, f64)> = traj.records.iter().map(|r| (r.t, f(r))).collect();
        match fit_decay_rate(&points, window) {
            Ok(rate) => {
                slowest = slowest.min(rate);
                names.push(format!("{name} {rate:.4}"));
            }
            Err(e) => {
                checks.push(Check::skip("decay rates positive", format!("{name}: {e}")));
                return;
            }
        }
    }
    checks.push(Check::at_least(
        "decay rates positive",
        slowest,
        f64::MIN_POSITIVE,
        format!("on [{}, {}]: {}", window.0, window.1, names.join(", ")),
    ));
}

fn h2_bounded(traj: &Trajectory) -> Check {
    let early = traj.records.iter().filter(|r| r.t <= 1.0).fold(0.0_f64, |m, r| m.max(r.h2_eta));
    let all = traj.records.iter().fold(0.0_f64, |m, r| m.max(r.h2_eta));
    Check::at_most("||eta_xx|| bounded", all, 2.0 * early, "sup over run vs twice the max on [0, 1]")
}

fn pressureless_checks(config: &RunConfig, traj: &Trajectory, checks: &mut Vec<Check>) {
    let residual = traj
        .records
        .iter()
        .filter_map(|r| r.log_identity_residual)
        .fold(0.0_f64, f64::max);
    checks.push(Check::at_most("log identity", residual, 5e-4, "sup over records"));
    checks.push(envelope_check(traj));

    let k0 = traj.steps[0].kinetic;
    let last = traj.steps.last().expect("nonempty");
    if config.scheme == TimeScheme::CrankNicolson {
        let residual = (last.kinetic + last.dissipated - k0).abs();
        let rel = if k0 > 0.0 { residual / k0 } else { residual };
        checks.push(Check::at_most("energy budget", rel, 1e-6, "relative to the initial kinetic energy"));
    } else {
        checks.push(Check::skip(
            "energy budget",
            "backward Euler dissipates O(dt) numerically; use scheme = crank-nicolson",
        ));
    }

    let target = terminal_domain(&traj.data, &traj.params, &traj.grid);
    if last.kinetic <= 1e-16 * k0.max(f64::MIN_POSITIVE) || k0 == 0.0 {
        let rel = (traj.final_state.domain_length() - target).abs() / target;
        checks.push(Check::at_most("terminal domain", rel, 1e-3, format!("limit {target:.10}")));
    } else {
        checks.push(Check::skip("terminal domain", format!("kinetic energy {:.3e} has not settled", last.kinetic)));
    }
    decay_checks(traj, checks);
    checks.push(h2_bounded(traj));
}

fn nsf_checks(config: &RunConfig, traj: &Trajectory, checks: &mut Vec<Check>) {
    let monitor = traj.records.iter().filter_map(|r| r.apriori_nsf).fold(0.0_f64, f64::max);
    checks.push(Check::at_most("a priori monitor", monitor, 1.0, "sup of (1/(mu M^2)) int rho0 Theta"));

    let e0 = traj.steps[0].kinetic + traj.steps[0].thermal;
    let worst = traj.steps.windows(2).fold(0.0_f64, |m, w| {
        m.max((w[1].kinetic + w[1].thermal) - (w[0].kinetic + w[0].thermal))
    });
    let rel = if e0 > 0.0 { worst / e0 } else { worst };
    checks.push(Check::at_most("total energy non-increasing", rel, 1e-6, "largest rise per step relative to E0"));

    let bracket: Vec<(f64, f64)> = traj
        .records
        .iter()
        .map(|r| (r.t, 2.0 * r.kinetic + r.l2_vt + r.thermal_sq.unwrap_or(0.0) + r.l2_thetat.unwrap_or(0.0)))
        .collect();
    let t_end = traj.final_state.t;
    let frak_c1 = match config.frak_c1 {
        Some(c) => Ok(c),
        None => fit_decay_rate(&bracket, (0.1 * t_end, t_end)).map(|c2| 0.5 * c2.max(0.0)),
    };
    match frak_c1.and_then(|c| nsf_energy_functional(&traj.records, c).map(|e| (c, e))) {
        Ok((c, e)) => {
            let limit = config.bound_factor * (e.initial + e.initial.powi(3));
            checks.push(Check::at_most("NSF energy functional", e.sup, limit, format!("frak_c1 = {c:.6}")));
        }
        Err(err) => checks.push(Check::skip("NSF energy functional", err.to_string())),
    }
}

/// Self-similar data: self-similar density with `v0 = s x`.
fn self_similar_slope(config: &RunConfig) -> Option<f64> {
    match (&config.profile.density, &config.profile.velocity) {
        (DensityProfile::SelfSimilar { .. }, VelocityProfile::Polynomial(c))
            if c.len() == 2 && c[0] == 0.0 =>
        {
            Some(c[1])
        }
        _ => None,
    }
}

/// Runs `config` and evaluates every applicable check.
pub fn verify(config: &RunConfig) -> Result<Verification> {
    let slope = (config.flow_kind == FlowKind::Degenerate).then(|| self_similar_slope(config)).flatten();
    let sigma = match slope {
        Some(s) => Some(integrate_sigma(config.alpha, 1.0, s, config.control.t_end, DEFAULT_TOL)?),
        None => None,
    };
    let mut tracking = 0.0_f64;
    let nodes: Vec<f64> = crate::model::Grid::new(config.n_cells.max(2))?.nodes().to_vec();
    let trajectory = run_observed(config, |state, _| {
        if let Some(sol) = &sigma {
            if let Ok((s, _)) = sol.at(state.t.min(sol.t_end())) {
                let err = state.eta.iter().zip(&nodes).fold(0.0_f64, |m, (e, x)| m.max((e - s * x).abs()));
                tracking = tracking.max(err);
            }
        }
    })?;

    let mut checks = vec![Check::at_least(
        "run completed",
        if trajectory.completed() { 1.0 } else { 0.0 },
        1.0,
        match &trajectory.outcome {
            crate::stepper::RunOutcome::Completed => String::new(),
            crate::stepper::RunOutcome::Aborted { t, reason } => format!("aborted at t = {t}: {reason}"),
        },
    )];
    checks.push(momentum_check(&trajectory));
    checks.push(kinetic_monotone(&trajectory));
    match config.flow_kind {
        FlowKind::Pressureless => pressureless_checks(config, &trajectory, &mut checks),
        FlowKind::Nsf => nsf_checks(config, &trajectory, &mut checks),
        FlowKind::Degenerate => {
            if sigma.is_some() {
                checks.push(Check::at_most("self-similar tracking", tracking, 1e-2, "sup |eta - sigma(t) x|"));
            } else {
                checks.push(Check::skip("self-similar tracking", "profile is not self-similar data"));
            }
        }
    }
    Ok(Verification { report: Report { checks }, trajectory })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::parse_config;

    #[test]
    fn stationary_config_passes() {
        let config = parse_config("profile = stationary\n[grid]\nn_cells = 32\n[time]\nt_end = 1\n").unwrap();
        let v = verify(&config).unwrap();
        assert!(v.report.passed(), "{}", v.report);
        assert!(v.report.checks.iter().filter(|c| c.name != "energy budget").all(|c| c.status == Status::Pass), "{}", v.report);
    }

    #[test]
    fn report_lines() {
        let c = Check::at_most("x", 2.0, 1.0, "");
        assert_eq!(c.to_string(), "FAIL x: measured 2.000000e0, limit 1.000000e0");
        let r = Report { checks: vec![c, Check::skip("y", "n/a")] };
        assert!(!r.passed());
        assert_eq!(r.failures(), 1);
    }
}
