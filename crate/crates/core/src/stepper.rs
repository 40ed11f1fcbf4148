//! Time integration for the three flow kinds and the adaptive driver.
//!
//! One step is split as: velocity (implicit viscous solve), flow map
//! (`eta += dt * v`), then temperature (implicit heat solve, NSF only).
//!
//! The viscous flux across cell `j` is `mu_j (v_{j+1} - v_j) / (h ell_j)`.
//! With [`StretchCoupling::Frozen`] the stretch `ell_j` is the old `eta_x`.
//! With [`StretchCoupling::LogMean`] it is the logarithmic mean of the old and
//! new stretch, found by Picard iteration; then `dt * flux = mu log(new/old)`
//! holds exactly, so the discrete solution satisfies the integrated
//! momentum/stretch identity with no time-discretization error.

use thiserror::Error;

use crate::diagnostics::{self, AprioriMonitor, DiagnosticsRecord};
use crate::discretize::{assemble_diffusion, cells_to_interior_nodes, flux_divergence, log_mean, node_masses, TridiagonalSystem};
use crate::error::Error;
use crate::io::config::RunConfig;
use crate::model::{build_initial_data, normalize_momentum, FlowKind, Grid, InitialData, LagrangianState, Params};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeScheme {
    BackwardEuler,
    CrankNicolson,
}

impl TimeScheme {
    pub fn name(self) -> &'static str {
        match self {
            TimeScheme::BackwardEuler => "backward-euler",
            TimeScheme::CrankNicolson => "crank-nicolson",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "backward-euler" => Some(TimeScheme::BackwardEuler),
            "crank-nicolson" => Some(TimeScheme::CrankNicolson),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StretchCoupling {
    LogMean,
    Frozen,
}

impl StretchCoupling {
    pub fn name(self) -> &'static str {
        match self {
            StretchCoupling::LogMean => "log-mean",
            StretchCoupling::Frozen => "frozen",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "log-mean" => Some(StretchCoupling::LogMean),
            "frozen" => Some(StretchCoupling::Frozen),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOptions {
    pub scheme: TimeScheme,
    pub coupling: StretchCoupling,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    /// Undershoot below `-theta_warn_rel * max(theta)` is reported.
    pub theta_warn_rel: f64,
    /// Undershoot below `-theta_reject_rel * max(theta)` rejects the step.
    pub theta_reject_rel: f64,
}

impl Default for StepOptions {
    fn default() -> Self {
        StepOptions {
            scheme: TimeScheme::BackwardEuler,
            coupling: StretchCoupling::LogMean,
            picard_tol: 1e-13,
            picard_max_iter: 100,
            theta_warn_rel: 1e-10,
            theta_reject_rel: 1e-6,
        }
    }
}

/// External body forces, used for manufactured solutions. Both terms are
/// densities per unit reference length added to the right-hand side of the
/// momentum and temperature equations.
pub trait Forcing: Sync {
    fn momentum(&self, x: f64, t: f64) -> f64;

    fn heat(&self, _x: f64, _t: f64) -> f64 {
        0.0
    }
}

/// Reasons a step is refused. All of them ask the driver for a smaller `dt`
/// except [`StepError::Invalid`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepError {
    #[error("stretch would become {value} at cell {cell}")]
    Stretch { cell: usize, value: f64 },
    #[error("temperature undershoot {value} at node {node}")]
    Temperature { node: usize, value: f64 },
    #[error("stretch iteration did not converge in {iterations} sweeps")]
    NoConvergence { iterations: usize },
    #[error(transparent)]
    Invalid(#[from] Error),
}

impl StepError {
    pub fn is_recoverable(&self) -> bool {
        !matches!(self, StepError::Invalid(_))
    }
}

/// By-products of an accepted step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepReport {
    /// `dt * sum_j h mu_j vx_j^2 / ell_j` at the level used by the scheme.
    pub dissipation: f64,
    pub picard_iterations: usize,
    /// Smallest temperature if it dipped below the warning threshold.
    pub theta_undershoot: Option<f64>,
    /// `dt` times the net heat flux through the two ends (never positive
    /// while the temperature is non-negative).
    pub boundary_heat: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub state: LagrangianState,
    pub report: StepReport,
}

struct VelocityUpdate {
    v_new: Vec<f64>,
    /// Velocity used in the flux and the flow-map update.
    v_flux: Vec<f64>,
    conductance: Vec<f64>,
    iterations: usize,
}

fn check_stretch(eta_x: &[f64]) -> Result<(), StepError> {
    match eta_x.iter().enumerate().find(|(_, &e)| !(e > 0.0)) {
        Some((cell, &value)) => Err(StepError::Stretch { cell, value }),
        None => Ok(()),
    }
}

#[allow(clippy::too_many_arguments)]
fn velocity_substep(
    state: &LagrangianState,
    masses: &[f64],
    mu: &[f64],
    pressure: &[f64],
    source: &[f64],
    dt: f64,
    grid: &Grid,
    opts: &StepOptions,
) -> Result<VelocityUpdate, StepError> {
    let n = grid.n_cells();
    let h = grid.h();
    let half = matches!(opts.scheme, TimeScheme::CrankNicolson);
    let mut ell = state.eta_x.clone();
    let mut prev: Option<Vec<f64>> = None;
    let vmax = state.v.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let max_iter = match opts.coupling {
        StretchCoupling::Frozen => 1,
        StretchCoupling::LogMean => opts.picard_max_iter,
    };
    for iteration in 1..=max_iter {
        let conductance: Vec<f64> = (0..n).map(|j| mu[j] / (h * ell[j])).collect();
        // Solved for the increment v_new - v_old, so that modes the operator
        // annihilates (constants) are carried over without round-off.
        let mut rhs = flux_divergence(&conductance, &state.v);
        rhs.iter_mut().zip(source).for_each(|(r, s)| *r += s);
        for (j, p) in pressure.iter().enumerate() {
            rhs[j] -= p;
            rhs[j + 1] += p;
        }
        let system = if half {
            let half_c: Vec<f64> = conductance.iter().map(|c| 0.5 * c).collect();
            assemble_diffusion(masses, &half_c, dt, rhs)
        } else {
            assemble_diffusion(masses, &conductance, dt, rhs)
        };
        let increment = system.solve()?;
        let v_new: Vec<f64> = state.v.iter().zip(&increment).map(|(v, d)| v + d).collect();
        let v_flux: Vec<f64> = if half {
            v_new.iter().zip(&state.v).map(|(a, b)| 0.5 * (a + b)).collect()
        } else {
            v_new.clone()
        };
        let converged = match (&prev, opts.coupling) {
            (_, StretchCoupling::Frozen) => true,
            (None, _) => false,
            (Some(p), _) => {
                let scale = v_new.iter().fold(vmax, |m, v| m.max(v.abs()));
                let change = p.iter().zip(&v_new).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
                change <= opts.picard_tol * scale || scale == 0.0
            }
        };
        if converged {
            return Ok(VelocityUpdate { v_new, v_flux, conductance, iterations: iteration });
        }
        for j in 0..n {
            let a = state.eta_x[j];
            let b = a + dt * (v_flux[j + 1] - v_flux[j]) / h;
            if !(b > 0.0) {
                return Err(StepError::Stretch { cell: j, value: b });
            }
            ell[j] = log_mean(a, b);
        }
        prev = Some(v_new);
    }
    Err(StepError::NoConvergence { iterations: max_iter })
}

fn advance_flow_map(state: &LagrangianState, v_flux: &[f64], dt: f64, grid: &Grid) -> Result<(Vec<f64>, Vec<f64>), StepError> {
    let eta: Vec<f64> = state.eta.iter().zip(v_flux).map(|(e, v)| e + dt * v).collect();
    let h = grid.h();
    let eta_x: Vec<f64> = eta.windows(2).map(|w| (w[1] - w[0]) / h).collect();
    check_stretch(&eta_x)?;
    Ok((eta, eta_x))
}

fn forcing_nodes(grid: &Grid, forcing: Option<&dyn Forcing>, t: f64, heat: bool) -> Vec<f64> {
    let h = grid.h();
    let n = grid.n_cells();
    match forcing {
        None => vec![0.0; n + 1],
        Some(f) => grid
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let w = if i == 0 || i == n { 0.5 * h } else { h };
                w * if heat { f.heat(x, t) } else { f.momentum(x, t) }
            })
            .collect(),
    }
}

/// Advances any flow kind by `dt`, with optional body forces.
pub fn step_forced(
    state: &LagrangianState,
    data: &InitialData,
    params: &Params,
    grid: &Grid,
    dt: f64,
    opts: &StepOptions,
    forcing: Option<&dyn Forcing>,
) -> Result<Step, StepError> {
    params.validate()?;
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")).into());
    }
    let n = grid.n_cells();
    let h = grid.h();
    check_stretch(&state.eta_x)?;
    let masses = node_masses(&data.rho0, grid);
    let mu = params.cell_viscosity(&data.rho0, &state.eta_x);
    let t_force = match opts.scheme {
        TimeScheme::BackwardEuler => state.t + dt,
        TimeScheme::CrankNicolson => state.t + 0.5 * dt,
    };

    let pscale = params.pressure_scale();
    let theta_old = match (params.flow_kind, &state.theta) {
        (FlowKind::Nsf, Some(th)) => Some(th),
        (FlowKind::Nsf, None) => return Err(Error::MissingField("theta").into()),
        _ => None,
    };
    let pressure: Vec<f64> = match theta_old {
        Some(th) => (0..n)
            .map(|j| pscale * data.rho0[j] * 0.5 * (th[j] + th[j + 1]) / state.eta_x[j])
            .collect(),
        None => vec![0.0; n],
    };

    let source = forcing_nodes(grid, forcing, t_force, false);
    let update = velocity_substep(state, &masses, &mu, &pressure, &source, dt, grid, opts)?;
    let (eta, eta_x) = advance_flow_map(state, &update.v_flux, dt, grid)?;

    let jumps: Vec<f64> = update.v_flux.windows(2).map(|w| w[1] - w[0]).collect();
    let heating: Vec<f64> = jumps.iter().zip(&update.conductance).map(|(d, c)| c * d * d).collect();
    let dissipation = dt * heating.iter().sum::<f64>();

    let mut report = StepReport {
        dissipation,
        picard_iterations: update.iterations,
        ..StepReport::default()
    };

    let theta = match theta_old {
        None => None,
        Some(th) => {
            // Cell integrals of viscous heating minus compression work.
            let cell_sources: Vec<f64> = (0..n).map(|j| heating[j] - pressure[j] * jumps[j]).collect();
            let mut rhs = cells_to_interior_nodes(&cell_sources);
            let heat_force = forcing_nodes(grid, forcing, state.t + dt, true);
            for i in 1..n {
                rhs[i] += masses[i] / dt * th[i] + heat_force[i];
            }
            let conductance: Vec<f64> = eta_x.iter().map(|e| params.kappa / (h * e)).collect();
            let mut system: TridiagonalSystem = assemble_diffusion(&masses, &conductance, dt, rhs);
            for i in [0, n] {
                system.diag[i] = 1.0;
                system.sub[i] = 0.0;
                system.sup[i] = 0.0;
                system.rhs[i] = 0.0;
            }
            let th_new = system.solve()?;
            let tmax = th_new.iter().fold(0.0_f64, |m, t| m.max(*t));
            if let Some((node, &value)) = th_new
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
            {
                if value < -opts.theta_reject_rel * tmax || (tmax == 0.0 && value < 0.0) {
                    return Err(StepError::Temperature { node, value });
                }
                if value < -opts.theta_warn_rel * tmax {
                    report.theta_undershoot = Some(value);
                }
            }
            report.boundary_heat = dt * (conductance[n - 1] * (0.0 - th_new[n - 1]) - conductance[0] * th_new[1]);
            Some(th_new)
        }
    };

    Ok(Step {
        state: LagrangianState {
            t: state.t + dt,
            eta,
            eta_x,
            v: update.v_new,
            theta,
        },
        report,
    })
}

fn require_kind(params: &Params, kind: FlowKind) -> Result<(), StepError> {
    if params.flow_kind != kind {
        return Err(Error::InvalidParameter(format!(
            "expected flow kind {}, got {}",
            kind.name(),
            params.flow_kind.name()
        ))
        .into());
    }
    Ok(())
}

/// One step of pressureless flow with constant viscosity.
pub fn step_pressureless(
    state: &LagrangianState,
    data: &InitialData,
    params: &Params,
    grid: &Grid,
    dt: f64,
    opts: &StepOptions,
) -> Result<Step, StepError> {
    require_kind(params, FlowKind::Pressureless)?;
    step_forced(state, data, params, grid, dt, opts, None)
}

/// One split step of the NSF system.
pub fn step_nsf(
    state: &LagrangianState,
    data: &InitialData,
    params: &Params,
    grid: &Grid,
    dt: f64,
    opts: &StepOptions,
) -> Result<Step, StepError> {
    require_kind(params, FlowKind::Nsf)?;
    step_forced(state, data, params, grid, dt, opts, None)
}

/// One step with viscosity `(rho0 / eta_x)^alpha` lagged at the old state.
pub fn step_degenerate(
    state: &LagrangianState,
    data: &InitialData,
    params: &Params,
    grid: &Grid,
    dt: f64,
    opts: &StepOptions,
) -> Result<Step, StepError> {
    require_kind(params, FlowKind::Degenerate)?;
    step_forced(state, data, params, grid, dt, opts, None)
}

/// Step-size bounds for the adaptive driver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub cfl_coeff: f64,
    pub t_end: f64,
}

impl StepControl {
    pub fn validate(&self) -> crate::Result<()> {
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt_init && self.dt_init <= self.dt_max) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < dt_min <= dt_init <= dt_max, got {} / {} / {}",
                self.dt_min, self.dt_init, self.dt_max
            )));
        }
        if !(self.cfl_coeff > 0.0 && self.cfl_coeff <= 1.0) {
            return Err(Error::InvalidParameter(format!("cfl_coeff must lie in (0, 1], got {}", self.cfl_coeff)));
        }
        if !(self.t_end >= 0.0) {
            return Err(Error::InvalidParameter(format!("t_end must be >= 0, got {}", self.t_end)));
        }
        Ok(())
    }

    /// `cfl / max |v_x / eta_x|` clamped to `[dt_min, dt_max]`.
    pub fn propose(&self, state: &LagrangianState, grid: &Grid) -> f64 {
        let h = grid.h();
        let rate = state
            .v
            .windows(2)
            .zip(&state.eta_x)
            .fold(0.0_f64, |m, (w, e)| m.max(((w[1] - w[0]) / (h * e)).abs()));
        if rate > 0.0 {
            (self.cfl_coeff / rate).clamp(self.dt_min, self.dt_max)
        } else {
            self.dt_max
        }
    }
}

/// Something noteworthy that happened during a run.
#[derive(Debug, Clone, PartialEq)]
pub enum RunEvent {
    Rejected { t: f64, dt: f64, reason: String },
    TemperatureUndershoot { t: f64, value: f64 },
    AprioriExceeded { t: f64, value: f64 },
    Aborted { t: f64, reason: String },
}

/// Per-accepted-step scalars, cheap enough to keep for every step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSample {
    pub t: f64,
    pub dt: f64,
    pub kinetic: f64,
    pub thermal: f64,
    pub momentum: f64,
    /// Running sum of the per-step dissipation.
    pub dissipated: f64,
    /// Running sum of the boundary heat flux (non-positive).
    pub boundary_heat: f64,
    pub etax_min: f64,
    pub etax_max: f64,
    pub picard_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunOutcome {
    Completed,
    Aborted { t: f64, reason: String },
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: Grid,
    pub params: Params,
    pub data: InitialData,
    pub records: Vec<DiagnosticsRecord>,
    pub steps: Vec<StepSample>,
    pub events: Vec<RunEvent>,
    pub snapshots: Vec<LagrangianState>,
    pub final_state: LagrangianState,
    pub outcome: RunOutcome,
}

impl Trajectory {
    pub fn completed(&self) -> bool {
        self.outcome == RunOutcome::Completed
    }
}

/// Builds the grid, parameters and (momentum-normalized) initial data of a config.
pub fn setup(config: &RunConfig) -> crate::Result<(Grid, Params, InitialData)> {
    let grid = Grid::new(config.n_cells)?;
    let params = config.params();
    let data = build_initial_data(&config.profile, &grid, &params)?;
    let data = if config.normalize { normalize_momentum(&data, &grid)? } else { data };
    Ok((grid, params, data))
}

/// Runs a config from t = 0 to `t_end`.
pub fn run(config: &RunConfig) -> crate::Result<Trajectory> {
    run_observed(config, |_, _| {})
}

/// Like [`run`], calling `observer` after every accepted step.
pub fn run_observed<F>(config: &RunConfig, mut observer: F) -> crate::Result<Trajectory>
where
    F: FnMut(&LagrangianState, &StepReport),
{
    config.validate()?;
    let (grid, params, data) = setup(config)?;
    let control = config.control;
    let opts = config.step_options();
    let mut state = LagrangianState::initial(&data, &grid, &params);
    let masses = node_masses(&data.rho0, &grid);

    let mut monitor = (params.flow_kind == FlowKind::Nsf).then(|| AprioriMonitor::new(grid.n_nodes()));
    let mut records = vec![diagnostics::record(&state, &data, &params, &grid, None, monitor.as_ref())];
    let mut events = Vec::new();
    let mut snapshots = Vec::new();
    if config.snapshot_every > 0 {
        snapshots.push(state.clone());
    }
    let sample = |s: &LagrangianState, dt: f64, dissipated: f64, boundary_heat: f64, iters: usize| {
        let kinetic = 0.5 * masses.iter().zip(&s.v).map(|(m, v)| m * v * v).sum::<f64>();
        let momentum = masses.iter().zip(&s.v).map(|(m, v)| m * v).sum::<f64>();
        let thermal = s
            .theta
            .as_ref()
            .map_or(0.0, |th| masses.iter().zip(th).map(|(m, t)| m * t).sum::<f64>());
        let (etax_min, etax_max) = s
            .eta_x
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &e| (a.min(e), b.max(e)));
        StepSample {
            t: s.t,
            dt,
            kinetic,
            thermal,
            momentum,
            dissipated,
            boundary_heat,
            etax_min,
            etax_max,
            picard_iterations: iters,
        }
    };
    let mut steps = vec![sample(&state, 0.0, 0.0, 0.0, 0)];
    let mut dissipated = 0.0;
    let mut boundary_heat = 0.0;
    let mut step_count = 0usize;
    let mut flagged = false;
    let mut outcome = RunOutcome::Completed;
    let mut first = true;
    // Relative slack when deciding that the end time has been reached.
    let t_eps = 1e-12 * control.t_end.max(1.0);

    while control.t_end - state.t > t_eps {
        let remaining = control.t_end - state.t;
        let mut dt = if first {
            control.dt_init.min(control.propose(&state, &grid))
        } else {
            control.propose(&state, &grid)
        };
        first = false;
        let accepted = loop {
            let trial = dt.min(remaining);
            match step_forced(&state, &data, &params, &grid, trial, &opts, None) {
                Ok(step) => break Some(step),
                Err(e) if e.is_recoverable() => {
                    events.push(RunEvent::Rejected { t: state.t, dt: trial, reason: e.to_string() });
                    dt = 0.5 * trial;
                    if dt < control.dt_min {
                        break None;
                    }
                }
                Err(StepError::Invalid(e)) => return Err(e),
                Err(e) => unreachable!("unrecoverable step error {e}"),
            }
        };
        let Some(step) = accepted else {
            let reason = format!("dt fell below dt_min = {} with persistent rejection", control.dt_min);
            events.push(RunEvent::Aborted { t: state.t, reason: reason.clone() });
            outcome = RunOutcome::Aborted { t: state.t, reason };
            break;
        };
        let dt_used = step.state.t - state.t;
        if let Some(value) = step.report.theta_undershoot {
            events.push(RunEvent::TemperatureUndershoot { t: step.state.t, value });
        }
        if let (Some(m), Some(th)) = (monitor.as_mut(), step.state.theta.as_ref()) {
            m.accumulate(&masses, &grid, th, dt_used, &params);
            if !flagged && m.value() > 1.0 {
                flagged = true;
                events.push(RunEvent::AprioriExceeded { t: step.state.t, value: m.value() });
            }
        }
        dissipated += step.report.dissipation;
        boundary_heat += step.report.boundary_heat;
        step_count += 1;
        observer(&step.state, &step.report);
        steps.push(sample(&step.state, dt_used, dissipated, boundary_heat, step.report.picard_iterations));
        let last = control.t_end - step.state.t <= t_eps;
        if step_count % config.record_every == 0 || last {
            records.push(diagnostics::record(&step.state, &data, &params, &grid, Some(&state), monitor.as_ref()));
        }
        if config.snapshot_every > 0 && (step_count % config.snapshot_every == 0 || last) {
            snapshots.push(step.state.clone());
        }
        state = step.state;
    }

    Ok(Trajectory {
        grid,
        params,
        data,
        records,
        steps,
        events,
        snapshots,
        final_state: state,
        outcome,
    })
}
