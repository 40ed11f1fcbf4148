//! Energies, norms, identity residuals and decay estimates evaluated on
//! discrete states.
//!
//! Quadrature follows the staggering: node fields are integrated with the
//! lumped node masses (trapezoid weights), cell fields with the midpoint rule.

use crate::discretize::{grad_node_to_cell, node_masses};
use crate::error::{Error, Result};
use crate::model::{node_density, FlowKind, Grid, InitialData, LagrangianState, Params};

/// Scalars recorded along a trajectory. Fields that do not apply to the flow
/// kind are `None`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiagnosticsRecord {
    pub t: f64,
    /// `1/2 int rho0 v^2`.
    pub kinetic: f64,
    /// `int rho0 Theta`.
    pub thermal: Option<f64>,
    /// `int rho0 Theta^2`.
    pub thermal_sq: Option<f64>,
    /// `int rho0 v`.
    pub momentum: f64,
    /// `int eta_x`, the physical domain length.
    pub domain_size: f64,
    pub etax_min: f64,
    pub etax_max: f64,
    pub log_identity_residual: Option<f64>,
    /// `||v_x||_{L2}`.
    pub h1_v: f64,
    /// `||v_x||_{Linf}`.
    pub linf_vx: f64,
    /// `||Theta_x||_{L2}`.
    pub h1_theta: Option<f64>,
    /// `int rho0 v_t^2`.
    pub l2_vt: f64,
    /// `int rho0 Theta_t^2`.
    pub l2_thetat: Option<f64>,
    /// `||eta_xx||_{L2}`.
    pub h2_eta: f64,
    /// `||v_xx||_{L2}`.
    pub h2_v: f64,
    /// `sup_x (1/(mu M^2)) int_0^t rho0 Theta ds`.
    pub apriori_nsf: Option<f64>,
    /// `||v_xt||_{L2}^2`, not part of the CSV schema.
    pub h1_vt_sq: f64,
    /// `||Theta_xt||_{L2}^2`, not part of the CSV schema.
    pub h1_thetat_sq: Option<f64>,
}

fn l2_cells(values: &[f64], h: f64) -> f64 {
    (h * values.iter().map(|v| v * v).sum::<f64>()).sqrt()
}

/// `||f_xx||_{L2}` from cell values of `f_x`, using the interior nodes.
fn l2_second_difference(cell_values: &[f64], h: f64) -> f64 {
    let s: f64 = cell_values.windows(2).map(|w| ((w[1] - w[0]) / h).powi(2)).sum();
    (h * s).sqrt()
}

fn weighted_sq(masses: &[f64], f: &[f64]) -> f64 {
    masses.iter().zip(f).map(|(m, x)| m * x * x).sum()
}

/// Evaluates every diagnostic on `state`. Time derivatives are backward
/// differences against `prev`, or `data.v1`/`data.theta1` at t = 0.
pub fn record(
    state: &LagrangianState,
    data: &InitialData,
    params: &Params,
    grid: &Grid,
    prev: Option<&LagrangianState>,
    apriori: Option<&AprioriMonitor>,
) -> DiagnosticsRecord {
    let h = grid.h();
    let masses = node_masses(&data.rho0, grid);
    let vx = grad_node_to_cell(&state.v, grid).expect("state matches grid");
    let (etax_min, etax_max) = state
        .eta_x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &e| (a.min(e), b.max(e)));

    let backward = |now: &[f64], before: &[f64], dt: f64| -> Vec<f64> {
        now.iter().zip(before).map(|(a, b)| (a - b) / dt).collect()
    };
    let vt = match prev {
        Some(p) => backward(&state.v, &p.v, state.t - p.t),
        None => data.v1.clone(),
    };
    let vxt = grad_node_to_cell(&vt, grid).expect("state matches grid");

    let nsf = params.flow_kind == FlowKind::Nsf;
    let theta = state.theta.as_deref().filter(|_| nsf);
    let (thermal, thermal_sq, h1_theta, l2_thetat, h1_thetat_sq) = match theta {
        Some(th) => {
            let tt = match prev.and_then(|p| p.theta.as_deref()) {
                Some(before) => backward(th, before, state.t - prev.map_or(0.0, |p| p.t)),
                None => data.theta1.clone(),
            };
            let tx = grad_node_to_cell(th, grid).expect("state matches grid");
            let txt = grad_node_to_cell(&tt, grid).expect("state matches grid");
            (
                Some(masses.iter().zip(th).map(|(m, t)| m * t).sum()),
                Some(weighted_sq(&masses, th)),
                Some(l2_cells(&tx, h)),
                Some(weighted_sq(&masses, &tt)),
                Some(l2_cells(&txt, h).powi(2)),
            )
        }
        None => (None, None, None, None, None),
    };

    DiagnosticsRecord {
        t: state.t,
        kinetic: 0.5 * weighted_sq(&masses, &state.v),
        thermal,
        thermal_sq,
        momentum: masses.iter().zip(&state.v).map(|(m, v)| m * v).sum(),
        domain_size: h * state.eta_x.iter().sum::<f64>(),
        etax_min,
        etax_max,
        log_identity_residual: (params.flow_kind == FlowKind::Pressureless)
            .then(|| log_identity_residual(state, data, params, grid)),
        h1_v: l2_cells(&vx, h),
        linf_vx: vx.iter().fold(0.0, |m, v| m.max(v.abs())),
        h1_theta,
        l2_vt: weighted_sq(&masses, &vt),
        l2_thetat,
        h2_eta: l2_second_difference(&state.eta_x, h),
        h2_v: l2_second_difference(&vx, h),
        apriori_nsf: apriori.filter(|_| nsf).map(AprioriMonitor::value),
        h1_vt_sq: l2_cells(&vxt, h).powi(2),
        h1_thetat_sq,
    }
}

/// Trapezoid partial integrals `int_{-1}^{m_j} f dx` at every cell midpoint
/// `m_j`, from node values of `f`.
pub fn cumulative_trapezoid_to_midpoints(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len() - 1;
    let mut out = Vec::with_capacity(n);
    let mut to_node = 0.0;
    for j in 0..n {
        let mid = 0.5 * (f[j] + f[j + 1]);
        out.push(to_node + 0.25 * h * (f[j] + mid));
        to_node += 0.5 * h * (f[j] + f[j + 1]);
    }
    out
}

/// `sup_j |mu log eta_x - int_{-1}^{x} rho0 v(t) + int_{-1}^{x} rho0 v0|` over
/// cell midpoints. The identity holds exactly for the continuous problem.
pub fn log_identity_residual(state: &LagrangianState, data: &InitialData, params: &Params, grid: &Grid) -> f64 {
    let h = grid.h();
    let rho = node_density(&data.rho0);
    let now: Vec<f64> = rho.iter().zip(&state.v).map(|(r, v)| r * v).collect();
    let then: Vec<f64> = rho.iter().zip(&data.v0).map(|(r, v)| r * v).collect();
    let a = cumulative_trapezoid_to_midpoints(&now, h);
    let b = cumulative_trapezoid_to_midpoints(&then, h);
    state
        .eta_x
        .iter()
        .zip(a.iter().zip(&b))
        .map(|(e, (p, q))| (params.mu * e.ln() - p + q).abs())
        .fold(0.0, f64::max)
}

/// Two-sided bound `1/c1 <= eta_x <= c1` implied by the pointwise identity and
/// the energy inequality: `c1 = exp(2 (int rho0)^{1/2} (int rho0 v0^2)^{1/2} / mu)`.
pub fn etax_envelope(data: &InitialData, params: &Params, grid: &Grid) -> f64 {
    let masses = node_masses(&data.rho0, grid);
    let mass: f64 = masses.iter().sum();
    let energy = weighted_sq(&masses, &data.v0);
    (2.0 * mass.sqrt() * energy.sqrt() / params.mu).exp()
}

/// Limit of the domain length: `int_{-1}^{1} exp(-(1/mu) int_{-1}^{x} rho0 v0) dx`,
/// midpoint rule over cells with trapezoid partial integrals.
pub fn terminal_domain(data: &InitialData, params: &Params, grid: &Grid) -> f64 {
    let h = grid.h();
    let rho = node_density(&data.rho0);
    let f: Vec<f64> = rho.iter().zip(&data.v0).map(|(r, v)| r * v).collect();
    cumulative_trapezoid_to_midpoints(&f, h)
        .iter()
        .map(|p| h * (-p / params.mu).exp())
        .sum()
}

/// Relative size of the rounding error in a sum of `n_terms` nonnegative
/// floats, `2 (n_terms + 1) eps`. Changes of a summed energy below this are
/// indistinguishable from zero.
pub fn summation_tolerance(n_terms: usize) -> f64 {
    2.0 * (n_terms as f64 + 1.0) * f64::EPSILON
}

/// Least-squares decay rate: minus the slope of `ln(value)` against `t` over
/// samples with `t` in `window`.
pub fn fit_decay_rate(series: &[(f64, f64)], window: (f64, f64)) -> Result<f64> {
    let mut pts = Vec::new();
    for (index, &(t, value)) in series.iter().enumerate() {
        if t < window.0 || t > window.1 {
            continue;
        }
        if !(value > 0.0) {
            return Err(Error::NonPositiveSeries { index, value });
        }
        pts.push((t, value.ln()));
    }
    if pts.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least two samples in [{}, {}], found {}",
            window.0,
            window.1,
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(t, y)| (t - tm) * (y - ym)).sum();
    let sxx: f64 = pts.iter().map(|(t, _)| (t - tm).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("all samples share one time".into()));
    }
    Ok(-sxy / sxx)
}

/// Running `sup_x (1/(mu M^2)) int_0^t rho0 Theta ds`, rectangle rule per step.
#[derive(Debug, Clone, PartialEq)]
pub struct AprioriMonitor {
    integral: Vec<f64>,
    value: f64,
}

impl AprioriMonitor {
    pub fn new(n_nodes: usize) -> Self {
        AprioriMonitor { integral: vec![0.0; n_nodes], value: 0.0 }
    }

    /// Node densities are recovered from the lumped masses.
    pub fn accumulate(&mut self, masses: &[f64], grid: &Grid, theta: &[f64], dt: f64, params: &Params) {
        let h = grid.h();
        let last = masses.len() - 1;
        let rho: Vec<f64> = masses
            .iter()
            .enumerate()
            .map(|(i, m)| if i == 0 || i == last { 2.0 * m / h } else { m / h })
            .collect();
        self.accumulate_with_density(&rho, theta, dt, params);
    }

    /// Adds `dt * rho0_i * theta_i` at every node.
    pub fn accumulate_with_density(&mut self, rho_nodes: &[f64], theta: &[f64], dt: f64, params: &Params) {
        let scale = 1.0 / (params.mu * params.mach * params.mach);
        let mut sup: f64 = 0.0;
        for ((acc, r), th) in self.integral.iter_mut().zip(rho_nodes).zip(theta) {
            *acc += dt * r * th;
            sup = sup.max(*acc);
        }
        self.value = scale * sup;
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn exceeded(&self) -> bool {
        self.value > 1.0
    }
}

/// Time series of the weighted NSF energy functional.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyFunctional {
    pub series: Vec<(f64, f64)>,
    pub sup: f64,
    pub initial: f64,
}

impl EnergyFunctional {
    /// `sup_t E(t) <= bound_factor (E0 + E0^3)`.
    pub fn within_bound(&self, bound_factor: f64) -> bool {
        self.sup <= bound_factor * (self.initial + self.initial.powi(3))
    }
}

/// `E(t) = e^{c t} [int rho0 v^2 + int rho0 v_t^2 + int rho0 Theta^2 + int rho0 Theta_t^2]
///        + int_0^t e^{c s} [||v_x||^2 + ||v_xt||^2 + ||Theta_x||^2 + ||Theta_xt||^2] ds`,
/// with the time integral by the trapezoid rule over the records.
pub fn nsf_energy_functional(records: &[DiagnosticsRecord], frak_c1: f64) -> Result<EnergyFunctional> {
    let mut series = Vec::with_capacity(records.len());
    let mut integral = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for r in records {
        let thermal_sq = r.thermal_sq.ok_or(Error::MissingField("thermal_sq"))?;
        let l2_thetat = r.l2_thetat.ok_or(Error::MissingField("l2_thetat"))?;
        let h1_theta = r.h1_theta.ok_or(Error::MissingField("h1_theta"))?;
        let h1_thetat_sq = r.h1_thetat_sq.ok_or(Error::MissingField("h1_thetat_sq"))?;
        let weight = (frak_c1 * r.t).exp();
        let rate = weight * (r.h1_v * r.h1_v + r.h1_vt_sq + h1_theta * h1_theta + h1_thetat_sq);
        if let Some((t0, q0)) = prev {
            integral += 0.5 * (r.t - t0) * (q0 + rate);
        }
        prev = Some((r.t, rate));
        let instant = weight * (2.0 * r.kinetic + r.l2_vt + thermal_sq + l2_thetat);
        series.push((r.t, instant + integral));
    }
    let sup = series.iter().fold(0.0_f64, |m, p| m.max(p.1));
    let initial = series.first().map_or(0.0, |p| p.1);
    Ok(EnergyFunctional { series, sup, initial })
}

/// Smallest constant `C` with `int rho0 v^2 <= C int v_x^2` for every `v` of
/// zero weighted mean, from inverse power iteration on the discrete weighted
/// eigenproblem.
pub fn poincare_constant(rho0: &[f64], grid: &Grid) -> f64 {
    let masses = node_masses(rho0, grid);
    let h = grid.h();
    let total: f64 = masses.iter().sum();
    let project = |v: &mut Vec<f64>| {
        let mean = masses.iter().zip(v.iter()).map(|(m, x)| m * x).sum::<f64>() / total;
        v.iter_mut().for_each(|x| *x -= mean);
    };
    let mut v: Vec<f64> = grid.nodes().iter().map(|&x| x + 0.1 * x * x).collect();
    project(&mut v);
    let mut estimate = 0.0;
    for _ in 0..10_000 {
        // Solve K u = M v: the cell gradients are cumulative sums of M v.
        let f: Vec<f64> = masses.iter().zip(&v).map(|(m, x)| m * x).collect();
        let mut u = vec![0.0; v.len()];
        let mut g = 0.0;
        for j in 0..rho0.len() {
            g += f[j];
            u[j + 1] = u[j] + h * g;
        }
        project(&mut u);
        let num = weighted_sq(&masses, &u);
        let du = grad_node_to_cell(&u, grid).expect("grid sized");
        let den = h * du.iter().map(|d| d * d).sum::<f64>();
        let next = num / den;
        let norm = num.sqrt();
        v = u.iter().map(|x| x / norm).collect();
        if (next - estimate).abs() <= 1e-14 * next {
            return next;
        }
        estimate = next;
    }
    estimate
}

/// Fitted or derived constants for one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantsLedger {
    pub c1_envelope: f64,
    pub c2_fit: f64,
    pub frak_c1: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_initial_data, normalize_momentum, DensityProfile, Profile, TemperatureProfile, VelocityProfile};
    use crate::oracle::simpson;

    fn data_for(n: usize, params: Params, profile: Profile) -> (Grid, InitialData) {
        let grid = Grid::new(n).unwrap();
        let data = build_initial_data(&profile, &grid, &params).unwrap();
        let data = normalize_momentum(&data, &grid).unwrap();
        (grid, data)
    }

    #[test]
    fn initial_record_of_linear_compression() {
        let params = Params::pressureless(1.0);
        let (grid, data) = data_for(512, params, Profile::linear_compression());
        let s = LagrangianState::initial(&data, &grid, &params);
        let r = record(&s, &data, &params, &grid, None, None);
        // Trapezoid error for int x^2 is h^2 / 3.
        assert!((r.kinetic - 1.0 / 3.0).abs() < grid.h().powi(2));
        assert!(r.momentum.abs() < 1e-15);
        assert!((r.domain_size - 2.0).abs() < 1e-14);
        assert_eq!((r.etax_min, r.etax_max), (1.0, 1.0));
        assert_eq!(r.log_identity_residual, Some(0.0));
        assert!(r.thermal.is_none() && r.apriori_nsf.is_none());
    }

    #[test]
    fn stationary_record() {
        let params = Params::pressureless(1.0);
        let (grid, data) = data_for(16, params, Profile::stationary());
        let s = LagrangianState::initial(&data, &grid, &params);
        let r = record(&s, &data, &params, &grid, None, None);
        assert_eq!(r.kinetic, 0.0);
        assert_eq!(r.h1_v, 0.0);
        assert_eq!(r.log_identity_residual, Some(0.0));
    }

    #[test]
    fn nsf_initial_thermal_energy() {
        let params = Params::nsf(1.0, 1.0, 10.0);
        let profile = Profile {
            temperature: TemperatureProfile::Polynomial(vec![1.0, 0.0, -1.0]),
            ..Profile::stationary()
        };
        let (grid, data) = data_for(256, params, profile);
        let s = LagrangianState::initial(&data, &grid, &params);
        let r = record(&s, &data, &params, &grid, None, Some(&AprioriMonitor::new(257)));
        assert!((r.thermal.unwrap() - 4.0 / 3.0).abs() < grid.h().powi(2));
        assert_eq!(r.apriori_nsf, Some(0.0));
        assert!(r.log_identity_residual.is_none());
    }

    #[test]
    fn envelope_values() {
        let params = Params::pressureless(1.0);
        let (grid, data) = data_for(64, params, Profile::stationary());
        assert_eq!(etax_envelope(&data, &params, &grid), 1.0);

        let (grid, data) = data_for(2048, params, Profile::linear_compression());
        let c1 = etax_envelope(&data, &params, &grid);
        // exp(4 / sqrt(3)) from int rho0 = 2, int rho0 v0^2 = 2/3.
        assert!((c1 - 10.068_392_654_475_96).abs() < 1e-4);

        let mut prev = c1;
        for mu in [10.0, 100.0, 1e4] {
            let c = etax_envelope(&data, &Params::pressureless(mu), &grid);
            assert!(c < prev && c >= 1.0);
            prev = c;
        }
        assert!(prev - 1.0 < 1e-3);
    }

    #[test]
    fn terminal_domain_matches_simpson_oracle() {
        let params = Params::pressureless(1.0);
        let (grid, data) = data_for(64, params, Profile::stationary());
        assert!((terminal_domain(&data, &params, &grid) - 2.0).abs() < 1e-14);

        let oracle = simpson(|x| (-(1.0 - x * x) / 2.0).exp(), -1.0, 1.0, 20_000).value;
        assert!((oracle - 1.449_556_918_014_152_8).abs() < 1e-12);
        let (grid, data) = data_for(512, params, Profile::linear_compression());
        let td = terminal_domain(&data, &params, &grid);
        assert!((td - oracle).abs() < 1e-5, "{td} vs {oracle}");

        let expanding = Profile { velocity: VelocityProfile::Polynomial(vec![0.0, 1.0]), ..Profile::linear_compression() };
        let (grid, data) = data_for(512, params, expanding);
        let oracle = simpson(|x| ((1.0 - x * x) / 2.0).exp(), -1.0, 1.0, 20_000).value;
        let td = terminal_domain(&data, &params, &grid);
        assert!(td > 2.0);
        assert!((td - oracle).abs() < 1e-5);
    }

    #[test]
    fn fit_recovers_synthetic_rate() {
        let series: Vec<(f64, f64)> = (0..100).map(|i| {
            let t = i as f64 * 0.05;
            (t, 2.5 * (-3.0 * t).exp())
        }).collect();
        assert!((fit_decay_rate(&series, (0.0, 10.0)).unwrap() - 3.0).abs() < 1e-10);
        let flat: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 4.0)).collect();
        assert_eq!(fit_decay_rate(&flat, (0.0, 10.0)).unwrap(), 0.0);
        let bad = [(0.0, 1.0), (1.0, 0.0)];
        assert_eq!(fit_decay_rate(&bad, (0.0, 2.0)), Err(Error::NonPositiveSeries { index: 1, value: 0.0 }));
        assert!(fit_decay_rate(&bad, (5.0, 6.0)).is_err());
    }

    #[test]
    fn monitor_scales_with_mach() {
        let params = Params::nsf(2.0, 1.0, 10.0);
        let mut m = AprioriMonitor::new(3);
        m.accumulate_with_density(&[1.0, 2.0, 1.0], &[0.0, 1.0, 0.0], 0.5, &params);
        assert!((m.value() - 1.0 / 200.0).abs() < 1e-15);
        let mut zero = AprioriMonitor::new(3);
        zero.accumulate_with_density(&[1.0; 3], &[0.0; 3], 1.0, &params);
        assert_eq!(zero.value(), 0.0);
        assert!(!zero.exceeded());
    }

    #[test]
    fn energy_functional_of_zero_data_vanishes() {
        let r = DiagnosticsRecord {
            thermal: Some(0.0),
            thermal_sq: Some(0.0),
            h1_theta: Some(0.0),
            l2_thetat: Some(0.0),
            h1_thetat_sq: Some(0.0),
            ..DiagnosticsRecord::default()
        };
        let recs = vec![r.clone(), DiagnosticsRecord { t: 1.0, ..r }];
        let e = nsf_energy_functional(&recs, 0.3).unwrap();
        assert!(e.series.iter().all(|p| p.1 == 0.0));
        let missing = vec![DiagnosticsRecord::default()];
        assert_eq!(nsf_energy_functional(&missing, 0.0), Err(Error::MissingField("thermal_sq")));
    }

    #[test]
    fn poincare_constant_of_uniform_density() {
        // Slowest zero-mean Neumann mode sin(pi x / 2): C = 4 / pi^2.
        let grid = Grid::new(256).unwrap();
        let c = poincare_constant(&vec![1.0; 256], &grid);
        let exact = 4.0 / (std::f64::consts::PI * std::f64::consts::PI);
        assert!((c - exact).abs() < 1e-4, "{c} vs {exact}");
    }

    #[test]
    fn log_identity_residual_is_zero_initially_and_small_for_perturbed_states() {
        let params = Params::pressureless(1.0);
        let profile = Profile {
            density: DensityProfile::Polynomial(vec![1.0, 0.2, 0.3]),
            ..Profile::linear_compression()
        };
        let (grid, data) = data_for(64, params, profile);
        let s = LagrangianState::initial(&data, &grid, &params);
        assert_eq!(log_identity_residual(&s, &data, &params, &grid), 0.0);
    }
}
