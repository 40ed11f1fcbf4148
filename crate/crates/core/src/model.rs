//! Domain types, initial data and Eulerian reconstruction.

use crate::discretize::{cells_to_interior_nodes, div_cell_to_node, grad_node_to_cell, lumped_density, node_masses};
use crate::error::{Error, Result};

/// Which system is being integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FlowKind {
    /// Constant viscosity, no pressure.
    Pressureless,
    /// Navier–Stokes–Fourier with the pressure scaled by `1/M^2`.
    Nsf,
    /// No pressure, viscosity `rho^alpha`.
    Degenerate,
}

impl FlowKind {
    pub fn name(self) -> &'static str {
        match self {
            FlowKind::Pressureless => "pressureless",
            FlowKind::Nsf => "nsf",
            FlowKind::Degenerate => "degenerate",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "pressureless" => Some(FlowKind::Pressureless),
            "nsf" => Some(FlowKind::Nsf),
            "degenerate" => Some(FlowKind::Degenerate),
            _ => None,
        }
    }
}

/// Physical parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    pub mu: f64,
    pub kappa: f64,
    pub mach: f64,
    pub alpha: f64,
    pub flow_kind: FlowKind,
}

impl Params {
    pub fn pressureless(mu: f64) -> Self {
        Params { mu, kappa: 0.0, mach: f64::INFINITY, alpha: 0.0, flow_kind: FlowKind::Pressureless }
    }

    pub fn nsf(mu: f64, kappa: f64, mach: f64) -> Self {
        Params { mu, kappa, mach, alpha: 0.0, flow_kind: FlowKind::Nsf }
    }

    pub fn degenerate(alpha: f64) -> Self {
        Params { mu: 0.0, kappa: 0.0, mach: f64::INFINITY, alpha, flow_kind: FlowKind::Degenerate }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match self.flow_kind {
            FlowKind::Pressureless if !(self.mu > 0.0) => bad(format!("mu must be > 0, got {}", self.mu)),
            FlowKind::Nsf if !(self.mu > 0.0) => bad(format!("mu must be > 0, got {}", self.mu)),
            FlowKind::Nsf if !(self.kappa > 0.0) => bad(format!("kappa must be > 0, got {}", self.kappa)),
            FlowKind::Nsf if !(self.mach >= 1.0) => bad(format!("mach must be >= 1, got {}", self.mach)),
            FlowKind::Degenerate if !(self.alpha > 0.0) => bad(format!("alpha must be > 0, got {}", self.alpha)),
            _ => Ok(()),
        }
    }

    /// `1/M^2` for NSF runs, zero otherwise.
    pub fn pressure_scale(&self) -> f64 {
        match self.flow_kind {
            FlowKind::Nsf => 1.0 / (self.mach * self.mach),
            _ => 0.0,
        }
    }

    /// Cell viscosities for the given density and stretch.
    pub fn cell_viscosity(&self, rho0: &[f64], eta_x: &[f64]) -> Vec<f64> {
        match self.flow_kind {
            FlowKind::Degenerate => rho0
                .iter()
                .zip(eta_x)
                .map(|(r, e)| (r / e).max(0.0).powf(self.alpha))
                .collect(),
            _ => vec![self.mu; rho0.len()],
        }
    }
}

/// Uniform grid on the reference interval `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    nodes: Vec<f64>,
    cells: Vec<f64>,
}

impl Grid {
    pub fn new(n_cells: usize) -> Result<Self> {
        if n_cells == 0 {
            return Err(Error::InvalidParameter("n_cells must be at least 1".into()));
        }
        let h = 2.0 / n_cells as f64;
        let mut nodes: Vec<f64> = (0..=n_cells).map(|i| -1.0 + i as f64 * h).collect();
        nodes[0] = -1.0;
        nodes[n_cells] = 1.0;
        let cells = (0..n_cells).map(|j| -1.0 + (j as f64 + 0.5) * h).collect();
        Ok(Grid { nodes, cells })
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn h(&self) -> f64 {
        2.0 / self.n_cells() as f64
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }
}

/// Density at t = 0.
#[derive(Debug, Clone, PartialEq)]
pub enum DensityProfile {
    Constant(f64),
    /// Coefficients `c0 + c1 x + c2 x^2 + ...`.
    Polynomial(Vec<f64>),
    /// `base + amplitude * exp(-x^2 / (2 width^2))`.
    Gaussian { amplitude: f64, width: f64, base: f64 },
    /// The self-similar profile for the run's `alpha`; `center` is `rho0(0)`
    /// and only matters for `alpha <= 1`.
    SelfSimilar { center: f64 },
    /// Cell-midpoint samples.
    Samples(Vec<f64>),
}

/// Velocity at t = 0.
#[derive(Debug, Clone, PartialEq)]
pub enum VelocityProfile {
    Constant(f64),
    Polynomial(Vec<f64>),
    /// `amplitude * sin(mode * pi * x / 2)`.
    Sine { amplitude: f64, mode: f64 },
    /// Node samples.
    Samples(Vec<f64>),
}

/// Temperature at t = 0.
#[derive(Debug, Clone, PartialEq)]
pub enum TemperatureProfile {
    Zero,
    Polynomial(Vec<f64>),
    /// `amplitude * sin(pi (x + 1) / 2)`, zero at both ends.
    Sine { amplitude: f64 },
    Samples(Vec<f64>),
}

/// Full description of the initial fields.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub density: DensityProfile,
    pub velocity: VelocityProfile,
    pub temperature: TemperatureProfile,
}

impl Profile {
    pub fn stationary() -> Self {
        Profile {
            density: DensityProfile::Constant(1.0),
            velocity: VelocityProfile::Constant(0.0),
            temperature: TemperatureProfile::Zero,
        }
    }

    /// `rho0 = 1`, `v0 = -x`.
    pub fn linear_compression() -> Self {
        Profile {
            density: DensityProfile::Constant(1.0),
            velocity: VelocityProfile::Polynomial(vec![0.0, -1.0]),
            temperature: TemperatureProfile::Zero,
        }
    }
}

fn polyval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Self-similar density profile for viscosity `rho^alpha`, solving
/// `x rho0 = -(1/alpha) (rho0^alpha)_x`.
pub fn self_similar_density(alpha: f64, center: f64, x: f64) -> f64 {
    if alpha > 1.0 {
        let base = (alpha - 1.0) * (1.0 - x * x) / 2.0;
        if base <= 0.0 {
            0.0
        } else {
            base.powf(1.0 / (alpha - 1.0))
        }
    } else if alpha == 1.0 {
        center * (-x * x / 2.0).exp()
    } else {
        ((1.0 - alpha) * x * x / 2.0 + center.powf(alpha - 1.0)).powf(-1.0 / (1.0 - alpha))
    }
}

impl DensityProfile {
    fn sample(&self, grid: &Grid, alpha: f64) -> Result<Vec<f64>> {
        Ok(match self {
            DensityProfile::Constant(c) => vec![*c; grid.n_cells()],
            DensityProfile::Polynomial(c) => grid.cells().iter().map(|&x| polyval(c, x)).collect(),
            DensityProfile::Gaussian { amplitude, width, base } => grid
                .cells()
                .iter()
                .map(|&x| base + amplitude * (-x * x / (2.0 * width * width)).exp())
                .collect(),
            DensityProfile::SelfSimilar { center } => {
                if !(alpha > 0.0) {
                    return Err(Error::InvalidParameter("self-similar profile needs alpha > 0".into()));
                }
                grid.cells().iter().map(|&x| self_similar_density(alpha, *center, x)).collect()
            }
            DensityProfile::Samples(s) => {
                check_len(s, grid.n_cells())?;
                s.clone()
            }
        })
    }
}

impl VelocityProfile {
    fn sample(&self, grid: &Grid) -> Result<Vec<f64>> {
        Ok(match self {
            VelocityProfile::Constant(c) => vec![*c; grid.n_nodes()],
            VelocityProfile::Polynomial(c) => grid.nodes().iter().map(|&x| polyval(c, x)).collect(),
            VelocityProfile::Sine { amplitude, mode } => grid
                .nodes()
                .iter()
                .map(|&x| amplitude * (mode * std::f64::consts::FRAC_PI_2 * x).sin())
                .collect(),
            VelocityProfile::Samples(s) => {
                check_len(s, grid.n_nodes())?;
                s.clone()
            }
        })
    }
}

impl TemperatureProfile {
    fn sample(&self, grid: &Grid) -> Result<Vec<f64>> {
        Ok(match self {
            TemperatureProfile::Zero => vec![0.0; grid.n_nodes()],
            TemperatureProfile::Polynomial(c) => grid.nodes().iter().map(|&x| polyval(c, x)).collect(),
            TemperatureProfile::Sine { amplitude } => grid
                .nodes()
                .iter()
                .map(|&x| amplitude * (std::f64::consts::FRAC_PI_2 * (x + 1.0)).sin())
                .collect(),
            TemperatureProfile::Samples(s) => {
                check_len(s, grid.n_nodes())?;
                s.clone()
            }
        })
    }
}

fn check_len(s: &[f64], expected: usize) -> Result<()> {
    if s.len() != expected {
        return Err(Error::LengthMismatch { expected, found: s.len() });
    }
    Ok(())
}

/// Sampled initial fields. `rho0` lives at cells, everything else at nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub rho0: Vec<f64>,
    pub v0: Vec<f64>,
    pub theta0: Vec<f64>,
    /// `v_t` at t = 0 from the momentum equation.
    pub v1: Vec<f64>,
    /// `Theta_t` at t = 0 from the temperature equation (zero unless NSF).
    pub theta1: Vec<f64>,
}

/// Relative tolerance for the NSF endpoint condition on `theta0`.
const THETA_ENDPOINT_TOL: f64 = 1e-10;

pub fn build_initial_data(profile: &Profile, grid: &Grid, params: &Params) -> Result<InitialData> {
    params.validate()?;
    let rho0 = profile.density.sample(grid, params.alpha)?;
    if let Some((cell, &value)) = rho0.iter().enumerate().find(|(_, &r)| !(r > 0.0)) {
        return Err(Error::NonPositiveDensity { cell, value });
    }
    let v0 = profile.velocity.sample(grid)?;
    let mut theta0 = profile.temperature.sample(grid)?;
    if params.flow_kind == FlowKind::Nsf {
        let scale = theta0.iter().fold(1.0_f64, |m, t| m.max(t.abs()));
        let last = theta0.len() - 1;
        for (i, endpoint) in [(0, -1.0), (last, 1.0)] {
            if theta0[i].abs() > THETA_ENDPOINT_TOL * scale {
                return Err(Error::TemperatureEndpoint { endpoint, value: theta0[i] });
            }
            theta0[i] = 0.0;
        }
        if let Some((node, &value)) = theta0.iter().enumerate().find(|(_, &t)| t < 0.0) {
            return Err(Error::NegativeTemperature { node, value });
        }
    } else {
        theta0.iter_mut().for_each(|t| *t = 0.0);
    }
    let mut data = InitialData {
        rho0,
        v0,
        theta0,
        v1: Vec::new(),
        theta1: Vec::new(),
    };
    let (v1, theta1) = initial_time_derivatives(&data, params, grid)?;
    data.v1 = v1;
    data.theta1 = theta1;
    Ok(data)
}

/// Total mass `sum m_i` and momentum `sum m_i v_i` with the lumped node masses.
pub fn mass_and_momentum(rho0: &[f64], v: &[f64], grid: &Grid) -> (f64, f64) {
    let m = node_masses(rho0, grid);
    let mass = m.iter().sum();
    let momentum = m.iter().zip(v).map(|(a, b)| a * b).sum();
    (mass, momentum)
}

/// Shifts `v0` by its mass-weighted mean so that the total momentum vanishes.
pub fn normalize_momentum(data: &InitialData, grid: &Grid) -> Result<InitialData> {
    let (mass, momentum) = mass_and_momentum(&data.rho0, &data.v0, grid);
    if !(mass > 0.0) {
        return Err(Error::ZeroMass);
    }
    let shift = momentum / mass;
    let mut out = data.clone();
    out.v0.iter_mut().for_each(|v| *v -= shift);
    // A second pass removes the rounding left by the first.
    let (_, residual) = mass_and_momentum(&out.rho0, &out.v0, grid);
    let shift = residual / mass;
    out.v0.iter_mut().for_each(|v| *v -= shift);
    Ok(out)
}

/// Evaluates `v_t` and `Theta_t` at t = 0 (stretch identically one) with the
/// same discrete operators the steppers use.
pub fn initial_time_derivatives(data: &InitialData, params: &Params, grid: &Grid) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = grid.n_cells();
    check_len(&data.rho0, n)?;
    check_len(&data.v0, n + 1)?;
    check_len(&data.theta0, n + 1)?;
    let h = grid.h();
    let masses = node_masses(&data.rho0, grid);
    if let Some((i, _)) = masses.iter().enumerate().find(|(_, &m)| !(m > 0.0)) {
        let cell = i.min(n - 1);
        return Err(Error::NonPositiveDensity { cell, value: data.rho0[cell] });
    }
    let ones = vec![1.0; n];
    let mu = params.cell_viscosity(&data.rho0, &ones);
    let vx = grad_node_to_cell(&data.v0, grid)?;
    let pscale = params.pressure_scale();
    let pressure: Vec<f64> = (0..n)
        .map(|j| pscale * data.rho0[j] * 0.5 * (data.theta0[j] + data.theta0[j + 1]))
        .collect();
    let stress: Vec<f64> = (0..n).map(|j| mu[j] * vx[j] - pressure[j]).collect();
    let div = div_cell_to_node(&stress, grid, 0.0, 0.0)?;
    let v1 = div.iter().zip(&masses).map(|(d, m)| h * d / m).collect();

    let mut theta1 = vec![0.0; n + 1];
    if params.flow_kind == FlowKind::Nsf {
        let tx = grad_node_to_cell(&data.theta0, grid)?;
        let heat: Vec<f64> = tx.iter().map(|t| params.kappa * t).collect();
        let hdiv = div_cell_to_node(&heat, grid, 0.0, 0.0)?;
        let sources: Vec<f64> = (0..n)
            .map(|j| h * (mu[j] * vx[j] * vx[j] - pressure[j] * vx[j]))
            .collect();
        let s = cells_to_interior_nodes(&sources);
        for i in 1..n {
            theta1[i] = (h * hdiv[i] + s[i]) / masses[i];
        }
    }
    Ok((v1, theta1))
}

/// State of the flow in Lagrangian coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianState {
    pub t: f64,
    /// Flow map at nodes.
    pub eta: Vec<f64>,
    /// Stretch at cells, always equal to the node differences of `eta`.
    pub eta_x: Vec<f64>,
    pub v: Vec<f64>,
    /// Temperature at nodes; present only for NSF runs.
    pub theta: Option<Vec<f64>>,
}

impl LagrangianState {
    pub fn initial(data: &InitialData, grid: &Grid, params: &Params) -> Self {
        LagrangianState {
            t: 0.0,
            eta: grid.nodes().to_vec(),
            eta_x: vec![1.0; grid.n_cells()],
            v: data.v0.clone(),
            theta: (params.flow_kind == FlowKind::Nsf).then(|| data.theta0.clone()),
        }
    }

    /// Checks positivity of the stretch and monotonicity of the flow map.
    pub fn validate(&self) -> Result<()> {
        if let Some((cell, &value)) = self.eta_x.iter().enumerate().find(|(_, &e)| !(e > 0.0)) {
            return Err(Error::NonPositiveStretch { cell, value });
        }
        if let Some(cell) = self.eta.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::NonPositiveStretch { cell, value: self.eta[cell + 1] - self.eta[cell] });
        }
        Ok(())
    }

    /// Physical domain length `b(t) - a(t)`.
    pub fn domain_length(&self) -> f64 {
        self.eta[self.eta.len() - 1] - self.eta[0]
    }
}

/// Physical-space values at one Lagrangian label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerianSample {
    pub y: f64,
    pub rho: f64,
    pub u: f64,
    pub theta_e: f64,
    pub a: f64,
    pub b: f64,
}

fn interp_cells(values: &[f64], grid: &Grid, x: f64) -> f64 {
    let n = grid.n_cells();
    let s = (x + 1.0) / grid.h() - 0.5;
    if s <= 0.0 {
        return values[0];
    }
    if s >= (n - 1) as f64 {
        return values[n - 1];
    }
    let j = s.floor() as usize;
    let w = s - j as f64;
    (1.0 - w) * values[j] + w * values[j + 1]
}

/// Maps a reference label `x` to physical space using piecewise-linear
/// interpolation of node and cell values.
pub fn eulerian_reconstruct(
    state: &LagrangianState,
    data: &InitialData,
    grid: &Grid,
    x: f64,
) -> Result<EulerianSample> {
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::OutOfDomain(x));
    }
    let n = grid.n_cells();
    let h = grid.h();
    let cell = (((x + 1.0) / h).floor() as usize).min(n - 1);
    if !(state.eta_x[cell] > 0.0) {
        return Err(Error::NonPositiveStretch { cell, value: state.eta_x[cell] });
    }
    let w = ((x + 1.0) - cell as f64 * h) / h;
    let lerp = |f: &[f64]| (1.0 - w) * f[cell] + w * f[cell + 1];
    let rho0 = interp_cells(&data.rho0, grid, x);
    let stretch = interp_cells(&state.eta_x, grid, x);
    Ok(EulerianSample {
        y: lerp(&state.eta),
        rho: rho0 / stretch,
        u: lerp(&state.v),
        theta_e: state.theta.as_deref().map_or(0.0, lerp),
        a: state.eta[0],
        b: state.eta[n],
    })
}

/// Node density used for trapezoid integrals of `rho0 * f`.
pub fn node_density(rho0: &[f64]) -> Vec<f64> {
    lumped_density(rho0)
}
