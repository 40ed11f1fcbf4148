//! Reference computations that do not share code with the solver: Simpson
//! quadrature, and manufactured solutions with their body forces.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{build_initial_data, DensityProfile, Grid, LagrangianState, Params, Profile, TemperatureProfile, VelocityProfile};
use crate::stepper::{step_forced, Forcing, StepError, StepOptions};

/// A quadrature value with a Richardson estimate of its error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error_estimate: f64,
}

fn simpson_sum<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Composite Simpson rule on `n` intervals (rounded up to a multiple of 4),
/// with the error estimated against the rule on `n / 2` intervals.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> Quadrature {
    let n = n.max(4).div_ceil(4) * 4;
    let fine = simpson_sum(&f, a, b, n);
    let coarse = simpson_sum(&f, a, b, n / 2);
    Quadrature { value: fine, error_estimate: (fine - coarse).abs() / 15.0 }
}

/// Composite Simpson rule on equally spaced samples (odd count, at least 3).
pub fn simpson_samples(values: &[f64], h: f64) -> Result<f64> {
    if values.len() < 3 || values.len() % 2 == 0 {
        return Err(Error::InvalidParameter(format!(
            "Simpson samples need an odd count >= 3, got {}",
            values.len()
        )));
    }
    let last = values.len() - 1;
    let s: f64 = values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let w = if i == 0 || i == last { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            w * v
        })
        .sum();
    Ok(s * h / 3.0)
}

/// Closed-form solutions, forced where needed so that they solve the
/// equations exactly. All use `rho0 = 1` and satisfy the stress-free and
/// temperature boundary conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Manufactured {
    /// Fluid at rest; no forcing.
    Stationary { mu: f64 },
    /// `v = eps e^{-t} sin(pi x / 2)`, `eta = x + eps (1 - e^{-t}) sin(pi x / 2)`.
    PressurelessSine { mu: f64, eps: f64 },
    /// The velocity above with `Theta = amp e^{-t} sin(pi (x + 1) / 2)`.
    NsfSine { mu: f64, kappa: f64, mach: f64, eps: f64, amp: f64 },
}

const K: f64 = PI / 2.0;

impl Manufactured {
    pub fn params(&self) -> Params {
        match *self {
            Manufactured::Stationary { mu } => Params::pressureless(mu),
            Manufactured::PressurelessSine { mu, .. } => Params::pressureless(mu),
            Manufactured::NsfSine { mu, kappa, mach, .. } => Params::nsf(mu, kappa, mach),
        }
    }

    pub fn profile(&self) -> Profile {
        let (eps, amp) = self.amplitudes();
        Profile {
            density: DensityProfile::Constant(1.0),
            velocity: VelocityProfile::Sine { amplitude: eps, mode: 1.0 },
            temperature: if amp == 0.0 { TemperatureProfile::Zero } else { TemperatureProfile::Sine { amplitude: amp } },
        }
    }

    fn amplitudes(&self) -> (f64, f64) {
        match *self {
            Manufactured::Stationary { .. } => (0.0, 0.0),
            Manufactured::PressurelessSine { eps, .. } => (eps, 0.0),
            Manufactured::NsfSine { eps, amp, .. } => (eps, amp),
        }
    }

    pub fn velocity(&self, x: f64, t: f64) -> f64 {
        self.amplitudes().0 * (-t).exp() * (K * x).sin()
    }

    pub fn flow_map(&self, x: f64, t: f64) -> f64 {
        x + self.amplitudes().0 * (1.0 - (-t).exp()) * (K * x).sin()
    }

    pub fn temperature(&self, x: f64, t: f64) -> f64 {
        self.amplitudes().1 * (-t).exp() * (K * (x + 1.0)).sin()
    }

    /// `(eta_x, eta_xx, v_x, v_xx, Theta, Theta_x, Theta_xx)`.
    fn derivatives(&self, x: f64, t: f64) -> [f64; 7] {
        let (eps, amp) = self.amplitudes();
        let (s, c) = (K * x).sin_cos();
        let a = eps * (1.0 - (-t).exp());
        let b = eps * (-t).exp();
        let (ts, tc) = (K * (x + 1.0)).sin_cos();
        let th = amp * (-t).exp();
        [
            1.0 + a * K * c,
            -a * K * K * s,
            b * K * c,
            -b * K * K * s,
            th * ts,
            th * K * tc,
            -th * K * K * ts,
        ]
    }

    fn mach_scale(&self) -> f64 {
        match *self {
            Manufactured::NsfSine { mach, .. } => 1.0 / (mach * mach),
            _ => 0.0,
        }
    }
}

impl Forcing for Manufactured {
    fn momentum(&self, x: f64, t: f64) -> f64 {
        let mu = self.params().mu;
        let [ex, exx, vx, vxx, th, thx, _] = self.derivatives(x, t);
        let stress_x = mu * (vxx * ex - vx * exx) / (ex * ex);
        let pressure_x = self.mach_scale() * (thx * ex - th * exx) / (ex * ex);
        -self.velocity(x, t) - stress_x + pressure_x
    }

    fn heat(&self, x: f64, t: f64) -> f64 {
        let Manufactured::NsfSine { mu, kappa, .. } = *self else {
            return 0.0;
        };
        let [ex, exx, vx, _, th, thx, thxx] = self.derivatives(x, t);
        let conduction_x = kappa * (thxx * ex - thx * exx) / (ex * ex);
        let pressure = self.mach_scale() * th / ex;
        -th - conduction_x - mu * vx * vx / ex + pressure * vx
    }
}

/// Node errors of one norm at the final time.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FieldErrors {
    pub velocity: f64,
    pub flow_map: f64,
    pub temperature: f64,
}

impl FieldErrors {
    pub fn max(&self) -> f64 {
        self.velocity.max(self.flow_map).max(self.temperature)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManufacturedErrors {
    pub linf: FieldErrors,
    /// Trapezoid-weighted discrete L2 norm.
    pub l2: FieldErrors,
}

/// Runs `case` on `n_cells` cells with `n_steps` equal steps up to `t_end`
/// and compares with the exact solution.
pub fn manufactured_errors(
    case: &Manufactured,
    n_cells: usize,
    n_steps: usize,
    t_end: f64,
    opts: &StepOptions,
) -> std::result::Result<ManufacturedErrors, StepError> {
    let grid = Grid::new(n_cells)?;
    let params = case.params();
    let data = build_initial_data(&case.profile(), &grid, &params)?;
    let mut state = LagrangianState::initial(&data, &grid, &params);
    let dt = t_end / n_steps as f64;
    for k in 0..n_steps {
        let mut next = step_forced(&state, &data, &params, &grid, dt, opts, Some(case))?.state;
        next.t = (k + 1) as f64 * dt;
        state = next;
    }
    let t = state.t;
    let h = grid.h();
    let n = grid.n_cells();
    let norms = |f: &dyn Fn(usize, f64) -> f64| {
        let (mut sup, mut sq) = (0.0_f64, 0.0);
        for (i, &x) in grid.nodes().iter().enumerate() {
            let e = f(i, x).abs();
            let w = if i == 0 || i == n { 0.5 * h } else { h };
            sup = sup.max(e);
            sq += w * e * e;
        }
        (sup, sq.sqrt())
    };
    let v = norms(&|i, x| state.v[i] - case.velocity(x, t));
    let eta = norms(&|i, x| state.eta[i] - case.flow_map(x, t));
    let theta = match &state.theta {
        Some(th) => norms(&|i, x| th[i] - case.temperature(x, t)),
        None => (0.0, 0.0),
    };
    Ok(ManufacturedErrors {
        linf: FieldErrors { velocity: v.0, flow_map: eta.0, temperature: theta.0 },
        l2: FieldErrors { velocity: v.1, flow_map: eta.1, temperature: theta.1 },
    })
}

/// Observed convergence order between consecutive refinements by `ratio`.
pub fn observed_orders(errors: &[f64], ratio: f64) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).ln() / ratio.ln()).collect()
}
