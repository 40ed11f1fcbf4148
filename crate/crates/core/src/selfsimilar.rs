//! Self-similar solutions `eta = sigma(t) x` of the degenerate-viscosity
//! problem with viscosity `rho^alpha`.
//!
//! `sigma` solves `sigma' = sigma^{-alpha} + gamma` with
//! `gamma = sigma'(0) - sigma(0)^{-alpha}`; the sign of `gamma` decides
//! between unbounded expansion and convergence to a finite domain.

use crate::error::{Error, Result};
use crate::model::{
    build_initial_data, node_density, DensityProfile, Grid, InitialData, LagrangianState, Params, Profile,
    TemperatureProfile, VelocityProfile,
};
use crate::stepper::{step_degenerate, StepOptions};

/// Default local tolerance (absolute and relative) of the integrator.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Integration stops if `sigma` falls to this value.
pub const SIGMA_FLOOR: f64 = 1e-8;

pub fn gamma(sigma0: f64, dsigma0: f64, alpha: f64) -> Result<f64> {
    if !(sigma0 > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma0 must be positive, got {sigma0}")));
    }
    Ok(dsigma0 - sigma0.powf(-alpha))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    /// `gamma >= 0`: `sigma -> infinity`, `sigma' -> gamma`.
    LargeEnergy,
    /// `gamma < 0`: `sigma -> (-gamma)^{-1/alpha}`, `sigma' -> 0`.
    SmallEnergy,
}

impl Classification {
    pub fn name(self) -> &'static str {
        match self {
            Classification::LargeEnergy => "large-energy",
            Classification::SmallEnergy => "small-energy",
        }
    }
}

/// Classification and limit of `sigma` (infinite for large energy).
pub fn classify(gamma: f64, alpha: f64) -> (Classification, f64) {
    if gamma >= 0.0 {
        (Classification::LargeEnergy, f64::INFINITY)
    } else {
        (Classification::SmallEnergy, (-gamma).powf(-1.0 / alpha))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfSimilarSolution {
    pub alpha: f64,
    pub sigma0: f64,
    pub dsigma0: f64,
    pub gamma: f64,
    /// `(t, sigma, sigma')` at every accepted integrator step.
    pub samples: Vec<(f64, f64, f64)>,
    pub classification: Classification,
    pub limit: f64,
    /// Time at which `sigma` reached the floor, if it did.
    pub collapse: Option<f64>,
}

impl SelfSimilarSolution {
    pub fn t_end(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.0)
    }

    fn rate(&self, sigma: f64) -> f64 {
        sigma.powf(-self.alpha) + self.gamma
    }

    /// `(sigma, sigma')` at `t`, by cubic Hermite interpolation between samples.
    pub fn at(&self, t: f64) -> Result<(f64, f64)> {
        let t_end = self.t_end();
        if !(t >= 0.0 && t <= t_end) {
            return Err(Error::OutsideHorizon { t, t_end });
        }
        let k = self.samples.partition_point(|s| s.0 < t);
        if k == 0 {
            let s = self.samples[0];
            return Ok((s.1, s.2));
        }
        let (t0, y0, d0) = self.samples[k - 1];
        let (t1, y1, d1) = self.samples[k];
        let dt = t1 - t0;
        let s = (t - t0) / dt;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        let sigma = h00 * y0 + h10 * dt * d0 + h01 * y1 + h11 * dt * d1;
        Ok((sigma, self.rate(sigma)))
    }

    /// Largest `|sigma' - sigma^{-alpha} - gamma|` over the samples.
    pub fn first_integral_residual(&self) -> f64 {
        self.samples
            .iter()
            .fold(0.0, |m: f64, &(_, s, d)| m.max((d - self.rate(s)).abs()))
    }
}

// Dormand–Prince 5(4) tableau; the nodes are not needed for an autonomous equation.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One Dormand–Prince step: `(y5, |y5 - y4|)`, or `None` if a stage leaves
/// `y > 0`.
fn dp_step<F: Fn(f64) -> f64>(f: &F, y: f64, h: f64) -> Option<(f64, f64)> {
    let mut k = [0.0; 7];
    for i in 0..7 {
        let yi = y + h * (0..i).map(|j| A[i][j] * k[j]).sum::<f64>();
        if !(yi > 0.0) {
            return None;
        }
        k[i] = f(yi);
    }
    let y5 = y + h * (0..7).map(|i| B5[i] * k[i]).sum::<f64>();
    let y4 = y + h * (0..7).map(|i| B4[i] * k[i]).sum::<f64>();
    Some((y5, (y5 - y4).abs()))
}

/// Whether cubic Hermite interpolation over the step reproduces a half step
/// of the integrator to within `tol`.
fn hermite_ok<F: Fn(f64) -> f64>(f: &F, y0: f64, y1: f64, h: f64, tol: f64) -> bool {
    let Some((half, _)) = dp_step(f, y0, 0.5 * h) else {
        return false;
    };
    let mid = 0.5 * (y0 + y1) + 0.125 * h * (f(y0) - f(y1));
    (mid - half).abs() <= tol * (1.0 + half.abs())
}

pub fn integrate_sigma(alpha: f64, sigma0: f64, dsigma0: f64, t_end: f64, tol: f64) -> Result<SelfSimilarSolution> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidParameter(format!("t_end must be finite and >= 0, got {t_end}")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tol must be positive, got {tol}")));
    }
    let g = gamma(sigma0, dsigma0, alpha)?;
    let f = |s: f64| s.powf(-alpha) + g;
    let (classification, limit) = classify(g, alpha);
    let mut samples = vec![(0.0, sigma0, f(sigma0))];
    let mut collapse = None;
    let dt_min = 1e-14 * t_end.max(1.0);
    let (mut t, mut y) = (0.0, sigma0);
    let mut h = (tol.powf(0.2) * sigma0 / f(sigma0).abs().max(1e-3)).min(t_end.max(dt_min)).max(dt_min);
    while t < t_end {
        let h_try = h.min(t_end - t);
        let (ratio, next) = match dp_step(&f, y, h_try) {
            Some((y_new, err)) => (err / (tol + tol * y.abs().max(y_new.abs())), Some(y_new)),
            None => (f64::INFINITY, None),
        };
        match next {
            Some(y_new) if ratio <= 1.0 && hermite_ok(&f, y, y_new, h_try, tol) => {
                t = if h_try == t_end - t { t_end } else { t + h_try };
                y = y_new;
                samples.push((t, y, f(y)));
                if y <= SIGMA_FLOOR {
                    collapse = Some(t);
                    break;
                }
                let grow = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0) };
                h = h_try * grow;
            }
            _ => {
                let shrink = if ratio.is_finite() { (0.9 * ratio.powf(-0.2)).clamp(0.1, 0.5) } else { 0.1 };
                h = h_try * shrink;
                if h < dt_min {
                    return Err(Error::StepUnderflow { t });
                }
            }
        }
    }
    Ok(SelfSimilarSolution {
        alpha,
        sigma0,
        dsigma0,
        gamma: g,
        samples,
        classification,
        limit,
        collapse,
    })
}

/// Sup over interior nodes of `|x rho0 + (1/alpha) (rho0^alpha)_x|`, the
/// profile equation of the self-similar family.
pub fn profile_residual(alpha: f64, rho0: &[f64], grid: &Grid) -> f64 {
    let h = grid.h();
    let rho = node_density(rho0);
    (1..grid.n_cells())
        .map(|i| {
            let x = grid.nodes()[i];
            (x * rho[i] + (rho0[i].powf(alpha) - rho0[i - 1].powf(alpha)) / (alpha * h)).abs()
        })
        .fold(0.0, f64::max)
}

/// Relative profile residual above which data is rejected as not matching
/// `alpha`. Generous enough for the square-root edge of `alpha > 2` profiles
/// on coarse grids.
pub const PROFILE_TOL: f64 = 0.05;

/// The Lagrangian state `eta = sigma(t) x`, `v = sigma'(t) x` on `grid`.
pub fn selfsimilar_state(solution: &SelfSimilarSolution, t: f64, grid: &Grid, data: &InitialData) -> Result<LagrangianState> {
    let scale = data.rho0.iter().fold(0.0_f64, |m, r| m.max(*r));
    let residual = profile_residual(solution.alpha, &data.rho0, grid);
    if !(residual <= PROFILE_TOL * scale) {
        return Err(Error::ProfileMismatch { alpha: solution.alpha, residual });
    }
    let (sigma, dsigma) = solution.at(t)?;
    Ok(LagrangianState {
        t,
        eta: grid.nodes().iter().map(|x| sigma * x).collect(),
        eta_x: vec![sigma; grid.n_cells()],
        v: grid.nodes().iter().map(|x| dsigma * x).collect(),
        theta: None,
    })
}

/// Outcome of stepping the PDE from self-similar data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdeComparison {
    /// `sup_t sup_x |eta - sigma(t) x|`.
    pub sup_error: f64,
    /// `sup_t (max eta_x - min eta_x) / mean eta_x`.
    pub stretch_spread: f64,
    pub steps: usize,
}

/// Steps the degenerate-viscosity problem from `selfsimilar_state(solution, 0)`
/// with equal steps `dt` up to the end of the solution and measures the
/// distance to `sigma(t) x`. `center` selects the profile for `alpha <= 1`.
pub fn compare_with_pde(solution: &SelfSimilarSolution, n_cells: usize, dt: f64, center: f64, opts: &StepOptions) -> Result<PdeComparison> {
    let grid = Grid::new(n_cells)?;
    let params = Params::degenerate(solution.alpha);
    let profile = Profile {
        density: DensityProfile::SelfSimilar { center },
        velocity: VelocityProfile::Polynomial(vec![0.0, solution.dsigma0]),
        temperature: TemperatureProfile::Zero,
    };
    let data = build_initial_data(&profile, &grid, &params)?;
    let mut state = selfsimilar_state(solution, 0.0, &grid, &data)?;
    let t_end = solution.t_end();
    let n_steps = (t_end / dt).ceil() as usize;
    let mut out = PdeComparison { sup_error: 0.0, stretch_spread: 0.0, steps: n_steps };
    for k in 0..n_steps {
        let t_next = (t_end * (k + 1) as f64 / n_steps as f64).min(t_end);
        let step = step_degenerate(&state, &data, &params, &grid, t_next - state.t, opts)
            .map_err(|e| Error::InvalidParameter(format!("step {k} failed: {e}")))?;
        state = step.state;
        state.t = t_next;
        let (sigma, _) = solution.at(t_next)?;
        let err = state.eta.iter().zip(grid.nodes()).fold(0.0_f64, |m, (e, x)| m.max((e - sigma * x).abs()));
        let (lo, hi) = state.eta_x.iter().fold((f64::INFINITY, 0.0_f64), |(a, b), &e| (a.min(e), b.max(e)));
        let mean = state.domain_length() / 2.0;
        out.sup_error = out.sup_error.max(err);
        out.stretch_spread = out.stretch_spread.max((hi - lo) / mean);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_examples() {
        assert_eq!(gamma(1.0, 1.0, 2.7).unwrap(), 0.0);
        assert_eq!(gamma(1.0, 0.0, 0.3).unwrap(), -1.0);
        assert_eq!(gamma(2.0, 0.5, 1.0).unwrap(), 0.0);
        assert!(gamma(0.0, 1.0, 1.0).is_err());
        assert!(gamma(-1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn classification_examples() {
        assert_eq!(classify(0.0, 1.0), (Classification::LargeEnergy, f64::INFINITY));
        assert_eq!(classify(1.0, 2.0).0, Classification::LargeEnergy);
        let (c, limit) = classify(-0.25, 2.0);
        assert_eq!(c, Classification::SmallEnergy);
        assert!((limit - 2.0).abs() < 1e-15);
    }

    #[test]
    fn square_root_growth() {
        let sol = integrate_sigma(1.0, 1.0, 1.0, 4.0, DEFAULT_TOL).unwrap();
        let (s, d) = sol.at(4.0).unwrap();
        assert!((s - 3.0).abs() < 1e-8, "{s}");
        assert!((d - 1.0 / 3.0).abs() < 1e-8);
        for t in [0.37, 1.0, 2.5] {
            let (s, _) = sol.at(t).unwrap();
            assert!((s - (1.0 + 2.0 * t).sqrt()).abs() < 1e-8);
        }
        assert!(sol.first_integral_residual() < 1e-12);
        assert!(sol.at(4.5).is_err());
    }

    #[test]
    fn fixed_point() {
        let sol = integrate_sigma(1.7, 1.0, 0.0, 10.0, DEFAULT_TOL).unwrap();
        assert!(sol.samples.iter().all(|s| s.1 == 1.0 && s.2 == 0.0));
    }

    #[test]
    fn small_energy_convergence() {
        let sol = integrate_sigma(1.0, 1.0, 0.5, 100.0, DEFAULT_TOL).unwrap();
        assert_eq!(sol.classification, Classification::SmallEnergy);
        assert!(sol.samples.windows(2).all(|w| w[1].1 >= w[0].1));
        let late = sol.samples.iter().find(|s| s.2 < 1e-7).unwrap();
        assert!((late.1 - 2.0).abs() < 1e-6);
        assert!((sol.at(100.0).unwrap().0 - 2.0).abs() < 1e-6);
        assert!(sol.collapse.is_none());
    }

    #[test]
    fn profile_residual_detects_mismatch() {
        let grid = Grid::new(256).unwrap();
        for alpha in [0.5, 1.0, 2.0, 3.0] {
            let params = Params::degenerate(alpha);
            let profile = Profile {
                density: DensityProfile::SelfSimilar { center: 1.0 },
                velocity: VelocityProfile::Polynomial(vec![0.0, 1.0]),
                ..Profile::stationary()
            };
            let data = build_initial_data(&profile, &grid, &params).unwrap();
            let sol = integrate_sigma(alpha, 1.0, 1.0, 1.0, DEFAULT_TOL).unwrap();
            let s = selfsimilar_state(&sol, 0.0, &grid, &data).unwrap();
            assert_eq!(s.eta, grid.nodes());
            assert_eq!(s.v, data.v0);
            let wrong = integrate_sigma(alpha + 1.0, 1.0, 1.0, 1.0, DEFAULT_TOL).unwrap();
            assert!(matches!(selfsimilar_state(&wrong, 0.0, &grid, &data), Err(Error::ProfileMismatch { .. })));
        }
    }

    #[test]
    fn compact_profile_at_sigma_three() {
        let grid = Grid::new(64).unwrap();
        let params = Params::degenerate(2.0);
        let profile = Profile { density: DensityProfile::SelfSimilar { center: 1.0 }, ..Profile::stationary() };
        let data = build_initial_data(&profile, &grid, &params).unwrap();
        // sigma' = 1/sigma^2 + gamma reaches 3 at some time; use sigma0 = 3 directly.
        let sol = integrate_sigma(2.0, 3.0, 0.0, 1.0, DEFAULT_TOL).unwrap();
        let s = selfsimilar_state(&sol, 0.0, &grid, &data).unwrap();
        assert!(s.eta_x.iter().all(|&e| e == 3.0));
        let rho_mid = data.rho0[32] / s.eta_x[32];
        let x = grid.cells()[32];
        assert!((rho_mid - (1.0 - x * x) / 6.0).abs() < 1e-15);
    }
}
