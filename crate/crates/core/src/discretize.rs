//! Staggered-grid operators and the implicit diffusion systems.
//!
//! Node quantities (`v`, `eta`, `theta`) live at `x_i = -1 + i h`, cell
//! quantities (`rho0`, `eta_x`, fluxes) at the midpoints between them. Every
//! node owns a control volume of length `h` (`h/2` at the two endpoints), and
//! the lumped node mass is the density averaged over that control volume.

use crate::error::{Error, Result};
use crate::model::Grid;

/// A tridiagonal linear system `sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]`.
///
/// `sub[0]` and `sup[n-1]` are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalSystem {
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl TridiagonalSystem {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Thomas algorithm without pivoting.
    pub fn solve(&self) -> Result<Vec<f64>> {
        let n = self.len();
        for (len, expected) in [
            (self.sub.len(), n),
            (self.sup.len(), n),
            (self.rhs.len(), n),
        ] {
            if len != expected {
                return Err(Error::LengthMismatch { expected, found: len });
            }
        }
        if n == 0 {
            return Ok(Vec::new());
        }
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut pivot = self.diag[0];
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(Error::SingularSystem { row: 0 });
        }
        c[0] = self.sup[0] / pivot;
        d[0] = self.rhs[0] / pivot;
        for i in 1..n {
            pivot = self.diag[i] - self.sub[i] * c[i - 1];
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(Error::SingularSystem { row: i });
            }
            c[i] = if i + 1 < n { self.sup[i] / pivot } else { 0.0 };
            d[i] = (self.rhs[i] - self.sub[i] * d[i - 1]) / pivot;
        }
        let mut x = d;
        for i in (0..n - 1).rev() {
            x[i] -= c[i] * x[i + 1];
        }
        Ok(x)
    }

    /// Computes `A x` for the stored matrix.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.sub[i] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.sup[i] * x[i + 1];
                }
                s
            })
            .collect()
    }
}

/// Cell value `i` is `(field[i+1] - field[i]) / h`.
pub fn grad_node_to_cell(field: &[f64], grid: &Grid) -> Result<Vec<f64>> {
    if field.len() != grid.n_nodes() {
        return Err(Error::LengthMismatch {
            expected: grid.n_nodes(),
            found: field.len(),
        });
    }
    let h = grid.h();
    Ok(field.windows(2).map(|w| (w[1] - w[0]) / h).collect())
}

/// Node value `i` is `(flux[i] - flux[i-1]) / h`, with the boundary fluxes
/// standing in for the missing cells outside the interval.
pub fn div_cell_to_node(flux: &[f64], grid: &Grid, left_bc: f64, right_bc: f64) -> Result<Vec<f64>> {
    if flux.len() != grid.n_cells() {
        return Err(Error::LengthMismatch {
            expected: grid.n_cells(),
            found: flux.len(),
        });
    }
    let h = grid.h();
    let n = grid.n_cells();
    Ok((0..=n)
        .map(|i| {
            let right = if i < n { flux[i] } else { right_bc };
            let left = if i > 0 { flux[i - 1] } else { left_bc };
            (right - left) / h
        })
        .collect())
}

/// Node density averaged over the control volume: mean of the two adjacent
/// cells in the interior, the single adjacent cell at the endpoints.
pub fn lumped_density(rho0: &[f64]) -> Vec<f64> {
    let n = rho0.len();
    (0..=n)
        .map(|i| match i {
            0 => rho0[0],
            i if i == n => rho0[n - 1],
            i => 0.5 * (rho0[i - 1] + rho0[i]),
        })
        .collect()
}

/// Lumped node masses: `h (rho_{i-1} + rho_i) / 2` inside. The endpoint
/// half-cells use the trapezoid rule with the density extrapolated linearly to
/// the boundary (clamped at zero), so a profile vanishing linearly at the edge
/// gets the right boundary mass.
pub fn node_masses(rho0: &[f64], grid: &Grid) -> Vec<f64> {
    let h = grid.h();
    let n = rho0.len();
    let end = |inner: f64, next: Option<f64>| {
        let edge = next.map_or(inner, |r| (1.5 * inner - 0.5 * r).max(0.0));
        0.25 * h * (inner + edge)
    };
    (0..=n)
        .map(|i| match i {
            0 => end(rho0[0], rho0.get(1).copied()),
            i if i == n => end(rho0[n - 1], n.checked_sub(2).map(|k| rho0[k])),
            i => 0.5 * h * (rho0[i - 1] + rho0[i]),
        })
        .collect()
}

/// Distributes per-cell integrals to the interior nodes: half of each cell to
/// each adjacent node, with the shares that would land on an endpoint handed
/// to its interior neighbour. Endpoint entries of the result are zero.
pub fn cells_to_interior_nodes(cell_integrals: &[f64]) -> Vec<f64> {
    let n = cell_integrals.len();
    let mut out = vec![0.0; n + 1];
    if n < 2 {
        return out;
    }
    for (j, &s) in cell_integrals.iter().enumerate() {
        let left = if j == 0 { 1 } else { j };
        let right = if j + 1 == n { n - 1 } else { j + 1 };
        out[left] += 0.5 * s;
        out[right] += 0.5 * s;
    }
    out[0] = 0.0;
    out[n] = 0.0;
    out
}

/// Backward-Euler system `(M/dt + K) v_new = (M/dt) v_old + source` for a
/// free (zero-flux) boundary. `conductance[j]` multiplies the jump of `v`
/// across cell `j`, so the cell flux is `conductance[j] * (v[j+1] - v[j])`.
pub fn assemble_diffusion(
    masses: &[f64],
    conductance: &[f64],
    dt: f64,
    rhs: Vec<f64>,
) -> TridiagonalSystem {
    let n = masses.len();
    let mut sub = vec![0.0; n];
    let mut diag: Vec<f64> = masses.iter().map(|m| m / dt).collect();
    let mut sup = vec![0.0; n];
    for (j, &c) in conductance.iter().enumerate() {
        diag[j] += c;
        diag[j + 1] += c;
        sup[j] = -c;
        sub[j + 1] = -c;
    }
    TridiagonalSystem { sub, diag, sup, rhs }
}

/// Applies the stiffness operator: node `i` receives `F_i - F_{i-1}` with zero
/// flux outside the interval.
pub fn flux_divergence(conductance: &[f64], field: &[f64]) -> Vec<f64> {
    let n = conductance.len();
    let mut out = vec![0.0; n + 1];
    for j in 0..n {
        let flux = conductance[j] * (field[j + 1] - field[j]);
        out[j] += flux;
        out[j + 1] -= flux;
    }
    out
}

/// Backward-Euler viscous system for constant `mu` with the stretch frozen:
/// `(rho_bar/dt) v_new - div(mu grad(v_new) / eta_x) = (rho_bar/dt) v_old`,
/// each row scaled by its control-volume length. Symmetric positive definite.
pub fn assemble_viscous_system(
    eta_x: &[f64],
    rho0: &[f64],
    dt: f64,
    mu: f64,
    v_old: &[f64],
) -> Result<TridiagonalSystem> {
    let n = rho0.len();
    if eta_x.len() != n {
        return Err(Error::LengthMismatch { expected: n, found: eta_x.len() });
    }
    if v_old.len() != n + 1 {
        return Err(Error::LengthMismatch { expected: n + 1, found: v_old.len() });
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    if let Some((cell, &value)) = eta_x.iter().enumerate().find(|(_, &e)| !(e > 0.0)) {
        return Err(Error::NonPositiveStretch { cell, value });
    }
    let grid = Grid::new(n)?;
    let h = grid.h();
    let masses = node_masses(rho0, &grid);
    let conductance: Vec<f64> = eta_x.iter().map(|e| mu / (h * e)).collect();
    let rhs = masses.iter().zip(v_old).map(|(m, v)| m / dt * v).collect();
    Ok(assemble_diffusion(&masses, &conductance, dt, rhs))
}

/// Logarithmic mean `(b - a) / (ln b - ln a)`, continuous at `a == b`.
pub fn log_mean(a: f64, b: f64) -> f64 {
    let u = b / a - 1.0;
    if u.abs() < 1e-4 {
        a * (1.0 + u * (0.5 + u * (-1.0 / 12.0 + u * (1.0 / 24.0 - u * 19.0 / 720.0))))
    } else {
        a * u / u.ln_1p()
    }
}
