//! Master-equation evolution for two- and three-level systems with
//! time-dependent Hamiltonians.
//!
//! The density matrix is flattened into `2 d²` reals (real and imaginary
//! parts, row-major) and integrated with [`crate::ode`]. No positivity or
//! trace projection is applied to the result.

use num_complex::Complex64;

use crate::model::{validate_density, ComplexMatrix, DensityMatrix};
use crate::ode::{integrate, OdeOptions, StepStats};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionResult {
    pub time_grid: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub stats: StepStats,
}

impl EvolutionResult {
    /// Population of basis state `k` at every grid point.
    pub fn population(&self, k: usize) -> Vec<f64> {
        self.states.iter().map(|r| r[(k, k)].re).collect()
    }
}

fn unflatten(dim: usize, y: &[f64]) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(dim);
    for (i, v) in m.as_mut_slice().iter_mut().enumerate() {
        *v = Complex64::new(y[2 * i], y[2 * i + 1]);
    }
    m
}

fn flatten(m: &ComplexMatrix, out: &mut [f64]) {
    for (i, v) in m.as_slice().iter().enumerate() {
        out[2 * i] = v.re;
        out[2 * i + 1] = v.im;
    }
}

/// Solve `dρ/dt = −i[H, ρ] + Σ_n (C_n ρ C_n† − ½{C_n† C_n, ρ})` and sample at
/// `t_grid`, starting from `rho0` at `t_grid[0]`.
///
/// `hamiltonian` returns `H(t)` in rad/ns.
pub fn evolve_master_equation<H>(
    hamiltonian: H,
    collapse_ops: &[ComplexMatrix],
    rho0: &DensityMatrix,
    t_grid: &[f64],
    opts: &OdeOptions,
) -> Result<EvolutionResult>
where
    H: Fn(f64) -> ComplexMatrix,
{
    validate_density(rho0)?;
    let dim = rho0.dim();
    if collapse_ops.iter().any(|c| c.dim() != dim) {
        return Err(Error::domain("collapse operator dimension mismatch"));
    }
    let i = Complex64::new(0.0, 1.0);
    let mut decay = ComplexMatrix::zeros(dim);
    let jumps: Vec<(ComplexMatrix, ComplexMatrix)> = collapse_ops
        .iter()
        .map(|c| {
            let cd = c.adjoint();
            decay = decay + cd * *c;
            (*c, cd)
        })
        .collect();
    // H_eff = H − (i/2) Σ C†C, so dρ/dt = −i(H_eff ρ − ρ H_eff†) + Σ C ρ C†.
    let half_decay = decay.scale(Complex64::new(0.0, -0.5));

    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        let rho = unflatten(dim, y);
        let h = hamiltonian(t);
        debug_assert_eq!(h.dim(), dim, "Hamiltonian dimension mismatch");
        let h_eff = h + half_decay;
        let hr = h_eff * rho;
        // ρ H_eff† = (H_eff ρ)† for Hermitian ρ.
        let mut d = (hr - hr.adjoint()).scale(-i);
        for (c, cd) in &jumps {
            d = d + *c * rho * *cd;
        }
        flatten(&d, dy);
    };

    let mut y0 = vec![0.0; 2 * dim * dim];
    flatten(rho0, &mut y0);
    let sol = integrate(rhs, &y0, t_grid, opts)?;
    Ok(EvolutionResult {
        time_grid: sol.t,
        states: sol.y.iter().map(|y| unflatten(dim, y)).collect(),
        stats: sol.stats,
    })
}

/// Trapezoidal time averages of the two excited-state populations over
/// `window`, using the grid points inside it.
///
/// The excited states are the last two basis states: `(ρ₁₁, ρ₂₂)` in the
/// three-level basis and `(ρ₀₀, ρ₁₁)` for a bare doublet.
pub fn average_populations(result: &EvolutionResult, window: (f64, f64)) -> Result<(f64, f64)> {
    let (t0, t1) = window;
    let grid = &result.time_grid;
    let (first, last) = match (grid.first(), grid.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(Error::domain("empty evolution result")),
    };
    let slack = 1e-9 * (1.0 + t1.abs());
    if !(t1 > t0) || t0 < first - slack || t1 > last + slack {
        return Err(Error::domain(format!(
            "averaging window ({t0}, {t1}) outside evolved range ({first}, {last})"
        )));
    }
    let idx: Vec<usize> = (0..grid.len())
        .filter(|&k| grid[k] >= t0 - slack && grid[k] <= t1 + slack)
        .collect();
    if idx.len() < 2 {
        return Err(Error::domain(
            "averaging window contains fewer than two grid points",
        ));
    }
    let dim = result.states[0].dim();
    let (a, b) = (dim - 2, dim - 1);
    let mut acc = (0.0, 0.0);
    for w in idx.windows(2) {
        let dt = grid[w[1]] - grid[w[0]];
        let (r0, r1) = (&result.states[w[0]], &result.states[w[1]]);
        acc.0 += 0.5 * dt * (r0[(a, a)].re + r1[(a, a)].re);
        acc.1 += 0.5 * dt * (r0[(b, b)].re + r1[(b, b)].re);
    }
    let span = grid[*idx.last().unwrap()] - grid[idx[0]];
    Ok((acc.0 / span, acc.1 / span))
}

/// Photoluminescence rate `α (ρ₁₁ + β ρ₂₂)`.
pub fn pl_signal(rho11_mean: f64, rho22_mean: f64, alpha: f64, beta: f64) -> f64 {
    alpha * (rho11_mean + beta * rho22_mean)
}
