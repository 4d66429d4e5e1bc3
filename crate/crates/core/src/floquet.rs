//! Floquet analysis of the driven excited doublet.
//!
//! In the frame `a = e^{−iΦ} e^{−iΘ} u`, `b = e^{−iΦ} e^{+iΘ} v` the doublet
//! obeys `i d/dt (u, v) = 2π [[δ₀, Ω(t)], [Ω*(t), −δ₀]] (u, v)` with
//! `Ω(t) = V_E2 e^{2iΘ(t)} = Σ_s Ω_s e^{2πi s f_m t}` and `δ₀ = V_E1 − n f_m / 2`.
//!
//! Floquet states are written `e^{−2πiνt} Σ_j (u_j, v_j) e^{2πi j f_m t}`,
//! which gives the Hermitian block problem
//!
//! ```text
//! ν u_j = (δ₀ + j f_m) u_j + Σ_s Ω_s v_{j−s}
//! ν v_j = (−δ₀ + j f_m) v_j + Σ_s Ω_s* u_{j+s}
//! ```
//!
//! Every function canonicalizes its input (`V_E1 ≥ 0`) first; the
//! relabeling is remembered so that laser polarizations map back correctly.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::model::{canonicalize, StrainDriveConfig};
use crate::ode::{integrate, OdeOptions};
use crate::specfun::{bessel_j, MAX_ORDER};
use crate::{Error, Result};

/// Couplings below this Bessel magnitude are dropped.
const COUPLING_CUTOFF: f64 = 1e-14;
/// Boundary Fourier weight above which the truncation is rejected.
const BOUNDARY_WEIGHT_LIMIT: f64 = 1e-6;

/// Phases of the transformation into the rotating frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotatingFrame {
    pub v_a1: f64,
    pub a1: f64,
    pub e1: f64,
    pub f_m: f64,
    pub phase_m: f64,
    pub n: u32,
    /// Canonicalization swapped `|E_x⟩` and `|E_y⟩`.
    pub relabeled: bool,
}

impl RotatingFrame {
    pub fn new(cfg: &StrainDriveConfig) -> Self {
        let can = canonicalize(*cfg);
        Self {
            v_a1: can.v_a1,
            a1: can.a1,
            e1: can.e1,
            f_m: can.f_m,
            phase_m: can.phase_m,
            n: can.n,
            relabeled: cfg.v_e1 < 0.0,
        }
    }

    fn drive_sine(&self, t: f64) -> f64 {
        (TAU * self.f_m * t + self.phase_m).sin() - self.phase_m.sin()
    }

    /// Identity-channel phase `Φ(t) = 2π V_A1 t + (𝒜₁/f_m)(sin(2π f_m t + φ) − sin φ)`.
    pub fn phi(&self, t: f64) -> f64 {
        TAU * self.v_a1 * t + self.a1 / self.f_m * self.drive_sine(t)
    }

    /// Doublet phase `Θ(t) = π n f_m t + (ℰ₁/f_m)(sin(2π f_m t + φ) − sin φ)`.
    pub fn theta(&self, t: f64) -> f64 {
        PI * self.n as f64 * self.f_m * t + self.e1 / self.f_m * self.drive_sine(t)
    }

    /// Jacobi-Anger argument `2ℰ₁ / f_m`.
    pub fn bessel_argument(&self) -> f64 {
        2.0 * self.e1 / self.f_m
    }

    /// Largest Bessel order worth keeping at argument `z`.
    fn bessel_span(z: f64) -> i32 {
        (z.abs().ceil() as i32 + 40).min(MAX_ORDER)
    }

    /// Fourier coefficients `g_k` of `e^{−i z (sin(2π f_m t + φ) − sin φ)} = Σ_k g_k e^{2πi k f_m t}`.
    fn lab_phase_coefficients(&self, z: f64) -> Result<Vec<(i32, Complex64)>> {
        let k_max = Self::bessel_span(z);
        let global = Complex64::from_polar(1.0, z * self.phase_m.sin());
        let mut out = Vec::new();
        for k in -k_max..=k_max {
            let j = bessel_j(-k, z)?;
            if j.abs() >= COUPLING_CUTOFF {
                out.push((
                    k,
                    global * Complex64::from_polar(j, k as f64 * self.phase_m),
                ));
            }
        }
        Ok(out)
    }
}

/// Rotating-frame detuning and Fourier couplings of `Ω(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RotatingFrameCouplings {
    /// `δ₀ = V_E1 − n f_m / 2` (GHz).
    pub delta0: f64,
    /// `V_E2` after canonicalization (GHz).
    pub v_e2: f64,
    /// `(s, Ω_s)` with `Ω_s = V_E2 e^{−iz sin φ} J_{s−n}(z) e^{i(s−n)φ}`, ascending in `s`.
    pub couplings: Vec<(i32, Complex64)>,
    pub frame: RotatingFrame,
}

impl RotatingFrameCouplings {
    /// `Ω_s`, zero if dropped.
    pub fn coupling(&self, s: i32) -> Complex64 {
        self.couplings
            .binary_search_by_key(&s, |&(k, _)| k)
            .map(|i| self.couplings[i].1)
            .unwrap_or_default()
    }

    /// Closed-form `Ω(t) = V_E2 e^{2iΘ(t)}`.
    pub fn omega_at(&self, t: f64) -> Complex64 {
        Complex64::from_polar(self.v_e2, 2.0 * self.frame.theta(t))
    }
}

/// Detuning and couplings for `cfg` (canonicalized first).
pub fn rotating_frame_couplings(cfg: &StrainDriveConfig) -> Result<RotatingFrameCouplings> {
    cfg.validate()?;
    let frame = RotatingFrame::new(cfg);
    let can = canonicalize(*cfg);
    let n = can.n as i32;
    let z = frame.bessel_argument();
    let mut couplings = Vec::new();
    if can.v_e2 != 0.0 {
        let k_max = RotatingFrame::bessel_span(z);
        let global = Complex64::from_polar(can.v_e2, -z * can.phase_m.sin());
        for k in -k_max..=k_max {
            let j = bessel_j(k, z)?;
            if j.abs() >= COUPLING_CUTOFF {
                couplings.push((
                    k + n,
                    global * Complex64::from_polar(j, k as f64 * can.phase_m),
                ));
            }
        }
    }
    Ok(RotatingFrameCouplings {
        delta0: can.v_e1 - 0.5 * n as f64 * can.f_m,
        v_e2: can.v_e2,
        couplings,
        frame,
    })
}

/// Fourier truncation `J = n + ⌈2|ℰ₁|/f_m⌉ + 20`.
pub fn default_truncation(cfg: &StrainDriveConfig) -> usize {
    cfg.n as usize + (2.0 * cfg.e1.abs() / cfg.f_m).ceil() as usize + 20
}

/// Fold into `(−f/2, f/2]`.
pub fn fold_quasi_energy(nu: f64, f: f64) -> f64 {
    let r = nu - f * (nu / f + 0.5).floor();
    if r <= -0.5 * f {
        r + f
    } else {
        r
    }
}

/// `|ν₁ − ν₂|` folded into `[0, f/2]`.
pub fn rabi_from_quasi_energies(nu: [f64; 2], f_m: f64) -> f64 {
    let d = (nu[0] - nu[1]).abs().rem_euclid(f_m);
    d.min(f_m - d)
}

/// The two physical Floquet states of a truncated block problem.
#[derive(Debug, Clone, PartialEq)]
pub struct FloquetSolution {
    /// Folded into `(−f_m/2, f_m/2]`, descending.
    pub quasi_energies: [f64; 2],
    /// `coeffs[b][j + J] = (u_j, v_j)` for branch `b`, unit norm.
    pub coeffs: [Vec<(Complex64, Complex64)>; 2],
    pub truncation: usize,
    pub frame: RotatingFrame,
    /// Eigenvalues paired with `coeffs` before folding.
    raw_quasi_energies: [f64; 2],
}

impl FloquetSolution {
    /// `(u_j, v_j)` for branch `b`; zero outside the truncation.
    pub fn coefficient(&self, branch: usize, j: i64) -> (Complex64, Complex64) {
        let jj = self.truncation as i64;
        if j.abs() > jj {
            return Default::default();
        }
        self.coeffs[branch][(j + jj) as usize]
    }

    /// Folded Rabi splitting.
    pub fn rabi(&self) -> f64 {
        rabi_from_quasi_energies(self.quasi_energies, self.frame.f_m)
    }
}

/// Diagonalize the `2(2J+1)`-dimensional block problem and return the two
/// states with the largest `j = 0` weight.
pub fn solve_floquet_matrix(
    c: &RotatingFrameCouplings,
    truncation: usize,
) -> Result<FloquetSolution> {
    let f = c.frame.f_m;
    let jj = truncation as i64;
    let size = 2 * (2 * truncation + 1);
    let ui = |j: i64| 2 * (j + jj) as usize;
    let vi = |j: i64| 2 * (j + jj) as usize + 1;
    let mut m = DMatrix::<Complex64>::zeros(size, size);
    for j in -jj..=jj {
        m[(ui(j), ui(j))] = Complex64::new(c.delta0 + j as f64 * f, 0.0);
        m[(vi(j), vi(j))] = Complex64::new(-c.delta0 + j as f64 * f, 0.0);
        for &(s, om) in &c.couplings {
            let k = j - s as i64;
            if k.abs() <= jj {
                m[(ui(j), vi(k))] = om;
                m[(vi(k), ui(j))] = om.conj();
            }
        }
    }
    let eig = SymmetricEigen::new(m);
    let vecs = &eig.eigenvectors;
    let vals = &eig.eigenvalues;

    let center_weight = |col: usize| vecs[(ui(0), col)].norm_sqr() + vecs[(vi(0), col)].norm_sqr();
    let mut order: Vec<usize> = (0..size).collect();
    order.sort_by(|&a, &b| center_weight(b).total_cmp(&center_weight(a)));

    let first = order[0];
    // A Fourier-shifted copy of `first` is the same physical state.
    let shifted_overlap = |col: usize| -> f64 {
        let p = ((vals[col] - vals[first]) / f).round() as i64;
        if p == 0 || ((vals[col] - vals[first]) - p as f64 * f).abs() > 1e-6 * f {
            return 0.0;
        }
        let mut acc = Complex64::default();
        for j in -jj..=jj {
            let k = j + p;
            if k.abs() <= jj {
                acc += vecs[(ui(k), col)].conj() * vecs[(ui(j), first)];
                acc += vecs[(vi(k), col)].conj() * vecs[(vi(j), first)];
            }
        }
        acc.norm()
    };
    let second = order[1..]
        .iter()
        .copied()
        .find(|&col| shifted_overlap(col) < 0.5)
        .ok_or_else(|| Error::domain("no second Floquet branch found"))?;

    let mut picked = [first, second];
    if vals[second] > vals[first] {
        picked.swap(0, 1);
    }
    let mut coeffs: [Vec<(Complex64, Complex64)>; 2] = [Vec::new(), Vec::new()];
    for (b, &col) in picked.iter().enumerate() {
        let boundary: f64 = [-jj, jj]
            .iter()
            .map(|&j| vecs[(ui(j), col)].norm_sqr() + vecs[(vi(j), col)].norm_sqr())
            .sum();
        if boundary > BOUNDARY_WEIGHT_LIMIT {
            return Err(Error::Truncation {
                truncation,
                boundary_weight: boundary,
            });
        }
        coeffs[b] = (-jj..=jj)
            .map(|j| (vecs[(ui(j), col)], vecs[(vi(j), col)]))
            .collect();
    }
    let raw = [vals[picked[0]], vals[picked[1]]];
    let mut folded = [fold_quasi_energy(raw[0], f), fold_quasi_energy(raw[1], f)];
    if folded[0] < folded[1] {
        folded.swap(0, 1);
    }
    Ok(FloquetSolution {
        quasi_energies: folded,
        coeffs,
        truncation,
        frame: c.frame,
        raw_quasi_energies: raw,
    })
}

/// Couplings plus block diagonalization at the default truncation.
pub fn floquet_solution(cfg: &StrainDriveConfig) -> Result<FloquetSolution> {
    let c = rotating_frame_couplings(cfg)?;
    solve_floquet_matrix(&c, default_truncation(cfg))
}

/// Rotating-frame one-period propagator `U(T)`, row-major.
pub fn monodromy_matrix(cfg: &StrainDriveConfig, opts: &OdeOptions) -> Result<[Complex64; 4]> {
    let c = rotating_frame_couplings(cfg)?;
    let period = 1.0 / c.frame.f_m;
    // y = [Re U00, Im U00, Re U10, Im U10, Re U01, Im U01, Re U11, Im U11]
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        let om = c.omega_at(t);
        let d = c.delta0;
        for col in 0..2 {
            let o = 4 * col;
            let u = Complex64::new(y[o], y[o + 1]);
            let v = Complex64::new(y[o + 2], y[o + 3]);
            let minus_i_tau = Complex64::new(0.0, -TAU);
            let du = minus_i_tau * (d * u + om * v);
            let dv = minus_i_tau * (om.conj() * u - d * v);
            dy[o] = du.re;
            dy[o + 1] = du.im;
            dy[o + 2] = dv.re;
            dy[o + 3] = dv.im;
        }
    };
    let y0 = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0];
    let sol = integrate(rhs, &y0, &[0.0, period], opts)?;
    let y = &sol.y[1];
    Ok([
        Complex64::new(y[0], y[1]),
        Complex64::new(y[4], y[5]),
        Complex64::new(y[2], y[3]),
        Complex64::new(y[6], y[7]),
    ])
}

/// Tolerances used for one-period propagation.
pub fn monodromy_options() -> OdeOptions {
    OdeOptions::with_tolerances(1e-12, 1e-14)
}

/// Quasi-energies `ν = −arg(λ) f_m / 2π` of the one-period propagator,
/// folded into `(−f_m/2, f_m/2]`, descending.
pub fn monodromy_quasi_energies(cfg: &StrainDriveConfig) -> Result<[f64; 2]> {
    let u = monodromy_matrix(cfg, &monodromy_options())?;
    let half_tr = 0.5 * (u[0] + u[3]);
    let det = u[0] * u[3] - u[1] * u[2];
    let root = (half_tr * half_tr - det).sqrt();
    let f = cfg.f_m;
    let mut nu = [half_tr + root, half_tr - root].map(|l| fold_quasi_energy(-l.arg() * f / TAU, f));
    if nu[0] < nu[1] {
        nu.swap(0, 1);
    }
    Ok(nu)
}

/// One absorption line of the driven doublet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbsorptionLine {
    /// Laser frequency measured from the ground state (GHz).
    pub frequency: f64,
    /// Relative weight; the weights of both branches sum to `Ω_lx² + Ω_ly²`.
    pub weight: f64,
    pub branch: usize,
    /// Sideband index `m`: the line sits at `ε − m f_m`.
    pub order: i64,
}

/// Line positions and weights for a laser with couplings `omega_lx`,
/// `omega_ly` to the lab-frame `|E_x⟩`, `|E_y⟩`.
///
/// Each Floquet state maps back to the lab frame as
/// `a(t) = e^{−2πiεt} Σ_m φ^x_m e^{2πi m f_m t}` (likewise `b`, `φ^y`), with
/// `ε = ν + V_A1 + n f_m / 2`. The component `m` absorbs at `ε − m f_m` with
/// weight `|Ω_lx φ^x_m + Ω_ly φ^y_m|²`.
pub fn absorption_spectrum(
    sol: &FloquetSolution,
    omega_lx: f64,
    omega_ly: f64,
) -> Result<Vec<AbsorptionLine>> {
    let fr = &sol.frame;
    let (ox, oy) = if fr.relabeled {
        (omega_ly, omega_lx)
    } else {
        (omega_lx, omega_ly)
    };
    let f = fr.f_m;
    let n = fr.n as i64;
    let gx = fr.lab_phase_coefficients((fr.a1 + fr.e1) / f)?;
    let gy = fr.lab_phase_coefficients((fr.a1 - fr.e1) / f)?;
    let jj = sol.truncation as i64;
    let kx = gx.iter().map(|&(k, _)| k.abs() as i64).max().unwrap_or(0);
    let ky = gy.iter().map(|&(k, _)| k.abs() as i64).max().unwrap_or(0);
    let m_lo = -jj - kx.max(ky + n.abs()) - 1;
    let m_hi = jj + kx.max(ky + n) + 1;
    let width = (m_hi - m_lo + 1) as usize;
    let total = ox * ox + oy * oy;
    let mut lines = Vec::new();
    for b in 0..2 {
        let mut phx = vec![Complex64::default(); width];
        let mut phy = vec![Complex64::default(); width];
        for j in -jj..=jj {
            let (u, v) = sol.coefficient(b, j);
            for &(k, g) in &gx {
                phx[(j + k as i64 - m_lo) as usize] += u * g;
            }
            for &(k, g) in &gy {
                phy[(j + k as i64 + n - m_lo) as usize] += v * g;
            }
        }
        let eps = sol.raw_quasi_energies[b] + fr.v_a1 + 0.5 * n as f64 * f;
        for (i, (px, py)) in phx.iter().zip(&phy).enumerate() {
            let w = (ox * px + oy * py).norm_sqr();
            if w > 1e-14 * total.max(f64::MIN_POSITIVE) {
                let m = i as i64 + m_lo;
                lines.push(AbsorptionLine {
                    frequency: eps - m as f64 * f,
                    weight: w,
                    branch: b,
                    order: m,
                });
            }
        }
    }
    lines.sort_by(|a, b| a.frequency.total_cmp(&b.frequency));
    Ok(lines)
}
