//! Closed-form Rabi-frequency approximations: second-order perturbation
//! theory in `V_E2`, the Rabi formula, large-drive asymptotics, and the
//! Landau-Zener transfer-matrix estimate.
//!
//! All functions canonicalize their input first. Frequencies are in GHz and
//! the drive frequency enters as `f_m`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::floquet::{default_truncation, rotating_frame_couplings};
use crate::model::{canonicalize, StrainDriveConfig};
use crate::series::TimeSeries;
use crate::specfun::{arg_gamma_one_minus_i, bessel_j};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SoptResult {
    /// Effective detuning `δ` (GHz).
    pub delta: f64,
    /// Resonant coupling `Ω₀ = V_E2 J_{−n}(2ℰ₁/f_m)` (GHz).
    pub omega0: f64,
    /// `2√(δ² + Ω₀²)` (GHz).
    pub omega_r: f64,
    /// `(s, Ω_s)` entering the detuning sum.
    pub couplings_used: Vec<(i32, Complex64)>,
}

impl SoptResult {
    /// Build from `δ` and `Ω₀` alone.
    pub fn from_parts(delta: f64, omega0: f64) -> Self {
        Self {
            delta,
            omega0,
            omega_r: 2.0 * delta.hypot(omega0),
            couplings_used: Vec::new(),
        }
    }

    /// Rabi amplitude `Ω₀² / (Ω₀² + δ²)`; zero when both vanish.
    pub fn amplitude(&self) -> f64 {
        let den = self.omega0 * self.omega0 + self.delta * self.delta;
        if den == 0.0 {
            0.0
        } else {
            self.omega0 * self.omega0 / den
        }
    }
}

/// `δ = δ₀ + Σ_{s≠0} |Ω_s|² / (s f_m)`, with `|s|` limited by the Floquet
/// truncation rule.
pub fn sopt_detuning(cfg: &StrainDriveConfig) -> Result<f64> {
    Ok(sopt_rabi(cfg)?.delta)
}

pub fn sopt_rabi(cfg: &StrainDriveConfig) -> Result<SoptResult> {
    let c = rotating_frame_couplings(cfg)?;
    let s_max = default_truncation(cfg) as i32;
    let f = cfg.f_m;
    let used: Vec<(i32, Complex64)> = c
        .couplings
        .iter()
        .copied()
        .filter(|&(s, _)| s.abs() <= s_max)
        .collect();
    let shift: f64 = used
        .iter()
        .filter(|&&(s, _)| s != 0)
        .map(|&(s, om)| om.norm_sqr() / (s as f64 * f))
        .sum();
    let can = canonicalize(*cfg);
    let omega0 = can.v_e2 * bessel_j(-(can.n as i32), 2.0 * can.e1 / f)?;
    let delta = c.delta0 + shift;
    Ok(SoptResult {
        delta,
        omega0,
        omega_r: 2.0 * delta.hypot(omega0),
        couplings_used: used,
    })
}

/// `P_y(t) = Ω₀²/(Ω₀² + δ²) · (1 − cos 2πΩ_R t) / 2` on `t_grid`.
pub fn rabi_trajectory(sopt: &SoptResult, t_grid: &[f64]) -> TimeSeries {
    let amp = sopt.amplitude();
    TimeSeries::from_fn(t_grid, |t| {
        amp * 0.5 * (1.0 - (TAU * sopt.omega_r * t).cos())
    })
}

/// Large-drive forms of `δ` and `Ω₀`:
///
/// ```text
/// δ∞  = δ₀ + (V_E2² f_m / ℰ₁²) sin(4ℰ₁/f_m + n² f_m/(2ℰ₁) + (n + ½)π/2)
/// Ω₀∞ = (V_E2/√π) √(f_m/ℰ₁) cos(2ℰ₁/f_m + n² f_m/(4ℰ₁) + (n − ½)π/2)
/// ```
///
/// evaluated at `|ℰ₁|`; `Ω₀∞` carries the Bessel parity sign for `ℰ₁ < 0`.
pub fn asymptotic_limits(cfg: &StrainDriveConfig) -> Result<(f64, f64)> {
    cfg.validate()?;
    let can = canonicalize(*cfg);
    if can.e1 == 0.0 {
        return Err(Error::domain(
            "asymptotic limits need a nonzero drive amplitude",
        ));
    }
    let e = can.e1.abs();
    let f = can.f_m;
    let n = can.n as f64;
    let v2 = can.v_e2;
    let delta0 = can.v_e1 - 0.5 * n * f;
    let delta_inf = delta0
        + v2 * v2 * f / (e * e)
            * (4.0 * e / f + n * n * f / (2.0 * e) + (n + 0.5) * PI / 2.0).sin();
    let mut omega0_inf = v2 / PI.sqrt()
        * (f / e).sqrt()
        * (2.0 * e / f + n * n * f / (4.0 * e) + (n - 0.5) * PI / 2.0).cos();
    if can.e1 < 0.0 && can.n % 2 == 1 {
        omega0_inf = -omega0_inf;
    }
    Ok((delta_inf, omega0_inf))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LzResult {
    /// Transition angle `χ` (rad).
    pub chi: f64,
    /// Adiabaticity `η = V_E2² / (2ℰ₁ f_m)`.
    pub eta: f64,
    /// Dynamical phase between node crossings (rad).
    pub theta_dyn: f64,
    /// `π/4 + arg Γ(1 − iη) + η(ln η − 1)` (rad).
    pub theta_stokes: f64,
    /// `f_m sin(χ/2) |cos(θ − θ_stokes)|`, folded into `[0, f_m/2]` (GHz).
    pub omega_r: f64,
}

/// Transfer-matrix Rabi frequency for drives that sweep through the
/// avoided crossing (`|ℰ₁| > V_E1`).
///
/// ```text
/// sin²(χ/2) = 1 − exp(−4πη)
/// θ = 2√(ℰ₁² − V_E1²)/f_m − (2V_E1/f_m) arccos(V_E1/ℰ₁)
/// ```
pub fn landau_zener_rabi(cfg: &StrainDriveConfig) -> Result<LzResult> {
    cfg.validate()?;
    let can = canonicalize(*cfg);
    let e = can.e1.abs();
    let v1 = can.v_e1;
    let f = can.f_m;
    if !(e > v1) {
        return Err(Error::Regime(format!(
            "Landau-Zener estimate needs |E1| > |V_E1| (|E1| = {e}, |V_E1| = {v1})"
        )));
    }
    let eta = can.v_e2 * can.v_e2 / (2.0 * e * f);
    let sin2_half_chi = -(-4.0 * PI * eta).exp_m1();
    let chi = 2.0 * sin2_half_chi.sqrt().asin();
    let theta_dyn = 2.0 * (e * e - v1 * v1).sqrt() / f - 2.0 * v1 / f * (v1 / e).acos();
    let theta_stokes = if eta > 0.0 {
        PI / 4.0 + arg_gamma_one_minus_i(eta) + eta * (eta.ln() - 1.0)
    } else {
        PI / 4.0
    };
    let raw = f * sin2_half_chi.sqrt() * (theta_dyn - theta_stokes).cos().abs();
    let folded = raw.rem_euclid(f);
    Ok(LzResult {
        chi,
        eta,
        theta_dyn,
        theta_stokes,
        omega_r: folded.min(f - folded),
    })
}
