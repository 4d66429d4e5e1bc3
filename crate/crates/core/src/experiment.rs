//! Simulated measurements: photoluminescence-excitation sweeps, pulsed
//! time-domain histograms with spectral diffusion, residual extraction, and
//! the spectral-diffusion decoherence Monte Carlo.
//!
//! Every random draw comes from a [`SeededRng`] stream keyed by sample
//! index, and parallel results are reduced in index order, so outputs do
//! not depend on the thread count.

use std::f64::consts::TAU;

use rayon::prelude::*;

use crate::analytic::{rabi_trajectory, sopt_rabi};
use crate::fitdsp::{background_model, fit_background_model, fit_decaying_sinusoid, FitResult};
use crate::lindblad::{average_populations, evolve_master_equation, pl_signal, EvolutionResult};
use crate::model::{
    build_collapse_ops, build_full_hamiltonian3, ComplexMatrix, FieldPerturbation, LaserConfig,
    NoiseConfig, PulseProfile, RelaxationConfig, StrainDriveConfig,
};
use crate::ode::OdeOptions;
use crate::series::{arange_inclusive, TimeSeries};
use crate::specfun::{gaussian_sample, SeededRng};
use crate::{Error, Result};

/// Field factor of the pulse train at `t`.
pub fn laser_envelope(t: f64, pulse: &PulseProfile) -> f64 {
    pulse.envelope(t)
}

/// One static field perturbation drawn from stream `stream` of `seed`.
///
/// Draw order is `E_E1`, `E_E2`, then `E_A1` if requested.
pub fn draw_field_perturbation(
    seed: u64,
    stream: u64,
    sigma: f64,
    include_a1: bool,
) -> Result<FieldPerturbation> {
    let mut rng = SeededRng::new(seed, stream);
    let e_e1 = gaussian_sample(&mut rng, 0.0, sigma)?;
    let e_e2 = gaussian_sample(&mut rng, 0.0, sigma)?;
    let e_a1 = if include_a1 {
        gaussian_sample(&mut rng, 0.0, sigma)?
    } else {
        0.0
    };
    Ok(FieldPerturbation { e_a1, e_e1, e_e2 })
}

fn check_monotone(name: &str, v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::domain(format!("{name} grid is empty")));
    }
    if v.iter().any(|x| !x.is_finite()) || v.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::domain(format!(
            "{name} grid must be finite and strictly increasing"
        )));
    }
    Ok(())
}

/// Evolve the three-level model from `|0⟩`.
fn evolve_from_ground(
    cfg: &StrainDriveConfig,
    laser: &LaserConfig,
    perturbation: &FieldPerturbation,
    ops: &[ComplexMatrix],
    grid: &[f64],
    opts: &OdeOptions,
) -> Result<EvolutionResult> {
    evolve_master_equation(
        |t| build_full_hamiltonian3(t, cfg, laser, perturbation),
        ops,
        &ComplexMatrix::pure_state(3, 0),
        grid,
        opts,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    /// Laser detunings from the undriven `|E_x⟩` line (GHz).
    pub laser_detunings: Vec<f64>,
    /// `ℰ₁` values (GHz); each point uses `𝒜₁ = ℰ₁ / (−0.7)`.
    pub drive_amplitudes: Vec<f64>,
    /// Population-averaging window (ns); evolution always starts at 0.
    pub evolve_window: (f64, f64),
    pub alpha: f64,
    pub beta: f64,
    /// Spectral diffusion averaged at every point; `None` disables it.
    pub diffusion: Option<NoiseConfig>,
    /// Spacing of the averaging grid (ns).
    pub sample_step: f64,
    pub ode: OdeOptions,
}

impl SweepSpec {
    /// 50 ns evolution, `β = 0.7`, no diffusion.
    pub fn new(laser_detunings: Vec<f64>, drive_amplitudes: Vec<f64>) -> Self {
        Self {
            laser_detunings,
            drive_amplitudes,
            evolve_window: (0.0, 50.0),
            alpha: 1.0,
            beta: 0.7,
            diffusion: None,
            sample_step: 0.05,
            ode: OdeOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_monotone("detuning", &self.laser_detunings)?;
        check_monotone("drive amplitude", &self.drive_amplitudes)?;
        let (t0, t1) = self.evolve_window;
        if !(t0 >= 0.0 && t1 > t0) {
            return Err(Error::domain("evolve window must satisfy 0 <= t0 < t1"));
        }
        if !(self.alpha > 0.0) || !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::domain("need alpha > 0 and 0 <= beta <= 1"));
        }
        if !(self.sample_step > 0.0) {
            return Err(Error::domain("sample step must be positive"));
        }
        if let Some(n) = &self.diffusion {
            n.validate()?;
        }
        Ok(())
    }

    fn time_grid(&self) -> Vec<f64> {
        let (t0, t1) = self.evolve_window;
        let mut grid = arange_inclusive(t0, t1, self.sample_step);
        if grid.last().is_some_and(|&t| t < t1) {
            grid.push(t1);
        }
        if t0 > 0.0 {
            grid.insert(0, 0.0);
        }
        grid
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointFailure {
    pub drive_index: usize,
    pub detuning_index: usize,
    pub error: Error,
}

/// PL over the (drive, detuning) grid; `pl[drive][detuning]`, NaN where a
/// point failed.
#[derive(Debug, Clone, PartialEq)]
pub struct PleMap {
    pub detunings: Vec<f64>,
    pub drive_amplitudes: Vec<f64>,
    pub pl: Vec<Vec<f64>>,
    pub failures: Vec<PointFailure>,
}

impl PleMap {
    /// PL versus detuning at one drive amplitude.
    pub fn slice(&self, drive_index: usize) -> TimeSeries {
        TimeSeries {
            t: self.detunings.clone(),
            y: self.pl[drive_index].clone(),
        }
    }
}

/// Steady-state-window PL for every grid point. The laser's own detuning is
/// replaced by the grid value; its pulse profile is ignored.
pub fn ple_sweep(
    spec: &SweepSpec,
    cfg: &StrainDriveConfig,
    laser: &LaserConfig,
    relax: &RelaxationConfig,
) -> Result<PleMap> {
    spec.validate()?;
    cfg.validate()?;
    laser.validate()?;
    let ops = build_collapse_ops(relax)?;
    let grid = spec.time_grid();
    let perturbations: Vec<FieldPerturbation> = match &spec.diffusion {
        Some(noise) => (0..noise.n_samples as u64)
            .map(|k| draw_field_perturbation(noise.seed, k, noise.sigma, true))
            .collect::<Result<_>>()?,
        None => vec![FieldPerturbation::default()],
    };
    let nd = spec.laser_detunings.len();
    let points: Vec<Result<f64>> = (0..spec.drive_amplitudes.len() * nd)
        .into_par_iter()
        .map(|idx| {
            let point_cfg = cfg.with_drive(spec.drive_amplitudes[idx / nd]);
            let point_laser = LaserConfig {
                detuning_x: spec.laser_detunings[idx % nd],
                pulse: None,
                ..*laser
            };
            let mut acc = 0.0;
            for p in &perturbations {
                let r = evolve_from_ground(&point_cfg, &point_laser, p, &ops, &grid, &spec.ode)?;
                let (r11, r22) = average_populations(&r, spec.evolve_window)?;
                acc += pl_signal(r11, r22, spec.alpha, spec.beta);
            }
            Ok(acc / perturbations.len() as f64)
        })
        .collect();
    let mut pl = vec![vec![f64::NAN; nd]; spec.drive_amplitudes.len()];
    let mut failures = Vec::new();
    for (idx, r) in points.into_iter().enumerate() {
        match r {
            Ok(v) => pl[idx / nd][idx % nd] = v,
            Err(error) => failures.push(PointFailure {
                drive_index: idx / nd,
                detuning_index: idx % nd,
                error,
            }),
        }
    }
    Ok(PleMap {
        detunings: spec.laser_detunings.clone(),
        drive_amplitudes: spec.drive_amplitudes.clone(),
        pl,
        failures,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramSpec {
    pub pulse: PulseProfile,
    /// Number of spectral-diffusion draws; 0 runs a single unperturbed trajectory.
    pub diffusion_draws: usize,
    /// Per-component field standard deviation (GHz).
    pub diffusion_sigma: f64,
    /// Draw a uniform drive phase per trajectory.
    pub random_drive_phase: bool,
    /// Output sample spacing (ns).
    pub bin_width: f64,
    /// End of the simulation (ns).
    pub t_end: f64,
    pub beta: f64,
    /// `None` scales PL so that the undriven, diffusion-free trace peaks at 1.
    pub alpha: Option<f64>,
    pub seed: u64,
    pub ode: OdeOptions,
}

impl Default for HistogramSpec {
    /// Two 1 ns pulses 100 ns apart, 50 draws at 30 MHz, `β = 0.6`, 200 ns.
    fn default() -> Self {
        Self {
            pulse: PulseProfile::default(),
            diffusion_draws: 50,
            diffusion_sigma: 0.030,
            random_drive_phase: true,
            bin_width: 0.05,
            t_end: 200.0,
            beta: 0.6,
            alpha: None,
            seed: 0,
            ode: OdeOptions::default(),
        }
    }
}

impl HistogramSpec {
    pub fn validate(&self) -> Result<()> {
        self.pulse.validate()?;
        if self.pulse.pulse_count < 2 {
            return Err(Error::domain("histogram needs at least two pulses"));
        }
        if !(self.bin_width > 0.0)
            || !(self.diffusion_sigma >= 0.0)
            || !(0.0..=1.0).contains(&self.beta)
        {
            return Err(Error::domain(
                "need bin_width > 0, sigma >= 0, 0 <= beta <= 1",
            ));
        }
        if self.t_end <= self.second_onset() {
            return Err(Error::domain("t_end must lie after the second pulse onset"));
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0) {
                return Err(Error::domain("alpha must be positive"));
            }
        }
        Ok(())
    }

    /// Onset of the analysed (second) pulse (ns).
    pub fn second_onset(&self) -> f64 {
        self.pulse.onset(1)
    }

    /// Simulation grid: `0` followed by the output bins.
    fn grid(&self) -> (Vec<f64>, Vec<f64>) {
        let onset = self.second_onset();
        let bins = arange_inclusive(onset, self.t_end, self.bin_width);
        let mut grid = Vec::with_capacity(bins.len() + 1);
        if onset > 0.0 {
            grid.push(0.0);
        }
        grid.extend_from_slice(&bins);
        (grid, bins)
    }

    fn ode_options(&self) -> OdeOptions {
        let edge = 0.5 * self.pulse.rise_time.max(1e-3);
        let cap = self.ode.max_step.map_or(edge, |h| h.min(edge));
        self.ode.with_max_step(cap)
    }
}

/// PL rate after the second pulse onset, averaged over diffusion draws and
/// drive phases. Time is measured from that onset.
pub fn time_domain_histogram(
    spec: &HistogramSpec,
    cfg: &StrainDriveConfig,
    laser: &LaserConfig,
    relax: &RelaxationConfig,
) -> Result<TimeSeries> {
    spec.validate()?;
    cfg.validate()?;
    laser.validate()?;
    let ops = build_collapse_ops(relax)?;
    let (grid, bins) = spec.grid();
    let skip = grid.len() - bins.len();
    let opts = spec.ode_options();
    let pulsed = LaserConfig {
        pulse: Some(spec.pulse),
        ..*laser
    };
    let trace = |cfg: &StrainDriveConfig, p: &FieldPerturbation| -> Result<Vec<f64>> {
        let r = evolve_from_ground(cfg, &pulsed, p, &ops, &grid, &opts)?;
        Ok(r.states[skip..]
            .iter()
            .map(|s| pl_signal(s[(1, 1)].re, s[(2, 2)].re, 1.0, spec.beta))
            .collect())
    };

    let alpha = match spec.alpha {
        Some(a) => a,
        None => {
            let undriven = StrainDriveConfig {
                a1: 0.0,
                e1: 0.0,
                ..*cfg
            };
            let reference = trace(&undriven, &FieldPerturbation::default())?;
            let peak = reference.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !(peak > 0.0) {
                return Err(Error::domain("reference trace has no PL; cannot normalise"));
            }
            1.0 / peak
        }
    };

    let draws = spec.diffusion_draws.max(1);
    let traces: Vec<Result<Vec<f64>>> = (0..draws as u64)
        .into_par_iter()
        .map(|k| {
            let (p, phase) = if spec.diffusion_draws == 0 {
                (FieldPerturbation::default(), cfg.phase_m)
            } else {
                let p = draw_field_perturbation(spec.seed, k, spec.diffusion_sigma, true)?;
                let phase = if spec.random_drive_phase {
                    // Stream offset keeps phases independent of field draws.
                    TAU * SeededRng::new(spec.seed, k + (1 << 32)).uniform()
                } else {
                    cfg.phase_m
                };
                (p, phase)
            };
            trace(
                &StrainDriveConfig {
                    phase_m: phase,
                    ..*cfg
                },
                &p,
            )
        })
        .collect();
    let mut mean = vec![0.0; bins.len()];
    for tr in traces {
        for (m, v) in mean.iter_mut().zip(tr?) {
            *m += v;
        }
    }
    let onset = spec.second_onset();
    TimeSeries::new(
        bins.iter().map(|t| t - onset).collect(),
        mean.iter().map(|m| alpha * m / draws as f64).collect(),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualResult {
    /// `100 (data − fit) / fit` on the rebased time axis.
    pub residual: TimeSeries,
    pub background: FitResult,
}

/// Minimum span of a histogram passed to [`extract_residual`] (ns).
pub const RESIDUAL_MIN_SPAN: f64 = 30.0;

/// Fit the slow background model and return the percent residual.
///
/// The time axis is shifted to start at zero before fitting.
pub fn extract_residual(histogram: &TimeSeries) -> Result<ResidualResult> {
    let n = histogram.len();
    if n < 2 || histogram.t[n - 1] - histogram.t[0] < RESIDUAL_MIN_SPAN {
        return Err(Error::domain(format!(
            "residual extraction needs at least {RESIDUAL_MIN_SPAN} ns of data"
        )));
    }
    let data = histogram.rebased();
    let background = fit_background_model(&data)?;
    if !background.converged {
        return Err(Error::Fit(format!(
            "background fit did not converge after {} iterations (residual norm {:.3e})",
            background.iterations, background.residual_norm
        )));
    }
    let residual = TimeSeries::new(
        data.t.clone(),
        data.t
            .iter()
            .zip(&data.y)
            .map(|(&t, &y)| {
                let b = background_model(&background.params, t);
                100.0 * (y - b) / b
            })
            .collect(),
    )?;
    Ok(ResidualResult {
        residual,
        background,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoherenceSpec {
    /// Field noise on `V_E1` and `V_E2`.
    pub noise: NoiseConfig,
    pub t_grid: Vec<f64>,
    /// `ℰ₁` values (GHz).
    pub drive_grid: Vec<f64>,
    /// Multiplies the static splitting (both `V_E1` and `V_E2`) before noise.
    pub delta_scale: f64,
}

impl DecoherenceSpec {
    /// σ = 35 MHz, 500 samples, 0–20 ns at 0.05 ns, splitting +1.5 %.
    pub fn with_drives(drive_grid: Vec<f64>, seed: u64) -> Self {
        Self {
            noise: NoiseConfig {
                sigma: 0.035,
                n_samples: 500,
                seed,
            },
            t_grid: arange_inclusive(0.0, 20.0, 0.05),
            drive_grid,
            delta_scale: 1.015,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        if self.noise.n_samples < 2 {
            return Err(Error::domain(
                "decoherence Monte Carlo needs at least 2 samples",
            ));
        }
        check_monotone("time", &self.t_grid)?;
        if self.drive_grid.iter().any(|e| !e.is_finite()) || self.drive_grid.is_empty() {
            return Err(Error::domain("drive grid must be non-empty and finite"));
        }
        if !(self.delta_scale > 0.0) {
            return Err(Error::domain("delta scale must be positive"));
        }
        Ok(())
    }

    /// Decay times above this are reported as window-limited (ns).
    pub fn t2_cap(&self) -> f64 {
        5.0 * (self.t_grid[self.t_grid.len() - 1] - self.t_grid[0])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoherenceFit {
    /// Fitted oscillation frequency (GHz).
    pub omega_r: f64,
    /// Fitted decay time (ns), capped at [`DecoherenceSpec::t2_cap`].
    pub t2: f64,
    pub window_limited: bool,
    /// Fitted oscillation amplitude.
    pub amplitude: f64,
    pub fit: FitResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoherencePoint {
    pub e1: f64,
    pub mean_trajectory: TimeSeries,
    pub fit: Result<DecoherenceFit>,
}

/// Ensemble-averaged perturbative Rabi trajectories under static Gaussian
/// shifts of `V_E1` and `V_E2`, with a damped-sinusoid fit per drive.
///
/// The same noise draws are reused at every drive amplitude.
pub fn decoherence_monte_carlo(
    spec: &DecoherenceSpec,
    cfg: &StrainDriveConfig,
) -> Result<Vec<DecoherencePoint>> {
    spec.validate()?;
    cfg.validate()?;
    let draws: Vec<FieldPerturbation> = (0..spec.noise.n_samples as u64)
        .map(|k| draw_field_perturbation(spec.noise.seed, k, spec.noise.sigma, false))
        .collect::<Result<_>>()?;
    let base = StrainDriveConfig {
        v_e1: cfg.v_e1 * spec.delta_scale,
        v_e2: cfg.v_e2 * spec.delta_scale,
        ..*cfg
    };
    let cap = spec.t2_cap();
    spec.drive_grid
        .iter()
        .map(|&e1| {
            let driven = base.with_drive(e1);
            let trajectories: Vec<Result<Vec<f64>>> = draws
                .par_iter()
                .map(|p| {
                    let sample = StrainDriveConfig {
                        v_e1: driven.v_e1 + p.e_e1,
                        v_e2: driven.v_e2 + p.e_e2,
                        ..driven
                    };
                    Ok(rabi_trajectory(&sopt_rabi(&sample)?, &spec.t_grid).y)
                })
                .collect();
            let mut mean = vec![0.0; spec.t_grid.len()];
            for tr in trajectories {
                for (m, v) in mean.iter_mut().zip(tr?) {
                    *m += v;
                }
            }
            let n = draws.len() as f64;
            mean.iter_mut().for_each(|m| *m /= n);
            let mean_trajectory = TimeSeries::new(spec.t_grid.clone(), mean)?;
            let fit = fit_decaying_sinusoid(&mean_trajectory).map(|fit| {
                let t2 = fit.params[2];
                DecoherenceFit {
                    omega_r: fit.params[1],
                    t2: t2.min(cap),
                    window_limited: t2 > cap,
                    amplitude: fit.params[0],
                    fit,
                }
            });
            Ok(DecoherencePoint {
                e1,
                mean_trajectory,
                fit,
            })
        })
        .collect()
}
