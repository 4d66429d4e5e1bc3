//! JSON run configuration.
//!
//! Every field is optional on input. [`RunConfig::resolve`] fills the gaps with
//! per-command defaults and validates the result; the resolved form serializes
//! back to the same schema with every field present, so a written sidecar is a
//! valid input that reproduces the run.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use orbital_floquet::model::{
    strain_from_spectroscopy, LaserConfig, NoiseConfig, PulseProfile, RelaxationConfig,
    StrainDriveConfig, REFERENCE_DELTA, REFERENCE_F_M, REFERENCE_N, REFERENCE_THETA_DEG,
};
use orbital_floquet::ode::OdeOptions;
use orbital_floquet::series::arange_inclusive;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    PleSweep,
    RabiTime,
    RabiFreq,
    Decoherence,
    FloquetSpectrum,
    CompareMethods,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::PleSweep => "ple-sweep",
            Command::RabiTime => "rabi-time",
            Command::RabiFreq => "rabi-freq",
            Command::Decoherence => "decoherence",
            Command::FloquetSpectrum => "floquet-spectrum",
            Command::CompareMethods => "compare-methods",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Configuration problem; the message names the offending field.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn invalid(field: &str, msg: impl fmt::Display) -> ConfigError {
    ConfigError(format!("{field}: {msg}"))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub seed: Option<u64>,
    pub physics: Physics,
    pub grids: Grids,
    pub output: Output,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Physics {
    /// Undriven orbital splitting (GHz).
    pub delta: Option<f64>,
    /// Dipole angle (degrees).
    pub theta_deg: Option<f64>,
    /// Static potentials (GHz). `v_e1` and `v_e2` override the values derived
    /// from `delta` and `theta_deg` when given.
    pub v_e1: Option<f64>,
    pub v_e2: Option<f64>,
    pub v_a1: Option<f64>,
    /// Drive frequency (GHz).
    pub f_m: Option<f64>,
    pub n: Option<u32>,
    /// Drive phase (rad).
    pub phase_m: Option<f64>,
    /// Fixed ratio between drive amplitude and the square root of drive power
    /// (GHz/√mW); used with `grids.drive_powers_mw`.
    pub e1_per_sqrt_mw: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    /// Fractional rescaling of the splitting for the decoherence ensemble.
    pub delta_scale: Option<f64>,
    pub laser: Laser,
    pub pulse: Pulse,
    pub relaxation: Relaxation,
    pub noise: Noise,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Laser {
    pub detuning_x: Option<f64>,
    pub omega_lx: Option<f64>,
    pub omega_ly: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Pulse {
    pub rise_time_ns: Option<f64>,
    pub width_ns: Option<f64>,
    pub separation_ns: Option<f64>,
    pub count: Option<u32>,
    pub closed_field_fraction: Option<f64>,
    pub first_onset_ns: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Relaxation {
    pub gamma_opt: Option<f64>,
    pub gamma_orb: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Noise {
    pub sigma: Option<f64>,
    pub n_samples: Option<usize>,
    /// Average PLE points over field draws as well.
    pub ple_diffusion: Option<bool>,
}

/// Either an inclusive `start..=stop` range with `step`, or explicit `values`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Axis {
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub step: Option<f64>,
    pub values: Option<Vec<f64>>,
}

impl Axis {
    fn range(start: f64, stop: f64, step: f64) -> Self {
        Axis {
            start: Some(start),
            stop: Some(stop),
            step: Some(step),
            values: None,
        }
    }

    fn list(values: &[f64]) -> Self {
        Axis {
            values: Some(values.to_vec()),
            ..Axis::default()
        }
    }

    fn is_empty(&self) -> bool {
        *self == Axis::default()
    }

    fn points(&self, field: &str) -> Result<Vec<f64>, ConfigError> {
        let pts = match (&self.values, self.start, self.stop, self.step) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(a), Some(b), Some(h)) => {
                if !(h > 0.0) || !(b >= a) || !a.is_finite() || !b.is_finite() {
                    return Err(invalid(field, "need finite start <= stop and step > 0"));
                }
                if (b - a) / h > 1e7 {
                    return Err(invalid(field, "more than 1e7 grid points"));
                }
                // Snap accumulated rounding so 0.1 steps print as 0.3.
                arange_inclusive(a, b, h)
                    .into_iter()
                    .map(|v| (v * 1e12).round() / 1e12)
                    .collect()
            }
            _ => {
                return Err(invalid(
                    field,
                    "give either values or all of start, stop, step",
                ))
            }
        };
        if pts.is_empty() {
            return Err(invalid(field, "grid is empty"));
        }
        if pts.iter().any(|v| !v.is_finite()) || pts.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid(
                field,
                "grid must be finite and strictly increasing",
            ));
        }
        Ok(pts)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Grids {
    /// Drive amplitudes `ℰ₁` (GHz).
    pub drive: Axis,
    /// Drive powers (mW), converted with `physics.e1_per_sqrt_mw`; replaces `drive`.
    pub drive_powers_mw: Option<Vec<f64>>,
    /// Laser detuning from the undriven `|E_x⟩` line (GHz).
    pub detuning: Axis,
    /// Trajectory times for the decoherence ensemble (ns).
    pub time: Axis,
    pub evolve_window_ns: Option<[f64; 2]>,
    pub sample_step_ns: Option<f64>,
    pub histogram: Histogram,
    /// Histogram span passed to the background fit (ns after the second onset).
    pub fit_window_ns: Option<[f64; 2]>,
    /// Residual span used for the damped-sinusoid fit (ns).
    pub rabi_fit_span_ns: Option<f64>,
    /// Lines weaker than this fraction of the total weight are dropped.
    pub min_line_weight: Option<f64>,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Histogram {
    pub diffusion_draws: Option<usize>,
    pub diffusion_sigma: Option<f64>,
    pub random_drive_phase: Option<bool>,
    pub bin_width_ns: Option<f64>,
    pub t_end_ns: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Output {
    pub path: Option<String>,
    pub format: Option<Format>,
}

/// Fully resolved, validated inputs for one command.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub command: Command,
    pub seed: u64,
    pub strain: StrainDriveConfig,
    pub laser: LaserConfig,
    pub pulse: PulseProfile,
    pub relax: RelaxationConfig,
    pub noise: NoiseConfig,
    pub ple_diffusion: bool,
    pub alpha: Option<f64>,
    pub beta: f64,
    pub delta_scale: f64,
    pub drives: Vec<f64>,
    pub detunings: Vec<f64>,
    pub times: Vec<f64>,
    pub evolve_window: (f64, f64),
    pub sample_step: f64,
    pub histogram: Histogram,
    pub fit_window: (f64, f64),
    pub rabi_fit_span: f64,
    pub min_line_weight: f64,
    pub ode: OdeOptions,
    pub out_dir: String,
    pub format: Format,
    /// The input with every default made explicit.
    pub echo: RunConfig,
}

pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

/// Parse errors carry serde_json's line and column.
pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
    serde_json::from_str(text).map_err(|e| ConfigError(format!("config parse error: {e}")))
}

fn fill<T: Copy>(slot: &mut Option<T>, default: T) -> T {
    *slot.get_or_insert(default)
}

fn positive(field: &str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(field, format!("must be positive, got {v}")))
    }
}

impl RunConfig {
    /// Resolve defaults for `command`. `seed` and `out` come from the command
    /// line and take precedence over the file.
    pub fn resolve(
        mut self,
        command: Command,
        seed: Option<u64>,
        out: Option<&str>,
    ) -> Result<Resolved, ConfigError> {
        if let Some(c) = self.command {
            if c != command {
                return Err(invalid(
                    "command",
                    format!(
                        "config is for {} but {} was requested",
                        c.name(),
                        command.name()
                    ),
                ));
            }
        }
        self.command = Some(command);
        if let Some(s) = seed {
            self.seed = Some(s);
        }
        let seed = fill(&mut self.seed, 0);
        if let Some(o) = out {
            self.output.path = Some(o.to_string());
        }
        let out_dir = self.output.path.get_or_insert_with(|| ".".into()).clone();
        let format = fill(&mut self.output.format, Format::Csv);

        let ph = &mut self.physics;
        let delta = fill(&mut ph.delta, REFERENCE_DELTA);
        let theta = fill(&mut ph.theta_deg, REFERENCE_THETA_DEG);
        let strain = strain_from_spectroscopy(delta, theta)
            .map_err(|e| invalid("physics.delta/theta_deg", e))?;
        let v_e1 = fill(&mut ph.v_e1, strain.v_e1);
        let v_e2 = fill(&mut ph.v_e2, strain.v_e2);
        let cfg = StrainDriveConfig {
            v_a1: fill(&mut ph.v_a1, 0.0),
            v_e1,
            v_e2,
            a1: 0.0,
            e1: 0.0,
            f_m: fill(&mut ph.f_m, REFERENCE_F_M),
            phase_m: fill(&mut ph.phase_m, 0.0),
            n: fill(&mut ph.n, REFERENCE_N),
        };
        cfg.validate().map_err(|e| invalid("physics", bare(e)))?;

        let time_domain = command == Command::RabiTime;
        let (lx, ly) = if time_domain {
            (0.22, 0.022)
        } else {
            (0.05, 0.05)
        };
        let laser = LaserConfig {
            detuning_x: fill(&mut ph.laser.detuning_x, 0.0),
            omega_lx: fill(&mut ph.laser.omega_lx, lx),
            omega_ly: fill(&mut ph.laser.omega_ly, ly),
            pulse: None,
        };
        laser
            .validate()
            .map_err(|e| invalid("physics.laser", bare(e)))?;

        let dp = PulseProfile::default();
        let pulse = PulseProfile {
            rise_time: fill(&mut ph.pulse.rise_time_ns, dp.rise_time),
            pulse_width: fill(&mut ph.pulse.width_ns, dp.pulse_width),
            pulse_separation: fill(&mut ph.pulse.separation_ns, dp.pulse_separation),
            pulse_count: fill(&mut ph.pulse.count, dp.pulse_count),
            closed_field_fraction: fill(
                &mut ph.pulse.closed_field_fraction,
                dp.closed_field_fraction,
            ),
            first_onset: fill(&mut ph.pulse.first_onset_ns, dp.first_onset),
        };
        pulse
            .validate()
            .map_err(|e| invalid("physics.pulse", bare(e)))?;

        let dr = RelaxationConfig::default();
        let relax = RelaxationConfig {
            gamma_opt: fill(&mut ph.relaxation.gamma_opt, dr.gamma_opt),
            gamma_orb: fill(&mut ph.relaxation.gamma_orb, dr.gamma_orb),
        };
        relax
            .validate()
            .map_err(|e| invalid("physics.relaxation", bare(e)))?;

        let noise = NoiseConfig {
            sigma: fill(&mut ph.noise.sigma, 0.035),
            n_samples: fill(&mut ph.noise.n_samples, 500),
            seed,
        };
        noise
            .validate()
            .map_err(|e| invalid("physics.noise", bare(e)))?;
        let ple_diffusion = fill(&mut ph.noise.ple_diffusion, false);

        // An explicit null keeps the automatic normalization.
        let alpha = ph.alpha;
        if let Some(a) = alpha {
            positive("physics.alpha", a)?;
        }
        let beta = fill(&mut ph.beta, if time_domain { 0.6 } else { 0.7 });
        if !(0.0..=1.0).contains(&beta) {
            return Err(invalid(
                "physics.beta",
                format!("must lie in [0, 1], got {beta}"),
            ));
        }
        let delta_scale = positive("physics.delta_scale", fill(&mut ph.delta_scale, 1.015))?;
        let calibration = ph.e1_per_sqrt_mw;

        let g = &mut self.grids;
        let default_drive = match command {
            Command::PleSweep | Command::FloquetSpectrum => Axis::range(0.0, 7.0, 0.5),
            Command::RabiTime => Axis::list(&[0.0, 3.0, 3.5, 4.0]),
            Command::RabiFreq | Command::CompareMethods => Axis::range(0.0, 7.0, 0.1),
            Command::Decoherence => Axis::range(0.5, 7.0, 0.25),
        };
        let drives = match (&g.drive_powers_mw, calibration) {
            (Some(powers), Some(k)) => {
                if !g.drive.is_empty() {
                    return Err(invalid(
                        "grids.drive",
                        "give either drive or drive_powers_mw, not both",
                    ));
                }
                if powers.iter().any(|p| !(*p >= 0.0)) {
                    return Err(invalid("grids.drive_powers_mw", "powers must be >= 0"));
                }
                let e: Vec<f64> = powers.iter().map(|p| k * p.sqrt()).collect();
                Axis::list(&e).points("grids.drive_powers_mw")?
            }
            (Some(_), None) => {
                return Err(invalid(
                    "grids.drive_powers_mw",
                    "needs physics.e1_per_sqrt_mw",
                ));
            }
            (None, _) => {
                if g.drive.is_empty() {
                    g.drive = default_drive;
                }
                g.drive.points("grids.drive")?
            }
        };
        if g.detuning.is_empty() {
            g.detuning = Axis::range(-1.0, 1.0, 0.01);
        }
        let detunings = g.detuning.points("grids.detuning")?;
        if g.time.is_empty() {
            g.time = Axis::range(0.0, 20.0, 0.05);
        }
        let times = g.time.points("grids.time")?;
        let [w0, w1] = fill(&mut g.evolve_window_ns, [0.0, 50.0]);
        if !(w0 >= 0.0 && w1 > w0) {
            return Err(invalid("grids.evolve_window_ns", "need 0 <= start < end"));
        }
        let sample_step = positive("grids.sample_step_ns", fill(&mut g.sample_step_ns, 0.05))?;
        let h = &mut g.histogram;
        fill(&mut h.diffusion_draws, 50);
        let sigma = fill(&mut h.diffusion_sigma, 0.030);
        if !(sigma >= 0.0) {
            return Err(invalid("grids.histogram.diffusion_sigma", "must be >= 0"));
        }
        fill(&mut h.random_drive_phase, true);
        positive(
            "grids.histogram.bin_width_ns",
            fill(&mut h.bin_width_ns, 0.05),
        )?;
        positive("grids.histogram.t_end_ns", fill(&mut h.t_end_ns, 200.0))?;
        let histogram = h.clone();
        let [f0, f1] = fill(&mut g.fit_window_ns, [3.0, 100.0]);
        if !(f1 > f0) {
            return Err(invalid("grids.fit_window_ns", "need start < end"));
        }
        let rabi_fit_span = positive(
            "grids.rabi_fit_span_ns",
            fill(&mut g.rabi_fit_span_ns, 40.0),
        )?;
        let min_line_weight = fill(&mut g.min_line_weight, 1e-6);
        if !(min_line_weight >= 0.0) {
            return Err(invalid("grids.min_line_weight", "must be >= 0"));
        }
        let d = OdeOptions::default();
        let rtol = positive("grids.rtol", fill(&mut g.rtol, d.rtol))?;
        let atol = positive("grids.atol", fill(&mut g.atol, d.atol))?;

        Ok(Resolved {
            command,
            seed,
            strain: cfg,
            laser,
            pulse,
            relax,
            noise,
            ple_diffusion,
            alpha,
            beta,
            delta_scale,
            drives,
            detunings,
            times,
            evolve_window: (w0, w1),
            sample_step,
            histogram,
            fit_window: (f0, f1),
            rabi_fit_span,
            min_line_weight,
            ode: OdeOptions::with_tolerances(rtol, atol),
            out_dir,
            format,
            echo: self,
        })
    }
}

/// Library validation message without the error-kind prefix.
fn bare(e: orbital_floquet::Error) -> String {
    match e {
        orbital_floquet::Error::Domain(m) => m,
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_reference_defaults() {
        let r = parse("{}")
            .unwrap()
            .resolve(Command::CompareMethods, None, None)
            .unwrap();
        assert_eq!(r.strain.f_m, 1.296);
        assert_eq!(r.strain.n, 5);
        assert!((r.strain.splitting() - 6.41).abs() < 1e-12);
        assert_eq!(r.relax, RelaxationConfig::default());
        assert_eq!(r.beta, 0.7);
        assert_eq!(r.drives.len(), 71);
        let t = parse("{}")
            .unwrap()
            .resolve(Command::RabiTime, None, None)
            .unwrap();
        assert_eq!(t.beta, 0.6);
        assert_eq!((t.laser.omega_lx, t.laser.omega_ly), (0.22, 0.022));
    }

    #[test]
    fn unknown_key_is_named() {
        let e = parse(r#"{"physics": {"f_n": 1.0}}"#).unwrap_err();
        assert!(e.0.contains("f_n"), "{e}");
    }

    #[test]
    fn parse_error_has_position() {
        let e = parse("{\n  \"seed\": ,\n}").unwrap_err();
        assert!(e.0.contains("line 2"), "{e}");
    }

    #[test]
    fn negative_drive_frequency() {
        let e = parse(r#"{"physics": {"f_m": -1}}"#)
            .unwrap()
            .resolve(Command::RabiFreq, None, None)
            .unwrap_err();
        assert!(e.0.contains("f_m must be positive"), "{e}");
    }

    #[test]
    fn resolved_echo_is_a_fixed_point() {
        let r = parse(r#"{"grids": {"drive": {"values": [1, 2]}}}"#)
            .unwrap()
            .resolve(Command::Decoherence, Some(9), Some("x"))
            .unwrap();
        let text = serde_json::to_string(&r.echo).unwrap();
        let again = parse(&text)
            .unwrap()
            .resolve(Command::Decoherence, None, None)
            .unwrap();
        assert_eq!(again.echo, r.echo);
        assert_eq!(again.seed, 9);
        assert_eq!(again.drives, vec![1.0, 2.0]);
    }

    #[test]
    fn command_mismatch_is_rejected() {
        let e = parse(r#"{"command": "ple-sweep"}"#)
            .unwrap()
            .resolve(Command::RabiFreq, None, None)
            .unwrap_err();
        assert!(e.0.starts_with("command"), "{e}");
    }

    #[test]
    fn power_calibration() {
        let r =
            parse(r#"{"physics": {"e1_per_sqrt_mw": 2.0}, "grids": {"drive_powers_mw": [1, 4]}}"#)
                .unwrap()
                .resolve(Command::RabiFreq, None, None)
                .unwrap();
        assert_eq!(r.drives, vec![2.0, 4.0]);
        let e = parse(r#"{"grids": {"drive_powers_mw": [1]}}"#)
            .unwrap()
            .resolve(Command::RabiFreq, None, None)
            .unwrap_err();
        assert!(e.0.contains("e1_per_sqrt_mw"));
    }
}
