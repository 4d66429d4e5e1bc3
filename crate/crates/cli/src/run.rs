//! Command dispatch: each command turns a resolved config into tables.

use rayon::prelude::*;

use orbital_floquet::analytic::{landau_zener_rabi, sopt_rabi};
use orbital_floquet::experiment::{
    decoherence_monte_carlo, extract_residual, ple_sweep, time_domain_histogram, DecoherenceSpec,
    HistogramSpec, SweepSpec,
};
use orbital_floquet::fitdsp::{background_model, fit_decaying_sinusoid};
use orbital_floquet::floquet::{
    absorption_spectrum, floquet_solution, monodromy_quasi_energies, rabi_from_quasi_energies,
};
use orbital_floquet::model::NoiseConfig;
use orbital_floquet::{Error, Result};

use crate::config::{Command, Resolved};
use crate::table::{Cell, Table};

/// Per-point problems that did not abort the run.
pub type Warnings = Vec<String>;

pub fn run(r: &Resolved) -> Result<(Vec<Table>, Warnings)> {
    match r.command {
        Command::CompareMethods => compare_methods(r),
        Command::RabiFreq => rabi_freq(r),
        Command::FloquetSpectrum => floquet_spectrum(r),
        Command::PleSweep => ple(r),
        Command::RabiTime => rabi_time(r),
        Command::Decoherence => decoherence(r),
    }
}

fn compare_methods(r: &Resolved) -> Result<(Vec<Table>, Warnings)> {
    let rows: Vec<Result<Vec<Cell>>> = r
        .drives
        .par_iter()
        .map(|&e1| {
            let cfg = r.strain.with_drive(e1);
            let sopt = sopt_rabi(&cfg)?.omega_r;
            let mono = rabi_from_quasi_energies(monodromy_quasi_energies(&cfg)?, cfg.f_m);
            let matrix = floquet_solution(&cfg)?.rabi();
            let lz = match landau_zener_rabi(&cfg) {
                Ok(lz) => lz.omega_r,
                Err(Error::Regime(_)) => f64::NAN,
                Err(e) => return Err(e),
            };
            Ok(vec![
                e1.into(),
                sopt.into(),
                mono.into(),
                matrix.into(),
                lz.into(),
            ])
        })
        .collect();
    let mut t = Table::new(
        "compare-methods",
        vec![
            "E1_GHz",
            "omega_R_sopt_GHz",
            "omega_R_monodromy_GHz",
            "omega_R_matrix_GHz",
            "omega_R_lz_GHz",
        ],
    );
    for row in rows {
        t.push(row?);
    }
    Ok((vec![t], Vec::new()))
}

fn rabi_freq(r: &Resolved) -> Result<(Vec<Table>, Warnings)> {
    let rows: Vec<Result<Vec<Cell>>> = r
        .drives
        .par_iter()
        .map(|&e1| {
            let cfg = r.strain.with_drive(e1);
            let q = monodromy_quasi_energies(&cfg)?;
            let sopt = sopt_rabi(&cfg)?;
            Ok(vec![
                e1.into(),
                rabi_from_quasi_energies(q, cfg.f_m).into(),
                q[0].into(),
                q[1].into(),
                sopt.delta.into(),
                sopt.omega0.into(),
            ])
        })
        .collect();
    let mut t = Table::new(
        "rabi-freq",
        vec![
            "E1_GHz",
            "omega_R_GHz",
            "quasi_energy_1_GHz",
            "quasi_energy_2_GHz",
            "delta_sopt_GHz",
            "omega0_sopt_GHz",
        ],
    );
    for row in rows {
        t.push(row?);
    }
    Ok((vec![t], Vec::new()))
}

fn floquet_spectrum(r: &Resolved) -> Result<(Vec<Table>, Warnings)> {
    let per_drive: Vec<Result<Vec<Vec<Cell>>>> = r
        .drives
        .par_iter()
        .map(|&e1| {
            let cfg = r.strain.with_drive(e1);
            let sol = floquet_solution(&cfg)?;
            let lines = absorption_spectrum(&sol, r.laser.omega_lx, r.laser.omega_ly)?;
            let total: f64 = lines.iter().map(|l| l.weight).sum();
            let reference = cfg.ex_line();
            Ok(lines
                .iter()
                .filter(|l| l.weight > r.min_line_weight * total)
                .map(|l| {
                    vec![
                        e1.into(),
                        (l.frequency - reference).into(),
                        l.weight.into(),
                        Cell::Int(l.branch as i64),
                        Cell::Int(l.order),
                    ]
                })
                .collect())
        })
        .collect();
    let mut t = Table::new(
        "floquet-spectrum",
        vec!["E1_GHz", "detuning_GHz", "weight_GHz2", "branch", "order"],
    );
    for rows in per_drive {
        for row in rows? {
            t.push(row);
        }
    }
    Ok((vec![t], Vec::new()))
}

fn ple(r: &Resolved) -> Result<(Vec<Table>, Warnings)> {
    let spec = SweepSpec {
        laser_detunings: r.detunings.clone(),
        drive_amplitudes: r.drives.clone(),
        evolve_window: r.evolve_window,
        alpha: r.alpha.unwrap_or(1.0),
        beta: r.beta,
        diffusion: r.ple_diffusion.then_some(r.noise),
        sample_step: r.sample_step,
        ode: r.ode,
    };
    let map = ple_sweep(&spec, &r.strain, &r.laser, &r.relax)?;
    let warnings = map
        .failures
        .iter()
        .map(|f| {
            format!(
                "E1 = {} GHz, detuning = {} GHz: {}",
                map.drive_amplitudes[f.drive_index], map.detunings[f.detuning_index], f.error
            )
        })
        .collect();
    let mut t = Table::new("ple-sweep", vec!["E1_GHz", "detuning_GHz", "PL_arb"]);
    for (i, &e1) in map.drive_amplitudes.iter().enumerate() {
        for (j, &d) in map.detunings.iter().enumerate() {
            t.push(vec![e1.into(), d.into(), map.pl[i][j].into()]);
        }
    }
    Ok((vec![t], warnings))
}

fn rabi_time(r: &Resolved) -> Result<(Vec<Table>, Warnings)> {
    let h = &r.histogram;
    let spec = HistogramSpec {
        pulse: r.pulse,
        diffusion_draws: h.diffusion_draws.unwrap_or_default(),
        diffusion_sigma: h.diffusion_sigma.unwrap_or_default(),
        random_drive_phase: h.random_drive_phase.unwrap_or_default(),
        bin_width: h.bin_width_ns.unwrap_or_default(),
        t_end: h.t_end_ns.unwrap_or_default(),
        beta: r.beta,
        alpha: r.alpha,
        seed: r.seed,
        ode: r.ode,
    };
    let mut traces = Table::new(
        "rabi-time",
        vec!["E1_GHz", "t_ns", "PL_norm", "residual_percent"],
    );
    let mut fits = Table::new(
        "rabi-time.fit",
        vec![
            "E1_GHz",
            "omega_R_GHz",
            "T2_ns",
            "amplitude_percent",
            "fit_ok",
        ],
    );
    let mut warnings = Vec::new();
    let (f0, f1) = r.fit_window;
    for &e1 in &r.drives {
        let hist = time_domain_histogram(&spec, &r.strain.with_drive(e1), &r.laser, &r.relax)?;
        let window = hist.window(f0, f1);
        let residual = extract_residual(&window);
        let start = window.t.first().copied().unwrap_or(f0);
        for (&t, &y) in hist.t.iter().zip(&hist.y) {
            let res = match &residual {
                Ok(rr) if t >= f0 && t <= f1 => {
                    let b = background_model(&rr.background.params, t - start);
                    100.0 * (y - b) / b
                }
                _ => f64::NAN,
            };
            traces.push(vec![e1.into(), t.into(), y.into(), res.into()]);
        }
        let fit = residual
            .and_then(|rr| fit_decaying_sinusoid(&rr.residual.window(0.0, r.rabi_fit_span)));
        match fit {
            Ok(f) => fits.push(vec![
                e1.into(),
                f.params[1].into(),
                f.params[2].into(),
                f.params[0].abs().into(),
                f.converged.into(),
            ]),
            Err(e) => {
                warnings.push(format!("E1 = {e1} GHz: {e}"));
                fits.push(vec![
                    e1.into(),
                    f64::NAN.into(),
                    f64::NAN.into(),
                    f64::NAN.into(),
                    false.into(),
                ]);
            }
        }
    }
    Ok((vec![traces, fits], warnings))
}

fn decoherence(r: &Resolved) -> Result<(Vec<Table>, Warnings)> {
    let spec = DecoherenceSpec {
        noise: NoiseConfig {
            seed: r.seed,
            ..r.noise
        },
        t_grid: r.times.clone(),
        drive_grid: r.drives.clone(),
        delta_scale: r.delta_scale,
    };
    let points = decoherence_monte_carlo(&spec, &r.strain)?;
    let mut summary = Table::new(
        "decoherence",
        vec!["E1_GHz", "omega_R_GHz", "T2_ns", "window_limited"],
    );
    let mut traj = Table::new("decoherence.trajectories", vec!["E1_GHz", "t_ns", "P_y"]);
    let mut warnings = Vec::new();
    for p in &points {
        match &p.fit {
            Ok(f) => summary.push(vec![
                p.e1.into(),
                f.omega_r.into(),
                f.t2.into(),
                f.window_limited.into(),
            ]),
            Err(e) => {
                warnings.push(format!("E1 = {} GHz: {e}", p.e1));
                summary.push(vec![
                    p.e1.into(),
                    f64::NAN.into(),
                    f64::NAN.into(),
                    false.into(),
                ]);
            }
        }
        for (&t, &y) in p.mean_trajectory.t.iter().zip(&p.mean_trajectory.y) {
            traj.push(vec![p.e1.into(), t.into(), y.into()]);
        }
    }
    Ok((vec![summary, traj], warnings))
}
