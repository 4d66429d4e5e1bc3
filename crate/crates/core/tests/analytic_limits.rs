//! Large-drive asymptotics and the Rabi-formula oracle.

use std::f64::consts::{PI, TAU};

use orbital_floquet::analytic::{
    asymptotic_limits, landau_zener_rabi, rabi_trajectory, sopt_rabi, SoptResult,
};
use orbital_floquet::model::StrainDriveConfig;
use orbital_floquet::ode::{integrate, OdeOptions};
use orbital_floquet::series::{arange_inclusive, linspace};
use orbital_floquet::specfun::SeededRng;

fn reference_at(e1: f64) -> StrainDriveConfig {
    StrainDriveConfig {
        v_e1: 3.13,
        ..StrainDriveConfig::reference_device()
    }
    .with_drive(e1)
}

/// Least-squares slope of log|y| against log x.
fn loglog_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let (sx, sy) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), &(x, y)| (a + x.ln(), b + y.ln()));
    let (mx, my) = (sx / n, sy / n);
    let num: f64 = pts
        .iter()
        .map(|&(x, y)| (x.ln() - mx) * (y.ln() - my))
        .sum();
    let den: f64 = pts.iter().map(|&(x, _)| (x.ln() - mx).powi(2)).sum();
    num / den
}

#[test]
fn omega0_asymptote_tracks_bessel() {
    // The asymptote oscillates through zero, so the error is measured against
    // the local envelope rather than pointwise.
    let f = 1.296;
    let mut worst = 0.0f64;
    for k in 0..=400 {
        let e1 = 10.0 * f + 0.05 * k as f64;
        let exact = sopt_rabi(&reference_at(e1)).unwrap().omega0;
        let (_, asym) = asymptotic_limits(&reference_at(e1)).unwrap();
        let envelope = 0.72 / PI.sqrt() * (f / e1).sqrt();
        worst = worst.max((asym - exact).abs() / envelope);
    }
    assert!(worst < 0.03, "worst envelope-relative error {worst}");
}

#[test]
fn omega0_asymptote_parity() {
    let (_, pos) = asymptotic_limits(&reference_at(20.0)).unwrap();
    let (_, neg) = asymptotic_limits(&reference_at(-20.0)).unwrap();
    assert_eq!(pos, -neg);
}

#[test]
fn detuning_correction_decays_inverse_square() {
    // Windowed maxima strip the oscillation; the envelope slope must be -2.
    let f = 1.296;
    let delta0 = 3.13 - 2.5 * f;
    let windows: Vec<(f64, f64)> = (0..8)
        .map(|w| {
            let lo = 10.0 * 1.3f64.powi(w);
            let peak = (0..200)
                .map(|k| {
                    let e1 = lo + k as f64 * (0.3 * lo) / 200.0;
                    (asymptotic_limits(&reference_at(e1)).unwrap().0 - delta0).abs()
                })
                .fold(0.0, f64::max);
            (lo * 1.15, peak)
        })
        .collect();
    let slope = loglog_slope(&windows);
    assert!((slope + 2.0).abs() < 0.1, "slope {slope}");
}

/// `i dψ/dt = 2π [[δ, Ω₀], [Ω₀, −δ]] ψ` from `|u⟩`, returning `|v|²` on the grid.
fn two_level_population(delta: f64, omega0: f64, grid: &[f64]) -> Vec<f64> {
    let (d, o) = (TAU * delta, TAU * omega0);
    let rhs = move |_t: f64, y: &[f64], dy: &mut [f64]| {
        // y = (Re u, Im u, Re v, Im v); du/dt = -i(d u + o v), dv/dt = -i(o u - d v)
        let (ur, ui, vr, vi) = (y[0], y[1], y[2], y[3]);
        dy[0] = d * ui + o * vi;
        dy[1] = -(d * ur + o * vr);
        dy[2] = o * ui - d * vi;
        dy[3] = -(o * ur - d * vr);
    };
    let sol = integrate(
        rhs,
        &[1.0, 0.0, 0.0, 0.0],
        grid,
        &OdeOptions::with_tolerances(1e-10, 1e-12),
    )
    .unwrap();
    sol.y.iter().map(|y| y[2] * y[2] + y[3] * y[3]).collect()
}

#[test]
fn rabi_formula_matches_schrodinger_integration() {
    let mut rng = SeededRng::new(2024, 0);
    let grid = linspace(0.0, 100.0, 2001);
    for _ in 0..20 {
        let delta = 0.2 * rng.uniform() - 0.1;
        let omega0 = 0.2 * rng.uniform() - 0.1;
        let formula = rabi_trajectory(&SoptResult::from_parts(delta, omega0), &grid);
        let direct = two_level_population(delta, omega0, &grid);
        let err = formula
            .y
            .iter()
            .zip(&direct)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "delta={delta} omega0={omega0} err={err}");
    }
}

/// Interior extrema of `y` as `(x, is_max)`.
fn extrema(x: &[f64], y: &[f64]) -> Vec<(f64, bool)> {
    (1..y.len() - 1)
        .filter_map(|i| {
            if y[i] > y[i - 1] && y[i] >= y[i + 1] {
                Some((x[i], true))
            } else if y[i] < y[i - 1] && y[i] <= y[i + 1] {
                Some((x[i], false))
            } else {
                None
            }
        })
        .collect()
}

#[test]
fn lz_extrema_track_perturbative_extrema() {
    let f = 1.296;
    let drives = arange_inclusive(4.0, 12.0, 0.005);
    let curve = |g: &dyn Fn(f64) -> f64| drives.iter().map(|&e| g(e)).collect::<Vec<_>>();
    let sopt = curve(&|e| sopt_rabi(&reference_at(e)).unwrap().omega_r);
    let lz = curve(&|e| landau_zener_rabi(&reference_at(e)).unwrap().omega_r);
    let lz_ext = extrema(&drives, &lz);
    let mut misses = Vec::new();
    for (x, is_max) in extrema(&drives, &sopt) {
        let nearest = lz_ext
            .iter()
            .filter(|e| e.1 == is_max)
            .map(|e| (e.0 - x).abs())
            .fold(f64::INFINITY, f64::min);
        if nearest > f / 4.0 {
            misses.push((x, nearest));
        }
    }
    assert!(
        misses.is_empty(),
        "perturbative extrema without a Landau-Zener partner within f_m/4: {misses:?}"
    );
}
