//! Box-bounded Levenberg-Marquardt least squares and the fit models built
//! on it: a slow background with a damped oscillation, a damped sinusoid,
//! and a two-Lorentzian spectral doublet.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};

use crate::series::TimeSeries;
use crate::specfun::fft_magnitude_spectrum;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: Vec<f64>,
    /// One-sigma errors from the local curvature scaled by the residual variance.
    pub param_errors: Vec<f64>,
    /// `√Σ r_i²`.
    pub residual_norm: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    pub initial_lambda: f64,
    /// Stop once an accepted step lowers the cost by less than this fraction.
    pub rel_cost_tol: f64,
    /// Stop once the projected gradient ∞-norm falls below this.
    pub grad_tol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            initial_lambda: 1e-3,
            rel_cost_tol: 1e-10,
            grad_tol: 1e-8,
        }
    }
}

/// Unbounded interval.
pub const FREE: (f64, f64) = (f64::NEG_INFINITY, f64::INFINITY);

/// Least-squares fit of `model(params, t)` to `data` within box `bounds`.
pub fn levenberg_marquardt<M>(
    model: M,
    data: &TimeSeries,
    init: &[f64],
    bounds: &[(f64, f64)],
) -> Result<FitResult>
where
    M: Fn(&[f64], f64) -> f64,
{
    levenberg_marquardt_with(model, data, init, bounds, &LmOptions::default())
}

pub fn levenberg_marquardt_with<M>(
    model: M,
    data: &TimeSeries,
    init: &[f64],
    bounds: &[(f64, f64)],
    opts: &LmOptions,
) -> Result<FitResult>
where
    M: Fn(&[f64], f64) -> f64,
{
    let np = init.len();
    let nd = data.len();
    if bounds.len() != np {
        return Err(Error::Fit(format!(
            "{} bounds for {np} parameters",
            bounds.len()
        )));
    }
    if nd < np {
        return Err(Error::Fit(format!("{nd} data points for {np} parameters")));
    }
    for (k, (&p, &(lo, hi))) in init.iter().zip(bounds).enumerate() {
        if !(lo <= hi) || !(p >= lo && p <= hi) || !p.is_finite() {
            return Err(Error::Fit(format!(
                "initial parameter {k} = {p} outside [{lo}, {hi}]"
            )));
        }
    }
    let clamp = |p: &mut [f64]| {
        for (v, &(lo, hi)) in p.iter_mut().zip(bounds) {
            *v = v.clamp(lo, hi);
        }
    };
    let residuals = |p: &[f64]| -> DVector<f64> {
        DVector::from_iterator(
            nd,
            data.t.iter().zip(&data.y).map(|(&t, &y)| model(p, t) - y),
        )
    };
    let cost_of = |r: &DVector<f64>| r.norm_squared();
    let jacobian = |p: &[f64]| -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(nd, np);
        let mut q = p.to_vec();
        for k in 0..np {
            let (lo, hi) = bounds[k];
            let h = 1e-6 * p[k].abs().max(1e-3);
            let (a, b) = if p[k] + h > hi {
                (p[k] - h, p[k])
            } else if p[k] - h < lo {
                (p[k], p[k] + h)
            } else {
                (p[k] - h, p[k] + h)
            };
            for (i, &t) in data.t.iter().enumerate() {
                q[k] = b;
                let fb = model(&q, t);
                q[k] = a;
                let fa = model(&q, t);
                jac[(i, k)] = (fb - fa) / (b - a);
            }
            q[k] = p[k];
        }
        jac
    };

    let mut p = init.to_vec();
    let mut r = residuals(&p);
    let mut cost = cost_of(&r);
    if !cost.is_finite() {
        return Err(Error::Fit(
            "model is not finite at the initial parameters".into(),
        ));
    }
    let data_scale: f64 = data
        .y
        .iter()
        .map(|y| y * y)
        .sum::<f64>()
        .max(f64::MIN_POSITIVE);
    let mut lambda = opts.initial_lambda;
    let mut converged = false;
    let mut iterations = 0;
    let mut jac = jacobian(&p);

    while iterations < opts.max_iterations {
        iterations += 1;
        let g = jac.transpose() * &r;
        let a = jac.transpose() * &jac;
        // Parameters pinned on a bound with the descent direction pointing out
        // are frozen for this step; the rest form the free subsystem.
        let free: Vec<usize> = (0..np)
            .filter(|&k| {
                let (lo, hi) = bounds[k];
                !((p[k] <= lo && g[k] > 0.0) || (p[k] >= hi && g[k] < 0.0))
            })
            .collect();
        let grad_norm = free.iter().map(|&k| g[k].abs()).fold(0.0, f64::max);
        if grad_norm < opts.grad_tol || cost <= 1e-28 * data_scale {
            converged = true;
            break;
        }
        let nf = free.len();
        let af = DMatrix::from_fn(nf, nf, |i, j| a[(free[i], free[j])]);
        let gf = DVector::from_fn(nf, |i, _| g[free[i]]);
        let diag_floor = 1e-12
            * (0..nf)
                .map(|k| af[(k, k)])
                .fold(0.0, f64::max)
                .max(f64::MIN_POSITIVE);
        let mut accepted = false;
        while lambda < 1e16 {
            let mut damped = af.clone();
            for k in 0..nf {
                damped[(k, k)] += lambda * af[(k, k)].max(diag_floor);
            }
            let step_free = match damped.clone().cholesky() {
                Some(ch) => ch.solve(&(-&gf)),
                None => match damped.lu().solve(&(-&gf)) {
                    Some(s) => s,
                    None => {
                        lambda *= 10.0;
                        continue;
                    }
                },
            };
            let mut step = DVector::zeros(np);
            for (i, &k) in free.iter().enumerate() {
                step[k] = step_free[i];
            }
            let mut trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            clamp(&mut trial);
            let r_trial = residuals(&trial);
            let c_trial = cost_of(&r_trial);
            if c_trial.is_finite() && c_trial < cost {
                let rel = (cost - c_trial) / cost;
                p = trial;
                r = r_trial;
                cost = c_trial;
                lambda = (lambda / 10.0).max(1e-15);
                accepted = true;
                if rel < opts.rel_cost_tol {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // No descent direction at machine precision: a numerical minimum.
            converged = true;
            break;
        }
        if converged {
            break;
        }
        jac = jacobian(&p);
    }

    let jac = jacobian(&p);
    let dof = (nd - np).max(1) as f64;
    let variance = cost / dof;
    let param_errors = match (jac.transpose() * &jac).try_inverse() {
        Some(cov) => (0..np)
            .map(|k| (cov[(k, k)] * variance).max(0.0).sqrt())
            .collect(),
        None => vec![f64::NAN; np],
    };
    Ok(FitResult {
        params: p,
        param_errors,
        residual_norm: cost.sqrt(),
        converged,
        iterations,
    })
}

/// Linear least squares `y ≈ Σ_k c_k basis_k(t)`.
fn linear_lsq(data: &TimeSeries, basis: &[&dyn Fn(f64) -> f64]) -> Option<Vec<f64>> {
    let a = DMatrix::from_fn(data.len(), basis.len(), |i, k| basis[k](data.t[i]));
    let y = DVector::from_column_slice(&data.y);
    let sol = (a.transpose() * &a).lu().solve(&(a.transpose() * y))?;
    Some(sol.iter().copied().collect())
}

/// Dominant frequency (GHz) at or above `min_frequency` of the mean-removed
/// series, refined by parabolic interpolation of the log magnitude. `None`
/// when no such bin rises above four times the median.
fn spectral_peak(series: &TimeSeries, min_frequency: f64) -> Result<Option<f64>> {
    let mean = series.mean();
    let centred = TimeSeries::new(
        series.t.clone(),
        series.y.iter().map(|y| y - mean).collect(),
    )?;
    let spec = fft_magnitude_spectrum(&centred)?;
    if spec.len() < 3 {
        return Ok(None);
    }
    let Some((k, peak)) = spec
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, b)| b.frequency >= min_frequency)
        .max_by(|a, b| a.1.magnitude.total_cmp(&b.1.magnitude))
        .map(|(k, b)| (k, b.magnitude))
    else {
        return Ok(None);
    };
    let mut mags: Vec<f64> = spec[1..].iter().map(|b| b.magnitude).collect();
    mags.sort_by(f64::total_cmp);
    let median = mags[mags.len() / 2];
    if !(peak > 4.0 * median) || peak == 0.0 {
        return Ok(None);
    }
    let df = spec[1].frequency - spec[0].frequency;
    let mut f = spec[k].frequency;
    if k + 1 < spec.len() {
        let (a, b, c) = (
            spec[k - 1].magnitude.max(1e-300).ln(),
            peak.ln(),
            spec[k + 1].magnitude.max(1e-300).ln(),
        );
        let den = a - 2.0 * b + c;
        if den < 0.0 {
            f += 0.5 * (a - c) / den * df;
        }
    }
    Ok(Some(f.max(0.0)))
}

/// `a + b e^{−t/τ_f} + c cos(ω_k t + φ) e^{−t/τ_k}`, parameters
/// `[a, b, τ_f, c, ω_k, φ, τ_k]`, with `ω_k` in rad/ns.
pub fn background_model(p: &[f64], t: f64) -> f64 {
    p[0] + p[1] * (-t / p[2]).exp() + p[3] * (p[4] * t + p[5]).cos() * (-t / p[6]).exp()
}

/// Largest oscillation angular frequency admitted by the background fit (rad/ns).
pub const BACKGROUND_OMEGA_MAX: f64 = TAU * 0.1;
/// Shortest oscillation decay admitted by the background fit (ns).
pub const BACKGROUND_TAU_MIN: f64 = 5.0;

pub fn background_bounds() -> [(f64, f64); 7] {
    [
        FREE,
        FREE,
        (1e-3, 1e5),
        (0.0, f64::INFINITY),
        (0.0, BACKGROUND_OMEGA_MAX),
        (-TAU, TAU),
        (BACKGROUND_TAU_MIN, 1e5),
    ]
}

/// Fit [`background_model`] with `ω_k ≤ 2π·0.1 rad/ns` and `τ_k ≥ 5 ns`.
pub fn fit_background_model(data: &TimeSeries) -> Result<FitResult> {
    if data.len() < 8 {
        return Err(Error::Fit("background fit needs at least 8 points".into()));
    }
    let n = data.len();
    let t0 = data.t[0];
    let span = data.t[n - 1] - t0;
    let tail = (n / 10).max(1);
    let a0 = data.y[n - tail..].iter().sum::<f64>() / tail as f64;
    let b0 = data.y[0] - a0;
    let tau0 = data
        .t
        .iter()
        .zip(&data.y)
        .find(|(_, &y)| (y - a0).abs() < b0.abs() / std::f64::consts::E)
        .map(|(&t, _)| (t - t0).max(span / n as f64))
        .unwrap_or(span / 3.0);
    let exp_model = |p: &[f64], t: f64| p[0] + p[1] * (-t / p[2]).exp();
    let stage1 = levenberg_marquardt(
        exp_model,
        data,
        &[a0, b0 * (t0 / tau0).exp().min(1e6), tau0.clamp(1e-3, 1e5)],
        &[FREE, FREE, (1e-3, 1e5)],
    )?;
    let [a, b, tau_f] = [stage1.params[0], stage1.params[1], stage1.params[2]];
    let resid = TimeSeries::new(
        data.t.clone(),
        data.t
            .iter()
            .zip(&data.y)
            .map(|(&t, &y)| y - exp_model(&stage1.params, t))
            .collect(),
    )?;
    let mut omegas = vec![
        0.25 * BACKGROUND_OMEGA_MAX,
        0.5 * BACKGROUND_OMEGA_MAX,
        BACKGROUND_OMEGA_MAX,
    ];
    if resid.uniform_step().is_some() {
        if let Some(f) = spectral_peak(&resid, 0.0)? {
            omegas.insert(0, (TAU * f).min(BACKGROUND_OMEGA_MAX));
        }
    }
    let mut best: Option<FitResult> = None;
    for &omega in &omegas {
        for tau_k in [10.0, 40.0] {
            let damp = |t: f64| (-t / tau_k).exp();
            let (c, phi) = match linear_lsq(
                &resid,
                &[&|t| damp(t) * (omega * t).cos(), &|t| {
                    damp(t) * (omega * t).sin()
                }],
            ) {
                Some(v) => (v[0].hypot(v[1]), (-v[1]).atan2(v[0])),
                None => (0.0, 0.0),
            };
            let init = [a, b, tau_f, c, omega, phi, tau_k];
            let fit = levenberg_marquardt(background_model, data, &init, &background_bounds())?;
            if best
                .as_ref()
                .is_none_or(|bst| fit.residual_norm < bst.residual_norm)
            {
                best = Some(fit);
            }
        }
    }
    Ok(best.unwrap())
}

/// `A cos(2πΩt + φ) e^{−t/T} + c`, parameters `[A, Ω, T, φ, c]`, `Ω` in GHz.
pub fn decaying_sinusoid_model(p: &[f64], t: f64) -> f64 {
    p[0] * (TAU * p[1] * t + p[3]).cos() * (-t / p[2]).exp() + p[4]
}

/// Longest decay time the damped-sinusoid fit may return (ns).
pub const SINUSOID_T_MAX: f64 = 1e6;

/// Fit [`decaying_sinusoid_model`], seeding `Ω` from the FFT peak and `T`
/// from the decay of the RMS between the two halves of the record.
///
/// Returns [`Error::Fit`] without attempting a fit when the input is flat
/// or has no spectral peak.
pub fn fit_decaying_sinusoid(series: &TimeSeries) -> Result<FitResult> {
    let n = series.len();
    if n < 8 {
        return Err(Error::Fit(
            "damped-sinusoid fit needs at least 8 points".into(),
        ));
    }
    let dt = series
        .uniform_step()
        .ok_or_else(|| Error::Fit("damped-sinusoid fit needs a uniform grid".into()))?;
    let mean = series.mean();
    let spread = series
        .y
        .iter()
        .map(|y| (y - mean).abs())
        .fold(0.0, f64::max);
    if spread <= 1e-12 * (1.0 + mean.abs()) {
        return Err(Error::Fit("fit not attempted: input is constant".into()));
    }
    let window = series.t[n - 1] - series.t[0];
    // Slower components complete fewer than two periods and read as drift.
    let freq = spectral_peak(series, 2.0 / window * (1.0 - 1e-9))?.ok_or_else(|| {
        Error::Fit("fit not attempted: no spectral peak above the noise floor".into())
    })?;
    let half = n / 2;
    let rms =
        |ys: &[f64]| (ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / ys.len() as f64).sqrt();
    let (r1, r2) = (rms(&series.y[..half]), rms(&series.y[half..]));
    let t_rms = if r2 > 0.0 && r1 > r2 {
        0.5 * window / (r1 / r2).ln()
    } else {
        5.0 * window
    };
    let nyquist = 0.5 / dt;
    let bounds = [
        (0.0, f64::INFINITY),
        (0.0, nyquist),
        (0.5 * dt, SINUSOID_T_MAX),
        (-3.0 * PI, 3.0 * PI),
        FREE,
    ];
    let mut best: Option<FitResult> = None;
    for tau in [t_rms.clamp(dt, SINUSOID_T_MAX), 0.5 * window] {
        let omega = TAU * freq;
        let damp = |t: f64| (-t / tau).exp();
        let Some(v) = linear_lsq(
            series,
            &[&|_| 1.0, &|t| damp(t) * (omega * t).cos(), &|t| {
                damp(t) * (omega * t).sin()
            }],
        ) else {
            continue;
        };
        let init = [
            v[1].hypot(v[2]),
            freq.min(nyquist),
            tau,
            (-v[2]).atan2(v[1]),
            v[0],
        ];
        let fit = levenberg_marquardt(decaying_sinusoid_model, series, &init, &bounds)?;
        if best
            .as_ref()
            .is_none_or(|b| fit.residual_norm < b.residual_norm)
        {
            best = Some(fit);
        }
    }
    best.ok_or_else(|| Error::Fit("damped-sinusoid seeding failed".into()))
}

/// `c + Σ_i A_i / (1 + ((x − x_i)/γ_i)²)`, parameters `[c, A₁, x₁, γ₁, A₂, x₂, γ₂]`
/// (or the first four for a single line).
pub fn lorentzian_model(p: &[f64], x: f64) -> f64 {
    let mut y = p[0];
    for line in p[1..].chunks_exact(3) {
        let u = (x - line[1]) / line[2];
        y += line[0] / (1.0 + u * u);
    }
    y
}

#[derive(Debug, Clone, PartialEq)]
pub struct DoubletFit {
    /// Two separate maxima were found and fitted.
    pub resolved: bool,
    /// Lower center (GHz); the single-line center when unresolved.
    pub center1: f64,
    pub center2: f64,
    pub splitting: f64,
    pub fit: FitResult,
}

/// Local maxima whose topographic prominence exceeds `min_prominence`,
/// strongest first.
fn prominent_peaks(y: &[f64], min_prominence: f64) -> Vec<usize> {
    let n = y.len();
    let mut peaks: Vec<(usize, f64)> = Vec::new();
    for i in 0..n {
        let left_ok = i == 0 || y[i] > y[i - 1];
        let right_ok = i + 1 == n || y[i] >= y[i + 1];
        if !(left_ok && right_ok) {
            continue;
        }
        let mut lmin = y[i];
        let mut j = i;
        while j > 0 && y[j - 1] <= y[i] {
            j -= 1;
            lmin = lmin.min(y[j]);
        }
        let mut rmin = y[i];
        let mut j = i;
        while j + 1 < n && y[j + 1] <= y[i] {
            j += 1;
            rmin = rmin.min(y[j]);
        }
        // Maxima on the record edge get zero prominence.
        let prom = y[i] - lmin.max(rmin);
        if prom >= min_prominence {
            peaks.push((i, prom));
        }
    }
    peaks.sort_by(|a, b| y[b.0].total_cmp(&y[a.0]));
    peaks.into_iter().map(|(i, _)| i).collect()
}

/// Half width at half maximum walking outward from `peak` above `floor`,
/// stopping at `limit` samples.
fn hwhm(x: &[f64], y: &[f64], peak: usize, floor: f64, limit: usize) -> f64 {
    let half = floor + 0.5 * (y[peak] - floor);
    let mut widths = Vec::new();
    let mut i = peak;
    while i > 0 && peak - i < limit && y[i] > half {
        i -= 1;
    }
    if i != peak {
        widths.push(x[peak] - x[i]);
    }
    let mut i = peak;
    while i + 1 < y.len() && i - peak < limit && y[i] > half {
        i += 1;
    }
    if i != peak {
        widths.push(x[i] - x[peak]);
    }
    widths.into_iter().fold(f64::INFINITY, f64::min)
}

/// Fit two Lorentzians to a spectrum (detuning in `t`, signal in `y`).
///
/// With fewer than two prominent maxima a single Lorentzian is fitted and
/// the result is marked unresolved.
pub fn fit_ple_doublet(spectrum: &TimeSeries) -> Result<DoubletFit> {
    let n = spectrum.len();
    if n < 8 {
        return Err(Error::Fit("doublet fit needs at least 8 points".into()));
    }
    let (x, y) = (&spectrum.t, &spectrum.y);
    let ymin = y.iter().copied().fold(f64::INFINITY, f64::min);
    let ymax = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(ymax > ymin) {
        return Err(Error::Fit("doublet fit: flat spectrum".into()));
    }
    let (x_lo, x_hi) = (x[0].min(x[n - 1]), x[0].max(x[n - 1]));
    let range = x_hi - x_lo;
    let dx = range / (n - 1) as f64;
    let peaks = prominent_peaks(y, 0.1 * (ymax - ymin));
    if peaks.is_empty() {
        return Err(Error::Fit("doublet fit: no peak found".into()));
    }
    let width_bounds = (0.1 * dx, range);

    if peaks.len() < 2 {
        let p = peaks[0];
        let g = hwhm(x, y, p, ymin, n).clamp(dx, range);
        let init = [ymin, y[p] - ymin, x[p], g];
        let fit = levenberg_marquardt(
            lorentzian_model,
            spectrum,
            &init,
            &[FREE, (0.0, f64::INFINITY), (x_lo, x_hi), width_bounds],
        )?;
        let c = fit.params[2];
        return Ok(DoubletFit {
            resolved: false,
            center1: c,
            center2: c,
            splitting: 0.0,
            fit,
        });
    }

    let (mut p1, mut p2) = (peaks[0], peaks[1]);
    if x[p1] > x[p2] {
        std::mem::swap(&mut p1, &mut p2);
    }
    let sep = (x[p2] - x[p1]).abs();
    let limit = ((p2 as isize - p1 as isize).unsigned_abs() / 2).max(1);
    let g1 = hwhm(x, y, p1, ymin, limit).clamp(dx, 0.5 * sep);
    let g2 = hwhm(x, y, p2, ymin, limit).clamp(dx, 0.5 * sep);
    let init = [ymin, y[p1] - ymin, x[p1], g1, y[p2] - ymin, x[p2], g2];
    let amp = (0.0, f64::INFINITY);
    let centre = (x_lo, x_hi);
    let fit = levenberg_marquardt(
        lorentzian_model,
        spectrum,
        &init,
        &[FREE, amp, centre, width_bounds, amp, centre, width_bounds],
    )?;
    let (c1, c2) = (
        fit.params[2].min(fit.params[5]),
        fit.params[2].max(fit.params[5]),
    );
    Ok(DoubletFit {
        resolved: true,
        center1: c1,
        center2: c2,
        splitting: c2 - c1,
        fit,
    })
}
