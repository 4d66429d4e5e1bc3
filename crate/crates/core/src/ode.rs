//! Adaptive Dormand-Prince 5(4) integration of real ODE systems with
//! fourth-order dense output at caller-specified times.

use crate::{Error, Result};

/// Step-size control and safety limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on any step (ns); `None` leaves the step unbounded.
    pub max_step: Option<f64>,
    pub initial_step: Option<f64>,
    /// Accepted plus rejected steps before giving up.
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            max_step: None,
            initial_step: None,
            max_steps: 10_000_000,
        }
    }
}

impl OdeOptions {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            ..Self::default()
        }
    }

    pub fn with_max_step(mut self, max_step: f64) -> Self {
        self.max_step = Some(max_step);
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0) || !(self.atol > 0.0) {
            return Err(Error::domain("tolerances must be positive"));
        }
        if let Some(h) = self.max_step {
            if !(h > 0.0) {
                return Err(Error::domain("max_step must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    /// Smallest accepted step; `f64::INFINITY` if no step was taken.
    pub min_step: f64,
}

/// Solution sampled at the requested output times.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeSolution {
    pub t: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub stats: StepStats,
}

// Dormand-Prince tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
// Fifth minus fourth order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Dense output.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

struct Work {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y_new: Vec<f64>,
    err: Vec<f64>,
    cont: [Vec<f64>; 5],
}

impl Work {
    fn new(n: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
            y_new: vec![0.0; n],
            err: vec![0.0; n],
            cont: std::array::from_fn(|_| vec![0.0; n]),
        }
    }
}

fn rms_norm(v: &[f64], y0: &[f64], y1: &[f64], opts: &OdeOptions) -> f64 {
    let s: f64 = v
        .iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| {
            let sc = opts.atol + opts.rtol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (s / v.len().max(1) as f64).sqrt()
}

/// Starting step from the local scale of `y` and `f(t, y)`.
fn initial_step<F>(f: &mut F, t0: f64, y0: &[f64], f0: &[f64], opts: &OdeOptions, span: f64) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let sc = |i: usize| opts.atol + opts.rtol * y0[i].abs();
    let d0 = ((0..n).map(|i| (y0[i] / sc(i)).powi(2)).sum::<f64>() / n as f64).sqrt();
    let d1 = ((0..n).map(|i| (f0[i] / sc(i)).powi(2)).sum::<f64>() / n as f64).sqrt();
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    h0 = h0.min(span);
    let y1: Vec<f64> = (0..n).map(|i| y0[i] + h0 * f0[i]).collect();
    let mut f1 = vec![0.0; n];
    f(t0 + h0, &y1, &mut f1);
    let d2 = ((0..n)
        .map(|i| ((f1[i] - f0[i]) / sc(i)).powi(2))
        .sum::<f64>()
        / n as f64)
        .sqrt()
        / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span)
}

/// Integrate `y' = f(t, y)` from `t_out[0]` (where `y = y0`) and report `y`
/// at every entry of `t_out`.
///
/// `t_out` must be strictly increasing. Values between steps come from the
/// fourth-order continuous extension of the method, so the output grid does
/// not influence step selection.
pub fn integrate<F>(mut f: F, y0: &[f64], t_out: &[f64], opts: &OdeOptions) -> Result<OdeSolution>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    opts.validate()?;
    if t_out.is_empty() {
        return Err(Error::domain("output grid is empty"));
    }
    if t_out.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::domain("output grid must be strictly increasing"));
    }
    let n = y0.len();
    let mut out = Vec::with_capacity(t_out.len());
    out.push(y0.to_vec());
    let mut stats = StepStats {
        min_step: f64::INFINITY,
        ..Default::default()
    };
    let t_end = *t_out.last().unwrap();
    let mut t = t_out[0];
    if t_out.len() == 1 {
        return Ok(OdeSolution {
            t: t_out.to_vec(),
            y: out,
            stats,
        });
    }

    let mut y = y0.to_vec();
    let mut w = Work::new(n);
    f(t, &y, &mut w.k[0]);
    let hmax = opts.max_step.unwrap_or(f64::INFINITY).min(t_end - t);
    let mut h = opts
        .initial_step
        .unwrap_or_else(|| initial_step(&mut f, t, &y, &w.k[0].clone(), opts, t_end - t))
        .min(hmax);
    let mut next = 1;
    let mut last_rejected = false;

    while next < t_out.len() {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::Integration {
                t,
                reason: format!("exceeded {} steps", opts.max_steps),
            });
        }
        let h_floor = 1e-14 * t.abs().max(1.0);
        if h < h_floor {
            return Err(Error::Integration {
                t,
                reason: format!("step size underflow (h = {h:.3e})"),
            });
        }
        let remaining = t_end - t;
        let mut hit_end = false;
        if h >= remaining {
            h = remaining;
            hit_end = true;
        }

        let stages: [(f64, &[f64]); 5] = [
            (C2, &[A21]),
            (C3, &[A31, A32]),
            (C4, &[A41, A42, A43]),
            (C5, &[A51, A52, A53, A54]),
            (1.0, &[A61, A62, A63, A64, A65]),
        ];
        for (s, (c, a)) in stages.iter().enumerate() {
            for i in 0..n {
                let mut acc = y[i];
                for (j, &aj) in a.iter().enumerate() {
                    acc += h * aj * w.k[j][i];
                }
                w.tmp[i] = acc;
            }
            f(t + c * h, &w.tmp, &mut w.k[s + 1]);
        }
        for i in 0..n {
            w.y_new[i] = y[i]
                + h * (A71 * w.k[0][i]
                    + A73 * w.k[2][i]
                    + A74 * w.k[3][i]
                    + A75 * w.k[4][i]
                    + A76 * w.k[5][i]);
        }
        let t_new = if hit_end { t_end } else { t + h };
        f(t_new, &w.y_new, &mut w.k[6]);
        for i in 0..n {
            w.err[i] = h
                * (E1 * w.k[0][i]
                    + E3 * w.k[2][i]
                    + E4 * w.k[3][i]
                    + E5 * w.k[4][i]
                    + E6 * w.k[5][i]
                    + E7 * w.k[6][i]);
        }
        let err = rms_norm(&w.err, &y, &w.y_new, opts);
        if !err.is_finite() {
            stats.rejected += 1;
            last_rejected = true;
            h *= 0.1;
            continue;
        }

        if err <= 1.0 {
            stats.accepted += 1;
            stats.min_step = stats.min_step.min(h);
            for i in 0..n {
                let dy = w.y_new[i] - y[i];
                let bspl = h * w.k[0][i] - dy;
                w.cont[0][i] = y[i];
                w.cont[1][i] = dy;
                w.cont[2][i] = bspl;
                w.cont[3][i] = dy - h * w.k[6][i] - bspl;
                w.cont[4][i] = h
                    * (D1 * w.k[0][i]
                        + D3 * w.k[2][i]
                        + D4 * w.k[3][i]
                        + D5 * w.k[4][i]
                        + D6 * w.k[5][i]
                        + D7 * w.k[6][i]);
            }
            while next < t_out.len() && t_out[next] <= t_new {
                let tq = t_out[next];
                if tq == t_new {
                    out.push(w.y_new.clone());
                } else {
                    let th = (tq - t) / h;
                    let th1 = 1.0 - th;
                    out.push(
                        (0..n)
                            .map(|i| {
                                w.cont[0][i]
                                    + th * (w.cont[1][i]
                                        + th1
                                            * (w.cont[2][i]
                                                + th * (w.cont[3][i] + th1 * w.cont[4][i])))
                            })
                            .collect(),
                    );
                }
                next += 1;
            }
            t = t_new;
            std::mem::swap(&mut y, &mut w.y_new);
            w.k.swap(0, 6);

            let mut factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            if last_rejected {
                factor = factor.min(1.0);
            }
            last_rejected = false;
            h = (h * factor).min(hmax);
        } else {
            stats.rejected += 1;
            last_rejected = true;
            h *= (0.9 * err.powf(-0.2)).max(0.2);
        }
    }

    Ok(OdeSolution {
        t: t_out.to_vec(),
        y: out,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let grid: Vec<f64> = (0..=20).map(|k| 0.5 * k as f64).collect();
        let sol = integrate(
            |_, y, dy| dy[0] = -0.3 * y[0],
            &[2.0],
            &grid,
            &OdeOptions::default(),
        )
        .unwrap();
        for (t, y) in sol.t.iter().zip(&sol.y) {
            assert!((y[0] - 2.0 * (-0.3 * t).exp()).abs() < 1e-8, "t={t}");
        }
        assert!(sol.stats.accepted > 0);
    }

    #[test]
    fn harmonic_oscillator_dense_output() {
        let w = 7.3;
        let grid: Vec<f64> = (0..=997).map(|k| 0.01 * k as f64).collect();
        let sol = integrate(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -w * w * y[0];
            },
            &[1.0, 0.0],
            &grid,
            &OdeOptions::with_tolerances(1e-10, 1e-12),
        )
        .unwrap();
        let worst = sol
            .t
            .iter()
            .zip(&sol.y)
            .map(|(t, y)| (y[0] - (w * t).cos()).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-8, "worst {worst}");
    }

    #[test]
    fn tighter_tolerance_is_more_accurate() {
        let grid = [0.0, 10.0];
        let run = |tol: f64| {
            let s = integrate(
                |t, y, dy| dy[0] = (3.0 * t).cos() * y[0],
                &[1.0],
                &grid,
                &OdeOptions::with_tolerances(tol, tol * 1e-2),
            )
            .unwrap();
            (s.y[1][0] - ((3.0f64 * 10.0).sin() / 3.0).exp()).abs()
        };
        assert!(run(1e-10) < run(1e-6));
    }

    #[test]
    fn max_step_is_respected() {
        let sol = integrate(
            |_, _, dy| dy[0] = 0.0,
            &[1.0],
            &[0.0, 10.0],
            &OdeOptions::default().with_max_step(0.5),
        )
        .unwrap();
        assert!(sol.stats.accepted >= 20);
    }

    #[test]
    fn rejects_bad_grid() {
        let f = |_: f64, _: &[f64], dy: &mut [f64]| dy[0] = 0.0;
        assert!(integrate(f, &[0.0], &[0.0, 0.0], &OdeOptions::default()).is_err());
        assert!(integrate(f, &[0.0], &[], &OdeOptions::default()).is_err());
    }

    #[test]
    fn blow_up_reports_integration_error() {
        let err = integrate(
            |_, y, dy| dy[0] = y[0] * y[0],
            &[1.0],
            &[0.0, 2.0],
            &OdeOptions::default(),
        )
        .unwrap_err();
        assert!(
            matches!(err, Error::Integration { t, .. } if (t - 1.0).abs() < 1e-2),
            "{err:?}"
        );
    }
}
