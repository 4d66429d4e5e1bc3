//! Uniformly or non-uniformly sampled real time series.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Sampled real values on a time grid (ns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub t: Vec<f64>,
    pub y: Vec<f64>,
}

impl TimeSeries {
    pub fn new(t: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if t.len() != y.len() {
            return Err(Error::domain(format!(
                "time grid has {} points but {} values",
                t.len(),
                y.len()
            )));
        }
        Ok(Self { t, y })
    }

    /// Evaluate `f` on `t`.
    pub fn from_fn(t: &[f64], f: impl Fn(f64) -> f64) -> Self {
        Self {
            t: t.to_vec(),
            y: t.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Sampling step if the grid is uniform to a relative tolerance of 1e-9.
    pub fn uniform_step(&self) -> Option<f64> {
        if self.t.len() < 2 {
            return None;
        }
        let dt = (self.t[self.t.len() - 1] - self.t[0]) / (self.t.len() - 1) as f64;
        if dt <= 0.0 {
            return None;
        }
        let uniform = self
            .t
            .windows(2)
            .all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-9 * dt.max(1.0));
        uniform.then_some(dt)
    }

    /// Samples with `t0 <= t <= t1`.
    pub fn window(&self, t0: f64, t1: f64) -> TimeSeries {
        let (t, y) = self
            .t
            .iter()
            .zip(&self.y)
            .filter(|(&t, _)| t >= t0 && t <= t1)
            .map(|(&t, &y)| (t, y))
            .unzip();
        TimeSeries { t, y }
    }

    /// Shift the time origin so the first sample sits at `t = 0`.
    pub fn rebased(&self) -> TimeSeries {
        let t0 = self.t.first().copied().unwrap_or(0.0);
        TimeSeries {
            t: self.t.iter().map(|t| t - t0).collect(),
            y: self.y.clone(),
        }
    }

    pub fn mean(&self) -> f64 {
        if self.y.is_empty() {
            return f64::NAN;
        }
        self.y.iter().sum::<f64>() / self.y.len() as f64
    }
}

/// `n` uniformly spaced points from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (stop - start) / (n - 1) as f64;
            (0..n).map(|i| start + step * i as f64).collect()
        }
    }
}

/// Grid `start, start + step, ...` up to and including `stop` (within half a step).
pub fn arange_inclusive(start: f64, stop: f64, step: f64) -> Vec<f64> {
    if step <= 0.0 || stop < start {
        return vec![start];
    }
    let n = ((stop - start) / step + 0.5).floor() as usize + 1;
    (0..n).map(|i| start + step * i as f64).collect()
}
