//! Reproducible, stream-split Gaussian sampling.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::{Error, Result};

/// ChaCha8 generator keyed by a master seed and an independent stream index.
///
/// Each Monte Carlo sample gets its own stream, so results do not depend on
/// how samples are scheduled across threads.
#[derive(Debug, Clone)]
pub struct SeededRng {
    master_seed: u64,
    stream_index: u64,
    inner: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl SeededRng {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(master_seed);
        inner.set_stream(stream_index);
        Self {
            master_seed,
            stream_index,
            inner,
            spare_normal: None,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    /// Uniform in the half-open interval (0, 1].
    pub fn uniform_open0(&mut self) -> f64 {
        // 53 random mantissa bits, shifted off zero.
        ((self.inner.next_u64() >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal draw (Box-Muller; the second variate is kept for the next call).
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = self.uniform_open0();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let phi = std::f64::consts::TAU * u2;
        self.spare_normal = Some(r * phi.sin());
        r * phi.cos()
    }
}

/// One draw from N(mean, sigma²).
pub fn gaussian_sample(rng: &mut SeededRng, mean: f64, sigma: f64) -> Result<f64> {
    if !(sigma >= 0.0) {
        return Err(Error::domain(format!(
            "negative standard deviation {sigma}"
        )));
    }
    let z = rng.standard_normal();
    if sigma == 0.0 {
        return Ok(mean);
    }
    Ok(mean + sigma * z)
}
