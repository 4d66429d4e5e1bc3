use rustfft::{num_complex::Complex64, FftPlanner};

use crate::{Error, Result, TimeSeries};

/// One bin of a one-sided magnitude spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumBin {
    /// GHz when the time axis is in ns.
    pub frequency: f64,
    /// Unnormalised |X_m|.
    pub magnitude: f64,
}

/// One-sided magnitude spectrum of a uniformly sampled series.
///
/// The series is zero-padded to the next power of two `N`; bins `0..=N/2` are
/// returned. Magnitudes are unnormalised, so for real input
/// `Σ|x|² = (|X_0|² + 2 Σ_{0<m<N/2} |X_m|² + |X_{N/2}|²) / N`.
pub fn fft_magnitude_spectrum(series: &TimeSeries) -> Result<Vec<SpectrumBin>> {
    if series.len() < 2 {
        return Err(Error::domain("spectrum needs at least two samples"));
    }
    let dt = series
        .uniform_step()
        .ok_or_else(|| Error::domain("spectrum needs a uniform, increasing time grid"))?;
    let n = series.len().next_power_of_two();
    let mut buf: Vec<Complex64> = series
        .y
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(n)
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let df = 1.0 / (n as f64 * dt);
    Ok(buf[..=n / 2]
        .iter()
        .enumerate()
        .map(|(m, x)| SpectrumBin {
            frequency: m as f64 * df,
            magnitude: x.norm(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::linspace;

    #[test]
    fn constant_goes_to_dc() {
        let s = TimeSeries::from_fn(&linspace(0.0, 7.0, 8), |_| 2.0);
        let spec = fft_magnitude_spectrum(&s).unwrap();
        assert!((spec[0].magnitude - 16.0).abs() < 1e-12);
        assert!(spec[1..].iter().all(|b| b.magnitude < 1e-12));
    }

    #[test]
    fn aligned_tone_peak() {
        let t: Vec<f64> = (0..256).map(|i| i as f64 * 0.25).collect();
        let s = TimeSeries::from_fn(&t, |t| (std::f64::consts::TAU * 0.5 * t).cos());
        let spec = fft_magnitude_spectrum(&s).unwrap();
        let peak = spec
            .iter()
            .max_by(|a, b| a.magnitude.total_cmp(&b.magnitude))
            .unwrap();
        assert!((peak.frequency - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_grids() {
        let s = TimeSeries::new(vec![0.0, 1.0, 3.0], vec![1.0; 3]).unwrap();
        assert!(fft_magnitude_spectrum(&s).is_err());
        let s = TimeSeries::new(vec![0.0], vec![1.0]).unwrap();
        assert!(fft_magnitude_spectrum(&s).is_err());
    }
}
