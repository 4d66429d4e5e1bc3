//! Strain, drive, laser and relaxation parameters, and the Hamiltonian and
//! collapse-operator constructors built from them.
//!
//! Configs store ordinary frequencies in GHz and times in ns. Constructors
//! return matrices in rad/ns: the factor 2π is applied here and nowhere else.
//!
//! Three-level basis ordering is `{|0⟩, |E_x⟩, |E_y⟩}`; the excited doublet
//! alone uses `{|E_x⟩, |E_y⟩}`.

use std::f64::consts::TAU;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Dense complex matrix of dimension 2 or 3, stored inline row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: [Complex64; 9],
}

/// Density matrices share the representation; see [`validate_density`].
pub type DensityMatrix = ComplexMatrix;

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim == 2 || dim == 3, "dimension must be 2 or 3, got {dim}");
        Self {
            dim,
            data: [ZERO; 9],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = ONE;
        }
        m
    }

    /// Row-major construction; `rows.len()` sets the dimension.
    pub fn from_rows<const D: usize>(rows: [[Complex64; D]; D]) -> Self {
        let mut m = Self::zeros(D);
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// `|k⟩⟨k|`.
    pub fn pure_state(dim: usize, k: usize) -> Self {
        let mut m = Self::zeros(dim);
        m[(k, k)] = ONE;
        m
    }

    /// `|i⟩⟨j|`.
    pub fn outer(dim: usize, i: usize, j: usize) -> Self {
        let mut m = Self::zeros(dim);
        m[(i, j)] = ONE;
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Active entries, row-major.
    pub fn as_slice(&self) -> &[Complex64] {
        &self.data[..self.dim * self.dim]
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        let n = self.dim * self.dim;
        &mut self.data[..n]
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                m[(i, j)] = self[(j, i)].conj();
            }
        }
        m
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut m = *self;
        m.as_mut_slice().iter_mut().for_each(|v| *v *= s);
        m
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    /// `max |A - A†|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in i..self.dim {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// `AB - BA`.
    pub fn commutator(&self, other: &Self) -> Self {
        *self * *other - *other * *self
    }

    /// Max-abs entrywise distance.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.as_slice()
            .iter()
            .zip(other.as_slice())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let d = self.dim;
        let h = DMatrix::from_fn(d, d, |i, j| 0.5 * (self[(i, j)] + self[(j, i)].conj()));
        let mut ev: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn to_dmatrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self[(i, j)])
    }

    /// Real diagonal entries `ρ_kk`.
    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self[(i, i)].re).collect()
    }

    /// `tr ρ²`.
    pub fn purity(&self) -> f64 {
        (*self * *self).trace().re
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        debug_assert!(i < self.dim && j < self.dim);
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        debug_assert!(i < self.dim && j < self.dim);
        &mut self.data[i * self.dim + j]
    }
}

impl Mul for ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: Self) -> Self {
        assert_eq!(self.dim, rhs.dim);
        let d = self.dim;
        let mut m = Self::zeros(d);
        for i in 0..d {
            for j in 0..d {
                let mut acc = ZERO;
                for k in 0..d {
                    acc += self[(i, k)] * rhs[(k, j)];
                }
                m[(i, j)] = acc;
            }
        }
        m
    }
}

impl Add for ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(mut self, rhs: Self) -> Self {
        assert_eq!(self.dim, rhs.dim);
        self.as_mut_slice()
            .iter_mut()
            .zip(rhs.as_slice())
            .for_each(|(a, b)| *a += b);
        self
    }
}

impl Sub for ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(mut self, rhs: Self) -> Self {
        assert_eq!(self.dim, rhs.dim);
        self.as_mut_slice()
            .iter_mut()
            .zip(rhs.as_slice())
            .for_each(|(a, b)| *a -= b);
        self
    }
}

/// Check trace, Hermiticity and positivity of a density matrix.
pub fn validate_density(rho: &DensityMatrix) -> Result<()> {
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > 1e-8 || tr.im.abs() > 1e-8 {
        return Err(Error::domain(format!("density matrix trace {tr} != 1")));
    }
    let herm = rho.hermiticity_defect();
    if herm > 1e-10 {
        return Err(Error::domain(format!(
            "density matrix not Hermitian (defect {herm:.3e})"
        )));
    }
    let min = rho.hermitian_eigenvalues()[0];
    if min < -1e-8 {
        return Err(Error::domain(format!(
            "density matrix has negative eigenvalue {min:.3e}"
        )));
    }
    Ok(())
}

/// Static strain, acoustic drive and resonance order for one defect.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrainDriveConfig {
    /// Static A₁ potential (GHz).
    pub v_a1: f64,
    /// Static E₁ potential (GHz).
    pub v_e1: f64,
    /// Static E₂ potential (GHz).
    pub v_e2: f64,
    /// Dynamic A₁ amplitude (GHz).
    pub a1: f64,
    /// Dynamic E₁ amplitude (GHz).
    pub e1: f64,
    /// Drive frequency (GHz).
    pub f_m: f64,
    /// Drive phase offset (rad).
    pub phase_m: f64,
    /// Resonance order: `Δ ≈ n f_m`.
    pub n: u32,
}

/// Ratio `𝒜₁ / ℰ₁` matched to the measured sideband pattern (ℰ₁ = −0.7 𝒜₁).
pub const A1_PER_E1: f64 = -1.0 / 0.7;

/// Measured drive frequency (GHz).
pub const REFERENCE_F_M: f64 = 1.296;
/// Measured orbital splitting (GHz).
pub const REFERENCE_DELTA: f64 = 6.41;
/// Measured dipole angle (degrees).
pub const REFERENCE_THETA_DEG: f64 = -6.5;
pub const REFERENCE_N: u32 = 5;
pub const REFERENCE_V_E1: f64 = -3.13;
pub const REFERENCE_V_E2: f64 = 0.72;

impl StrainDriveConfig {
    /// Reported strain of the measured defect, undriven.
    pub fn reference_device() -> Self {
        Self {
            v_a1: 0.0,
            v_e1: REFERENCE_V_E1,
            v_e2: REFERENCE_V_E2,
            a1: 0.0,
            e1: 0.0,
            f_m: REFERENCE_F_M,
            phase_m: 0.0,
            n: REFERENCE_N,
        }
    }

    /// Same strain with drive amplitude `e1` and the matched `𝒜₁ = e1 / (−0.7)`.
    pub fn with_drive(mut self, e1: f64) -> Self {
        self.e1 = e1;
        self.a1 = e1 * A1_PER_E1;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.v_a1,
            self.v_e1,
            self.v_e2,
            self.a1,
            self.e1,
            self.f_m,
            self.phase_m,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::domain("strain/drive parameters must be finite"));
        }
        if !(self.f_m > 0.0) {
            return Err(Error::domain("f_m must be positive"));
        }
        if self.n == 0 {
            return Err(Error::domain("resonance order n must be >= 1"));
        }
        Ok(())
    }

    /// Angular drive frequency (rad/ns).
    pub fn omega_m(&self) -> f64 {
        TAU * self.f_m
    }

    /// `cos(ω_m t + φ_m)`.
    pub fn drive(&self, t: f64) -> f64 {
        (self.omega_m() * t + self.phase_m).cos()
    }

    /// Undriven orbital splitting `2√(V_E1² + V_E2²)`.
    pub fn splitting(&self) -> f64 {
        2.0 * self.v_e1.hypot(self.v_e2)
    }

    /// Undriven energy of the eigenstate continuously connected to `|E_x⟩`.
    pub fn ex_line(&self) -> f64 {
        let half = self.v_e1.hypot(self.v_e2);
        if self.v_e1 >= 0.0 {
            self.v_a1 + half
        } else {
            self.v_a1 - half
        }
    }

    /// Undriven energy of the eigenstate continuously connected to `|E_y⟩`.
    pub fn ey_line(&self) -> f64 {
        2.0 * self.v_a1 - self.ex_line()
    }
}

/// Relabel `|E_x⟩ ↔ |E_y⟩` if needed so that `V_E1 >= 0`.
///
/// Conjugation by σ_x flips the sign of every σ_z term, so `V_E1` and `ℰ₁`
/// change sign together. Spectra and Rabi frequencies are unchanged.
pub fn canonicalize(cfg: StrainDriveConfig) -> StrainDriveConfig {
    if cfg.v_e1 < 0.0 {
        StrainDriveConfig {
            v_e1: -cfg.v_e1,
            e1: -cfg.e1,
            ..cfg
        }
    } else {
        cfg
    }
}

/// Strain decomposition recovered from splitting and dipole angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrainDecomposition {
    pub v_e1: f64,
    pub v_e2: f64,
    /// `|θ| = 45°`: `V_E1` vanishes and the x/y labels are ambiguous.
    pub degenerate_basis: bool,
}

/// `V_E1 = (Δ/2) cos 2θ`, `V_E2 = (Δ/2) sin 2θ` from `tan 2θ = V_E2 / V_E1`.
pub fn strain_from_spectroscopy(delta: f64, theta_deg: f64) -> Result<StrainDecomposition> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::domain(format!(
            "splitting must be positive, got {delta}"
        )));
    }
    if !theta_deg.is_finite() || theta_deg.abs() > 45.0 {
        return Err(Error::domain(format!(
            "dipole angle must satisfy |θ| <= 45°, got {theta_deg}"
        )));
    }
    let two_theta = 2.0 * theta_deg.to_radians();
    let degenerate_basis = (theta_deg.abs() - 45.0).abs() < 1e-12;
    Ok(StrainDecomposition {
        v_e1: if degenerate_basis {
            0.0
        } else {
            0.5 * delta * two_theta.cos()
        },
        v_e2: 0.5 * delta * two_theta.sin(),
        degenerate_basis,
    })
}

/// Trapezoidal laser pulse train with imperfect extinction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseProfile {
    /// Linear rise (and fall) duration (ns).
    pub rise_time: f64,
    /// Fully open duration between the end of the rise and the start of the fall (ns).
    pub pulse_width: f64,
    /// Onset-to-onset spacing (ns).
    pub pulse_separation: f64,
    pub pulse_count: u32,
    /// Field amplitude fraction left when the modulator is closed.
    pub closed_field_fraction: f64,
    /// Onset of the first pulse (ns).
    pub first_onset: f64,
}

impl Default for PulseProfile {
    /// Two 1 ns pulses 100 ns apart, 0.75 ns edges, 8 % residual field.
    fn default() -> Self {
        Self {
            rise_time: 0.75,
            pulse_width: 1.0,
            pulse_separation: 100.0,
            pulse_count: 2,
            closed_field_fraction: 0.08,
            first_onset: 0.0,
        }
    }
}

impl PulseProfile {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.closed_field_fraction) {
            return Err(Error::domain("closed field fraction must lie in [0, 1]"));
        }
        if !(self.rise_time >= 0.0) || !(self.pulse_width >= 0.0) {
            return Err(Error::domain("rise time and pulse width must be >= 0"));
        }
        if self.pulse_count > 1
            && !(self.pulse_separation > 2.0 * self.rise_time + self.pulse_width)
        {
            return Err(Error::domain("pulses overlap: separation too short"));
        }
        Ok(())
    }

    /// Onset time of pulse `k` (0-based).
    pub fn onset(&self, k: u32) -> f64 {
        self.first_onset + k as f64 * self.pulse_separation
    }

    /// Field amplitude factor in `[closed_field_fraction, 1]`.
    pub fn envelope(&self, t: f64) -> f64 {
        let floor = self.closed_field_fraction;
        let mut open: f64 = 0.0;
        for k in 0..self.pulse_count {
            let s = t - self.onset(k);
            let fall_start = self.rise_time + self.pulse_width;
            let end = fall_start + self.rise_time;
            let o = if s < 0.0 || s > end {
                0.0
            } else if s < self.rise_time {
                s / self.rise_time
            } else if s <= fall_start {
                1.0
            } else {
                (end - s) / self.rise_time
            };
            open = open.max(o);
        }
        floor + (1.0 - floor) * open
    }
}

/// Resonant laser: detuning from the undriven `|E_x⟩` line and couplings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaserConfig {
    /// Laser frequency minus the undriven `|E_x⟩` line (GHz).
    pub detuning_x: f64,
    /// `Ω_l,x` (GHz).
    pub omega_lx: f64,
    /// `Ω_l,y` (GHz).
    pub omega_ly: f64,
    /// `None` is continuous-wave.
    pub pulse: Option<PulseProfile>,
}

impl LaserConfig {
    /// Continuous-wave laser.
    pub fn cw(detuning_x: f64, omega_lx: f64, omega_ly: f64) -> Self {
        Self {
            detuning_x,
            omega_lx,
            omega_ly,
            pulse: None,
        }
    }

    pub fn off() -> Self {
        Self::cw(0.0, 0.0, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_lx >= 0.0) || !(self.omega_ly >= 0.0) {
            return Err(Error::domain("laser couplings must be >= 0"));
        }
        if !self.detuning_x.is_finite() {
            return Err(Error::domain("laser detuning must be finite"));
        }
        if let Some(p) = &self.pulse {
            p.validate()?;
        }
        Ok(())
    }

    pub fn envelope(&self, t: f64) -> f64 {
        self.pulse.map_or(1.0, |p| p.envelope(t))
    }
}

/// Excited-state optical decay and orbital dephasing rates (1/ns).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxationConfig {
    pub gamma_opt: f64,
    pub gamma_orb: f64,
}

impl Default for RelaxationConfig {
    /// 12 ns optical lifetime, 10 ns orbital coherence.
    fn default() -> Self {
        Self {
            gamma_opt: 1.0 / 12.0,
            gamma_orb: 1.0 / 10.0,
        }
    }
}

impl RelaxationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_opt >= 0.0) || !(self.gamma_orb >= 0.0) {
            return Err(Error::domain("relaxation rates must be >= 0"));
        }
        Ok(())
    }
}

/// Gaussian electric-field noise for spectral diffusion / decoherence runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    /// Standard deviation (GHz).
    pub sigma: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) {
            return Err(Error::domain("noise sigma must be >= 0"));
        }
        if self.n_samples == 0 {
            return Err(Error::domain("noise sample count must be >= 1"));
        }
        Ok(())
    }
}

/// Static electric-field shifts `(E_A1, E_E1, E_E2)` in GHz.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FieldPerturbation {
    pub e_a1: f64,
    pub e_e1: f64,
    pub e_e2: f64,
}

/// Driven doublet Hamiltonian in `{|E_x⟩, |E_y⟩}` (rad/ns).
pub fn build_excited_hamiltonian2(t: f64, cfg: &StrainDriveConfig) -> ComplexMatrix {
    let c = cfg.drive(t);
    let a = TAU * (cfg.v_a1 + cfg.a1 * c);
    let z = TAU * (cfg.v_e1 + cfg.e1 * c);
    let x = TAU * cfg.v_e2;
    ComplexMatrix::from_rows([
        [Complex64::new(a + z, 0.0), Complex64::new(x, 0.0)],
        [Complex64::new(x, 0.0), Complex64::new(a - z, 0.0)],
    ])
}

/// Ground state plus driven doublet with laser coupling and a static field
/// perturbation, in `{|0⟩, |E_x⟩, |E_y⟩}` (rad/ns), in the frame rotating at
/// the laser frequency.
///
/// The `|0⟩` entry is the laser frequency, `ex_line + detuning_x`; the laser
/// detuning is measured from the unperturbed, undriven `|E_x⟩` line.
pub fn build_full_hamiltonian3(
    t: f64,
    cfg: &StrainDriveConfig,
    laser: &LaserConfig,
    perturbation: &FieldPerturbation,
) -> ComplexMatrix {
    let c = cfg.drive(t);
    let ground = cfg.ex_line() + laser.detuning_x;
    let v_e1 = cfg.v_e1 + perturbation.e_e1;
    let v_e2 = cfg.v_e2 + perturbation.e_e2;
    let base = cfg.v_a1 + perturbation.e_a1;
    let xx = base + v_e1 + (cfg.a1 + cfg.e1) * c;
    let yy = base - v_e1 + (cfg.a1 - cfg.e1) * c;
    let env = laser.envelope(t);
    let lx = 0.5 * laser.omega_lx * env;
    let ly = 0.5 * laser.omega_ly * env;
    let r = |v: f64| Complex64::new(TAU * v, 0.0);
    ComplexMatrix::from_rows([
        [r(ground), r(lx), r(ly)],
        [r(lx), r(xx), r(v_e2)],
        [r(ly), r(v_e2), r(yy)],
    ])
}

/// Collapse operators `√Γ|0⟩⟨E_x|`, `√Γ|0⟩⟨E_y|`, `√γ|E_x⟩⟨E_x|`, `√γ|E_y⟩⟨E_y|`.
///
/// Channels with zero rate are omitted.
pub fn build_collapse_ops(relax: &RelaxationConfig) -> Result<Vec<ComplexMatrix>> {
    relax.validate()?;
    let mut ops = Vec::with_capacity(4);
    if relax.gamma_opt > 0.0 {
        let s = Complex64::new(relax.gamma_opt.sqrt(), 0.0);
        ops.push(ComplexMatrix::outer(3, 0, 1).scale(s));
        ops.push(ComplexMatrix::outer(3, 0, 2).scale(s));
    }
    if relax.gamma_orb > 0.0 {
        let s = Complex64::new(relax.gamma_orb.sqrt(), 0.0);
        ops.push(ComplexMatrix::pure_state(3, 1).scale(s));
        ops.push(ComplexMatrix::pure_state(3, 2).scale(s));
    }
    Ok(ops)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> StrainDriveConfig {
        canonicalize(StrainDriveConfig::reference_device().with_drive(4.0))
    }

    #[test]
    fn strain_decomposition_examples() {
        let s = strain_from_spectroscopy(6.41, -6.5).unwrap();
        assert!((s.v_e1.abs() - 3.13).abs() < 0.01, "{s:?}");
        assert!((s.v_e2.abs() - 0.72).abs() < 0.01, "{s:?}");
        assert!(s.v_e2 < 0.0 && !s.degenerate_basis);

        let s = strain_from_spectroscopy(6.41, 0.0).unwrap();
        assert!((s.v_e1 - 3.205).abs() < 1e-12 && s.v_e2 == 0.0);

        let s = strain_from_spectroscopy(2.0, 22.5).unwrap();
        assert!((s.v_e1 - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((s.v_e2 - 0.5f64.sqrt()).abs() < 1e-12);

        let s = strain_from_spectroscopy(2.0, 45.0).unwrap();
        assert!(s.degenerate_basis && s.v_e1 == 0.0);
        assert!(strain_from_spectroscopy(2.0, 50.0).is_err());
        assert!(strain_from_spectroscopy(-1.0, 0.0).is_err());
    }

    #[test]
    fn canonicalize_examples() {
        let c = canonicalize(StrainDriveConfig {
            e1: 7.0,
            ..StrainDriveConfig::reference_device()
        });
        assert_eq!((c.v_e1, c.e1), (3.13, -7.0));
        let d = canonicalize(c);
        assert_eq!(c, d);
    }

    #[test]
    fn canonicalize_preserves_instantaneous_spectrum() {
        let raw = StrainDriveConfig::reference_device().with_drive(5.3);
        let can = canonicalize(raw);
        for k in 0..50 {
            let t = 0.037 * k as f64;
            let a = build_excited_hamiltonian2(t, &raw).hermitian_eigenvalues();
            let b = build_excited_hamiltonian2(t, &can).hermitian_eigenvalues();
            assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn undriven_splitting() {
        let c = canonicalize(StrainDriveConfig::reference_device());
        let ev = build_excited_hamiltonian2(0.3, &c).hermitian_eigenvalues();
        let expected = TAU * 2.0 * (3.13f64.powi(2) + 0.72f64.powi(2)).sqrt();
        assert!((ev[1] - ev[0] - expected).abs() < 1e-10);
    }

    #[test]
    fn drive_node_equals_static() {
        let c = cfg();
        // ω t = π/2
        let t = 0.25 / c.f_m;
        let undriven = StrainDriveConfig {
            a1: 0.0,
            e1: 0.0,
            ..c
        };
        let diff = build_excited_hamiltonian2(t, &c)
            .max_abs_diff(&build_excited_hamiltonian2(t, &undriven));
        assert!(diff < 1e-12);
    }

    #[test]
    fn zero_e2_is_diagonal() {
        let c = StrainDriveConfig { v_e2: 0.0, ..cfg() };
        let h = build_excited_hamiltonian2(0.123, &c);
        assert_eq!(h[(0, 1)], ZERO);
        assert_eq!(h[(1, 0)], ZERO);
    }

    #[test]
    fn full_hamiltonian_reduces_to_doublet() {
        let c = cfg();
        for k in 0..20 {
            let t = 0.05 * k as f64;
            let h3 = build_full_hamiltonian3(t, &c, &LaserConfig::off(), &Default::default());
            let h2 = build_excited_hamiltonian2(t, &c);
            for i in 0..2 {
                for j in 0..2 {
                    assert!((h3[(i + 1, j + 1)] - h2[(i, j)]).norm() < 1e-12);
                }
            }
            // ground decoupled
            let p0 = ComplexMatrix::pure_state(3, 0);
            assert!(h3.commutator(&p0).max_abs_diff(&ComplexMatrix::zeros(3)) < 1e-12);
        }
    }

    #[test]
    fn a1_perturbation_shifts_doublet_only() {
        let c = cfg();
        let laser = LaserConfig::off();
        let p = FieldPerturbation {
            e_a1: 0.1,
            ..Default::default()
        };
        let h0 = build_full_hamiltonian3(0.2, &c, &laser, &Default::default());
        let h1 = build_full_hamiltonian3(0.2, &c, &laser, &p);
        let d = h1 - h0;
        assert!((d[(0, 0)]).norm() < 1e-15);
        assert!((d[(1, 1)].re - TAU * 0.1).abs() < 1e-12);
        assert!((d[(2, 2)].re - TAU * 0.1).abs() < 1e-12);
    }

    #[test]
    fn open_laser_coupling() {
        let laser = LaserConfig::cw(0.0, 0.22, 0.0);
        let h = build_full_hamiltonian3(0.0, &cfg(), &laser, &Default::default());
        assert!((h[(0, 1)].re - TAU * 0.11).abs() < 1e-12);
        assert!((h[(1, 0)].re - TAU * 0.11).abs() < 1e-12);
        assert_eq!(h[(0, 2)], ZERO);
    }

    #[test]
    fn collapse_operator_sets() {
        let ops = build_collapse_ops(&RelaxationConfig {
            gamma_opt: 1.0 / 12.0,
            gamma_orb: 0.0,
        })
        .unwrap();
        assert_eq!(ops.len(), 2);
        for op in &ops {
            let norm: f64 = op
                .as_slice()
                .iter()
                .map(|v| v.norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!((norm - (1.0f64 / 12.0).sqrt()).abs() < 1e-15);
        }
        let none = build_collapse_ops(&RelaxationConfig {
            gamma_opt: 0.0,
            gamma_orb: 0.0,
        })
        .unwrap();
        assert!(none.is_empty());
        assert_eq!(
            build_collapse_ops(&RelaxationConfig::default())
                .unwrap()
                .len(),
            4
        );
        assert!(build_collapse_ops(&RelaxationConfig {
            gamma_opt: -1.0,
            gamma_orb: 0.0
        })
        .is_err());
    }

    #[test]
    fn pulse_envelope_shape() {
        let p = PulseProfile::default();
        assert!((p.envelope(0.75 + 0.5) - 1.0).abs() < 1e-15);
        assert!((p.envelope(50.0) - 0.08).abs() < 1e-15);
        assert!((p.envelope(0.375) - (0.08 + 0.46)).abs() < 1e-12);
        assert!((p.envelope(100.0 + 0.375) - 0.54).abs() < 1e-12);
        assert!((p.envelope(-1.0) - 0.08).abs() < 1e-15);
        // falling edge midpoint
        assert!((p.envelope(0.75 + 1.0 + 0.375) - 0.54).abs() < 1e-12);
    }

    #[test]
    fn density_validation() {
        assert!(validate_density(&ComplexMatrix::pure_state(3, 0)).is_ok());
        assert!(validate_density(&ComplexMatrix::identity(2)).is_err());
        let mut bad = ComplexMatrix::pure_state(2, 0);
        bad[(0, 1)] = Complex64::new(0.0, 1.0);
        assert!(validate_density(&bad).is_err());
    }
}
