//! Property tests for the model, solver, Floquet and perturbative layers.

use std::f64::consts::TAU;

use proptest::prelude::*;

use orbital_floquet::analytic::{landau_zener_rabi, rabi_trajectory, sopt_rabi};
use orbital_floquet::floquet::{
    floquet_solution, monodromy_quasi_energies, rabi_from_quasi_energies,
};
use orbital_floquet::lindblad::evolve_master_equation;
use orbital_floquet::model::{
    build_collapse_ops, build_excited_hamiltonian2, build_full_hamiltonian3, canonicalize,
    ComplexMatrix, FieldPerturbation, LaserConfig, RelaxationConfig, StrainDriveConfig,
};
use orbital_floquet::ode::OdeOptions;
use orbital_floquet::series::{arange_inclusive, linspace};

fn strain() -> impl Strategy<Value = StrainDriveConfig> {
    (
        -1.0..1.0f64,
        -4.0..4.0f64,
        -1.0..1.0f64,
        -7.0..7.0f64,
        0.0..TAU,
        0.8..1.6f64,
        1u32..7,
    )
        .prop_map(|(v_a1, v_e1, v_e2, e1, phase_m, f_m, n)| {
            StrainDriveConfig {
                v_a1,
                v_e1,
                v_e2,
                a1: 0.0,
                e1: 0.0,
                f_m,
                phase_m,
                n,
            }
            .with_drive(e1)
        })
}

fn near_reference() -> impl Strategy<Value = StrainDriveConfig> {
    (2.9..3.4f64, 0.3..1.0f64, 0.0..7.0f64).prop_map(|(v1, v2, e1)| {
        StrainDriveConfig {
            v_e1: v1,
            v_e2: v2,
            ..StrainDriveConfig::reference_device()
        }
        .with_drive(e1)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hamiltonians_are_hermitian(cfg in strain(), lx in 0.0..0.5f64, ly in 0.0..0.5f64,
                                  p in (-0.1..0.1f64, -0.1..0.1f64, -0.1..0.1f64)) {
        let laser = LaserConfig::cw(0.3, lx, ly);
        let pert = FieldPerturbation { e_a1: p.0, e_e1: p.1, e_e2: p.2 };
        for k in 0..1000 {
            let t = 0.0137 * k as f64;
            prop_assert!(build_excited_hamiltonian2(t, &cfg).hermiticity_defect() < 1e-12);
            prop_assert!(build_full_hamiltonian3(t, &cfg, &laser, &pert).hermiticity_defect() < 1e-12);
        }
    }

    #[test]
    fn undriven_splitting(cfg in strain()) {
        let c = StrainDriveConfig { a1: 0.0, e1: 0.0, ..cfg };
        let ev = build_excited_hamiltonian2(0.0, &c).hermitian_eigenvalues();
        prop_assert!((ev[1] - ev[0] - TAU * c.splitting()).abs() < 1e-10);
    }

    #[test]
    fn ground_state_decouples(cfg in strain(), t in 0.0..10.0f64) {
        let h = build_full_hamiltonian3(t, &cfg, &LaserConfig::off(), &FieldPerturbation::default());
        let p0 = ComplexMatrix::pure_state(3, 0);
        prop_assert!(h.commutator(&p0).max_abs_diff(&ComplexMatrix::zeros(3)) < 1e-12);
    }

    #[test]
    fn canonicalize_is_idempotent(cfg in strain()) {
        let once = canonicalize(cfg);
        prop_assert_eq!(canonicalize(once), once);
        prop_assert!(once.v_e1 >= 0.0);
    }

    #[test]
    fn sopt_root_sum_square(cfg in near_reference()) {
        let r = sopt_rabi(&cfg).unwrap();
        prop_assert!(r.omega_r >= 2.0 * r.omega0.abs());
        prop_assert!(r.omega_r >= 2.0 * r.delta.abs());
        prop_assert!((r.omega_r - 2.0 * r.delta.hypot(r.omega0)).abs() == 0.0);
    }

    #[test]
    fn sopt_sign_invariance(cfg in near_reference()) {
        let base = sopt_rabi(&cfg).unwrap().omega_r;
        let flipped_v2 = sopt_rabi(&StrainDriveConfig { v_e2: -cfg.v_e2, ..cfg }).unwrap().omega_r;
        let flipped_e1 = sopt_rabi(&StrainDriveConfig { e1: -cfg.e1, a1: -cfg.a1, ..cfg }).unwrap().omega_r;
        prop_assert!((base - flipped_v2).abs() < 1e-14);
        prop_assert!((base - flipped_e1).abs() < 1e-13);
    }

    #[test]
    fn rabi_trajectory_bounds_and_period(cfg in near_reference()) {
        let s = sopt_rabi(&cfg).unwrap();
        let dt = 0.01;
        let grid = arange_inclusive(0.0, 40.0, dt);
        let tr = rabi_trajectory(&s, &grid);
        prop_assert!(tr.y.iter().all(|&p| (0.0..=1.0).contains(&p)));
        // The first return to zero after t = 0 sits one period later.
        let period = 1.0 / s.omega_r;
        if period < 38.0 && s.amplitude() > 1e-3 {
            let k = (period / dt).round() as usize;
            let lo = k.saturating_sub(1);
            let min_near = (lo..=k + 1).map(|i| tr.y[i]).fold(f64::INFINITY, f64::min);
            let amp = s.amplitude();
            prop_assert!(min_near <= amp * (1.0 - (std::f64::consts::PI * s.omega_r * dt).cos()) + 1e-12);
        }
    }

    #[test]
    fn lz_bounds(cfg in near_reference()) {
        if let Ok(lz) = landau_zener_rabi(&cfg) {
            let s2 = (0.5 * lz.chi).sin().powi(2);
            prop_assert!((0.0..=1.0).contains(&s2));
            prop_assert!(lz.omega_r >= 0.0 && lz.omega_r <= 0.5 * cfg.f_m + 1e-15);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn floquet_phase_and_sign_invariance(cfg in near_reference(), phase in 0.0..TAU) {
        let base = floquet_solution(&cfg).unwrap();
        let shifted = floquet_solution(&StrainDriveConfig { phase_m: phase, ..cfg }).unwrap();
        for i in 0..2 {
            prop_assert!((base.quasi_energies[i] - shifted.quasi_energies[i]).abs() < 1e-8);
        }
        let f = cfg.f_m;
        let mono = rabi_from_quasi_energies(monodromy_quasi_energies(&cfg).unwrap(), f);
        let neg_v2 = rabi_from_quasi_energies(
            monodromy_quasi_energies(&StrainDriveConfig { v_e2: -cfg.v_e2, ..cfg }).unwrap(), f);
        let relabeled = rabi_from_quasi_energies(
            monodromy_quasi_energies(&StrainDriveConfig { v_e1: -cfg.v_e1, e1: -cfg.e1, ..cfg }).unwrap(), f);
        prop_assert!((mono - neg_v2).abs() < 1e-9);
        prop_assert!((mono - relabeled).abs() < 1e-12);
    }

    #[test]
    fn weak_coupling_limit(v1 in 2.9..3.4f64, e1 in 0.0..7.0f64) {
        let cfg = StrainDriveConfig { v_e1: v1, v_e2: 1e-7, ..StrainDriveConfig::reference_device() }.with_drive(e1);
        let d0 = v1 - 2.5 * cfg.f_m;
        let folded = rabi_from_quasi_energies([d0, -d0], cfg.f_m);
        prop_assert!((floquet_solution(&cfg).unwrap().rabi() - folded).abs() < 1e-9);
        let exact = StrainDriveConfig { v_e2: 0.0, ..cfg };
        prop_assert!((floquet_solution(&exact).unwrap().rabi() - folded).abs() < 1e-14);
    }

    #[test]
    fn master_equation_invariants(cfg in near_reference(), lx in 0.0..0.3f64, phase in 0.0..TAU) {
        let laser = LaserConfig::cw(0.1, lx, 0.1 * lx);
        let c = StrainDriveConfig { phase_m: phase, ..cfg };
        let ops = build_collapse_ops(&RelaxationConfig::default()).unwrap();
        let grid = linspace(0.0, 20.0, 81);
        let r = evolve_master_equation(
            |t| build_full_hamiltonian3(t, &c, &laser, &FieldPerturbation::default()),
            &ops, &ComplexMatrix::pure_state(3, 0), &grid, &OdeOptions::default()).unwrap();
        for s in &r.states {
            prop_assert!((s.trace().re - 1.0).abs() < 1e-8 && s.trace().im.abs() < 1e-8);
            prop_assert!(s.hermiticity_defect() < 1e-10);
            prop_assert!(s.hermitian_eigenvalues()[0] > -1e-8);
        }
    }

    // tr rho^2 is quadratic, so RK drift scales with tolerance (about 2e-9 per ns
    // at rtol 1e-8); the check runs where the accumulated drift stays below 1e-8.
    #[test]
    fn purity_without_dissipation(cfg in near_reference(), lx in 0.0..0.3f64) {
        let laser = LaserConfig::cw(0.0, lx, 0.1 * lx);
        let grid = linspace(0.0, 20.0, 21);
        let r = evolve_master_equation(
            |t| build_full_hamiltonian3(t, &cfg, &laser, &FieldPerturbation::default()),
            &[], &ComplexMatrix::pure_state(3, 0), &grid, &OdeOptions::with_tolerances(1e-10, 1e-12)).unwrap();
        for s in &r.states {
            prop_assert!((s.purity() - 1.0).abs() < 1e-8);
        }
    }
}

#[test]
fn tolerance_refinement_reduces_error() {
    let cfg = StrainDriveConfig {
        v_e1: 3.13,
        ..StrainDriveConfig::reference_device()
    }
    .with_drive(4.0);
    let laser = LaserConfig::cw(0.0, 0.22, 0.022);
    let ops = build_collapse_ops(&RelaxationConfig::default()).unwrap();
    let grid = linspace(0.0, 20.0, 41);
    let run = |tol: f64| {
        evolve_master_equation(
            |t| build_full_hamiltonian3(t, &cfg, &laser, &FieldPerturbation::default()),
            &ops,
            &ComplexMatrix::pure_state(3, 0),
            &grid,
            &OdeOptions::with_tolerances(tol, tol * 1e-2),
        )
        .unwrap()
    };
    let tol = 1e-6;
    let reference = run(tol / 100.0);
    let err = |tol: f64| {
        run(tol)
            .states
            .iter()
            .zip(&reference.states)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    };
    let coarse = err(tol);
    let fine = err(tol / 2.0);
    assert!(fine < coarse, "{fine} !< {coarse}");
}
