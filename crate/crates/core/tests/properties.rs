use std::sync::OnceLock;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use proptest::prelude::*;

use czgate::linalg::{eigh, max_abs_diff, unitarity_defect};
use czgate::metrics::{computational_basis, cz_target, paper_error, project_gate, GateMatrix, COMPUTATIONAL_LABELS};
use czgate::model::{assemble_hamiltonian, build_space, ghz, DeviceParams};
use czgate::propagator::{convergence_check, evolve};
use czgate::pulses::{cz_trajectory, CzPulseSpec, FrequencyTrajectory};
use czgate::spectra::comoving_overlaps;

fn device() -> impl Strategy<Value = DeviceParams> {
    // qubits at least 300 MHz from the bus, either side
    let detuning = prop_oneof![-2.0..-0.3f64, 0.3..2.0f64];
    (detuning.clone(), detuning, 4.5..6.5f64, 0.1..0.35f64, 0.1..0.35f64, 0.0..150.0f64, 0.0..150.0f64, 3usize..6)
        .prop_map(|(d1, d2, nb, e1, e2, g1, g2, levels)| {
            DeviceParams::from_cyclic(nb + d1, nb + d2, nb, e1, e2, g1, g2, levels).unwrap()
        })
}

fn fig3_trajectory() -> FrequencyTrajectory {
    cz_trajectory(&CzPulseSpec::standard(DeviceParams::table1(), 9.59, 29.1)).unwrap()
}

fn fig3_gate() -> &'static GateMatrix {
    static GATE: OnceLock<GateMatrix> = OnceLock::new();
    GATE.get_or_init(|| {
        let d = DeviceParams::table1();
        let traj = fig3_trajectory();
        let res = evolve(&traj, &d, 0.0, traj.t_gate, 0.01, &[]).unwrap();
        project_gate(&res, &computational_basis(&d).unwrap())
    })
}

fn phase(a: f64) -> C64 {
    C64::from_polar(1.0, a)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn hamiltonian_is_hermitian_and_conserves_excitations(
        p in device(),
        nu1 in 5.0..7.5f64,
        nu2 in 5.0..7.5f64,
    ) {
        let h = assemble_hamiltonian(&p, ghz(nu1), ghz(nu2));
        prop_assert_eq!(h.hermiticity_defect(), 0.0);
        let space = build_space(&p).unwrap();
        let m = h.matrix();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                if space.excitations(r) != space.excitations(c) {
                    prop_assert_eq!(m[(r, c)], C64::new(0.0, 0.0));
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn every_cz_target_scores_zero(p1 in -20.0..20.0f64, p2 in -20.0..20.0f64) {
        prop_assert!(paper_error(&cz_target(p1, p2)).total < 1e-12);
    }

    #[test]
    fn error_ignores_local_z_rotations(a in -10.0..10.0f64, b in -10.0..10.0f64) {
        let m = *fig3_gate();
        let d = GateMatrix::from_diagonal(&nalgebra::Vector4::new(
            C64::new(1.0, 0.0),
            phase(a),
            phase(b),
            phase(a + b),
        ));
        let base = paper_error(&m).total;
        let dressed = paper_error(&(d * m)).total;
        prop_assert!((base - dressed).abs() < 1e-12, "{base} vs {dressed}");
        // a diagonal basis change D^dagger M D leaves the diagonal untouched
        let conj = paper_error(&(d.adjoint() * m * d)).total;
        prop_assert!((base - conj).abs() < 1e-12);
    }

    #[test]
    fn scaling_the_device_scales_the_spectrum(
        p in device(),
        s in 0.5..2.0f64,
        nu1 in 5.0..7.5f64,
        nu2 in 5.0..7.5f64,
    ) {
        let (w1, w2) = (ghz(nu1), ghz(nu2));
        let (base, _) = eigh(assemble_hamiltonian(&p, w1, w2).matrix());
        let (scaled, _) = eigh(assemble_hamiltonian(&p.scaled(s), s * w1, s * w2).matrix());
        for (x, y) in base.iter().zip(&scaled) {
            prop_assert!((s * x - y).abs() < 1e-9 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn mirroring_the_qubits_keeps_the_spectrum(
        p in device(),
        nu1 in 5.0..7.5f64,
        nu2 in 5.0..7.5f64,
    ) {
        let (w1, w2) = (ghz(nu1), ghz(nu2));
        let (base, _) = eigh(assemble_hamiltonian(&p, w1, w2).matrix());
        let (mirror, _) = eigh(assemble_hamiltonian(&p.mirrored(), w2, w1).matrix());
        for (x, y) in base.iter().zip(&mirror) {
            prop_assert!((x - y).abs() < 1e-9 * (1.0 + x.abs()));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn propagation_is_unitary(
        p in device(),
        nu1 in 5.0..7.5f64,
        nu2 in 5.0..7.5f64,
        t in 1.0..20.0f64,
    ) {
        let traj = FrequencyTrajectory::constant(nu1, nu2, t);
        let res = evolve(&traj, &p, 0.0, t, 0.01, &[]).unwrap();
        prop_assert!(unitarity_defect(&res.unitary) < 1e-9);
    }

    #[test]
    fn constant_hamiltonian_matches_the_exact_exponential(
        p in device(),
        nu1 in 5.0..7.5f64,
        nu2 in 5.0..7.5f64,
        t in 1.0..10.0f64,
    ) {
        let h = assemble_hamiltonian(&p, ghz(nu1), ghz(nu2));
        let (vals, vecs) = eigh(h.matrix());
        let exact = czgate::linalg::unitary_step(&vals, &vecs, t);
        let traj = FrequencyTrajectory::constant(nu1, nu2, t);
        let res = evolve(&traj, &p, 0.0, t, 0.1, &[]).unwrap();
        prop_assert!(max_abs_diff(&res.unitary, &exact) < 1e-9);
    }

    #[test]
    fn evolution_composes(split in 1usize..44) {
        let d = DeviceParams::table1();
        let traj = fig3_trajectory();
        let tm = split as f64;
        let first = evolve(&traj, &d, 0.0, tm, 0.01, &[]).unwrap().unitary;
        let second = evolve(&traj, &d, tm, traj.t_gate, 0.01, &[]).unwrap().unitary;
        let whole = evolve(&traj, &d, 0.0, traj.t_gate, 0.01, &[tm]).unwrap();
        prop_assert!(max_abs_diff(&(&second * &first), &whole.unitary) < 1e-9);
        let (t, at_split) = &whole.checkpoints[0];
        prop_assert!((t - tm).abs() < 1e-12);
        prop_assert!(max_abs_diff(at_split, &first) < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn comoving_overlaps_are_complete(undershoot in 0.0..30.0f64, t_u in 5.0..33.0f64) {
        let d = DeviceParams::table1();
        let traj = cz_trajectory(&CzPulseSpec::standard(d, undershoot, t_u)).unwrap();
        let trace = comoving_overlaps(&traj, &d, &COMPUTATIONAL_LABELS, 1.0, 0.01).unwrap();
        prop_assert!(trace.completeness_defect() < 1e-9);
    }
}

#[test]
fn identity_scores_two() {
    let e = paper_error(&GateMatrix::identity());
    assert!((e.total - 2.0).abs() < 1e-15);
    assert_eq!(e.error_4, 2.0);
}

#[test]
fn fig3_pulse_converges_at_second_order() {
    let d = DeviceParams::table1();
    let traj = fig3_trajectory();
    let coarse = convergence_check(&traj, &d, 0.0, traj.t_gate, 0.04).unwrap();
    let fine = convergence_check(&traj, &d, 0.0, traj.t_gate, 0.02).unwrap();
    let order = (coarse / fine).log2();
    assert!((1.8..=2.2).contains(&order), "order {order} ({coarse:e} -> {fine:e})");
}

#[test]
fn dressed_computational_states_are_orthonormal() {
    let d = DeviceParams::table1();
    let b = computational_basis(&d).unwrap().as_matrix();
    let gram: DMatrix<C64> = b.adjoint() * &b;
    assert!(max_abs_diff(&gram, &DMatrix::identity(4, 4)) < 1e-12);
}
