//! Readout statistics against frozen reference tables and Fock-space
//! properties. Reference tables come from an independent dense
//! matrix-exponential implementation.

use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;
use pacs_core::analytics::{
    mandel_q_analytic, output_moments, pacs_oracle, quadrature_variance_analytic, thermal_conditional_state_analytic,
    thermal_mandel_q, thermal_oracle, thermal_quadrature_variance, thermal_unit_trace_assembly,
};
use pacs_core::fock::{
    self, condition_on_single_photon, displacement, readout_bogoliubov, DensityOperator, FockSpace, KetState,
    WritePropagator, C64,
};
use proptest::prelude::*;

const Z: f64 = 0.98;
const BETAS: [f64; 6] = [0.0, 0.5, 1.0, 2.0, 3.0, 4.0];

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

// Q of the readout field versus |β| (α = Zβ) for each B.
const FIG2A: [(f64, [f64; 6]); 5] = [
    (0.01, [-0.9999, -0.723563296471, -0.506010700512, -0.289156023663, -0.171081348173, -0.108714882491]),
    (0.15, [-0.9775, -0.707353857686, -0.494674927243, -0.282678280958, -0.167248742714, -0.106279425577]),
    (0.25, [-0.9375, -0.678408431284, -0.474432474977, -0.271110883272, -0.160404804393, -0.101930395375]),
    (0.50, [-0.75, -0.542726745028, -0.379545979982, -0.216888706618, -0.128323843514, -0.0815443163]),
    (0.75, [-0.4375, -0.316590601266, -0.221401821656, -0.126518412194, -0.074855575383, -0.047567517842]),
];

// 4(Δx_{π/2})² versus |β| at B = 0.15.
const FIG2B: [f64; 6] = [2.955, 1.966028170755, 1.020144317599, 0.763008978367, 0.839318329959, 0.895145181357];

// (n̄₀, |β|, weighted-term 𝒬, 4(Δx_{π/2})² of the truncated state,
// full-oracle Q, full-oracle 4(Δx_{π/2})²) at B = 0.15.
const FIG3: [(f64, f64, f64, f64, f64, f64); 8] = [
    (0.2, 0.5, -0.6990379092, 2.4207684216, -0.4314758142, 2.6712850075),
    (0.2, 1.0, -0.4726306294, 1.3445826696, -0.2205719461, 1.5215048447),
    (0.2, 2.0, -0.2536824259, 0.9827004832, 0.0063021533, 1.0821377642),
    (0.2, 3.0, -0.1421819338, 1.0676742439, 0.1450757144, 1.1569942088),
    (0.45, 0.5, -0.6923473837, 2.6762459520, -0.1341887149, 3.5551856283),
    (0.45, 1.0, -0.4536292831, 1.5363885153, 0.0906110546, 2.1870797570),
    (0.45, 2.0, -0.2347870048, 1.1190972753, 0.3449673395, 1.4862061694),
    (0.45, 3.0, -0.1326469993, 1.2156950716, 0.5139401197, 1.5424102064),
];

#[test]
fn mandel_q_reference_table() {
    for (b, row) in FIG2A {
        for (beta, expect) in BETAS.iter().zip(row) {
            let q = mandel_q_analytic(re(Z * beta), 1, b).unwrap();
            assert!((q - expect).abs() < 1e-9, "B = {b}, beta = {beta}: {q} vs {expect}");
        }
    }
}

#[test]
fn squeezing_reference_table() {
    for (beta, expect) in BETAS.iter().zip(FIG2B) {
        let v = 4.0 * quadrature_variance_analytic(re(Z * beta), 0.15, FRAC_PI_2).unwrap();
        assert!((v - expect).abs() < 1e-9, "beta = {beta}: {v} vs {expect}");
    }
}

#[test]
fn thermal_reference_table() {
    for (n0, beta, q_paper, v_trunc, q_full, v_full) in FIG3 {
        let q = thermal_mandel_q(re(beta), Z, 0.15, n0, 40).unwrap().value;
        assert!((q - q_paper).abs() < 1e-7, "n0 = {n0}, beta = {beta}: {q} vs {q_paper}");
        let v = 4.0 * thermal_quadrature_variance(re(beta), Z, 0.15, n0, FRAC_PI_2, 40).unwrap();
        assert!((v - v_trunc).abs() < 1e-7, "n0 = {n0}, beta = {beta}: {v} vs {v_trunc}");
        let full = thermal_oracle(re(beta), Z, 0.15, n0, FRAC_PI_2, 50).unwrap();
        assert!((full.mandel_q - q_full).abs() < 1e-5, "n0 = {n0}, beta = {beta}: {} vs {q_full}", full.mandel_q);
        assert!((4.0 * full.variance - v_full).abs() < 1e-5, "n0 = {n0}, beta = {beta}: {} vs {v_full}", 4.0 * full.variance);
    }
}

#[test]
fn heralded_state_from_write_pulse() {
    let space = FockSpace::two_mode(40).unwrap();
    let beta = re(2.0);
    let u = WritePropagator::new(Z, space).unwrap();
    let input = KetState::product(&KetState::vacuum(space.mode()), &KetState::coherent(space.mode(), beta).unwrap()).unwrap();
    let out = u.apply(&input).unwrap();
    let (psi, p) = condition_on_single_photon(&out).unwrap();
    let ideal = KetState::coherent(space.mode(), beta * Z).unwrap().create().unwrap();
    assert!(psi.fidelity(&ideal) > 1.0 - 1e-10);
    // P(1) = Z²(1−Z²)(1+|Zβ|²) e^{−(1−Z²)|β|²}
    let z2 = Z * Z;
    let expect = z2 * (1.0 - z2) * (1.0 + z2 * 4.0) * (-(1.0 - z2) * 4.0f64).exp();
    assert!((p - expect).abs() < 1e-10, "{p} vs {expect}");
}

#[test]
fn first_order_expansion_overlap() {
    // |0⟩|Zβ⟩ + i√(1−Z²)|1⟩b†|Zβ⟩, normalized, against the full output.
    let space = FockSpace::two_mode(40).unwrap();
    let m = space.mode();
    let beta = re(2.0);
    let s = (1.0 - Z * Z).sqrt();
    let u = WritePropagator::new(Z, space).unwrap();
    let out = u.apply(&KetState::product(&KetState::vacuum(m), &KetState::coherent(m, beta).unwrap()).unwrap()).unwrap();
    let zb = KetState::coherent(m, beta * Z).unwrap();
    let t0 = KetState::product(&KetState::vacuum(m), &zb).unwrap();
    let t1 = KetState::product(&KetState::number(m, 1).unwrap(), &zb.create().unwrap()).unwrap();
    let approx = KetState::new(space, t0.amplitudes + t1.amplitudes * C64::new(0.0, s)).unwrap();
    let overlap = approx.fidelity(&out);
    // The two-ket form is the exact n_c <= 1 projection of the output, so
    // the overlap is one minus the weight of the dropped n_c >= 2 pairs.
    let neglected: f64 = out.amplitudes.iter().enumerate().filter(|(i, _)| i / 41 >= 2).map(|(_, c)| c.norm_sqr()).sum();
    assert!((overlap - (1.0 - neglected)).abs() < 1e-10, "{overlap} vs {}", 1.0 - neglected);
    assert!(overlap > 0.97 && overlap < 1.0, "{overlap}");
}

#[test]
fn thermal_normalization_against_assembly() {
    for beta in [0.0, 1.0, 2.0, 3.0] {
        let w = thermal_conditional_state_analytic(re(beta), Z, 0.2).unwrap();
        let t = thermal_unit_trace_assembly(re(beta), Z, 0.2, FockSpace::single(40).unwrap()).unwrap().trace();
        assert!((t.re - w.norm).abs() < 1e-8);
    }
}

#[test]
fn analytic_moments_match_fock_moments() {
    let alpha = re(1.5);
    let mech = KetState::coherent(FockSpace::single(40).unwrap(), alpha).unwrap().create().unwrap().normalized().unwrap();
    let out = readout_bogoliubov(&mech.to_density(), 0.15).unwrap();
    let m = output_moments(alpha, 0.15);
    assert!((fock::number_moments(&out, 1).unwrap() - m.aad).abs() < 1e-6);
    assert!((fock::mean_number(&out).unwrap() - m.ada).abs() < 1e-6);
    assert!((fock::number_moments(&out, 2).unwrap() - m.a2ad2).abs() < 1e-6);
}

#[test]
fn pacs_laguerre_moments_against_oracle() {
    let alpha = re(1.3);
    let rho = KetState::coherent(FockSpace::single(40).unwrap(), alpha).unwrap().create().unwrap().normalized().unwrap().to_density();
    for n in 1..=3 {
        let o = fock::number_moments(&rho, n).unwrap();
        let a = pacs_core::analytics::pacs_moment(alpha, 1, n);
        assert!((o - a).abs() < 1e-8 * a, "n = {n}: {o} vs {a}");
    }
}

#[test]
fn truncation_convergence_flags_small_space() {
    let r = fock::converge(
        |n| Ok(vec![pacs_oracle(re(3.0), 1, 0.15, FRAC_PI_2, n)?.mandel_q]),
        5,
        &fock::ConvergenceOptions { tol: 1e-6, step: 10, ceiling: 15 },
    )
    .unwrap();
    assert!(!r.converged);
    let r = fock::converge(|n| Ok(vec![pacs_oracle(re(3.0), 1, 0.15, FRAC_PI_2, n)?.mandel_q]), 40, &Default::default()).unwrap();
    assert!(r.converged && r.n_max == 40);
}

fn random_state(amps: &[(f64, f64)]) -> DensityOperator {
    let space = FockSpace::single(amps.len() + 9).unwrap();
    let mut v = nalgebra::DVector::zeros(space.dim());
    for (i, (r, im)) in amps.iter().enumerate() {
        v[i] = C64::new(*r, *im);
    }
    KetState::new(space, v).unwrap().normalized().unwrap().to_density()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn analytic_matches_oracle(a in 0.0f64..3.0, phase in 0.0f64..std::f64::consts::TAU, b in 0.01f64..1.0, theta in 0.0f64..std::f64::consts::PI) {
        let alpha = C64::from_polar(a, phase);
        let o = pacs_oracle(alpha, 1, b, theta, 40).unwrap();
        let v = quadrature_variance_analytic(alpha, b, theta).unwrap();
        prop_assert!((o.variance - v).abs() < 1e-6);
        if b < 0.999 {
            let q = mandel_q_analytic(alpha, 1, b).unwrap();
            prop_assert!((o.mandel_q - q).abs() < 1e-6);
        }
    }

    #[test]
    fn variance_phase_covariance(a in 0.0f64..4.0, arg in -3.0f64..3.0, phi in -3.0f64..3.0, b in 0.01f64..1.0, theta in 0.0f64..std::f64::consts::PI) {
        let alpha = C64::from_polar(a, arg);
        let v1 = quadrature_variance_analytic(alpha, b, theta).unwrap();
        let v2 = quadrature_variance_analytic(alpha * C64::from_polar(1.0, phi), b, theta - phi).unwrap();
        prop_assert!((v1 - v2).abs() < 1e-12);
    }

    #[test]
    fn half_pi_minimizes_variance_for_real_alpha(a in 0.05f64..4.0, b in 0.01f64..0.99, theta in 0.0f64..std::f64::consts::PI) {
        let best = quadrature_variance_analytic(re(a), b, FRAC_PI_2).unwrap();
        prop_assert!(best <= quadrature_variance_analytic(re(a), b, theta).unwrap() + 1e-15);
    }

    #[test]
    fn moment_identity_on_states(amps in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 2..8)) {
        prop_assume!(amps.iter().skip(1).any(|(r, i)| r.abs() + i.abs() > 0.05));
        let rho = random_state(&amps);
        let n1 = fock::mean_number(&rho).unwrap();
        let pops = rho.populations();
        let n2: f64 = pops.iter().enumerate().map(|(k, p)| (k * k) as f64 * p).sum();
        let aad = fock::number_moments(&rho, 1).unwrap();
        let a2 = fock::number_moments(&rho, 2).unwrap();
        prop_assert!((n2 - (a2 - 3.0 * aad + 1.0)).abs() < 1e-8);
        prop_assert!((aad - n1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn readout_preserves_trace(amps in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..10), b in 0.001f64..1.0) {
        let rho = random_state(&amps);
        let out = readout_bogoliubov(&rho, b).unwrap();
        prop_assert!((out.trace() - 1.0).abs() < 1e-9);
        prop_assert!(out.hermiticity_error() < 1e-12);
        prop_assert!(out.min_eigenvalue() > -1e-9);
    }

    #[test]
    fn write_pulse_preserves_norm_on_low_support(a in 0.0f64..1.5, z in 0.9f64..1.0) {
        let space = FockSpace::two_mode(30).unwrap();
        let m = space.mode();
        let ket = KetState::product(&KetState::vacuum(m), &KetState::coherent(m, re(a)).unwrap()).unwrap();
        let out = WritePropagator::new(z, space).unwrap().apply(&ket).unwrap();
        prop_assert!((out.norm_sqr() - ket.norm_sqr()).abs() < 1e-9);
    }

    #[test]
    fn displacement_unitary_on_retained_subspace(re_b in -1.5f64..1.5, im_b in -1.5f64..1.5) {
        let space = FockSpace::single(40).unwrap();
        let d = displacement(C64::new(re_b, im_b), space);
        let g = d.adjoint() * &d;
        let low = g.view((0, 0), (10, 10)) - DMatrix::<C64>::identity(10, 10);
        prop_assert!(low.iter().all(|c| c.norm() < 1e-9));
    }

    #[test]
    fn thermal_norm_is_weight_sum(a in 0.0f64..4.0, arg in -3.0f64..3.0, z in 0.5f64..1.0, n0 in 0.0f64..0.45) {
        let beta = C64::from_polar(a, arg);
        let w = thermal_conditional_state_analytic(beta, z, n0).unwrap();
        let sum: C64 = w.weights.iter().sum();
        prop_assert!((sum.re - w.norm).abs() < 1e-12 && sum.im.abs() < 1e-12);
    }
}

#[test]
fn beamsplitter_commutator_preserved() {
    let n = 12;
    let space = FockSpace::single(n).unwrap();
    let a = fock::annihilation(space);
    let id = DMatrix::<C64>::identity(n + 1, n + 1);
    let big_a = a.kronecker(&id);
    let big_b = id.kronecker(&a);
    for b in [0.15f64, 0.5, 0.9] {
        let t = (1.0 - b * b).sqrt();
        let out = &big_a * re(b) + &big_b * C64::new(0.0, t);
        let comm = &out * out.adjoint() - out.adjoint() * &out;
        for i in 0..(n + 1) * (n + 1) {
            let (na, nb) = (i / (n + 1), i % (n + 1));
            if na < n && nb < n {
                assert!((comm[(i, i)] - re(1.0)).norm() < 1e-12);
            }
        }
        assert!((b * b + t * t - 1.0).abs() < 1e-15);
    }
}
