use num_complex::Complex64;
use proptest::prelude::*;

use relmeas::models::{self, ColemanHeppSpec, MeasurementModel, ModelError, VonNeumannSpec, SYSTEM};
use relmeas::quantum::{self, pauli, Operator, StateVector};

const TOL: f64 = 1e-12;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn amplitudes() -> impl Strategy<Value = (Complex64, Complex64)> {
    (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
        .prop_filter("nonzero", |(a, b, x, y)| a * a + b * b + x * x + y * y > 1e-3)
        .prop_map(|(a, b, x, y)| {
            let n = (a * a + b * b + x * x + y * y).sqrt();
            (c(a / n, b / n), c(x / n, y / n))
        })
}

/// `a₁|u₀⟩|u…u⟩ + a₂(−i)ᴺ|d₀⟩|d…d⟩` as an amplitude vector.
fn chain_oracle(a1: Complex64, a2: Complex64, n: usize) -> Vec<Complex64> {
    let dim = 1usize << (n + 1);
    let mut v = vec![c(0.0, 0.0); dim];
    v[0] = a1;
    v[dim - 1] = a2 * c(0.0, -1.0).powu(n as u32);
    v
}

fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[test]
fn passage_unitary_is_unitary_up_to_dense_cap() {
    for n in 1..=models::MAX_DENSE_ATOMS {
        let u = models::ch_passage_unitary(n).unwrap();
        assert!(u.unitarity_defect() < TOL, "N = {n}");
    }
    assert!(matches!(
        models::ch_passage_unitary(models::MAX_DENSE_ATOMS + 1),
        Err(ModelError::AtomCount { .. })
    ));
}

#[test]
fn matrix_free_passage_reaches_long_chains() {
    let (a1, a2) = (c(0.6, 0.0), c(0.0, 0.8));
    for n in [1, 4, 8, 12, 16] {
        let spec = ColemanHeppSpec::new(a1, a2, n).unwrap();
        let out = models::ch_passage_apply(&models::ch_initial(&spec).unwrap()).unwrap();
        assert!(max_diff(out.amplitudes(), &chain_oracle(a1, a2, n)) < TOL, "N = {n}");
    }
}

#[test]
fn gate_order_does_not_matter() {
    let n = 4;
    let layout = models::ch_layout(n).unwrap();
    let mut descending = Operator::identity(layout.clone()).unwrap();
    for i in (1..=n).rev() {
        descending = models::ch_atom_gate(i).unwrap().embed(&layout).unwrap().matmul(&descending).unwrap();
    }
    let ascending = models::ch_passage_unitary(n).unwrap();
    assert!(ascending.max_abs_diff(&descending).unwrap() < TOL);
}

#[test]
fn interference_operator_is_a_hermitian_involution() {
    for n in 1..=6 {
        let b = models::ch_interference_operator(n).unwrap();
        assert!(b.hermiticity_defect() < TOL);
        let id = Operator::identity(b.layout().clone()).unwrap();
        assert!(b.matmul(&b).unwrap().max_abs_diff(&id).unwrap() < TOL);
    }
}

/// `⟨B⟩` on the final chain state is `(−1)ᴺ (a₁*a₂ + a₁a₂*)`.
#[test]
fn interference_sign_alternates_with_chain_length() {
    let (a1, a2) = (c(0.6, 0.0), c(0.8, 0.0));
    let table = [-0.96, 0.96, -0.96, 0.96, -0.96, 0.96];
    for (n, expected) in (1..=6).zip(table) {
        let spec = ColemanHeppSpec::new(a1, a2, n).unwrap();
        let out = quantum::apply_unitary(&models::ch_passage_unitary(n).unwrap(), &models::ch_initial(&spec).unwrap())
            .unwrap();
        let b = quantum::expectation(&models::ch_interference_operator(n).unwrap(), &out).unwrap();
        assert!((b.re - expected).abs() < 1e-12, "N = {n}: {}", b.re);
        assert!(b.im.abs() < 1e-12);
    }
}

/// The numeric commutator is `−2` times the quoted closed form: the Pauli
/// identity `[σ_z, σ_y] = −2iσ_x` fixes the coefficient at `−2i/N`.
#[test]
fn commutator_is_minus_two_times_quoted_form() {
    for n in 2..=6 {
        let layout = models::ch_layout(n).unwrap();
        let mu = models::ch_polarization(n).unwrap().embed(&layout).unwrap();
        let b = models::ch_interference_operator(n).unwrap();
        let numeric = quantum::commutator(&mu, &b).unwrap();
        let quoted = models::ch_commutator_reference(n).unwrap();
        assert!(numeric.max_abs_diff(&quoted.scale(c(-2.0, 0.0))).unwrap() < TOL);
        assert!(numeric.max_abs() > 0.1, "μ_z and B do not commute");
    }
}

#[test]
fn undo_restores_initial_state() {
    let spec = ColemanHeppSpec::new(c(0.6, 0.0), c(0.0, -0.8), 5).unwrap();
    let psi = models::ch_initial(&spec).unwrap();
    let out = quantum::apply_unitary(&models::ch_passage_unitary(5).unwrap(), &psi).unwrap();
    let back = quantum::apply_unitary(&models::ch_undo_unitary(5).unwrap(), &out).unwrap();
    assert!((back.fidelity(&psi).unwrap() - 1.0).abs() < TOL);
}

#[test]
fn von_neumann_copies_branches() {
    for detector in [false, true] {
        for (k, (a1, a2)) in [(c(1.0, 0.0), c(0.0, 0.0)), (c(0.0, 0.0), c(1.0, 0.0))].into_iter().enumerate() {
            let spec = VonNeumannSpec::new(a1, a2, detector).unwrap();
            let u = models::vn_measurement_unitary(&spec).unwrap();
            assert!(u.unitarity_defect() < TOL);
            let out = quantum::apply_unitary(&u, &models::vn_initial(&spec).unwrap()).unwrap();
            // |s_k D_k O_k⟩: every factor reads k
            let layout = out.layout().clone();
            let index = if k == 0 { 0 } else { layout.dim() - 1 };
            let expected = StateVector::basis(layout, index).unwrap();
            assert!((out.fidelity(&expected).unwrap() - 1.0).abs() < TOL);
        }
    }
}

#[test]
fn von_neumann_final_state_and_mixture() {
    let spec = VonNeumannSpec::new(c(0.6, 0.0), c(0.8, 0.0), false).unwrap();
    let out = quantum::apply_unitary(
        &models::vn_measurement_unitary(&spec).unwrap(),
        &models::vn_initial(&spec).unwrap(),
    )
    .unwrap();
    // 0.6|s₁O₁⟩ + 0.8|s₂O₂⟩ on S ⊗ O
    let expected = [c(0.6, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.8, 0.0)];
    assert!(max_diff(out.amplitudes(), &expected) < TOL);
    let rho = models::vn_mixed(&spec).unwrap();
    assert!((rho.get(0, 0).re - 0.36).abs() < TOL);
    assert!((rho.get(3, 3).re - 0.64).abs() < TOL);
    assert!(rho.get(0, 3).norm() < TOL);
}

#[test]
fn rejects_unnormalized_and_bad_chain_lengths() {
    assert!(matches!(
        VonNeumannSpec::new(c(0.6, 0.0), c(0.6, 0.0), false),
        Err(ModelError::NotNormalized(_))
    ));
    assert!(matches!(
        ColemanHeppSpec::new(c(1.0, 0.0), c(0.0, 0.0), 0),
        Err(ModelError::AtomCount { .. })
    ));
    assert!(matches!(
        ColemanHeppSpec::new(c(1.0, 0.0), c(0.0, 0.0), models::MAX_ATOMS + 1),
        Err(ModelError::AtomCount { .. })
    ));
}

#[test]
fn model_serializes_with_kind_tag() {
    let m = MeasurementModel::VonNeumann(VonNeumannSpec::new(c(0.6, 0.0), c(0.8, 0.0), false).unwrap());
    let v = serde_json::to_value(m).unwrap();
    assert_eq!(v["kind"], "vn");
    assert_eq!(v["include_detector"], false);
    let m = MeasurementModel::ColemanHepp(ColemanHeppSpec::new(c(0.6, 0.0), c(0.8, 0.0), 3).unwrap());
    let v = serde_json::to_value(m).unwrap();
    assert_eq!(v["kind"], "ch");
    assert_eq!(v["n_atoms"], 3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dense_passage_matches_closed_form((a1, a2) in amplitudes(), n in 1usize..=6) {
        let spec = ColemanHeppSpec::new(a1, a2, n).unwrap();
        let psi = models::ch_initial(&spec).unwrap();
        let dense = quantum::apply_unitary(&models::ch_passage_unitary(n).unwrap(), &psi).unwrap();
        let free = models::ch_passage_apply(&psi).unwrap();
        let oracle = chain_oracle(a1, a2, n);
        prop_assert!(max_diff(dense.amplitudes(), &oracle) < TOL);
        prop_assert!(max_diff(free.amplitudes(), &oracle) < TOL);
    }

    #[test]
    fn polarization_reads_spin((a1, a2) in amplitudes(), n in 1usize..=6) {
        let spec = ColemanHeppSpec::new(a1, a2, n).unwrap();
        let layout = models::ch_layout(n).unwrap();
        let psi = models::ch_initial(&spec).unwrap();
        let out = quantum::apply_unitary(&models::ch_passage_unitary(n).unwrap(), &psi).unwrap();
        let mu = quantum::expectation(&models::ch_polarization(n).unwrap().embed(&layout).unwrap(), &out).unwrap();
        let sz = quantum::expectation(&pauli::z(SYSTEM).embed(&layout).unwrap(), &psi).unwrap();
        prop_assert!((mu.re - (a1.norm_sqr() - a2.norm_sqr())).abs() < 1e-10);
        prop_assert!((mu.re - sz.re).abs() < 1e-10);
    }

    #[test]
    fn mixed_final_states_hide_interference((a1, a2) in amplitudes(), n in 1usize..=5, detector in any::<bool>()) {
        let models = [
            MeasurementModel::VonNeumann(VonNeumannSpec::new(a1, a2, detector).unwrap()),
            MeasurementModel::ColemanHepp(ColemanHeppSpec::new(a1, a2, n).unwrap()),
        ];
        for m in models {
            let rho = m.mixed_final().unwrap();
            rho.validate().unwrap();
            let b = quantum::expectation(&m.interference_operator().unwrap(), &rho).unwrap();
            prop_assert!(b.norm() < 1e-12);
            let pure = quantum::apply_unitary(&m.measurement_unitary().unwrap(), &m.initial().unwrap()).unwrap();
            let bp = quantum::expectation(&m.interference_operator().unwrap(), &pure).unwrap();
            prop_assert!((bp.re.abs() - m.interference_magnitude()).abs() < 1e-10);
        }
    }
}

#[test]
fn single_atom_interference_by_hand() {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let spec = ColemanHeppSpec::new(c(h, 0.0), c(h, 0.0), 1).unwrap();
    let out = quantum::apply_unitary(&models::ch_passage_unitary(1).unwrap(), &models::ch_initial(&spec).unwrap())
        .unwrap();
    // σ⁰_x ⊗ σ¹_y as a 4×4 matrix on |u u⟩, |u d⟩, |d u⟩, |d d⟩
    let i = c(0.0, 1.0);
    let z = c(0.0, 0.0);
    let b = [[z, z, z, -i], [z, z, i, z], [z, -i, z, z], [i, z, z, z]];
    let v = out.amplitudes();
    let mut acc = c(0.0, 0.0);
    for r in 0..4 {
        for k in 0..4 {
            acc += v[r].conj() * b[r][k] * v[k];
        }
    }
    assert!((acc.re + 1.0).abs() < 1e-12 && acc.im.abs() < 1e-12);
}
