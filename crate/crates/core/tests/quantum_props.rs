use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use relmeas::quantum::{self, pauli, DensityMatrix, Operator, QuantumError, StateVector, SubsystemLayout};

const TOL: f64 = 1e-12;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn layout3(da: usize, db: usize, dc: usize) -> SubsystemLayout {
    SubsystemLayout::new([("A", da), ("B", db), ("C", dc)]).unwrap()
}

/// Reference partial trace over B of a pure |ψ⟩ on A ⊗ B ⊗ C, written as
/// explicit index loops.
fn trace_out_middle(psi: &[Complex64], da: usize, db: usize, dc: usize) -> Vec<Complex64> {
    let d = da * dc;
    let mut out = vec![c(0.0, 0.0); d * d];
    for a in 0..da {
        for cc in 0..dc {
            for a2 in 0..da {
                for c2 in 0..dc {
                    let mut acc = c(0.0, 0.0);
                    for b in 0..db {
                        acc += psi[(a * db + b) * dc + cc] * psi[(a2 * db + b) * dc + c2].conj();
                    }
                    out[(a * dc + cc) * d + a2 * dc + c2] = acc;
                }
            }
        }
    }
    out
}

fn naive_kron(x: &Operator, y: &Operator) -> Vec<Complex64> {
    let (m, n) = (x.dim(), y.dim());
    let mut out = vec![c(0.0, 0.0); m * n * m * n];
    for i in 0..m {
        for j in 0..m {
            for k in 0..n {
                for l in 0..n {
                    out[(i * n + k) * (m * n) + j * n + l] = x.get(i, j) * y.get(k, l);
                }
            }
        }
    }
    out
}

fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[test]
fn partial_trace_matches_index_loops_on_random_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for k in 0..1000 {
        let (da, db, dc) = (2 + k % 2, 2 + (k / 2) % 3, 2 + (k / 6) % 2);
        let psi = quantum::random_state(layout3(da, db, dc), &mut rng).unwrap();
        let rho = quantum::reduce(&psi, &["A", "C"]).unwrap();
        let oracle = trace_out_middle(psi.amplitudes(), da, db, dc);
        assert!(max_diff(rho.data(), &oracle) < TOL, "state {k}");
        assert!((rho.trace().re - 1.0).abs() < 1e-12);
    }
}

#[test]
fn partial_trace_of_product_returns_factor() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..50 {
        let a = quantum::random_state(SubsystemLayout::single("A", 3).unwrap(), &mut rng).unwrap();
        let b = quantum::random_state(SubsystemLayout::single("B", 2).unwrap(), &mut rng).unwrap();
        let ab = quantum::tensor_product_state(&a, &b).unwrap();
        let rho_a = quantum::reduce(&ab, &["A"]).unwrap();
        let direct = DensityMatrix::from_pure(&a).unwrap();
        assert!(rho_a.max_abs_diff(&direct).unwrap() < TOL);
    }
}

#[test]
fn keep_set_order_does_not_reorder_layout() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let psi = quantum::random_state(layout3(2, 3, 2), &mut rng).unwrap();
    let ca = quantum::reduce(&psi, &["C", "A"]).unwrap();
    let ac = quantum::reduce(&psi, &["A", "C"]).unwrap();
    assert_eq!(ca.layout(), ac.layout());
    assert!(ca.max_abs_diff(&ac).unwrap() < TOL);
}

#[test]
fn partial_trace_rejects_bad_keep_sets() {
    let rho = DensityMatrix::maximally_mixed(layout3(2, 2, 2)).unwrap();
    assert!(matches!(
        quantum::partial_trace::<&str>(&rho, &[]),
        Err(QuantumError::EmptyKeepSet)
    ));
    assert!(matches!(
        quantum::partial_trace(&rho, &["Z"]),
        Err(QuantumError::UnknownLabel(_))
    ));
}

#[test]
fn disjoint_factors_commute() {
    let layout = SubsystemLayout::new([("1", 2), ("2", 2)]).unwrap();
    let x1 = pauli::x("1").embed(&layout).unwrap();
    let y2 = pauli::y("2").embed(&layout).unwrap();
    assert!(quantum::commutator(&x1, &y2).unwrap().max_abs() < TOL);
}

#[test]
fn pauli_algebra() {
    let z = pauli::z("q");
    let x = pauli::x("q");
    let y = pauli::y("q");
    // [σx, σy] = 2iσz
    let lhs = quantum::commutator(&x, &y).unwrap();
    assert!(lhs.max_abs_diff(&z.scale(c(0.0, 2.0))).unwrap() < TOL);
    for p in [&x, &y, &z] {
        assert!(p.matmul(p).unwrap().max_abs_diff(&pauli::identity("q")).unwrap() < TOL);
    }
}

#[test]
fn mix_checks_weights() {
    let up = DensityMatrix::from_pure(&StateVector::on_factor("S", vec![c(1.0, 0.0), c(0.0, 0.0)]).unwrap()).unwrap();
    let down = DensityMatrix::from_pure(&StateVector::on_factor("S", vec![c(0.0, 0.0), c(1.0, 0.0)]).unwrap()).unwrap();
    let rho = quantum::mix(&[(0.36, up.clone()), (0.64, down.clone())]).unwrap();
    assert!((rho.get(0, 0).re - 0.36).abs() < TOL);
    assert!(rho.get(0, 1).norm() < TOL);
    assert!(matches!(
        quantum::mix(&[(0.5, up.clone()), (0.4, down.clone())]),
        Err(QuantumError::WeightSum(_))
    ));
    assert!(matches!(
        quantum::mix(&[(-0.1, up), (1.1, down)]),
        Err(QuantumError::NegativeWeight(_))
    ));
}

fn seeds() -> impl Strategy<Value = u64> {
    any::<u64>()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kron_matches_index_formula(seed in seeds(), da in 2usize..4, db in 2usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = quantum::random_unitary(SubsystemLayout::single("A", da).unwrap(), &mut rng).unwrap();
        let b = quantum::random_unitary(SubsystemLayout::single("B", db).unwrap(), &mut rng).unwrap();
        let k = a.kron(&b).unwrap();
        prop_assert!(max_diff(k.data(), &naive_kron(&a, &b)) < TOL);
    }

    #[test]
    fn kron_mixed_product(seed in seeds()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let la = SubsystemLayout::single("A", 2).unwrap();
        let lb = SubsystemLayout::single("B", 3).unwrap();
        let a1 = quantum::random_unitary(la.clone(), &mut rng).unwrap();
        let a2 = quantum::random_unitary(la, &mut rng).unwrap();
        let b1 = quantum::random_unitary(lb.clone(), &mut rng).unwrap();
        let b2 = quantum::random_unitary(lb, &mut rng).unwrap();
        // (A₁⊗B₁)(A₂⊗B₂) = A₁A₂ ⊗ B₁B₂
        let lhs = a1.kron(&b1).unwrap().matmul(&a2.kron(&b2).unwrap()).unwrap();
        let rhs = a1.matmul(&a2).unwrap().kron(&b1.matmul(&b2).unwrap()).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs).unwrap() < TOL);
    }

    #[test]
    fn kron_is_associative(seed in seeds()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ops: Vec<Operator> = ["A", "B", "C"]
            .iter()
            .map(|l| quantum::random_unitary(SubsystemLayout::single(*l, 2).unwrap(), &mut rng).unwrap())
            .collect();
        let left = ops[0].kron(&ops[1]).unwrap().kron(&ops[2]).unwrap();
        let right = ops[0].kron(&ops[1].kron(&ops[2]).unwrap()).unwrap();
        prop_assert!(left.max_abs_diff(&right).unwrap() < TOL);
    }

    #[test]
    fn commutator_is_antisymmetric(seed in seeds()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = layout3(2, 2, 2);
        let a = quantum::random_unitary(l.clone(), &mut rng).unwrap();
        let b = quantum::random_unitary(l, &mut rng).unwrap();
        let ab = quantum::commutator(&a, &b).unwrap();
        let ba = quantum::commutator(&b, &a).unwrap();
        prop_assert!(ab.add(&ba).unwrap().max_abs() < 1e-11);
    }

    #[test]
    fn random_unitaries_are_unitary(seed in seeds(), d in 2usize..9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = quantum::random_unitary(SubsystemLayout::single("Q", d).unwrap(), &mut rng).unwrap();
        prop_assert!(u.unitarity_defect() < 1e-12);
    }

    #[test]
    fn unitary_conjugation_preserves_spectrum(seed in seeds()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = layout3(2, 2, 2);
        let psi = quantum::random_state(l.clone(), &mut rng).unwrap();
        let rho = quantum::reduce(&psi, &["A", "B"]).unwrap();
        let u = quantum::random_unitary(rho.layout().clone(), &mut rng).unwrap();
        let evolved = quantum::evolve_density(&u, &rho).unwrap();
        let mut before = rho.eigenvalues();
        let mut after = evolved.eigenvalues();
        before.sort_by(f64::total_cmp);
        after.sort_by(f64::total_cmp);
        for (x, y) in before.iter().zip(&after) {
            prop_assert!((x - y).abs() < 1e-10);
        }
        prop_assert!((rho.purity() - evolved.purity()).abs() < 1e-12);
        evolved.validate().unwrap();
    }

    #[test]
    fn unitary_evolution_preserves_norm_and_expectations(seed in seeds()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = layout3(2, 3, 2);
        let psi = quantum::random_state(l.clone(), &mut rng).unwrap();
        let u = quantum::random_unitary(l.clone(), &mut rng).unwrap();
        let out = quantum::apply_unitary(&u, &psi).unwrap();
        prop_assert!((out.norm_sqr() - 1.0).abs() < 1e-12);
        // ⟨Uψ|A|Uψ⟩ = ⟨ψ|U†AU|ψ⟩
        let a = pauli::z("A").embed(&l).unwrap();
        let lhs = quantum::expectation(&a, &out).unwrap();
        let heis = u.adjoint().matmul(&a).unwrap().matmul(&u).unwrap().with_hermitian_hint(true);
        let rhs = quantum::expectation(&heis, &psi).unwrap();
        prop_assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn pure_and_density_paths_agree(seed in seeds()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = layout3(2, 2, 3);
        let psi = quantum::random_state(l.clone(), &mut rng).unwrap();
        let rho = DensityMatrix::from_pure(&psi).unwrap();
        let u = quantum::random_unitary(l, &mut rng).unwrap();
        let via_pure = DensityMatrix::from_pure(&quantum::apply_unitary(&u, &psi).unwrap()).unwrap();
        let via_rho = quantum::evolve_density(&u, &rho).unwrap();
        prop_assert!(via_pure.max_abs_diff(&via_rho).unwrap() < 1e-12);
        let r1 = quantum::reduce(&psi, &["B"]).unwrap();
        let r2 = quantum::partial_trace(&rho, &["B"]).unwrap();
        prop_assert!(r1.max_abs_diff(&r2).unwrap() < 1e-12);
    }

    #[test]
    fn local_application_matches_embedding(seed in seeds()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = layout3(2, 3, 2);
        let psi = quantum::random_state(l.clone(), &mut rng).unwrap();
        let local = quantum::random_unitary(SubsystemLayout::single("B", 3).unwrap(), &mut rng).unwrap();
        let a = psi.apply_local(&local).unwrap();
        let b = quantum::apply_operator(&local.embed(&l).unwrap(), &psi).unwrap();
        prop_assert!(a.max_abs_diff(&b).unwrap() < 1e-12);
    }
}
