//! Single-qubit Pauli matrices in the `{|u⟩, |d⟩}` basis (`|u⟩` = index 0).

use num_complex::Complex64;

use super::Operator;

const O: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

fn build(label: &str, rows: [[Complex64; 2]; 2]) -> Operator {
    Operator::from_rows(label, &rows)
        .expect("2x2 Pauli matrix is well formed")
        .with_hermitian_hint(true)
}

pub fn identity(label: &str) -> Operator {
    build(label, [[ONE, O], [O, ONE]])
}

pub fn x(label: &str) -> Operator {
    build(label, [[O, ONE], [ONE, O]])
}

pub fn y(label: &str) -> Operator {
    build(label, [[O, -I], [I, O]])
}

pub fn z(label: &str) -> Operator {
    build(label, [[ONE, O], [O, -ONE]])
}

/// `|u⟩⟨u|`.
pub fn up_projector(label: &str) -> Operator {
    build(label, [[ONE, O], [O, O]])
}

/// `|d⟩⟨d|`.
pub fn down_projector(label: &str) -> Operator {
    build(label, [[O, O], [O, ONE]])
}
