//! Builders for the two concrete measurement models.
//!
//! * Von Neumann chain: a binary system `S` copied into an observer `O`
//!   (optionally through a detector `D`). Every factor is two-dimensional and
//!   the observer's ready state `|O_0⟩` is basis index 0, which the copy
//!   gate maps to `|O_1⟩` (index 0) or `|O_2⟩` (index 1).
//! * Coleman-Hepp chain: a spin `S` passing over atoms `A1..AN`, each flipped
//!   by a controlled `−iσ_x` when the spin is down. The pointer is the chain
//!   polarization; the whole chain forms observer `D`.

use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::doublet::{DoubletError, ProjectorSet};
use crate::quantum::{
    self, pauli, DensityMatrix, Operator, QuantumError, StateVector, SubsystemLayout,
};

pub const SYSTEM: &str = "S";
pub const DETECTOR: &str = "D";
pub const OBSERVER: &str = "O";
pub const SECOND_OBSERVER: &str = "O'";
/// Register name of the Coleman-Hepp chain acting as observer.
pub const CHAIN_OBSERVER: &str = "D";

/// State-vector cap on the chain length.
pub const MAX_ATOMS: usize = 20;
/// Cap for anything built as a dense operator or density matrix.
pub const MAX_DENSE_ATOMS: usize = 8;
pub const AMPLITUDE_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("|a1|² + |a2|² = {0}, expected 1")]
    NotNormalized(f64),
    #[error("chain length {n} outside 1..={cap}")]
    AtomCount { n: usize, cap: usize },
    #[error(transparent)]
    Quantum(#[from] QuantumError),
    #[error(transparent)]
    Doublet(#[from] DoubletError),
}

pub type Result<T> = std::result::Result<T, ModelError>;

fn check_amplitudes(a1: Complex64, a2: Complex64) -> Result<()> {
    let n = a1.norm_sqr() + a2.norm_sqr();
    if !n.is_finite() || (n - 1.0).abs() > AMPLITUDE_TOL {
        return Err(ModelError::NotNormalized(n));
    }
    Ok(())
}

fn check_atoms(n: usize, cap: usize) -> Result<()> {
    if n == 0 || n > cap {
        return Err(ModelError::AtomCount { n, cap });
    }
    Ok(())
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Basis-state ket `|k⟩` on one factor.
fn basis_ket(label: &str, dim: usize, k: usize) -> Result<StateVector> {
    Ok(StateVector::basis(SubsystemLayout::single(label, dim)?, k)?)
}

/// `|i⟩|j⟩ → |i⟩|j ⊕ i⟩` on (control, target), both two-dimensional.
pub fn copy_gate(control: &str, target: &str) -> Result<Operator> {
    let layout = SubsystemLayout::new([(control, 2), (target, 2)])?;
    let mut data = vec![c(0.0, 0.0); 16];
    for i in 0..2 {
        for j in 0..2 {
            let from = i * 2 + j;
            let to = i * 2 + (i ^ j);
            data[to * 4 + from] = c(1.0, 0.0);
        }
    }
    Ok(Operator::new(layout, data)?)
}

// ---------------------------------------------------------------------------
// Von Neumann chain

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VonNeumannSpec {
    pub a1: Complex64,
    pub a2: Complex64,
    pub include_detector: bool,
}

impl VonNeumannSpec {
    pub fn new(a1: Complex64, a2: Complex64, include_detector: bool) -> Result<Self> {
        check_amplitudes(a1, a2)?;
        Ok(Self {
            a1,
            a2,
            include_detector,
        })
    }

    fn with_amplitudes(&self, a1: Complex64, a2: Complex64) -> Self {
        Self { a1, a2, ..*self }
    }
}

pub fn vn_layout(spec: &VonNeumannSpec) -> Result<SubsystemLayout> {
    let layout = if spec.include_detector {
        SubsystemLayout::new([(SYSTEM, 2), (DETECTOR, 2), (OBSERVER, 2)])?
    } else {
        SubsystemLayout::new([(SYSTEM, 2), (OBSERVER, 2)])?
    };
    Ok(layout)
}

/// `(a₁|s₁⟩ + a₂|s₂⟩) ⊗ |O₀⟩`, with `|D₀⟩` between when the detector is on.
pub fn vn_initial(spec: &VonNeumannSpec) -> Result<StateVector> {
    check_amplitudes(spec.a1, spec.a2)?;
    let s = StateVector::on_factor(SYSTEM, vec![spec.a1, spec.a2])?;
    let mut psi = s;
    if spec.include_detector {
        psi = quantum::tensor_product_state(&psi, &basis_ket(DETECTOR, 2, 0)?)?;
    }
    Ok(quantum::tensor_product_state(&psi, &basis_ket(OBSERVER, 2, 0)?)?)
}

/// Maps `|s_i⟩|O₀⟩ → |s_i⟩|O_i⟩` (through `|D_i⟩` when present).
pub fn vn_measurement_unitary(spec: &VonNeumannSpec) -> Result<Operator> {
    let layout = vn_layout(spec)?;
    if spec.include_detector {
        let s_to_d = copy_gate(SYSTEM, DETECTOR)?.embed(&layout)?;
        let d_to_o = copy_gate(DETECTOR, OBSERVER)?.embed(&layout)?;
        Ok(d_to_o.matmul(&s_to_d)?)
    } else {
        Ok(copy_gate(SYSTEM, OBSERVER)?.embed(&layout)?)
    }
}

/// Initial state with `S` dephased: `Σ|a_i|² |s_i⟩⟨s_i| ⊗ |O₀⟩⟨O₀|`.
pub fn vn_mixed_initial(spec: &VonNeumannSpec) -> Result<DensityMatrix> {
    let branches = [
        (spec.a1.norm_sqr(), spec.with_amplitudes(c(1.0, 0.0), c(0.0, 0.0))),
        (spec.a2.norm_sqr(), spec.with_amplitudes(c(0.0, 0.0), c(1.0, 0.0))),
    ];
    let mut parts = Vec::new();
    for (w, s) in branches {
        parts.push((w, quantum::density_from_pure(&vn_initial(&s)?)?));
    }
    Ok(quantum::mix(&parts)?)
}

/// Final mixed state `Σ|a_i|² |s_i⟩⟨s_i| ⊗ |O_i⟩⟨O_i|`.
pub fn vn_mixed(spec: &VonNeumannSpec) -> Result<DensityMatrix> {
    check_amplitudes(spec.a1, spec.a2)?;
    let u = vn_measurement_unitary(spec)?;
    Ok(quantum::evolve_density(&u, &vn_mixed_initial(spec)?)?)
}

/// `B = |O₁⟩⟨O₂| ⊗ |s₁⟩⟨s₂| + h.c.` (with `|D₁⟩⟨D₂|` when present).
pub fn vn_interference_operator(spec: &VonNeumannSpec) -> Result<Operator> {
    let layout = vn_layout(spec)?;
    let flip = |label: &str| -> Result<Operator> {
        Ok(Operator::basis_outer(SubsystemLayout::single(label, 2)?, 0, 1)?)
    };
    let mut term = flip(SYSTEM)?;
    if spec.include_detector {
        term = term.kron(&flip(DETECTOR)?)?;
    }
    term = term.kron(&flip(OBSERVER)?)?.embed(&layout)?;
    Ok(term.add(&term.adjoint())?.with_hermitian_hint(true))
}

pub fn vn_observer_projectors() -> Result<ProjectorSet> {
    Ok(ProjectorSet::basis(OBSERVER, OBSERVER, 2)?)
}

// ---------------------------------------------------------------------------
// Coleman-Hepp chain

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ColemanHeppSpec {
    pub a1: Complex64,
    pub a2: Complex64,
    pub n_atoms: usize,
}

impl ColemanHeppSpec {
    pub fn new(a1: Complex64, a2: Complex64, n_atoms: usize) -> Result<Self> {
        check_amplitudes(a1, a2)?;
        check_atoms(n_atoms, MAX_ATOMS)?;
        Ok(Self { a1, a2, n_atoms })
    }
}

pub fn atom_label(i: usize) -> String {
    format!("A{i}")
}

pub fn ch_chain_layout(n: usize) -> Result<SubsystemLayout> {
    check_atoms(n, MAX_ATOMS)?;
    Ok(SubsystemLayout::new((1..=n).map(|i| (atom_label(i), 2)))?)
}

pub fn ch_layout(n: usize) -> Result<SubsystemLayout> {
    Ok(SubsystemLayout::single(SYSTEM, 2)?.concat(&ch_chain_layout(n)?)?)
}

/// `(a₁|u₀⟩ + a₂|d₀⟩) ⊗ ∏|u_i⟩`.
pub fn ch_initial(spec: &ColemanHeppSpec) -> Result<StateVector> {
    check_amplitudes(spec.a1, spec.a2)?;
    check_atoms(spec.n_atoms, MAX_ATOMS)?;
    let layout = ch_layout(spec.n_atoms)?;
    let dim = layout.dim();
    let mut amps = vec![c(0.0, 0.0); dim];
    amps[0] = spec.a1;
    amps[dim / 2] = spec.a2;
    Ok(StateVector::new(layout, amps)?)
}

/// Controlled gate on `(S, A_i)`: identity when the spin is up, `−iσ_x` on
/// the atom when it is down.
pub fn ch_atom_gate(i: usize) -> Result<Operator> {
    let atom = atom_label(i);
    let up = pauli::up_projector(SYSTEM).kron(&pauli::identity(&atom))?;
    let down = pauli::down_projector(SYSTEM).kron(&pauli::x(&atom).scale(c(0.0, -1.0)))?;
    Ok(up.add(&down)?)
}

/// Dense passage unitary `G_N ⋯ G_1` (atoms in ascending order).
pub fn ch_passage_unitary(n: usize) -> Result<Operator> {
    check_atoms(n, MAX_DENSE_ATOMS)?;
    let layout = ch_layout(n)?;
    let mut u = Operator::identity(layout.clone())?;
    for i in 1..=n {
        u = ch_atom_gate(i)?.embed(&layout)?.matmul(&u)?;
    }
    Ok(u)
}

/// Passage applied gate by gate, without a dense operator; valid up to the
/// state-vector cap.
pub fn ch_passage_apply(state: &StateVector) -> Result<StateVector> {
    let n = state.layout().len() - 1;
    check_atoms(n, MAX_ATOMS)?;
    let mut out = state.clone();
    for i in 1..=n {
        out = out.apply_local(&ch_atom_gate(i)?)?;
    }
    Ok(out)
}

/// Adjoint of the passage: reverses a completed chain measurement.
pub fn ch_undo_unitary(n: usize) -> Result<Operator> {
    Ok(ch_passage_unitary(n)?.adjoint())
}

/// `μ_z = (1/N) Σ σⁱ_z` on the chain factors.
pub fn ch_polarization(n: usize) -> Result<Operator> {
    check_atoms(n, MAX_DENSE_ATOMS)?;
    let chain = ch_chain_layout(n)?;
    let mut mu = Operator::zeros(chain.clone())?;
    for i in 1..=n {
        mu = mu.add(&pauli::z(&atom_label(i)).embed(&chain)?)?;
    }
    Ok(mu.scale(c(1.0 / n as f64, 0.0)).with_hermitian_hint(true))
}

/// `B = σ⁰_x ∏ σⁱ_y` on the full layout.
pub fn ch_interference_operator(n: usize) -> Result<Operator> {
    check_atoms(n, MAX_DENSE_ATOMS)?;
    let mut b = pauli::x(SYSTEM);
    for i in 1..=n {
        b = b.kron(&pauli::y(&atom_label(i)))?;
    }
    Ok(b.with_hermitian_hint(true))
}

/// `(i σ⁰_x / N) Σᵢ σⁱ_x ∏_{j≠i} σʲ_y`, the literal closed form quoted for
/// `[μ_z, B]`. The numeric commutator equals `−2` times this operator; see
/// the README.
pub fn ch_commutator_reference(n: usize) -> Result<Operator> {
    check_atoms(n, MAX_DENSE_ATOMS)?;
    let layout = ch_layout(n)?;
    let mut sum = Operator::zeros(layout)?;
    for i in 1..=n {
        let mut term = pauli::x(SYSTEM);
        for j in 1..=n {
            let atom = atom_label(j);
            let factor = if j == i { pauli::x(&atom) } else { pauli::y(&atom) };
            term = term.kron(&factor)?;
        }
        sum = sum.add(&term)?;
    }
    Ok(sum.scale(c(0.0, 1.0 / n as f64)))
}

/// Initial state with the spin dephased.
pub fn ch_mixed_initial(spec: &ColemanHeppSpec) -> Result<DensityMatrix> {
    check_atoms(spec.n_atoms, MAX_DENSE_ATOMS)?;
    let up = ColemanHeppSpec {
        a1: c(1.0, 0.0),
        a2: c(0.0, 0.0),
        ..*spec
    };
    let down = ColemanHeppSpec {
        a1: c(0.0, 0.0),
        a2: c(1.0, 0.0),
        ..*spec
    };
    Ok(quantum::mix(&[
        (spec.a1.norm_sqr(), quantum::density_from_pure(&ch_initial(&up)?)?),
        (spec.a2.norm_sqr(), quantum::density_from_pure(&ch_initial(&down)?)?),
    ])?)
}

/// Mixed counterpart of the final state: the passage applied to the
/// dephased initial state.
pub fn ch_mixed_final(spec: &ColemanHeppSpec) -> Result<DensityMatrix> {
    let u = ch_passage_unitary(spec.n_atoms)?;
    Ok(quantum::evolve_density(&u, &ch_mixed_initial(spec)?)?)
}

/// Pointer readings of the chain: all up (index 0), all down (index 1),
/// anything else (index 2).
pub fn ch_pointer_projectors(n: usize) -> Result<ProjectorSet> {
    check_atoms(n, MAX_DENSE_ATOMS)?;
    let chain = ch_chain_layout(n)?;
    let dim = chain.dim();
    let all_up = Operator::basis_outer(chain.clone(), 0, 0)?;
    let all_down = Operator::basis_outer(chain.clone(), dim - 1, dim - 1)?;
    let rest = Operator::identity(chain)?.sub(&all_up)?.sub(&all_down)?;
    Ok(ProjectorSet::new(CHAIN_OBSERVER, vec![all_up, all_down, rest])?)
}

// ---------------------------------------------------------------------------
// Uniform view for the scenario runner

/// Either model, as configured for a scenario run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasurementModel {
    #[serde(rename = "vn")]
    VonNeumann(VonNeumannSpec),
    #[serde(rename = "ch")]
    ColemanHepp(ColemanHeppSpec),
}

impl MeasurementModel {
    pub fn amplitudes(&self) -> (Complex64, Complex64) {
        match self {
            MeasurementModel::VonNeumann(s) => (s.a1, s.a2),
            MeasurementModel::ColemanHepp(s) => (s.a1, s.a2),
        }
    }

    /// Rejects chains too long for dense scenario runs.
    pub fn check_dense(&self) -> Result<()> {
        if let MeasurementModel::ColemanHepp(s) = self {
            check_atoms(s.n_atoms, MAX_DENSE_ATOMS)?;
        }
        Ok(())
    }

    pub fn layout(&self) -> Result<SubsystemLayout> {
        match self {
            MeasurementModel::VonNeumann(s) => vn_layout(s),
            MeasurementModel::ColemanHepp(s) => ch_layout(s.n_atoms),
        }
    }

    /// Register name of the observer that reads the pointer.
    pub fn observer(&self) -> &'static str {
        match self {
            MeasurementModel::VonNeumann(_) => OBSERVER,
            MeasurementModel::ColemanHepp(_) => CHAIN_OBSERVER,
        }
    }

    pub fn observer_projectors(&self) -> Result<Arc<ProjectorSet>> {
        Ok(Arc::new(match self {
            MeasurementModel::VonNeumann(_) => vn_observer_projectors()?,
            MeasurementModel::ColemanHepp(s) => ch_pointer_projectors(s.n_atoms)?,
        }))
    }

    pub fn initial(&self) -> Result<StateVector> {
        match self {
            MeasurementModel::VonNeumann(s) => vn_initial(s),
            MeasurementModel::ColemanHepp(s) => ch_initial(s),
        }
    }

    pub fn mixed_initial(&self) -> Result<DensityMatrix> {
        match self {
            MeasurementModel::VonNeumann(s) => vn_mixed_initial(s),
            MeasurementModel::ColemanHepp(s) => ch_mixed_initial(s),
        }
    }

    pub fn mixed_final(&self) -> Result<DensityMatrix> {
        match self {
            MeasurementModel::VonNeumann(s) => vn_mixed(s),
            MeasurementModel::ColemanHepp(s) => ch_mixed_final(s),
        }
    }

    pub fn measurement_unitary(&self) -> Result<Operator> {
        match self {
            MeasurementModel::VonNeumann(s) => vn_measurement_unitary(s),
            MeasurementModel::ColemanHepp(s) => ch_passage_unitary(s.n_atoms),
        }
    }

    pub fn interference_operator(&self) -> Result<Operator> {
        match self {
            MeasurementModel::VonNeumann(s) => vn_interference_operator(s),
            MeasurementModel::ColemanHepp(s) => ch_interference_operator(s.n_atoms),
        }
    }

    /// Expected `|⟨B⟩|` on the pure final state: `|a₁*a₂ + a₁a₂*|`.
    pub fn interference_magnitude(&self) -> f64 {
        let (a1, a2) = self.amplitudes();
        (a1.conj() * a2 + a1 * a2.conj()).norm()
    }
}
