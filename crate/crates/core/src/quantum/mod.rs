//! Dense complex linear algebra over labeled tensor-product spaces.
//!
//! States, density matrices and operators all carry a [`SubsystemLayout`];
//! every composition checks layouts by label, so factor ordering is always
//! explicit. Storage is row-major `f64` complex.

mod density;
mod layout;
mod operator;
pub mod pauli;
mod state;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

pub use density::DensityMatrix;
pub use layout::{Factor, SubsystemLayout};
pub use operator::Operator;
pub use state::StateVector;

/// Largest state-vector dimension (2²⁰ amplitudes).
pub const MAX_STATE_DIM: usize = 1 << 20;
/// Largest density-matrix dimension.
pub const MAX_DENSITY_DIM: usize = 1 << 9;
/// Largest dense operator dimension.
pub const MAX_OPERATOR_DIM: usize = 1 << 10;

pub const NORMALIZATION_TOL: f64 = 1e-8;
pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const EIGENVALUE_FLOOR: f64 = -1e-8;
pub const UNITARY_TOL: f64 = 1e-10;
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantumError {
    #[error("duplicate subsystem label `{0}`")]
    DuplicateLabel(String),
    #[error("unknown subsystem label `{0}`")]
    UnknownLabel(String),
    #[error("factor `{0}` has zero dimension")]
    ZeroDimension(String),
    #[error("layout has no factors")]
    EmptyLayout,
    #[error("keep set is empty")]
    EmptyKeepSet,
    #[error("factor `{label}` has dimension {expected}, operator has {found}")]
    DimensionMismatch {
        label: String,
        expected: usize,
        found: usize,
    },
    #[error("layout mismatch: {left} vs {right}")]
    LayoutMismatch { left: String, right: String },
    #[error("expected {expected} entries, found {found}")]
    WrongLength { expected: usize, found: usize },
    #[error("dimension {dim} exceeds cap {cap}")]
    TooLarge { dim: usize, cap: usize },
    #[error("basis index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("non-finite entry")]
    NonFinite,
    #[error("state not normalized (norm {norm})")]
    NotNormalized { norm: f64 },
    #[error("operator not unitary (max |U†U - I| = {defect:e})")]
    NotUnitary { defect: f64 },
    #[error("matrix not Hermitian (max defect {defect:e})")]
    NotHermitian { defect: f64 },
    #[error("trace {trace} differs from 1")]
    InvalidTrace { trace: f64 },
    #[error("matrix not positive (min eigenvalue {min_eigenvalue:e})")]
    NotPositive { min_eigenvalue: f64 },
    #[error("negative mixture weight {0}")]
    NegativeWeight(f64),
    #[error("mixture weights sum to {0}")]
    WeightSum(f64),
    #[error("mixture has no components")]
    EmptyMixture,
    #[error("expectation of Hermitian operator has imaginary part {0:e}")]
    ComplexExpectation(f64),
}

pub type Result<T> = std::result::Result<T, QuantumError>;

pub(crate) fn check_finite(data: &[Complex64]) -> Result<()> {
    if data.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(QuantumError::NonFinite)
    }
}

/// Dynamical component of an event-state: a pure vector or a density matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum Dynamical {
    Pure(StateVector),
    Mixed(DensityMatrix),
}

impl Dynamical {
    pub fn layout(&self) -> &SubsystemLayout {
        match self {
            Dynamical::Pure(s) => s.layout(),
            Dynamical::Mixed(r) => r.layout(),
        }
    }

    /// Unitary step: `U|ψ⟩` or `UρU†`.
    pub fn evolve(&self, u: &Operator) -> Result<Dynamical> {
        Ok(match self {
            Dynamical::Pure(s) => Dynamical::Pure(apply_unitary(u, s)?),
            Dynamical::Mixed(r) => Dynamical::Mixed(evolve_density(u, r)?),
        })
    }

    pub fn to_density(&self) -> Result<DensityMatrix> {
        match self {
            Dynamical::Pure(s) => DensityMatrix::from_pure(s),
            Dynamical::Mixed(r) => Ok(r.clone()),
        }
    }
}

impl From<StateVector> for Dynamical {
    fn from(s: StateVector) -> Self {
        Dynamical::Pure(s)
    }
}

impl From<DensityMatrix> for Dynamical {
    fn from(r: DensityMatrix) -> Self {
        Dynamical::Mixed(r)
    }
}

/// Anything that can be traced against an operator or reduced to a factor set.
pub trait QuantumState {
    fn layout(&self) -> &SubsystemLayout;
    /// `⟨ψ|A|ψ⟩` or `Tr(ρA)`, layouts already checked.
    fn expectation_unchecked(&self, op: &Operator) -> Complex64;
    /// Reduced density entries on `keep`.
    fn reduced_entries(&self, keep: &SubsystemLayout) -> Result<Vec<Complex64>>;
}

impl QuantumState for StateVector {
    fn layout(&self) -> &SubsystemLayout {
        self.layout()
    }

    fn expectation_unchecked(&self, op: &Operator) -> Complex64 {
        let av = op.matvec(self.amplitudes());
        self.amplitudes()
            .iter()
            .zip(&av)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    fn reduced_entries(&self, keep: &SubsystemLayout) -> Result<Vec<Complex64>> {
        self.reduced_raw(keep)
    }
}

impl QuantumState for DensityMatrix {
    fn layout(&self) -> &SubsystemLayout {
        self.layout()
    }

    fn expectation_unchecked(&self, op: &Operator) -> Complex64 {
        // Tr(ρA) = Σ_ij ρ_ij A_ji
        let n = self.dim();
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                let a = op.get(j, i);
                if a.re != 0.0 || a.im != 0.0 {
                    acc += self.get(i, j) * a;
                }
            }
        }
        acc
    }

    fn reduced_entries(&self, keep: &SubsystemLayout) -> Result<Vec<Complex64>> {
        self.reduced_raw(keep)
    }
}

impl QuantumState for Dynamical {
    fn layout(&self) -> &SubsystemLayout {
        Dynamical::layout(self)
    }

    fn expectation_unchecked(&self, op: &Operator) -> Complex64 {
        match self {
            Dynamical::Pure(s) => s.expectation_unchecked(op),
            Dynamical::Mixed(r) => r.expectation_unchecked(op),
        }
    }

    fn reduced_entries(&self, keep: &SubsystemLayout) -> Result<Vec<Complex64>> {
        match self {
            Dynamical::Pure(s) => s.reduced_entries(keep),
            Dynamical::Mixed(r) => r.reduced_entries(keep),
        }
    }
}

fn require_layout(left: &SubsystemLayout, right: &SubsystemLayout) -> Result<()> {
    if left != right {
        return Err(QuantumError::LayoutMismatch {
            left: left.to_string(),
            right: right.to_string(),
        });
    }
    Ok(())
}

/// Kronecker product of two states on disjoint factors.
pub fn tensor_product_state(a: &StateVector, b: &StateVector) -> Result<StateVector> {
    let layout = a.layout().concat(b.layout())?;
    if layout.dim() > MAX_STATE_DIM {
        return Err(QuantumError::TooLarge {
            dim: layout.dim(),
            cap: MAX_STATE_DIM,
        });
    }
    let amps = a
        .amplitudes()
        .iter()
        .flat_map(|x| b.amplitudes().iter().map(move |y| x * y))
        .collect();
    Ok(StateVector::from_parts(layout, amps))
}

/// Kronecker product of two operators on disjoint factors.
pub fn tensor_product_op(a: &Operator, b: &Operator) -> Result<Operator> {
    a.kron(b)
}

/// Embeds a single-factor operator onto factor `target` of `layout`.
pub fn lift_op(op: &Operator, target: &str, layout: &SubsystemLayout) -> Result<Operator> {
    let dim = layout.factor_dim(target)?;
    if op.layout().len() != 1 || op.dim() != dim {
        return Err(QuantumError::DimensionMismatch {
            label: target.to_string(),
            expected: dim,
            found: op.dim(),
        });
    }
    let own = &op.layout().factors()[0].label;
    op.relabel(own, target)?.embed(layout)
}

/// Matrix-vector product; no normalization.
pub fn apply_operator(op: &Operator, s: &StateVector) -> Result<StateVector> {
    require_layout(op.layout(), s.layout())?;
    Ok(StateVector::from_parts(
        s.layout().clone(),
        op.matvec(s.amplitudes()),
    ))
}

/// `U|ψ⟩` with a unitarity gate on `U`.
pub fn apply_unitary(u: &Operator, s: &StateVector) -> Result<StateVector> {
    u.require_unitary(UNITARY_TOL)?;
    apply_operator(u, s)
}

/// `ρ → UρU†`.
pub fn evolve_density(u: &Operator, rho: &DensityMatrix) -> Result<DensityMatrix> {
    require_layout(u.layout(), rho.layout())?;
    u.require_unitary(UNITARY_TOL)?;
    rho.conjugate_raw(u)
}

/// Traces out every factor not named in `keep`. The result keeps the
/// original factor order.
pub fn partial_trace<S: AsRef<str>>(rho: &DensityMatrix, keep: &[S]) -> Result<DensityMatrix> {
    reduce(rho, keep)
}

/// Partial trace of any state kind.
pub fn reduce<Q: QuantumState, S: AsRef<str>>(state: &Q, keep: &[S]) -> Result<DensityMatrix> {
    let keep_layout = state.layout().restrict(keep)?;
    let entries = state.reduced_entries(&keep_layout)?;
    DensityMatrix::from_parts(keep_layout, entries)
}

/// `⟨ψ|A|ψ⟩` or `Tr(ρA)`.
pub fn expectation<Q: QuantumState>(op: &Operator, state: &Q) -> Result<Complex64> {
    require_layout(op.layout(), state.layout())?;
    let value = state.expectation_unchecked(op);
    if op.hermitian_hint() && value.im.abs() >= 1e-10 {
        return Err(QuantumError::ComplexExpectation(value.im));
    }
    Ok(value)
}

/// `AB − BA`.
pub fn commutator(a: &Operator, b: &Operator) -> Result<Operator> {
    a.matmul(b)?.sub(&b.matmul(a)?)
}

pub fn density_from_pure(s: &StateVector) -> Result<DensityMatrix> {
    DensityMatrix::from_pure(s)
}

/// Convex combination of density matrices sharing one layout.
pub fn mix(components: &[(f64, DensityMatrix)]) -> Result<DensityMatrix> {
    let (_, first) = components.first().ok_or(QuantumError::EmptyMixture)?;
    let mut total = 0.0;
    for (w, rho) in components {
        if *w < 0.0 || !w.is_finite() {
            return Err(QuantumError::NegativeWeight(*w));
        }
        require_layout(first.layout(), rho.layout())?;
        total += w;
    }
    if (total - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(QuantumError::WeightSum(total));
    }
    let mut data = vec![Complex64::new(0.0, 0.0); first.data().len()];
    for (w, rho) in components {
        for (acc, x) in data.iter_mut().zip(rho.data()) {
            *acc += x * *w;
        }
    }
    DensityMatrix::from_parts(first.layout().clone(), data)
}

/// Haar-random unitary on `layout` (QR of a complex Gaussian matrix with the
/// phases of R's diagonal divided out).
pub fn random_unitary<R: Rng + ?Sized>(layout: SubsystemLayout, rng: &mut R) -> Result<Operator> {
    let n = layout.dim();
    let mut cols: Vec<Vec<Complex64>> = (0..n)
        .map(|_| {
            (0..n)
                .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .collect()
        })
        .collect();
    for k in 0..n {
        for j in 0..k {
            let proj: Complex64 = cols[j]
                .iter()
                .zip(&cols[k])
                .map(|(a, b)| a.conj() * b)
                .sum();
            let prev = cols[j].clone();
            for (x, p) in cols[k].iter_mut().zip(&prev) {
                *x -= proj * p;
            }
        }
        let norm: f64 = cols[k].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for x in cols[k].iter_mut() {
            *x /= norm;
        }
    }
    let mut data = vec![Complex64::new(0.0, 0.0); n * n];
    for (j, col) in cols.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            data[i * n + j] = *v;
        }
    }
    Operator::new(layout, data)
}

/// Random normalized state on `layout`.
pub fn random_state<R: Rng + ?Sized>(layout: SubsystemLayout, rng: &mut R) -> Result<StateVector> {
    let n = layout.dim();
    let amps = (0..n)
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    StateVector::new(layout, amps)?.normalize()
}
