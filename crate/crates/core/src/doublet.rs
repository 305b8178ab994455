//! Event-states: a linearly evolving dynamical component paired with one
//! stochastic outcome register per observer.
//!
//! The dynamical component never jumps. Registers are (re)drawn only when a
//! step couples distinct branches of their observer, with probabilities
//! `P_j = Tr(P̂_j R_O)` read off the post-step restricted state. When other
//! observers already hold outcomes, the draw is conditioned on them through
//! the joint law `P_ij = Tr(ρ P̂_i P̂_j)`.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::quantum::{
    self, DensityMatrix, Dynamical, Operator, QuantumError, QuantumState, SubsystemLayout,
};

/// Round-off allowance for probabilities; anything more negative is a bug.
pub const NEGATIVE_PROBABILITY_TOL: f64 = 1e-12;
pub const PROBABILITY_SUM_TOL: f64 = 1e-9;
pub const PROJECTOR_TOL: f64 = 1e-10;
/// Cross-branch coupling threshold for the identity condition.
pub const BRANCH_COUPLING_TOL: f64 = 1e-10;
/// Dispersion below which selected information is reported as infinite.
pub const MIN_DISPERSION: f64 = 1e-300;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DoubletError {
    #[error(transparent)]
    Quantum(#[from] QuantumError),
    #[error("invalid projector set: {0}")]
    InvalidProjectorSet(String),
    #[error("probability {value:e} at index {index} is negative beyond round-off")]
    NegativeProbability { index: usize, value: f64 },
    #[error("probabilities sum to {0}")]
    ProbabilitySum(f64),
    #[error("empty distribution")]
    EmptyDistribution,
    #[error("no register for observer `{0}`")]
    UnknownObserver(String),
    #[error("observers `{0}` and `{1}` share factor `{2}`")]
    OverlappingObservers(String, String, String),
    #[error("register `{0}` is unset")]
    RegisterUnset(String),
    #[error("outcome {index} out of range for `{observer}` ({len} outcomes)")]
    OutcomeOutOfRange {
        observer: String,
        index: usize,
        len: usize,
    },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("register pattern differs from the one the step plan was prepared for")]
    PlanMismatch,
}

pub type Result<T> = std::result::Result<T, DoubletError>;

/// Complete orthogonal projector family on one observer's factors.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorSet {
    observer: String,
    layout: SubsystemLayout,
    projectors: Vec<Operator>,
}

impl ProjectorSet {
    /// Checks idempotence, Hermiticity, pairwise orthogonality and
    /// completeness, all within 1e-10.
    pub fn new(observer: impl Into<String>, projectors: Vec<Operator>) -> Result<Self> {
        let observer = observer.into();
        let invalid = |msg: String| DoubletError::InvalidProjectorSet(format!("{observer}: {msg}"));
        let first = projectors
            .first()
            .ok_or_else(|| invalid("no projectors".into()))?;
        let layout = first.layout().clone();
        let mut sum = Operator::zeros(layout.clone())?;
        for (i, p) in projectors.iter().enumerate() {
            if p.layout() != &layout {
                return Err(invalid(format!("projector {i} has layout {}", p.layout())));
            }
            if p.hermiticity_defect() > PROJECTOR_TOL {
                return Err(invalid(format!("projector {i} is not Hermitian")));
            }
            if p.matmul(p)?.max_abs_diff(p)? > PROJECTOR_TOL {
                return Err(invalid(format!("projector {i} is not idempotent")));
            }
            for (j, q) in projectors.iter().enumerate().skip(i + 1) {
                if p.matmul(q)?.max_abs() > PROJECTOR_TOL {
                    return Err(invalid(format!("projectors {i} and {j} overlap")));
                }
            }
            sum = sum.add(p)?;
        }
        if sum.max_abs_diff(&Operator::identity(layout.clone())?)? > PROJECTOR_TOL {
            return Err(invalid("projectors do not sum to identity".into()));
        }
        let projectors = projectors
            .into_iter()
            .map(|p| p.with_hermitian_hint(true))
            .collect();
        Ok(Self {
            observer,
            layout,
            projectors,
        })
    }

    /// Computational-basis projectors `|k⟩⟨k|` on one factor.
    pub fn basis(observer: impl Into<String>, label: &str, dim: usize) -> Result<Self> {
        let layout = SubsystemLayout::single(label, dim)?;
        let projectors = (0..dim)
            .map(|k| Operator::basis_outer(layout.clone(), k, k))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Self::new(observer, projectors)
    }

    pub fn observer(&self) -> &str {
        &self.observer
    }

    /// Factors the projectors act on.
    pub fn layout(&self) -> &SubsystemLayout {
        &self.layout
    }

    pub fn projectors(&self) -> &[Operator] {
        &self.projectors
    }

    pub fn len(&self) -> usize {
        self.projectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projectors.is_empty()
    }

    fn labels(&self) -> Vec<String> {
        self.layout.labels().map(str::to_string).collect()
    }
}

/// Nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    /// Clamps round-off negatives (down to −1e-12) to zero and renormalizes;
    /// rejects larger negativity or a sum off by more than 1e-9.
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(DoubletError::EmptyDistribution);
        }
        for (index, &value) in entries.iter().enumerate() {
            if !value.is_finite() || value < -NEGATIVE_PROBABILITY_TOL {
                return Err(DoubletError::NegativeProbability { index, value });
            }
        }
        let sum: f64 = entries.iter().sum();
        if (sum - 1.0).abs() > PROBABILITY_SUM_TOL {
            return Err(DoubletError::ProbabilitySum(sum));
        }
        let clamped: Vec<f64> = entries.iter().map(|p| p.max(0.0)).collect();
        let total: f64 = clamped.iter().sum();
        Ok(Self(clamped.into_iter().map(|p| p / total).collect()))
    }

    /// Normalizes arbitrary nonnegative weights.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().map(|w| w.max(0.0)).sum();
        if !(total > 0.0) {
            return Err(DoubletError::ProbabilitySum(total));
        }
        Self::new(weights.into_iter().map(|w| w / total).collect())
    }

    pub fn entries(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }
}

/// Joint outcome law over several observers, row-major over `shape`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    observers: Vec<String>,
    shape: Vec<usize>,
    probs: Vec<f64>,
}

impl JointDistribution {
    pub fn observers(&self) -> &[String] {
        &self.observers
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn flat(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.probs[flatten(index, &self.shape)]
    }

    /// Rows of a two-observer law.
    pub fn matrix(&self) -> Vec<Vec<f64>> {
        assert_eq!(self.shape.len(), 2, "matrix view needs two observers");
        self.probs.chunks(self.shape[1]).map(<[f64]>::to_vec).collect()
    }

    pub fn marginal(&self, axis: usize) -> ProbabilityVector {
        let mut out = vec![0.0; self.shape[axis]];
        for (flat, p) in self.probs.iter().enumerate() {
            out[unflatten(flat, &self.shape)[axis]] += p;
        }
        ProbabilityVector(out)
    }
}

fn flatten(index: &[usize], shape: &[usize]) -> usize {
    index.iter().zip(shape).fold(0, |acc, (i, d)| acc * d + i)
}

fn unflatten(mut flat: usize, shape: &[usize]) -> Vec<usize> {
    let mut out = vec![0; shape.len()];
    for (slot, d) in out.iter_mut().zip(shape).rev() {
        *slot = flat % d;
        flat /= d;
    }
    out
}

/// One observer's subjective component: an outcome index (or unset) over a
/// projector family.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeRegister {
    projectors: Arc<ProjectorSet>,
    outcome: Option<usize>,
}

impl OutcomeRegister {
    pub fn observer(&self) -> &str {
        self.projectors.observer()
    }

    pub fn outcome(&self) -> Option<usize> {
        self.outcome
    }

    pub fn projector_set(&self) -> &Arc<ProjectorSet> {
        &self.projectors
    }
}

/// Dynamical state plus per-observer outcome registers.
#[derive(Debug, Clone, PartialEq)]
pub struct EventState {
    dynamical: Dynamical,
    registers: BTreeMap<String, OutcomeRegister>,
    stream_id: u64,
}

impl EventState {
    pub fn new(dynamical: impl Into<Dynamical>, stream_id: u64) -> Self {
        Self {
            dynamical: dynamical.into(),
            registers: BTreeMap::new(),
            stream_id,
        }
    }

    /// Attaches a register. Its factors must exist in the dynamical layout
    /// and must not overlap any other register's.
    pub fn with_register(mut self, projectors: Arc<ProjectorSet>, outcome: Option<usize>) -> Result<Self> {
        let layout = self.dynamical.layout();
        for f in projectors.layout().factors() {
            let dim = layout.factor_dim(&f.label)?;
            if dim != f.dim {
                return Err(QuantumError::DimensionMismatch {
                    label: f.label.clone(),
                    expected: dim,
                    found: f.dim,
                }
                .into());
            }
            for other in self.registers.values() {
                if other.projectors.layout().contains(&f.label) {
                    return Err(DoubletError::OverlappingObservers(
                        other.observer().to_string(),
                        projectors.observer().to_string(),
                        f.label.clone(),
                    ));
                }
            }
        }
        if let Some(index) = outcome {
            if index >= projectors.len() {
                return Err(DoubletError::OutcomeOutOfRange {
                    observer: projectors.observer().to_string(),
                    index,
                    len: projectors.len(),
                });
            }
        }
        self.registers.insert(
            projectors.observer().to_string(),
            OutcomeRegister {
                projectors,
                outcome,
            },
        );
        Ok(self)
    }

    pub fn dynamical(&self) -> &Dynamical {
        &self.dynamical
    }

    pub fn registers(&self) -> &BTreeMap<String, OutcomeRegister> {
        &self.registers
    }

    pub fn register(&self, observer: &str) -> Result<&OutcomeRegister> {
        self.registers
            .get(observer)
            .ok_or_else(|| DoubletError::UnknownObserver(observer.to_string()))
    }

    pub fn outcome(&self, observer: &str) -> Option<usize> {
        self.registers.get(observer).and_then(|r| r.outcome)
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }
}

/// Restricted state of an observer: the partial trace onto its register's
/// factors, or onto a single factor when no register carries that name.
pub fn restricted_state(phi: &EventState, observer: &str) -> Result<DensityMatrix> {
    let labels: Vec<String> = match phi.registers.get(observer) {
        Some(reg) => reg.projectors.labels(),
        None => vec![observer.to_string()],
    };
    Ok(quantum::reduce(&phi.dynamical, &labels)?)
}

/// `P_j = Tr(P̂_j R_O)`.
pub fn outcome_distribution(phi: &EventState, pset: &ProjectorSet) -> Result<ProbabilityVector> {
    let joint = joint_distribution(phi, &[pset])?;
    Ok(ProbabilityVector(joint.probs))
}

/// `P_{ij…} = Tr(ρ P̂_i P̂_j …)` over several observers on disjoint factors.
pub fn joint_distribution(phi: &EventState, psets: &[&ProjectorSet]) -> Result<JointDistribution> {
    joint_on_state(&phi.dynamical, psets)
}

fn joint_on_state<Q: QuantumState>(state: &Q, psets: &[&ProjectorSet]) -> Result<JointDistribution> {
    if psets.is_empty() {
        return Err(DoubletError::EmptyDistribution);
    }
    let mut keep: Vec<String> = Vec::new();
    for (a, pa) in psets.iter().enumerate() {
        for pb in &psets[a + 1..] {
            if pa.observer() == pb.observer() {
                return Err(DoubletError::OverlappingObservers(
                    pa.observer().into(),
                    pb.observer().into(),
                    String::new(),
                ));
            }
            if let Some(shared) = pa.layout().labels().find(|l| pb.layout().contains(l)) {
                return Err(DoubletError::OverlappingObservers(
                    pa.observer().into(),
                    pb.observer().into(),
                    shared.into(),
                ));
            }
        }
        keep.extend(pa.labels());
    }
    let reduced = quantum::reduce(state, &keep)?;
    for p in psets {
        // factor dims are checked again by embed, this gives a clearer error
        for f in p.layout().factors() {
            let dim = reduced.layout().factor_dim(&f.label)?;
            if dim != f.dim {
                return Err(DoubletError::InvalidProjectorSet(format!(
                    "{}: factor `{}` has dimension {dim}, projector has {}",
                    p.observer(),
                    f.label,
                    f.dim
                )));
            }
        }
    }

    let shape: Vec<usize> = psets.iter().map(|p| p.len()).collect();
    let total: usize = shape.iter().product();
    let mut probs = Vec::with_capacity(total);
    for flat in 0..total {
        let index = unflatten(flat, &shape);
        let mut product = psets[0].projectors()[index[0]].clone();
        for (p, &k) in psets.iter().zip(&index).skip(1) {
            product = product.kron(&p.projectors()[k])?;
        }
        let lifted = product.embed(reduced.layout())?;
        probs.push(reduced.expectation_unchecked(&lifted).re);
    }
    let checked = ProbabilityVector::new(probs)?;
    Ok(JointDistribution {
        observers: psets.iter().map(|p| p.observer().to_string()).collect(),
        shape,
        probs: checked.0,
    })
}

/// Inverse-CDF draw over ascending indices.
pub fn sample_outcome<R: Rng + ?Sized>(dist: &ProbabilityVector, rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut cumulative = 0.0;
    for (i, p) in dist.0.iter().enumerate() {
        cumulative += p;
        if u < cumulative {
            return i;
        }
    }
    // u landed in the round-off gap above the last partial sum
    dist.0.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Whether `U` couples distinct branches `i ≠ j` of the observer on the
/// support of the current dynamical state, i.e. whether any
/// `P̂_i U P̂_j` acting on that state has an entry above 1e-10.
pub fn branches_intersect(u: &Operator, pset: &ProjectorSet, phi: &EventState) -> Result<bool> {
    branches_intersect_on(u, pset, &phi.dynamical)
}

fn branches_intersect_on(u: &Operator, pset: &ProjectorSet, state: &Dynamical) -> Result<bool> {
    let layout = state.layout();
    if u.layout() != layout {
        return Err(QuantumError::LayoutMismatch {
            left: u.layout().to_string(),
            right: layout.to_string(),
        }
        .into());
    }
    let lifted: Vec<Operator> = pset
        .projectors()
        .iter()
        .map(|p| p.embed(layout))
        .collect::<std::result::Result<_, _>>()?;
    for (j, pj) in lifted.iter().enumerate() {
        match state {
            Dynamical::Pure(psi) => {
                let moved = quantum::apply_operator(u, &quantum::apply_operator(pj, psi)?)?;
                for (i, pi) in lifted.iter().enumerate() {
                    if i == j {
                        continue;
                    }
                    let out = quantum::apply_operator(pi, &moved)?;
                    if out.amplitudes().iter().any(|a| a.norm() > BRANCH_COUPLING_TOL) {
                        return Ok(true);
                    }
                }
            }
            Dynamical::Mixed(rho) => {
                let rho_op = Operator::new(layout.clone(), rho.data().to_vec())?;
                let moved = u.matmul(&pj.matmul(&rho_op)?)?;
                for (i, pi) in lifted.iter().enumerate() {
                    if i != j && pi.matmul(&moved)?.max_abs() > BRANCH_COUPLING_TOL {
                        return Ok(true);
                    }
                }
            }
        }
    }
    Ok(false)
}

/// Everything about one unitary step that does not depend on the register
/// values: the evolved dynamical state, which registers get redrawn, and the
/// joint law used for the draw.
///
/// Events sharing a dynamical trajectory share one plan; each event then only
/// pays for its own register draw.
#[derive(Debug, Clone)]
pub struct StepPlan {
    after: Dynamical,
    resampled: Vec<String>,
    participants: Vec<String>,
    joint: Option<JointDistribution>,
}

impl StepPlan {
    pub fn prepare(phi: &EventState, u: &Operator) -> Result<Self> {
        let after = phi.dynamical.evolve(u)?;
        let mut resampled = Vec::new();
        for (name, reg) in &phi.registers {
            if branches_intersect_on(u, &reg.projectors, &phi.dynamical)? {
                resampled.push(name.clone());
            }
        }
        let participants: Vec<String> = phi
            .registers
            .iter()
            .filter(|(name, reg)| reg.outcome.is_some() || resampled.contains(name))
            .map(|(name, _)| name.clone())
            .collect();
        let joint = if resampled.is_empty() {
            None
        } else {
            let psets: Vec<&ProjectorSet> = participants
                .iter()
                .map(|n| phi.registers[n].projectors.as_ref())
                .collect();
            Some(joint_on_state(&after, &psets)?)
        };
        Ok(Self {
            after,
            resampled,
            participants,
            joint,
        })
    }

    pub fn after(&self) -> &Dynamical {
        &self.after
    }

    /// Registers whose branches the step couples.
    pub fn resampled(&self) -> &[String] {
        &self.resampled
    }

    /// Redraws the coupled registers, conditioned on the outcomes held by
    /// the other participating registers. The redrawn registers' previous
    /// values play no role.
    pub fn apply_registers<R: Rng + ?Sized>(
        &self,
        registers: &mut BTreeMap<String, OutcomeRegister>,
        rng: &mut R,
    ) -> Result<()> {
        let pattern: Vec<&String> = registers
            .iter()
            .filter(|(name, reg)| reg.outcome.is_some() || self.resampled.contains(name))
            .map(|(name, _)| name)
            .collect();
        if pattern.len() != self.participants.len()
            || pattern.iter().zip(&self.participants).any(|(a, b)| *a != b)
        {
            return Err(DoubletError::PlanMismatch);
        }
        let Some(joint) = &self.joint else {
            return Ok(());
        };

        let free_axes: Vec<usize> = self
            .participants
            .iter()
            .enumerate()
            .filter(|(_, n)| self.resampled.contains(n))
            .map(|(k, _)| k)
            .collect();
        let fixed: Vec<(usize, usize)> = self
            .participants
            .iter()
            .enumerate()
            .filter(|(_, n)| !self.resampled.contains(n))
            .map(|(k, n)| (k, registers[n].outcome.expect("participant is set")))
            .collect();
        let free_shape: Vec<usize> = free_axes.iter().map(|&k| joint.shape[k]).collect();

        let accumulate = |conditioned: bool| {
            let mut w = vec![0.0; free_shape.iter().product()];
            for (flat, p) in joint.probs.iter().enumerate() {
                let idx = unflatten(flat, &joint.shape);
                if conditioned && fixed.iter().any(|&(k, v)| idx[k] != v) {
                    continue;
                }
                let sub: Vec<usize> = free_axes.iter().map(|&k| idx[k]).collect();
                w[flatten(&sub, &free_shape)] += p;
            }
            w
        };
        let mut weights = accumulate(true);
        if weights.iter().sum::<f64>() <= NEGATIVE_PROBABILITY_TOL {
            // held outcomes are incompatible with the new state: fall back to
            // the unconditioned marginal
            weights = accumulate(false);
        }
        let dist = ProbabilityVector::from_weights(weights)?;
        let drawn = unflatten(sample_outcome(&dist, rng), &free_shape);
        for (&axis, value) in free_axes.iter().zip(drawn) {
            let name = &self.participants[axis];
            registers.get_mut(name).expect("participant exists").outcome = Some(value);
        }
        Ok(())
    }
}

/// One unitary step of an event-state: the dynamical component is evolved
/// and every register whose branches the step couples is redrawn; all other
/// registers (including unset ones) are kept.
pub fn step_event_state<R: Rng + ?Sized>(phi: &EventState, u: &Operator, rng: &mut R) -> Result<EventState> {
    let plan = StepPlan::prepare(phi, u)?;
    let mut registers = phi.registers.clone();
    plan.apply_registers(&mut registers, rng)?;
    Ok(EventState {
        dynamical: plan.after,
        registers,
        stream_id: phi.stream_id,
    })
}

/// `|O_j⟩⟨O_j| ⊗ |s_j⟩⟨s_j|` for the observer's current outcome `j`.
pub fn subjective_ms_component(phi: &EventState, observer: &str, s_label: &str) -> Result<Operator> {
    let reg = phi.register(observer)?;
    let j = reg
        .outcome
        .ok_or_else(|| DoubletError::RegisterUnset(observer.to_string()))?;
    let s_dim = phi.dynamical.layout().factor_dim(s_label)?;
    if j >= s_dim {
        return Err(DoubletError::OutcomeOutOfRange {
            observer: s_label.to_string(),
            index: j,
            len: s_dim,
        });
    }
    let s_proj = Operator::basis_outer(SubsystemLayout::single(s_label, s_dim)?, j, j)?;
    Ok(reg.projectors.projectors()[j]
        .kron(&s_proj)?
        .with_hermitian_hint(true))
}

/// `I_Q = −ln σ_Q²` for outcome values `values` drawn with `dist`; returns
/// `f64::INFINITY` when the dispersion vanishes.
pub fn selected_information(dist: &ProbabilityVector, values: &[f64]) -> Result<f64> {
    if dist.len() != values.len() {
        return Err(DoubletError::LengthMismatch {
            left: dist.len(),
            right: values.len(),
        });
    }
    let mean: f64 = dist.0.iter().zip(values).map(|(p, q)| p * q).sum();
    let second: f64 = dist.0.iter().zip(values).map(|(p, q)| p * q * q).sum();
    let variance = second - mean * mean;
    if variance < MIN_DISPERSION {
        return Ok(f64::INFINITY);
    }
    Ok(-variance.ln())
}

/// `Σ_j P̂_j ρ P̂_j` restricted to the given projector family, used to build
/// dephased (mixed) counterparts of pure states.
pub fn dephase(rho: &DensityMatrix, pset: &ProjectorSet) -> Result<DensityMatrix> {
    let layout = rho.layout();
    let rho_op = Operator::new(layout.clone(), rho.data().to_vec())?;
    let mut acc = vec![Complex64::new(0.0, 0.0); rho.data().len()];
    for p in pset.projectors() {
        let lifted = p.embed(layout)?;
        let term = lifted.matmul(&rho_op)?.matmul(&lifted)?;
        for (a, t) in acc.iter_mut().zip(term.data()) {
            *a += t;
        }
    }
    Ok(DensityMatrix::new(layout.clone(), acc)?)
}
