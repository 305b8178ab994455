//! Executable measurement scenarios and their ensemble statistics.
//!
//! Every scenario is a fixed sequence of unitaries applied to one template
//! event-state. The dynamical trajectory is identical for all events, so it
//! is planned once; each event then only draws its registers from its own
//! ChaCha stream (`stream id = event index`), which keeps runs reproducible
//! under any thread count.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::doublet::{self, DoubletError, EventState, ProbabilityVector, ProjectorSet, StepPlan};
use crate::models::{self, MeasurementModel, ModelError, SECOND_OBSERVER, SYSTEM};
use crate::quantum::{self, Dynamical, Operator, QuantumError, StateVector, SubsystemLayout};

pub const DEFAULT_SIGMA: f64 = 4.0;
/// Outcome index holding the observer's initial information (`|O₀⟩`).
pub const INITIAL_INFORMATION: usize = 0;
pub const FIDELITY_TOL: f64 = 1e-10;
pub const MIXED_B_TOL: f64 = 1e-12;
pub const PURE_B_TOL: f64 = 1e-10;
/// Off-diagonal mass allowed in a coincidence joint law.
pub const OFF_DIAGONAL_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Doublet(#[from] DoubletError),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
    #[error("counts sum to {found}, expected {expected}")]
    CountSum { expected: u64, found: u64 },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

pub type Result<T> = std::result::Result<T, ScenarioError>;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum CorrelationError {
    #[error("need at least two pairs")]
    TooFewPairs,
    #[error("correlation not applicable: constant marginal")]
    ConstantMarginal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioId {
    Ensemble,
    Undoing,
    Sequential,
    Discrimination,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub scenario: ScenarioId,
    pub model: MeasurementModel,
    pub n_events: u64,
    pub seed: u64,
    pub sigma_bound: f64,
}

impl ScenarioConfig {
    pub fn new(scenario: ScenarioId, model: MeasurementModel, n_events: u64, seed: u64) -> Result<Self> {
        let cfg = Self {
            scenario,
            model,
            n_events,
            seed,
            sigma_bound: DEFAULT_SIGMA,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_sigma(mut self, sigma: f64) -> Result<Self> {
        self.sigma_bound = sigma;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_events == 0 {
            return Err(ScenarioError::InvalidConfig("n-events must be at least 1".into()));
        }
        if !(self.sigma_bound.is_finite() && self.sigma_bound > 0.0) {
            return Err(ScenarioError::InvalidConfig(format!(
                "sigma bound must be positive, got {}",
                self.sigma_bound
            )));
        }
        self.model.check_dense()?;
        Ok(())
    }
}

/// Per-event log of register draws.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EventRecord {
    pub event: u64,
    pub stream: u64,
    /// `(step, outcome)` for every draw, steps counted from 1.
    pub outcomes: BTreeMap<String, Vec<(usize, usize)>>,
    pub final_registers: BTreeMap<String, Option<usize>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SummaryStats {
    /// Empirical outcome frequencies keyed by observer (`/mixed` suffix for
    /// the mixed-input ensemble).
    pub frequencies: BTreeMap<String, ProbabilityVector>,
    /// Born weights the frequencies are tested against.
    pub expected: BTreeMap<String, ProbabilityVector>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correlation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coincidence_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fidelity_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reset_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expectation_b_pure: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expectation_b_mixed: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub joint_frequencies: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub joint_expected: Option<Vec<Vec<f64>>>,
    pub pass_flags: BTreeMap<String, bool>,
    pub not_applicable: Vec<String>,
}

impl SummaryStats {
    pub fn all_passed(&self) -> bool {
        self.pass_flags.values().all(|&ok| ok)
    }

    fn flag(&mut self, name: &str, ok: bool) {
        self.pass_flags.insert(name.to_string(), ok);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutput {
    pub records: Vec<EventRecord>,
    pub summary: SummaryStats,
}

pub fn run(config: &ScenarioConfig) -> Result<ScenarioOutput> {
    config.validate()?;
    match config.scenario {
        ScenarioId::Ensemble => run_ensemble(config),
        ScenarioId::Undoing => run_undoing(config),
        ScenarioId::Sequential => run_sequential(config),
        ScenarioId::Discrimination => Ok(ScenarioOutput {
            records: Vec::new(),
            summary: run_discrimination(config)?,
        }),
    }
}

/// Per-event RNG: the seeded generator moved to stream `stream`.
pub fn event_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

type Snapshot = BTreeMap<String, Option<usize>>;

/// A planned unitary protocol over a template event-state.
struct Protocol {
    template: EventState,
    plans: Vec<StepPlan>,
}

impl Protocol {
    fn plan(template: EventState, steps: &[Operator]) -> Result<Self> {
        let mut plans = Vec::with_capacity(steps.len());
        let mut current = template.clone();
        // register values are irrelevant for planning; any stream will do
        let mut rng = event_rng(0, u64::MAX);
        for u in steps {
            let plan = StepPlan::prepare(&current, u)?;
            current = doublet::step_event_state(&current, u, &mut rng)?;
            plans.push(plan);
        }
        Ok(Self { template, plans })
    }

    fn after(&self, step: usize) -> &Dynamical {
        self.plans[step - 1].after()
    }

    /// Runs one event; returns its record and the register snapshot after
    /// every step.
    fn run_event(&self, seed: u64, event: u64) -> Result<(EventRecord, Vec<Snapshot>)> {
        let mut rng = event_rng(seed, event);
        let mut registers = self.template.registers().clone();
        let mut outcomes: BTreeMap<String, Vec<(usize, usize)>> =
            registers.keys().map(|k| (k.clone(), Vec::new())).collect();
        let mut snapshots = Vec::with_capacity(self.plans.len());
        for (k, plan) in self.plans.iter().enumerate() {
            plan.apply_registers(&mut registers, &mut rng)?;
            for name in plan.resampled() {
                let value = registers[name].outcome().expect("redrawn register is set");
                outcomes.get_mut(name).expect("known register").push((k + 1, value));
            }
            snapshots.push(registers.iter().map(|(k, r)| (k.clone(), r.outcome())).collect());
        }
        let final_registers = registers.iter().map(|(k, r)| (k.clone(), r.outcome())).collect();
        Ok((
            EventRecord {
                event,
                stream: event,
                outcomes,
                final_registers,
            },
            snapshots,
        ))
    }

    fn run_events(&self, seed: u64, events: std::ops::Range<u64>) -> Result<Vec<(EventRecord, Vec<Snapshot>)>> {
        events
            .into_par_iter()
            .map(|e| self.run_event(seed, e))
            .collect()
    }
}

fn born_weights(model: &MeasurementModel, len: usize) -> Result<ProbabilityVector> {
    let (a1, a2) = model.amplitudes();
    let mut w = vec![0.0; len];
    w[0] = a1.norm_sqr();
    w[1] = a2.norm_sqr();
    Ok(ProbabilityVector::new(w)?)
}

fn count_final(records: &[(EventRecord, Vec<Snapshot>)], observer: &str, len: usize) -> Vec<u64> {
    let mut counts = vec![0u64; len];
    for (rec, _) in records {
        if let Some(Some(k)) = rec.final_registers.get(observer) {
            counts[*k] += 1;
        }
    }
    counts
}

fn frequencies(counts: &[u64]) -> Result<ProbabilityVector> {
    let n: u64 = counts.iter().sum();
    Ok(ProbabilityVector::new(
        counts.iter().map(|&c| c as f64 / n as f64).collect(),
    )?)
}

fn pure_template(model: &MeasurementModel, pset: &Arc<ProjectorSet>) -> Result<EventState> {
    Ok(EventState::new(model.initial()?, 0).with_register(pset.clone(), Some(INITIAL_INFORMATION))?)
}

/// Ensemble of single measurements on the pure input and on its mixed
/// counterpart. Pure events use streams `0..n`, mixed events `n..2n`.
pub fn run_ensemble(config: &ScenarioConfig) -> Result<ScenarioOutput> {
    config.validate()?;
    let model = &config.model;
    let n = config.n_events;
    let observer = model.observer();
    let pset = model.observer_projectors()?;
    let u = model.measurement_unitary()?;

    let pure = Protocol::plan(pure_template(model, &pset)?, std::slice::from_ref(&u))?;
    let mixed_template = EventState::new(model.mixed_initial()?, 0)
        .with_register(pset.clone(), Some(INITIAL_INFORMATION))?;
    let mixed = Protocol::plan(mixed_template, std::slice::from_ref(&u))?;

    let pure_runs = pure.run_events(config.seed, 0..n)?;
    let mixed_runs = mixed.run_events(config.seed, n..2 * n)?;

    let born = born_weights(model, pset.len())?;
    let pure_counts = count_final(&pure_runs, observer, pset.len());
    let mixed_counts = count_final(&mixed_runs, observer, pset.len());

    let mut summary = SummaryStats::default();
    let dist_pure = doublet::outcome_distribution(&EventState::new(pure.after(1).clone(), 0), &pset)?;
    let dist_mixed = doublet::outcome_distribution(&EventState::new(mixed.after(1).clone(), 0), &pset)?;
    let max_dev = |d: &ProbabilityVector| {
        d.entries()
            .iter()
            .zip(born.entries())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    };
    summary.flag(
        "distribution_matches_born",
        max_dev(&dist_pure) < 1e-12 && max_dev(&dist_mixed) < 1e-12,
    );
    summary.flag(
        "born_frequencies_pure",
        frequency_test(&pure_counts, &born, n, config.sigma_bound)?,
    );
    summary.flag(
        "born_frequencies_mixed",
        frequency_test(&mixed_counts, &born, n, config.sigma_bound)?,
    );
    summary.flag(
        "pure_mixed_indistinguishable",
        two_sample_frequency_test(&pure_counts, &mixed_counts, n, config.sigma_bound)?,
    );
    summary.frequencies.insert(observer.to_string(), frequencies(&pure_counts)?);
    summary
        .frequencies
        .insert(format!("{observer}/mixed"), frequencies(&mixed_counts)?);
    summary.expected.insert(observer.to_string(), born);

    let records = pure_runs
        .into_iter()
        .chain(mixed_runs)
        .map(|(r, _)| r)
        .collect();
    Ok(ScenarioOutput { records, summary })
}

/// Measure, reverse the measurement, measure again.
pub fn run_undoing(config: &ScenarioConfig) -> Result<ScenarioOutput> {
    config.validate()?;
    let model = &config.model;
    let observer = model.observer();
    let pset = model.observer_projectors()?;
    let u = model.measurement_unitary()?;
    let undo = u.adjoint();
    let initial = model.initial()?;

    let protocol = Protocol::plan(pure_template(model, &pset)?, &[u.clone(), undo, u])?;
    let runs = protocol.run_events(config.seed, 0..config.n_events)?;

    let mut summary = SummaryStats::default();
    let fidelity = match protocol.after(2) {
        Dynamical::Pure(psi) => initial.fidelity(psi)?,
        Dynamical::Mixed(_) => unreachable!("undoing runs on pure states"),
    };
    summary.fidelity_min = Some(fidelity);
    summary.flag("undo_fidelity", (fidelity - 1.0).abs() <= FIDELITY_TOL);

    let mut pairs = Vec::with_capacity(runs.len());
    let mut resets = 0u64;
    for (_, snaps) in &runs {
        let at = |step: usize| snaps[step - 1][observer];
        if at(2) == Some(INITIAL_INFORMATION) {
            resets += 1;
        }
        if let (Some(j1), Some(j2)) = (at(1), at(3)) {
            pairs.push((j1, j2));
        }
    }
    let reset_rate = resets as f64 / runs.len() as f64;
    summary.reset_rate = Some(reset_rate);
    summary.flag("register_reset", resets == runs.len() as u64);

    match correlation_coefficient(&pairs) {
        Ok(r) => {
            summary.correlation = Some(r);
            let bound = config.sigma_bound / (pairs.len() as f64).sqrt();
            summary.flag("decorrelation", r.abs() < bound);
        }
        Err(_) => summary.not_applicable.push("decorrelation".into()),
    }

    let born = born_weights(model, pset.len())?;
    let counts = count_final(&runs, observer, pset.len());
    summary.frequencies.insert(observer.to_string(), frequencies(&counts)?);
    summary.expected.insert(observer.to_string(), born);

    Ok(ScenarioOutput {
        records: runs.into_iter().map(|(r, _)| r).collect(),
        summary,
    })
}

/// Model layout extended by a second observer `O'` that copies `S`.
pub fn sequential_setup(model: &MeasurementModel) -> Result<(SubsystemLayout, StateVector, Operator, Operator)> {
    let second = SubsystemLayout::single(SECOND_OBSERVER, 2)?;
    let layout = model.layout()?.concat(&second)?;
    let initial = quantum::tensor_product_state(
        &model.initial()?,
        &StateVector::basis(second, 0)?,
    )?;
    let first_step = model.measurement_unitary()?.embed(&layout)?;
    let second_step = models::copy_gate(SYSTEM, SECOND_OBSERVER)?.embed(&layout)?;
    Ok((layout, initial, first_step, second_step))
}

/// `O` measures at step 1, `O'` measures the same system at step 2.
pub fn run_sequential(config: &ScenarioConfig) -> Result<ScenarioOutput> {
    config.validate()?;
    let model = &config.model;
    let n = config.n_events;
    let observer = model.observer();
    let pset = model.observer_projectors()?;
    let second = Arc::new(ProjectorSet::basis(SECOND_OBSERVER, SECOND_OBSERVER, 2)?);
    let (_, initial, first_step, second_step) = sequential_setup(model)?;

    let template = EventState::new(initial, 0)
        .with_register(pset.clone(), Some(INITIAL_INFORMATION))?
        .with_register(second.clone(), None)?;
    let protocol = Protocol::plan(template, &[first_step, second_step])?;
    let runs = protocol.run_events(config.seed, 0..n)?;

    let final_state = EventState::new(protocol.after(2).clone(), 0);
    let joint = doublet::joint_distribution(&final_state, &[pset.as_ref(), second.as_ref()])?;
    let (rows, cols) = (pset.len(), second.len());

    let mut summary = SummaryStats::default();
    let mut coincident = 0u64;
    let mut unset_between = 0u64;
    let mut joint_counts = vec![0u64; rows * cols];
    for (rec, snaps) in &runs {
        let o = rec.final_registers[observer];
        let o2 = rec.final_registers[SECOND_OBSERVER];
        if let (Some(a), Some(b)) = (o, o2) {
            if a == b {
                coincident += 1;
            }
            joint_counts[a * cols + b] += 1;
        }
        if snaps[0][SECOND_OBSERVER].is_none() {
            unset_between += 1;
        }
    }
    let rate = coincident as f64 / n as f64;
    summary.coincidence_rate = Some(rate);
    summary.flag("coincidence", coincident == n);
    summary.flag("second_observer_unset_before_interaction", unset_between == n);

    let off_diagonal: f64 = (0..rows)
        .flat_map(|a| (0..cols).map(move |b| (a, b)))
        .filter(|(a, b)| a != b)
        .map(|(a, b)| joint.get(&[a, b]))
        .sum();
    summary.flag("joint_law_diagonal", off_diagonal < OFF_DIAGONAL_TOL);

    let expected = ProbabilityVector::new(joint.flat().to_vec())?;
    summary.flag(
        "joint_frequencies",
        frequency_test(&joint_counts, &expected, n, config.sigma_bound)?,
    );
    summary.joint_expected = Some(joint.matrix());
    summary.joint_frequencies = Some(
        joint_counts
            .chunks(cols)
            .map(|row| row.iter().map(|&c| c as f64 / n as f64).collect())
            .collect(),
    );

    let born = born_weights(model, pset.len())?;
    summary
        .frequencies
        .insert(observer.to_string(), frequencies(&count_final(&runs, observer, rows))?);
    summary.frequencies.insert(
        SECOND_OBSERVER.to_string(),
        frequencies(&count_final(&runs, SECOND_OBSERVER, cols))?,
    );
    summary.expected.insert(observer.to_string(), born);

    Ok(ScenarioOutput {
        records: runs.into_iter().map(|(r, _)| r).collect(),
        summary,
    })
}

/// `⟨B⟩` on the pure final state and on its mixed counterpart.
pub fn run_discrimination(config: &ScenarioConfig) -> Result<SummaryStats> {
    config.validate()?;
    let model = &config.model;
    let b = model.interference_operator()?;
    let pure_final = quantum::apply_unitary(&model.measurement_unitary()?, &model.initial()?)?;
    let mixed_final = model.mixed_final()?;
    let b_pure = quantum::expectation(&b, &pure_final)?.re;
    let b_mixed = quantum::expectation(&b, &mixed_final)?.re;
    let magnitude = model.interference_magnitude();

    let mut summary = SummaryStats::default();
    summary.expectation_b_pure = Some(b_pure);
    summary.expectation_b_mixed = Some(b_mixed);
    summary.flag("mixed_b_vanishes", b_mixed.abs() < MIXED_B_TOL);
    summary.flag("pure_b_magnitude", (b_pure.abs() - magnitude).abs() <= PURE_B_TOL);
    if magnitude < PURE_B_TOL {
        summary.not_applicable.push("excluded_configuration".into());
    }
    Ok(summary)
}

/// Pearson correlation of integer pairs.
pub fn correlation_coefficient(pairs: &[(usize, usize)]) -> std::result::Result<f64, CorrelationError> {
    if pairs.len() < 2 {
        return Err(CorrelationError::TooFewPairs);
    }
    let n = pairs.len() as f64;
    let (mx, my) = pairs
        .iter()
        .fold((0.0, 0.0), |(sx, sy), &(x, y)| (sx + x as f64, sy + y as f64));
    let (mx, my) = (mx / n, my / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        let (dx, dy) = (x as f64 - mx, y as f64 - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(CorrelationError::ConstantMarginal);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// True iff every `|counts_i/n − p_i| ≤ σ·√(p_i(1−p_i)/n)`.
pub fn frequency_test(counts: &[u64], expected: &ProbabilityVector, n: u64, sigma: f64) -> Result<bool> {
    if counts.len() != expected.len() {
        return Err(ScenarioError::LengthMismatch(counts.len(), expected.len()));
    }
    let total: u64 = counts.iter().sum();
    if total != n {
        return Err(ScenarioError::CountSum {
            expected: n,
            found: total,
        });
    }
    let nf = n as f64;
    Ok(counts.iter().zip(expected.entries()).all(|(&c, &p)| {
        let bound = sigma * (p * (1.0 - p) / nf).sqrt();
        (c as f64 / nf - p).abs() <= bound
    }))
}

/// Two independent samples of size `n` drawn from one law: every
/// `|f_a − f_b| ≤ σ·√(2p̂(1−p̂)/n)` with `p̂` the pooled frequency.
pub fn two_sample_frequency_test(a: &[u64], b: &[u64], n: u64, sigma: f64) -> Result<bool> {
    if a.len() != b.len() {
        return Err(ScenarioError::LengthMismatch(a.len(), b.len()));
    }
    for counts in [a, b] {
        let total: u64 = counts.iter().sum();
        if total != n {
            return Err(ScenarioError::CountSum {
                expected: n,
                found: total,
            });
        }
    }
    let nf = n as f64;
    Ok(a.iter().zip(b).all(|(&x, &y)| {
        let pooled = (x + y) as f64 / (2.0 * nf);
        let bound = sigma * (2.0 * pooled * (1.0 - pooled) / nf).sqrt();
        ((x as f64 - y as f64) / nf).abs() <= bound
    }))
}
