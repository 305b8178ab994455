//! Event-state quantum measurement simulator.
//!
//! A measuring system's dynamical state evolves by unitaries only, while each
//! observer carries an outcome register that is drawn with Born weights
//! whenever a step couples that observer's branches.
//!
//! * [`quantum`]: labeled tensor-product linear algebra.
//! * [`doublet`]: event-states, outcome registers and their update rule.
//! * [`models`]: Von Neumann and Coleman-Hepp measurement chains.
//! * [`scenarios`]: ensemble, undoing, sequential and discrimination runs.
//! * [`cli`]: the `relmeas` command line.

pub mod cli;
pub mod doublet;
pub mod models;
pub mod quantum;
pub mod scenarios;
