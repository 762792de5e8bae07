// SPDX-License-Identifier: Apache-2.0

//! Tracking an unknown time-varying input acting on a continuously observed
//! linear Gaussian system.
//!
//! The pipeline: build a continuous model ([`model`]), discretize it under
//! zero-order hold ([`discretize`]), estimate the state with the unbiased
//! minimum-variance filter ([`umvfilter`]), reconstruct the input from
//! consecutive estimates ([`inputestim`]), and validate the theoretical
//! accuracy against seeded Monte Carlo ensembles ([`simkit`],
//! [`experiment`]). [`scenario`] binds everything to a single TOML
//! configuration file.
//!
//! The bundled benchmark is an optomechanical force sensor: a mirror modeled
//! as an undamped harmonic oscillator under continuous position measurement,
//! with an unknown time-varying force as the input to recover.

pub mod discretize;
pub mod error;
pub mod experiment;
pub mod inputestim;
pub mod matkernel;
pub mod model;
pub mod scenario;
pub mod simkit;
pub mod umvfilter;

pub use discretize::DiscreteModel;
pub use error::{Error, Result};
pub use experiment::{FilterInit, InitMode, MonteCarloOptions, MonteCarloReport, RunResult};
pub use inputestim::ForceEstimate;
pub use model::{ContinuousModel, OptoParams};
pub use scenario::Scenario;
pub use simkit::{ForceSignal, Trajectory};
pub use umvfilter::{FilterState, StepGains};
