//! Reputation and visibility: when does a career-minded expert take risks?
//!
//! An expert of unknown competence chooses between a risky and a safe
//! project. Outcomes survive on the public record with a probability that
//! depends on the outcome and on reputation, and the market updates its
//! belief from whatever survives. This crate provides
//!
//! * [`posterior`]: closed-form two-type odds updating,
//! * [`model`]: arms, visibility kernels, value functions and the value gap,
//! * [`sign_test`]: local comparative statics of the risky cutoff,
//! * [`lab`]: numerical checks of the model's identities and bounds,
//! * [`sim`]: a Monte Carlo career simulator with staggered reforms,
//! * [`econometrics`]: fixed-effects event studies, DiD and 2SLS.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod econometrics;
pub mod error;
pub mod lab;
pub mod model;
pub mod posterior;
pub mod settings;
pub mod sim;

pub use error::{Error, Result};
pub use model::{
    apply_reform, Arm, ArmKind, CutoffDecision, KernelKnot, KernelValue, OutcomeTech, Policy, ReformShift, Scenario,
    ShiftProfile, SignalTech, ValueFunction, VisibilityKernel,
};
pub use posterior::{Belief, LikelihoodPair, PosteriorSplit};
pub use settings::NumericSettings;
pub use sign_test::SignTestReport;
