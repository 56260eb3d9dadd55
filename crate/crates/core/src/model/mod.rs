//! The decision model: arms, visibility kernels, value functions and the
//! value gap between the risky and safe actions.

mod kernel;
mod scenario;
mod tech;
mod value;

pub use kernel::{apply_reform, KernelKnot, KernelValue, ReformShift, ShiftProfile, VisibilityKernel};
pub use scenario::{ArmKind, CutoffDecision, Policy, Scenario};
pub use tech::{Arm, OutcomeTech, SignalTech};
pub use value::ValueFunction;
