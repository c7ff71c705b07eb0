//! Critical detection efficiency for bipartite Bell tests on noisy two-qubit
//! states.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only the numerical
//! pieces:
//!
//! * [`qstate`]: partially entangled states `C|HV> + S|VH>` with colored,
//!   white or mixed noise, rank-1 qubit projectors and outcome probabilities.
//! * [`inequality`]: CH-form Bell functionals (CHSH, I3322, A5 and
//!   user-defined ones read from a small text format).
//! * [`detection`]: the inequality value as a polynomial in the detector
//!   efficiency and the critical efficiency below which it cannot be violated.
//! * [`optimize`]: seeded multistart quasi-Newton search for the lowest
//!   critical efficiency over measurement settings and, optionally, the state.
//!
//! Sines, cosines and arctangents come from `libm`, never from the platform
//! math library, so a seed gives bit-identical results on every target.
//!
//! IO, sweeps, CSV output and the command line live in the `etacrit` crate.
#![no_std]

extern crate alloc;

pub mod detection;
mod error;
pub mod inequality;
pub mod linalg;
pub mod optimize;
pub mod qstate;

pub use detection::{eta_crit, eta_crit_bisect, value_at_eta, CriticalEfficiency, DetectorModel};
pub use error::{Error, Result};
pub use inequality::{
    evaluate, BellFunctional, Builtin, Coefficient, EfficiencyDecomposition, SettingsAssignment,
};
pub use optimize::{
    local_minimize, multistart, objective, LocalMinimum, Objective, ObjectiveKind,
    OptimizationOutcome, ParameterVector, SearchConfig, StartResult, ThetaMode,
};
pub use qstate::{
    joint_prob, make_noisy, make_pure, marginal_prob, projector, MeasurementSetting, NoiseKind,
    NoiseSpec, PureStateParam, Side, TwoQubitState,
};
