//! Estimation of three-dimensional rotations from projective measurements on
//! spin-1/2 systems.
//!
//! The crate simulates two measurement schemes for sensing small Euler-angle
//! rotations (roll, pitch, heading) and the Bayesian machinery that turns the
//! measurement records into estimates:
//!
//! * **Bell pairs** — maximally entangled two-qubit states are prepared in the
//!   z-basis, rotated, and read out with Bell measurements along tilted axes
//!   chosen so that the three reachable outcomes are equally likely. A particle
//!   filter over the three rotation components digests the outcome stream
//!   ([`estimator`]).
//! * **Single qubits** — the classical baseline: spin eigenstates are prepared
//!   and measured in a cycling prepare/measure pattern, and each rotation
//!   component is recovered from an arcsine inversion of the outcome counts.
//!
//! [`linalg`] provides the exact 2x2/4x4 complex matrix algebra, [`bell`] the
//! outcome-probability maps over measurement directions, and [`experiment`]
//! seeded Monte Carlo campaigns that compare the two schemes at equal resource
//! budgets, including their degradation when the prepared states are mixed.

pub mod bell;
pub mod estimator;
pub mod experiment;
pub mod linalg;
pub mod optim;

pub use bell::{MeasurementAxis, OutcomeDistribution};
pub use linalg::{AxisAngle, BellKind, ComplexMatrix, DensityMatrix, RotationVector, StateVector};

/// Format a float with 9 significant digits, the fixed precision of every
/// CSV this crate writes; the stable text form is what makes reruns
/// byte-comparable.
pub fn fmt_sig9(x: f64) -> String {
    format!("{x:.8e}")
}

/// Book chapters double as doctests so the prose can never drift from the API.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/bell-states.md")]
    mod bell_states {}
    #[doc = include_str!("../../../book/src/measurement-spheres.md")]
    mod measurement_spheres {}
    #[doc = include_str!("../../../book/src/particle-filter.md")]
    mod particle_filter {}
    #[doc = include_str!("../../../book/src/single-qubit.md")]
    mod single_qubit {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/mixed-states.md")]
    mod mixed_states {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/formats.md")]
    mod formats {}
}
