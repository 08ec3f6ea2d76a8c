//! Numerical toolkit for φ-contractions on partial metric spaces.
//!
//! The crate is organised bottom-up:
//!
//! * [`expr`] parses and evaluates the small arithmetic language used for
//!   distances `p(x, y)`, self-maps `T(x)` and control functions `φ(t)`.
//! * [`space`] holds carriers, sample sets, partial metric spaces and the
//!   report types shared by every check.
//! * [`verify`] checks the partial-metric axioms, the induced metric and
//!   Cauchy-type orbit diagnostics on finite evidence.
//! * [`comparison`] validates control functions: monotonicity of `φ` and
//!   `f(t) = t - φ(t)`, a numeric `f⁻¹`, iterates `φⁿ`.
//! * [`contraction`] scans the contraction-type inequalities and searches for
//!   counterexamples.
//! * [`solver`] runs Picard iteration and attaches the fixed-point certificate.
//!
//! All arithmetic is `f64`; comparisons go through [`Tolerances`].

pub mod comparison;
pub mod contraction;
pub mod expr;
pub mod solver;
pub mod space;
pub mod verify;

mod error;

pub use comparison::{
    crosscheck_implications, ComparisonFunction, HypothesisReport, Implication, PhiFamily,
    PropertyFlags,
};
pub use contraction::{
    check_contraction, falsify, linear_control_equivalence, ConditionKind, FalsifyOutcome,
    FalsifyStatus, LinearEquivalence,
};
pub use error::{Error, Result};
pub use expr::{EvalError, Expression, ParseError, PiecewiseMap};
pub use solver::{
    compute_mx, picard_orbit, solve_fixed_point, verify_orbit_bound, FixedPointResult, OrbitStep,
    OrbitTrace, Solution, SolveOptions, Termination,
};
pub use space::{
    CarrierSpec, CheckReport, Completeness, Distance, PartialMetricSpace, Provenance, RhoEstimate,
    SampleOptions, SampleSet, Tolerances, Witness,
};
pub use verify::{check_axioms, check_induced_metric, orbit_diagnostics, OrbitDiagnostics};

/// Default comparison tolerance for inequalities.
pub const EPS_NUM: f64 = 1e-9;
/// Two reals closer than this are the same point.
pub const DELTA_PT: f64 = 1e-12;
/// Maximum number of witnesses kept in a [`CheckReport`].
pub const K_MAX: usize = 10;
