//! Correlation toolkit for the ideal two-spin singlet experiment.
//!
//! The crate provides, end to end, the probability machinery needed to probe
//! locality conditions on two-outcome bipartite experiments:
//!
//! * [`prob`] — exact algebra of two-outcome bipartite distributions
//!   parameterized by their moments: joints, marginals, Bayes conditionals,
//!   and the exchangeability condition on conditionals.
//! * [`quantum`] — closed-form singlet-state predictions plus CHSH
//!   evaluation.
//! * [`model`] — hidden-variable models over a finite weighted λ-space:
//!   factorizable, deterministic, and outcome-dependent kinds, with a JSON
//!   file format.
//! * [`audit`] — locality conditions as executable checks producing
//!   structured pass/fail reports with residuals and witnesses.
//! * [`polytope`] — deterministic-strategy enumeration and local-polytope
//!   membership with explicit weight certificates.
//! * [`sim`] — seeded, worker-count-independent Monte Carlo realization of
//!   any model or of the quantum predictions, with calibrated statistical
//!   comparison.

pub mod audit;
pub mod error;
pub mod model;
pub mod polytope;
pub mod prob;
pub mod quantum;
pub mod sim;

pub use error::{Error, Result};

/// Tolerance separating floating-point noise from modeling error in the
/// exact algebra: distribution validation, normalization, and algebraic
/// identities.
pub const ALGEBRA_TOL: f64 = 1e-12;

/// Default tolerance for condition checks (exchangeability, locality
/// audits, feasibility).
pub const DEFAULT_CHECK_TOL: f64 = 1e-9;
