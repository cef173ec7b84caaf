//! Closed-form predictions for the ideal singlet-state experiment, plus
//! CHSH evaluation.
//!
//! Measurement directions are restricted to a single great circle (one
//! angle each): the singlet's statistics depend only on the angle between
//! the two settings, so a full 3D unit vector would carry untestable
//! degrees of freedom. The two-particle state is fixed to the singlet and
//! carries no parameters.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::prob::{MomentTriple, Outcome};
use crate::ALGEBRA_TOL;

/// A measurement direction on the fixed great circle, stored folded into
/// [0, 2π).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Direction {
    angle: f64,
}

impl Direction {
    /// Fold an angle (radians) into [0, 2π).
    pub fn new(angle: f64) -> Self {
        assert!(angle.is_finite(), "direction angle must be finite");
        let folded = angle.rem_euclid(TAU);
        // rem_euclid of a tiny negative can round up to 2π itself
        let folded = if folded >= TAU { 0.0 } else { folded };
        Self { angle: folded }
    }

    pub fn from_degrees(deg: f64) -> Self {
        Self::new(deg.to_radians())
    }

    pub fn angle(self) -> f64 {
        self.angle
    }

    /// Whether two directions coincide within `tol` on the circle.
    pub fn approx_eq(self, other: Direction, tol: f64) -> bool {
        let d = (self.angle - other.angle).abs();
        d.min(TAU - d) <= tol
    }
}

/// Which side of the experiment a single-wing quantity refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wing {
    One,
    Two,
}

/// A pair of measurement settings, one per wing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SettingPair {
    a: Direction,
    b: Direction,
}

impl SettingPair {
    pub fn new(a: Direction, b: Direction) -> Self {
        Self { a, b }
    }

    pub fn from_angles(a: f64, b: f64) -> Self {
        Self::new(Direction::new(a), Direction::new(b))
    }

    pub fn a(self) -> Direction {
        self.a
    }

    pub fn b(self) -> Direction {
        self.b
    }

    /// The angle between the two settings, in [0, π].
    pub fn theta(self) -> f64 {
        let d = (self.a.angle - self.b.angle).abs();
        d.min(TAU - d)
    }
}

/// The ideal two-particle scenario: the state is the fixed total-spin-zero
/// singlet, so a scenario is fully described by its settings. Both wing
/// means vanish identically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingletScenario {
    pub settings: SettingPair,
}

impl SingletScenario {
    pub fn new(settings: SettingPair) -> Self {
        Self { settings }
    }

    pub fn joint(&self, r: Outcome, q: Outcome) -> f64 {
        singlet_joint(self.settings, r, q)
    }

    pub fn moments(&self) -> MomentTriple {
        singlet_moments(self.settings)
    }

    pub fn conditional(&self, r: Outcome, q: Outcome) -> f64 {
        singlet_conditional(self.settings, r, q)
    }
}

/// Joint probability of outcomes (r, q): ¼(1 − rq·cos θ).
pub fn singlet_joint(s: SettingPair, r: Outcome, q: Outcome) -> f64 {
    0.25 * (1.0 - r.sign() * q.sign() * s.theta().cos())
}

/// Moments (0, 0, −cos θ) of the singlet joint.
pub fn singlet_moments(s: SettingPair) -> MomentTriple {
    MomentTriple {
        m1: 0.0,
        m2: 0.0,
        m12: -s.theta().cos(),
    }
}

/// Single-wing marginal; ½ for every wing, setting, and outcome.
pub fn singlet_marginal(_wing: Wing, _outcome: Outcome) -> f64 {
    0.5
}

/// Conditional probability of the second outcome given the first:
/// ½(1 − rq·cos θ).
pub fn singlet_conditional(s: SettingPair, r: Outcome, q: Outcome) -> f64 {
    0.5 * (1.0 - r.sign() * q.sign() * s.theta().cos())
}

/// The singlet correlation −cos θ between two directions.
pub fn singlet_correlation(x: Direction, y: Direction) -> f64 {
    -SettingPair::new(x, y).theta().cos()
}

/// The CHSH combination corr(a,b) − corr(a,b′) + corr(a′,b) + corr(a′,b′).
///
/// Errors if `corr` returns a value outside [−1, 1].
pub fn chsh_value(
    a: Direction,
    a_alt: Direction,
    b: Direction,
    b_alt: Direction,
    corr: impl Fn(Direction, Direction) -> f64,
) -> Result<f64> {
    let vals = [
        corr(a, b),
        corr(a, b_alt),
        corr(a_alt, b),
        corr(a_alt, b_alt),
    ];
    for v in vals {
        if v.is_nan() || v.abs() > 1.0 + ALGEBRA_TOL {
            return Err(Error::OutOfRangeCorrelation(v));
        }
    }
    Ok(vals[0] - vals[1] + vals[2] + vals[3])
}
