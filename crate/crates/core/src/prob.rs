//! Exact algebra of two-outcome bipartite distributions parameterized by
//! their moments.
//!
//! A distribution over outcome pairs (s₁, s₂) ∈ {−1, +1}² is fixed by the
//! triple of means (m1, m2, m12) = (mean of s₁, mean of s₂, mean of s₁s₂):
//! the joint probability of (s₁, s₂) is ¼[1 + s₁·m1 + s₂·m2 + s₁s₂·m12].
//! This module knows nothing about λ-spaces or measurement settings; it
//! supplies the marginal, Bayes-conditional, and exchangeability machinery
//! that the model and audit layers instantiate.

use crate::error::{Error, Result};
use crate::ALGEBRA_TOL;

/// A two-valued outcome, ±1 in units of half the spin quantum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Outcome {
    Plus,
    Minus,
}

impl Outcome {
    /// Both outcomes, in canonical order (+1 first).
    pub const BOTH: [Outcome; 2] = [Outcome::Plus, Outcome::Minus];

    pub fn sign(self) -> f64 {
        match self {
            Outcome::Plus => 1.0,
            Outcome::Minus => -1.0,
        }
    }

    pub fn value(self) -> i8 {
        match self {
            Outcome::Plus => 1,
            Outcome::Minus => -1,
        }
    }

    pub fn flip(self) -> Outcome {
        match self {
            Outcome::Plus => Outcome::Minus,
            Outcome::Minus => Outcome::Plus,
        }
    }

    /// Parse an integer outcome; only ±1 is representable.
    pub fn from_value(v: i64) -> Result<Outcome> {
        match v {
            1 => Ok(Outcome::Plus),
            -1 => Ok(Outcome::Minus),
            other => Err(Error::InvalidDistribution(format!(
                "outcome must be +1 or -1, got {other}"
            ))),
        }
    }
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Outcome::Plus => write!(f, "+1"),
            Outcome::Minus => write!(f, "-1"),
        }
    }
}

/// Canonical cell order for the four outcome pairs.
pub const CELL_ORDER: [(Outcome, Outcome); 4] = [
    (Outcome::Plus, Outcome::Plus),
    (Outcome::Plus, Outcome::Minus),
    (Outcome::Minus, Outcome::Plus),
    (Outcome::Minus, Outcome::Minus),
];

/// The (m1, m2, m12) triple parameterizing a two-outcome bipartite
/// distribution. Valid iff every induced joint entry is nonnegative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentTriple {
    pub m1: f64,
    pub m2: f64,
    pub m12: f64,
}

impl MomentTriple {
    /// Construct a validated triple.
    pub fn new(m1: f64, m2: f64, m12: f64) -> Result<Self> {
        let t = Self { m1, m2, m12 };
        t.validate()?;
        Ok(t)
    }

    /// Check the triple induces a distribution: |m| ≤ 1 componentwise and
    /// every induced entry ≥ −tolerance (reject, never clamp).
    pub fn validate(&self) -> Result<()> {
        let bail = |reason: String| {
            Err(Error::InvalidMoments {
                m1: self.m1,
                m2: self.m2,
                m12: self.m12,
                reason,
            })
        };
        for (name, v) in [("m1", self.m1), ("m2", self.m2), ("m12", self.m12)] {
            if !v.is_finite() {
                return bail(format!("{name} is not finite"));
            }
            if v.abs() > 1.0 + ALGEBRA_TOL {
                return bail(format!("|{name}| exceeds 1"));
            }
        }
        for (r, q) in CELL_ORDER {
            let e = self.raw_entry(r, q);
            if e < -ALGEBRA_TOL {
                return bail(format!("induced entry at ({r}, {q}) is {e}"));
            }
        }
        Ok(())
    }

    fn raw_entry(&self, s1: Outcome, s2: Outcome) -> f64 {
        0.25 * (1.0 + s1.sign() * self.m1 + s2.sign() * self.m2 + s1.sign() * s2.sign() * self.m12)
    }

    /// The induced joint distribution; entries ¼[1 + s₁·m1 + s₂·m2 + s₁s₂·m12].
    pub fn to_joint(&self) -> Result<JointDistribution2x2> {
        self.validate()?;
        let mut p = [0.0; 4];
        for (i, (r, q)) in CELL_ORDER.iter().enumerate() {
            // validated entries may still be float-noise negative; zero them
            p[i] = self.raw_entry(*r, *q).max(0.0);
        }
        JointDistribution2x2::from_cells(p)
    }

    /// Marginal of the first variable: ½[1 + s₁·m1].
    pub fn marginal_first(&self, s1: Outcome) -> f64 {
        0.5 * (1.0 + s1.sign() * self.m1)
    }

    /// Bayes conditional of the second variable given the first:
    /// ½[1 + (s₂·m2 + s₁s₂·m12)/(1 + s₁·m1)].
    ///
    /// Conditioning on an event of probability ≤ tolerance is an error, not
    /// a convention.
    pub fn conditional_second_given_first(&self, s1: Outcome, s2: Outcome) -> Result<f64> {
        let denom = 1.0 + s1.sign() * self.m1;
        if denom <= ALGEBRA_TOL {
            return Err(Error::ZeroProbabilityCondition {
                prob: 0.5 * denom,
                tol: ALGEBRA_TOL,
            });
        }
        Ok(0.5 * (1.0 + (s2.sign() * self.m2 + s1.sign() * s2.sign() * self.m12) / denom))
    }

    /// Whether the conditionals are invariant under swapping the two
    /// outcome values, i.e. P(S₂=s₂|S₁=s₁) = P(S₂=s₁|S₁=s₂) for all signs.
    ///
    /// Checked directly on the Bayes forms; equivalent to
    /// |m2 − m1·m12| ≤ tol away from the |m1| = 1 boundary.
    pub fn is_exchangeable(&self, tol: f64) -> Result<bool> {
        for s in Outcome::BOTH {
            let denom = 1.0 + s.sign() * self.m1;
            if denom <= tol {
                return Err(Error::UndefinedConditional { prob: 0.5 * denom });
            }
        }
        for s1 in Outcome::BOTH {
            for s2 in Outcome::BOTH {
                let lhs = self.conditional_second_given_first(s1, s2)?;
                let rhs = 0.5
                    * (1.0
                        + (s1.sign() * self.m2 + s1.sign() * s2.sign() * self.m12)
                            / (1.0 + s2.sign() * self.m1));
                if (lhs - rhs).abs() > tol {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Conditional in the exchangeable form ½[1 + s₁s₂·m12]. Errors if the
    /// triple is not exchangeable within `tol`.
    pub fn conditional_under_exchangeability(
        &self,
        s1: Outcome,
        s2: Outcome,
        tol: f64,
    ) -> Result<f64> {
        if !self.is_exchangeable(tol)? {
            return Err(Error::NotExchangeable { tol });
        }
        Ok(0.5 * (1.0 + s1.sign() * s2.sign() * self.m12))
    }
}

/// A distribution over the four outcome pairs, cells in [`CELL_ORDER`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointDistribution2x2 {
    p: [f64; 4],
}

impl JointDistribution2x2 {
    /// Construct from cells in canonical order, validating nonnegativity
    /// and normalization.
    pub fn from_cells(p: [f64; 4]) -> Result<Self> {
        let mut sum = 0.0;
        for (i, &v) in p.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                let (r, q) = CELL_ORDER[i];
                return Err(Error::InvalidDistribution(format!(
                    "entry at ({r}, {q}) is {v}"
                )));
            }
            sum += v;
        }
        if (sum - 1.0).abs() > ALGEBRA_TOL {
            return Err(Error::InvalidDistribution(format!(
                "entries sum to {sum}, not 1"
            )));
        }
        Ok(Self { p })
    }

    /// Construct by evaluating `f` at each outcome pair.
    pub fn from_fn(f: impl Fn(Outcome, Outcome) -> f64) -> Result<Self> {
        let mut p = [0.0; 4];
        for (i, (r, q)) in CELL_ORDER.iter().enumerate() {
            p[i] = f(*r, *q);
        }
        Self::from_cells(p)
    }

    /// Internal constructor for cells already known to form a distribution.
    pub(crate) fn from_cells_unchecked(p: [f64; 4]) -> Self {
        Self { p }
    }

    /// All probability mass on one outcome pair.
    pub fn point_mass(r: Outcome, q: Outcome) -> Self {
        let mut p = [0.0; 4];
        p[Self::index(r, q)] = 1.0;
        Self { p }
    }

    fn index(r: Outcome, q: Outcome) -> usize {
        (matches!(r, Outcome::Minus) as usize) * 2 + matches!(q, Outcome::Minus) as usize
    }

    pub fn prob(&self, r: Outcome, q: Outcome) -> f64 {
        self.p[Self::index(r, q)]
    }

    /// Cells in canonical order.
    pub fn cells(&self) -> [f64; 4] {
        self.p
    }

    /// Marginal of the first variable (sum over the second).
    pub fn marginal_first(&self, r: Outcome) -> f64 {
        self.prob(r, Outcome::Plus) + self.prob(r, Outcome::Minus)
    }

    /// Marginal of the second variable (sum over the first).
    pub fn marginal_second(&self, q: Outcome) -> f64 {
        self.prob(Outcome::Plus, q) + self.prob(Outcome::Minus, q)
    }

    /// Bayes conditional of the second variable given the first, from the
    /// stored entries.
    pub fn conditional_second_given_first(&self, r: Outcome, q: Outcome) -> Result<f64> {
        let denom = self.marginal_first(r);
        if denom <= ALGEBRA_TOL {
            return Err(Error::ZeroProbabilityCondition {
                prob: denom,
                tol: ALGEBRA_TOL,
            });
        }
        Ok(self.prob(r, q) / denom)
    }

    /// The moment triple (Σ s₁·p, Σ s₂·p, Σ s₁s₂·p).
    pub fn moments(&self) -> MomentTriple {
        let [pp, pm, mp, mm] = self.p;
        MomentTriple {
            m1: (pp + pm) - (mp + mm),
            m2: (pp + mp) - (pm + mm),
            m12: (pp + mm) - (pm + mp),
        }
    }

    /// The product mean Σ s₁s₂·p.
    pub fn product_moment(&self) -> f64 {
        let [pp, pm, mp, mm] = self.p;
        (pp + mm) - (pm + mp)
    }
}

/// A single-wing (marginal or conditional) measure over {−1, +1}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryDistribution {
    p_plus: f64,
    p_minus: f64,
}

impl BinaryDistribution {
    pub fn new(p_plus: f64, p_minus: f64) -> Result<Self> {
        for v in [p_plus, p_minus] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "single-wing probability {v} is negative or not finite"
                )));
            }
        }
        if (p_plus + p_minus - 1.0).abs() > ALGEBRA_TOL {
            return Err(Error::InvalidDistribution(format!(
                "single-wing probabilities sum to {}",
                p_plus + p_minus
            )));
        }
        Ok(Self { p_plus, p_minus })
    }

    /// The measure ½[1 ± mean] with the given outcome mean.
    pub fn from_mean(mean: f64) -> Result<Self> {
        if !mean.is_finite() || mean.abs() > 1.0 + ALGEBRA_TOL {
            return Err(Error::InvalidDistribution(format!(
                "outcome mean {mean} lies outside [-1, 1]"
            )));
        }
        Ok(Self {
            p_plus: (0.5 * (1.0 + mean)).clamp(0.0, 1.0),
            p_minus: (0.5 * (1.0 - mean)).clamp(0.0, 1.0),
        })
    }

    pub fn prob(&self, o: Outcome) -> f64 {
        match o {
            Outcome::Plus => self.p_plus,
            Outcome::Minus => self.p_minus,
        }
    }

    pub fn mean(&self) -> f64 {
        self.p_plus - self.p_minus
    }
}
