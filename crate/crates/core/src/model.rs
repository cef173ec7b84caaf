//! Hidden-variable models over a finite weighted λ-space.
//!
//! A model declares a finite set of directions per wing and assigns, per λ,
//! either single-wing outcome means (factorizable and deterministic kinds,
//! where the per-λ joint is always the product of the two wing measures and
//! each wing's response depends only on its own setting) or a full per-λ
//! joint distribution per setting pair (outcome-dependent kind). Continuous
//! λ families are represented by discretization at a declared resolution.
//!
//! Querying an undeclared setting is an error, never an interpolation.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{JointDistribution2x2, Outcome};
use crate::quantum::{self, Direction, SettingPair, Wing};
use crate::ALGEBRA_TOL;

/// Tolerance for matching a queried direction against a declared setting.
/// Matches the 12-significant-digit precision of angle keys in model files.
pub const SETTING_MATCH_TOL: f64 = 1e-9;

/// Render an angle the way model files key it: 12 significant digits.
pub fn angle_key(angle: f64) -> String {
    format!("{angle:.11e}")
}

/// Compensated (Kahan) sum; keeps weight-sum validation independent of the
/// number of λ points.
pub(crate) fn kahan_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

/// One λ point with its weight ρ(λ).
#[derive(Debug, Clone)]
pub struct LambdaPoint {
    pub id: String,
    pub weight: f64,
}

/// A finite λ-space: nonnegative weights summing to 1.
#[derive(Debug, Clone)]
pub struct LambdaSpace {
    points: Vec<LambdaPoint>,
}

impl LambdaSpace {
    pub fn new(points: Vec<LambdaPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidModel("lambda space is empty".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for p in &points {
            if !p.weight.is_finite() || p.weight < -ALGEBRA_TOL {
                return Err(Error::InvalidModel(format!(
                    "lambda '{}' has weight {}",
                    p.id, p.weight
                )));
            }
            if !seen.insert(p.id.as_str()) {
                return Err(Error::InvalidModel(format!(
                    "duplicate lambda id '{}'",
                    p.id
                )));
            }
        }
        let sum = kahan_sum(points.iter().map(|p| p.weight));
        if (sum - 1.0).abs() > ALGEBRA_TOL {
            return Err(Error::InvalidModel(format!(
                "lambda weights sum to {sum}, not 1"
            )));
        }
        let points = points
            .into_iter()
            .map(|mut p| {
                p.weight = p.weight.max(0.0);
                p
            })
            .collect();
        Ok(Self { points })
    }

    /// Uniform weights over ids "l0", "l1", ... zero-padded to equal width.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidModel("lambda space is empty".into()));
        }
        let width = (n - 1).to_string().len();
        let w = 1.0 / n as f64;
        Self::new(
            (0..n)
                .map(|j| LambdaPoint {
                    id: format!("l{j:0width$}"),
                    weight: w,
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[LambdaPoint] {
        &self.points
    }

    pub fn weight(&self, ix: usize) -> f64 {
        self.points[ix].weight
    }

    pub fn id(&self, ix: usize) -> &str {
        &self.points[ix].id
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.points.iter().position(|p| p.id == id)
    }
}

/// The three representable model families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// Per-λ joint factorizes into single-wing measures with means in
    /// [−1, 1].
    Factorizable,
    /// Factorizable with every wing mean exactly ±1: outcomes are fixed
    /// given λ.
    Deterministic,
    /// A full per-λ joint per setting pair; factorization not assumed.
    OutcomeDependent,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Factorizable => "factorizable",
            ModelKind::Deterministic => "deterministic",
            ModelKind::OutcomeDependent => "outcome-dependent",
        }
    }
}

/// A λ-averaged quantity.
#[derive(Debug, Clone, Copy)]
pub enum LambdaMoment {
    /// Mean outcome of wing 1 at a direction (factorizable/deterministic
    /// kinds only; a joint table's single-wing mean depends on the distant
    /// setting).
    Wing1(Direction),
    /// Mean outcome of wing 2 at a direction (same restriction).
    Wing2(Direction),
    /// Mean outcome product Σ rq·p(r,q|λ) at a setting pair (any kind).
    Product(SettingPair),
}

#[derive(Debug, Clone)]
enum Response {
    /// Outcome means per [λ][setting index], one table per wing.
    Wings {
        wing1: Vec<Vec<f64>>,
        wing2: Vec<Vec<f64>>,
    },
    /// Per-λ joints, indexed [λ][i1 * n2 + i2].
    Joint(Vec<Vec<JointDistribution2x2>>),
}

/// A hidden-variable model: λ-space, declared settings, and per-λ responses.
/// Immutable after construction; all evaluation is pure.
#[derive(Debug, Clone)]
pub struct HvModel {
    kind: ModelKind,
    lambda: LambdaSpace,
    settings1: Vec<Direction>,
    settings2: Vec<Direction>,
    response: Response,
}

pub(crate) fn validate_settings(wing: &str, settings: &[Direction]) -> Result<()> {
    if settings.is_empty() {
        return Err(Error::InvalidModel(format!(
            "{wing} declares no settings"
        )));
    }
    for (i, a) in settings.iter().enumerate() {
        for b in &settings[i + 1..] {
            if a.approx_eq(*b, SETTING_MATCH_TOL) {
                return Err(Error::InvalidModel(format!(
                    "{wing} declares indistinguishable settings {} and {}",
                    a.angle(),
                    b.angle()
                )));
            }
        }
    }
    Ok(())
}

fn validate_wing_table(
    wing: &str,
    table: &[Vec<f64>],
    n_lambda: usize,
    n_settings: usize,
    deterministic: bool,
) -> Result<()> {
    if table.len() != n_lambda {
        return Err(Error::InvalidModel(format!(
            "{wing} table has {} lambda rows, expected {n_lambda}",
            table.len()
        )));
    }
    for row in table {
        if row.len() != n_settings {
            return Err(Error::InvalidModel(format!(
                "{wing} row has {} entries, expected {n_settings}",
                row.len()
            )));
        }
        for &v in row {
            if deterministic {
                if v != 1.0 && v != -1.0 {
                    return Err(Error::InvalidModel(format!(
                        "deterministic {wing} entry {v} is not exactly +1 or -1"
                    )));
                }
            } else if !v.is_finite() || v.abs() > 1.0 + ALGEBRA_TOL {
                return Err(Error::InvalidModel(format!(
                    "{wing} mean {v} lies outside [-1, 1]"
                )));
            }
        }
    }
    Ok(())
}

impl HvModel {
    /// A factorizable (Bell-local) model from per-wing mean tables indexed
    /// [λ][setting index].
    pub fn factorizable(
        lambda: LambdaSpace,
        settings1: Vec<Direction>,
        settings2: Vec<Direction>,
        wing1: Vec<Vec<f64>>,
        wing2: Vec<Vec<f64>>,
    ) -> Result<Self> {
        Self::from_wings(ModelKind::Factorizable, lambda, settings1, settings2, wing1, wing2)
    }

    /// A deterministic model; every wing entry must be exactly ±1.
    pub fn deterministic(
        lambda: LambdaSpace,
        settings1: Vec<Direction>,
        settings2: Vec<Direction>,
        wing1: Vec<Vec<f64>>,
        wing2: Vec<Vec<f64>>,
    ) -> Result<Self> {
        Self::from_wings(ModelKind::Deterministic, lambda, settings1, settings2, wing1, wing2)
    }

    fn from_wings(
        kind: ModelKind,
        lambda: LambdaSpace,
        settings1: Vec<Direction>,
        settings2: Vec<Direction>,
        mut wing1: Vec<Vec<f64>>,
        mut wing2: Vec<Vec<f64>>,
    ) -> Result<Self> {
        validate_settings("wing 1", &settings1)?;
        validate_settings("wing 2", &settings2)?;
        let det = kind == ModelKind::Deterministic;
        validate_wing_table("wing 1", &wing1, lambda.len(), settings1.len(), det)?;
        validate_wing_table("wing 2", &wing2, lambda.len(), settings2.len(), det)?;
        for table in [&mut wing1, &mut wing2] {
            for row in table.iter_mut() {
                for v in row.iter_mut() {
                    *v = v.clamp(-1.0, 1.0);
                }
            }
        }
        Ok(Self {
            kind,
            lambda,
            settings1,
            settings2,
            response: Response::Wings { wing1, wing2 },
        })
    }

    /// An outcome-dependent model from per-λ joints indexed
    /// [λ][i1 * n2 + i2].
    pub fn outcome_dependent(
        lambda: LambdaSpace,
        settings1: Vec<Direction>,
        settings2: Vec<Direction>,
        joints: Vec<Vec<JointDistribution2x2>>,
    ) -> Result<Self> {
        validate_settings("wing 1", &settings1)?;
        validate_settings("wing 2", &settings2)?;
        let n_pairs = settings1.len() * settings2.len();
        if joints.len() != lambda.len() {
            return Err(Error::InvalidModel(format!(
                "joint table has {} lambda rows, expected {}",
                joints.len(),
                lambda.len()
            )));
        }
        for row in &joints {
            if row.len() != n_pairs {
                return Err(Error::InvalidModel(format!(
                    "joint row has {} entries, expected {n_pairs}",
                    row.len()
                )));
            }
        }
        Ok(Self {
            kind: ModelKind::OutcomeDependent,
            lambda,
            settings1,
            settings2,
            response: Response::Joint(joints),
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn lambda_space(&self) -> &LambdaSpace {
        &self.lambda
    }

    pub fn settings(&self, wing: Wing) -> &[Direction] {
        match wing {
            Wing::One => &self.settings1,
            Wing::Two => &self.settings2,
        }
    }

    pub fn lambda_index(&self, id: &str) -> Result<usize> {
        self.lambda
            .index_of(id)
            .ok_or_else(|| Error::MissingEntry(format!("lambda '{id}'")))
    }

    pub fn setting_index(&self, wing: Wing, d: Direction) -> Result<usize> {
        self.settings(wing)
            .iter()
            .position(|s| s.approx_eq(d, SETTING_MATCH_TOL))
            .ok_or_else(|| {
                Error::MissingEntry(format!(
                    "wing {} setting at angle {}",
                    match wing {
                        Wing::One => 1,
                        Wing::Two => 2,
                    },
                    d.angle()
                ))
            })
    }

    /// Resolve a setting pair to declared indices.
    pub fn resolve_pair(&self, s: SettingPair) -> Result<(usize, usize)> {
        Ok((
            self.setting_index(Wing::One, s.a())?,
            self.setting_index(Wing::Two, s.b())?,
        ))
    }

    /// All declared setting pairs with their indices.
    pub fn declared_pairs(&self) -> impl Iterator<Item = (usize, usize, SettingPair)> + '_ {
        self.settings1.iter().enumerate().flat_map(move |(i1, &a)| {
            self.settings2
                .iter()
                .enumerate()
                .map(move |(i2, &b)| (i1, i2, SettingPair::new(a, b)))
        })
    }

    pub(crate) fn n_lambda(&self) -> usize {
        self.lambda.len()
    }

    pub(crate) fn pair_index(&self, i1: usize, i2: usize) -> usize {
        i1 * self.settings2.len() + i2
    }

    pub(crate) fn wing_mean_ix(&self, wing: Wing, l: usize, si: usize) -> Result<f64> {
        match &self.response {
            Response::Wings { wing1, wing2 } => Ok(match wing {
                Wing::One => wing1[l][si],
                Wing::Two => wing2[l][si],
            }),
            Response::Joint(_) => Err(Error::WrongKind {
                expected: "factorizable or deterministic",
                actual: self.kind.as_str(),
            }),
        }
    }

    pub(crate) fn per_lambda_joint_ix(&self, l: usize, i1: usize, i2: usize) -> JointDistribution2x2 {
        match &self.response {
            Response::Wings { wing1, wing2 } => {
                let e1 = wing1[l][i1];
                let e2 = wing2[l][i2];
                let p1p = 0.5 * (1.0 + e1);
                let p1m = 0.5 * (1.0 - e1);
                let p2p = 0.5 * (1.0 + e2);
                let p2m = 0.5 * (1.0 - e2);
                JointDistribution2x2::from_cells_unchecked([
                    p1p * p2p,
                    p1p * p2m,
                    p1m * p2p,
                    p1m * p2m,
                ])
            }
            Response::Joint(rows) => rows[l][self.pair_index(i1, i2)],
        }
    }

    pub(crate) fn per_lambda_product_moment_ix(&self, l: usize, i1: usize, i2: usize) -> f64 {
        self.per_lambda_joint_ix(l, i1, i2).product_moment()
    }

    /// Single-wing outcome probability ½[1 + outcome·E(d, λ)]. Only
    /// factorizable and deterministic kinds carry single-wing measures.
    pub fn wing_prob(
        &self,
        wing: Wing,
        lambda_id: &str,
        d: Direction,
        outcome: Outcome,
    ) -> Result<f64> {
        let l = self.lambda_index(lambda_id)?;
        let si = self.setting_index(wing, d)?;
        let mean = self.wing_mean_ix(wing, l, si)?;
        Ok(0.5 * (1.0 + outcome.sign() * mean))
    }

    /// Per-λ joint probability as the product of the two wing measures.
    pub fn factorizable_joint(
        &self,
        lambda_id: &str,
        s: SettingPair,
        r: Outcome,
        q: Outcome,
    ) -> Result<f64> {
        if self.kind == ModelKind::OutcomeDependent {
            return Err(Error::WrongKind {
                expected: "factorizable or deterministic",
                actual: self.kind.as_str(),
            });
        }
        let l = self.lambda_index(lambda_id)?;
        let (i1, i2) = self.resolve_pair(s)?;
        Ok(self.per_lambda_joint_ix(l, i1, i2).prob(r, q))
    }

    /// The per-λ joint at a setting pair, for any kind.
    pub fn per_lambda_joint(&self, lambda_id: &str, s: SettingPair) -> Result<JointDistribution2x2> {
        let l = self.lambda_index(lambda_id)?;
        let (i1, i2) = self.resolve_pair(s)?;
        Ok(self.per_lambda_joint_ix(l, i1, i2))
    }

    /// λ-average of a per-λ moment against the weights ρ(λ).
    pub fn expectation_over_lambda(&self, moment: LambdaMoment) -> Result<f64> {
        match moment {
            LambdaMoment::Wing1(d) => {
                let si = self.setting_index(Wing::One, d)?;
                if matches!(self.response, Response::Joint(_)) {
                    return Err(Error::WrongKind {
                        expected: "factorizable or deterministic",
                        actual: self.kind.as_str(),
                    });
                }
                Ok(kahan_sum((0..self.n_lambda()).map(|l| {
                    self.lambda.weight(l) * self.wing_mean_ix(Wing::One, l, si).expect("wings kind")
                })))
            }
            LambdaMoment::Wing2(d) => {
                let si = self.setting_index(Wing::Two, d)?;
                if matches!(self.response, Response::Joint(_)) {
                    return Err(Error::WrongKind {
                        expected: "factorizable or deterministic",
                        actual: self.kind.as_str(),
                    });
                }
                Ok(kahan_sum((0..self.n_lambda()).map(|l| {
                    self.lambda.weight(l) * self.wing_mean_ix(Wing::Two, l, si).expect("wings kind")
                })))
            }
            LambdaMoment::Product(s) => {
                let (i1, i2) = self.resolve_pair(s)?;
                Ok(kahan_sum((0..self.n_lambda()).map(|l| {
                    self.lambda.weight(l) * self.per_lambda_product_moment_ix(l, i1, i2)
                })))
            }
        }
    }

    pub(crate) fn quantum_joint_distribution_ix(&self, i1: usize, i2: usize) -> JointDistribution2x2 {
        let mut cells = [0.0; 4];
        let mut comp = [0.0; 4];
        for l in 0..self.n_lambda() {
            let w = self.lambda.weight(l);
            let j = self.per_lambda_joint_ix(l, i1, i2);
            for (k, v) in j.cells().iter().enumerate() {
                let y = w * v - comp[k];
                let t = cells[k] + y;
                comp[k] = (t - cells[k]) - y;
                cells[k] = t;
            }
        }
        for c in &mut cells {
            *c = c.max(0.0);
        }
        JointDistribution2x2::from_cells_unchecked(cells)
    }

    /// The λ-averaged joint Σ_λ ρ(λ)·p(r, q | λ) as a distribution.
    pub fn quantum_joint_distribution(&self, s: SettingPair) -> Result<JointDistribution2x2> {
        let (i1, i2) = self.resolve_pair(s)?;
        Ok(self.quantum_joint_distribution_ix(i1, i2))
    }

    /// One entry of the λ-averaged joint.
    pub fn model_quantum_joint(&self, s: SettingPair, r: Outcome, q: Outcome) -> Result<f64> {
        Ok(self.quantum_joint_distribution(s)?.prob(r, q))
    }

    /// The model-level conditional of the second outcome given the first:
    /// the λ-averaged joint divided by the λ-averaged wing-1 marginal.
    pub fn model_conditional(&self, s: SettingPair, r: Outcome, q: Outcome) -> Result<f64> {
        let qd = self.quantum_joint_distribution(s)?;
        let denom = qd.marginal_first(r);
        if denom <= ALGEBRA_TOL {
            return Err(Error::ZeroProbabilityCondition {
                prob: denom,
                tol: ALGEBRA_TOL,
            });
        }
        Ok(qd.prob(r, q) / denom)
    }
}

/// Deterministic reference model: λ uniform over `n` equally spaced angles
/// on the circle, wing 1 responding sign(cos(λ − a)) and wing 2 responding
/// −sign(cos(λ − b)), with sign(0) := +1.
///
/// Its λ-averaged product moment converges to −1 + 2θ/π as n grows.
pub fn build_sign_model(
    n: usize,
    settings1: &[Direction],
    settings2: &[Direction],
) -> Result<HvModel> {
    if n < 2 {
        return Err(Error::InvalidModel(format!(
            "sign model requires at least 2 lambda points, got {n}"
        )));
    }
    let lambda = LambdaSpace::uniform(n)?;
    let sign = |x: f64| if x >= 0.0 { 1.0 } else { -1.0 };
    let angles: Vec<f64> = (0..n)
        .map(|j| std::f64::consts::TAU * j as f64 / n as f64)
        .collect();
    let wing1 = angles
        .iter()
        .map(|&lam| settings1.iter().map(|a| sign((lam - a.angle()).cos())).collect())
        .collect();
    let wing2 = angles
        .iter()
        .map(|&lam| settings2.iter().map(|b| -sign((lam - b.angle()).cos())).collect())
        .collect();
    HvModel::deterministic(lambda, settings1.to_vec(), settings2.to_vec(), wing1, wing2)
}

/// Single-λ outcome-dependent model whose per-λ joint at every declared
/// setting pair is exactly the singlet joint. Reproduces the quantum
/// predictions by construction while keeping parameter independence.
pub fn build_singlet_outcome_dependent(
    settings1: &[Direction],
    settings2: &[Direction],
) -> Result<HvModel> {
    let lambda = LambdaSpace::new(vec![LambdaPoint {
        id: "l0".into(),
        weight: 1.0,
    }])?;
    let mut row = Vec::with_capacity(settings1.len() * settings2.len());
    for &a in settings1 {
        for &b in settings2 {
            let pair = SettingPair::new(a, b);
            row.push(JointDistribution2x2::from_fn(|r, q| {
                quantum::singlet_joint(pair, r, q)
            })?);
        }
    }
    HvModel::outcome_dependent(lambda, settings1.to_vec(), settings2.to_vec(), vec![row])
}

// ---------------------------------------------------------------------------
// File format
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    kind: ModelKind,
    lambda: Vec<LambdaEntryFile>,
    settings: SettingsFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    wings: Option<WingsFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    joint: Option<JointFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LambdaEntryFile {
    id: String,
    weight: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SettingsFile {
    wing1: Vec<f64>,
    wing2: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WingsFile {
    wing1: WingTableFile,
    wing2: WingTableFile,
}

/// λ id → angle key → outcome mean.
type WingTableFile = BTreeMap<String, BTreeMap<String, f64>>;

/// λ id → wing-1 angle key → wing-2 angle key → cells.
type JointFile = BTreeMap<String, BTreeMap<String, BTreeMap<String, JointCellsFile>>>;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JointCellsFile {
    pp: f64,
    pm: f64,
    mp: f64,
    mm: f64,
}

/// Canonicalize an angle key from a file: parse, fold, re-render.
fn canonical_key(raw: &str) -> Result<String> {
    let v: f64 = raw
        .parse()
        .map_err(|_| Error::FileFormat(format!("angle key '{raw}' is not a number")))?;
    if !v.is_finite() {
        return Err(Error::FileFormat(format!("angle key '{raw}' is not finite")));
    }
    Ok(angle_key(Direction::new(v).angle()))
}

fn wing_table_from_file(
    wing: &str,
    table: &WingTableFile,
    lambda: &LambdaSpace,
    settings: &[Direction],
) -> Result<Vec<Vec<f64>>> {
    let keys: Vec<String> = settings.iter().map(|d| angle_key(d.angle())).collect();
    let mut out = vec![vec![0.0; settings.len()]; lambda.len()];
    let mut seen = 0usize;
    for (raw_id, row) in table {
        let l = lambda
            .index_of(raw_id)
            .ok_or_else(|| Error::FileFormat(format!("{wing} table keys unknown lambda '{raw_id}'")))?;
        seen += 1;
        let mut filled = vec![false; settings.len()];
        for (raw_key, &mean) in row {
            let key = canonical_key(raw_key)?;
            let si = keys.iter().position(|k| *k == key).ok_or_else(|| {
                Error::FileFormat(format!(
                    "{wing} table keys undeclared angle '{raw_key}' for lambda '{raw_id}'"
                ))
            })?;
            if filled[si] {
                return Err(Error::FileFormat(format!(
                    "{wing} table repeats angle '{raw_key}' for lambda '{raw_id}'"
                )));
            }
            filled[si] = true;
            out[l][si] = mean;
        }
        if let Some(missing) = filled.iter().position(|f| !f) {
            return Err(Error::FileFormat(format!(
                "{wing} table is missing angle {} for lambda '{raw_id}'",
                keys[missing]
            )));
        }
    }
    if seen != lambda.len() {
        return Err(Error::FileFormat(format!(
            "{wing} table covers {seen} of {} lambda points",
            lambda.len()
        )));
    }
    Ok(out)
}

impl HvModel {
    /// Parse a model from its JSON document.
    pub fn from_json(text: &str) -> Result<HvModel> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::FileFormat(e.to_string()))?;

        // weights: accept a 1e-9 normalization slack on load, then
        // renormalize exactly so the in-memory invariant is the tight one
        for e in &file.lambda {
            if !e.weight.is_finite() || e.weight < 0.0 {
                return Err(Error::FileFormat(format!(
                    "lambda '{}' has weight {}",
                    e.id, e.weight
                )));
            }
        }
        let sum = kahan_sum(file.lambda.iter().map(|e| e.weight));
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::FileFormat(format!(
                "lambda weights sum to {sum}, outside the 1e-9 load tolerance"
            )));
        }
        let lambda = LambdaSpace::new(
            file.lambda
                .iter()
                .map(|e| LambdaPoint {
                    id: e.id.clone(),
                    weight: e.weight / sum,
                })
                .collect(),
        )?;

        let settings1: Vec<Direction> =
            file.settings.wing1.iter().map(|&a| Direction::new(a)).collect();
        let settings2: Vec<Direction> =
            file.settings.wing2.iter().map(|&a| Direction::new(a)).collect();

        match file.kind {
            ModelKind::Factorizable | ModelKind::Deterministic => {
                if file.joint.is_some() {
                    return Err(Error::FileFormat(
                        "wings-kind model must not carry a joint table".into(),
                    ));
                }
                let wings = file.wings.ok_or_else(|| {
                    Error::FileFormat("wings-kind model is missing its wings tables".into())
                })?;
                let wing1 = wing_table_from_file("wing1", &wings.wing1, &lambda, &settings1)?;
                let wing2 = wing_table_from_file("wing2", &wings.wing2, &lambda, &settings2)?;
                Self::from_wings(file.kind, lambda, settings1, settings2, wing1, wing2)
            }
            ModelKind::OutcomeDependent => {
                if file.wings.is_some() {
                    return Err(Error::FileFormat(
                        "outcome-dependent model must not carry wings tables".into(),
                    ));
                }
                let joint = file.joint.ok_or_else(|| {
                    Error::FileFormat("outcome-dependent model is missing its joint table".into())
                })?;
                let keys1: Vec<String> = settings1.iter().map(|d| angle_key(d.angle())).collect();
                let keys2: Vec<String> = settings2.iter().map(|d| angle_key(d.angle())).collect();
                let n_pairs = settings1.len() * settings2.len();
                let mut rows = vec![vec![None; n_pairs]; lambda.len()];
                let mut seen = 0usize;
                for (raw_id, by_a) in &joint {
                    let l = lambda.index_of(raw_id).ok_or_else(|| {
                        Error::FileFormat(format!("joint table keys unknown lambda '{raw_id}'"))
                    })?;
                    seen += 1;
                    for (raw_a, by_b) in by_a {
                        let ka = canonical_key(raw_a)?;
                        let i1 = keys1.iter().position(|k| *k == ka).ok_or_else(|| {
                            Error::FileFormat(format!("joint table keys undeclared wing-1 angle '{raw_a}'"))
                        })?;
                        for (raw_b, cells) in by_b {
                            let kb = canonical_key(raw_b)?;
                            let i2 = keys2.iter().position(|k| *k == kb).ok_or_else(|| {
                                Error::FileFormat(format!(
                                    "joint table keys undeclared wing-2 angle '{raw_b}'"
                                ))
                            })?;
                            let j = JointDistribution2x2::from_cells([
                                cells.pp, cells.pm, cells.mp, cells.mm,
                            ])?;
                            let slot = &mut rows[l][i1 * settings2.len() + i2];
                            if slot.is_some() {
                                return Err(Error::FileFormat(format!(
                                    "joint table repeats pair ('{raw_a}', '{raw_b}') for lambda '{raw_id}'"
                                )));
                            }
                            *slot = Some(j);
                        }
                    }
                }
                if seen != lambda.len() {
                    return Err(Error::FileFormat(format!(
                        "joint table covers {seen} of {} lambda points",
                        lambda.len()
                    )));
                }
                let rows = rows
                    .into_iter()
                    .map(|row| {
                        row.into_iter()
                            .collect::<Option<Vec<_>>>()
                            .ok_or_else(|| {
                                Error::FileFormat("joint table is missing a setting pair".into())
                            })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Self::outcome_dependent(lambda, settings1, settings2, rows)
            }
        }
    }

    /// Serialize to the JSON document format.
    pub fn to_json(&self) -> String {
        let lambda = self
            .lambda
            .points()
            .iter()
            .map(|p| LambdaEntryFile {
                id: p.id.clone(),
                weight: p.weight,
            })
            .collect();
        let settings = SettingsFile {
            wing1: self.settings1.iter().map(|d| d.angle()).collect(),
            wing2: self.settings2.iter().map(|d| d.angle()).collect(),
        };
        let (wings, joint) = match &self.response {
            Response::Wings { wing1, wing2 } => {
                let pack = |table: &Vec<Vec<f64>>, settings: &[Direction]| -> WingTableFile {
                    self.lambda
                        .points()
                        .iter()
                        .enumerate()
                        .map(|(l, p)| {
                            let row = settings
                                .iter()
                                .enumerate()
                                .map(|(si, d)| (angle_key(d.angle()), table[l][si]))
                                .collect();
                            (p.id.clone(), row)
                        })
                        .collect()
                };
                (
                    Some(WingsFile {
                        wing1: pack(wing1, &self.settings1),
                        wing2: pack(wing2, &self.settings2),
                    }),
                    None,
                )
            }
            Response::Joint(rows) => {
                let mut out: JointFile = BTreeMap::new();
                for (l, p) in self.lambda.points().iter().enumerate() {
                    let mut by_a = BTreeMap::new();
                    for (i1, a) in self.settings1.iter().enumerate() {
                        let mut by_b = BTreeMap::new();
                        for (i2, b) in self.settings2.iter().enumerate() {
                            let j = rows[l][self.pair_index(i1, i2)];
                            by_b.insert(
                                angle_key(b.angle()),
                                JointCellsFile {
                                    pp: j.prob(Outcome::Plus, Outcome::Plus),
                                    pm: j.prob(Outcome::Plus, Outcome::Minus),
                                    mp: j.prob(Outcome::Minus, Outcome::Plus),
                                    mm: j.prob(Outcome::Minus, Outcome::Minus),
                                },
                            );
                        }
                        by_a.insert(angle_key(a.angle()), by_b);
                    }
                    out.insert(p.id.clone(), by_a);
                }
                (None, Some(out))
            }
        };
        let file = ModelFile {
            kind: self.kind,
            lambda,
            settings,
            wings,
            joint,
        };
        serde_json::to_string_pretty(&file).expect("model serializes")
    }

    pub fn load(path: &Path) -> Result<HvModel> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::CELL_ORDER;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, PI};

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    fn dirs(angles: &[f64]) -> Vec<Direction> {
        angles.iter().map(|&a| Direction::new(a)).collect()
    }

    fn single_lambda_factorizable(e1: f64, e2: f64) -> HvModel {
        let lambda = LambdaSpace::new(vec![LambdaPoint {
            id: "l0".into(),
            weight: 1.0,
        }])
        .unwrap();
        HvModel::factorizable(
            lambda,
            dirs(&[0.0]),
            dirs(&[0.0]),
            vec![vec![e1]],
            vec![vec![e2]],
        )
        .unwrap()
    }

    #[test]
    fn wing_prob_reference_values() {
        let m = single_lambda_factorizable(0.0, 0.6);
        let d = Direction::new(0.0);
        assert_eq!(m.wing_prob(Wing::One, "l0", d, Outcome::Plus).unwrap(), 0.5);
        assert_close(
            m.wing_prob(Wing::Two, "l0", d, Outcome::Plus).unwrap(),
            0.8,
            1e-15,
        );
        let det = single_lambda_factorizable(1.0, -1.0);
        assert_eq!(
            det.wing_prob(Wing::One, "l0", d, Outcome::Minus).unwrap(),
            0.0
        );
    }

    #[test]
    fn factorizable_joint_is_the_wing_product() {
        let m = single_lambda_factorizable(0.6, -0.2);
        let s = SettingPair::from_angles(0.0, 0.0);
        let v = m
            .factorizable_joint("l0", s, Outcome::Plus, Outcome::Plus)
            .unwrap();
        assert_close(v, 0.32, 1e-15); // ½(1.6) · ½(0.8)
        // closed form ¼[1 + rE1 + qE2 + rqE1E2] agrees
        for (r, q) in CELL_ORDER {
            let closed = 0.25
                * (1.0 + r.sign() * 0.6 + q.sign() * (-0.2)
                    + r.sign() * q.sign() * 0.6 * (-0.2));
            let got = m.factorizable_joint("l0", s, r, q).unwrap();
            assert_close(got, closed, 1e-12);
        }
    }

    #[test]
    fn outcome_dependent_rejects_wing_queries() {
        let m = build_singlet_outcome_dependent(&dirs(&[0.0]), &dirs(&[FRAC_PI_3])).unwrap();
        let err = m
            .wing_prob(Wing::One, "l0", Direction::new(0.0), Outcome::Plus)
            .unwrap_err();
        assert!(matches!(err, Error::WrongKind { .. }));
        assert!(m
            .factorizable_joint(
                "l0",
                SettingPair::from_angles(0.0, FRAC_PI_3),
                Outcome::Plus,
                Outcome::Plus
            )
            .is_err());
    }

    #[test]
    fn per_lambda_joint_matches_kind() {
        let uniform = single_lambda_factorizable(0.0, 0.0);
        let j = uniform
            .per_lambda_joint("l0", SettingPair::from_angles(0.0, 0.0))
            .unwrap();
        for (r, q) in CELL_ORDER {
            assert_eq!(j.prob(r, q), 0.25);
        }

        let od = build_singlet_outcome_dependent(&dirs(&[0.0]), &dirs(&[FRAC_PI_3])).unwrap();
        let j = od
            .per_lambda_joint("l0", SettingPair::from_angles(0.0, FRAC_PI_3))
            .unwrap();
        assert_close(j.prob(Outcome::Plus, Outcome::Plus), 0.125, 1e-12);
        assert_close(j.prob(Outcome::Plus, Outcome::Minus), 0.375, 1e-12);

        let det = single_lambda_factorizable(1.0, -1.0);
        let j = det
            .per_lambda_joint("l0", SettingPair::from_angles(0.0, 0.0))
            .unwrap();
        assert_eq!(j.prob(Outcome::Plus, Outcome::Minus), 1.0);
    }

    #[test]
    fn undeclared_setting_is_an_error_not_interpolation() {
        let m = single_lambda_factorizable(0.0, 0.0);
        let err = m
            .per_lambda_joint("l0", SettingPair::from_angles(0.0, 0.5))
            .unwrap_err();
        assert!(matches!(err, Error::MissingEntry(_)));
        assert!(m.lambda_index("nope").is_err());
    }

    #[test]
    fn expectation_over_lambda_cases() {
        let det = single_lambda_factorizable(1.0, 1.0);
        let s = SettingPair::from_angles(0.0, 0.0);
        assert_eq!(
            det.expectation_over_lambda(LambdaMoment::Product(s)).unwrap(),
            1.0
        );

        let uniform = single_lambda_factorizable(0.0, 0.0);
        for (r, q) in CELL_ORDER {
            assert_eq!(uniform.model_quantum_joint(s, r, q).unwrap(), 0.25);
            assert_eq!(uniform.model_conditional(s, r, q).unwrap(), 0.5);
        }

        let lambda = LambdaSpace::new(vec![
            LambdaPoint { id: "a".into(), weight: 0.5 },
            LambdaPoint { id: "b".into(), weight: 0.5 },
        ])
        .unwrap();
        let m = HvModel::deterministic(
            lambda,
            dirs(&[0.0]),
            dirs(&[0.0]),
            vec![vec![1.0], vec![1.0]],
            vec![vec![1.0], vec![-1.0]],
        )
        .unwrap();
        assert_eq!(m.expectation_over_lambda(LambdaMoment::Product(s)).unwrap(), 0.0);
    }

    #[test]
    fn sign_model_matches_its_analytic_integral() {
        let thetas = [0.0, FRAC_PI_4, FRAC_PI_2, PI];
        let settings2 = dirs(&thetas);
        let model = build_sign_model(20_000, &dirs(&[0.0]), &settings2).unwrap();
        for &t in &thetas {
            let s = SettingPair::from_angles(0.0, t);
            let got = model
                .expectation_over_lambda(LambdaMoment::Product(s))
                .unwrap();
            let expected = -1.0 + 2.0 * t / PI;
            assert_close(got, expected, std::f64::consts::TAU / 20_000.0);
        }
        // equal settings anticorrelate exactly
        let s = SettingPair::from_angles(0.0, 0.0);
        assert_eq!(
            model.expectation_over_lambda(LambdaMoment::Product(s)).unwrap(),
            -1.0
        );
        assert_eq!(
            model.model_quantum_joint(s, Outcome::Plus, Outcome::Plus).unwrap(),
            0.0
        );
        // wing means stay near zero (discretization-level residue)
        let e1 = model
            .expectation_over_lambda(LambdaMoment::Wing1(Direction::new(0.0)))
            .unwrap();
        assert!(e1.abs() <= 1e-3, "sign-model wing mean {e1}");
    }

    #[test]
    fn sign_model_needs_two_points() {
        assert!(build_sign_model(1, &dirs(&[0.0]), &dirs(&[0.0])).is_err());
    }

    #[test]
    fn singlet_od_model_reproduces_quantum_values() {
        let settings2 = dirs(&[0.0, FRAC_PI_3, FRAC_PI_2]);
        let m = build_singlet_outcome_dependent(&dirs(&[0.0]), &settings2).unwrap();
        for (_, _, pair) in m.declared_pairs() {
            for (r, q) in CELL_ORDER {
                assert_eq!(
                    m.model_quantum_joint(pair, r, q).unwrap(),
                    quantum::singlet_joint(pair, r, q)
                );
                assert_close(
                    m.model_conditional(pair, r, q).unwrap(),
                    quantum::singlet_conditional(pair, r, q),
                    1e-15,
                );
            }
        }
    }

    #[test]
    fn aggregate_moments_match_lambda_expectations() {
        let lambda = LambdaSpace::new(vec![
            LambdaPoint { id: "a".into(), weight: 0.25 },
            LambdaPoint { id: "b".into(), weight: 0.75 },
        ])
        .unwrap();
        let m = HvModel::factorizable(
            lambda,
            dirs(&[0.0, 1.0]),
            dirs(&[0.5]),
            vec![vec![0.3, -0.4], vec![-0.1, 0.9]],
            vec![vec![0.7], vec![-0.2]],
        )
        .unwrap();
        for (_, _, pair) in m.declared_pairs() {
            let agg_joint = m.quantum_joint_distribution(pair).unwrap();
            let total: f64 = agg_joint.cells().iter().sum();
            assert_close(total, 1.0, 1e-12 * m.lambda_space().len() as f64);
            let agg = agg_joint.moments();
            let e1 = m
                .expectation_over_lambda(LambdaMoment::Wing1(pair.a()))
                .unwrap();
            let e2 = m
                .expectation_over_lambda(LambdaMoment::Wing2(pair.b()))
                .unwrap();
            let e12 = m
                .expectation_over_lambda(LambdaMoment::Product(pair))
                .unwrap();
            assert_close(agg.m1, e1, 1e-12);
            assert_close(agg.m2, e2, 1e-12);
            assert_close(agg.m12, e12, 1e-12);
        }
    }

    #[test]
    fn deterministic_requires_exact_units() {
        let lambda = LambdaSpace::new(vec![LambdaPoint { id: "l0".into(), weight: 1.0 }]).unwrap();
        let err = HvModel::deterministic(
            lambda,
            dirs(&[0.0]),
            dirs(&[0.0]),
            vec![vec![0.999]],
            vec![vec![1.0]],
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidModel(_)));
    }

    #[test]
    fn lambda_space_validation() {
        assert!(LambdaSpace::new(vec![]).is_err());
        assert!(LambdaSpace::new(vec![
            LambdaPoint { id: "x".into(), weight: 0.5 },
            LambdaPoint { id: "x".into(), weight: 0.5 },
        ])
        .is_err());
        assert!(LambdaSpace::new(vec![LambdaPoint { id: "x".into(), weight: 0.9 }]).is_err());
        // large uniform spaces pass the tight sum check
        assert!(LambdaSpace::uniform(10_000).is_ok());
    }

    #[test]
    fn model_json_round_trip_wings() {
        let model = build_sign_model(8, &dirs(&[0.0, FRAC_PI_2]), &dirs(&[FRAC_PI_4])).unwrap();
        let text = model.to_json();
        let back = HvModel::from_json(&text).unwrap();
        assert_eq!(back.kind(), ModelKind::Deterministic);
        for (_, _, pair) in model.declared_pairs() {
            for (r, q) in CELL_ORDER {
                assert_close(
                    back.model_quantum_joint(pair, r, q).unwrap(),
                    model.model_quantum_joint(pair, r, q).unwrap(),
                    1e-12,
                );
            }
        }
    }

    #[test]
    fn model_json_round_trip_joint() {
        let model =
            build_singlet_outcome_dependent(&dirs(&[0.0]), &dirs(&[FRAC_PI_3, FRAC_PI_2])).unwrap();
        let back = HvModel::from_json(&model.to_json()).unwrap();
        for (_, _, pair) in model.declared_pairs() {
            for (r, q) in CELL_ORDER {
                assert_close(
                    back.model_quantum_joint(pair, r, q).unwrap(),
                    model.model_quantum_joint(pair, r, q).unwrap(),
                    1e-12,
                );
            }
        }
    }

    #[test]
    fn model_file_schema_rejections() {
        // unknown top-level field
        let bad = r#"{"kind":"factorizable","lambda":[{"id":"l0","weight":1.0}],
            "settings":{"wing1":[0.0],"wing2":[0.0]},
            "wings":{"wing1":{"l0":{"0.00000000000e0":0.0}},"wing2":{"l0":{"0.00000000000e0":0.0}}},
            "extra":1}"#;
        assert!(matches!(HvModel::from_json(bad), Err(Error::FileFormat(_))));

        // weights off by more than the load tolerance
        let bad = r#"{"kind":"factorizable","lambda":[{"id":"l0","weight":0.9}],
            "settings":{"wing1":[0.0],"wing2":[0.0]},
            "wings":{"wing1":{"l0":{"0.00000000000e0":0.0}},"wing2":{"l0":{"0.00000000000e0":0.0}}}}"#;
        assert!(matches!(HvModel::from_json(bad), Err(Error::FileFormat(_))));

        // undeclared angle key
        let bad = r#"{"kind":"factorizable","lambda":[{"id":"l0","weight":1.0}],
            "settings":{"wing1":[0.0],"wing2":[0.0]},
            "wings":{"wing1":{"l0":{"1.00000000000e0":0.0}},"wing2":{"l0":{"0.00000000000e0":0.0}}}}"#;
        assert!(matches!(HvModel::from_json(bad), Err(Error::FileFormat(_))));

        // wings-kind with a joint table
        let bad = r#"{"kind":"deterministic","lambda":[{"id":"l0","weight":1.0}],
            "settings":{"wing1":[0.0],"wing2":[0.0]},
            "wings":{"wing1":{"l0":{"0.00000000000e0":1.0}},"wing2":{"l0":{"0.00000000000e0":1.0}}},
            "joint":{}}"#;
        assert!(matches!(HvModel::from_json(bad), Err(Error::FileFormat(_))));
    }

    #[test]
    fn weights_within_load_tolerance_are_renormalized() {
        let text = r#"{"kind":"factorizable",
            "lambda":[{"id":"a","weight":0.5000000001},{"id":"b","weight":0.5}],
            "settings":{"wing1":[0.0],"wing2":[0.0]},
            "wings":{"wing1":{"a":{"0.00000000000e0":0.0},"b":{"0.00000000000e0":0.0}},
                     "wing2":{"a":{"0.00000000000e0":0.0},"b":{"0.00000000000e0":0.0}}}}"#;
        let m = HvModel::from_json(text).unwrap();
        let sum = kahan_sum(m.lambda_space().points().iter().map(|p| p.weight));
        assert_close(sum, 1.0, 1e-12);
    }

    #[test]
    fn angle_key_has_twelve_significant_digits() {
        assert_eq!(angle_key(0.0), "0.00000000000e0");
        assert_eq!(angle_key(FRAC_PI_4), "7.85398163397e-1");
        let parsed: f64 = angle_key(FRAC_PI_4).parse().unwrap();
        assert!((parsed - FRAC_PI_4).abs() < 1e-11);
    }
}
