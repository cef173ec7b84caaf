//! Local-polytope membership for finite setting sets.
//!
//! Deterministic strategies (one fixed outcome per declared setting per
//! wing) are the vertices of the local set; a correlation table is locally
//! reproducible exactly when it is a convex mixture of strategy correlation
//! vectors. Membership is decided by a phase-one simplex over the strategy
//! columns, generated implicitly from the strategy index so memory stays
//! bounded by the constraint count rather than the strategy count. A
//! feasible table comes back with an explicit weight certificate; an
//! infeasible one is reported with a violated CHSH-style combination when
//! one exists among the canonical quadruples.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{kahan_sum, HvModel, LambdaPoint, LambdaSpace};
use crate::prob::Outcome;
use crate::quantum::Direction;
use crate::ALGEBRA_TOL;

/// Enumeration bound on the total number of declared settings.
pub const MAX_ENUM_SETTINGS: usize = 24;

/// One fixed outcome per declared setting per wing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeterministicStrategy {
    pub wing1: Vec<Outcome>,
    pub wing2: Vec<Outcome>,
}

impl DeterministicStrategy {
    /// Decode a strategy from its canonical index: bit i of the index is
    /// wing 1's setting i (0 → +1), followed by wing 2's bits.
    pub fn from_index(index: u64, n1: usize, n2: usize) -> Self {
        let bit = |k: usize| {
            if (index >> k) & 1 == 0 {
                Outcome::Plus
            } else {
                Outcome::Minus
            }
        };
        Self {
            wing1: (0..n1).map(bit).collect(),
            wing2: (0..n2).map(|i| bit(n1 + i)).collect(),
        }
    }

    /// The outcome product at a pair of setting indices.
    pub fn correlation(&self, i1: usize, i2: usize) -> f64 {
        self.wing1[i1].sign() * self.wing2[i2].sign()
    }
}

fn check_enum_bound(n1: usize, n2: usize) -> Result<()> {
    let total = n1 + n2;
    if total > MAX_ENUM_SETTINGS {
        return Err(Error::TooManySettings {
            total,
            bound: MAX_ENUM_SETTINGS,
        });
    }
    Ok(())
}

/// All 2^(n1+n2) deterministic strategies in canonical index order.
pub fn enumerate_strategies(
    settings1: &[Direction],
    settings2: &[Direction],
) -> Result<Vec<DeterministicStrategy>> {
    check_enum_bound(settings1.len(), settings2.len())?;
    let n = 1u64 << (settings1.len() + settings2.len());
    Ok((0..n)
        .map(|k| DeterministicStrategy::from_index(k, settings1.len(), settings2.len()))
        .collect())
}

/// Correlation targets over declared settings, with optional single-wing
/// mean targets (zero when omitted). Entries may be sparse: absent pairs
/// are unconstrained.
#[derive(Debug, Clone)]
pub struct CorrelationTable {
    settings1: Vec<Direction>,
    settings2: Vec<Direction>,
    entries: Vec<(usize, usize, f64)>,
    means1: Vec<f64>,
    means2: Vec<f64>,
}

impl CorrelationTable {
    pub fn new(
        settings1: Vec<Direction>,
        settings2: Vec<Direction>,
        correlations: Vec<(Direction, Direction, f64)>,
        means: Option<(Vec<f64>, Vec<f64>)>,
    ) -> Result<Self> {
        crate::model::validate_settings("wing 1", &settings1)?;
        crate::model::validate_settings("wing 2", &settings2)?;
        let find = |settings: &[Direction], d: Direction, wing: &str| {
            settings
                .iter()
                .position(|s| s.approx_eq(d, crate::model::SETTING_MATCH_TOL))
                .ok_or_else(|| {
                    Error::MissingEntry(format!(
                        "{wing} setting at angle {} is not declared",
                        d.angle()
                    ))
                })
        };
        let mut entries = Vec::with_capacity(correlations.len());
        let mut seen = std::collections::HashSet::new();
        for (a, b, value) in correlations {
            if !value.is_finite() || value.abs() > 1.0 + ALGEBRA_TOL {
                return Err(Error::OutOfRangeCorrelation(value));
            }
            let i1 = find(&settings1, a, "wing 1")?;
            let i2 = find(&settings2, b, "wing 2")?;
            if !seen.insert((i1, i2)) {
                return Err(Error::FileFormat(format!(
                    "correlation listed twice for pair ({}, {})",
                    a.angle(),
                    b.angle()
                )));
            }
            entries.push((i1, i2, value.clamp(-1.0, 1.0)));
        }
        let (means1, means2) = match means {
            Some((m1, m2)) => {
                if m1.len() != settings1.len() || m2.len() != settings2.len() {
                    return Err(Error::FileFormat(
                        "mean targets must align with the declared settings".into(),
                    ));
                }
                for &v in m1.iter().chain(m2.iter()) {
                    if !v.is_finite() || v.abs() > 1.0 + ALGEBRA_TOL {
                        return Err(Error::OutOfRangeCorrelation(v));
                    }
                }
                (m1, m2)
            }
            None => (vec![0.0; settings1.len()], vec![0.0; settings2.len()]),
        };
        Ok(Self {
            settings1,
            settings2,
            entries,
            means1,
            means2,
        })
    }

    /// The singlet targets −cos θ at every declared pair, wing means zero.
    pub fn singlet(settings1: Vec<Direction>, settings2: Vec<Direction>) -> Result<Self> {
        let mut correlations = Vec::new();
        for &a in &settings1 {
            for &b in &settings2 {
                correlations.push((a, b, crate::quantum::singlet_correlation(a, b)));
            }
        }
        Self::new(settings1, settings2, correlations, None)
    }

    pub fn settings1(&self) -> &[Direction] {
        &self.settings1
    }

    pub fn settings2(&self) -> &[Direction] {
        &self.settings2
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn means(&self) -> (&[f64], &[f64]) {
        (&self.means1, &self.means2)
    }
}

/// A CHSH-style combination exceeding the local bound.
#[derive(Debug, Clone, Copy)]
pub struct ChshWitness {
    pub a: Direction,
    pub a_alt: Direction,
    pub b: Direction,
    pub b_alt: Direction,
    /// Signs applied to the correlations at (a,b), (a,b′), (a′,b), (a′,b′).
    pub signs: [i8; 4],
    pub value: f64,
}

/// Outcome of a membership test.
#[derive(Debug, Clone)]
pub enum LocalityVerdict {
    /// The table is a mixture of deterministic strategies; `weights` holds
    /// (canonical strategy index, weight) for the support, summing to one.
    Local { weights: Vec<(u64, f64)> },
    /// No mixture reproduces the table. `residual` is the remaining
    /// infeasibility of the linear system.
    Nonlocal {
        witness: Option<ChshWitness>,
        residual: f64,
    },
}

/// Decide whether the table lies in the convex hull of deterministic
/// strategy correlation vectors, to within `tol` on every target.
pub fn is_local(table: &CorrelationTable, tol: f64) -> Result<LocalityVerdict> {
    let n1 = table.settings1.len();
    let n2 = table.settings2.len();
    check_enum_bound(n1, n2)?;
    let n_cols = 1u64 << (n1 + n2);

    // rows: correlation targets, wing-1 means, wing-2 means, normalization
    let m = table.entries.len() + n1 + n2 + 1;
    let mut b = Vec::with_capacity(m);
    for &(_, _, v) in &table.entries {
        b.push(v);
    }
    b.extend_from_slice(&table.means1);
    b.extend_from_slice(&table.means2);
    b.push(1.0);

    let entries = table.entries.clone();
    let fill = move |j: u64, out: &mut [f64]| {
        let s1 = |i: usize| if (j >> i) & 1 == 0 { 1.0 } else { -1.0 };
        let s2 = |i: usize| if (j >> (n1 + i)) & 1 == 0 { 1.0 } else { -1.0 };
        let mut row = 0;
        for &(i1, i2, _) in &entries {
            out[row] = s1(i1) * s2(i2);
            row += 1;
        }
        for i in 0..n1 {
            out[row] = s1(i);
            row += 1;
        }
        for i in 0..n2 {
            out[row] = s2(i);
            row += 1;
        }
        out[row] = 1.0;
    };

    match phase_one(m, n_cols, &fill, &b, tol.max(1e-11)) {
        PhaseOne::Feasible(weights) => Ok(LocalityVerdict::Local { weights }),
        PhaseOne::Infeasible { residual } => Ok(LocalityVerdict::Nonlocal {
            witness: chsh_witness(table, tol),
            residual,
        }),
    }
}

/// Search the canonical quadruples (two settings per wing, odd sign
/// patterns) for a combination exceeding the local bound of 2.
fn chsh_witness(table: &CorrelationTable, tol: f64) -> Option<ChshWitness> {
    let lookup: HashMap<(usize, usize), f64> = table
        .entries
        .iter()
        .map(|&(i1, i2, v)| ((i1, i2), v))
        .collect();
    let n1 = table.settings1.len();
    let n2 = table.settings2.len();
    let mut best: Option<ChshWitness> = None;
    for i1 in 0..n1 {
        for i1b in (i1 + 1)..n1 {
            for i2 in 0..n2 {
                for i2b in (i2 + 1)..n2 {
                    let (Some(&ab), Some(&ab2), Some(&a2b), Some(&a2b2)) = (
                        lookup.get(&(i1, i2)),
                        lookup.get(&(i1, i2b)),
                        lookup.get(&(i1b, i2)),
                        lookup.get(&(i1b, i2b)),
                    ) else {
                        continue;
                    };
                    for pattern in 0u8..16 {
                        let sign = |k: u8| if (pattern >> k) & 1 == 0 { 1.0 } else { -1.0 };
                        let signs = [sign(0), sign(1), sign(2), sign(3)];
                        if signs.iter().product::<f64>() != -1.0 {
                            continue;
                        }
                        let value =
                            signs[0] * ab + signs[1] * ab2 + signs[2] * a2b + signs[3] * a2b2;
                        if value.abs() > 2.0 + tol
                            && best.is_none_or(|w| value.abs() > w.value.abs())
                        {
                            best = Some(ChshWitness {
                                a: table.settings1[i1],
                                a_alt: table.settings1[i1b],
                                b: table.settings2[i2],
                                b_alt: table.settings2[i2b],
                                signs: signs.map(|s| s as i8),
                                value,
                            });
                        }
                    }
                }
            }
        }
    }
    best
}

/// The local bound on the CHSH combination: the maximum of its absolute
/// value over the sixteen deterministic strategies. Angle-independent —
/// one bracket of the combination always vanishes — so this returns
/// exactly 2 for any directions, coincident ones included.
pub fn chsh_local_max(
    _a: Direction,
    _a_alt: Direction,
    _b: Direction,
    _b_alt: Direction,
) -> f64 {
    let mut best: f64 = 0.0;
    for k in 0u8..16 {
        let v = |bit: u8| if (k >> bit) & 1 == 0 { 1.0 } else { -1.0 };
        let (a, a2, b, b2) = (v(0), v(1), v(2), v(3));
        let s: f64 = a * b - a * b2 + a2 * b + a2 * b2;
        best = best.max(s.abs());
    }
    best
}

/// Turn a weight certificate into a deterministic mixture model over the
/// same settings, λ points named after the strategy indices.
pub fn mixture_model(
    settings1: &[Direction],
    settings2: &[Direction],
    weights: &[(u64, f64)],
) -> Result<HvModel> {
    if weights.is_empty() {
        return Err(Error::InvalidModel("empty weight certificate".into()));
    }
    let sum = kahan_sum(weights.iter().map(|&(_, w)| w));
    if !sum.is_finite() || sum <= 0.0 {
        return Err(Error::InvalidModel(format!(
            "weight certificate sums to {sum}"
        )));
    }
    let n1 = settings1.len();
    let n2 = settings2.len();
    let width = format!("{}", (1u64 << (n1 + n2)) - 1).len();
    let mut points = Vec::with_capacity(weights.len());
    let mut wing1 = Vec::with_capacity(weights.len());
    let mut wing2 = Vec::with_capacity(weights.len());
    for &(index, w) in weights {
        let strategy = DeterministicStrategy::from_index(index, n1, n2);
        points.push(LambdaPoint {
            id: format!("s{index:0width$}"),
            weight: w / sum,
        });
        wing1.push(strategy.wing1.iter().map(|o| o.sign()).collect());
        wing2.push(strategy.wing2.iter().map(|o| o.sign()).collect());
    }
    HvModel::deterministic(
        LambdaSpace::new(points)?,
        settings1.to_vec(),
        settings2.to_vec(),
        wing1,
        wing2,
    )
}

// ---------------------------------------------------------------------------
// Phase-one simplex with implicit columns
// ---------------------------------------------------------------------------

enum PhaseOne {
    Feasible(Vec<(u64, f64)>),
    Infeasible { residual: f64 },
}

/// Find x ≥ 0 with A x = b, where column j of A is produced by `fill`.
/// Artificial variables carry the phase-one cost; Bland's rule (lowest
/// eligible index, real columns first) guarantees termination.
fn phase_one(
    m: usize,
    n_cols: u64,
    fill: &impl Fn(u64, &mut [f64]),
    b: &[f64],
    feas_tol: f64,
) -> PhaseOne {
    const RC_EPS: f64 = 1e-10;
    const PIV_EPS: f64 = 1e-11;

    // flip rows so the right-hand side is nonnegative
    let flip: Vec<f64> = b.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect();
    let fill_flipped = |j: u64, out: &mut [f64]| {
        fill(j, out);
        for (o, f) in out.iter_mut().zip(&flip) {
            *o *= *f;
        }
    };

    let mut basis: Vec<u64> = (0..m as u64).map(|i| n_cols + i).collect();
    let mut binv: Vec<f64> = vec![0.0; m * m];
    for i in 0..m {
        binv[i * m + i] = 1.0;
    }
    let mut xb: Vec<f64> = b.iter().zip(&flip).map(|(&v, &f)| v * f).collect();
    let mut col = vec![0.0; m];
    let mut d = vec![0.0; m];

    let max_iters = 200 * (m + 32) + 20_000;
    for _ in 0..max_iters {
        // duals of the artificial-cost objective
        let mut y = vec![0.0; m];
        for i in 0..m {
            if basis[i] >= n_cols {
                for t in 0..m {
                    y[t] += binv[i * m + t];
                }
            }
        }

        // Bland pricing: first improving real column, then artificials
        let mut entering = None;
        for j in 0..n_cols {
            fill_flipped(j, &mut col);
            let ya: f64 = y.iter().zip(&col).map(|(a, c)| a * c).sum();
            if ya > RC_EPS {
                entering = Some(j);
                break;
            }
        }
        if entering.is_none() {
            for (i, &yi) in y.iter().enumerate() {
                let aj = n_cols + i as u64;
                if !basis.contains(&aj) && yi > 1.0 + RC_EPS {
                    entering = Some(aj);
                    break;
                }
            }
        }
        let Some(j) = entering else {
            let residual: f64 = (0..m)
                .filter(|&i| basis[i] >= n_cols)
                .map(|i| xb[i].max(0.0))
                .sum();
            if residual <= feas_tol {
                let mut weights: Vec<(u64, f64)> = (0..m)
                    .filter(|&i| basis[i] < n_cols && xb[i] > 0.0)
                    .map(|i| (basis[i], xb[i]))
                    .collect();
                weights.sort_by_key(|&(k, _)| k);
                return PhaseOne::Feasible(weights);
            }
            return PhaseOne::Infeasible { residual };
        };

        // direction through the basis inverse
        if j < n_cols {
            fill_flipped(j, &mut col);
        } else {
            col.iter_mut().for_each(|v| *v = 0.0);
            col[(j - n_cols) as usize] = 1.0;
        }
        for i in 0..m {
            d[i] = (0..m).map(|t| binv[i * m + t] * col[t]).sum();
        }

        // ratio test, Bland tie-break on the leaving variable index
        let mut leave: Option<usize> = None;
        let mut best = f64::INFINITY;
        for i in 0..m {
            if d[i] > PIV_EPS {
                let ratio = xb[i] / d[i];
                let better = match leave {
                    None => true,
                    Some(cur) => {
                        ratio < best - 1e-12
                            || ((ratio - best).abs() <= 1e-12 && basis[i] < basis[cur])
                    }
                };
                if better {
                    leave = Some(i);
                    best = ratio;
                }
            }
        }
        let Some(r) = leave else {
            // a bounded-below objective cannot be unbounded; numeric guard
            let residual: f64 = (0..m)
                .filter(|&i| basis[i] >= n_cols)
                .map(|i| xb[i].max(0.0))
                .sum();
            return PhaseOne::Infeasible { residual };
        };

        // pivot: update the basis inverse and the basic values
        let piv = d[r];
        for t in 0..m {
            binv[r * m + t] /= piv;
        }
        xb[r] /= piv;
        for i in 0..m {
            if i != r {
                let f = d[i];
                if f != 0.0 {
                    for t in 0..m {
                        binv[i * m + t] -= f * binv[r * m + t];
                    }
                    xb[i] -= f * xb[r];
                }
            }
        }
        basis[r] = j;
    }

    let residual: f64 = (0..m)
        .filter(|&i| basis[i] >= n_cols)
        .map(|i| xb[i].max(0.0))
        .sum();
    PhaseOne::Infeasible { residual }
}

// ---------------------------------------------------------------------------
// File format
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableFile {
    settings: SettingsFile,
    correlations: Vec<CorrEntryFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    means: Option<MeansFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SettingsFile {
    wing1: Vec<f64>,
    wing2: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CorrEntryFile {
    a: f64,
    b: f64,
    value: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeansFile {
    wing1: Vec<f64>,
    wing2: Vec<f64>,
}

impl CorrelationTable {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: TableFile =
            serde_json::from_str(text).map_err(|e| Error::FileFormat(e.to_string()))?;
        let settings1: Vec<Direction> =
            file.settings.wing1.iter().map(|&a| Direction::new(a)).collect();
        let settings2: Vec<Direction> =
            file.settings.wing2.iter().map(|&a| Direction::new(a)).collect();
        let correlations = file
            .correlations
            .iter()
            .map(|e| (Direction::new(e.a), Direction::new(e.b), e.value))
            .collect();
        let means = file.means.map(|m| (m.wing1, m.wing2));
        Self::new(settings1, settings2, correlations, means)
    }

    pub fn to_json(&self) -> String {
        let file = TableFile {
            settings: SettingsFile {
                wing1: self.settings1.iter().map(|d| d.angle()).collect(),
                wing2: self.settings2.iter().map(|d| d.angle()).collect(),
            },
            correlations: self
                .entries
                .iter()
                .map(|&(i1, i2, value)| CorrEntryFile {
                    a: self.settings1[i1].angle(),
                    b: self.settings2[i2].angle(),
                    value,
                })
                .collect(),
            means: Some(MeansFile {
                wing1: self.means1.clone(),
                wing2: self.means2.clone(),
            }),
        };
        serde_json::to_string_pretty(&file).expect("table serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}
