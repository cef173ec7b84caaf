//! Seeded Monte Carlo realization of a model or of the quantum
//! predictions, with calibrated statistical comparison.
//!
//! Reproducibility contract (bit-exact across runs and worker counts):
//!
//! * Generator: ChaCha with 8 rounds, seeded from the 64-bit config seed.
//! * Trials are split into fixed chunks of [`TRIAL_CHUNK`]; chunk `c` of
//!   setting `s` draws from stream `(s << 32) | c` of the seeded
//!   generator, so the stream layout is independent of how chunks are
//!   scheduled across workers.
//! * Uniform variates are `(next_u64() >> 11) · 2⁻⁵³`, half-open [0, 1).
//! * λ is drawn by cumulative search over the weight prefix sums; outcome
//!   draws consume, per trial, two uniforms for wings-kind models (one per
//!   wing, compared against the probability of +1) or one uniform walked
//!   through the four-cell distribution in canonical cell order for joint
//!   tables and the quantum source.
//!
//! Merging chunk counts is integer addition, so any worker partition of
//! the chunk list yields the same table.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;

use crate::audit::{self, AuditReport, Witness};
use crate::error::{Error, Result};
use crate::model::{angle_key, HvModel, ModelKind};
use crate::prob::{Outcome, CELL_ORDER};
use crate::quantum::{self, SettingPair};

/// Fixed trial-chunk size for worker-independent streams.
pub const TRIAL_CHUNK: u64 = 1 << 16;

/// What to simulate: identical configs produce bit-identical tables.
#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub seed: u64,
    /// Trials per setting pair.
    pub trials: u64,
    pub settings: Vec<SettingPair>,
}

/// The sampled process.
#[derive(Clone, Copy)]
pub enum Source<'a> {
    Model(&'a HvModel),
    Quantum,
}

/// Per-setting outcome counts, cells in canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalTable {
    settings: Vec<(f64, f64)>,
    counts: Vec<[u64; 4]>,
    trials: u64,
}

impl EmpiricalTable {
    fn new(settings: &[SettingPair], counts: Vec<[u64; 4]>, trials: u64) -> Self {
        Self {
            settings: settings.iter().map(|s| (s.a().angle(), s.b().angle())).collect(),
            counts,
            trials,
        }
    }

    pub fn n_settings(&self) -> usize {
        self.settings.len()
    }

    pub fn setting(&self, ix: usize) -> SettingPair {
        SettingPair::from_angles(self.settings[ix].0, self.settings[ix].1)
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }

    pub fn count(&self, ix: usize, r: Outcome, q: Outcome) -> u64 {
        let cell = CELL_ORDER
            .iter()
            .position(|&(cr, cq)| cr == r && cq == q)
            .expect("canonical cell");
        self.counts[ix][cell]
    }

    pub fn frequency(&self, ix: usize, r: Outcome, q: Outcome) -> f64 {
        self.count(ix, r, q) as f64 / self.trials as f64
    }

    /// Empirical product mean Σ rq·p̂ at a setting.
    pub fn product_moment(&self, ix: usize) -> f64 {
        CELL_ORDER
            .iter()
            .enumerate()
            .map(|(cell, &(r, q))| {
                r.sign() * q.sign() * self.counts[ix][cell] as f64 / self.trials as f64
            })
            .sum()
    }

    /// CSV with columns (a, b, r, q, count, trials); angles rendered at 12
    /// significant digits, rows in setting then canonical cell order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("a,b,r,q,count,trials\n");
        for (ix, &(a, b)) in self.settings.iter().enumerate() {
            for (cell, &(r, q)) in CELL_ORDER.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    angle_key(a),
                    angle_key(b),
                    r,
                    q,
                    self.counts[ix][cell],
                    self.trials
                ));
            }
        }
        out
    }
}

/// Precomputed per-setting sampling plan.
enum Plan {
    Wings {
        lambda_cdf: Vec<f64>,
        p1_plus: Vec<f64>,
        p2_plus: Vec<f64>,
    },
    Cells {
        lambda_cdf: Vec<f64>,
        cdf: Vec<[f64; 4]>,
    },
    Quantum {
        cdf: [f64; 4],
    },
}

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn weight_cdf(model: &HvModel) -> Vec<f64> {
    let mut acc = 0.0;
    model
        .lambda_space()
        .points()
        .iter()
        .map(|p| {
            acc += p.weight;
            acc
        })
        .collect()
}

fn cell_cdf(cells: [f64; 4]) -> [f64; 4] {
    let mut acc = 0.0;
    cells.map(|c| {
        acc += c;
        acc
    })
}

fn pick_index(cdf: &[f64], u: f64) -> usize {
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

fn pick_cell(cdf: &[f64; 4], u: f64) -> usize {
    for (i, &c) in cdf.iter().enumerate() {
        if u < c {
            return i;
        }
    }
    3
}

fn build_plan(source: Source<'_>, pair: SettingPair) -> Result<Plan> {
    match source {
        Source::Quantum => {
            let mut cells = [0.0; 4];
            for (i, &(r, q)) in CELL_ORDER.iter().enumerate() {
                cells[i] = quantum::singlet_joint(pair, r, q);
            }
            Ok(Plan::Quantum { cdf: cell_cdf(cells) })
        }
        Source::Model(model) => {
            let (i1, i2) = model.resolve_pair(pair)?;
            let lambda_cdf = weight_cdf(model);
            match model.kind() {
                ModelKind::Factorizable | ModelKind::Deterministic => {
                    let n = model.lambda_space().len();
                    let mut p1_plus = Vec::with_capacity(n);
                    let mut p2_plus = Vec::with_capacity(n);
                    for l in 0..n {
                        let e1 = model.wing_mean_ix(crate::quantum::Wing::One, l, i1)?;
                        let e2 = model.wing_mean_ix(crate::quantum::Wing::Two, l, i2)?;
                        p1_plus.push(0.5 * (1.0 + e1));
                        p2_plus.push(0.5 * (1.0 + e2));
                    }
                    Ok(Plan::Wings {
                        lambda_cdf,
                        p1_plus,
                        p2_plus,
                    })
                }
                ModelKind::OutcomeDependent => {
                    let n = model.lambda_space().len();
                    let cdf = (0..n)
                        .map(|l| cell_cdf(model.per_lambda_joint_ix(l, i1, i2).cells()))
                        .collect();
                    Ok(Plan::Cells { lambda_cdf, cdf })
                }
            }
        }
    }
}

fn chunk_rng(seed: u64, setting: usize, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((setting as u64) << 32) | chunk);
    rng
}

fn sample_chunk(plan: &Plan, rng: &mut ChaCha8Rng, trials: u64) -> [u64; 4] {
    let mut counts = [0u64; 4];
    match plan {
        Plan::Quantum { cdf } => {
            for _ in 0..trials {
                counts[pick_cell(cdf, uniform(rng))] += 1;
            }
        }
        Plan::Cells { lambda_cdf, cdf } => {
            for _ in 0..trials {
                let l = pick_index(lambda_cdf, uniform(rng));
                counts[pick_cell(&cdf[l], uniform(rng))] += 1;
            }
        }
        Plan::Wings {
            lambda_cdf,
            p1_plus,
            p2_plus,
        } => {
            for _ in 0..trials {
                let l = pick_index(lambda_cdf, uniform(rng));
                let r_minus = uniform(rng) >= p1_plus[l];
                let q_minus = uniform(rng) >= p2_plus[l];
                counts[(r_minus as usize) * 2 + q_minus as usize] += 1;
            }
        }
    }
    counts
}

fn merge(mut x: [u64; 4], y: [u64; 4]) -> [u64; 4] {
    for i in 0..4 {
        x[i] += y[i];
    }
    x
}

/// Run the simulation. `workers` = 0 uses the ambient thread pool; any
/// positive count runs on a dedicated pool of that size. The resulting
/// table does not depend on the worker count.
pub fn simulate(config: &SimulationConfig, source: Source<'_>, workers: usize) -> Result<EmpiricalTable> {
    if config.trials == 0 {
        return Err(Error::InvalidConfig("trials must be at least 1".into()));
    }
    if config.trials >= 1u64 << 48 {
        return Err(Error::InvalidConfig(
            "trials must stay below 2^48 for the stream derivation".into(),
        ));
    }
    if config.settings.is_empty() {
        return Err(Error::InvalidConfig("no settings requested".into()));
    }
    if config.settings.len() >= u32::MAX as usize {
        return Err(Error::InvalidConfig("too many settings".into()));
    }
    let plans = config
        .settings
        .iter()
        .map(|&pair| build_plan(source, pair))
        .collect::<Result<Vec<_>>>()?;

    let trials = config.trials;
    let seed = config.seed;
    let n_chunks = trials.div_ceil(TRIAL_CHUNK);
    let run = || -> Vec<[u64; 4]> {
        plans
            .iter()
            .enumerate()
            .map(|(si, plan)| {
                (0..n_chunks)
                    .into_par_iter()
                    .map(|c| {
                        let lo = c * TRIAL_CHUNK;
                        let hi = (lo + TRIAL_CHUNK).min(trials);
                        let mut rng = chunk_rng(seed, si, c);
                        sample_chunk(plan, &mut rng, hi - lo)
                    })
                    .reduce(|| [0u64; 4], merge)
            })
            .collect()
    };

    let counts = if workers == 0 {
        run()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Parallelism(e.to_string()))?;
        pool.install(run)
    };
    Ok(EmpiricalTable::new(&config.settings, counts, trials))
}

/// Flag cells where the empirical frequency deviates from the analytic
/// probability by more than z standard binomial errors. Zero-variance
/// cells (p = 0 or 1) must match exactly; a mismatch there is reported
/// with the finite residual z + misplaced-count so reports stay
/// serializable.
pub fn compare(
    empirical: &EmpiricalTable,
    analytic: impl Fn(SettingPair, Outcome, Outcome) -> f64,
    z: f64,
) -> Result<AuditReport> {
    if empirical.trials == 0 || empirical.settings.is_empty() {
        return Err(Error::NoData);
    }
    let n = empirical.trials as f64;
    let mut cells = Vec::with_capacity(empirical.settings.len() * 4);
    for ix in 0..empirical.n_settings() {
        let pair = empirical.setting(ix);
        for (r, q) in CELL_ORDER {
            let p = analytic(pair, r, q);
            if !(0.0..=1.0 + crate::ALGEBRA_TOL).contains(&p) {
                return Err(Error::InvalidDistribution(format!(
                    "analytic probability {p} at ({r}, {q})"
                )));
            }
            let p = p.min(1.0);
            let count = empirical.count(ix, r, q);
            let p_hat = count as f64 / n;
            let sigma = (p * (1.0 - p) / n).sqrt();
            let residual = if sigma > 0.0 {
                (p_hat - p).abs() / sigma
            } else {
                let expected = if p >= 1.0 { empirical.trials } else { 0 };
                let misplaced = count.abs_diff(expected);
                if misplaced == 0 {
                    0.0
                } else {
                    z + misplaced as f64
                }
            };
            cells.push((
                residual,
                Witness {
                    lambda: "*".into(),
                    a: Some(pair.a().angle()),
                    b: Some(pair.b().angle()),
                    r: Some(r.value()),
                    q: Some(q.value()),
                    lhs: p_hat,
                    rhs: p,
                },
            ));
        }
    }
    Ok(audit::empirical_report(z, cells))
}
