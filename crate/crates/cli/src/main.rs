//! Batch front-end: oracle queries, model audits, polytope membership, and
//! seeded simulations. Machine-readable payloads (JSON or CSV) go to
//! standard output or `--out`; diagnostics go to standard error. Exit code
//! 0 means every requested check held (or was not applicable), 1 means at
//! least one check failed or a table was nonlocal, 2 means the inputs were
//! unusable.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use bell_lab::audit::{self, AuditReport, Condition};
use bell_lab::model::{build_sign_model, build_singlet_outcome_dependent, HvModel, ModelKind};
use bell_lab::polytope::{is_local, CorrelationTable, DeterministicStrategy, LocalityVerdict};
use bell_lab::prob::Outcome;
use bell_lab::quantum::{self, Direction, SettingPair, Wing};
use bell_lab::sim::{self, SimulationConfig, Source};

#[derive(Parser)]
#[command(
    name = "bell-lab",
    version,
    about = "Singlet correlations, hidden-variable model audits, local-polytope membership, and seeded simulations"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,

    /// Tolerance for audits and feasibility checks
    #[arg(long, global = true, default_value_t = bell_lab::DEFAULT_CHECK_TOL)]
    tol: f64,

    /// Override the scenario seed
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Write the primary payload to this file instead of standard output
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Closed-form singlet predictions for one or more setting gaps
    Quantum(QuantumArgs),
    /// Run locality checks against a model file or built-in fixture
    Audit(AuditArgs),
    /// Decide local-polytope membership of a correlation table
    Polytope(PolytopeArgs),
    /// Monte Carlo simulation driven by a scenario file
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct QuantumArgs {
    /// Angle(s) between the two settings; radians unless --degrees
    #[arg(long = "theta", required = true, num_args = 1.., allow_negative_numbers = true)]
    theta: Vec<f64>,

    /// Interpret angles as degrees
    #[arg(long)]
    degrees: bool,

    /// Include the conditional table
    #[arg(long)]
    conditional: bool,
}

#[derive(Args)]
struct AuditArgs {
    /// Model file (JSON)
    #[arg(long, conflicts_with = "fixture")]
    model: Option<PathBuf>,

    /// Built-in fixture: sign-model:<n> or singlet-od
    #[arg(long)]
    fixture: Option<String>,

    /// Check to run (repeatable); defaults to every applicable check
    #[arg(long = "check", value_name = "NAME")]
    checks: Vec<String>,

    /// Assert the model claims conditional identification in both
    /// measurement orderings (gates zero-wing-means)
    #[arg(long)]
    claims_both_orderings: bool,

    /// Wing-2 angles for fixtures, comma-separated radians
    #[arg(long)]
    angles: Option<String>,
}

#[derive(Args)]
struct PolytopeArgs {
    /// Correlation table file (JSON)
    #[arg(long)]
    table: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario file (JSON)
    #[arg(long)]
    scenario: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.cmd {
        Cmd::Quantum(ref args) => cmd_quantum(args, &cli.out),
        Cmd::Audit(ref args) => cmd_audit(args, cli.tol, &cli.out),
        Cmd::Polytope(ref args) => cmd_polytope(args, cli.tol, &cli.out),
        Cmd::Simulate(ref args) => cmd_simulate(args, cli.seed, &cli.out),
    }
}

fn write_payload(out: &Option<PathBuf>, payload: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, payload)
            .with_context(|| format!("writing {}", path.display()))?,
        None => {
            print!("{payload}");
            std::io::stdout().flush()?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// quantum
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct CellsOut {
    pp: f64,
    pm: f64,
    mp: f64,
    mm: f64,
}

impl CellsOut {
    fn from_fn(f: impl Fn(Outcome, Outcome) -> f64) -> Self {
        Self {
            pp: f(Outcome::Plus, Outcome::Plus),
            pm: f(Outcome::Plus, Outcome::Minus),
            mp: f(Outcome::Minus, Outcome::Plus),
            mm: f(Outcome::Minus, Outcome::Minus),
        }
    }
}

#[derive(Serialize)]
struct MomentsOut {
    m1: f64,
    m2: f64,
    m12: f64,
}

#[derive(Serialize)]
struct QuantumEntry {
    theta: f64,
    moments: MomentsOut,
    joint: CellsOut,
    marginal: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    conditional: Option<CellsOut>,
}

#[derive(Serialize)]
struct QuantumOut {
    entries: Vec<QuantumEntry>,
}

fn cmd_quantum(args: &QuantumArgs, out: &Option<PathBuf>) -> Result<u8> {
    let mut entries = Vec::with_capacity(args.theta.len());
    for &raw in &args.theta {
        let requested = if args.degrees { raw.to_radians() } else { raw };
        if !requested.is_finite() {
            bail!("angle {raw} is not finite");
        }
        let pair = SettingPair::from_angles(0.0, requested);
        let theta = pair.theta();
        if (theta - requested).abs() > 1e-12 {
            eprintln!("warning: angle {requested} folded to setting gap {theta}");
        }
        let m = quantum::singlet_moments(pair);
        entries.push(QuantumEntry {
            theta,
            moments: MomentsOut {
                m1: m.m1,
                m2: m.m2,
                m12: m.m12,
            },
            joint: CellsOut::from_fn(|r, q| quantum::singlet_joint(pair, r, q)),
            marginal: quantum::singlet_marginal(Wing::One, Outcome::Plus),
            conditional: args
                .conditional
                .then(|| CellsOut::from_fn(|r, q| quantum::singlet_conditional(pair, r, q))),
        });
    }
    let payload = serde_json::to_string_pretty(&QuantumOut { entries })? + "\n";
    write_payload(out, &payload)?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// audit
// ---------------------------------------------------------------------------

fn parse_angle_list(list: &str) -> Result<Vec<Direction>> {
    list.split(',')
        .map(|tok| {
            let v: f64 = tok
                .trim()
                .parse()
                .with_context(|| format!("angle '{tok}'"))?;
            if !v.is_finite() {
                bail!("angle '{tok}' is not finite");
            }
            Ok(Direction::new(v))
        })
        .collect()
}

fn default_fixture_angles() -> Vec<Direction> {
    (0..8)
        .map(|k| Direction::new(std::f64::consts::PI * k as f64 / 7.0))
        .collect()
}

fn fixture_model(spec: &str, angles: &Option<String>) -> Result<HvModel> {
    let wing1 = vec![Direction::new(0.0)];
    let wing2 = match angles {
        Some(list) => parse_angle_list(list)?,
        None => default_fixture_angles(),
    };
    if let Some(rest) = spec.strip_prefix("sign-model:") {
        let n: usize = rest
            .parse()
            .with_context(|| format!("fixture '{spec}' needs sign-model:<n>"))?;
        Ok(build_sign_model(n, &wing1, &wing2)?)
    } else if spec == "singlet-od" {
        Ok(build_singlet_outcome_dependent(&wing1, &wing2)?)
    } else {
        bail!("unknown fixture '{spec}' (expected sign-model:<n> or singlet-od)");
    }
}

fn default_checks(kind: ModelKind) -> Vec<Condition> {
    let mut checks = vec![
        Condition::OutcomeIndependence,
        Condition::ParameterIndependence,
        Condition::BellLocality,
        Condition::FNormalization,
        Condition::FJointIdentity,
        Condition::FConditionalIdentification,
        Condition::ZeroWingMeans,
        Condition::QuantumReproduction,
    ];
    if kind == ModelKind::Deterministic {
        checks.push(Condition::DeterministicReduction);
    }
    checks
}

fn run_check(
    model: &HvModel,
    condition: Condition,
    claims_both_orderings: bool,
    tol: f64,
) -> Result<AuditReport> {
    Ok(match condition {
        Condition::OutcomeIndependence => audit::check_outcome_independence(model, tol),
        Condition::ParameterIndependence => audit::check_parameter_independence(model, tol),
        Condition::BellLocality => audit::check_bell_locality(model, tol),
        Condition::FNormalization => audit::check_f_normalization(model, tol),
        Condition::FJointIdentity => audit::check_f_joint_identity(model, tol),
        Condition::FConditionalIdentification => {
            audit::check_f_conditional_identification(model, tol)
        }
        Condition::ZeroWingMeans => {
            audit::check_zero_wing_means(model, claims_both_orderings, tol)
        }
        Condition::DeterministicReduction => audit::check_deterministic_reduction(model, tol)?,
        Condition::QuantumReproduction => audit::check_quantum_reproduction(model, tol),
        Condition::EmpiricalAgreement => {
            bail!("empirical-agreement is produced by simulate comparisons, not by audit")
        }
    })
}

fn cmd_audit(args: &AuditArgs, tol: f64, out: &Option<PathBuf>) -> Result<u8> {
    let model = match (&args.model, &args.fixture) {
        (Some(path), None) => {
            HvModel::load(path).with_context(|| format!("loading {}", path.display()))?
        }
        (None, Some(spec)) => fixture_model(spec, &args.angles)?,
        _ => bail!("exactly one of --model or --fixture is required"),
    };

    let checks: Vec<Condition> = if args.checks.is_empty() {
        default_checks(model.kind())
    } else {
        args.checks
            .iter()
            .map(|name| {
                Condition::from_name(name)
                    .ok_or_else(|| anyhow::anyhow!("unknown check '{name}'"))
            })
            .collect::<Result<_>>()?
    };

    let mut payload = String::new();
    let mut any_failed = false;
    for condition in checks {
        let report = run_check(&model, condition, args.claims_both_orderings, tol)?;
        any_failed |= !report.holds();
        payload.push_str(&report.to_json());
        payload.push('\n');
    }
    write_payload(out, &payload)?;
    Ok(if any_failed { 1 } else { 0 })
}

// ---------------------------------------------------------------------------
// polytope
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct WeightOut {
    index: u64,
    wing1: Vec<i8>,
    wing2: Vec<i8>,
    weight: f64,
}

#[derive(Serialize)]
struct WitnessOut {
    a: f64,
    a_alt: f64,
    b: f64,
    b_alt: f64,
    signs: [i8; 4],
    value: f64,
}

#[derive(Serialize)]
struct PolytopeOut {
    verdict: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<WeightOut>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    witness: Option<WitnessOut>,
    #[serde(skip_serializing_if = "Option::is_none")]
    residual: Option<f64>,
}

fn cmd_polytope(args: &PolytopeArgs, tol: f64, out: &Option<PathBuf>) -> Result<u8> {
    let table = CorrelationTable::load(&args.table)
        .with_context(|| format!("loading {}", args.table.display()))?;
    let n1 = table.settings1().len();
    let n2 = table.settings2().len();
    let (exit, doc) = match is_local(&table, tol)? {
        LocalityVerdict::Local { weights } => {
            let weights = weights
                .iter()
                .map(|&(index, weight)| {
                    let s = DeterministicStrategy::from_index(index, n1, n2);
                    WeightOut {
                        index,
                        wing1: s.wing1.iter().map(|o| o.value()).collect(),
                        wing2: s.wing2.iter().map(|o| o.value()).collect(),
                        weight,
                    }
                })
                .collect();
            (
                0u8,
                PolytopeOut {
                    verdict: "local",
                    weights: Some(weights),
                    witness: None,
                    residual: None,
                },
            )
        }
        LocalityVerdict::Nonlocal { witness, residual } => (
            1u8,
            PolytopeOut {
                verdict: "nonlocal",
                weights: None,
                witness: witness.map(|w| WitnessOut {
                    a: w.a.angle(),
                    a_alt: w.a_alt.angle(),
                    b: w.b.angle(),
                    b_alt: w.b_alt.angle(),
                    signs: w.signs,
                    value: w.value,
                }),
                residual: Some(residual),
            },
        ),
    };
    let payload = serde_json::to_string_pretty(&doc)? + "\n";
    write_payload(out, &payload)?;
    Ok(exit)
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Scenario {
    seed: u64,
    trials: u64,
    settings: Vec<PairIn>,
    source: SourceIn,
    #[serde(default)]
    compare: CompareIn,
    #[serde(default = "default_z")]
    z: f64,
    #[serde(default)]
    workers: usize,
}

fn default_z() -> f64 {
    4.0
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PairIn {
    a: f64,
    b: f64,
}

#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
enum SourceIn {
    Quantum,
    Model { path: PathBuf },
    Fixture { name: String, #[serde(default)] n: Option<usize> },
}

#[derive(Deserialize, Default, PartialEq, Clone, Copy)]
#[serde(rename_all = "lowercase")]
enum CompareIn {
    #[default]
    None,
    Model,
    Quantum,
    Uniform,
}

fn env_thread_cap() -> Result<usize> {
    match std::env::var("BELL_LAB_THREADS") {
        Ok(s) => s
            .trim()
            .parse()
            .with_context(|| format!("BELL_LAB_THREADS='{s}' is not a thread count")),
        Err(_) => Ok(0),
    }
}

fn resolve_workers(requested: usize, cap: usize) -> usize {
    match (requested, cap) {
        (0, cap) => cap,
        (w, 0) => w,
        (w, cap) => w.min(cap),
    }
}

fn dedupe_directions(angles: impl Iterator<Item = f64>) -> Vec<Direction> {
    let mut out: Vec<Direction> = Vec::new();
    for a in angles {
        let d = Direction::new(a);
        if !out.iter().any(|x| x.approx_eq(d, 1e-9)) {
            out.push(d);
        }
    }
    out
}

fn cmd_simulate(args: &SimulateArgs, seed_override: Option<u64>, out: &Option<PathBuf>) -> Result<u8> {
    let text = std::fs::read_to_string(&args.scenario)
        .with_context(|| format!("loading {}", args.scenario.display()))?;
    let scenario: Scenario = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", args.scenario.display()))?;
    if scenario.compare != CompareIn::None && out.is_none() {
        bail!("--out is required when the scenario requests a comparison, so standard output stays single-format");
    }

    let settings: Vec<SettingPair> = scenario
        .settings
        .iter()
        .map(|p| SettingPair::from_angles(p.a, p.b))
        .collect();
    if settings.is_empty() {
        bail!("scenario declares no settings");
    }

    let model: Option<HvModel> = match &scenario.source {
        SourceIn::Quantum => None,
        SourceIn::Model { path } => {
            Some(HvModel::load(path).with_context(|| format!("loading {}", path.display()))?)
        }
        SourceIn::Fixture { name, n } => {
            let wing1 = dedupe_directions(scenario.settings.iter().map(|p| p.a));
            let wing2 = dedupe_directions(scenario.settings.iter().map(|p| p.b));
            Some(match name.as_str() {
                "sign-model" => build_sign_model(n.unwrap_or(1000), &wing1, &wing2)?,
                "singlet-od" => build_singlet_outcome_dependent(&wing1, &wing2)?,
                other => bail!("unknown fixture '{other}'"),
            })
        }
    };
    let source = match &model {
        Some(m) => Source::Model(m),
        None => Source::Quantum,
    };

    let config = SimulationConfig {
        seed: seed_override.unwrap_or(scenario.seed),
        trials: scenario.trials,
        settings,
    };
    let workers = resolve_workers(scenario.workers, env_thread_cap()?);
    let table = sim::simulate(&config, source, workers)?;
    write_payload(out, &table.to_csv())?;

    let report = match scenario.compare {
        CompareIn::None => return Ok(0),
        CompareIn::Model => {
            let m = model
                .as_ref()
                .ok_or_else(|| anyhow::anyhow!("comparison 'model' needs a model source"))?;
            sim::compare(&table, |s, r, q| {
                m.model_quantum_joint(s, r, q).expect("covered settings")
            }, scenario.z)?
        }
        CompareIn::Quantum => {
            sim::compare(&table, quantum::singlet_joint, scenario.z)?
        }
        CompareIn::Uniform => sim::compare(&table, |_, _, _| 0.25, scenario.z)?,
    };
    println!("{}", report.to_json());
    Ok(if report.holds() { 0 } else { 1 })
}
