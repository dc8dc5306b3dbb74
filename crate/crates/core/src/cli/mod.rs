//! The `macrofield` experiment runner: one experiment per invocation,
//! reported as JSON or CSV.

pub mod descriptor;

use std::io::Write;
use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::definetti::{field_of_states_check, fit_mixture, mixture_state, FitOptions};
use crate::error::Error;
use crate::macrolimit::{
    binomial_window_mass, commutator_decay, norm_gap, strong_limit_residual, validate_n_list, window_mass,
};
use crate::sections::{frequency_operator, FrequencySpec, Section};
use crate::states::PureState;
use crate::stochastics::{
    lattice_defect, quantum_classical_agreement, random_expression, slln_check, trial_rng, BernoulliSpec,
};
use descriptor::{parse_expr, parse_mixture, parse_n_list, parse_section, parse_state};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "MACROFIELD_THREADS";

#[derive(Parser, Debug, Serialize)]
#[command(name = "macrofield", version, about = "Finite-N macroscopic-limit experiments")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Serialize)]
pub struct CommonArgs {
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long = "rng-seed", global = true, default_value_t = 0)]
    pub rng_seed: u64,
    /// Acceptance threshold reported as `within_tol` where an exact reference exists.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Omit timestamp and wall time, making reports byte-reproducible.
    #[arg(long = "no-timestamp", global = true)]
    pub no_timestamp: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(untagged)]
pub enum Command {
    /// ψ^⊗N expectation of the frequency operator against |⟨λ|ψ⟩|².
    BornConverge(BornArgs),
    /// N·‖[A_N, B_N]‖ for two sections.
    CommutatorDecay(DecayArgs),
    /// Exact norm of A_N against the product-state supremum.
    NormGap(NormGapArgs),
    /// ψ^⊗N mass of the eigenvalue window of the frequency operator.
    WindowMass(WindowArgs),
    /// Monte Carlo strong-law check for Bernoulli sequences.
    SllnMc(SllnArgs),
    /// Cylinder events as projections: lattice identities and Born agreement.
    BooleanCheck(BooleanArgs),
    /// Recover a finite De Finetti mixture from its N-site state.
    DefinettiFit(FitArgs),
    /// ω_N(A_N) for a mixture state against μ(A_∞).
    FieldCheck(FieldArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct BornArgs {
    /// One-site amplitudes, normalized on input (e.g. `0.8,0.6`).
    #[arg(long)]
    pub psi: String,
    /// Basis outcome λ whose frequency is measured.
    #[arg(long, default_value_t = 1)]
    pub lambda: usize,
    #[arg(long)]
    pub n: String,
}

#[derive(Args, Debug, Serialize)]
pub struct DecayArgs {
    #[arg(long)]
    pub seed1: String,
    #[arg(long)]
    pub seed2: String,
    #[arg(long)]
    pub n: String,
}

#[derive(Args, Debug, Serialize)]
pub struct NormGapArgs {
    #[arg(long)]
    pub seed: String,
    #[arg(long)]
    pub n: String,
}

#[derive(Args, Debug, Serialize)]
pub struct WindowArgs {
    #[arg(long)]
    pub psi: String,
    #[arg(long, default_value_t = 1)]
    pub lambda: usize,
    #[arg(long)]
    pub n: String,
    /// Window half-width ε.
    #[arg(long)]
    pub epsilon: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct SllnArgs {
    #[arg(long)]
    pub p: f64,
    #[arg(long)]
    pub horizon: usize,
    #[arg(long)]
    pub trials: usize,
    #[arg(long)]
    pub delta: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct BooleanArgs {
    /// Number of qubit sites.
    #[arg(long, default_value_t = 6)]
    pub n: usize,
    /// Random instances to draw; ignored when `--expr` is given.
    #[arg(long, default_value_t = 50)]
    pub instances: usize,
    /// Maximum leaves per random expression.
    #[arg(long, default_value_t = 4)]
    pub leaves: usize,
    #[arg(long)]
    pub expr: Option<String>,
    /// Fixed state; Haar-random per instance otherwise.
    #[arg(long)]
    pub psi: Option<String>,
}

#[derive(Args, Debug, Serialize)]
pub struct FitArgs {
    /// Mixture that generates the target, `w:x,y,z;...`.
    #[arg(long)]
    pub atoms: String,
    #[arg(long, default_value_t = 6)]
    pub n: usize,
    #[arg(long = "k-max", default_value_t = 20)]
    pub k_max: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct FieldArgs {
    #[arg(long)]
    pub atoms: String,
    #[arg(long)]
    pub seed: String,
    #[arg(long)]
    pub n: String,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::BornConverge(_) => "born-converge",
            Command::CommutatorDecay(_) => "commutator-decay",
            Command::NormGap(_) => "norm-gap",
            Command::WindowMass(_) => "window-mass",
            Command::SllnMc(_) => "slln-mc",
            Command::BooleanCheck(_) => "boolean-check",
            Command::DefinettiFit(_) => "definetti-fit",
            Command::FieldCheck(_) => "field-check",
        }
    }
}

/// Records plus scalar results of one experiment.
#[derive(Debug, Default)]
pub struct Outcome {
    pub records: Vec<Value>,
    pub summary: Map<String, Value>,
}

fn rows<T: Serialize>(items: &[T]) -> Vec<Value> {
    items.iter().map(|r| serde_json::to_value(r).expect("plain records serialize")).collect()
}

fn within(summary: &mut Map<String, Value>, key: &str, worst: f64, tol: f64) {
    summary.insert(key.into(), json!(worst));
    summary.insert("tol".into(), json!(tol));
    summary.insert("within_tol".into(), json!(worst <= tol));
}

fn qubit_outcome(lambda: usize) -> Result<FrequencySpec, Error> {
    FrequencySpec::basis(2, lambda)
}

/// Runs the parsed command.
pub fn execute(cli: &Cli) -> Result<Outcome, Error> {
    let common = &cli.common;
    let mut out = Outcome::default();
    match &cli.command {
        Command::BornConverge(a) => {
            let psi = parse_state(&a.psi)?;
            let spec = FrequencySpec::basis(psi.d(), a.lambda)?;
            let ns = parse_n_list(&a.n)?;
            validate_n_list(&ns, 1)?;
            let born = psi.born_probability(&spec)?;
            let recs = ns
                .par_iter()
                .map(|&n| {
                    let e = psi.expect_power(&frequency_operator(&spec, n)?)?;
                    Ok(json!({"n": n, "expectation": e, "born": born, "abs_error": (e - born).abs()}))
                })
                .collect::<Result<Vec<_>, Error>>()?;
            let worst = recs.iter().map(|r| r["abs_error"].as_f64().unwrap()).fold(0.0, f64::max);
            out.records = recs;
            within(&mut out.summary, "max_abs_error", worst, common.tol.unwrap_or(1e-10));
        }
        Command::CommutatorDecay(a) => {
            let (s1, s2) = (parse_section(&a.seed1)?, parse_section(&a.seed2)?);
            let report = commutator_decay(&s1, &s2, &parse_n_list(&a.n)?)?;
            out.records = rows(&report.records);
            out.summary.insert("fitted_exponent".into(), json!(report.exponent));
        }
        Command::NormGap(a) => {
            let recs = norm_gap(&parse_section(&a.seed)?, &parse_n_list(&a.n)?)?;
            out.summary.insert("product_sup".into(), json!(recs[0].product_sup));
            out.records = rows(&recs);
        }
        Command::WindowMass(a) => {
            let psi = parse_state(&a.psi)?;
            if psi.d() != 2 {
                return Err(Error::InvalidArgument("window-mass expects a qubit state".into()));
            }
            let spec = qubit_outcome(a.lambda)?;
            let ns = parse_n_list(&a.n)?;
            validate_n_list(&ns, 1)?;
            let recs = ns
                .par_iter()
                .map(|&n| {
                    let r = window_mass(&psi, &spec, n, a.epsilon)?;
                    let binomial = binomial_window_mass(r.p, n, a.epsilon)?;
                    let residual = strong_limit_residual(&psi, &spec, n)?;
                    Ok(json!({
                        "n": n,
                        "epsilon": r.epsilon,
                        "p": r.p,
                        "mass": r.mass,
                        "binomial": binomial,
                        "abs_error": (r.mass - binomial).abs(),
                        "residual": residual,
                        "residual_oracle": (r.p * (1.0 - r.p) / n as f64).sqrt(),
                    }))
                })
                .collect::<Result<Vec<_>, Error>>()?;
            let worst = recs.iter().map(|r| r["abs_error"].as_f64().unwrap()).fold(0.0, f64::max);
            out.records = recs;
            within(&mut out.summary, "max_abs_error", worst, common.tol.unwrap_or(1e-9));
        }
        Command::SllnMc(a) => {
            let rep = slln_check(BernoulliSpec::new(a.p)?, a.horizon, a.trials, a.delta, common.rng_seed)?;
            out.summary.insert("hit_fraction".into(), json!(rep.hit_fraction));
            out.summary.insert("hoeffding_floor".into(), json!(1.0 - rep.hoeffding_bound));
            out.records = rows(&[rep]);
        }
        Command::BooleanCheck(a) => {
            if a.n == 0 || a.leaves == 0 || a.instances == 0 {
                return Err(Error::InvalidArgument("n, leaves and instances must be positive".into()));
            }
            let fixed_expr = a.expr.as_deref().map(parse_expr).transpose()?;
            let fixed_psi = a.psi.as_deref().map(parse_state).transpose()?;
            let count = if fixed_expr.is_some() { 1 } else { a.instances };
            let recs = (0..count)
                .into_par_iter()
                .map(|i| {
                    let mut rng = trial_rng(common.rng_seed, i as u64);
                    let psi = match &fixed_psi {
                        Some(p) => p.clone(),
                        None => PureState::haar_random(2, &mut rng),
                    };
                    let expr = match &fixed_expr {
                        Some(e) => e.clone(),
                        None => {
                            let leaves = rng.random_range(1..=a.leaves);
                            random_expression(&mut rng, leaves, a.n)
                        }
                    };
                    let (quantum, classical) = quantum_classical_agreement(&psi, &expr, a.n)?;
                    Ok(json!({
                        "instance": i,
                        "expr": expr.to_string(),
                        "quantum": quantum,
                        "classical": classical,
                        "discrepancy": (quantum - classical).abs(),
                        "lattice_defect": lattice_defect(&expr, a.n)?,
                    }))
                })
                .collect::<Result<Vec<_>, Error>>()?;
            let worst = recs
                .iter()
                .map(|r| r["discrepancy"].as_f64().unwrap().max(r["lattice_defect"].as_f64().unwrap()))
                .fold(0.0, f64::max);
            out.records = recs;
            within(&mut out.summary, "max_error", worst, common.tol.unwrap_or(1e-10));
        }
        Command::DefinettiFit(a) => {
            let mix = parse_mixture(&a.atoms)?;
            let target = mixture_state(&mix, a.n)?;
            let opts = FitOptions { k_max: a.k_max, ..FitOptions::default() };
            let fit = fit_mixture(&target, &opts)?;
            out.records = fit
                .mixture
                .atoms()
                .iter()
                .enumerate()
                .map(|(i, (w, rho))| {
                    let v = rho.bloch_vector()?;
                    Ok(json!({"atom": i, "weight": w, "x": v.x, "y": v.y, "z": v.z}))
                })
                .collect::<Result<Vec<_>, Error>>()?;
            out.summary.insert("iterations".into(), json!(fit.iterations));
            out.summary.insert("budget_exhausted".into(), json!(fit.budget_exhausted));
            out.summary.insert("history".into(), json!(fit.history));
            within(&mut out.summary, "residual", fit.residual, common.tol.unwrap_or(1e-6));
        }
        Command::FieldCheck(a) => {
            let mix = parse_mixture(&a.atoms)?;
            let section = parse_section(&a.seed)?;
            let ns = parse_n_list(&a.n)?;
            validate_n_list(&ns, section.seed_order())?;
            let recs = field_of_states_check(&mix, &section, &ns)?;
            let worst = recs.iter().map(|r| (r.lhs - r.rhs).abs()).fold(0.0, f64::max);
            out.records = recs
                .iter()
                .map(|r| json!({"n": r.n, "lhs": r.lhs, "rhs": r.rhs, "abs_error": (r.lhs - r.rhs).abs()}))
                .collect();
            within(&mut out.summary, "max_abs_error", worst, common.tol.unwrap_or(1e-9));
        }
    }
    Ok(out)
}

/// Full JSON report. `argv` excludes the program name.
pub fn report_json(cli: &Cli, argv: &[String], outcome: &Outcome, wall: Option<f64>) -> Value {
    let mut config = Map::new();
    config.insert("rng_seed".into(), json!(cli.common.rng_seed));
    config.insert("tol".into(), json!(cli.common.tol));
    config.insert("format".into(), json!(cli.common.format));
    if let Value::Object(args) = serde_json::to_value(&cli.command).expect("arguments serialize") {
        config.extend(args);
    }
    let mut report = Map::new();
    report.insert("command".into(), json!(cli.command.name()));
    report.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    report.insert("argv".into(), json!(argv));
    report.insert("config".into(), Value::Object(config));
    report.insert("records".into(), Value::Array(outcome.records.clone()));
    report.insert("summary".into(), Value::Object(outcome.summary.clone()));
    if let Some(wall) = wall {
        let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        report.insert("timestamp_unix".into(), json!(now));
        report.insert("wall_time_s".into(), json!(wall));
    }
    Value::Object(report)
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Header row from the first record's keys, then one row per record.
pub fn records_csv(records: &[Value]) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if let Some(Value::Object(first)) = records.first() {
        w.write_record(first.keys())?;
        for r in records {
            if let Value::Object(m) = r {
                w.write_record(m.values().map(csv_cell))?;
            }
        }
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = match raw.trim().parse() {
        Ok(t) if t >= 1 => t,
        _ => return Err(format!("{THREADS_ENV} must be a positive integer, got '{raw}'")),
    };
    // a pool built by an earlier run in this process stays in place
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    faer::set_global_parallelism(if threads == 1 { faer::Par::Seq } else { faer::Par::rayon(threads) });
    Ok(())
}

/// Parses `argv` (program name first), runs the experiment, and writes the
/// report to `--out` or `stdout`. Returns the process exit code.
pub fn run<I, S>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let argv: Vec<String> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return EXIT_OK;
            }
            let text = e.to_string();
            let line = text.lines().next().unwrap_or("invalid arguments");
            let _ = writeln!(stderr, "{}", line.trim_start_matches("error: ").trim());
            return EXIT_VALIDATION;
        }
    };
    if let Err(msg) = configure_threads() {
        let _ = writeln!(stderr, "{msg}");
        return EXIT_VALIDATION;
    }

    let started = Instant::now();
    let outcome = match execute(&cli) {
        Ok(o) => o,
        Err(e) => {
            let _ = writeln!(stderr, "{}: {e}", cli.command.name());
            return if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_VALIDATION };
        }
    };
    let wall = (!cli.common.no_timestamp).then(|| started.elapsed().as_secs_f64());

    let bytes = match cli.common.format {
        Format::Json => {
            let report = report_json(&cli, &argv[1.min(argv.len())..], &outcome, wall);
            let mut s = serde_json::to_string_pretty(&report).expect("report serializes");
            s.push('\n');
            s.into_bytes()
        }
        Format::Csv => match records_csv(&outcome.records) {
            Ok(b) => b,
            Err(e) => {
                let _ = writeln!(stderr, "csv: {e}");
                return EXIT_VALIDATION;
            }
        },
    };
    let written = match &cli.common.out {
        Some(path) => std::fs::write(path, &bytes).map_err(|e| format!("{}: {e}", path.display())),
        None => stdout.write_all(&bytes).map_err(|e| e.to_string()),
    };
    if let Err(msg) = written {
        let _ = writeln!(stderr, "cannot write report: {msg}");
        return EXIT_VALIDATION;
    }
    EXIT_OK
}
