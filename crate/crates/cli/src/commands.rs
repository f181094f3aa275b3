//! Argument definitions and subcommand implementations.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use qdist_core::channels::qubit_count;
use qdist_core::estimation::{build_plan_pauli_minimal, run_plan, simulate_tomography, ShotModel};
use qdist_core::io::{all_finite, channel_to_json, read_channel, unit_value, wrap_unit_fields};
use qdist_core::process_metrics::{
    full_report_with_samples, j_distance, j_fidelity, process_purity, DEFAULT_MC_SAMPLES,
};
use qdist_core::{Error, OptimizerConfig};
use serde_json::{json, Map, Value};

use crate::suites::{self, Family};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INVALID: u8 = 2;
pub const EXIT_NONCONVERGED: u8 = 3;
pub const EXIT_NOT_UNITARY: u8 = 4;
pub const EXIT_VERIFY_FAILED: u8 = 5;

/// Report fields that are distances or fidelities.
const UNIT_FIELDS: [&str; 9] = [
    "d_pro",
    "f_pro",
    "f_ave",
    "d_max",
    "f_min",
    "d_stab",
    "f_stab",
    "c_stab",
    "process_purity",
];

#[derive(Debug, Parser)]
#[command(
    name = "qdist",
    version,
    about = "Distance and fidelity measures between quantum processes"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Seed for every random draw; generated and reported when omitted.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Optimizer restarts.
    #[arg(long, global = true)]
    pub restarts: Option<usize>,
    /// Optimizer iteration cap per restart.
    #[arg(long = "max-iter", global = true)]
    pub max_iter: Option<usize>,
    /// Duality-gap tolerance of the optimizer.
    #[arg(long = "gap-tol", global = true)]
    pub gap_tol: Option<f64>,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Exit 0 even when an optimizer did not reach the gap tolerance.
    #[arg(long, global = true)]
    pub allow_nonconverged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Every process measure of REAL against IDEAL.
    Compare {
        ideal: PathBuf,
        real: PathBuf,
        /// Monte Carlo samples for the average-case measures.
        #[arg(long, default_value_t = DEFAULT_MC_SAMPLES)]
        samples: usize,
    },
    /// Estimate the fidelity of REAL to a unitary IDEAL from d² observable averages.
    Estimate {
        ideal: PathBuf,
        real: PathBuf,
        /// Shots per setting; 0 uses exact expectation values.
        #[arg(long, default_value_t = 0)]
        shots: u64,
        /// Also report the exact Choi fidelity.
        #[arg(long)]
        oracle: bool,
        /// Write the measurement plan as JSON.
        #[arg(long)]
        export_plan: Option<PathBuf>,
    },
    /// Run the randomized invariant suites.
    Verify {
        /// Instances per family and dimension.
        #[arg(long, default_value_t = 10)]
        sweep: usize,
        /// Dimensions to sweep (repeatable); defaults to 2 and 4.
        #[arg(long = "dim")]
        dims: Vec<usize>,
        /// Restrict to these families (repeatable).
        #[arg(long = "family", value_enum)]
        families: Vec<Family>,
        /// Re-run a counterexample file instead of sweeping.
        #[arg(long)]
        replay: Option<PathBuf>,
        /// Where failing instances are written.
        #[arg(long, default_value = "qdist-counterexamples")]
        dump_dir: PathBuf,
    },
    /// Simulated process tomography of REAL.
    Tomography {
        real: PathBuf,
        /// Shots per setting; 0 uses exact expectation values.
        #[arg(long, default_value_t = 0)]
        shots: u64,
        /// Write the reconstructed channel here.
        #[arg(long)]
        channel_out: Option<PathBuf>,
    },
}

/// Result of a command: the document to emit, its exit code and an
/// optional message for stderr.
#[derive(Debug)]
pub struct Outcome {
    pub document: Value,
    pub code: u8,
    pub message: Option<String>,
}

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::ConvergenceFailure { .. } => EXIT_NONCONVERGED,
            _ => EXIT_INVALID,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CommandResult = std::result::Result<Outcome, Failure>;

fn resolve_seed(seed: Option<u64>) -> u64 {
    // keep auto seeds exactly representable as JSON doubles
    seed.unwrap_or_else(|| rand::random::<u64>() >> 11)
}

fn optimizer_config(g: &GlobalArgs, seed: u64) -> Result<OptimizerConfig, Failure> {
    let mut c = OptimizerConfig::with_seed(seed);
    if let Some(r) = g.restarts {
        c.restarts = r;
    }
    if let Some(m) = g.max_iter {
        c.max_iterations = m;
    }
    if let Some(t) = g.gap_tol {
        c.gap_tolerance = t;
    }
    c.validate()?;
    Ok(c)
}

fn finite(document: Value) -> Result<Value, Failure> {
    if all_finite(&document) {
        Ok(document)
    } else {
        Err(Error::NonFiniteInput.into())
    }
}

pub fn run(cli: &Cli) -> CommandResult {
    let seed = resolve_seed(cli.global.seed);
    match &cli.command {
        Command::Compare { ideal, real, samples } => compare(&cli.global, seed, ideal, real, *samples),
        Command::Estimate {
            ideal,
            real,
            shots,
            oracle,
            export_plan,
        } => estimate(seed, ideal, real, *shots, *oracle, export_plan.as_deref()),
        Command::Verify {
            sweep,
            dims,
            families,
            replay,
            dump_dir,
        } => match replay {
            Some(path) => replay_counterexample(path),
            None => verify(&cli.global, seed, *sweep, dims, families, dump_dir),
        },
        Command::Tomography {
            real,
            shots,
            channel_out,
        } => tomography(seed, real, *shots, channel_out.as_deref()),
    }
}

fn compare(g: &GlobalArgs, seed: u64, ideal: &Path, real: &Path, samples: usize) -> CommandResult {
    let config = optimizer_config(g, seed)?;
    let f = read_channel(ideal)?;
    let e = read_channel(real)?;
    let report = full_report_with_samples(&e, &f, &config, samples)?;
    let converged = report.all_converged();
    let mut body = serde_json::to_value(&report).expect("serializable");
    let obj = body.as_object_mut().expect("report is an object");
    wrap_unit_fields(obj, &UNIT_FIELDS)?;
    for mc in ["d_ave_mc", "f_ave_mc"] {
        if let Some(m) = obj.get_mut(mc).and_then(Value::as_object_mut) {
            wrap_unit_fields(m, &["estimate"])?;
        }
    }
    let document = finite(json!({
        "command": "compare",
        "seed": seed,
        "ideal": ideal,
        "real": real,
        "converged": converged,
        "checks_pass": report.checks.all(),
        "report": body,
    }))?;
    let (code, message) = if converged || g.allow_nonconverged {
        (EXIT_OK, None)
    } else {
        let worst = [
            report.d_max_optimizer,
            report.f_min_optimizer,
            report.d_stab_optimizer,
            report.f_stab_optimizer,
        ]
        .into_iter()
        .filter(|d| !d.converged)
        .max_by(|a, b| a.final_gap.total_cmp(&b.final_gap))
        .expect("some optimizer did not converge");
        let err = Error::ConvergenceFailure {
            gap: worst.final_gap,
            iterations: worst.iterations,
        };
        (EXIT_NONCONVERGED, Some(err.to_string()))
    };
    Ok(Outcome {
        document,
        code,
        message,
    })
}

/// Shot-noise estimates may stray outside `[0, 1]`; display the clamped
/// value and keep the raw one.
fn clamped(v: f64) -> Value {
    json!({"value": v.clamp(0.0, 1.0), "raw": v})
}

fn estimate(
    seed: u64,
    ideal: &Path,
    real: &Path,
    shots: u64,
    oracle: bool,
    export_plan: Option<&Path>,
) -> CommandResult {
    let not_unitary = |e: Error| Failure {
        code: EXIT_NOT_UNITARY,
        message: e.to_string(),
    };
    let f = read_channel(ideal).map_err(|e| match e {
        Error::NonUnitaryTarget(_) => not_unitary(e),
        other => other.into(),
    })?;
    let u = match f.as_unitary() {
        Some(u) => u.clone(),
        None => return Err(not_unitary(Error::NonUnitaryTarget(1.0 - process_purity(&f)))),
    };
    let e = read_channel(real)?;
    let n = qubit_count(u.dim()).ok_or(Error::NoUnitaryBasis(u.dim()))?;
    let plan = build_plan_pauli_minimal(&u, n)?;
    if let Some(path) = export_plan {
        write_text(
            path,
            &serde_json::to_string_pretty(&plan.to_json()).expect("serializable"),
        )?;
    }
    let model = ShotModel {
        shots_per_setting: shots,
        seed,
    };
    let result = run_plan(&plan, &e, &model)?;
    let mut doc = json!({
        "command": "estimate",
        "seed": seed,
        "ideal": ideal,
        "real": real,
        "dim": plan.dim(),
        "scheme": plan.scheme(),
        "settings": plan.settings().len(),
        "shots_per_setting": shots,
        "total_shots": result.total_shots,
        "estimate": clamped(result.estimate),
        "stderr": result.stderr,
    });
    if oracle {
        doc["oracle"] = unit_value(j_fidelity(&e, &f)?)?;
    }
    Ok(Outcome {
        document: finite(doc)?,
        code: EXIT_OK,
        message: None,
    })
}

fn verify(
    g: &GlobalArgs,
    seed: u64,
    sweep: usize,
    dims: &[usize],
    families: &[Family],
    dump_dir: &Path,
) -> CommandResult {
    let config = optimizer_config(g, seed)?;
    let dims = if dims.is_empty() { vec![2, 4] } else { dims.to_vec() };
    if let Some(&bad) = dims.iter().find(|&&d| d < 2) {
        return Err(Failure {
            code: EXIT_INVALID,
            message: format!("dimension {bad} is too small to sweep"),
        });
    }
    let families = if families.is_empty() {
        Family::ALL.to_vec()
    } else {
        families.to_vec()
    };
    let mut reports = Vec::new();
    for family in families {
        reports.push(suites::run_family(family, &dims, sweep, seed, &config, Some(dump_dir))?);
    }
    let passed = reports.iter().all(|r| r.passed());
    let failed: Vec<&str> = reports
        .iter()
        .filter(|r| !r.passed())
        .map(|r| r.family.name())
        .collect();
    let document = json!({
        "command": "verify",
        "seed": seed,
        "sweep": sweep,
        "dims": dims,
        "config": config,
        "passed": passed,
        "families": reports,
    });
    Ok(Outcome {
        document,
        code: if passed { EXIT_OK } else { EXIT_VERIFY_FAILED },
        message: (!passed).then(|| format!("failing families: {}", failed.join(", "))),
    })
}

fn replay_counterexample(path: &Path) -> CommandResult {
    let cx = suites::read_counterexample(path)?;
    let outcome = cx.replay()?;
    let reproduced = !outcome.passed();
    Ok(Outcome {
        document: json!({
            "command": "verify",
            "replay": path,
            "family": cx.family,
            "dim": cx.dim,
            "seed": cx.seed,
            "instance": cx.instance,
            "outcome": outcome,
            "recorded": cx.outcome,
            "reproduced": reproduced,
        }),
        code: if reproduced { EXIT_VERIFY_FAILED } else { EXIT_OK },
        message: reproduced.then(|| format!("{}: {}", cx.family.name(), outcome.detail)),
    })
}

fn tomography(seed: u64, real: &Path, shots: u64, channel_out: Option<&Path>) -> CommandResult {
    let e = read_channel(real)?;
    let model = ShotModel {
        shots_per_setting: shots,
        seed,
    };
    let rebuilt = simulate_tomography(&e, &model)?;
    let channel = channel_to_json(&rebuilt);
    if let Some(path) = channel_out {
        write_text(path, &serde_json::to_string_pretty(&channel).expect("serializable"))?;
    }
    let document = finite(json!({
        "command": "tomography",
        "seed": seed,
        "real": real,
        "shots_per_setting": shots,
        "d_pro": unit_value(j_distance(&rebuilt, &e)?)?,
        "channel": channel,
    }))?;
    Ok(Outcome {
        document,
        code: EXIT_OK,
        message: None,
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure {
        code: EXIT_INVALID,
        message: format!("{}: {e}", path.display()),
    })
}

/// Human-readable view of a result document.
pub fn render_table(doc: &Value) -> String {
    let mut out = String::new();
    if doc["command"] == "verify" && doc.get("families").is_some() {
        for f in doc["families"].as_array().into_iter().flatten() {
            let status = if f["failures"] == 0 { "PASS" } else { "FAIL" };
            out.push_str(&format!(
                "{status}  {:<22} instances {:>4}  failures {:>3}  worst excess {:>10.3e}  {:.1}s\n",
                f["family"].as_str().unwrap_or(""),
                f["instances"],
                f["failures"],
                f["worst_violation"].as_f64().unwrap_or(f64::NAN),
                f["seconds"].as_f64().unwrap_or(0.0),
            ));
        }
        out.push_str(&format!("seed {}\n", doc["seed"]));
        return out;
    }
    let mut rows = Vec::new();
    flatten("", doc, &mut rows);
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    for (k, v) in rows {
        out.push_str(&format!("{k:<width$}  {v}\n"));
    }
    out
}

fn flatten(prefix: &str, v: &Value, rows: &mut Vec<(String, String)>) {
    let key = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match v {
        // a clamped quantity shows as its display value
        Value::Object(m) if is_unit_value(m) => rows.push((prefix.to_string(), m["value"].to_string())),
        Value::Object(m) => m.iter().for_each(|(k, x)| flatten(&key(k), x, rows)),
        Value::Array(a) if a.len() > 8 || a.iter().any(|x| x.is_array()) => {
            rows.push((prefix.to_string(), format!("[{} entries]", a.len())))
        }
        Value::String(s) => rows.push((prefix.to_string(), s.clone())),
        other => rows.push((prefix.to_string(), other.to_string())),
    }
}

fn is_unit_value(m: &Map<String, Value>) -> bool {
    m.len() == 2 && m.contains_key("value") && m.contains_key("raw")
}

/// Runs the parsed command, writes its output and returns the exit code.
pub fn execute(cli: &Cli) -> u8 {
    match run(cli) {
        Ok(outcome) => {
            let text = match cli.global.format {
                Format::Json => serde_json::to_string_pretty(&outcome.document).expect("serializable") + "\n",
                Format::Table => render_table(&outcome.document),
            };
            let written = match &cli.global.output {
                Some(path) => std::fs::write(path, &text).map_err(|e| format!("{}: {e}", path.display())),
                None => {
                    print!("{text}");
                    Ok(())
                }
            };
            if let Err(msg) = written {
                eprintln!("error: {msg}");
                return EXIT_INVALID;
            }
            if let Some(msg) = outcome.message {
                eprintln!("error: {msg}");
            }
            outcome.code
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}
