//! Randomized invariant suites run by `qdist verify`.
//!
//! Every instance is generated from its own `(seed, family, dim, index)`
//! stream and checked by a pure function of the generated data, so a failing
//! instance can be written out and replayed from the file alone.

use std::path::{Path, PathBuf};
use std::time::Instant;

use qdist_core::bounds::{random_function_case, verify_all, FunctionSpec, BOUND_TOL};
use qdist_core::channels::{compose, mixture, random_channel, random_unitary, tensor};
use qdist_core::estimation::{build_plan_general, build_plan_pauli_minimal, f_pro_unitary_basis, pauli_minimal_inputs};
use qdist_core::io::{channel_from_json, channel_to_json, matrix_from_json, matrix_to_json};
use qdist_core::linalg::{haar_state, random_density, random_density_rank, random_hermitian};
use qdist_core::process_metrics::{
    ave_measure_mc, f_ave_formula, j_distance, j_fidelity, stabilized, stabilized_objective, stabilized_with, Metric,
};
use qdist_core::state_metrics::{angle, bures, c_metric, fidelity, trace_distance, FuchsVanDeGraaf};
use qdist_core::{rng, Channel, ComplexMatrix, DensityMatrix, Error, OptimizerConfig, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Monte Carlo agreement threshold in standard errors. Suites run with
/// arbitrary seeds, so this is wider than a fixed-seed acceptance check.
pub const MC_SIGMAS: f64 = 4.5;
pub const MC_SAMPLES: usize = 10_000;
const INVARIANCE_GAP: f64 = 1e-10;
const INVARIANCE_ITERATIONS: usize = 3000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    MetricAxioms,
    JStability,
    Chaining,
    PostProcessing,
    UnitaryInvariance,
    AncillaIndependence,
    Convexity,
    FuchsVanDeGraaf,
    AverageFidelity,
    Estimation,
    ComputationBounds,
}

impl Family {
    pub const ALL: [Family; 11] = [
        Family::MetricAxioms,
        Family::JStability,
        Family::Chaining,
        Family::PostProcessing,
        Family::UnitaryInvariance,
        Family::AncillaIndependence,
        Family::Convexity,
        Family::FuchsVanDeGraaf,
        Family::AverageFidelity,
        Family::Estimation,
        Family::ComputationBounds,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::MetricAxioms => "metric-axioms",
            Family::JStability => "j-stability",
            Family::Chaining => "chaining",
            Family::PostProcessing => "post-processing",
            Family::UnitaryInvariance => "unitary-invariance",
            Family::AncillaIndependence => "ancilla-independence",
            Family::Convexity => "convexity",
            Family::FuchsVanDeGraaf => "fuchs-van-de-graaf",
            Family::AverageFidelity => "average-fidelity",
            Family::Estimation => "estimation",
            Family::ComputationBounds => "computation-bounds",
        }
    }

    fn index(self) -> u64 {
        Family::ALL.iter().position(|&f| f == self).expect("listed") as u64
    }

    /// Estimation plans need a Pauli basis.
    pub fn supports(self, dim: usize) -> bool {
        match self {
            Family::Estimation => dim.is_power_of_two() && dim >= 2,
            _ => dim >= 2,
        }
    }

    pub fn generate(self, dim: usize, seed: u64, index: u64) -> Instance {
        let mut r = rng::stream(seed, (self.index() << 40) | ((dim as u64) << 24) | index);
        let channel = |r: &mut rng::Rng| {
            let k = 1 + r.random_range(0..dim * dim);
            Channel::from_kraus(random_channel(dim, k, r))
        };
        let unitary = |r: &mut rng::Rng| Channel::unitary(&random_unitary(dim, r));
        let mut inst = Instance::default();
        match self {
            Family::MetricAxioms => inst.channels = (0..3).map(|_| channel(&mut r)).collect(),
            Family::JStability => inst.channels = vec![channel(&mut r), channel(&mut r)],
            Family::Chaining => {
                inst.channels = vec![channel(&mut r), channel(&mut r), unitary(&mut r), channel(&mut r)];
            }
            Family::PostProcessing => inst.channels = (0..3).map(|_| channel(&mut r)).collect(),
            Family::UnitaryInvariance => {
                inst.channels = vec![channel(&mut r), unitary(&mut r), unitary(&mut r), unitary(&mut r)];
            }
            Family::AncillaIndependence => inst.channels = vec![channel(&mut r), unitary(&mut r)],
            Family::Convexity => {
                inst.channels = vec![channel(&mut r), channel(&mut r)];
                let rank = 1 + r.random_range(0..dim);
                inst.states = vec![
                    random_density(dim, &mut r).into_matrix(),
                    random_density_rank(dim, rank, &mut r).into_matrix(),
                ];
            }
            Family::FuchsVanDeGraaf => {
                inst.channels = vec![channel(&mut r), channel(&mut r)];
                inst.states = vec![
                    random_density(dim, &mut r).into_matrix(),
                    random_density(dim, &mut r).into_matrix(),
                    haar_state(dim, &mut r).projector(),
                    haar_state(dim, &mut r).projector(),
                ];
            }
            Family::AverageFidelity => {
                inst.channels = vec![channel(&mut r), unitary(&mut r)];
                inst.sample_seed = r.random();
            }
            Family::Estimation => {
                inst.channels = vec![channel(&mut r), unitary(&mut r)];
                inst.states = (0..dim * dim).map(|_| random_hermitian(dim, &mut r)).collect();
            }
            Family::ComputationBounds => {
                let noise = if index % 3 == 1 { 0.15 } else { 0.0 };
                let case = random_function_case(dim, noise, &mut r).expect("valid dimensions");
                let ideal = if index % 3 == 2 { unitary(&mut r) } else { case.ideal };
                let strength = r.random_range(0.0..0.5);
                let real = if index % 3 == 2 {
                    mixture(&ideal, &channel(&mut r), strength).expect("same dimension")
                } else {
                    case.real
                };
                inst.channels = vec![ideal, real];
                inst.function = Some((0..dim).map(|x| case.spec.apply(x)).collect());
            }
        }
        inst
    }

    pub fn check(self, inst: &Instance, config: &OptimizerConfig) -> Result<Outcome> {
        let ch = &inst.channels;
        let mut t = Tracker::default();
        match self {
            Family::MetricAxioms => {
                let states: Vec<&DensityMatrix> = ch.iter().map(|c| c.choi().state()).collect();
                type StateMetric = fn(&DensityMatrix, &DensityMatrix) -> Result<f64>;
                let metrics: [(&str, StateMetric); 4] = [
                    ("d_pro", trace_distance),
                    ("bures", bures),
                    ("angle", angle),
                    ("c", c_metric),
                ];
                let (a, b, c) = (states[0], states[1], states[2]);
                for (name, m) in metrics {
                    t.at_most(&format!("{name}(a,a)"), m(a, a)?, 0.0, 1e-6);
                    t.close(&format!("{name} symmetry"), m(a, b)?, m(b, a)?, 1e-10);
                    t.at_most(&format!("{name} triangle"), m(a, c)?, m(a, b)? + m(b, c)?, 1e-10);
                    t.at_most(&format!("{name}(a,b) positive"), 0.0, m(a, b)?, -1e-9);
                }
            }
            Family::JStability => {
                let id = Channel::identity(2);
                let (e2, f2) = (tensor(&id, &ch[0]), tensor(&id, &ch[1]));
                t.close("d_pro", j_distance(&e2, &f2)?, j_distance(&ch[0], &ch[1])?, 1e-8);
                t.close("f_pro", j_fidelity(&e2, &f2)?, j_fidelity(&ch[0], &ch[1])?, 1e-8);
            }
            Family::Chaining => {
                let (e1, e2, f1, f2) = (&ch[0], &ch[1], &ch[2], &ch[3]);
                let lhs = j_distance(&compose(e2, e1)?, &compose(f2, f1)?)?;
                t.at_most("d_pro chained", lhs, j_distance(e1, f1)? + j_distance(e2, f2)?, 1e-8);
            }
            Family::PostProcessing => {
                let (e, f, r) = (&ch[0], &ch[1], &ch[2]);
                let (re, rf) = (compose(r, e)?, compose(r, f)?);
                t.at_most("d_pro", j_distance(&re, &rf)?, j_distance(e, f)?, 1e-8);
                t.at_most("f_pro", j_fidelity(e, f)?, j_fidelity(&re, &rf)?, 1e-8);
            }
            Family::UnitaryInvariance => {
                let (e, f, u, v) = (&ch[0], &ch[1], &ch[2], &ch[3]);
                let wrap = |x: &Channel| compose(u, &compose(x, v)?);
                let (e2, f2) = (wrap(e)?, wrap(f)?);
                t.close("d_pro", j_distance(&e2, &f2)?, j_distance(e, f)?, 1e-8);
                t.close("f_pro", j_fidelity(&e2, &f2)?, j_fidelity(e, f)?, 1e-8);
                // A 1e-8 comparison needs both optima well inside 1e-8, tighter
                // than the usual stopping gap; convergence is judged at the
                // caller's gap. Both problems are convex, so one start suffices.
                let tight = OptimizerConfig {
                    gap_tolerance: config.gap_tolerance.min(INVARIANCE_GAP),
                    max_iterations: config.max_iterations.max(INVARIANCE_ITERATIONS),
                    restarts: 1,
                    ..*config
                };
                for metric in [Metric::Distance, Metric::Fidelity] {
                    let a = stabilized(e, f, metric, &tight)?;
                    let b = stabilized(&e2, &f2, metric, &tight)?;
                    t.converged(a.final_gap <= config.gap_tolerance && b.final_gap <= config.gap_tolerance);
                    t.close(&format!("{metric:?} stabilized"), a.value, b.value, 1e-8);
                }
            }
            Family::AncillaIndependence => {
                let (e, f) = (&ch[0], &ch[1]);
                let d = e.dim();
                for metric in [Metric::Distance, Metric::Fidelity] {
                    let a = stabilized_with(e, f, metric, d, config, &[])?;
                    let b = stabilized_with(e, f, metric, 2 * d, config, &[])?;
                    t.converged(a.converged && b.converged);
                    t.close(&format!("{metric:?} ancilla d vs 2d"), a.value, b.value, 1e-5);
                }
            }
            Family::Convexity => {
                let (e, f) = (&ch[0], &ch[1]);
                let d = e.dim();
                let (r0, r1) = (&inst.states[0], &inst.states[1]);
                for metric in [Metric::Fidelity, Metric::Distance] {
                    let g = |r: &ComplexMatrix| stabilized_objective(e, f, metric, r, d);
                    let (g0, g1) = (g(r0)?, g(r1)?);
                    for s in [0.25, 0.5, 0.75] {
                        let gt = g(&(r0.scale(1.0 - s) + r1.scale(s)))?;
                        let chord = (1.0 - s) * g0 + s * g1;
                        match metric {
                            Metric::Fidelity => t.at_most(&format!("fidelity convex at {s}"), gt, chord, 1e-8),
                            Metric::Distance => t.at_most(&format!("distance concave at {s}"), chord, gt, 1e-8),
                        }
                    }
                }
            }
            Family::FuchsVanDeGraaf => {
                let dm = |m: &ComplexMatrix| DensityMatrix::new(m.clone());
                let s = &inst.states;
                let mut sandwich = |name: &str, a: &DensityMatrix, b: &DensityMatrix| -> Result<()> {
                    let fv = FuchsVanDeGraaf::from_values(trace_distance(a, b)?, fidelity(a, b)?);
                    t.at_most(&format!("{name} lower"), fv.lower, fv.distance, 1e-9);
                    t.at_most(&format!("{name} upper"), fv.distance, fv.upper, 1e-9);
                    Ok(())
                };
                sandwich("mixed", &dm(&s[0])?, &dm(&s[1])?)?;
                sandwich("process", ch[0].choi().state(), ch[1].choi().state())?;
                let (p, q) = (dm(&s[2])?, dm(&s[3])?);
                sandwich("pure", &p, &q)?;
                let fv = FuchsVanDeGraaf::from_values(trace_distance(&p, &q)?, fidelity(&p, &q)?);
                t.close("pure saturation", fv.distance, fv.upper, 1e-9);
            }
            Family::AverageFidelity => {
                let (e, f) = (&ch[0], &ch[1]);
                let u = f.as_unitary().ok_or(Error::NonUnitaryTarget(f64::NAN))?;
                let mc = ave_measure_mc(e, f, Metric::Fidelity, MC_SAMPLES, inst.sample_seed)?;
                t.close(
                    "f_ave monte carlo",
                    mc.estimate,
                    f_ave_formula(e, u)?,
                    MC_SIGMAS * mc.stderr,
                );
            }
            Family::Estimation => {
                let (e, f) = (&ch[0], &ch[1]);
                let u = f.as_unitary().ok_or(Error::NonUnitaryTarget(f64::NAN))?;
                let oracle = j_fidelity(e, f)?;
                t.close("unitary basis", f_pro_unitary_basis(e, u)?, oracle, 1e-9);
                let n = e.dim().trailing_zeros() as usize;
                let minimal = build_plan_pauli_minimal(u, n)?;
                t.close(
                    "pauli-minimal settings",
                    minimal.settings().len() as f64,
                    (e.dim() * e.dim()) as f64,
                    0.0,
                );
                t.close("pauli-minimal plan", minimal.evaluate_exact(e)?, oracle, 1e-8);
                let general = build_plan_general(u, pauli_minimal_inputs(n), inst.states.clone())?;
                t.at_most(
                    "general settings",
                    general.nonzero_coefficients() as f64,
                    e.dim().pow(4) as f64,
                    0.0,
                );
                t.close("general plan", general.evaluate_exact(e)?, oracle, 1e-8);
            }
            Family::ComputationBounds => {
                let spec = FunctionSpec::new(inst.function.clone().ok_or(Error::Parse("missing function".into()))?)?;
                let all = verify_all(&ch[1], &ch[0], &spec, config)?;
                for (name, b) in all.rows() {
                    t.record(-b.slack - BOUND_TOL, format!("{name}: lhs {} rhs {}", b.lhs, b.rhs));
                }
            }
        }
        Ok(t.finish())
    }
}

/// Randomly generated data for one check.
#[derive(Debug, Clone, Default)]
pub struct Instance {
    pub channels: Vec<Channel>,
    pub states: Vec<ComplexMatrix>,
    pub function: Option<Vec<usize>>,
    pub sample_seed: u64,
}

/// Largest tolerance excess over all conditions; nonpositive means pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub violation: f64,
    pub detail: String,
    pub converged: bool,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.violation <= 0.0
    }
}

struct Tracker {
    worst: f64,
    detail: String,
    converged: bool,
}

impl Default for Tracker {
    fn default() -> Self {
        Self {
            worst: f64::NEG_INFINITY,
            detail: String::new(),
            converged: true,
        }
    }
}

impl Tracker {
    fn record(&mut self, excess: f64, detail: String) {
        let excess = if excess.is_nan() { f64::INFINITY } else { excess };
        if excess > self.worst {
            self.worst = excess;
            self.detail = detail;
        }
    }

    fn at_most(&mut self, name: &str, lhs: f64, rhs: f64, tol: f64) {
        self.record(lhs - rhs - tol, format!("{name}: {lhs} <= {rhs} (tol {tol:e})"));
    }

    fn close(&mut self, name: &str, a: f64, b: f64, tol: f64) {
        self.record((a - b).abs() - tol, format!("{name}: {a} vs {b} (tol {tol:e})"));
    }

    fn converged(&mut self, ok: bool) {
        self.converged &= ok;
    }

    fn finish(self) -> Outcome {
        Outcome {
            violation: self.worst,
            detail: self.detail,
            converged: self.converged,
        }
    }
}

/// Everything needed to replay a failing instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Counterexample {
    pub family: Family,
    pub dim: usize,
    pub seed: u64,
    pub instance: u64,
    pub config: OptimizerConfig,
    pub channels: Vec<Value>,
    pub states: Vec<Value>,
    pub function: Option<Vec<usize>>,
    pub sample_seed: u64,
    pub outcome: Outcome,
}

impl Counterexample {
    pub fn new(
        family: Family,
        dim: usize,
        seed: u64,
        index: u64,
        config: &OptimizerConfig,
        inst: &Instance,
        outcome: Outcome,
    ) -> Self {
        Self {
            family,
            dim,
            seed,
            instance: index,
            config: *config,
            channels: inst.channels.iter().map(channel_to_json).collect(),
            states: inst.states.iter().map(matrix_to_json).collect(),
            function: inst.function.clone(),
            sample_seed: inst.sample_seed,
            outcome,
        }
    }

    pub fn instance(&self) -> Result<Instance> {
        Ok(Instance {
            channels: self.channels.iter().map(channel_from_json).collect::<Result<_>>()?,
            states: self
                .states
                .iter()
                .enumerate()
                .map(|(i, s)| matrix_from_json(s, self.dim, &format!("states[{i}]")))
                .collect::<Result<_>>()?,
            function: self.function.clone(),
            sample_seed: self.sample_seed,
        })
    }

    /// Re-runs the check on the stored data.
    pub fn replay(&self) -> Result<Outcome> {
        self.family.check(&self.instance()?, &self.config)
    }

    pub fn file_name(&self) -> String {
        format!(
            "{}-d{}-seed{}-{}.json",
            self.family.name(),
            self.dim,
            self.seed,
            self.instance
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilyReport {
    pub family: Family,
    pub dims: Vec<usize>,
    pub instances: usize,
    pub failures: usize,
    pub nonconverged: usize,
    pub worst_violation: f64,
    pub worst_detail: String,
    pub seconds: f64,
    pub counterexample: Option<PathBuf>,
}

impl FamilyReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Runs `sweep` instances per dimension. The first failure is written to
/// `dump_dir` when given.
pub fn run_family(
    family: Family,
    dims: &[usize],
    sweep: usize,
    seed: u64,
    config: &OptimizerConfig,
    dump_dir: Option<&Path>,
) -> Result<FamilyReport> {
    let start = Instant::now();
    let mut report = FamilyReport {
        family,
        dims: dims.iter().copied().filter(|&d| family.supports(d)).collect(),
        instances: 0,
        failures: 0,
        nonconverged: 0,
        worst_violation: f64::NEG_INFINITY,
        worst_detail: String::new(),
        seconds: 0.0,
        counterexample: None,
    };
    for &dim in &report.dims.clone() {
        for index in 0..sweep as u64 {
            let inst = family.generate(dim, seed, index);
            let outcome = family.check(&inst, config)?;
            report.instances += 1;
            report.nonconverged += usize::from(!outcome.converged);
            if outcome.violation > report.worst_violation {
                report.worst_violation = outcome.violation;
                report.worst_detail = format!("d={dim} #{index}: {}", outcome.detail);
            }
            if !outcome.passed() {
                report.failures += 1;
                if let (Some(dir), None) = (dump_dir, &report.counterexample) {
                    let cx = Counterexample::new(family, dim, seed, index, config, &inst, outcome);
                    let path = dir.join(cx.file_name());
                    std::fs::create_dir_all(dir).map_err(|e| Error::Parse(format!("{}: {e}", dir.display())))?;
                    let text = serde_json::to_string_pretty(&cx).expect("serializable");
                    std::fs::write(&path, text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
                    report.counterexample = Some(path);
                }
            }
        }
    }
    report.seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

pub fn read_counterexample(path: &Path) -> Result<Counterexample> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}
