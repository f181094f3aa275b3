//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use qdist_cli::suites::{run_family, Family, FamilyReport};
use qdist_core::bounds::{error_probabilities, verify_all, FunctionSpec};
use qdist_core::channels::{random_channel, random_unitary, tensor};
use qdist_core::estimation::{
    build_plan_general, build_plan_pauli_minimal, f_pro_unitary_basis, pauli_minimal_inputs, run_plan, ShotModel,
};
use qdist_core::io::read_channel;
use qdist_core::linalg::{haar_state, random_hermitian};
use qdist_core::process_metrics::{
    ave_measure_mc, f_ave_for_channel, f_ave_formula, j_distance, j_fidelity, stabilized, worst_case, Metric,
};
use qdist_core::state_metrics::{fidelity, trace_distance};
use qdist_core::{rng, Channel, DensityMatrix, OptimizerConfig};
use serde_json::Value;

const SEED: u64 = 20_240_601;

type Outcome = Result<String, Box<dyn std::error::Error>>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn close(name: &str, got: f64, want: f64, tol: f64) -> Result<(), String> {
    ensure(
        (got - want).abs() <= tol,
        format!("{name}: got {got}, expected {want} ± {tol}"),
    )
}

fn within(limit: Duration, start: Instant) -> Result<(), String> {
    let t = start.elapsed();
    ensure(t <= limit, format!("took {t:.1?}, limit {limit:?}"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(format!("{name}.json"))
}

fn load(name: &str) -> Channel {
    read_channel(&fixture(name)).expect("fixture parses")
}

fn family_ok(r: &FamilyReport, min_instances: usize) -> Result<(), String> {
    ensure(
        r.instances >= min_instances && r.passed(),
        format!(
            "{}: {} instances, {} failures; worst {}",
            r.family.name(),
            r.instances,
            r.failures,
            r.worst_detail
        ),
    )
}

fn random_pair(dim: usize, r: &mut rng::Rng) -> (Channel, qdist_core::UnitaryOperator) {
    let kraus = 1 + (rng_index(r) % (dim * dim));
    (
        Channel::from_kraus(random_channel(dim, kraus, r)),
        random_unitary(dim, r),
    )
}

fn rng_index(r: &mut rng::Rng) -> usize {
    use rand::Rng;
    r.random_range(0..1_000_000)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let id = Channel::identity(2);
    let dep = Channel::depolarizing(2, 1.0);
    close("D_pro(dep, I)", j_distance(&dep, &id)?, 0.75, 1e-8)?;
    close("F_pro(dep, I)", j_fidelity(&dep, &id)?, 0.25, 1e-8)?;
    close("F_ave(dep, I)", f_ave_for_channel(&dep, &id)?, 0.5, 1e-8)?;
    for p in [0.1, 0.3, 0.5] {
        let flip = Channel::bit_flip(p);
        close(&format!("D_pro(flip {p}, I)"), j_distance(&flip, &id)?, p, 1e-8)?;
        close(&format!("F_pro(flip {p}, I)"), j_fidelity(&flip, &id)?, 1.0 - p, 1e-8)?;
    }
    within(Duration::from_secs(1), start)?;
    Ok("depolarizing and bit-flip fixtures within 1e-8".into())
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut r = rng::seeded(SEED ^ 2);
    let mut worst: f64 = 0.0;
    for (dim, n) in [(2usize, 1usize), (4, 2)] {
        for _ in 0..20 {
            let (e, u) = random_pair(dim, &mut r);
            let oracle = j_fidelity(&e, &Channel::unitary(&u))?;
            let minimal = build_plan_pauli_minimal(&u, n)?;
            ensure(
                minimal.settings().len() == dim * dim,
                format!(
                    "pauli-minimal plan uses {} settings at d={dim}",
                    minimal.settings().len()
                ),
            )?;
            let observables = (0..dim * dim).map(|_| random_hermitian(dim, &mut r)).collect();
            let general = build_plan_general(&u, pauli_minimal_inputs(n), observables)?;
            for (name, v) in [
                ("unitary basis", f_pro_unitary_basis(&e, &u)?),
                ("pauli-minimal", minimal.evaluate_exact(&e)?),
                ("general", general.evaluate_exact(&e)?),
            ] {
                close(&format!("{name} at d={dim}"), v, oracle, 1e-8)?;
                worst = worst.max((v - oracle).abs());
            }
        }
    }
    within(Duration::from_secs(30), start)?;
    Ok(format!("40 pairs, worst deviation {worst:.1e}"))
}

/// Extremes of the output distance and fidelity over Haar-random joint
/// inputs on ancilla ⊗ system.
fn haar_extremes(
    e: &Channel,
    f: &Channel,
    samples: usize,
    r: &mut rng::Rng,
) -> Result<(f64, f64), Box<dyn std::error::Error>> {
    let d = e.dim();
    let (mut max_d, mut min_f) = (0.0f64, 1.0f64);
    for _ in 0..samples {
        let psi = haar_state(d * d, r).projector();
        let a = DensityMatrix::project(&e.apply_with_ancilla(d, &psi)?)?;
        let b = DensityMatrix::project(&f.apply_with_ancilla(d, &psi)?)?;
        max_d = max_d.max(trace_distance(&a, &b)?);
        min_f = min_f.min(fidelity(&a, &b)?);
    }
    Ok((max_d, min_f))
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let config = OptimizerConfig::with_seed(SEED);
    let id = Channel::identity(2);
    let z = load("pauli_z");
    let f_stab = stabilized(&z, &id, Metric::Fidelity, &config)?.value;
    close("F_stab(Z, I)", f_stab, 0.0, 1e-6)?;
    let d_stab = stabilized(&Channel::depolarizing(2, 1.0), &id, Metric::Distance, &config)?.value;
    ensure(d_stab >= 0.75 - 1e-6, format!("D_stab(dep, I) = {d_stab} < 0.75"))?;

    let mut r = rng::seeded(SEED ^ 3);
    let mut margin = f64::INFINITY;
    for i in 0..20 {
        let e = Channel::from_kraus(random_channel(2, 1 + i % 4, &mut r));
        let f = Channel::from_kraus(random_channel(2, 1 + (i / 4) % 4, &mut r));
        let (max_d, min_f) = haar_extremes(&e, &f, 100_000, &mut r)?;
        let d = stabilized(&e, &f, Metric::Distance, &config)?.value;
        let fi = stabilized(&e, &f, Metric::Fidelity, &config)?.value;
        ensure(d >= max_d - 1e-6, format!("pair {i}: D_stab {d} below sampled {max_d}"))?;
        ensure(
            fi <= min_f + 1e-6,
            format!("pair {i}: F_stab {fi} above sampled {min_f}"),
        )?;
        margin = margin.min(d - max_d).min(min_f - fi);
    }
    let convexity = run_family(Family::Convexity, &[2, 4], 25, SEED, &config, None)?;
    family_ok(&convexity, 50)?;
    within(Duration::from_secs(300), start)?;
    Ok(format!(
        "optimizer dominates 1e5 Haar samples on 20 pairs (min margin {margin:.1e}); convexity on {} segments",
        convexity.instances
    ))
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let config = OptimizerConfig {
        restarts: 2,
        ..OptimizerConfig::with_seed(SEED)
    };
    let families = [
        Family::MetricAxioms,
        Family::JStability,
        Family::Chaining,
        Family::UnitaryInvariance,
        Family::PostProcessing,
        Family::AncillaIndependence,
    ];
    let mut total = 0;
    for family in families {
        let report = run_family(family, &[2, 4], 50, SEED, &config, None)?;
        family_ok(&report, 100)?;
        total += report.instances;
    }
    within(Duration::from_secs(600), start)?;
    Ok(format!("6 suites, {total} instances, no violations"))
}

fn criterion_5() -> Outcome {
    let dep = Channel::depolarizing(2, 1.0);
    let id = Channel::identity(2);
    let single = f_ave_for_channel(&dep, &id)?;
    let extended = f_ave_for_channel(&tensor(&id, &dep), &Channel::identity(4))?;
    close("F_ave(E, F)", single, 0.5, 1e-8)?;
    close("F_ave(I⊗E, I⊗F)", extended, 0.4, 1e-8)?;
    let config = OptimizerConfig::with_seed(SEED);
    let d_stab = stabilized(&dep, &id, Metric::Distance, &config)?.value;
    let d_max = worst_case(&dep, &id, Metric::Distance, &config)?.value;
    close("D_stab", d_stab, 0.75, 1e-6)?;
    close("D_max", d_max, 0.5, 1e-6)?;
    Ok(format!(
        "F_ave {extended:.10} vs {single:.10}; D_stab {d_stab:.8} vs D_max {d_max:.8}"
    ))
}

fn criterion_6() -> Outcome {
    let config = OptimizerConfig::with_seed(SEED);
    let report = run_family(Family::FuchsVanDeGraaf, &[2, 4], 100, SEED, &config, None)?;
    family_ok(&report, 200)?;
    Ok(format!(
        "{} pairs at state and process level, pure states saturate",
        report.instances
    ))
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let config = OptimizerConfig {
        restarts: 2,
        ..OptimizerConfig::with_seed(SEED)
    };
    let sweep = run_family(Family::ComputationBounds, &[2, 4], 50, SEED, &config, None)?;
    family_ok(&sweep, 100)?;

    let id = Channel::identity(2);
    let spec = FunctionSpec::identity(2);
    let dep = Channel::depolarizing(2, 1.0);
    let all = verify_all(&dep, &id, &spec, &config)?;
    ensure(all.all_hold(), "a bound fails for depolarizing")?;
    let avg = all.function_average;
    close("depolarizing average error", avg.additive.lhs, 0.5, 1e-9)?;
    close("depolarizing D_pro bound", avg.additive.rhs, 0.75, 1e-9)?;
    let exact = avg.exact_ideal.ok_or("exact-ideal bound not applied")?;
    close("depolarizing 1 - F_pro bound", exact.rhs, 0.75, 1e-9)?;
    for p in [0.2, 0.3] {
        let flip = Channel::bit_flip(p);
        let probs = error_probabilities(&flip, &spec)?;
        close("bit-flip worst error", probs.worst, p, 1e-12)?;
        close("bit-flip average error", probs.average, p, 1e-12)?;
        let all = verify_all(&flip, &id, &spec, &config)?;
        ensure(all.all_hold(), format!("a bound fails for bit flip {p}"))?;
        close("bit-flip worst additive lhs", all.function_worst.additive.lhs, p, 1e-12)?;
        close("bit-flip D_stab", all.function_worst.additive.rhs, p, 1e-6)?;
        close("bit-flip sampling distance", all.sampling.worst_distance.lhs, p, 1e-12)?;
    }

    // non-vacuity: unitary ideals against unitary reals come close to the joint bound
    let mut r = rng::seeded(SEED ^ 7);
    let mut tightest = f64::INFINITY;
    for _ in 0..10 {
        let ideal = Channel::unitary(&random_unitary(2, &mut r));
        let real = Channel::unitary(&random_unitary(2, &mut r));
        let all = verify_all(&real, &ideal, &spec, &config)?;
        ensure(all.all_hold(), "a bound fails for a unitary pair")?;
        tightest = tightest.min(all.sampling.joint_distance.slack);
    }
    ensure(
        tightest < 0.5,
        format!("joint distance slack never below 0.5 (min {tightest})"),
    )?;
    within(Duration::from_secs(600), start)?;
    Ok(format!(
        "{} sweep pairs, worst slack margin {:.1e}; fixtures match; tightest unitary slack {tightest:.3}",
        sweep.instances, -sweep.worst_violation
    ))
}

/// Fixed seed for the 3σ comparison. Twenty independent 3σ checks fail
/// together about 5% of the time for a correct estimator, so the seed is
/// pinned; calibration over many pairs is a unit test of the core crate.
const MC_SEED: u64 = 8;

fn criterion_8() -> Outcome {
    let mut r = rng::seeded(MC_SEED);
    let mut worst: f64 = 0.0;
    for i in 0..20u64 {
        let dim = if i < 10 { 2 } else { 4 };
        let (e, u) = random_pair(dim, &mut r);
        let mc = ave_measure_mc(&e, &Channel::unitary(&u), Metric::Fidelity, 10_000, MC_SEED + i)?;
        let exact = f_ave_formula(&e, &u)?;
        let z = (mc.estimate - exact).abs() / mc.stderr;
        ensure(
            z <= 3.0,
            format!("pair {i}: {} vs {exact} is {z:.2} standard errors", mc.estimate),
        )?;
        worst = worst.max(z);
    }
    Ok(format!("20 pairs, worst deviation {worst:.2} standard errors"))
}

fn criterion_9() -> Outcome {
    let mut r = rng::seeded(SEED ^ 9);
    let mut worst_z: f64 = 0.0;
    let mut ratios = Vec::new();
    for (i, (dim, n)) in [(2usize, 1usize), (2, 1), (2, 1), (4, 2), (4, 2)]
        .into_iter()
        .enumerate()
    {
        let (e, u) = random_pair(dim, &mut r);
        let truth = j_fidelity(&e, &Channel::unitary(&u))?;
        let plan = build_plan_pauli_minimal(&u, n)?;
        let run = |shots: u64| {
            run_plan(
                &plan,
                &e,
                &ShotModel {
                    shots_per_setting: shots,
                    seed: SEED + i as u64,
                },
            )
        };
        let (coarse, fine) = (run(10_000)?, run(1_000_000)?);
        let z = (fine.estimate - truth).abs() / fine.stderr;
        ensure(
            z <= 4.0,
            format!("case {i}: estimate {} vs {truth} is {z:.2} stderr", fine.estimate),
        )?;
        worst_z = worst_z.max(z);
        let ratio = coarse.stderr / fine.stderr;
        ensure(
            (8.0..=12.0).contains(&ratio),
            format!("case {i}: stderr ratio {ratio:.3}, expected 10 ± 20%"),
        )?;
        ratios.push(ratio);
    }
    Ok(format!(
        "worst {worst_z:.2} stderr at 1e6 shots; stderr ratios {ratios:.2?}"
    ))
}

fn qdist(args: &[&str]) -> (i32, Value) {
    let out = Command::new(env!("CARGO_BIN_EXE_qdist"))
        .args(args)
        .output()
        .expect("binary runs");
    let doc = serde_json::from_slice(&out.stdout).unwrap_or(Value::Null);
    (out.status.code().unwrap_or(-1), doc)
}

fn criterion_10() -> Outcome {
    let path = |n: &str| fixture(n).to_string_lossy().into_owned();
    let id = path("identity");
    let mut cases = vec![("depolarizing", 0.75, 0.25, Some(0.5))];
    cases.extend([
        ("bitflip01", 0.1, 0.9, None),
        ("bitflip03", 0.3, 0.7, None),
        ("bitflip05", 0.5, 0.5, None),
    ]);
    for (name, d_pro, f_pro, f_ave) in cases {
        let (code, doc) = qdist(&["--seed", "1", "compare", &id, &path(name)]);
        ensure(code == 0, format!("compare {name} exited {code}"))?;
        let value = |k: &str| doc["report"][k]["value"].as_f64().unwrap_or(f64::NAN);
        close(&format!("{name} d_pro"), value("d_pro"), d_pro, 1e-8)?;
        close(&format!("{name} f_pro"), value("f_pro"), f_pro, 1e-8)?;
        if let Some(f_ave) = f_ave {
            close(&format!("{name} f_ave"), value("f_ave"), f_ave, 1e-8)?;
        }
    }
    let (code, doc) = qdist(&["--seed", "1", "verify", "--sweep", "2"]);
    ensure(code == 0 && doc["passed"] == true, format!("verify exited {code}"))?;

    let dir = std::env::temp_dir().join(format!("qdist-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for name in ["amplitude_damping03", "hadamard", "depolarizing05"] {
        let out = dir.join(format!("{name}.json"));
        let (code, doc) = qdist(&[
            "--seed",
            "1",
            "tomography",
            &path(name),
            "--shots",
            "0",
            "--channel-out",
            &out.to_string_lossy(),
        ]);
        ensure(code == 0, format!("tomography {name} exited {code}"))?;
        let reported = doc["d_pro"]["value"].as_f64().unwrap_or(f64::NAN);
        let round_trip = j_distance(&read_channel(&out)?, &load(name))?;
        ensure(
            reported < 1e-8 && round_trip < 1e-8,
            format!("tomography {name}: reported {reported}, recomputed {round_trip}"),
        )?;
        worst = worst.max(round_trip);
    }
    let _ = std::fs::remove_dir_all(&dir);
    Ok(format!(
        "compare matches fixtures, verify exits 0, tomography round trip {worst:.1e}"
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("closed-form fixture values", criterion_1),
        ("estimation oracle equivalence", criterion_2),
        ("convex optimizer correctness", criterion_3),
        ("property suites", criterion_4),
        ("instability demonstrations", criterion_5),
        ("Fuchs-van de Graaf sandwich", criterion_6),
        ("computation bounds", criterion_7),
        ("Monte Carlo average fidelity", criterion_8),
        ("shot-noise estimation", criterion_9),
        ("end-to-end CLI", criterion_10),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let label = format!("criterion {:>2}: {name}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| label.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(run))
            .unwrap_or_else(|p| {
                let msg = p
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
                Err(format!("panicked: {}", msg.unwrap_or_default()).into())
            })
            .map_err(|e| e.to_string());
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {label} ({secs:.1} s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {label} ({secs:.1} s): {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
