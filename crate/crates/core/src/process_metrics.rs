//! Distances and fidelities between quantum processes.
//!
//! * Choi-state measures: [`j_distance`], [`j_fidelity`] and [`process_purity`].
//! * Haar averages: [`ave_measure_mc`] and the closed form [`f_ave_formula`].
//! * Worst case without an ancilla: [`worst_case`].
//! * Worst case with a `d`-dimensional ancilla: [`stabilized`].
//!
//! The stabilized objective is a function of the reduced input state `ρ_Q`.
//! For the canonical purification `ψ = Σ_i √λ_i |i⟩|v_i⟩ = √d (K ⊗ I)|Φ⟩`
//! with `K = √Λ Vᵀ`, the output is `(I ⊗ E)(ψψ†) = d (K ⊗ I) ρ_E (K ⊗ I)†`,
//! so each evaluation only needs the two Choi states.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{random_isometry, Channel};
use crate::error::{Error, Result};
use crate::linalg::{
    self, hermitian_eig_unchecked, identity, kron, ComplexMatrix, ComplexVector, DensityMatrix, UnitaryOperator,
};
use crate::optimize::{self, OptimizerConfig, OptimizerResult, Sense};
use crate::rng;
use crate::state_metrics::{self, c_from_fidelity, FuchsVanDeGraaf};

pub const DEFAULT_MC_SAMPLES: usize = 10_000;
const MC_CHUNK: usize = 256;
const EMBEDDING_SEED: u64 = 0xa11c_111a;

/// Which state measure a process measure is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// Trace distance; worst cases maximize it.
    Distance,
    /// Fidelity; worst cases minimize it.
    Fidelity,
}

impl Metric {
    fn worst(self) -> Sense {
        match self {
            Metric::Distance => Sense::Maximize,
            Metric::Fidelity => Sense::Minimize,
        }
    }

    fn best_possible(self) -> f64 {
        match self {
            Metric::Distance => 1.0,
            Metric::Fidelity => 0.0,
        }
    }

    /// Measure between `A A†` and `B B†`.
    fn evaluate(self, a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
        match self {
            Metric::Distance => state_metrics::trace_distance_factors(a, b),
            Metric::Fidelity => state_metrics::fidelity_factors(a, b),
        }
    }
}

/// Factor of `(I_A ⊗ E)(|ψ⟩⟨ψ|)`: column `j` is `(I ⊗ E_j)|ψ⟩`. The input
/// is the `d × a` matrix `m` with `ψ[i·d + q] = m[(q, i)]`, so the column is
/// the column-major `E_j m`.
fn output_factor(kraus: &[ComplexMatrix], m: &ComplexMatrix) -> ComplexMatrix {
    let n = m.nrows() * m.ncols();
    let mut out = ComplexMatrix::zeros(n, kraus.len());
    for (j, k) in kraus.iter().enumerate() {
        out.column_mut(j).copy_from_slice((k * m).as_slice());
    }
    out
}

fn state_as_matrix(psi: &ComplexVector, dim: usize) -> ComplexMatrix {
    ComplexMatrix::from_column_slice(dim, psi.len() / dim, psi.as_slice())
}

fn same_dim(e: &Channel, f: &Channel) -> Result<()> {
    e.check_dim(f.dim())
}

/// `D_pro(E, F) = D(ρ_E, ρ_F)`.
pub fn j_distance(e: &Channel, f: &Channel) -> Result<f64> {
    same_dim(e, f)?;
    state_metrics::trace_distance(e.choi().state(), f.choi().state())
}

/// `F_pro(E, F) = F(ρ_E, ρ_F)`.
pub fn j_fidelity(e: &Channel, f: &Channel) -> Result<f64> {
    same_dim(e, f)?;
    state_metrics::fidelity(e.choi().state(), f.choi().state())
}

/// `F_pro(E, U) = ⟨Φ_U|ρ_E|Φ_U⟩` with `|Φ_U⟩ = (I ⊗ U)|Φ⟩`.
pub fn j_fidelity_unitary(e: &Channel, u: &UnitaryOperator) -> Result<f64> {
    e.check_dim(u.dim())?;
    let d = u.dim();
    let phi_u = kron(&identity(d), u.matrix()) * linalg::max_entangled(d).amplitudes();
    Ok(phi_u.dotc(&(e.choi().matrix() * &phi_u)).re)
}

/// Average fidelity against a unitary: `(d F_pro + 1)/(d + 1)`.
pub fn f_ave_formula(e: &Channel, u: &UnitaryOperator) -> Result<f64> {
    let d = u.dim() as f64;
    Ok((d * j_fidelity_unitary(e, u)? + 1.0) / (d + 1.0))
}

/// [`f_ave_formula`] for an ideal channel that must be unitary.
pub fn f_ave_for_channel(e: &Channel, ideal: &Channel) -> Result<f64> {
    // for a channel the defect is 1 − tr ρ_E², zero exactly for unitaries
    let u = ideal
        .as_unitary()
        .ok_or_else(|| Error::NonUnitaryTarget(1.0 - process_purity(ideal)))?;
    f_ave_formula(e, u)
}

/// `tr ρ_E²`.
pub fn process_purity(e: &Channel) -> f64 {
    e.choi().state().purity()
}

/// A Monte Carlo mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub samples: usize,
    pub seed: u64,
}

/// Haar average of `Δ(E(ψ), F(ψ))`.
pub fn ave_measure_mc(e: &Channel, f: &Channel, metric: Metric, samples: usize, seed: u64) -> Result<McEstimate> {
    ave_measure_mc_with_ancilla(e, f, metric, 1, samples, seed)
}

/// Haar average of `Δ((I_A ⊗ E)(ψ), (I_A ⊗ F)(ψ))` over pure states of
/// `A ⊗ Q`.
pub fn ave_measure_mc_with_ancilla(
    e: &Channel,
    f: &Channel,
    metric: Metric,
    ancilla_dim: usize,
    samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    same_dim(e, f)?;
    if samples < 2 {
        return Err(Error::Parse("at least two samples are required".into()));
    }
    let d = e.dim();
    let n = ancilla_dim * d;
    let (ke, kf) = (e.kraus().elements(), f.kraus().elements());
    let chunks = samples.div_ceil(MC_CHUNK);
    let values: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut r = rng::stream(seed, chunk as u64);
            let count = MC_CHUNK.min(samples - chunk * MC_CHUNK);
            (0..count)
                .map(|_| {
                    let psi = state_as_matrix(linalg::haar_state(n, &mut r).amplitudes(), d);
                    metric.evaluate(&output_factor(ke, &psi), &output_factor(kf, &psi))
                })
                .collect()
        })
        .collect();
    let all: Vec<f64> = values.into_iter().flatten().collect();
    let m = all.len() as f64;
    let mean = all.iter().sum::<f64>() / m;
    let var = all.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    Ok(McEstimate {
        estimate: mean,
        stderr: (var / m).sqrt(),
        samples,
        seed,
    })
}

/// `D_max` / `F_min`: extremal `Δ(E(ψ), F(ψ))` over pure inputs of the
/// system alone.
pub fn worst_case(e: &Channel, f: &Channel, metric: Metric, config: &OptimizerConfig) -> Result<OptimizerResult> {
    same_dim(e, f)?;
    config.validate()?;
    let (ke, kf) = (e.kraus().elements(), f.kraus().elements());
    let objective = |psi: &ComplexVector| {
        let m = state_as_matrix(psi, psi.len());
        metric.evaluate(&output_factor(ke, &m), &output_factor(kf, &m))
    };
    Ok(optimize::pure_state_search(objective, e.dim(), metric.worst(), config))
}

/// Stabilized objective `Δ((I_A ⊗ E)(ψ_ρ), (I_A ⊗ F)(ψ_ρ))` for the canonical
/// purification `ψ_ρ` of `ρ_Q` into an ancilla of dimension `ancilla_dim`.
/// Negative eigenvalues of `rho_q` are clamped and the trace renormalized.
pub fn stabilized_objective(
    e: &Channel,
    f: &Channel,
    metric: Metric,
    rho_q: &ComplexMatrix,
    ancilla_dim: usize,
) -> Result<f64> {
    same_dim(e, f)?;
    e.check_dim(rho_q.nrows())?;
    if ancilla_dim < e.dim() {
        return Err(Error::AncillaTooSmall {
            rank: e.dim(),
            ancilla: ancilla_dim,
        });
    }
    Ok(StabilizedProblem::new(e, f, metric, ancilla_dim).value(rho_q))
}

struct StabilizedProblem<'a> {
    kraus_e: &'a [ComplexMatrix],
    kraus_f: &'a [ComplexMatrix],
    /// Isometry from the `d` Schmidt directions into a larger ancilla.
    embedding: Option<ComplexMatrix>,
    metric: Metric,
}

impl<'a> StabilizedProblem<'a> {
    fn new(e: &'a Channel, f: &'a Channel, metric: Metric, ancilla_dim: usize) -> Self {
        let d = e.dim();
        let embedding = (ancilla_dim > d)
            .then(|| random_isometry(ancilla_dim, d, &mut rng::stream(EMBEDDING_SEED, ancilla_dim as u64)));
        Self {
            kraus_e: e.kraus().elements(),
            kraus_f: f.kraus().elements(),
            embedding,
            metric,
        }
    }

    /// Purifying state as a `d × a` matrix. `L = V √Λ` satisfies
    /// `L L† = ρ_Q`; an embedding `W` gives `L Wᵀ`.
    fn purification(&self, rho_q: &ComplexMatrix) -> ComplexMatrix {
        let eig = hermitian_eig_unchecked(rho_q);
        let total: f64 = eig.values.iter().map(|l| l.max(0.0)).sum();
        let scale = ComplexVector::from_iterator(
            eig.values.len(),
            eig.values.iter().map(|l| linalg::c((l.max(0.0) / total).sqrt(), 0.0)),
        );
        let l = eig.vectors * ComplexMatrix::from_diagonal(&scale);
        match &self.embedding {
            Some(w) => l * w.transpose(),
            None => l,
        }
    }

    fn factors(&self, rho_q: &ComplexMatrix) -> (ComplexMatrix, ComplexMatrix) {
        let m = self.purification(rho_q);
        (output_factor(self.kraus_e, &m), output_factor(self.kraus_f, &m))
    }

    fn value(&self, rho_q: &ComplexMatrix) -> f64 {
        let (a, b) = self.factors(rho_q);
        self.metric.evaluate(&a, &b)
    }
}

/// `D_stab` / `F_stab` with an ancilla of dimension `d`.
pub fn stabilized(e: &Channel, f: &Channel, metric: Metric, config: &OptimizerConfig) -> Result<OptimizerResult> {
    stabilized_with(e, f, metric, e.dim(), config, &[])
}

/// Stabilized measure with an explicit ancilla dimension (at least `d`) and
/// additional starting states for the search.
pub fn stabilized_with(
    e: &Channel,
    f: &Channel,
    metric: Metric,
    ancilla_dim: usize,
    config: &OptimizerConfig,
    extra_starts: &[DensityMatrix],
) -> Result<OptimizerResult> {
    same_dim(e, f)?;
    config.validate()?;
    if ancilla_dim < e.dim() {
        return Err(Error::AncillaTooSmall {
            rank: e.dim(),
            ancilla: ancilla_dim,
        });
    }
    let problem = StabilizedProblem::new(e, f, metric, ancilla_dim);
    Ok(optimize::frank_wolfe(
        |rho| problem.value(rho),
        e.dim(),
        metric.worst(),
        config,
        extra_starts,
        Some(metric.best_possible()),
    ))
}

/// Convergence diagnostics of one optimizer run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerDiagnostics {
    pub iterations: usize,
    pub final_gap: f64,
    pub converged: bool,
}

impl From<&OptimizerResult> for OptimizerDiagnostics {
    fn from(r: &OptimizerResult) -> Self {
        Self {
            iterations: r.iterations,
            final_gap: r.final_gap,
            converged: r.converged,
        }
    }
}

/// Internal consistency checks recorded with a report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyChecks {
    /// `1 − √F_pro ≤ D_pro ≤ √(1 − F_pro)`.
    pub fuchs_van_de_graaf: bool,
    pub d_max_le_d_stab: bool,
    pub f_min_ge_f_stab: bool,
}

impl ConsistencyChecks {
    pub fn all(&self) -> bool {
        self.fuchs_van_de_graaf && self.d_max_le_d_stab && self.f_min_ge_f_stab
    }
}

/// Every process measure for one `(real, ideal)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureReport {
    pub dim: usize,
    pub d_pro: f64,
    pub f_pro: f64,
    /// Closed form, present only when the ideal channel is unitary.
    pub f_ave: Option<f64>,
    pub d_ave_mc: McEstimate,
    pub f_ave_mc: McEstimate,
    pub d_max: f64,
    pub f_min: f64,
    pub d_stab: f64,
    pub f_stab: f64,
    pub c_stab: f64,
    pub process_purity: f64,
    pub d_max_optimizer: OptimizerDiagnostics,
    pub f_min_optimizer: OptimizerDiagnostics,
    pub d_stab_optimizer: OptimizerDiagnostics,
    pub f_stab_optimizer: OptimizerDiagnostics,
    pub optimizer_config: OptimizerConfig,
    pub checks: ConsistencyChecks,
}

impl MeasureReport {
    pub fn all_converged(&self) -> bool {
        [
            self.d_max_optimizer,
            self.f_min_optimizer,
            self.d_stab_optimizer,
            self.f_stab_optimizer,
        ]
        .iter()
        .all(|d| d.converged)
    }
}

const CHECK_TOL: f64 = 1e-6;

/// Computes every measure of `e` (real) against `f` (ideal).
pub fn full_report(e: &Channel, f: &Channel, config: &OptimizerConfig) -> Result<MeasureReport> {
    full_report_with_samples(e, f, config, DEFAULT_MC_SAMPLES)
}

pub fn full_report_with_samples(
    e: &Channel,
    f: &Channel,
    config: &OptimizerConfig,
    mc_samples: usize,
) -> Result<MeasureReport> {
    same_dim(e, f)?;
    config.validate()?;
    let d_pro = j_distance(e, f)?;
    let f_pro = j_fidelity(e, f)?;
    let f_ave = f.as_unitary().map(|u| f_ave_formula(e, u)).transpose()?;
    let d_ave_mc = ave_measure_mc(e, f, Metric::Distance, mc_samples, config.seed)?;
    let f_ave_mc = ave_measure_mc(e, f, Metric::Fidelity, mc_samples, config.seed)?;
    let d_max = worst_case(e, f, Metric::Distance, config)?;
    let f_min = worst_case(e, f, Metric::Fidelity, config)?;
    // the unstabilized optimum is a feasible point of the stabilized problem
    let d_stab = stabilized_with(
        e,
        f,
        Metric::Distance,
        e.dim(),
        config,
        std::slice::from_ref(&d_max.optimal_input),
    )?;
    let f_stab = stabilized_with(
        e,
        f,
        Metric::Fidelity,
        e.dim(),
        config,
        std::slice::from_ref(&f_min.optimal_input),
    )?;
    let checks = ConsistencyChecks {
        fuchs_van_de_graaf: FuchsVanDeGraaf::from_values(d_pro, f_pro).holds,
        d_max_le_d_stab: d_max.value <= d_stab.value + CHECK_TOL,
        f_min_ge_f_stab: f_min.value + CHECK_TOL >= f_stab.value,
    };
    Ok(MeasureReport {
        dim: e.dim(),
        d_pro,
        f_pro,
        f_ave,
        d_ave_mc,
        f_ave_mc,
        d_max: d_max.value,
        f_min: f_min.value,
        d_stab: d_stab.value,
        f_stab: f_stab.value,
        c_stab: c_from_fidelity(f_stab.value),
        process_purity: process_purity(e),
        d_max_optimizer: (&d_max).into(),
        f_min_optimizer: (&f_min).into(),
        d_stab_optimizer: (&d_stab).into(),
        f_stab_optimizer: (&f_stab).into(),
        optimizer_config: *config,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{gates, random_channel, tensor};
    use crate::linalg::{max_abs_diff, purify, random_density};

    fn z() -> Channel {
        Channel::unitary(&UnitaryOperator::new(gates::pauli_z()).unwrap())
    }

    fn quick() -> OptimizerConfig {
        OptimizerConfig {
            restarts: 3,
            seed: 7,
            ..OptimizerConfig::default()
        }
    }

    #[test]
    fn j_distance_examples() {
        let id = Channel::identity(2);
        let dep = Channel::depolarizing(2, 1.0);
        assert!(j_distance(&dep, &dep).unwrap().abs() < 1e-15);
        assert!((j_distance(&dep, &id).unwrap() - 0.75).abs() < 1e-12);
        for p in [0.1, 0.3, 0.5] {
            assert!((j_distance(&Channel::bit_flip(p), &id).unwrap() - p).abs() < 1e-12);
        }
        assert!(matches!(
            j_distance(&id, &Channel::identity(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn j_fidelity_examples() {
        let id = Channel::identity(2);
        let mut r = rng::seeded(20);
        let u = Channel::from_kraus(random_channel(2, 1, &mut r));
        assert!((j_fidelity(&u, &u).unwrap() - 1.0).abs() < 1e-12);
        assert!((j_fidelity(&Channel::depolarizing(2, 1.0), &id).unwrap() - 0.25).abs() < 1e-12);
        for p in [0.1, 0.3, 0.5] {
            assert!((j_fidelity(&Channel::bit_flip(p), &id).unwrap() - (1.0 - p)).abs() < 1e-12);
        }
        // shortcut vs general formula
        for _ in 0..10 {
            let e = Channel::from_kraus(random_channel(3, 4, &mut r));
            let uu = crate::channels::random_unitary(3, &mut r);
            let a = j_fidelity_unitary(&e, &uu).unwrap();
            let target = Channel::unitary(&uu);
            let b = state_metrics::fidelity(e.choi().state(), target.choi().state()).unwrap();
            assert!((a - b).abs() < 1e-10);
            // square roots of the zero eigenvalues cost accuracy on this route
            let c = state_metrics::fidelity_eigen_route(e.choi().state(), target.choi().state()).unwrap();
            assert!((a - c).abs() < 1e-6);
        }
    }

    #[test]
    fn f_ave_examples() {
        let id = UnitaryOperator::identity(2);
        let dep = Channel::depolarizing(2, 1.0);
        assert!((f_ave_formula(&Channel::identity(2), &id).unwrap() - 1.0).abs() < 1e-12);
        assert!((f_ave_formula(&dep, &id).unwrap() - 0.5).abs() < 1e-12);
        let big = tensor(&Channel::identity(2), &dep);
        let f = f_ave_formula(&big, &UnitaryOperator::identity(4)).unwrap();
        assert!((f - 0.4).abs() < 1e-12);
        assert!(matches!(
            f_ave_for_channel(&dep, &Channel::bit_flip(0.2)),
            Err(Error::NonUnitaryTarget(_))
        ));
    }

    #[test]
    fn mc_examples() {
        let e = Channel::bit_flip(0.2);
        let d = ave_measure_mc(&e, &e, Metric::Distance, 100, 1).unwrap();
        assert!(d.estimate.abs() < 1e-12 && d.stderr < 1e-12);
        let f = ave_measure_mc(&e, &e, Metric::Fidelity, 100, 1).unwrap();
        assert!((f.estimate - 1.0).abs() < 1e-9 && f.stderr < 1e-9);

        let dep = Channel::depolarizing(2, 1.0);
        let id = Channel::identity(2);
        let f = ave_measure_mc(&dep, &id, Metric::Fidelity, 20_000, 2).unwrap();
        assert!((f.estimate - 0.5).abs() < 3.0 * f.stderr.max(1e-12));
        assert!(ave_measure_mc(&dep, &id, Metric::Fidelity, 1, 2).is_err());
    }

    #[test]
    fn mc_stderr_is_calibrated() {
        // standardized errors against the closed form should have unit spread
        let mut r = rng::seeded(22);
        let n = 200;
        let mut sum_sq = 0.0;
        for i in 0..n {
            let e = Channel::from_kraus(random_channel(2, 1 + i % 4, &mut r));
            let u = crate::channels::random_unitary(2, &mut r);
            let mc = ave_measure_mc(&e, &Channel::unitary(&u), Metric::Fidelity, 2000, i as u64).unwrap();
            let z = (mc.estimate - f_ave_formula(&e, &u).unwrap()) / mc.stderr;
            sum_sq += z * z;
        }
        let rms = (sum_sq / n as f64).sqrt();
        assert!((0.8..1.2).contains(&rms), "rms {rms}");
    }

    #[test]
    fn ancilla_average_approaches_j_distance() {
        // no rate is known, so only the direction of travel is asserted
        let mut r = rng::seeded(23);
        for _ in 0..3 {
            let e = Channel::from_kraus(random_channel(2, 2, &mut r));
            let f = Channel::from_kraus(random_channel(2, 1, &mut r));
            let target = j_distance(&e, &f).unwrap();
            let gaps: Vec<f64> = [2, 4, 8]
                .iter()
                .map(|&a| {
                    let mc = ave_measure_mc_with_ancilla(&e, &f, Metric::Distance, a, 4000, 5).unwrap();
                    (mc.estimate - target).abs()
                })
                .collect();
            assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
        }
    }

    #[test]
    fn mc_is_deterministic() {
        let mut r = rng::seeded(21);
        let e = Channel::from_kraus(random_channel(2, 2, &mut r));
        let f = Channel::identity(2);
        let a = ave_measure_mc(&e, &f, Metric::Distance, 1000, 9).unwrap();
        let b = ave_measure_mc(&e, &f, Metric::Distance, 1000, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn worst_case_examples() {
        let id = Channel::identity(2);
        let same = worst_case(&id, &id, Metric::Distance, &quick()).unwrap();
        assert!(same.value.abs() < 1e-12);
        let same = worst_case(&id, &id, Metric::Fidelity, &quick()).unwrap();
        assert!((same.value - 1.0).abs() < 1e-12);

        let r = worst_case(&z(), &id, Metric::Fidelity, &quick()).unwrap();
        assert!(r.value < 1e-9, "F_min(Z, I) = {}", r.value);

        let dep = Channel::depolarizing(2, 1.0);
        let r = worst_case(&dep, &id, Metric::Distance, &quick()).unwrap();
        assert!((r.value - 0.5).abs() < 1e-9);
    }

    #[test]
    fn stabilized_examples() {
        let id = Channel::identity(2);
        let r = stabilized(&id, &id, Metric::Distance, &quick()).unwrap();
        assert!(r.value.abs() < 1e-12 && r.converged);
        let r = stabilized(&id, &id, Metric::Fidelity, &quick()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12 && r.converged);

        let r = stabilized(&z(), &id, Metric::Fidelity, &quick()).unwrap();
        assert!(r.value < 1e-6, "F_stab(Z, I) = {}", r.value);

        let dep = Channel::depolarizing(2, 1.0);
        let r = stabilized(&dep, &id, Metric::Distance, &quick()).unwrap();
        assert!(r.value >= 0.75 - 1e-6, "D_stab = {}", r.value);
    }

    #[test]
    fn stabilized_objective_matches_direct_purification() {
        let mut r = rng::seeded(22);
        let e = Channel::from_kraus(random_channel(2, 3, &mut r));
        let f = Channel::from_kraus(random_channel(2, 1, &mut r));
        for ancilla in [2, 3, 4] {
            let rho = random_density(2, &mut r);
            let psi = purify(&rho, ancilla).unwrap().projector();
            let a = e.apply_with_ancilla(ancilla, &psi).unwrap();
            let b = f.apply_with_ancilla(ancilla, &psi).unwrap();
            let direct_d = state_metrics::trace_distance(
                &DensityMatrix::new(a.clone()).unwrap(),
                &DensityMatrix::new(b.clone()).unwrap(),
            )
            .unwrap();
            let direct_f =
                state_metrics::fidelity(&DensityMatrix::new(a).unwrap(), &DensityMatrix::new(b).unwrap()).unwrap();
            let vd = stabilized_objective(&e, &f, Metric::Distance, rho.matrix(), ancilla).unwrap();
            let vf = stabilized_objective(&e, &f, Metric::Fidelity, rho.matrix(), ancilla).unwrap();
            assert!((direct_d - vd).abs() < 1e-10, "{direct_d} {vd}");
            assert!((direct_f - vf).abs() < 1e-8, "{direct_f} {vf}");
        }
        let problem = StabilizedProblem::new(&e, &f, Metric::Distance, 2);
        let rho = random_density(2, &mut r);
        let (fa, _) = problem.factors(rho.matrix());
        let psi = purify(&rho, 2).unwrap().projector();
        let a = e.apply_with_ancilla(2, &psi).unwrap();
        assert!(max_abs_diff(&(&fa * fa.adjoint()), &a) < 1e-12);
        assert!(matches!(
            stabilized_objective(&e, &f, Metric::Distance, &identity(2), 1),
            Err(Error::AncillaTooSmall { .. })
        ));
    }

    #[test]
    fn purity_examples() {
        let mut r = rng::seeded(23);
        let u = Channel::from_kraus(random_channel(3, 1, &mut r));
        assert!((process_purity(&u) - 1.0).abs() < 1e-12);
        assert!((process_purity(&Channel::depolarizing(2, 1.0)) - 0.25).abs() < 1e-12);
        assert!((process_purity(&Channel::bit_flip(0.5)) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn report_identity_pair() {
        let id = Channel::identity(2);
        let rep = full_report_with_samples(&id, &id, &quick(), 200).unwrap();
        assert!(rep.d_pro.abs() < 1e-12 && rep.d_max.abs() < 1e-12 && rep.d_stab.abs() < 1e-12);
        assert!((rep.f_pro - 1.0).abs() < 1e-12 && (rep.f_min - 1.0).abs() < 1e-12);
        assert!((rep.f_stab - 1.0).abs() < 1e-12);
        assert!(rep.checks.all() && rep.all_converged());
    }

    #[test]
    fn report_bit_flip() {
        let rep = full_report_with_samples(&Channel::bit_flip(0.3), &Channel::identity(2), &quick(), 500).unwrap();
        assert!((rep.d_pro - 0.3).abs() < 1e-12);
        assert!((rep.f_pro - 0.7).abs() < 1e-12);
        assert!((rep.f_ave.unwrap() - 0.8).abs() < 1e-12);
        assert!((rep.c_stab - (1.0 - rep.f_stab).sqrt()).abs() < 1e-12);
        assert!(rep.checks.all());
    }
}
