//! Error bounds for function and sampling computations.
//!
//! A computation maps a basis input `|x⟩` through a channel and measures in
//! the computational basis. The checks below compare exact error
//! probabilities and outcome distributions of a real channel against bounds
//! built from the process measures of the (real, ideal) pair.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channels::{compose, mixture, random_channel, Channel};
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, PureState, UnitaryOperator};
use crate::optimize::OptimizerConfig;
use crate::process_metrics::{j_distance, j_fidelity, stabilized, stabilized_objective, Metric, OptimizerDiagnostics};
use crate::state_metrics::{bhattacharya, c_from_fidelity, kolmogorov, measure_in_basis, ClassicalDistribution};

/// Slack allowed before a bound counts as violated.
pub const BOUND_TOL: f64 = 1e-7;
/// `p̄_e^id` below this counts as an ideal computation that always succeeds.
pub const EXACT_IDEAL_TOL: f64 = 1e-12;

/// A classical function on `{0, …, dim − 1}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionSpec {
    dim: usize,
    outputs: Vec<usize>,
}

impl FunctionSpec {
    pub fn new(outputs: Vec<usize>) -> Result<Self> {
        let dim = outputs.len();
        if dim == 0 {
            return Err(Error::InvalidState("function on an empty domain".into()));
        }
        if let Some(&bad) = outputs.iter().find(|&&y| y >= dim) {
            return Err(Error::InvalidState(format!("function output {bad} outside 0..{dim}")));
        }
        Ok(Self { dim, outputs })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            outputs: (0..dim).collect(),
        }
    }

    pub fn random_permutation<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        let mut outputs: Vec<usize> = (0..dim).collect();
        outputs.shuffle(rng);
        Self { dim, outputs }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn apply(&self, x: usize) -> usize {
        self.outputs[x]
    }

    /// `U|x⟩ = |f(x)⟩` when `f` is a bijection.
    pub fn permutation_unitary(&self) -> Option<UnitaryOperator> {
        let mut seen = vec![false; self.dim];
        for &y in &self.outputs {
            if std::mem::replace(&mut seen[y], true) {
                return None;
            }
        }
        let mut m = ComplexMatrix::zeros(self.dim, self.dim);
        for (x, &y) in self.outputs.iter().enumerate() {
            m[(y, x)] = crate::linalg::c(1.0, 0.0);
        }
        Some(UnitaryOperator::new(m).expect("permutation matrices are unitary"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorProbabilities {
    pub per_instance: Vec<f64>,
    pub worst: f64,
    pub average: f64,
}

/// Exact `p_e(x) = 1 − ⟨f(x)|E(|x⟩⟨x|)|f(x)⟩` for every instance.
pub fn error_probabilities(ch: &Channel, spec: &FunctionSpec) -> Result<ErrorProbabilities> {
    ch.check_dim(spec.dim)?;
    let per_instance: Vec<f64> = (0..spec.dim)
        .map(|x| {
            let out = ch.apply_matrix(&PureState::basis(spec.dim, x).projector());
            let y = spec.apply(x);
            (1.0 - out[(y, y)].re).clamp(0.0, 1.0)
        })
        .collect();
    let worst = per_instance.iter().copied().fold(0.0, f64::max);
    let average = per_instance.iter().sum::<f64>() / spec.dim as f64;
    Ok(ErrorProbabilities {
        per_instance,
        worst,
        average,
    })
}

/// Outcome statistics of measuring `F(|x⟩⟨x|)` and `E(|x⟩⟨x|)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingOutcome {
    pub per_instance_ideal: Vec<ClassicalDistribution>,
    pub per_instance_real: Vec<ClassicalDistribution>,
    /// `p(x, y) = p_x(y)/d` at index `x·d + y`.
    pub joint_ideal: ClassicalDistribution,
    pub joint_real: ClassicalDistribution,
}

pub fn sampling_outcome(ideal: &Channel, real: &Channel) -> Result<SamplingOutcome> {
    ideal.check_dim(real.dim())?;
    let d = ideal.dim();
    let measure = |ch: &Channel| -> Result<Vec<ClassicalDistribution>> {
        (0..d)
            .map(|x| Ok(measure_in_basis(&ch.apply(&PureState::basis(d, x).to_density())?)))
            .collect()
    };
    let joint = |rows: &[ClassicalDistribution]| {
        ClassicalDistribution::from_raw(
            rows.iter()
                .flat_map(|p| p.probabilities().iter().map(|v| v / d as f64))
                .collect(),
        )
    };
    let per_instance_ideal = measure(ideal)?;
    let per_instance_real = measure(real)?;
    Ok(SamplingOutcome {
        joint_ideal: joint(&per_instance_ideal),
        joint_real: joint(&per_instance_real),
        per_instance_ideal,
        per_instance_real,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    AtMost,
    AtLeast,
}

/// One inequality `lhs ≤ rhs` or `lhs ≥ rhs` with its slack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub relation: Relation,
    /// Nonnegative when the bound holds exactly.
    pub slack: f64,
    pub holds: bool,
}

impl BoundCheck {
    pub fn new(lhs: f64, relation: Relation, rhs: f64) -> Self {
        let slack = match relation {
            Relation::AtMost => rhs - lhs,
            Relation::AtLeast => lhs - rhs,
        };
        Self {
            lhs,
            rhs,
            relation,
            slack,
            holds: slack >= -BOUND_TOL,
        }
    }
}

/// Worst-case function computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionWorstReport {
    /// `p_e ≤ p_e^id + D_stab`.
    pub additive: BoundCheck,
    /// `p_e ≤ (√p_e^id + C_stab)²`.
    pub root: BoundCheck,
}

impl FunctionWorstReport {
    pub fn all_hold(&self) -> bool {
        self.additive.holds && self.root.holds
    }
}

pub fn verify_function_worst(
    e: &Channel,
    f_ideal: &Channel,
    spec: &FunctionSpec,
    d_stab: f64,
    c_stab: f64,
) -> Result<FunctionWorstReport> {
    e.check_dim(f_ideal.dim())?;
    let real = error_probabilities(e, spec)?.worst;
    let ideal = error_probabilities(f_ideal, spec)?.worst;
    Ok(FunctionWorstReport {
        additive: BoundCheck::new(real, Relation::AtMost, ideal + d_stab),
        root: BoundCheck::new(real, Relation::AtMost, (ideal.sqrt() + c_stab).powi(2)),
    })
}

/// Average-case function computation over uniformly chosen instances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionAverageReport {
    /// `p̄_e ≤ p̄_e^id + D_pro`.
    pub additive: BoundCheck,
    /// `p̄_e ≤ 1 − F_pro`, only applicable when the ideal never errs.
    pub exact_ideal: Option<BoundCheck>,
}

impl FunctionAverageReport {
    pub fn all_hold(&self) -> bool {
        self.additive.holds && self.exact_ideal.is_none_or(|b| b.holds)
    }
}

pub fn verify_function_average(
    e: &Channel,
    f_ideal: &Channel,
    spec: &FunctionSpec,
    d_pro: f64,
    f_pro: f64,
) -> Result<FunctionAverageReport> {
    e.check_dim(f_ideal.dim())?;
    let real = error_probabilities(e, spec)?.average;
    let ideal = error_probabilities(f_ideal, spec)?.average;
    Ok(FunctionAverageReport {
        additive: BoundCheck::new(real, Relation::AtMost, ideal + d_pro),
        exact_ideal: (ideal <= EXACT_IDEAL_TOL).then(|| BoundCheck::new(real, Relation::AtMost, 1.0 - f_pro)),
    })
}

/// Sampling computation, per instance and on the joint distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingReport {
    /// `max_x D(q_x, p_x) ≤ D_stab`.
    pub worst_distance: BoundCheck,
    /// `min_x F(q_x, p_x) ≥ F_stab`.
    pub worst_fidelity: BoundCheck,
    /// `D(q, p) ≤ D_pro`.
    pub joint_distance: BoundCheck,
    /// `F(q, p) ≥ F_pro`.
    pub joint_fidelity: BoundCheck,
}

impl SamplingReport {
    pub fn all_hold(&self) -> bool {
        [
            self.worst_distance,
            self.worst_fidelity,
            self.joint_distance,
            self.joint_fidelity,
        ]
        .iter()
        .all(|b| b.holds)
    }
}

pub fn verify_sampling(
    e: &Channel,
    f_ideal: &Channel,
    d_stab: f64,
    f_stab: f64,
    d_pro: f64,
    f_pro: f64,
) -> Result<SamplingReport> {
    let out = sampling_outcome(f_ideal, e)?;
    let pairs = out.per_instance_real.iter().zip(&out.per_instance_ideal);
    let mut max_distance: f64 = 0.0;
    let mut min_overlap: f64 = 1.0;
    for (q, p) in pairs {
        max_distance = max_distance.max(kolmogorov(q, p)?);
        min_overlap = min_overlap.min(bhattacharya(q, p)?);
    }
    Ok(SamplingReport {
        worst_distance: BoundCheck::new(max_distance, Relation::AtMost, d_stab),
        worst_fidelity: BoundCheck::new(min_overlap, Relation::AtLeast, f_stab),
        joint_distance: BoundCheck::new(kolmogorov(&out.joint_real, &out.joint_ideal)?, Relation::AtMost, d_pro),
        joint_fidelity: BoundCheck::new(
            bhattacharya(&out.joint_real, &out.joint_ideal)?,
            Relation::AtLeast,
            f_pro,
        ),
    })
}

/// Process measures that enter the bounds for one `(real, ideal)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub d_pro: f64,
    pub f_pro: f64,
    pub d_stab: f64,
    pub f_stab: f64,
    pub c_stab: f64,
    pub d_stab_optimizer: OptimizerDiagnostics,
    pub f_stab_optimizer: OptimizerDiagnostics,
}

impl BoundInputs {
    /// The stabilized values are the optimizer results, widened by the
    /// objective at every basis input: each is a feasible point, so the
    /// true optimum is at least as extreme.
    pub fn compute(e: &Channel, f_ideal: &Channel, config: &OptimizerConfig) -> Result<Self> {
        let d = e.dim();
        let basis_values = |metric| -> Result<Vec<f64>> {
            (0..d)
                .map(|x| stabilized_objective(e, f_ideal, metric, &PureState::basis(d, x).projector(), d))
                .collect()
        };
        let d_opt = stabilized(e, f_ideal, Metric::Distance, config)?;
        let f_opt = stabilized(e, f_ideal, Metric::Fidelity, config)?;
        let d_stab = basis_values(Metric::Distance)?.into_iter().fold(d_opt.value, f64::max);
        let f_stab = basis_values(Metric::Fidelity)?.into_iter().fold(f_opt.value, f64::min);
        Ok(Self {
            d_pro: j_distance(e, f_ideal)?,
            f_pro: j_fidelity(e, f_ideal)?,
            d_stab,
            f_stab,
            c_stab: c_from_fidelity(f_stab),
            d_stab_optimizer: (&d_opt).into(),
            f_stab_optimizer: (&f_opt).into(),
        })
    }
}

/// Every bound for one function specification and channel pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AllBounds {
    pub inputs: BoundInputs,
    pub function_worst: FunctionWorstReport,
    pub function_average: FunctionAverageReport,
    pub sampling: SamplingReport,
}

impl AllBounds {
    pub fn all_hold(&self) -> bool {
        self.function_worst.all_hold() && self.function_average.all_hold() && self.sampling.all_hold()
    }

    /// `(name, check)` rows; the average-case exact-ideal bound only when applicable.
    pub fn rows(&self) -> Vec<(&'static str, BoundCheck)> {
        let mut rows = vec![
            ("function-worst-additive", self.function_worst.additive),
            ("function-worst-root", self.function_worst.root),
            ("function-average-additive", self.function_average.additive),
        ];
        if let Some(b) = self.function_average.exact_ideal {
            rows.push(("function-average-exact-ideal", b));
        }
        rows.extend([
            ("sampling-worst-distance", self.sampling.worst_distance),
            ("sampling-worst-fidelity", self.sampling.worst_fidelity),
            ("sampling-joint-distance", self.sampling.joint_distance),
            ("sampling-joint-fidelity", self.sampling.joint_fidelity),
        ]);
        rows
    }
}

pub fn verify_all(e: &Channel, f_ideal: &Channel, spec: &FunctionSpec, config: &OptimizerConfig) -> Result<AllBounds> {
    let inputs = BoundInputs::compute(e, f_ideal, config)?;
    Ok(AllBounds {
        inputs,
        function_worst: verify_function_worst(e, f_ideal, spec, inputs.d_stab, inputs.c_stab)?,
        function_average: verify_function_average(e, f_ideal, spec, inputs.d_pro, inputs.f_pro)?,
        sampling: verify_sampling(e, f_ideal, inputs.d_stab, inputs.f_stab, inputs.d_pro, inputs.f_pro)?,
    })
}

/// A function-computation test instance.
#[derive(Debug, Clone)]
pub struct FunctionCase {
    pub spec: FunctionSpec,
    pub ideal: Channel,
    pub real: Channel,
}

/// Random permutation `f` with ideal channel `N_id ∘ U_f` and real channel
/// `(1 − s) ideal + s R` for a random channel `R` and strength `s ∈ [0, ½)`.
/// With `ideal_noise = 0` the ideal is the exact permutation unitary.
pub fn random_function_case<R: Rng + ?Sized>(dim: usize, ideal_noise: f64, rng: &mut R) -> Result<FunctionCase> {
    let spec = FunctionSpec::random_permutation(dim, rng);
    let exact = Channel::unitary(&spec.permutation_unitary().expect("permutation"));
    let ideal = if ideal_noise > 0.0 {
        let noise = mixture(&Channel::identity(dim), &Channel::depolarizing(dim, 1.0), ideal_noise)?;
        compose(&noise, &exact)?
    } else {
        exact
    };
    let kraus = rng.random_range(1..=dim * dim);
    let strength = rng.random_range(0.0..0.5);
    let disturbance = Channel::from_kraus(random_channel(dim, kraus, rng));
    let real = mixture(&ideal, &disturbance, strength)?;
    Ok(FunctionCase { spec, ideal, real })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::gates;
    use crate::rng;

    #[test]
    fn function_spec_validation() {
        assert!(FunctionSpec::new(vec![0, 2]).is_err());
        assert!(FunctionSpec::new(vec![]).is_err());
        let f = FunctionSpec::new(vec![1, 1]).unwrap();
        assert!(f.permutation_unitary().is_none());
        let f = FunctionSpec::new(vec![2, 0, 1]).unwrap();
        let u = f.permutation_unitary().unwrap();
        assert_eq!(u.matrix()[(2, 0)].re, 1.0);
    }

    #[test]
    fn error_probability_examples() {
        let mut r = rng::seeded(30);
        let spec = FunctionSpec::random_permutation(4, &mut r);
        let u = Channel::unitary(&spec.permutation_unitary().unwrap());
        let p = error_probabilities(&u, &spec).unwrap();
        assert!(p.per_instance.iter().all(|v| v.abs() < 1e-15));

        let id = FunctionSpec::identity(2);
        let p = error_probabilities(&Channel::bit_flip(0.3), &id).unwrap();
        for v in &p.per_instance {
            assert!((v - 0.3).abs() < 1e-14);
        }
        assert!((p.worst - 0.3).abs() < 1e-14 && (p.average - 0.3).abs() < 1e-14);

        let p = error_probabilities(&Channel::depolarizing(2, 1.0), &id).unwrap();
        assert!((p.worst - 0.5).abs() < 1e-14 && (p.average - 0.5).abs() < 1e-14);
        assert!(matches!(
            error_probabilities(&Channel::identity(3), &id),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn sampling_outcome_examples() {
        let id = Channel::identity(2);
        let h = Channel::unitary(&UnitaryOperator::new(gates::hadamard()).unwrap());
        let out = sampling_outcome(&h, &id).unwrap();
        let p0 = out.per_instance_ideal[0].probabilities();
        let q0 = out.per_instance_real[0].probabilities();
        assert!((p0[0] - 0.5).abs() < 1e-14 && (p0[1] - 0.5).abs() < 1e-14);
        assert!((q0[0] - 1.0).abs() < 1e-14 && q0[1].abs() < 1e-14);
        assert!((kolmogorov(&out.per_instance_real[0], &out.per_instance_ideal[0]).unwrap() - 0.5).abs() < 1e-14);
        for x in 0..2 {
            let m: f64 = out.joint_ideal.probabilities()[x * 2..x * 2 + 2].iter().sum();
            assert!((m - 0.5).abs() < 1e-10);
        }
        let same = sampling_outcome(&h, &h).unwrap();
        assert!(kolmogorov(&same.joint_real, &same.joint_ideal).unwrap().abs() < 1e-15);
        assert!((bhattacharya(&same.joint_real, &same.joint_ideal).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bound_check_directions() {
        let b = BoundCheck::new(0.2, Relation::AtMost, 0.3);
        assert!(b.holds && (b.slack - 0.1).abs() < 1e-15);
        let b = BoundCheck::new(0.2, Relation::AtLeast, 0.3);
        assert!(!b.holds);
        assert!(BoundCheck::new(0.3 + 5e-8, Relation::AtMost, 0.3).holds);
    }

    #[test]
    fn depolarizing_average_case() {
        let id = Channel::identity(2);
        let dep = Channel::depolarizing(2, 1.0);
        let spec = FunctionSpec::identity(2);
        let d_pro = j_distance(&dep, &id).unwrap();
        let f_pro = j_fidelity(&dep, &id).unwrap();
        let rep = verify_function_average(&dep, &id, &spec, d_pro, f_pro).unwrap();
        assert!((rep.additive.lhs - 0.5).abs() < 1e-14 && (rep.additive.rhs - 0.75).abs() < 1e-12);
        let exact = rep.exact_ideal.unwrap();
        assert!((exact.rhs - 0.75).abs() < 1e-12);
        assert!(rep.all_hold());

        let noisy_ideal = Channel::bit_flip(0.1);
        let rep = verify_function_average(&dep, &noisy_ideal, &spec, 0.5, 0.5).unwrap();
        assert!(rep.exact_ideal.is_none());
    }

    #[test]
    fn bit_flip_cases() {
        let id = Channel::identity(2);
        let e = Channel::bit_flip(0.2);
        let spec = FunctionSpec::identity(2);
        // D_stab ≥ D_pro = 0.2 and C_stab ≥ √(1 − F_pro)
        let rep = verify_function_worst(&e, &id, &spec, 0.2, (0.2f64).sqrt()).unwrap();
        assert!((rep.additive.lhs - 0.2).abs() < 1e-14);
        assert!(rep.all_hold());

        let e = Channel::bit_flip(0.3);
        let rep = verify_sampling(&e, &id, 0.3, 0.7, 0.3, 0.7).unwrap();
        assert!((rep.worst_distance.lhs - 0.3).abs() < 1e-14);
        assert!(rep.all_hold());
    }

    #[test]
    fn random_cases_are_valid() {
        let mut r = rng::seeded(31);
        for d in [2, 4] {
            let case = random_function_case(d, 0.0, &mut r).unwrap();
            assert!(case.ideal.as_unitary().is_some());
            let p = error_probabilities(&case.ideal, &case.spec).unwrap();
            assert!(p.worst < 1e-14);
            let noisy = random_function_case(d, 0.1, &mut r).unwrap();
            assert!(error_probabilities(&noisy.ideal, &noisy.spec).unwrap().worst > 0.0);
        }
    }

    #[test]
    fn exact_ideal_saturates_trivially() {
        let mut r = rng::seeded(32);
        let spec = FunctionSpec::random_permutation(2, &mut r);
        let u = Channel::unitary(&spec.permutation_unitary().unwrap());
        let all = verify_all(&u, &u, &spec, &OptimizerConfig::with_seed(1)).unwrap();
        assert!(all.all_hold());
        for (_, b) in all.rows() {
            assert!(b.lhs.abs() < 1e-7 || (b.lhs - 1.0).abs() < 1e-7);
        }
        assert_eq!(all.rows().len(), 8);
    }

    #[test]
    fn random_sweep_holds() {
        let mut r = rng::seeded(33);
        let config = OptimizerConfig {
            restarts: 2,
            ..OptimizerConfig::with_seed(2)
        };
        for i in 0..6 {
            let case = random_function_case(2, if i % 2 == 0 { 0.0 } else { 0.15 }, &mut r).unwrap();
            let all = verify_all(&case.real, &case.ideal, &case.spec, &config).unwrap();
            assert!(all.all_hold(), "{all:?}");
        }
    }
}
