//! Direct estimation of the Choi fidelity to a unitary target from
//! observable averages, and a simulated process tomography baseline.
//!
//! With a unitary operator basis `{U_j}`, `tr(U_j† U_k) = d δ_jk`,
//! `F_pro(E, U) = Σ_j tr(U U_j† U† E(U_j)) / d³`. Expanding `U_j` in prepared
//! inputs `ρ_k` and `U U_j† U†` in measured observables `σ_l` turns this into
//! `Σ_kl M_kl tr(σ_l E(ρ_k)) / d³`.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::channels::{gates, qubit_count, random_channel, Channel, OperatorBasis};
use crate::error::{Error, Result};
use crate::io::matrix_to_json;
use crate::linalg::{
    self, c, hermitian_eig_unchecked, hs_inner, identity, kron, max_abs, partial_trace, trace, ComplexMatrix,
    HermitianEigen, PureState, Subsystem, UnitaryOperator,
};
use crate::process_metrics::j_fidelity_unitary;
use crate::rng;
use num_complex::Complex64;

/// Spanning sets with a worse Gram condition number are rejected.
pub const MAX_GRAM_CONDITION: f64 = 1e8;
/// Required agreement between a plan and the Choi overlap during self-validation.
pub const PLAN_TOL: f64 = 1e-8;
const VALIDATION_SEED: u64 = 0x5e1f_7e57;
const VALIDATION_CHANNELS: usize = 10;
/// Relative size below which an `M` entry counts as zero.
const ZERO_WEIGHT: f64 = 1e-12;
const HERMITIAN_TOL: f64 = 1e-10;
/// Floor on the reduced Choi state when restoring trace preservation.
const TP_FLOOR: f64 = 1e-12;

/// Pauli products for `dim = 2^n`.
pub fn pauli_unitary_basis(dim: usize) -> Result<Vec<ComplexMatrix>> {
    let n = qubit_count(dim).ok_or(Error::NoUnitaryBasis(dim))?;
    Ok(OperatorBasis::pauli(n).operators().to_vec())
}

/// Shift-and-phase operators `X^a Z^b`, a unitary basis for any dimension.
pub fn clock_shift_basis(dim: usize) -> Vec<ComplexMatrix> {
    let omega = |k: usize| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / dim as f64);
    let mut basis = Vec::with_capacity(dim * dim);
    for a in 0..dim {
        for b in 0..dim {
            let mut m = ComplexMatrix::zeros(dim, dim);
            for q in 0..dim {
                m[((q + a) % dim, q)] = omega((b * q) % dim);
            }
            basis.push(m);
        }
    }
    basis
}

/// Checks `tr(U_j† U_k) = d δ_jk` and unitarity of every element.
pub fn check_unitary_basis(basis: &[ComplexMatrix], dim: usize) -> Result<()> {
    if basis.len() != dim * dim {
        return Err(Error::BadBasis(format!(
            "{} operators for dimension {dim}",
            basis.len()
        )));
    }
    for (j, a) in basis.iter().enumerate() {
        if a.shape() != (dim, dim) {
            return Err(Error::BadBasis(format!("operator {j} has shape {:?}", a.shape())));
        }
        if linalg::max_abs_diff(&(a.adjoint() * a), &identity(dim)) > 1e-10 {
            return Err(Error::BadBasis(format!("operator {j} is not unitary")));
        }
        for (k, b) in basis.iter().enumerate().skip(j + 1) {
            if hs_inner(a, b).norm() > 1e-10 * dim as f64 {
                return Err(Error::BadBasis(format!("operators {j} and {k} are not orthogonal")));
            }
        }
    }
    Ok(())
}

fn default_unitary_basis(dim: usize) -> Vec<ComplexMatrix> {
    pauli_unitary_basis(dim).unwrap_or_else(|_| clock_shift_basis(dim))
}

/// `F_pro(E, U)` evaluated through the Pauli-product basis.
pub fn f_pro_unitary_basis(e: &Channel, u: &UnitaryOperator) -> Result<f64> {
    f_pro_with_basis(e, u, &pauli_unitary_basis(u.dim())?)
}

/// `F_pro(E, U)` evaluated through a caller-supplied unitary basis.
pub fn f_pro_with_basis(e: &Channel, u: &UnitaryOperator, basis: &[ComplexMatrix]) -> Result<f64> {
    e.check_dim(u.dim())?;
    let d = u.dim();
    check_unitary_basis(basis, d)?;
    let total: Complex64 = basis
        .iter()
        .map(|uj| trace(&(u.conjugate(&uj.adjoint()) * e.apply_matrix(uj))))
        .sum();
    Ok(total.re / (d * d * d) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    General,
    PauliMinimal,
}

/// One observable average `tr(σ_l E(ρ_k))` with its weight `M_kl`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Setting {
    pub input: usize,
    pub observable: usize,
    pub weight: Complex64,
}

/// An immutable, self-validated estimation plan.
#[derive(Debug, Clone)]
pub struct EstimationPlan {
    dim: usize,
    target_unitary: UnitaryOperator,
    input_states: Vec<ComplexMatrix>,
    observables: Vec<ComplexMatrix>,
    coefficients: ComplexMatrix,
    scheme: Scheme,
    input_condition: f64,
    observable_condition: f64,
    nonzero_coefficients: usize,
    settings: Vec<Setting>,
    validation_error: f64,
    spectra: Vec<HermitianEigen>,
}

impl EstimationPlan {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn target_unitary(&self) -> &UnitaryOperator {
        &self.target_unitary
    }

    pub fn input_states(&self) -> &[ComplexMatrix] {
        &self.input_states
    }

    /// Hermitian observables actually measured, after splitting any
    /// non-Hermitian `σ_l` into Hermitian and anti-Hermitian parts.
    pub fn observables(&self) -> &[ComplexMatrix] {
        &self.observables
    }

    /// `M`, inputs by (split) observables.
    pub fn coefficients(&self) -> &ComplexMatrix {
        &self.coefficients
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn input_condition(&self) -> f64 {
        self.input_condition
    }

    pub fn observable_condition(&self) -> f64 {
        self.observable_condition
    }

    /// Nonzero entries of `M` before the Hermitian split.
    pub fn nonzero_coefficients(&self) -> usize {
        self.nonzero_coefficients
    }

    /// Observable averages that must be estimated.
    pub fn settings(&self) -> &[Setting] {
        &self.settings
    }

    pub fn validation_error(&self) -> f64 {
        self.validation_error
    }

    /// Exact `Σ M_kl tr(σ_l E(ρ_k)) / d³`.
    pub fn evaluate_exact(&self, e: &Channel) -> Result<f64> {
        e.check_dim(self.dim)?;
        let outputs: Vec<ComplexMatrix> = self.input_states.iter().map(|r| e.apply_matrix(r)).collect();
        let total: Complex64 = self
            .settings
            .iter()
            .map(|s| s.weight * hs_inner(&self.observables[s.observable], &outputs[s.input]))
            .sum();
        Ok(total.re / self.norm())
    }

    fn norm(&self) -> f64 {
        (self.dim * self.dim * self.dim) as f64
    }

    /// Settings list for an external experiment.
    pub fn to_json(&self) -> Value {
        json!({
            "dim": self.dim,
            "scheme": self.scheme,
            "target_unitary": matrix_to_json(self.target_unitary.matrix()),
            "estimate": "sum over settings of weight * <observable> on E(input), divided by dim^3",
            "input_condition": self.input_condition,
            "observable_condition": self.observable_condition,
            "nonzero_coefficients": self.nonzero_coefficients,
            "settings": self.settings.iter().map(|s| json!({
                "input": s.input,
                "observable": s.observable,
                "input_state": matrix_to_json(&self.input_states[s.input]),
                "observable_matrix": matrix_to_json(&self.observables[s.observable]),
                "weight": [s.weight.re, s.weight.im],
            })).collect::<Vec<_>>(),
        })
    }
}

/// Columns are the column-major vectorized operators.
fn vectorize(ops: &[ComplexMatrix]) -> ComplexMatrix {
    let n = ops.first().map(|m| m.len()).unwrap_or(0);
    let mut r = ComplexMatrix::zeros(n, ops.len());
    for (k, op) in ops.iter().enumerate() {
        r.column_mut(k).copy_from_slice(op.as_slice());
    }
    r
}

/// Condition number of the Gram matrix `G_kl = tr(A_k† A_l)`.
pub fn gram_condition(ops: &[ComplexMatrix]) -> f64 {
    let r = vectorize(ops);
    if r.nrows() != r.ncols() || r.nrows() == 0 {
        return f64::INFINITY;
    }
    let s = r.singular_values();
    let (max, min) = s
        .iter()
        .fold((0.0f64, f64::INFINITY), |(a, b), &v| (a.max(v), b.min(v)));
    if min <= 0.0 {
        f64::INFINITY
    } else {
        (max / min).powi(2)
    }
}

/// Checks shapes and conditioning, then returns the coordinates of each
/// column of `targets` in the spanning set `ops` (coordinates as columns).
fn expand(ops: &[ComplexMatrix], dim: usize, targets: &ComplexMatrix) -> Result<(ComplexMatrix, f64)> {
    if let Some(bad) = ops.iter().find(|m| m.shape() != (dim, dim)) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: bad.nrows(),
        });
    }
    let cond = gram_condition(ops);
    if cond.is_nan() || cond > MAX_GRAM_CONDITION {
        return Err(Error::DegenerateSpanningSet(cond));
    }
    let coords = vectorize(ops)
        .lu()
        .solve(targets)
        .ok_or(Error::DegenerateSpanningSet(f64::INFINITY))?;
    Ok((coords, cond))
}

/// Splits each operator into Hermitian parts: `σ = H + i A`. Returns the
/// Hermitian list and, per original operator, its `(index, factor)` pieces.
fn hermitian_split(ops: &[ComplexMatrix]) -> (Vec<ComplexMatrix>, Vec<Vec<(usize, Complex64)>>) {
    let mut out = Vec::new();
    let mut pieces = Vec::with_capacity(ops.len());
    for s in ops {
        let h = (s + s.adjoint()).unscale(2.0);
        let a = (s - s.adjoint()).unscale(2.0) * c(0.0, -1.0);
        let scale = max_abs(s).max(f64::MIN_POSITIVE);
        let mut p = Vec::new();
        for (part, factor) in [(h, c(1.0, 0.0)), (a, c(0.0, 1.0))] {
            if max_abs(&part) > HERMITIAN_TOL * scale {
                p.push((out.len(), factor));
                out.push(part);
            }
        }
        pieces.push(p);
    }
    (out, pieces)
}

fn count_nonzero(m: &ComplexMatrix) -> usize {
    let cut = ZERO_WEIGHT * max_abs(m);
    m.iter().filter(|z| z.norm() > cut).count()
}

fn assemble(
    u: &UnitaryOperator,
    input_states: Vec<ComplexMatrix>,
    raw_observables: &[ComplexMatrix],
    raw_m: &ComplexMatrix,
    scheme: Scheme,
    input_condition: f64,
    observable_condition: f64,
) -> Result<EstimationPlan> {
    let dim = u.dim();
    let (observables, pieces) = hermitian_split(raw_observables);
    let mut coefficients = ComplexMatrix::zeros(input_states.len(), observables.len());
    for (l, p) in pieces.iter().enumerate() {
        for &(idx, factor) in p {
            for k in 0..input_states.len() {
                coefficients[(k, idx)] += raw_m[(k, l)] * factor;
            }
        }
    }
    let cut = ZERO_WEIGHT * max_abs(&coefficients);
    let mut settings = Vec::new();
    for k in 0..coefficients.nrows() {
        for l in 0..coefficients.ncols() {
            let w = coefficients[(k, l)];
            if w.norm() > cut {
                settings.push(Setting {
                    input: k,
                    observable: l,
                    weight: w,
                });
            }
        }
    }
    let spectra = observables.iter().map(hermitian_eig_unchecked).collect();
    let mut plan = EstimationPlan {
        dim,
        target_unitary: u.clone(),
        input_states,
        observables,
        coefficients,
        scheme,
        input_condition,
        observable_condition,
        nonzero_coefficients: count_nonzero(raw_m),
        settings,
        validation_error: 0.0,
        spectra,
    };
    let mut r = rng::seeded(VALIDATION_SEED);
    let mut worst: f64 = 0.0;
    for i in 0..VALIDATION_CHANNELS {
        let kraus = 1 + i % (dim * dim);
        let e = Channel::from_kraus(random_channel(dim, kraus, &mut r));
        worst = worst.max((plan.evaluate_exact(&e)? - j_fidelity_unitary(&e, u)?).abs());
    }
    plan.validation_error = worst;
    if worst.is_nan() || worst > PLAN_TOL {
        return Err(Error::DegenerateSpanningSet(input_condition.max(observable_condition)));
    }
    Ok(plan)
}

/// Plan for arbitrary spanning sets of inputs and observables.
pub fn build_plan_general(
    u: &UnitaryOperator,
    input_states: Vec<ComplexMatrix>,
    observables: Vec<ComplexMatrix>,
) -> Result<EstimationPlan> {
    let dim = u.dim();
    let basis = default_unitary_basis(dim);
    let (a_t, input_condition) = expand(&input_states, dim, &vectorize(&basis))?;
    let rotated: Vec<ComplexMatrix> = basis.iter().map(|uj| u.conjugate(&uj.adjoint())).collect();
    let (b_t, observable_condition) = expand(&observables, dim, &vectorize(&rotated))?;
    // M_kl = Σ_j b_jl a_jk
    let m = &a_t * b_t.transpose();
    assemble(
        u,
        input_states,
        &observables,
        &m,
        Scheme::General,
        input_condition,
        observable_condition,
    )
}

/// Per-qubit inputs `{I, I+X, I+Y, I+Z}` and tensor products thereof, in
/// the same lexicographic order as the Pauli basis.
pub fn pauli_minimal_inputs(n_qubits: usize) -> Vec<ComplexMatrix> {
    let [i, x, y, z] = gates::paulis();
    let single = [i.clone(), &i + x, &i + y, &i + z];
    let mut out = vec![ComplexMatrix::identity(1, 1)];
    for _ in 0..n_qubits {
        out = out
            .iter()
            .flat_map(|p| single.iter().map(move |s| kron(p, s)))
            .collect();
    }
    out
}

/// `d²` inputs with the derived observables `σ_k = Σ_j a_jk U U_j† U†`, so
/// that only the diagonal averages `tr(σ_k E(ρ_k))` are needed.
pub fn build_plan_pauli_minimal(u: &UnitaryOperator, n_qubits: usize) -> Result<EstimationPlan> {
    let dim = 1usize << n_qubits;
    if u.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: u.dim(),
        });
    }
    let basis = pauli_unitary_basis(dim)?;
    let inputs = pauli_minimal_inputs(n_qubits);
    let (a_t, input_condition) = expand(&inputs, dim, &vectorize(&basis))?;
    let rotated: Vec<ComplexMatrix> = basis.iter().map(|uj| u.conjugate(&uj.adjoint())).collect();
    let observables: Vec<ComplexMatrix> = (0..inputs.len())
        .map(|k| {
            rotated
                .iter()
                .enumerate()
                .fold(ComplexMatrix::zeros(dim, dim), |acc, (j, r)| acc + r * a_t[(k, j)])
        })
        .collect();
    let observable_condition = gram_condition(&observables);
    let m = ComplexMatrix::identity(inputs.len(), inputs.len());
    assemble(
        u,
        inputs,
        &observables,
        &m,
        Scheme::PauliMinimal,
        input_condition,
        observable_condition,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotModel {
    /// Zero means exact expectation values.
    pub shots_per_setting: u64,
    pub seed: u64,
}

impl ShotModel {
    pub fn exact() -> Self {
        Self {
            shots_per_setting: 0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub settings: usize,
    pub total_shots: u64,
}

/// Multinomial draw over outcome probabilities by conditional binomials.
fn multinomial<R: Rng + ?Sized>(probs: &[f64], n: u64, rng: &mut R) -> Vec<u64> {
    let mut counts = vec![0; probs.len()];
    let mut left = n;
    let mut mass = 1.0;
    for (i, &p) in probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        if i + 1 == probs.len() || mass <= 0.0 {
            counts[i] = left;
            break;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        let k = Binomial::new(left, q).expect("probability in [0, 1]").sample(rng);
        counts[i] = k;
        left -= k;
        mass -= p;
    }
    counts
}

/// Sample mean of an observable measured `shots` times on `rho`, and the
/// estimated variance of that mean.
fn sample_expectation<R: Rng + ?Sized>(
    spectrum: &HermitianEigen,
    rho: &ComplexMatrix,
    shots: u64,
    rng: &mut R,
) -> (f64, f64) {
    let mut probs: Vec<f64> = (0..spectrum.values.len())
        .map(|m| {
            let v = spectrum.vectors.column(m);
            v.dotc(&(rho * v)).re.max(0.0)
        })
        .collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    let counts = multinomial(&probs, shots, rng);
    let n = shots as f64;
    let mean = counts
        .iter()
        .zip(&spectrum.values)
        .map(|(&k, l)| k as f64 * l)
        .sum::<f64>()
        / n;
    let ss: f64 = counts
        .iter()
        .zip(&spectrum.values)
        .map(|(&k, l)| k as f64 * (l - mean).powi(2))
        .sum();
    let var = if shots > 1 { ss / (n - 1.0) } else { 0.0 };
    (mean, var / n)
}

fn physical_trace(rho: &ComplexMatrix, index: usize) -> Result<f64> {
    let t = trace(rho).re;
    let eig = hermitian_eig_unchecked(&linalg::hermitian_part(rho));
    let min = eig.values.last().copied().unwrap_or(0.0);
    if linalg::hermiticity_error(rho) > HERMITIAN_TOL || t.is_nan() || t <= 0.0 || min < -HERMITIAN_TOL * t {
        return Err(Error::NonPhysicalInput(format!(
            "input state {index} cannot be prepared (trace {t}, least eigenvalue {min})"
        )));
    }
    Ok(t)
}

/// Evaluates the plan on `e`, exactly or with simulated measurement shots.
/// Each setting prepares `ρ_k / tr ρ_k`, measures `σ_l` in its eigenbasis and
/// rescales by `tr ρ_k`; settings draw from independent streams.
pub fn run_plan(plan: &EstimationPlan, e: &Channel, shots: &ShotModel) -> Result<PlanEstimate> {
    e.check_dim(plan.dim)?;
    let settings = plan.settings.len();
    if shots.shots_per_setting == 0 {
        return Ok(PlanEstimate {
            estimate: plan.evaluate_exact(e)?,
            stderr: 0.0,
            settings,
            total_shots: 0,
        });
    }
    let traces = plan
        .input_states
        .iter()
        .enumerate()
        .map(|(k, r)| physical_trace(r, k))
        .collect::<Result<Vec<_>>>()?;
    let outputs: Vec<ComplexMatrix> = plan
        .input_states
        .iter()
        .zip(&traces)
        .map(|(r, t)| e.apply_matrix(&r.unscale(*t)))
        .collect();
    let norm = plan.norm();
    let terms: Vec<(f64, f64)> = plan
        .settings
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let mut r = rng::stream(shots.seed, i as u64);
            let (mean, var) = sample_expectation(
                &plan.spectra[s.observable],
                &outputs[s.input],
                shots.shots_per_setting,
                &mut r,
            );
            let scale = s.weight.re * traces[s.input] / norm;
            (scale * mean, scale * scale * var)
        })
        .collect();
    Ok(PlanEstimate {
        estimate: terms.iter().map(|t| t.0).sum(),
        stderr: terms.iter().map(|t| t.1).sum::<f64>().sqrt(),
        settings,
        total_shots: shots.shots_per_setting * settings as u64,
    })
}

/// Linear-inversion process tomography from Pauli-eigenstate inputs and
/// Pauli-product observables, projected back onto valid channels by
/// clamping negative Choi eigenvalues and restoring trace preservation.
pub fn simulate_tomography(e: &Channel, shots: &ShotModel) -> Result<Channel> {
    let d = e.dim();
    let n = qubit_count(d).ok_or(Error::NoUnitaryBasis(d))?;
    let paulis = pauli_unitary_basis(d)?;
    let spectra: Vec<HermitianEigen> = paulis.iter().map(hermitian_eig_unchecked).collect();
    let h = gates::hadamard();
    let plus = h.column(0).into_owned();
    let plus_i = {
        let mut v = plus.clone();
        v[1] *= c(0.0, 1.0);
        v
    };
    let zero = PureState::basis(2, 0).projector();
    let one = PureState::basis(2, 1).projector();
    let single = [zero, one, &plus * plus.adjoint(), &plus_i * plus_i.adjoint()];
    let mut inputs = vec![ComplexMatrix::identity(1, 1)];
    for _ in 0..n {
        inputs = inputs
            .iter()
            .flat_map(|p| single.iter().map(move |s| kron(p, s)))
            .collect();
    }

    let estimated: Vec<ComplexMatrix> = inputs
        .par_iter()
        .enumerate()
        .map(|(k, rho)| {
            let out = e.apply_matrix(rho);
            paulis
                .iter()
                .enumerate()
                .fold(ComplexMatrix::zeros(d, d), |acc, (m, p)| {
                    let x = if m == 0 {
                        1.0
                    } else if shots.shots_per_setting == 0 {
                        hs_inner(p, &out).re
                    } else {
                        let mut r = rng::stream(shots.seed, (k * d * d + m) as u64);
                        sample_expectation(&spectra[m], &out, shots.shots_per_setting, &mut r).0
                    };
                    acc + p * c(x / d as f64, 0.0)
                })
        })
        .collect();

    // Column b·d + a of the inverse holds the coordinates of |a⟩⟨b|.
    let inverse = vectorize(&inputs)
        .try_inverse()
        .ok_or(Error::DegenerateSpanningSet(f64::INFINITY))?;
    let mut choi = ComplexMatrix::zeros(d * d, d * d);
    for a in 0..d {
        for b in 0..d {
            let col = b * d + a;
            let block = estimated
                .iter()
                .enumerate()
                .fold(ComplexMatrix::zeros(d, d), |acc, (k, out)| {
                    acc + out * inverse[(k, col)]
                });
            choi.view_mut((a * d, b * d), (d, d))
                .copy_from(&block.unscale(d as f64));
        }
    }
    Channel::from_choi(project_choi(&choi, d)?)
}

/// Nearest PSD matrix by eigenvalue clamping, then the congruence
/// `(S ⊗ I) J (S ⊗ I)` with `S = (d tr_Q J)^{-1/2}` so that `tr_Q = I/d`.
fn project_choi(j: &ComplexMatrix, d: usize) -> Result<ComplexMatrix> {
    let psd = hermitian_eig_unchecked(&linalg::hermitian_part(j)).map_values(|l| l.max(0.0));
    let reduced = partial_trace(&psd, Subsystem::B, (d, d))?.scale(d as f64);
    let s = hermitian_eig_unchecked(&linalg::hermitian_part(&reduced)).map_values(|l| 1.0 / l.max(TP_FLOOR).sqrt());
    let lift = kron(&s, &identity(d));
    Ok(linalg::hermitian_part(&(&lift * psd * &lift)))
}
