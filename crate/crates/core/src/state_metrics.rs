//! Distances and fidelities between states and between classical
//! distributions.
//!
//! Fidelity uses the squared convention `F(ρ,σ) = (tr√(√ρ σ √ρ))²`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, hermitian_eig_unchecked, ComplexMatrix, DensityMatrix};

/// Rank-one detection threshold for the pure-state fidelity shortcut.
const PURE_TOL: f64 = 1e-12;

fn same_dim(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch { expected: a, found: b });
    }
    Ok(())
}

/// `½ tr|ρ − σ|`.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    same_dim(rho.dim(), sigma.dim())?;
    Ok(trace_distance_matrices(rho.matrix(), sigma.matrix()))
}

pub(crate) fn trace_distance_matrices(rho: &ComplexMatrix, sigma: &ComplexMatrix) -> f64 {
    0.5 * linalg::hermitian_trace_norm(&(rho - sigma))
}

/// Squared-convention fidelity.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    same_dim(rho.dim(), sigma.dim())?;
    Ok(fidelity_matrices(rho.matrix(), sigma.matrix()))
}

/// Fidelity of two density matrices given as raw matrices.
///
/// If either argument has rank one, `F = λ ⟨v|σ|v⟩`. Otherwise `F` is the
/// squared sum of singular values of `√ρ √σ`, which has the same value as
/// the eigenvalue form but keeps small spectral contributions at machine
/// precision instead of at its square root.
pub(crate) fn fidelity_matrices(rho: &ComplexMatrix, sigma: &ComplexMatrix) -> f64 {
    let er = hermitian_eig_unchecked(rho);
    if let Some(f) = rank_one_overlap(&er, sigma) {
        return f.clamp(0.0, 1.0);
    }
    let es = hermitian_eig_unchecked(sigma);
    if let Some(f) = rank_one_overlap(&es, rho) {
        return f.clamp(0.0, 1.0);
    }
    let sr = er.map_values(|l| l.max(0.0).sqrt());
    let ss = es.map_values(|l| l.max(0.0).sqrt());
    let sv = (sr * ss).svd(false, false).singular_values;
    let s: f64 = sv.iter().sum();
    (s * s).clamp(0.0, 1.0)
}

fn rank_one_overlap(eig: &linalg::HermitianEigen, other: &ComplexMatrix) -> Option<f64> {
    let second = eig.values.get(1).copied().unwrap_or(0.0);
    if second.abs() > PURE_TOL {
        return None;
    }
    let v = eig.vector(0);
    let overlap = v.dotc(&(other * &v)).re;
    Some(eig.values[0] * overlap)
}

/// Trace distance between `ρ = A A†` and `σ = B B†` given their factors.
///
/// With `[A B] = Q R`, the nonzero spectrum of `ρ − σ` is that of
/// `R J R†`, `J = diag(I, −I)`, which is at most `(kA + kB)`-dimensional.
pub fn trace_distance_factors(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let (ka, kb) = (a.ncols(), b.ncols());
    let mut joined = ComplexMatrix::zeros(a.nrows(), ka + kb);
    joined.columns_mut(0, ka).copy_from(a);
    joined.columns_mut(ka, kb).copy_from(b);
    let r = joined.qr().r();
    let mut signed = r.clone();
    for mut col in signed.columns_mut(ka, kb).column_iter_mut() {
        col.neg_mut();
    }
    0.5 * linalg::hermitian_trace_norm(&(signed * r.adjoint()))
}

/// Fidelity between `ρ = A A†` and `σ = B B†`: the squared nuclear norm of
/// `A† B`. No square roots of spectra are taken, so rank-deficient states
/// keep full precision.
pub fn fidelity_factors(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let s: f64 = (a.adjoint() * b).singular_values().iter().sum();
    (s * s).clamp(0.0, 1.0)
}

/// Fidelity through the eigenvalues of `√ρ σ √ρ`, without shortcuts.
/// Used as an independent route in tests.
pub fn fidelity_eigen_route(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    same_dim(rho.dim(), sigma.dim())?;
    let sr = linalg::psd_sqrt(rho.matrix())?;
    let m = &sr * sigma.matrix() * &sr;
    let eig = linalg::hermitian_eig(&linalg::hermitian_part(&m))?;
    let s: f64 = eig.values.iter().map(|l| l.max(0.0).sqrt()).sum();
    Ok(s * s)
}

/// Bures metric `√(2 − 2√F)`.
pub fn bures_from_fidelity(f: f64) -> f64 {
    (2.0 - 2.0 * f.clamp(0.0, 1.0).sqrt()).max(0.0).sqrt()
}

/// Angle `arccos √F`.
pub fn angle_from_fidelity(f: f64) -> f64 {
    f.clamp(0.0, 1.0).sqrt().acos()
}

/// `C = √(1 − F)`.
pub fn c_from_fidelity(f: f64) -> f64 {
    (1.0 - f.clamp(0.0, 1.0)).sqrt()
}

pub fn bures(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    fidelity(rho, sigma).map(bures_from_fidelity)
}

pub fn angle(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    fidelity(rho, sigma).map(angle_from_fidelity)
}

pub fn c_metric(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    fidelity(rho, sigma).map(c_from_fidelity)
}

/// The sandwich `1 − √F ≤ D ≤ √(1 − F)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FuchsVanDeGraaf {
    pub lower: f64,
    pub distance: f64,
    pub upper: f64,
    pub holds: bool,
}

pub const FVDG_TOL: f64 = 1e-9;

impl FuchsVanDeGraaf {
    pub fn from_values(distance: f64, fidelity: f64) -> Self {
        let lower = 1.0 - fidelity.clamp(0.0, 1.0).sqrt();
        let upper = c_from_fidelity(fidelity);
        Self {
            lower,
            distance,
            upper,
            holds: lower <= distance + FVDG_TOL && distance <= upper + FVDG_TOL,
        }
    }
}

pub fn fuchs_van_de_graaf_check(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<FuchsVanDeGraaf> {
    Ok(FuchsVanDeGraaf::from_values(
        trace_distance(rho, sigma)?,
        fidelity(rho, sigma)?,
    ))
}

/// A probability vector over a finite outcome set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalDistribution {
    probabilities: Vec<f64>,
}

impl ClassicalDistribution {
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(Error::InvalidDistribution("no outcomes".into()));
        }
        if probabilities.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidDistribution(
                "probabilities must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidDistribution(format!("probabilities sum to {total}")));
        }
        Ok(Self { probabilities })
    }

    pub(crate) fn from_raw(probabilities: Vec<f64>) -> Self {
        Self { probabilities }
    }

    pub fn outcomes(&self) -> usize {
        self.probabilities.len()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }
}

/// `Σ|p − q| / 2`.
pub fn kolmogorov(p: &ClassicalDistribution, q: &ClassicalDistribution) -> Result<f64> {
    same_dim(p.outcomes(), q.outcomes())?;
    Ok(0.5
        * p.probabilities
            .iter()
            .zip(&q.probabilities)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>())
}

/// `Σ √(p q)`.
pub fn bhattacharya(p: &ClassicalDistribution, q: &ClassicalDistribution) -> Result<f64> {
    same_dim(p.outcomes(), q.outcomes())?;
    Ok(p.probabilities
        .iter()
        .zip(&q.probabilities)
        .map(|(a, b)| (a.max(0.0) * b.max(0.0)).sqrt())
        .sum())
}

/// Outcome distribution of a computational-basis measurement.
pub fn measure_in_basis(rho: &DensityMatrix) -> ClassicalDistribution {
    ClassicalDistribution::from_raw(rho.matrix().diagonal().iter().map(|z| z.re.max(0.0)).collect())
}
