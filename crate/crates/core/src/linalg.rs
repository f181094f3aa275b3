//! Dense complex linear algebra and the elementary state types.
//!
//! Matrices are `nalgebra` dense complex matrices. Tensor products follow the
//! `kron` convention: the left factor is the more significant index, so a
//! basis state `|a⟩|b⟩` of `A ⊗ B` has index `a·d_B + b`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;
pub type ComplexVector = DVector<Complex64>;

/// Eigenvalues in `[-CLAMP_TOL, 0)` are treated as floating point dust.
pub const CLAMP_TOL: f64 = 1e-10;
/// Eigenvalues below `-INDEFINITE_TOL` make an input invalid.
pub const INDEFINITE_TOL: f64 = 1e-6;

const STATE_HERMITIAN_TOL: f64 = 1e-12;
const STATE_TRACE_TOL: f64 = 1e-10;
const UNITARY_TOL: f64 = 1e-10;

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(dim: usize) -> ComplexMatrix {
    ComplexMatrix::identity(dim, dim)
}

/// Largest entry modulus.
pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch");
    a.iter().zip(b.iter()).fold(0.0, |acc, (x, y)| acc.max((x - y).norm()))
}

pub fn is_finite(m: &ComplexMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn hermiticity_error(m: &ComplexMatrix) -> f64 {
    let n = m.nrows();
    let mut err: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            err = err.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    err
}

/// `(M + M†)/2`.
pub fn hermitian_part(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub fn trace(m: &ComplexMatrix) -> Complex64 {
    m.diagonal().sum()
}

/// Hilbert–Schmidt inner product `tr(A†B)`.
pub fn hs_inner(a: &ComplexMatrix, b: &ComplexMatrix) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

fn ensure_square(m: &ComplexMatrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::NonSquareInput {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(())
}

fn ensure_hermitian(m: &ComplexMatrix) -> Result<()> {
    ensure_square(m)?;
    let err = hermiticity_error(m);
    if err > 1e-9 * max_abs(m).max(1.0) {
        return Err(Error::NonHermitianInput(err));
    }
    Ok(())
}

/// Eigendecomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Sorted in descending order.
    pub values: Vec<f64>,
    /// Column `i` is the eigenvector for `values[i]`, phase-fixed so that its
    /// largest-modulus entry is real and nonnegative.
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    pub fn vector(&self, i: usize) -> ComplexVector {
        self.vectors.column(i).into_owned()
    }

    /// `V diag(f(λ)) V†`.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, &l) in self.values.iter().enumerate() {
            let s = f(l);
            for i in 0..n {
                scaled[(i, j)] *= s;
            }
        }
        scaled * self.vectors.adjoint()
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.map_values(|l| l)
    }
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues descending.
pub fn hermitian_eig(m: &ComplexMatrix) -> Result<HermitianEigen> {
    ensure_hermitian(m)?;
    if !is_finite(m) {
        return Err(Error::NonFiniteInput);
    }
    Ok(hermitian_eig_unchecked(m))
}

pub(crate) fn hermitian_eig_unchecked(m: &ComplexMatrix) -> HermitianEigen {
    let n = m.nrows();
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut order: Vec<usize> = (0..n).collect();
    // stable: ties keep the solver's order
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        let mut pivot = 0;
        let mut best = -1.0;
        for i in 0..n {
            let a = col[i].norm();
            if a > best + 1e-14 {
                best = a;
                pivot = i;
            }
        }
        let phase = if best > 0.0 {
            col[pivot].conj() / best
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..n {
            vectors[(i, dst)] = col[i] * phase;
        }
    }
    HermitianEigen { values, vectors }
}

/// Principal square root of a positive semidefinite matrix.
pub fn psd_sqrt(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = hermitian_eig(m)?;
    let min = eig.values.last().copied().unwrap_or(0.0);
    if min < -INDEFINITE_TOL {
        return Err(Error::IndefiniteInput(min));
    }
    Ok(eig.map_values(|l| l.max(0.0).sqrt()))
}

/// Sum of singular values.
pub fn trace_norm(m: &ComplexMatrix) -> Result<f64> {
    ensure_square(m)?;
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    let svd = m.clone().svd(false, false);
    Ok(svd.singular_values.iter().sum())
}

/// Sum of |eigenvalues| of a Hermitian matrix.
pub(crate) fn hermitian_trace_norm(m: &ComplexMatrix) -> f64 {
    hermitian_eig_unchecked(m).values.iter().map(|l| l.abs()).sum()
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

pub fn kron_vec(a: &ComplexVector, b: &ComplexVector) -> ComplexVector {
    a.kronecker(b)
}

/// Which factor of a bipartite `A ⊗ B` space to trace out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    A,
    B,
}

/// Partial trace of an operator on `A ⊗ B` over the chosen factor.
pub fn partial_trace(m: &ComplexMatrix, which: Subsystem, dims: (usize, usize)) -> Result<ComplexMatrix> {
    ensure_square(m)?;
    let (da, db) = dims;
    if m.nrows() != da * db {
        return Err(Error::DimensionMismatch {
            expected: da * db,
            found: m.nrows(),
        });
    }
    Ok(match which {
        Subsystem::A => ComplexMatrix::from_fn(db, db, |i, j| (0..da).map(|a| m[(a * db + i, a * db + j)]).sum()),
        Subsystem::B => ComplexMatrix::from_fn(da, da, |i, j| (0..db).map(|b| m[(i * db + b, j * db + b)]).sum()),
    })
}

/// A normalized state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: ComplexVector,
}

impl PureState {
    pub fn new(amplitudes: ComplexVector) -> Result<Self> {
        if amplitudes.is_empty() || amplitudes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidState("amplitudes must be finite and nonempty".into()));
        }
        let norm2 = amplitudes.norm_squared();
        if (norm2 - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidState(format!("squared norm {norm2} differs from 1")));
        }
        Ok(Self { amplitudes })
    }

    /// Rescales a nonzero vector to unit norm.
    pub fn normalized(v: ComplexVector) -> Result<Self> {
        let n = v.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::InvalidState("cannot normalize a zero vector".into()));
        }
        Ok(Self {
            amplitudes: v.unscale(n),
        })
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = ComplexVector::zeros(dim);
        v[index] = c(1.0, 0.0);
        Self { amplitudes: v }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &ComplexVector {
        &self.amplitudes
    }

    pub fn projector(&self) -> ComplexMatrix {
        &self.amplitudes * self.amplitudes.adjoint()
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix::from_raw(self.projector())
    }
}

/// Hermitian, positive semidefinite, unit-trace operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        ensure_square(&matrix)?;
        if !is_finite(&matrix) {
            return Err(Error::NonFiniteInput);
        }
        let herr = hermiticity_error(&matrix);
        if herr > STATE_HERMITIAN_TOL {
            return Err(Error::NonHermitianInput(herr));
        }
        let tr = trace(&matrix);
        if (tr.re - 1.0).abs() > STATE_TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {} differs from 1", tr.re)));
        }
        let min = hermitian_eig_unchecked(&matrix).values.last().copied().unwrap_or(0.0);
        if min < -CLAMP_TOL {
            return Err(Error::IndefiniteInput(min));
        }
        Ok(Self { matrix })
    }

    /// Wraps a matrix that is a density matrix by construction; the
    /// Hermitian part is kept.
    pub(crate) fn from_raw(matrix: ComplexMatrix) -> Self {
        Self {
            matrix: hermitian_part(&matrix),
        }
    }

    /// Clamps negative eigenvalues to zero and renormalizes the trace.
    pub fn project(matrix: &ComplexMatrix) -> Result<Self> {
        ensure_square(matrix)?;
        let eig = hermitian_eig_unchecked(matrix);
        let total: f64 = eig.values.iter().map(|l| l.max(0.0)).sum();
        if total <= 0.0 {
            return Err(Error::InvalidState("no positive spectrum to project onto".into()));
        }
        Ok(Self::from_raw(eig.map_values(|l| l.max(0.0) / total)))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self::from_raw(identity(dim).unscale(dim as f64))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn purity(&self) -> f64 {
        hs_inner(&self.matrix, &self.matrix).re
    }

    pub fn eig(&self) -> HermitianEigen {
        hermitian_eig_unchecked(&self.matrix)
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        Self::from_raw(kron(&self.matrix, &other.matrix))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryOperator {
    matrix: ComplexMatrix,
}

impl UnitaryOperator {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        ensure_square(&matrix)?;
        if !is_finite(&matrix) {
            return Err(Error::NonFiniteInput);
        }
        let n = matrix.nrows();
        let err = max_abs_diff(&(matrix.adjoint() * &matrix), &identity(n));
        if err > UNITARY_TOL {
            return Err(Error::NonUnitaryTarget(err));
        }
        Ok(Self { matrix })
    }

    pub(crate) fn from_raw(matrix: ComplexMatrix) -> Self {
        Self { matrix }
    }

    pub fn identity(dim: usize) -> Self {
        Self { matrix: identity(dim) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn adjoint(&self) -> Self {
        Self {
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn kron(&self, other: &UnitaryOperator) -> Self {
        Self {
            matrix: kron(&self.matrix, &other.matrix),
        }
    }

    /// `U ρ U†`.
    pub fn conjugate(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        &self.matrix * rho * self.matrix.adjoint()
    }
}

/// `|Φ⟩ = Σ_j |j⟩|j⟩ / √d`.
pub fn max_entangled(dim: usize) -> PureState {
    let mut v = ComplexVector::zeros(dim * dim);
    let amp = 1.0 / (dim as f64).sqrt();
    for j in 0..dim {
        v[j * dim + j] = c(amp, 0.0);
    }
    PureState { amplitudes: v }
}

/// Canonical purification `Σ_i √λ_i |i⟩_A |v_i⟩_Q` on `A ⊗ Q`, with
/// `(λ_i, v_i)` taken from [`hermitian_eig`] in descending order.
pub fn purify(rho: &DensityMatrix, ancilla_dim: usize) -> Result<PureState> {
    let d = rho.dim();
    let eig = rho.eig();
    let rank = eig.values.iter().filter(|&&l| l > 1e-12).count();
    if ancilla_dim < rank {
        return Err(Error::AncillaTooSmall {
            rank,
            ancilla: ancilla_dim,
        });
    }
    let mut v = ComplexVector::zeros(ancilla_dim * d);
    for (i, &l) in eig.values.iter().enumerate().take(ancilla_dim.min(d)) {
        let s = l.max(0.0).sqrt();
        if s == 0.0 {
            continue;
        }
        for q in 0..d {
            v[i * d + q] = eig.vectors[(q, i)] * s;
        }
    }
    PureState::normalized(v)
}

/// Haar-random pure state: a normalized complex Gaussian vector.
pub fn haar_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> PureState {
    assert!(dim >= 1, "dimension must be positive");
    loop {
        let v = ComplexVector::from_fn(dim, |_, _| gaussian(rng));
        if let Ok(s) = PureState::normalized(v) {
            return s;
        }
    }
}

pub(crate) fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// Random full-rank density matrix `GG†/tr(GG†)` with `G` square Ginibre.
pub fn random_density<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DensityMatrix {
    random_density_rank(dim, dim, rng)
}

/// Random density matrix of rank at most `rank`.
pub fn random_density_rank<R: Rng + ?Sized>(dim: usize, rank: usize, rng: &mut R) -> DensityMatrix {
    let g = ginibre(dim, rank, rng);
    let m = &g * g.adjoint();
    let t = trace(&m).re;
    DensityMatrix::from_raw(m.unscale(t))
}

/// Random Hermitian matrix with Gaussian entries.
pub fn random_hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    hermitian_part(&ginibre(dim, dim, rng))
}

/// Orthonormal basis of traceless Hermitian `dim × dim` matrices under the
/// Hilbert–Schmidt inner product (normalized generalized Gell-Mann matrices).
pub fn traceless_hermitian_basis(dim: usize) -> Vec<ComplexMatrix> {
    let mut basis = Vec::with_capacity(dim * dim - 1);
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for j in 0..dim {
        for k in (j + 1)..dim {
            let mut s = ComplexMatrix::zeros(dim, dim);
            s[(j, k)] = c(r, 0.0);
            s[(k, j)] = c(r, 0.0);
            basis.push(s);
            let mut a = ComplexMatrix::zeros(dim, dim);
            a[(j, k)] = c(0.0, -r);
            a[(k, j)] = c(0.0, r);
            basis.push(a);
        }
    }
    for l in 1..dim {
        let norm = 1.0 / ((l * (l + 1)) as f64).sqrt();
        let mut m = ComplexMatrix::zeros(dim, dim);
        for i in 0..l {
            m[(i, i)] = c(norm, 0.0);
        }
        m[(l, l)] = c(-(l as f64) * norm, 0.0);
        basis.push(m);
    }
    basis
}
