//! Quantum operations in Kraus, Choi and chi form.
//!
//! Choi states put the reference copy (ancilla) first and the system second:
//! `ρ_E = (I ⊗ E)(|Φ⟩⟨Φ|)`, so the basis index of `|a⟩_A|q⟩_Q` is `a·d + q`.
//! With that ordering the Choi vector of a Kraus element `K` is the
//! column-major vectorization of `K` scaled by `1/√d`.

use nalgebra::linalg::QR;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    self, c, hermitian_eig_unchecked, hs_inner, identity, kron, max_abs_diff, partial_trace, ComplexMatrix,
    ComplexVector, DensityMatrix, Subsystem, UnitaryOperator,
};

const TP_TOL: f64 = 1e-9;
const CHOI_TP_TOL: f64 = 1e-8;
const BASIS_TOL: f64 = 1e-10;
/// Choi eigenvalues (scaled by `d`) above this become Kraus elements.
pub const KRAUS_THRESHOLD: f64 = 1e-10;

pub mod gates {
    //! Fixed single- and two-qubit matrices.
    use super::*;

    pub fn pauli_i() -> ComplexMatrix {
        identity(2)
    }

    pub fn pauli_x() -> ComplexMatrix {
        ComplexMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)])
    }

    pub fn pauli_y() -> ComplexMatrix {
        ComplexMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)])
    }

    pub fn pauli_z() -> ComplexMatrix {
        ComplexMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)])
    }

    /// `[I, X, Y, Z]`.
    pub fn paulis() -> [ComplexMatrix; 4] {
        [pauli_i(), pauli_x(), pauli_y(), pauli_z()]
    }

    pub fn hadamard() -> ComplexMatrix {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        ComplexMatrix::from_row_slice(2, 2, &[c(s, 0.), c(s, 0.), c(s, 0.), c(-s, 0.)])
    }

    /// Control on the left (most significant) qubit.
    pub fn cnot() -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(4, 4);
        m[(0, 0)] = c(1., 0.);
        m[(1, 1)] = c(1., 0.);
        m[(2, 3)] = c(1., 0.);
        m[(3, 2)] = c(1., 0.);
        m
    }
}

/// `n` if `dim == 2^n`.
pub fn qubit_count(dim: usize) -> Option<usize> {
    (dim.is_power_of_two() && dim >= 2).then(|| dim.trailing_zeros() as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisKind {
    /// `tr(A_j† A_k) = δ_jk`; element `a·d + q` is `|q⟩⟨a|`.
    MatrixUnits,
    /// n-fold Pauli products with `tr(U_j† U_k) = d δ_jk`, ordered
    /// lexicographically in (I, X, Y, Z) with the leftmost qubit most
    /// significant.
    #[serde(alias = "pauli")]
    PauliProducts,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorBasis {
    dim: usize,
    kind: BasisKind,
    operators: Vec<ComplexMatrix>,
}

impl OperatorBasis {
    pub fn matrix_units(dim: usize) -> Self {
        let mut operators = Vec::with_capacity(dim * dim);
        for a in 0..dim {
            for q in 0..dim {
                let mut m = ComplexMatrix::zeros(dim, dim);
                m[(q, a)] = c(1., 0.);
                operators.push(m);
            }
        }
        Self {
            dim,
            kind: BasisKind::MatrixUnits,
            operators,
        }
    }

    pub fn pauli(n_qubits: usize) -> Self {
        let mut operators = vec![ComplexMatrix::identity(1, 1)];
        for _ in 0..n_qubits {
            operators = operators
                .iter()
                .flat_map(|prefix| gates::paulis().into_iter().map(move |p| kron(prefix, &p)))
                .collect();
        }
        Self {
            dim: 1 << n_qubits,
            kind: BasisKind::PauliProducts,
            operators,
        }
    }

    pub fn for_dim(dim: usize, kind: BasisKind) -> Result<Self> {
        match kind {
            BasisKind::MatrixUnits => Ok(Self::matrix_units(dim)),
            BasisKind::PauliProducts => qubit_count(dim).map(Self::pauli).ok_or(Error::NoUnitaryBasis(dim)),
        }
    }

    /// A user-supplied basis, checked against the orthogonality rule of `kind`.
    pub fn custom(kind: BasisKind, operators: Vec<ComplexMatrix>) -> Result<Self> {
        let n = operators.len();
        let dim = operators.first().map(|m| m.nrows()).unwrap_or(0);
        if dim == 0 || n != dim * dim {
            return Err(Error::BadBasis(format!(
                "{n} operators cannot span a {dim}-dimensional operator space"
            )));
        }
        if operators.iter().any(|m| m.shape() != (dim, dim)) {
            return Err(Error::BadBasis("operators have inconsistent shapes".into()));
        }
        let norm = match kind {
            BasisKind::MatrixUnits => 1.0,
            BasisKind::PauliProducts => dim as f64,
        };
        for (j, a) in operators.iter().enumerate() {
            for (k, b) in operators.iter().enumerate() {
                let want = if j == k { norm } else { 0.0 };
                if (hs_inner(a, b) - c(want, 0.)).norm() > BASIS_TOL * norm {
                    return Err(Error::BadBasis(format!("operators {j} and {k} are not orthogonal")));
                }
            }
            if kind == BasisKind::PauliProducts {
                if linalg::hermiticity_error(a) > BASIS_TOL {
                    return Err(Error::BadBasis(format!("operator {j} is not Hermitian")));
                }
                if max_abs_diff(&(a.adjoint() * a), &identity(dim)) > BASIS_TOL {
                    return Err(Error::BadBasis(format!("operator {j} is not unitary")));
                }
            }
        }
        Ok(Self { dim, kind, operators })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn operators(&self) -> &[ComplexMatrix] {
        &self.operators
    }

    /// `tr(A_j† A_j)`, identical for every element.
    pub fn norm(&self) -> f64 {
        match self.kind {
            BasisKind::MatrixUnits => 1.0,
            BasisKind::PauliProducts => self.dim as f64,
        }
    }

    /// Matrix whose columns are the column-major vectorized basis elements.
    fn vectorized(&self) -> ComplexMatrix {
        let n = self.dim * self.dim;
        let mut b = ComplexMatrix::zeros(n, n);
        for (m, op) in self.operators.iter().enumerate() {
            for (i, z) in op.iter().enumerate() {
                b[(i, m)] = *z;
            }
        }
        b
    }
}

/// Kraus-form channel `ρ ↦ Σ_j E_j ρ E_j†`, trace preserving.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel {
    dim: usize,
    elements: Vec<ComplexMatrix>,
}

impl KrausChannel {
    pub fn new(elements: Vec<ComplexMatrix>) -> Result<Self> {
        let dim = elements.first().map(|m| m.nrows()).unwrap_or(0);
        if dim == 0 {
            return Err(Error::InvalidKraus("at least one element is required".into()));
        }
        if elements.len() > dim * dim {
            return Err(Error::InvalidKraus(format!(
                "{} elements exceed the maximum of {} for dimension {dim}",
                elements.len(),
                dim * dim
            )));
        }
        check_elements(&elements, dim)?;
        let err = completeness_error(&elements);
        if err > TP_TOL {
            return Err(Error::InvalidKraus(format!("Σ E†E deviates from I by {err:e}")));
        }
        Ok(Self { dim, elements })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn elements(&self) -> &[ComplexMatrix] {
        &self.elements
    }
}

fn check_elements(elements: &[ComplexMatrix], dim: usize) -> Result<()> {
    for m in elements {
        if m.shape() != (dim, dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: if m.nrows() != dim { m.nrows() } else { m.ncols() },
            });
        }
        if !linalg::is_finite(m) {
            return Err(Error::NonFiniteInput);
        }
    }
    Ok(())
}

/// `‖Σ_j E_j† E_j − I‖_max`.
pub fn completeness_error(elements: &[ComplexMatrix]) -> f64 {
    let dim = elements[0].nrows();
    let sum = elements
        .iter()
        .fold(ComplexMatrix::zeros(dim, dim), |acc, e| acc + e.adjoint() * e);
    max_abs_diff(&sum, &identity(dim))
}

/// Choi–Jamiolkowski state `(I ⊗ E)(|Φ⟩⟨Φ|)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiState {
    dim: usize,
    state: DensityMatrix,
}

impl ChoiState {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let n = matrix.nrows();
        let dim = (n as f64).sqrt().round() as usize;
        if dim * dim != n || n == 0 {
            return Err(Error::InvalidChoi(format!("size {n} is not a square dimension")));
        }
        let state = DensityMatrix::new(matrix).map_err(|e| Error::InvalidChoi(e.to_string()))?;
        let reduced = partial_trace(state.matrix(), Subsystem::B, (dim, dim))?;
        let err = max_abs_diff(&reduced, &identity(dim).unscale(dim as f64));
        if err > CHOI_TP_TOL {
            return Err(Error::InvalidChoi(format!("tr_Q ρ deviates from I/d by {err:e}")));
        }
        Ok(Self { dim, state })
    }

    pub(crate) fn from_raw(dim: usize, matrix: ComplexMatrix) -> Self {
        Self {
            dim,
            state: DensityMatrix::from_raw(matrix),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn state(&self) -> &DensityMatrix {
        &self.state
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        self.state.matrix()
    }
}

/// Process matrix `χ` with `E(ρ) = Σ_mn χ_mn A_m ρ A_n†`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChiMatrix {
    pub basis: OperatorBasis,
    pub matrix: ComplexMatrix,
}

impl ChiMatrix {
    pub fn dim(&self) -> usize {
        self.basis.dim()
    }
}

/// A linear map in Kraus-like form with no trace-preservation guarantee.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap {
    dim: usize,
    elements: Vec<ComplexMatrix>,
}

impl LinearMap {
    pub fn new(elements: Vec<ComplexMatrix>) -> Result<Self> {
        let dim = elements.first().map(|m| m.nrows()).unwrap_or(0);
        if dim == 0 {
            return Err(Error::InvalidKraus("at least one element is required".into()));
        }
        check_elements(&elements, dim)?;
        Ok(Self { dim, elements })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn elements(&self) -> &[ComplexMatrix] {
        &self.elements
    }

    pub fn apply(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        apply_elements(&self.elements, rho)
    }

    pub fn is_trace_preserving(&self) -> bool {
        completeness_error(&self.elements) <= TP_TOL
    }

    pub fn into_channel(self) -> Result<Channel> {
        Channel::from_kraus_elements(self.elements)
    }
}

impl From<&Channel> for LinearMap {
    fn from(ch: &Channel) -> Self {
        Self {
            dim: ch.dim,
            elements: ch.kraus.elements.clone(),
        }
    }
}

fn apply_elements(elements: &[ComplexMatrix], rho: &ComplexMatrix) -> ComplexMatrix {
    let n = elements[0].nrows();
    elements
        .iter()
        .fold(ComplexMatrix::zeros(n, n), |acc, e| acc + e * rho * e.adjoint())
}

/// `(A ⊗ B)(ρ)` for maps acting on the two factors of a bipartite state.
pub fn apply_product(first: &LinearMap, second: &LinearMap, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = first.dim * second.dim;
    if rho.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: rho.nrows(),
        });
    }
    let mut out = ComplexMatrix::zeros(n, n);
    for a in &first.elements {
        for b in &second.elements {
            let k = kron(a, b);
            out += &k * rho * k.adjoint();
        }
    }
    Ok(out)
}

/// How a [`Channel`] was originally specified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Form {
    Kraus,
    Choi,
    Chi,
    Unitary,
}

/// A trace-preserving quantum operation. The Choi state is authoritative;
/// the Kraus set is a cache computed at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    dim: usize,
    form: Form,
    choi: ChoiState,
    kraus: KrausChannel,
    unitary: Option<UnitaryOperator>,
}

impl Channel {
    pub fn from_kraus(kraus: KrausChannel) -> Self {
        let choi = kraus_to_choi(&kraus);
        let unitary = (kraus.elements.len() == 1).then(|| UnitaryOperator::from_raw(kraus.elements[0].clone()));
        let mut ch = Self {
            dim: kraus.dim,
            form: Form::Kraus,
            choi,
            kraus,
            unitary,
        };
        if ch.unitary.is_none() {
            ch.detect_unitary();
        }
        ch
    }

    /// Accepts any number of elements; sets larger than `d²` are compressed
    /// through the Choi state.
    pub fn from_kraus_elements(elements: Vec<ComplexMatrix>) -> Result<Self> {
        let dim = elements.first().map(|m| m.nrows()).unwrap_or(0);
        if elements.len() <= dim * dim {
            return KrausChannel::new(elements).map(Self::from_kraus);
        }
        let map = LinearMap::new(elements)?;
        let err = completeness_error(&map.elements);
        if err > TP_TOL {
            return Err(Error::InvalidKraus(format!("Σ E†E deviates from I by {err:e}")));
        }
        let choi = ChoiState::from_raw(dim, choi_matrix(&map.elements));
        Ok(Self::from_choi_state(choi))
    }

    pub fn from_choi(matrix: ComplexMatrix) -> Result<Self> {
        let choi = ChoiState::new(matrix)?;
        Ok(Self {
            form: Form::Choi,
            ..Self::from_choi_state(choi)
        })
    }

    fn from_choi_state(choi: ChoiState) -> Self {
        let kraus = choi_to_kraus_unchecked(&choi);
        let unitary = (kraus.elements.len() == 1).then(|| UnitaryOperator::from_raw(kraus.elements[0].clone()));
        Self {
            dim: choi.dim,
            form: Form::Kraus,
            choi,
            kraus,
            unitary,
        }
    }

    pub fn from_chi(chi: &ChiMatrix) -> Result<Self> {
        let choi = chi_to_choi(chi)?;
        Ok(Self {
            form: Form::Chi,
            ..Self::from_choi_state(choi)
        })
    }

    pub fn unitary(u: &UnitaryOperator) -> Self {
        let kraus = KrausChannel {
            dim: u.dim(),
            elements: vec![u.matrix().clone()],
        };
        Self {
            form: Form::Unitary,
            ..Self::from_kraus(kraus)
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::unitary(&UnitaryOperator::identity(dim))
    }

    fn detect_unitary(&mut self) {
        let eig = hermitian_eig_unchecked(self.choi.matrix());
        if eig.values.len() > 1 && eig.values[1] * self.dim as f64 > KRAUS_THRESHOLD {
            return;
        }
        let k = choi_to_kraus_unchecked(&self.choi);
        if k.elements.len() == 1 {
            self.unitary = Some(UnitaryOperator::from_raw(k.elements[0].clone()));
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn form(&self) -> Form {
        self.form
    }

    pub fn choi(&self) -> &ChoiState {
        &self.choi
    }

    pub fn kraus(&self) -> &KrausChannel {
        &self.kraus
    }

    /// The unitary implementing this channel, when its Choi rank is one.
    pub fn as_unitary(&self) -> Option<&UnitaryOperator> {
        self.unitary.as_ref()
    }

    pub fn chi(&self, basis: &OperatorBasis) -> Result<ChiMatrix> {
        choi_to_chi(&self.choi, basis)
    }

    /// `E(ρ)` for a density matrix.
    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        self.check_dim(rho.dim())?;
        Ok(DensityMatrix::from_raw(self.apply_matrix(rho.matrix())))
    }

    /// `E(X)` for an arbitrary operator; the map is linear.
    pub fn apply_matrix(&self, x: &ComplexMatrix) -> ComplexMatrix {
        apply_elements(&self.kraus.elements, x)
    }

    /// `(I_A ⊗ E)(X)` for an operator on `A ⊗ Q` with `dim A = ancilla_dim`.
    pub fn apply_with_ancilla(&self, ancilla_dim: usize, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        let d = self.dim;
        let n = ancilla_dim * d;
        if x.nrows() != n || x.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: x.nrows(),
            });
        }
        let mut out = ComplexMatrix::zeros(n, n);
        for a in 0..ancilla_dim {
            for b in 0..ancilla_dim {
                let block = x.view((a * d, b * d), (d, d)).into_owned();
                out.view_mut((a * d, b * d), (d, d))
                    .copy_from(&self.apply_matrix(&block));
            }
        }
        Ok(out)
    }

    pub(crate) fn check_dim(&self, found: usize) -> Result<()> {
        if found != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found,
            });
        }
        Ok(())
    }

    pub fn is_doubly_stochastic(&self) -> bool {
        max_abs_diff(&self.apply_matrix(&identity(self.dim)), &identity(self.dim)) <= TP_TOL
    }

    // Standard channels.

    pub fn bit_flip(p: f64) -> Self {
        Self::pauli_channel([1.0 - p, p, 0.0, 0.0])
    }

    pub fn phase_flip(p: f64) -> Self {
        Self::pauli_channel([1.0 - p, 0.0, 0.0, p])
    }

    /// Qubit channel `ρ ↦ Σ_k p_k P_k ρ P_k` over `(I, X, Y, Z)`.
    pub fn pauli_channel(probs: [f64; 4]) -> Self {
        let elements = gates::paulis()
            .into_iter()
            .zip(probs)
            .filter(|(_, p)| *p > 0.0)
            .map(|(m, p)| m.scale(p.sqrt()))
            .collect();
        Self::from_kraus(KrausChannel::new(elements).expect("Pauli probabilities must sum to one"))
    }

    /// `ρ ↦ (1 − p) ρ + p tr(ρ) I/d`. Pauli-product Kraus elements when `d`
    /// is a power of two.
    pub fn depolarizing(dim: usize, p: f64) -> Self {
        if let Some(n) = qubit_count(dim) {
            let d2 = (dim * dim) as f64;
            let basis = OperatorBasis::pauli(n);
            let elements = basis
                .operators
                .into_iter()
                .enumerate()
                .filter_map(|(j, op)| {
                    let w = if j == 0 { 1.0 - p + p / d2 } else { p / d2 };
                    (w > 0.0).then(|| op.scale(w.sqrt()))
                })
                .collect();
            return Self::from_kraus(KrausChannel::new(elements).expect("depolarizing weights sum to one"));
        }
        let phi = linalg::max_entangled(dim).projector();
        let m = phi.scale(1.0 - p) + identity(dim * dim).scale(p / (dim * dim) as f64);
        Self::from_choi_state(ChoiState::from_raw(dim, m))
    }

    pub fn amplitude_damping(gamma: f64) -> Self {
        let k0 = ComplexMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c((1.0 - gamma).sqrt(), 0.)]);
        let k1 = ComplexMatrix::from_row_slice(2, 2, &[c(0., 0.), c(gamma.sqrt(), 0.), c(0., 0.), c(0., 0.)]);
        Self::from_kraus(KrausChannel::new(vec![k0, k1]).expect("amplitude damping is trace preserving"))
    }
}

fn choi_matrix(elements: &[ComplexMatrix]) -> ComplexMatrix {
    let d = elements[0].nrows();
    let n = d * d;
    let scale = 1.0 / d as f64;
    let mut out = ComplexMatrix::zeros(n, n);
    for e in elements {
        let v = ComplexVector::from_column_slice(e.as_slice());
        out += (&v * v.adjoint()).scale(scale);
    }
    out
}

/// `ρ_E = (I ⊗ E)(|Φ⟩⟨Φ|)`.
pub fn kraus_to_choi(ch: &KrausChannel) -> ChoiState {
    ChoiState::from_raw(ch.dim, choi_matrix(&ch.elements))
}

/// Kraus elements from the eigendecomposition of `d·ρ_E`, one per
/// eigenvalue above [`KRAUS_THRESHOLD`].
pub fn choi_to_kraus(c: &ChoiState) -> Result<KrausChannel> {
    // revalidate: the matrix may have been built without checks
    ChoiState::new(c.matrix().clone())?;
    Ok(choi_to_kraus_unchecked(c))
}

fn choi_to_kraus_unchecked(choi: &ChoiState) -> KrausChannel {
    let d = choi.dim;
    let eig = hermitian_eig_unchecked(&choi.matrix().scale(d as f64));
    let mut elements = Vec::new();
    for (i, &l) in eig.values.iter().enumerate() {
        if l <= KRAUS_THRESHOLD {
            break;
        }
        let col = eig.vectors.column(i).scale(l.sqrt());
        elements.push(ComplexMatrix::from_column_slice(d, d, col.as_slice()));
    }
    KrausChannel { dim: d, elements }
}

/// Process matrix in `basis`: `χ = B⁺ (d ρ_E) B⁺†` with `B` the vectorized
/// basis. Matrix units give `χ = d ρ_E` exactly.
pub fn choi_to_chi(choi: &ChoiState, basis: &OperatorBasis) -> Result<ChiMatrix> {
    if basis.dim != choi.dim {
        return Err(Error::DimensionMismatch {
            expected: choi.dim,
            found: basis.dim,
        });
    }
    let d = choi.dim as f64;
    let scaled = choi.matrix().scale(d);
    let matrix = match basis.kind {
        BasisKind::MatrixUnits if basis.operators == OperatorBasis::matrix_units(basis.dim).operators => scaled,
        _ => {
            let b = basis.vectorized();
            let norm = basis.norm();
            (b.adjoint() * scaled * b).unscale(norm * norm)
        }
    };
    Ok(ChiMatrix {
        basis: basis.clone(),
        matrix,
    })
}

pub fn chi_to_choi(chi: &ChiMatrix) -> Result<ChoiState> {
    let dim = chi.basis.dim;
    let n = dim * dim;
    if chi.matrix.shape() != (n, n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: chi.matrix.nrows(),
        });
    }
    let b = chi.basis.vectorized();
    let m = (&b * &chi.matrix * b.adjoint()).unscale(dim as f64);
    ChoiState::new(linalg::hermitian_part(&m))
}

/// `e2 ∘ e1`.
pub fn compose(e2: &Channel, e1: &Channel) -> Result<Channel> {
    e2.check_dim(e1.dim)?;
    let elements = e2
        .kraus
        .elements
        .iter()
        .flat_map(|a| e1.kraus.elements.iter().map(move |b| a * b))
        .collect();
    Channel::from_kraus_elements(elements)
}

/// `a ⊗ b`, with `a` acting on the more significant factor.
pub fn tensor(a: &Channel, b: &Channel) -> Channel {
    let elements = a
        .kraus
        .elements
        .iter()
        .flat_map(|x| b.kraus.elements.iter().map(move |y| kron(x, y)))
        .collect();
    Channel::from_kraus_elements(elements).expect("tensor product of channels is a channel")
}

/// Basis permutation relating `ρ_{a⊗b}` (ordered `A₁A₂Q₁Q₂`) to
/// `ρ_a ⊗ ρ_b` (ordered `A₁Q₁A₂Q₂`): entry `i` is the `ρ_a ⊗ ρ_b` index of
/// the `i`-th `ρ_{a⊗b}` basis state.
pub fn tensor_choi_permutation(d1: usize, d2: usize) -> Vec<usize> {
    let d = d1 * d2;
    let mut perm = vec![0; d * d];
    for a1 in 0..d1 {
        for a2 in 0..d2 {
            for q1 in 0..d1 {
                for q2 in 0..d2 {
                    let src = (a1 * d2 + a2) * d + (q1 * d2 + q2);
                    let dst = (a1 * d1 + q1) * (d2 * d2) + (a2 * d2 + q2);
                    perm[src] = dst;
                }
            }
        }
    }
    perm
}

/// `P[i, j] = M[perm[i], perm[j]]`.
pub fn permute_basis(m: &ComplexMatrix, perm: &[usize]) -> ComplexMatrix {
    ComplexMatrix::from_fn(perm.len(), perm.len(), |i, j| m[(perm[i], perm[j])])
}

/// Result of [`transpose_channel`].
#[derive(Debug, Clone, PartialEq)]
pub struct TransposedChannel {
    pub map: LinearMap,
    /// False when the input was not doubly stochastic; the map is then not a
    /// channel.
    pub trace_preserving: bool,
}

/// `F^T(ρ) = Σ_j F_jᵀ ρ F_j*`.
pub fn transpose_channel(f: &Channel) -> TransposedChannel {
    let map = LinearMap {
        dim: f.dim,
        elements: f.kraus.elements.iter().map(|m| m.transpose()).collect(),
    };
    let trace_preserving = map.is_trace_preserving();
    TransposedChannel { map, trace_preserving }
}

/// Haar-random Stinespring isometry `V: C^d → C^{d·k}` split into `k`
/// Kraus blocks.
pub fn random_channel<R: Rng + ?Sized>(dim: usize, kraus_count: usize, rng: &mut R) -> KrausChannel {
    assert!(
        (1..=dim * dim).contains(&kraus_count),
        "kraus_count must lie in 1..=dim²"
    );
    let v = random_isometry(dim * kraus_count, dim, rng);
    let elements = (0..kraus_count)
        .map(|j| v.view((j * dim, 0), (dim, dim)).into_owned())
        .collect();
    KrausChannel { dim, elements }
}

/// `(1 − w) A + w B`, built from the union of scaled Kraus elements.
pub fn mixture(a: &Channel, b: &Channel, weight: f64) -> Result<Channel> {
    a.check_dim(b.dim())?;
    if !(0.0..=1.0).contains(&weight) {
        return Err(Error::InvalidKraus(format!("mixing weight {weight} outside [0, 1]")));
    }
    let (wa, wb) = ((1.0 - weight).sqrt(), weight.sqrt());
    let elements = a
        .kraus()
        .elements()
        .iter()
        .map(|k| k.scale(wa))
        .chain(b.kraus().elements().iter().map(|k| k.scale(wb)))
        .filter(|k| linalg::max_abs(k) > 0.0)
        .collect();
    Channel::from_kraus_elements(elements)
}

/// Haar-random isometry (`rows ≥ cols`) from the phase-fixed QR
/// decomposition of a complex Gaussian matrix.
pub fn random_isometry<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    let g = linalg::ginibre(rows, cols, rng);
    let qr = QR::new(g);
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..cols {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 {
            rjj / rjj.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..rows {
            q[(i, j)] *= phase;
        }
    }
    q
}

pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> UnitaryOperator {
    UnitaryOperator::from_raw(random_isometry(dim, dim, rng))
}
