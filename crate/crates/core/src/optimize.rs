//! Searches over input states.
//!
//! [`frank_wolfe`] minimizes or maximizes a convex (resp. concave) function
//! of a density matrix. The linear subproblem over density matrices is
//! solved by an extremal eigenvector of the gradient, the step by golden
//! section, and the Frank–Wolfe duality gap is the stopping rule. Gradients
//! are forward finite differences along rank-one positive directions, so
//! every probe is itself a density matrix even on the boundary.
//!
//! [`pure_state_search`] handles the non-convex worst-case problems, where
//! the optimum over density matrices is attained at a pure state: it runs
//! geodesic gradient steps on the unit sphere from Haar-random starts.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, hermitian_eig_unchecked, identity, ComplexMatrix, ComplexVector, DensityMatrix, PureState};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub max_iterations: usize,
    pub gap_tolerance: f64,
    pub restarts: usize,
    pub fd_step: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            gap_tolerance: 1e-7,
            restarts: 8,
            fd_step: 1e-5,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 || self.restarts == 0 {
            return Err(Error::Parse("max_iterations and restarts must be positive".into()));
        }
        if !(self.gap_tolerance > 0.0 && self.fd_step > 0.0) {
            return Err(Error::Parse("gap_tolerance and fd_step must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerResult {
    pub value: f64,
    /// The input state at which `value` is attained.
    pub optimal_input: DensityMatrix,
    pub iterations: usize,
    pub final_gap: f64,
    pub converged: bool,
}

impl OptimizerResult {
    /// `Err(ConvergenceFailure)` when the run did not reach the gap tolerance.
    pub fn require_converged(&self) -> Result<&Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::ConvergenceFailure {
                gap: self.final_gap,
                iterations: self.iterations,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

impl Sense {
    fn sign(self) -> f64 {
        match self {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        }
    }
}

const GOLDEN_TOL: f64 = 1e-9;
const DEGENERATE_SPREAD: f64 = 1e-12;
const PERTURBATION: f64 = 1e-8;
const STALL_LIMIT: usize = 8;
const AWAY_MIN_WEIGHT: f64 = 1e-12;
const EXTRAPOLATION_SPAN: f64 = 4.0;

/// Conditional-gradient optimization over `dim × dim` density matrices.
///
/// `objective` receives unit-trace positive matrices, up to rounding, so it
/// should clamp tiny negative eigenvalues. Restart 0 starts from `I/dim`,
/// the remaining restarts from random full-rank states, and `extra_starts`
/// are appended. The best run wins, ties going to the lowest index.
///
/// `bound` is an a priori bound on the optimum (below for minimization,
/// above for maximization). The reported gap is the smaller of the
/// Frank–Wolfe gap and the distance to it, so saturated problems such as a
/// fidelity of zero certify convergence.
///
/// Besides the Frank–Wolfe step toward the extremal eigenvector, every
/// iteration also line-searches an away step, a projected-gradient step and
/// an extrapolation along the last two iterates, and keeps the best.
pub fn frank_wolfe<F>(
    objective: F,
    dim: usize,
    sense: Sense,
    config: &OptimizerConfig,
    extra_starts: &[DensityMatrix],
    bound: Option<f64>,
) -> OptimizerResult
where
    F: Fn(&ComplexMatrix) -> f64 + Sync,
{
    let mut starts: Vec<ComplexMatrix> = (0..config.restarts)
        .map(|r| {
            if r == 0 {
                identity(dim).unscale(dim as f64)
            } else {
                linalg::random_density(dim, &mut rng::stream(config.seed, r as u64)).into_matrix()
            }
        })
        .collect();
    starts.extend(extra_starts.iter().map(|s| s.matrix().clone()));
    let runs: Vec<OptimizerResult> = starts
        .into_par_iter()
        .enumerate()
        .map(|(r, start)| fw_run(&objective, start, sense, config, r as u64, bound))
        .collect();
    best_of(runs, sense)
}

fn best_of(runs: Vec<OptimizerResult>, sense: Sense) -> OptimizerResult {
    let s = sense.sign();
    runs.into_iter()
        .reduce(|best, run| if s * run.value < s * best.value { run } else { best })
        .expect("at least one restart")
}

/// Rank-one probe directions `|u⟩⟨u|` with `u` ranging over `e_i`,
/// `(e_i + e_j)/√2` and `(e_i + i e_j)/√2`. Adding a probe never leaves the
/// positive cone, so forward differences stay valid on the boundary.
fn probes(dim: usize) -> Vec<(usize, usize, u8, ComplexMatrix)> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(dim * dim);
    for i in 0..dim {
        let mut p = ComplexMatrix::zeros(dim, dim);
        p[(i, i)] = linalg::c(1.0, 0.0);
        out.push((i, i, 0, p));
    }
    for i in 0..dim {
        for j in i + 1..dim {
            for (kind, phase) in [(1u8, linalg::c(s, 0.0)), (2u8, linalg::c(0.0, s))] {
                let mut u = ComplexVector::zeros(dim);
                u[i] = linalg::c(s, 0.0);
                u[j] = phase;
                out.push((i, j, kind, &u * u.adjoint()));
            }
        }
    }
    out
}

/// Gradient `G` of the trace-normalized objective, recovered from
/// second-order forward differences `⟨u|G|u⟩` along the probes. `G` is fixed
/// only up to a multiple of the identity, which the duality gap ignores.
fn fd_gradient<F>(objective: &F, rho: &ComplexMatrix, value: f64, step: f64, sign: f64) -> ComplexMatrix
where
    F: Fn(&ComplexMatrix) -> f64,
{
    let dim = rho.nrows();
    let normalized = |m: ComplexMatrix| {
        let t = linalg::trace(&m).re;
        m.unscale(t)
    };
    let directional = |p: &ComplexMatrix| {
        let one = objective(&normalized(rho + p.scale(step)));
        let two = objective(&normalized(rho + p.scale(2.0 * step)));
        sign * (4.0 * one - two - 3.0 * value) / (2.0 * step)
    };
    let all = probes(dim);
    let derivs: Vec<f64> = all.iter().map(|(_, _, _, p)| directional(p)).collect();
    let mut grad = ComplexMatrix::zeros(dim, dim);
    for (&(i, j, kind, _), &dv) in all.iter().zip(&derivs) {
        match kind {
            0 => grad[(i, i)] = linalg::c(dv, 0.0),
            1 => grad[(i, j)].re = dv - 0.5 * (derivs[i] + derivs[j]),
            _ => grad[(i, j)].im = 0.5 * (derivs[i] + derivs[j]) - dv,
        }
    }
    for i in 0..dim {
        for j in i + 1..dim {
            grad[(j, i)] = grad[(i, j)].conj();
        }
    }
    grad
}

fn fw_run<F>(
    objective: &F,
    start: ComplexMatrix,
    sense: Sense,
    config: &OptimizerConfig,
    stream: u64,
    bound: Option<f64>,
) -> OptimizerResult
where
    F: Fn(&ComplexMatrix) -> f64,
{
    let sign = sense.sign();
    let dim = start.nrows();
    let mut perturb_rng = rng::stream(config.seed ^ 0x5eed_f00d, stream);
    let signed = |m: &ComplexMatrix| sign * objective(m);

    let mut rho = start;
    let mut value = signed(&rho);
    let mut gap = f64::INFINITY;
    let mut iterations = 0;
    let mut stalled = 0;
    let mut converged = false;
    let mut previous: Option<ComplexMatrix> = None;
    let mut history: Option<ComplexMatrix> = None;

    while iterations < config.max_iterations {
        let mut grad = fd_gradient(objective, &rho, sign * value, config.fd_step, sign);
        let mut eig = hermitian_eig_unchecked(&grad);
        let lo = *eig.values.last().unwrap();
        gap = (linalg::hs_inner(&grad, &rho).re - lo).max(0.0);
        if let Some(b) = bound {
            gap = gap.min((value - sign * b).max(0.0));
        }
        if gap <= config.gap_tolerance {
            converged = true;
            break;
        }
        iterations += 1;
        if eig.values[0] - lo < DEGENERATE_SPREAD {
            let h = linalg::random_hermitian(dim, &mut perturb_rng);
            let n = h.norm();
            grad += h.scale(PERTURBATION / n);
            eig = hermitian_eig_unchecked(&grad);
        }
        let inner = linalg::hs_inner(&grad, &rho).re;
        let lo = *eig.values.last().unwrap();
        let v = eig.vector(dim - 1);
        let toward = &v * v.adjoint();
        // away step: shrink the support direction the gradient likes least
        let support = hermitian_eig_unchecked(&rho);
        let away = (0..dim)
            .filter(|&i| support.values[i] > AWAY_MIN_WEIGHT && support.values[i] < 1.0 - AWAY_MIN_WEIGHT)
            .map(|i| {
                let u = support.vector(i);
                (u.dotc(&(&grad * &u)).re, u, support.values[i])
            })
            .max_by(|a, b| a.0.total_cmp(&b.0));
        let (gamma, next, step): (f64, f64, Box<dyn Fn(f64) -> ComplexMatrix>) = match away {
            Some((score, u, weight)) if score - inner > inner - lo => {
                let drop = &u * u.adjoint();
                let base = rho.clone();
                let along = move |g: f64| base.scale(1.0 + g) - drop.scale(g);
                let (g, f) = golden_section(|g| signed(&along(g)), 0.0, weight / (1.0 - weight), value);
                (g, f, Box::new(along))
            }
            _ => {
                let base = rho.clone();
                let along = move |g: f64| base.scale(1.0 - g) + toward.scale(g);
                let (g, f) = golden_section(|g| signed(&along(g)), 0.0, 1.0, value);
                (g, f, Box::new(along))
            }
        };
        // projected-gradient candidate; the Frank–Wolfe gap stays the certificate
        let shifted = &grad - identity(dim).scale(linalg::trace(&grad).re / dim as f64);
        let norm = shifted.norm();
        let (gamma, next, step) = if norm > 0.0 {
            let base = rho.clone();
            let pg = move |eta: f64| project_to_states(&(&base - shifted.scale(eta)));
            let (eta, f) = golden_section(|eta| signed(&pg(eta)), 0.0, 1.0 / norm, value);
            if f < next {
                (eta, f, Box::new(pg) as Box<dyn Fn(f64) -> ComplexMatrix>)
            } else {
                (gamma, next, step)
            }
        } else {
            (gamma, next, step)
        };
        // extrapolation along the last two displacements (parallel tangents)
        let (gamma, next, step) = match &history {
            Some(older) => {
                let base = rho.clone();
                let dir = &rho - older;
                let ext = move |t: f64| project_to_states(&(&base + dir.scale(t)));
                let (t, f) = golden_section(|t| signed(&ext(t)), 0.0, EXTRAPOLATION_SPAN, value);
                if f < next {
                    (t, f, Box::new(ext) as Box<dyn Fn(f64) -> ComplexMatrix>)
                } else {
                    (gamma, next, step)
                }
            }
            None => (gamma, next, step),
        };
        if next < value {
            let gain = value - next;
            history = previous.replace(rho.clone());
            rho = step(gamma);
            value = next;
            stalled = if gain < 1e-15 { stalled + 1 } else { 0 };
        } else {
            stalled += 1;
        }
        if stalled >= STALL_LIMIT {
            break;
        }
    }
    OptimizerResult {
        value: sign * value,
        optimal_input: DensityMatrix::project(&rho).unwrap_or_else(|_| DensityMatrix::maximally_mixed(dim)),
        iterations,
        final_gap: gap,
        converged,
    }
}

/// Euclidean projection of a Hermitian matrix onto density matrices: the
/// spectrum is projected onto the probability simplex.
fn project_to_states(m: &ComplexMatrix) -> ComplexMatrix {
    let eig = hermitian_eig_unchecked(m);
    let mut cumulative = 0.0;
    let mut shift = 0.0;
    for (k, &l) in eig.values.iter().enumerate() {
        cumulative += l;
        let candidate = (cumulative - 1.0) / (k + 1) as f64;
        if l - candidate > 0.0 {
            shift = candidate;
        }
    }
    eig.map_values(|l| (l - shift).max(0.0))
}

/// Minimizes a unimodal `f` on `[lo, hi]`. `f_lo` is the known value at `lo`;
/// the returned point is the best of the bracket and both endpoints.
fn golden_section<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, f_lo: f64) -> (f64, f64) {
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - ratio * (b - a);
    let mut x2 = a + ratio * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    // relative to the bracket, since wide brackets run out of float resolution
    let tol = GOLDEN_TOL * (hi - lo).max(1.0);
    while b - a > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - ratio * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + ratio * (b - a);
            f2 = f(x2);
        }
    }
    let mut best = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    let f_hi = f(hi);
    if f_hi < best.1 {
        best = (hi, f_hi);
    }
    if f_lo <= best.1 {
        best = (lo, f_lo);
    }
    best
}

const PURE_SAMPLES_PER_RESTART: usize = 16;

/// Local search over pure states of dimension `dim`, maximizing or
/// minimizing `objective(|ψ⟩)` for unit vectors `|ψ⟩`. Reported gap is the norm of the
/// Riemannian gradient on the unit sphere.
pub fn pure_state_search<F>(objective: F, dim: usize, sense: Sense, config: &OptimizerConfig) -> OptimizerResult
where
    F: Fn(&ComplexVector) -> f64 + Sync,
{
    let runs: Vec<OptimizerResult> = (0..config.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(config.seed, r as u64);
            let sign = sense.sign();
            let start = (0..PURE_SAMPLES_PER_RESTART)
                .map(|_| linalg::haar_state(dim, &mut rng))
                .map(|s| {
                    let v = sign * objective(s.amplitudes());
                    (s, v)
                })
                .reduce(|a, b| if b.1 < a.1 { b } else { a })
                .expect("nonempty sample");
            sphere_run(&objective, start.0, sense, config)
        })
        .collect();
    best_of(runs, sense)
}

fn sphere_run<F>(objective: &F, start: PureState, sense: Sense, config: &OptimizerConfig) -> OptimizerResult
where
    F: Fn(&ComplexVector) -> f64,
{
    let sign = sense.sign();
    let dim = start.dim();
    let signed = |v: &ComplexVector| sign * objective(v);
    let mut psi = start.amplitudes().clone();
    let mut value = signed(&psi);
    let mut gap = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    let mut stalled = 0;
    let h = config.fd_step;

    while iterations < config.max_iterations {
        let tangents = tangent_basis(&psi);
        let mut grad = ComplexVector::zeros(dim);
        for t in &tangents {
            let plus = signed(&(psi.scale(h.cos()) + t.scale(h.sin())));
            let minus = signed(&(psi.scale(h.cos()) - t.scale(h.sin())));
            grad += t.scale((plus - minus) / (2.0 * h));
        }
        gap = grad.norm();
        if gap <= config.gap_tolerance {
            converged = true;
            break;
        }
        iterations += 1;
        let dir = -grad.unscale(gap);
        let along = |theta: f64| psi.scale(theta.cos()) + dir.scale(theta.sin());
        let (theta, next) = golden_section(|t| signed(&along(t)), 0.0, std::f64::consts::FRAC_PI_2, value);
        if next < value {
            stalled = if value - next < 1e-15 { stalled + 1 } else { 0 };
            psi = along(theta);
            psi.unscale_mut(psi.norm());
            value = next;
        } else {
            stalled += 1;
        }
        if stalled >= STALL_LIMIT {
            break;
        }
    }
    let state = PureState::normalized(psi).expect("unit vector");
    OptimizerResult {
        value: sign * value,
        optimal_input: state.to_density(),
        iterations,
        final_gap: gap,
        converged,
    }
}

/// Real orthonormal basis of the tangent space at `psi`: `v_k` and `i v_k`
/// for an orthonormal basis `v_k` of the complement of `psi`.
fn tangent_basis(psi: &ComplexVector) -> Vec<ComplexVector> {
    let dim = psi.len();
    let projector = identity(dim) - psi * psi.adjoint();
    let eig = hermitian_eig_unchecked(&projector);
    let mut out = Vec::with_capacity(2 * (dim - 1));
    for k in 0..dim - 1 {
        let v = eig.vector(k);
        out.push(v.clone());
        out.push(v * linalg::c(0.0, 1.0));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, hs_inner};

    fn diag(values: &[f64]) -> ComplexMatrix {
        ComplexMatrix::from_diagonal(&ComplexVector::from_iterator(
            values.len(),
            values.iter().map(|&v| c(v, 0.0)),
        ))
    }

    #[test]
    fn golden_section_finds_parabola_minimum() {
        let (x, fx) = golden_section(|x| (x - 0.3) * (x - 0.3), 0.0, 1.0, 0.09);
        assert!((x - 0.3).abs() < 1e-8 && fx < 1e-15);
        let (x, _) = golden_section(|x| -x, 0.0, 1.0, 0.0);
        assert_eq!(x, 1.0);
    }

    #[test]
    fn frank_wolfe_minimizes_linear_objective_at_a_vertex() {
        let h = diag(&[0.3, -0.2, 0.9]);
        let cfg = OptimizerConfig {
            restarts: 2,
            ..OptimizerConfig::default()
        };
        let r = frank_wolfe(|m| hs_inner(&h, m).re, 3, Sense::Minimize, &cfg, &[], None);
        assert!(r.converged, "gap {}", r.final_gap);
        assert!((r.value + 0.2).abs() < 1e-7);
        let r = frank_wolfe(|m| hs_inner(&h, m).re, 3, Sense::Maximize, &cfg, &[], None);
        assert!((r.value - 0.9).abs() < 1e-7);
    }

    #[test]
    fn frank_wolfe_purity_minimum_is_maximally_mixed() {
        let cfg = OptimizerConfig {
            restarts: 3,
            seed: 5,
            ..OptimizerConfig::default()
        };
        let r = frank_wolfe(|m| hs_inner(m, m).re, 4, Sense::Minimize, &cfg, &[], None);
        assert!(r.converged);
        assert!((r.value - 0.25).abs() < 1e-7);
    }

    #[test]
    fn pure_search_finds_extreme_eigenvalues() {
        let h = diag(&[0.1, 0.7, -0.4, 0.2]);
        let cfg = OptimizerConfig {
            restarts: 2,
            ..OptimizerConfig::default()
        };
        let r = pure_state_search(|v| v.dotc(&(&h * v)).re, 4, Sense::Maximize, &cfg);
        assert!((r.value - 0.7).abs() < 1e-9, "{}", r.value);
        assert!(r.converged);
        let r = pure_state_search(|v| v.dotc(&(&h * v)).re, 4, Sense::Minimize, &cfg);
        assert!((r.value + 0.4).abs() < 1e-9);
        assert!((r.optimal_input.purity() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nonconverged_result_reports_failure() {
        let cfg = OptimizerConfig {
            max_iterations: 1,
            restarts: 1,
            seed: 3,
            ..OptimizerConfig::default()
        };
        let h = diag(&[0.0, 1.0]);
        let r = frank_wolfe(
            |m| (hs_inner(&h, m).re - 0.37).powi(2),
            2,
            Sense::Minimize,
            &cfg,
            &[],
            None,
        );
        assert!(!r.converged);
        assert!(matches!(r.require_converged(), Err(Error::ConvergenceFailure { .. })));
        assert!(OptimizerConfig { restarts: 0, ..cfg }.validate().is_err());
    }
}
