//! Consensus objectives: a sum `f(x) = sum_i f_i(x)` where agent `i` alone
//! can evaluate `f_i` and its gradient.
//!
//! Three concrete families live here: a three-agent quadratic toy with a
//! shared minimizer, decentralized least squares, and the Lagrange dual of
//! column-partitioned basis pursuit (each agent owns a column block of the
//! dictionary and recovers its slice of the sparse signal).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Tolerances;
use crate::engine::AgentStates;
use crate::linalg::{self, Cholesky, DenseMatrix, LinalgError};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Per-agent objective oracles plus the convexity data the bounds need.
///
/// Gradients must be Lipschitz with the per-agent constants reported here;
/// `strong_convexity` and `restricted_strong_convexity` describe the sum
/// `f = sum_i f_i` and return `None` when unknown.
pub trait ConsensusProblem<T: Real> {
    fn agents(&self) -> usize;
    fn dim(&self) -> usize;
    fn local_value(&self, agent: usize, x: &[T]) -> T;
    fn local_gradient_into(&self, agent: usize, x: &[T], grad: &mut [T]);
    fn local_lipschitz(&self, agent: usize) -> T;
    /// Minimum of `f_i`, when analytically known.
    fn local_minimum_value(&self, agent: usize) -> Option<T>;
    /// Strong convexity modulus of `f`, when known.
    fn strong_convexity(&self) -> Option<T>;
    /// Restricted strong convexity modulus of `f`, when known.
    fn restricted_strong_convexity(&self) -> Option<T> {
        None
    }

    fn local_gradient(&self, agent: usize, x: &[T]) -> Vec<T> {
        let mut g = vec![T::zero(); self.dim()];
        self.local_gradient_into(agent, x, &mut g);
        g
    }

    /// Largest per-agent Lipschitz constant (`L_h`).
    fn max_lipschitz(&self) -> T {
        (0..self.agents())
            .map(|i| self.local_lipschitz(i))
            .fold(T::zero(), T::max)
    }

    /// Average per-agent Lipschitz constant, i.e. the Lipschitz constant of
    /// the averaged objective.
    fn mean_lipschitz(&self) -> T {
        let sum: T = (0..self.agents()).map(|i| self.local_lipschitz(i)).sum();
        sum / T::of(self.agents() as f64)
    }

    /// `f(x) = sum_i f_i(x)`.
    fn value(&self, x: &[T]) -> T {
        (0..self.agents()).map(|i| self.local_value(i, x)).sum()
    }

    /// Averaged objective `f(x) / n`.
    fn mean_value(&self, x: &[T]) -> T {
        self.value(x) / T::of(self.agents() as f64)
    }

    /// Gradient of the averaged objective.
    fn mean_gradient_into(&self, x: &[T], out: &mut [T]) {
        let n = T::of(self.agents() as f64);
        for v in out.iter_mut() {
            *v = T::zero();
        }
        let mut scratch = vec![T::zero(); self.dim()];
        for i in 0..self.agents() {
            self.local_gradient_into(i, x, &mut scratch);
            linalg::axpy(out, T::one() / n, &scratch);
        }
    }

    fn mean_gradient(&self, x: &[T]) -> Vec<T> {
        let mut g = vec![T::zero(); self.dim()];
        self.mean_gradient_into(x, &mut g);
        g
    }
}

// ---------------------------------------------------------------------------
// Quadratic averaging example
// ---------------------------------------------------------------------------

/// Three agents, each holding `(l / 2) (x - 1)^2` in one dimension. The
/// shared minimizer at 1 makes this the smallest nontrivial testbed for
/// stepsize limits.
#[derive(Debug, Clone)]
pub struct QuadraticExample<T> {
    l: T,
}

/// Builds the three-agent quadratic example with curvature `l`.
pub fn quadratic_example<T: Real>(l: T) -> QuadraticExample<T> {
    assert!(l > T::zero(), "curvature must be positive");
    QuadraticExample { l }
}

impl<T: Real> ConsensusProblem<T> for QuadraticExample<T> {
    fn agents(&self) -> usize {
        3
    }

    fn dim(&self) -> usize {
        1
    }

    fn local_value(&self, _agent: usize, x: &[T]) -> T {
        let d = x[0] - T::one();
        self.l * d * d / T::of(2.0)
    }

    fn local_gradient_into(&self, _agent: usize, x: &[T], grad: &mut [T]) {
        grad[0] = self.l * (x[0] - T::one());
    }

    fn local_lipschitz(&self, _agent: usize) -> T {
        self.l
    }

    fn local_minimum_value(&self, _agent: usize) -> Option<T> {
        Some(T::zero())
    }

    fn strong_convexity(&self) -> Option<T> {
        Some(T::of(3.0) * self.l)
    }
}

// ---------------------------------------------------------------------------
// Least squares
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct LsAgent<T> {
    a: DenseMatrix<T>,
    b: Vec<T>,
    lipschitz: T,
    min_value: Option<T>,
}

/// Decentralized least squares: agent `i` holds `f_i(x) = 0.5 ||b_i - A_i x||^2`.
#[derive(Debug, Clone)]
pub struct LeastSquares<T> {
    agents: Vec<LsAgent<T>>,
    dim: usize,
    mu: Option<T>,
}

/// Assembles a least-squares consensus problem from per-agent data.
///
/// Per-agent Lipschitz constants are the top eigenvalues of `A_i^T A_i`;
/// per-agent minima come from a normal-equations solve (skipped, and
/// reported as unknown, when the per-agent Gram matrix is rank deficient).
pub fn least_squares<T: Real>(
    a: Vec<DenseMatrix<T>>,
    b: Vec<Vec<T>>,
) -> Result<LeastSquares<T>, ProblemError> {
    if a.is_empty() || a.len() != b.len() {
        return Err(ProblemError::ShapeMismatch(format!(
            "need matching nonempty matrix/vector lists, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let dim = a[0].cols();
    let tol = Tolerances::default();
    let mut agents = Vec::with_capacity(a.len());
    let mut gram_total = DenseMatrix::zeros(dim, dim);
    for (idx, (ai, bi)) in a.into_iter().zip(b.into_iter()).enumerate() {
        if ai.cols() != dim {
            return Err(ProblemError::ShapeMismatch(format!(
                "agent {idx} matrix has {} columns, expected {dim}",
                ai.cols()
            )));
        }
        if ai.rows() != bi.len() {
            return Err(ProblemError::ShapeMismatch(format!(
                "agent {idx} has {} rows but a length-{} measurement",
                ai.rows(),
                bi.len()
            )));
        }
        let gram = ai.gram();
        gram_total = gram_total.add(&gram);
        let eigs = linalg::symmetric_eigenvalues(&gram, &tol)?;
        let top = eigs[0];
        let bottom = *eigs.last().expect("nonempty spectrum");
        let min_value = if bottom > T::zero() && top / bottom <= T::of(tol.condition_limit) {
            let rhs = ai.matvec_transpose(&bi);
            let x_min = Cholesky::factor(&gram)?.solve(&rhs);
            let residual = linalg::sub(&bi, &ai.matvec(&x_min));
            Some(linalg::dot(&residual, &residual) / T::of(2.0))
        } else {
            None
        };
        agents.push(LsAgent { a: ai, b: bi, lipschitz: top, min_value });
    }
    let total_eigs = linalg::symmetric_eigenvalues(&gram_total, &tol)?;
    let bottom = *total_eigs.last().expect("nonempty spectrum");
    let mu = if bottom > T::zero() { Some(bottom) } else { None };
    Ok(LeastSquares { agents, dim, mu })
}

impl<T: Real> LeastSquares<T> {
    pub fn agent_matrix(&self, agent: usize) -> &DenseMatrix<T> {
        &self.agents[agent].a
    }

    pub fn agent_measurement(&self, agent: usize) -> &[T] {
        &self.agents[agent].b
    }
}

impl<T: Real> ConsensusProblem<T> for LeastSquares<T> {
    fn agents(&self) -> usize {
        self.agents.len()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn local_value(&self, agent: usize, x: &[T]) -> T {
        let ag = &self.agents[agent];
        let residual = linalg::sub(&ag.b, &ag.a.matvec(x));
        linalg::dot(&residual, &residual) / T::of(2.0)
    }

    fn local_gradient_into(&self, agent: usize, x: &[T], grad: &mut [T]) {
        let ag = &self.agents[agent];
        let mut ax = ag.a.matvec(x);
        for (v, &b) in ax.iter_mut().zip(&ag.b) {
            *v -= b;
        }
        ag.a.matvec_transpose_into(&ax, grad);
    }

    fn local_lipschitz(&self, agent: usize) -> T {
        self.agents[agent].lipschitz
    }

    fn local_minimum_value(&self, agent: usize) -> Option<T> {
        self.agents[agent].min_value
    }

    fn strong_convexity(&self) -> Option<T> {
        self.mu
    }
}

/// Replayable least-squares data: per-agent square Gaussian matrices and
/// measurements `b_i = A_i x_true (+ noise)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeastSquaresInstance<T> {
    pub seed: u64,
    pub noise_sigma: f64,
    pub x_true: Vec<T>,
    pub matrices: Vec<DenseMatrix<T>>,
    pub measurements: Vec<Vec<T>>,
}

/// Gaussian least-squares instance with exactly consistent measurements:
/// `b_i = A_i x_true`. Identical `(n, p, seed)` triples give identical data.
pub fn generate_ls_instance<T: Real>(n: usize, p: usize, seed: u64) -> LeastSquaresInstance<T> {
    generate_noisy_ls_instance(n, p, 0.0, seed)
}

/// Least-squares instance with per-agent measurement noise of standard
/// deviation `sigma`. With `sigma > 0` the agents no longer share a
/// minimizer, so the iteration lands on a stepsize-proportional error floor
/// instead of converging exactly.
pub fn generate_noisy_ls_instance<T: Real>(
    n: usize,
    p: usize,
    sigma: f64,
    seed: u64,
) -> LeastSquaresInstance<T> {
    assert!(n >= 1 && p >= 1, "need at least one agent and one dimension");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x_true = gaussian_vec::<T>(&mut rng, p);
    let matrices: Vec<DenseMatrix<T>> =
        (0..n).map(|_| gaussian_matrix::<T>(&mut rng, p, p)).collect();
    let mut measurements: Vec<Vec<T>> = matrices.iter().map(|a| a.matvec(&x_true)).collect();
    if sigma > 0.0 {
        let s = T::of(sigma);
        for b in measurements.iter_mut() {
            for v in b.iter_mut() {
                *v += s * T::standard_normal(&mut rng);
            }
        }
    }
    LeastSquaresInstance { seed, noise_sigma: sigma, x_true, matrices, measurements }
}

impl<T: Real> LeastSquaresInstance<T> {
    pub fn agents(&self) -> usize {
        self.matrices.len()
    }

    pub fn dim(&self) -> usize {
        self.x_true.len()
    }

    pub fn problem(&self) -> Result<LeastSquares<T>, ProblemError> {
        least_squares(self.matrices.clone(), self.measurements.clone())
    }
}

// ---------------------------------------------------------------------------
// Basis pursuit dual
// ---------------------------------------------------------------------------

/// Componentwise soft threshold at 1: `max(|z| - 1, 0) sign(z)`.
pub fn shrink_scalar<T: Real>(z: T) -> T {
    let excess = z.abs() - T::one();
    if excess > T::zero() {
        excess * z.signum()
    } else {
        T::zero()
    }
}

pub fn shrink_into<T: Real>(z: &[T], out: &mut [T]) {
    for (o, &v) in out.iter_mut().zip(z) {
        *o = shrink_scalar(v);
    }
}

pub fn shrink<T: Real>(z: &[T]) -> Vec<T> {
    z.iter().map(|&v| shrink_scalar(v)).collect()
}

/// Replayable basis-pursuit data: a Gaussian dictionary split into per-agent
/// column blocks, a sparse Gaussian signal, and the consistent measurement
/// `b = A y_true`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisPursuitInstance<T> {
    pub seed: u64,
    pub gamma: T,
    /// Per-agent column blocks, each `p x (q / n)`.
    pub blocks: Vec<DenseMatrix<T>>,
    pub measurement: Vec<T>,
    pub y_true: Vec<T>,
}

/// Gaussian basis-pursuit instance. `n` must divide `q` (equal column
/// blocks) and the sparsity cannot exceed the measurement count.
pub fn generate_bp_instance<T: Real>(
    p: usize,
    q: usize,
    n: usize,
    sparsity: usize,
    gamma: T,
    seed: u64,
) -> Result<BasisPursuitInstance<T>, ProblemError> {
    if n == 0 || q == 0 || p == 0 {
        return Err(ProblemError::InvalidParameter("dimensions must be positive".into()));
    }
    if q % n != 0 {
        return Err(ProblemError::InvalidParameter(format!(
            "agent count {n} must divide the signal dimension {q}"
        )));
    }
    if sparsity > p || sparsity > q {
        return Err(ProblemError::InvalidParameter(format!(
            "sparsity {sparsity} exceeds the recoverable range (p = {p}, q = {q})"
        )));
    }
    if gamma <= T::zero() {
        return Err(ProblemError::InvalidParameter("gamma must be positive".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let support = rand::seq::index::sample(&mut rng, q, sparsity);
    let mut y_true = vec![T::zero(); q];
    for pos in support.iter() {
        y_true[pos] = T::standard_normal(&mut rng);
    }
    let full = gaussian_matrix::<T>(&mut rng, p, q);
    let measurement = full.matvec(&y_true);

    let q_i = q / n;
    let blocks = (0..n)
        .map(|i| DenseMatrix::from_fn(p, q_i, |r, c| full[(r, i * q_i + c)]))
        .collect();
    Ok(BasisPursuitInstance { seed, gamma, blocks, measurement, y_true })
}

impl<T: Real> BasisPursuitInstance<T> {
    pub fn agents(&self) -> usize {
        self.blocks.len()
    }

    /// Measurement dimension `p`.
    pub fn measurement_dim(&self) -> usize {
        self.measurement.len()
    }

    /// Signal dimension `q`.
    pub fn signal_dim(&self) -> usize {
        self.y_true.len()
    }

    pub fn block_cols(&self) -> usize {
        self.signal_dim() / self.agents()
    }

    /// Reassembles the full `p x q` dictionary from the column blocks.
    pub fn assemble(&self) -> DenseMatrix<T> {
        let p = self.measurement_dim();
        let q_i = self.block_cols();
        DenseMatrix::from_fn(p, self.signal_dim(), |r, c| self.blocks[c / q_i][(r, c % q_i)])
    }

    /// Same instance with a different regularization weight.
    pub fn with_gamma(mut self, gamma: T) -> Result<Self, ProblemError> {
        if gamma <= T::zero() {
            return Err(ProblemError::InvalidParameter("gamma must be positive".into()));
        }
        self.gamma = gamma;
        Ok(self)
    }

    /// Default regularization for recovery experiments: `10 ||y_true||_inf`.
    /// Large enough, at desk scale, that the regularized problem returns the
    /// plain sparsest solution; callers should still confirm with
    /// [`crate::oracle::verify_gamma`].
    pub fn suggested_gamma(&self) -> T {
        T::of(10.0) * linalg::norm_inf(&self.y_true)
    }
}

/// Lagrange dual of the regularized basis-pursuit problem, split per agent:
/// `f_i(x) = (gamma / 2) ||Shrink(A_i^T x)||^2 - b^T x / n` over the
/// `p`-dimensional dual variable.
#[derive(Debug, Clone)]
pub struct BasisPursuitDual<T> {
    instance: BasisPursuitInstance<T>,
    lipschitz: Vec<T>,
    block_norms: Vec<T>,
    nu: Option<T>,
}

/// Builds the dual consensus problem from a basis-pursuit instance.
/// Per-agent Lipschitz constants are `gamma ||A_i||^2`.
pub fn basis_pursuit_dual<T: Real>(
    instance: BasisPursuitInstance<T>,
) -> Result<BasisPursuitDual<T>, ProblemError> {
    if instance.gamma <= T::zero() {
        return Err(ProblemError::InvalidParameter("gamma must be positive".into()));
    }
    let tol = Tolerances::default();
    let block_norms: Vec<T> = instance
        .blocks
        .iter()
        .map(|a| a.spectral_norm(&tol))
        .collect::<Result<_, _>>()?;
    let lipschitz = block_norms.iter().map(|&s| instance.gamma * s * s).collect();
    Ok(BasisPursuitDual { instance, lipschitz, block_norms, nu: None })
}

impl<T: Real> BasisPursuitDual<T> {
    pub fn instance(&self) -> &BasisPursuitInstance<T> {
        &self.instance
    }

    pub fn gamma(&self) -> T {
        self.instance.gamma
    }

    /// Spectral norm of agent `i`'s column block.
    pub fn block_norm(&self, agent: usize) -> T {
        self.block_norms[agent]
    }

    /// Injects an externally determined restricted-strong-convexity modulus.
    /// Without it the linear-rate constants stay unavailable and convergence
    /// is assessed empirically.
    pub fn with_restricted_strong_convexity(mut self, nu: T) -> Self {
        self.nu = Some(nu);
        self
    }

    /// Primal candidate read off the dual states: agent `i` contributes
    /// `y_i = gamma Shrink(A_i^T x_(i))`, stacked in agent order.
    pub fn primal_iterate(&self, states: &AgentStates<T>) -> Vec<T> {
        let q_i = self.instance.block_cols();
        let mut y = Vec::with_capacity(self.instance.signal_dim());
        for (i, block) in self.instance.blocks.iter().enumerate() {
            let z = block.matvec_transpose(states.agent(i));
            for idx in 0..q_i {
                y.push(self.gamma() * shrink_scalar(z[idx]));
            }
        }
        y
    }
}

impl<T: Real> ConsensusProblem<T> for BasisPursuitDual<T> {
    fn agents(&self) -> usize {
        self.instance.agents()
    }

    fn dim(&self) -> usize {
        self.instance.measurement_dim()
    }

    fn local_value(&self, agent: usize, x: &[T]) -> T {
        let z = self.instance.blocks[agent].matvec_transpose(x);
        let s = shrink(&z);
        let quad = linalg::dot(&s, &s) * self.gamma() / T::of(2.0);
        let linear = linalg::dot(&self.instance.measurement, x) / T::of(self.agents() as f64);
        quad - linear
    }

    fn local_gradient_into(&self, agent: usize, x: &[T], grad: &mut [T]) {
        let block = &self.instance.blocks[agent];
        let mut z = block.matvec_transpose(x);
        for v in z.iter_mut() {
            *v = shrink_scalar(*v);
        }
        block.matvec_into(&z, grad);
        let n = T::of(self.agents() as f64);
        let gamma = self.gamma();
        for (g, &b) in grad.iter_mut().zip(&self.instance.measurement) {
            *g = gamma * *g - b / n;
        }
    }

    fn local_lipschitz(&self, agent: usize) -> T {
        self.lipschitz[agent]
    }

    fn local_minimum_value(&self, _agent: usize) -> Option<T> {
        // Individual duals are unbounded below in general; only the sum has
        // a finite minimum.
        None
    }

    fn strong_convexity(&self) -> Option<T> {
        None
    }

    fn restricted_strong_convexity(&self) -> Option<T> {
        self.nu
    }
}

fn gaussian_vec<T: Real>(rng: &mut ChaCha8Rng, len: usize) -> Vec<T> {
    (0..len).map(|_| T::standard_normal(rng)).collect()
}

fn gaussian_matrix<T: Real>(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix<T> {
    let mut m = DenseMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = T::standard_normal(rng);
        }
    }
    m
}
