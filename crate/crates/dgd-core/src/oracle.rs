//! Centralized ground-truth solvers: plain gradient descent, a dense
//! normal-equations solve for least squares, and a dual gradient-descent
//! solver for the regularized basis-pursuit problem.
//!
//! These run where all the data is visible at once, so decentralized runs
//! can be measured against real optima. Solutions are cacheable as JSON
//! keyed by a hash of the generating instance.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::Tolerances;
use crate::linalg::{self, Cholesky, DenseMatrix, LinalgError};
use crate::problems::{shrink_scalar, BasisPursuitInstance, LeastSquaresInstance};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("no convergence within {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("cache i/o: {0}")]
    Cache(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GdOutcome<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    pub gradient_norm: T,
    pub converged: bool,
}

/// Fixed-stepsize gradient descent `x <- x - alpha grad(x)` until the
/// gradient norm drops to `tol` or the iteration budget runs out. `hook`
/// sees every iterate, the start included.
pub fn centralized_gd_hooked<T: Real>(
    mut gradient: impl FnMut(&[T], &mut [T]),
    alpha: T,
    x0: &[T],
    max_iter: usize,
    tol: T,
    mut hook: impl FnMut(&[T]),
) -> GdOutcome<T> {
    let mut x = x0.to_vec();
    let mut g = vec![T::zero(); x.len()];
    hook(&x);
    gradient(&x, &mut g);
    let mut g_norm = linalg::norm(&g);
    let mut iterations = 0;
    while g_norm > tol && iterations < max_iter {
        for (xi, &gi) in x.iter_mut().zip(&g) {
            *xi -= alpha * gi;
        }
        iterations += 1;
        hook(&x);
        gradient(&x, &mut g);
        g_norm = linalg::norm(&g);
    }
    GdOutcome { x, iterations, gradient_norm: g_norm, converged: g_norm <= tol }
}

pub fn centralized_gd<T: Real>(
    gradient: impl FnMut(&[T], &mut [T]),
    alpha: T,
    x0: &[T],
    max_iter: usize,
    tol: T,
) -> GdOutcome<T> {
    centralized_gd_hooked(gradient, alpha, x0, max_iter, tol, |_| {})
}

/// Solves the stacked least-squares problem through its normal equations
/// `(sum A_i^T A_i) x = sum A_i^T b_i` with a Cholesky factorization.
/// Rejects systems whose Gram condition estimate exceeds the configured
/// limit.
pub fn least_squares_solve<T: Real>(
    inst: &LeastSquaresInstance<T>,
) -> Result<Vec<T>, OracleError> {
    let tol = Tolerances::default();
    let p = inst.dim();
    let mut gram = DenseMatrix::zeros(p, p);
    let mut rhs = vec![T::zero(); p];
    for (a, b) in inst.matrices.iter().zip(&inst.measurements) {
        gram = gram.add(&a.gram());
        let atb = a.matvec_transpose(b);
        linalg::axpy(&mut rhs, T::one(), &atb);
    }
    let eigs = linalg::symmetric_eigenvalues(&gram, &tol)?;
    let (top, bottom) = (eigs[0], *eigs.last().expect("nonempty spectrum"));
    if bottom <= T::zero() || top / bottom > T::of(tol.condition_limit) {
        let condition = if bottom > T::zero() {
            (top / bottom).as_f64()
        } else {
            f64::INFINITY
        };
        return Err(OracleError::Linalg(LinalgError::RankDeficient { condition }));
    }
    Ok(Cholesky::factor(&gram)?.solve(&rhs))
}

/// Centralized solution of the regularized basis-pursuit problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BpSolution<T> {
    /// Dual optimum (gradient descent limit on the dual objective).
    pub x_star: Vec<T>,
    /// Primal optimum `y* = gamma Shrink(A^T x*)`.
    pub y_star: Vec<T>,
    pub iterations: usize,
    /// `||A y* - b|| / ||b||` at exit.
    pub relative_residual: f64,
}

pub const BP_DEFAULT_BUDGET: usize = 1_000_000;

/// Solves the regularized basis-pursuit problem by gradient descent on its
/// dual, whose gradient at `x` is exactly the primal residual
/// `A (gamma Shrink(A^T x)) - b`. Stops when that residual falls to
/// `tol * ||b||`. Stepsize is the safe `1 / (gamma ||A||^2)`.
pub fn bp_centralized_solve<T: Real>(
    inst: &BasisPursuitInstance<T>,
    tol: T,
) -> Result<BpSolution<T>, OracleError> {
    bp_centralized_solve_with(inst, tol, BP_DEFAULT_BUDGET)
}

pub fn bp_centralized_solve_with<T: Real>(
    inst: &BasisPursuitInstance<T>,
    tol: T,
    max_iter: usize,
) -> Result<BpSolution<T>, OracleError> {
    let tols = Tolerances::default();
    let a = inst.assemble();
    let b = &inst.measurement;
    let gamma = inst.gamma;
    let norm_a = a.spectral_norm(&tols)?;
    let lipschitz = gamma * norm_a * norm_a;
    let alpha = if lipschitz > T::zero() { lipschitz.recip() } else { T::one() };
    let b_norm = linalg::norm(b);
    let stop = tol * b_norm;

    let gradient = |x: &[T], g: &mut [T]| {
        let mut z = a.matvec_transpose(x);
        for v in z.iter_mut() {
            *v = gamma * shrink_scalar(*v);
        }
        a.matvec_into(&z, g);
        for (gi, &bi) in g.iter_mut().zip(b) {
            *gi -= bi;
        }
    };

    let x0 = vec![T::zero(); inst.measurement_dim()];
    let outcome = centralized_gd(gradient, alpha, &x0, max_iter, stop);
    let residual = outcome.gradient_norm;
    let relative = if b_norm > T::zero() {
        (residual / b_norm).as_f64()
    } else {
        residual.as_f64()
    };
    if !outcome.converged {
        return Err(OracleError::NoConvergence {
            iterations: outcome.iterations,
            residual: relative,
        });
    }
    let mut y_star = a.matvec_transpose(&outcome.x);
    for v in y_star.iter_mut() {
        *v = gamma * shrink_scalar(*v);
    }
    Ok(BpSolution {
        x_star: outcome.x,
        y_star,
        iterations: outcome.iterations,
        relative_residual: relative,
    })
}

/// Operational check that the regularization weight was large enough: the
/// regularized solution must stay feasible and must not exceed the planted
/// signal's l1 norm by more than `tol` (relatively).
pub fn verify_gamma<T: Real>(inst: &BasisPursuitInstance<T>, y_star: &[T], tol: T) -> bool {
    let a = inst.assemble();
    let residual = linalg::dist(&a.matvec(y_star), &inst.measurement);
    let b_norm = linalg::norm(&inst.measurement);
    let feasible = if b_norm > T::zero() {
        residual <= tol * b_norm
    } else {
        residual <= tol
    };
    let l1_star = linalg::norm_l1(y_star);
    let l1_true = linalg::norm_l1(&inst.y_true);
    feasible && l1_star <= l1_true * (T::one() + tol)
}

// ---------------------------------------------------------------------------
// Solution cache
// ---------------------------------------------------------------------------

/// Stable content hash of a serializable instance, used as the cache key.
pub fn instance_key<I: Serialize>(instance: &I) -> String {
    let bytes = serde_json::to_vec(instance).expect("instances are serializable");
    let digest = Sha256::digest(&bytes);
    let mut key = String::with_capacity(16);
    for byte in digest.iter().take(8) {
        key.push_str(&format!("{byte:02x}"));
    }
    key
}

/// Cached oracle output for one instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CachedSolution<T> {
    pub key: String,
    pub x_star: Vec<T>,
    /// Primal solution, present for basis pursuit.
    pub y_star: Option<Vec<T>>,
    pub iterations: Option<usize>,
}

pub fn cache_path(dir: &Path, key: &str) -> PathBuf {
    dir.join(format!("{key}.json"))
}

pub fn load_cached<T: DeserializeOwned>(dir: &Path, key: &str) -> Option<CachedSolution<T>> {
    let text = fs::read_to_string(cache_path(dir, key)).ok()?;
    let cached: CachedSolution<T> = serde_json::from_str(&text).ok()?;
    (cached.key == key).then_some(cached)
}

pub fn store_cached<T: Serialize>(
    dir: &Path,
    solution: &CachedSolution<T>,
) -> Result<PathBuf, OracleError> {
    fs::create_dir_all(dir)?;
    let path = cache_path(dir, &solution.key);
    let text = serde_json::to_string_pretty(solution).expect("solutions are serializable");
    fs::write(&path, text)?;
    Ok(path)
}
