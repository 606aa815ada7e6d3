//! Independent numeric oracles for the integration tests. These deliberately
//! avoid the library's own differentiation and eigenvalue paths so they can
//! check them.

// Each test target compiles this module separately and uses a subset.
#![allow(dead_code)]

use dgd_core::linalg::{self, DenseMatrix};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Central finite-difference gradient of `f` at `x`.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for j in 0..x.len() {
        probe[j] = x[j] + h;
        let up = f(&probe);
        probe[j] = x[j] - h;
        let down = f(&probe);
        probe[j] = x[j];
        g[j] = (up - down) / (2.0 * h);
    }
    g
}

pub fn relative_error(got: &[f64], want: &[f64]) -> f64 {
    let denom = linalg::norm(want).max(1.0);
    linalg::dist(got, want) / denom
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix by plain
/// power iteration with a deterministic random start.
pub fn power_iteration_top_eigenvalue(m: &DenseMatrix<f64>, iters: usize, seed: u64) -> f64 {
    let n = m.rows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let norm = linalg::norm(&v);
    for vi in v.iter_mut() {
        *vi /= norm;
    }
    let mut rayleigh = 0.0;
    for _ in 0..iters {
        let mv = m.matvec(&v);
        let norm = linalg::norm(&mv);
        if norm == 0.0 {
            return 0.0;
        }
        v = mv.iter().map(|x| x / norm).collect();
        rayleigh = linalg::dot(&v, &m.matvec(&v));
    }
    rayleigh
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}
