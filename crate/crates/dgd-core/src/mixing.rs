//! Symmetric doubly stochastic mixing matrices on a communication graph,
//! with their spectrum cached at construction.
//!
//! Every bound in the toolkit runs through two spectral quantities of the
//! mixing matrix `W`: the second largest eigenvalue magnitude `beta` (how
//! fast averaging forgets disagreement) and the smallest eigenvalue
//! `lambda_n` (how hard the stepsize ceiling bites).

use std::fmt;
use std::fmt::Write as _;

use thiserror::Error;

use crate::config::Tolerances;
use crate::linalg::{DenseMatrix, LinalgError};
use crate::netgen::Graph;
use crate::scalar::Real;

pub use crate::linalg::symmetric_eigenvalues;

#[derive(Debug, Error)]
pub enum MixingError {
    #[error("tau must lie strictly inside (0, 1/3), got {0}")]
    TauOutOfRange(f64),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Mixing matrix with cached eigenvalues (sorted nonincreasing) and, when
/// known, the sparsity pattern it must respect.
#[derive(Debug, Clone)]
pub struct MixingMatrix<T> {
    w: DenseMatrix<T>,
    eigenvalues: Vec<T>,
    pattern: Option<Graph>,
}

impl<T: Real> MixingMatrix<T> {
    /// Metropolis weights on a connected graph:
    /// `w_ij = 1 / (1 + max(deg_i, deg_j))` on edges, diagonal fills the rest.
    /// Guarantees `beta < 1` on connected graphs.
    pub fn metropolis(g: &Graph) -> Self {
        let n = g.agents();
        let deg = g.degrees();
        let mut w = DenseMatrix::zeros(n, n);
        for (a, b) in g.edges() {
            let weight = T::one() / T::of((1 + deg[a].max(deg[b])) as f64);
            w[(a, b)] = weight;
            w[(b, a)] = weight;
        }
        for i in 0..n {
            let off: T = (0..n).filter(|&j| j != i).map(|j| w[(i, j)]).sum();
            w[(i, i)] = T::one() - off;
        }
        Self::from_symmetric(w, Some(g.clone()))
    }

    /// Three-agent matrix blending the swap of agents 1 and 2 with uniform
    /// averaging: `W = (1 - 3 tau) P_swap + tau * ones`. Its smallest
    /// eigenvalue is `3 tau - 1`, sitting arbitrarily close to -1 as
    /// `tau -> 0`, which makes it the canonical worst case for stepsize
    /// ceilings.
    pub fn swap_example(tau: T) -> Result<Self, MixingError> {
        let third = T::one() / T::of(3.0);
        if !(tau > T::zero() && tau < third) {
            return Err(MixingError::TauOutOfRange(tau.as_f64()));
        }
        let d = T::one() - T::of(2.0) * tau;
        let w = DenseMatrix::from_rows(vec![
            vec![d, tau, tau],
            vec![tau, tau, d],
            vec![tau, d, tau],
        ])
        .expect("fixed 3x3 shape");
        Ok(Self::from_symmetric(w, Some(Graph::complete(3))))
    }

    /// Lazy variant `(W + I) / 2`. Maps each eigenvalue to `(lambda + 1) / 2`,
    /// so the output spectrum is positive whenever the input stays above -1.
    pub fn lazy_transform(&self) -> Self {
        let n = self.n();
        let half = T::of(0.5);
        let mut w = self.w.scale(half);
        for i in 0..n {
            w[(i, i)] += half;
        }
        Self::from_symmetric(w, self.pattern.clone())
    }

    /// Wraps an arbitrary square matrix. The cached spectrum comes from the
    /// symmetric part; defects (asymmetry, bad sums, pattern violations) are
    /// reported by [`MixingMatrix::validate`], not rejected here.
    pub fn from_matrix(w: DenseMatrix<T>, pattern: Option<Graph>) -> Result<Self, MixingError> {
        if w.rows() != w.cols() {
            return Err(MixingError::Linalg(LinalgError::DimensionMismatch(format!(
                "mixing matrix must be square, got {}x{}",
                w.rows(),
                w.cols()
            ))));
        }
        let symmetric_part = w.add(&w.transpose()).scale(T::of(0.5));
        let eigenvalues = symmetric_eigenvalues(&symmetric_part, &Tolerances::default())?;
        Ok(Self { w, eigenvalues, pattern })
    }

    fn from_symmetric(w: DenseMatrix<T>, pattern: Option<Graph>) -> Self {
        let eigenvalues = symmetric_eigenvalues(&w, &Tolerances::default())
            .expect("constructed matrices are symmetric");
        Self { w, eigenvalues, pattern }
    }

    pub fn n(&self) -> usize {
        self.w.rows()
    }

    pub fn weights(&self) -> &DenseMatrix<T> {
        &self.w
    }

    pub fn pattern(&self) -> Option<&Graph> {
        self.pattern.as_ref()
    }

    /// Eigenvalues sorted nonincreasing.
    pub fn eigenvalues(&self) -> &[T] {
        &self.eigenvalues
    }

    pub fn lambda_2(&self) -> Option<T> {
        self.eigenvalues.get(1).copied()
    }

    pub fn lambda_n(&self) -> T {
        *self.eigenvalues.last().expect("nonempty spectrum")
    }

    /// Second largest eigenvalue magnitude. Zero for a single agent.
    pub fn beta(&self) -> T {
        match self.lambda_2() {
            Some(l2) => l2.abs().max(self.lambda_n().abs()),
            None => T::zero(),
        }
    }

    /// Applies `W (x) I_p` to a stacked agent-major vector.
    pub fn mix_stacked(&self, p: usize, x: &[T], out: &mut [T]) {
        let n = self.n();
        assert_eq!(x.len(), n * p, "stacked input size");
        assert_eq!(out.len(), n * p, "stacked output size");
        for v in out.iter_mut() {
            *v = T::zero();
        }
        for i in 0..n {
            for j in 0..n {
                let wij = self.w[(i, j)];
                if wij == T::zero() {
                    continue;
                }
                for d in 0..p {
                    out[i * p + d] += wij * x[j * p + d];
                }
            }
        }
    }

    /// Quadratic form `sum_ij w_ij x_i^T x_j` over agent blocks of size `p`.
    pub fn stacked_quadratic_form(&self, p: usize, x: &[T]) -> T {
        let mut mixed = vec![T::zero(); x.len()];
        self.mix_stacked(p, x, &mut mixed);
        crate::linalg::dot(x, &mixed)
    }

    /// Checks every structural invariant within `tol` and reports all
    /// violations. An empty report means the matrix is a valid mixing matrix.
    pub fn validate(&self, tol: T) -> Vec<Violation> {
        let n = self.n();
        let mut report = Vec::new();

        let asym = self.w.max_asymmetry();
        if asym > tol {
            report.push(Violation::Asymmetry { max_deviation: asym.as_f64() });
        }
        for i in 0..n {
            let row: T = (0..n).map(|j| self.w[(i, j)]).sum();
            if (row - T::one()).abs() > tol {
                report.push(Violation::RowSum { index: i, sum: row.as_f64() });
            }
            let col: T = (0..n).map(|j| self.w[(j, i)]).sum();
            if (col - T::one()).abs() > tol {
                report.push(Violation::ColumnSum { index: i, sum: col.as_f64() });
            }
        }
        for i in 0..n {
            for j in 0..n {
                if self.w[(i, j)] < -tol {
                    report.push(Violation::NegativeEntry {
                        row: i,
                        col: j,
                        value: self.w[(i, j)].as_f64(),
                    });
                }
            }
        }
        if let Some(g) = &self.pattern {
            for i in 0..n {
                for j in 0..n {
                    if i != j && self.w[(i, j)].abs() > tol && !g.has_edge(i, j) {
                        report.push(Violation::OffPattern { row: i, col: j });
                    }
                }
            }
        }

        let eigen_tol = T::of(Tolerances::default().eigen);
        let lambda_1 = self.eigenvalues[0];
        if (lambda_1 - T::one()).abs() > eigen_tol.max(tol) {
            report.push(Violation::LeadingEigenvalue { lambda_1: lambda_1.as_f64() });
        }
        if self.lambda_n() < -T::one() - eigen_tol.max(tol) {
            report.push(Violation::EigenvalueBelowMinusOne { lambda_n: self.lambda_n().as_f64() });
        }
        report
    }

    /// CSV dump: `n` rows of `n` comma-separated entries at full precision
    /// (17 significant digits).
    pub fn to_csv(&self) -> String {
        let n = self.n();
        let mut out = String::new();
        for i in 0..n {
            for j in 0..n {
                if j > 0 {
                    out.push(',');
                }
                write!(out, "{:.16e}", self.w[(i, j)].as_f64()).expect("string write");
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Asymmetry { max_deviation: f64 },
    RowSum { index: usize, sum: f64 },
    ColumnSum { index: usize, sum: f64 },
    NegativeEntry { row: usize, col: usize, value: f64 },
    OffPattern { row: usize, col: usize },
    LeadingEigenvalue { lambda_1: f64 },
    EigenvalueBelowMinusOne { lambda_n: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Asymmetry { max_deviation } => {
                write!(f, "asymmetry: max |w_ij - w_ji| = {max_deviation:e}")
            }
            Violation::RowSum { index, sum } => write!(f, "row {index} sums to {sum}"),
            Violation::ColumnSum { index, sum } => write!(f, "column {index} sums to {sum}"),
            Violation::NegativeEntry { row, col, value } => {
                write!(f, "negative entry {value} at ({row}, {col})")
            }
            Violation::OffPattern { row, col } => {
                write!(f, "nonzero weight at non-edge ({row}, {col})")
            }
            Violation::LeadingEigenvalue { lambda_1 } => {
                write!(f, "leading eigenvalue {lambda_1} differs from 1")
            }
            Violation::EigenvalueBelowMinusOne { lambda_n } => {
                write!(f, "smallest eigenvalue {lambda_n} below -1")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgen::generate_random_graph;

    #[test]
    fn metropolis_on_triangle_is_uniform() {
        let w = MixingMatrix::<f64>::metropolis(&Graph::complete(3));
        for i in 0..3 {
            for j in 0..3 {
                assert!((w.weights()[(i, j)] - 1.0 / 3.0).abs() < 1e-15);
            }
        }
        let eigs = w.eigenvalues();
        assert!((eigs[0] - 1.0).abs() < 1e-12);
        assert!(eigs[1].abs() < 1e-12 && eigs[2].abs() < 1e-12);
        assert!(w.beta() < 1e-12);
    }

    #[test]
    fn metropolis_on_path_matches_hand_weights() {
        let w = MixingMatrix::<f64>::metropolis(&Graph::path(3));
        let expect = [
            [2.0 / 3.0, 1.0 / 3.0, 0.0],
            [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
            [0.0, 1.0 / 3.0, 2.0 / 3.0],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert!((w.weights()[(i, j)] - expect[i][j]).abs() < 1e-15);
            }
        }
        assert!(w.validate(1e-12).is_empty());
    }

    #[test]
    fn metropolis_on_single_edge_is_uniform_pair() {
        let w = MixingMatrix::<f64>::metropolis(&Graph::complete(2));
        for i in 0..2 {
            for j in 0..2 {
                assert!((w.weights()[(i, j)] - 0.5).abs() < 1e-15);
            }
        }
        assert!(w.beta() < 1e-12);
    }

    #[test]
    fn swap_example_matches_closed_form_spectrum() {
        let w = MixingMatrix::<f64>::swap_example(0.2).unwrap();
        let rows = [[0.6, 0.2, 0.2], [0.2, 0.2, 0.6], [0.2, 0.6, 0.2]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((w.weights()[(i, j)] - rows[i][j]).abs() < 1e-15);
            }
        }
        let eigs = w.eigenvalues();
        assert!((eigs[0] - 1.0).abs() < 1e-12);
        assert!((eigs[1] - 0.4).abs() < 1e-12);
        assert!((eigs[2] + 0.4).abs() < 1e-12);
        assert!((w.beta() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn swap_example_near_one_third_has_vanishing_bottom_eigenvalue() {
        let w = MixingMatrix::<f64>::swap_example(1.0 / 3.0 - 1e-9).unwrap();
        assert!(w.lambda_n().abs() < 1e-8);
    }

    #[test]
    fn swap_example_rejects_tau_outside_open_interval() {
        assert!(MixingMatrix::<f64>::swap_example(0.0).is_err());
        assert!(MixingMatrix::<f64>::swap_example(1.0 / 3.0).is_err());
        assert!(MixingMatrix::<f64>::swap_example(0.5).is_err());
    }

    #[test]
    fn lazy_transform_maps_eigenvalues() {
        let w = MixingMatrix::<f64>::swap_example(0.2).unwrap();
        let lazy = w.lazy_transform();
        assert!((lazy.lambda_n() - 0.3).abs() < 1e-12);

        let identity =
            MixingMatrix::from_matrix(DenseMatrix::<f64>::identity(3), None).unwrap();
        let lazy_identity = identity.lazy_transform();
        assert!(lazy_identity.weights().sub(&DenseMatrix::identity(3)).max_abs() < 1e-15);

        let k3 = MixingMatrix::<f64>::metropolis(&Graph::complete(3));
        let lazy_k3 = k3.lazy_transform();
        let eigs = lazy_k3.eigenvalues();
        assert!((eigs[0] - 1.0).abs() < 1e-12);
        assert!((eigs[1] - 0.5).abs() < 1e-12);
        assert!((eigs[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn validate_flags_bad_row_sums() {
        let w = MixingMatrix::from_matrix(
            DenseMatrix::from_rows(vec![vec![0.9, 0.2], vec![0.2, 0.9]]).unwrap(),
            None,
        )
        .unwrap();
        let report = w.validate(1e-12);
        assert!(report.iter().any(|v| matches!(v, Violation::RowSum { .. })));
    }

    #[test]
    fn validate_flags_asymmetry() {
        let w = MixingMatrix::from_matrix(
            DenseMatrix::from_rows(vec![vec![0.5, 0.5], vec![0.5 + 1e-6, 0.5 - 1e-6]]).unwrap(),
            None,
        )
        .unwrap();
        let report = w.validate(1e-12);
        assert!(report.iter().any(|v| matches!(v, Violation::Asymmetry { .. })));
    }

    #[test]
    fn validate_accepts_metropolis_on_random_graph() {
        let g = generate_random_graph(25, 0.3, 17).unwrap();
        let w = MixingMatrix::<f64>::metropolis(&g);
        assert!(w.validate(1e-12).is_empty());
        assert!(w.beta() < 1.0);
    }

    #[test]
    fn csv_dump_round_trips_entries() {
        let w = MixingMatrix::<f64>::swap_example(0.2).unwrap();
        let csv = w.to_csv();
        for (i, line) in csv.lines().enumerate() {
            for (j, field) in line.split(',').enumerate() {
                let v: f64 = field.parse().unwrap();
                assert_eq!(v, w.weights()[(i, j)]);
            }
        }
    }
}
