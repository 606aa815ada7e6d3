//! Numeric knobs used across the crate, centralized in one record.

/// Tolerances and guards shared by the spectral routines, the engine, and
/// every inequality audit. Stored as `f64` and converted at the use site.
#[derive(Debug, Clone)]
pub struct Tolerances {
    /// Off-diagonal Frobenius tolerance (relative to the matrix norm) at
    /// which the Jacobi eigensolver stops.
    pub jacobi_offdiag: f64,
    /// Sweep limit for the Jacobi eigensolver.
    pub jacobi_max_sweeps: usize,
    /// Row/column sum tolerance for doubly stochastic checks.
    pub stochastic: f64,
    /// Symmetry tolerance (relative to the largest entry).
    pub symmetry: f64,
    /// Accuracy expected of computed eigenvalues, relative to the matrix norm.
    pub eigen: f64,
    /// Additive slack applied to every theoretical inequality audit.
    pub ineq_slack: f64,
    /// Relative slack for the Lyapunov monotonicity audit.
    pub lyapunov_rel_slack: f64,
    /// Central finite-difference step.
    pub fd_step: f64,
    /// Margin around the shrink kink inside which finite-difference test
    /// points are resampled.
    pub kink_margin: f64,
    /// Iterate magnitude beyond which a run is declared divergent.
    pub overflow_guard: f64,
    /// Convexity split for restricted-strong-convexity rate constants.
    pub theta: f64,
    /// Condition-number limit beyond which a Gram system counts as
    /// rank deficient.
    pub condition_limit: f64,
    /// Connectivity resampling budget for random graph generation.
    pub max_connectivity_retries: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            jacobi_offdiag: 1e-13,
            jacobi_max_sweeps: 100,
            stochastic: 1e-12,
            symmetry: 1e-12,
            eigen: 1e-10,
            ineq_slack: 1e-10,
            lyapunov_rel_slack: 1e-12,
            fd_step: 1e-6,
            kink_margin: 1e-4,
            overflow_guard: 1e12,
            theta: 0.5,
            condition_limit: 1e12,
            max_connectivity_retries: 1000,
        }
    }
}
