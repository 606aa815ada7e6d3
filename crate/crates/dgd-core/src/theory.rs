//! Closed-form constants and bounds that predict how a run behaves: the
//! stepsize ceiling, the uniform gradient bound, the deviation-from-mean
//! floor, and the linear-rate constants for (restricted) strongly convex
//! objectives.
//!
//! Everything here is a pure formula over the problem's convexity data and
//! the mixing matrix spectrum; the diagnostics module checks measured runs
//! against these values.

use serde::Serialize;
use thiserror::Error;

use crate::config::Tolerances;
use crate::engine::{self, AgentStates, RunOptions, RunOutcome};
use crate::linalg;
use crate::mixing::MixingMatrix;
use crate::problems::{BasisPursuitDual, ConsensusProblem};
use crate::scalar::Real;

#[derive(Debug, Error, PartialEq)]
pub enum TheoryError {
    #[error("agent {agent} has no known minimum value, so the gradient bound is unavailable")]
    MissingLocalMinimum { agent: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("fixed-point search did not converge within {max_iter} rounds")]
    NoFixedPoint { max_iter: usize },
}

/// Uniform bound on the stacked gradient norm along a run started from zero:
/// `D = sqrt(2 L_h sum_i (f_i(0) - f_i^o))`. Needs every agent's minimum
/// value.
pub fn gradient_bound<T: Real, P: ConsensusProblem<T>>(prob: &P) -> Result<T, TheoryError> {
    let zero = vec![T::zero(); prob.dim()];
    let mut gap = T::zero();
    for i in 0..prob.agents() {
        let min = prob
            .local_minimum_value(i)
            .ok_or(TheoryError::MissingLocalMinimum { agent: i })?;
        gap += prob.local_value(i, &zero) - min;
    }
    Ok((T::of(2.0) * prob.max_lipschitz() * gap).sqrt())
}

/// Gradient bound for an arbitrary start: adds
/// `(L_h / alpha) (sum_i ||x_i(0)||^2 - sum_ij w_ij x_i(0)^T x_j(0))`
/// under the square root. Collapses to [`gradient_bound`] at zero or at any
/// consensus start.
pub fn generalized_gradient_bound<T: Real, P: ConsensusProblem<T>>(
    prob: &P,
    x0: &AgentStates<T>,
    w: &MixingMatrix<T>,
    alpha: T,
) -> Result<T, TheoryError> {
    if alpha <= T::zero() {
        return Err(TheoryError::InvalidParameter("stepsize must be positive".into()));
    }
    let base = gradient_bound(prob)?;
    let norms: T = (0..x0.agents())
        .map(|i| {
            let xi = x0.agent(i);
            linalg::dot(xi, xi)
        })
        .sum();
    let quad = w.stacked_quadratic_form(x0.dim(), x0.stacked());
    let extra = prob.max_lipschitz() / alpha * (norms - quad);
    Ok((base * base + extra).sqrt())
}

/// Largest safe stepsize: `(1 + lambda_n(W)) / L_h`, further capped by `c1`
/// when a convexity modulus is known.
pub fn stepsize_ceiling<T: Real, P: ConsensusProblem<T>>(prob: &P, w: &MixingMatrix<T>) -> T {
    stepsize_ceiling_with(prob, w, T::of(Tolerances::default().theta))
}

pub fn stepsize_ceiling_with<T: Real, P: ConsensusProblem<T>>(
    prob: &P,
    w: &MixingMatrix<T>,
    theta: T,
) -> T {
    let stability = (T::one() + w.lambda_n()) / prob.max_lipschitz();
    match rate_constants(prob, theta) {
        Some((c1, _)) => stability.min(c1),
        None => stability,
    }
}

/// `(c1, c2)` for a strongly convex averaged objective:
/// `c1 = 1 / (mu + L)`, `c2 = mu L / (mu + L)`.
pub fn sc_constants<T: Real>(mu_fbar: T, l_fbar: T) -> (T, T) {
    let sum = mu_fbar + l_fbar;
    (T::one() / sum, mu_fbar * l_fbar / sum)
}

/// `(c1, c2)` for a restricted strongly convex averaged objective:
/// `c1 = theta / L`, `c2 = (1 - theta) nu` for any split `theta` in [0, 1].
pub fn rsc_constants<T: Real>(nu_fbar: T, l_fbar: T, theta: T) -> Result<(T, T), TheoryError> {
    if !(theta >= T::zero() && theta <= T::one()) {
        return Err(TheoryError::InvalidParameter(format!(
            "theta must lie in [0, 1], got {theta}"
        )));
    }
    Ok((theta / l_fbar, (T::one() - theta) * nu_fbar))
}

/// `(c1, c2)` from whichever convexity modulus the problem knows, using the
/// averaged-objective moduli (global modulus divided by the agent count).
pub fn rate_constants<T: Real, P: ConsensusProblem<T>>(prob: &P, theta: T) -> Option<(T, T)> {
    let n = T::of(prob.agents() as f64);
    let l_fbar = prob.mean_lipschitz();
    if let Some(mu) = prob.strong_convexity() {
        return Some(sc_constants(mu / n, l_fbar));
    }
    if let Some(nu) = prob.restricted_strong_convexity() {
        return rsc_constants(nu / n, l_fbar, theta).ok();
    }
    None
}

/// Contraction factor and noise floor of the mean-error recursion
/// `||e(k+1)||^2 <= c3^2 ||e(k)||^2 + c4^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearRate<T> {
    pub delta: T,
    pub c3: T,
    pub c4: T,
    /// Limiting radius `c4 / sqrt(1 - c3^2)`.
    pub neighborhood: T,
}

/// Computes `c3^2 = 1 - alpha c2 + alpha delta - alpha^2 delta c2` and
/// `c4^2 = alpha^3 (alpha + 1/delta) L_h^2 D^2 / (1 - beta)^2`. With the
/// default split `delta = c2 / (2 (1 - alpha c2))` this gives
/// `c3 = sqrt(1 - alpha c2 / 2)` and a neighborhood of
/// `(alpha L_h D / (1 - beta)) sqrt(4 / c2^2 - 2 alpha / c2)`.
pub fn linear_rate_constants<T: Real>(
    alpha: T,
    c2: T,
    d: T,
    l_h: T,
    beta: T,
    delta: Option<T>,
) -> Result<LinearRate<T>, TheoryError> {
    if c2 <= T::zero() {
        return Err(TheoryError::InvalidParameter("c2 must be positive".into()));
    }
    if alpha <= T::zero() || alpha * c2 >= T::one() {
        return Err(TheoryError::InvalidParameter(format!(
            "need 0 < alpha < 1 / c2, got alpha = {alpha}, c2 = {c2}"
        )));
    }
    if beta >= T::one() {
        return Err(TheoryError::InvalidParameter("beta must be below 1".into()));
    }
    let two = T::of(2.0);
    let delta = match delta {
        Some(v) if v > T::zero() => v,
        Some(v) => {
            return Err(TheoryError::InvalidParameter(format!("delta must be positive, got {v}")))
        }
        None => c2 / (two * (T::one() - alpha * c2)),
    };
    let c3_sq = T::one() - alpha * c2 + alpha * delta - alpha * alpha * delta * c2;
    if !(c3_sq > T::zero() && c3_sq < T::one()) {
        return Err(TheoryError::InvalidParameter(format!(
            "contraction factor fell outside (0, 1): c3^2 = {c3_sq}"
        )));
    }
    let c4_sq =
        alpha.powi(3) * (alpha + delta.recip()) * l_h * l_h * d * d / ((T::one() - beta).powi(2));
    let c3 = c3_sq.sqrt();
    let c4 = c4_sq.sqrt();
    let neighborhood = c4 / (T::one() - c3_sq).sqrt();
    Ok(LinearRate { delta, c3, c4, neighborhood })
}

/// Uniform deviation-from-mean bound `alpha D / (1 - beta)`.
pub fn deviation_bound<T: Real>(alpha: T, d: T, beta: T) -> T {
    alpha * d / (T::one() - beta)
}

/// Distance constant for the objective-error recursion:
/// `C = (1/sqrt(n)) (||[x0 - x~]|| + ||[x~ - x*]||)`, where `x~` stacks a
/// minimizer of the round potential and `x*` is an optimum of the averaged
/// problem.
pub fn objective_error_constant<T: Real>(
    x0: &AgentStates<T>,
    xi_min: &AgentStates<T>,
    x_star: &[T],
) -> T {
    assert_eq!(x0.agents(), xi_min.agents(), "agent counts must match");
    assert_eq!(x0.dim(), x_star.len(), "dimension must match");
    let to_min = linalg::dist(x0.stacked(), xi_min.stacked());
    let mut min_to_star_sq = T::zero();
    for i in 0..xi_min.agents() {
        let d = linalg::dist(xi_min.agent(i), x_star);
        min_to_star_sq += d * d;
    }
    (to_min + min_to_star_sq.sqrt()) / T::of(x0.agents() as f64).sqrt()
}

/// Locates a minimizer of the round potential by running the iteration to a
/// fixed point at tight tolerance. Valid because the round is exactly one
/// gradient-descent step on that potential.
pub fn xi_minimizer<T: Real, P: ConsensusProblem<T>>(
    prob: &P,
    w: &MixingMatrix<T>,
    alpha: T,
    x0: AgentStates<T>,
    tol: T,
    max_iter: usize,
) -> Result<AgentStates<T>, TheoryError> {
    let opts = RunOptions {
        max_iter,
        stop_tol: Some(tol),
        ..Default::default()
    };
    let trace = engine::run(prob, w, alpha, x0, &opts, |_| {});
    match trace.outcome {
        RunOutcome::Converged { .. } => Ok(trace.final_state),
        _ => Err(TheoryError::NoFixedPoint { max_iter }),
    }
}

/// Checks one step of the objective-error recursion
/// `r(k+1) <= r(k) - (alpha / 2 C^2) r(k)^2 + alpha^3 D^2 L_h^2 / (2 (1 - beta)^2)`
/// with additive slack.
#[allow(clippy::too_many_arguments)]
pub fn descent_inequality_check<T: Real>(
    rbar_k: T,
    rbar_next: T,
    alpha: T,
    c: T,
    d: T,
    l_h: T,
    beta: T,
    slack: T,
) -> bool {
    let two = T::of(2.0);
    let decrease = if c > T::zero() {
        alpha / (two * c * c) * rbar_k * rbar_k
    } else {
        T::zero()
    };
    let noise = alpha.powi(3) * d * d * l_h * l_h / (two * (T::one() - beta).powi(2));
    rbar_next <= rbar_k - decrease + noise + slack
}

/// Primal error bound for basis pursuit:
/// `||y(k) - y*|| <= n gamma max_i (||A_i|| ||x_(i) - x_ref||)` for any dual
/// optimum `x_ref`.
pub fn bp_primal_bound<T: Real>(
    dual: &BasisPursuitDual<T>,
    states: &AgentStates<T>,
    x_ref: &[T],
) -> T {
    let n = states.agents();
    let worst = (0..n)
        .map(|i| dual.block_norm(i) * linalg::dist(states.agent(i), x_ref))
        .fold(T::zero(), T::max);
    T::of(n as f64) * dual.gamma() * worst
}

/// Every closed-form constant for one `(problem, W, alpha)` triple.
/// Fields stay `None` when the data they need (per-agent minima, a convexity
/// modulus) is unavailable, rather than being guessed.
#[derive(Debug, Clone, Serialize)]
pub struct BoundSet<T> {
    pub alpha: T,
    pub l_h: T,
    pub l_fbar: T,
    pub lambda_n: T,
    pub beta: T,
    /// Stability ceiling `(1 + lambda_n) / L_h`.
    pub alpha_max: T,
    /// Uniform gradient bound from a zero start.
    pub d: Option<T>,
    /// Deviation-from-mean bound `alpha D / (1 - beta)`.
    pub dev_bound: Option<T>,
    pub c1: Option<T>,
    pub c2: Option<T>,
    pub delta: Option<T>,
    pub c3: Option<T>,
    pub c4: Option<T>,
    /// Mean-error landing radius `c4 / sqrt(1 - c3^2)`.
    pub neighborhood: Option<T>,
    /// Per-agent landing radius: neighborhood plus the deviation bound.
    pub local_neighborhood: Option<T>,
    /// Distance constant for the objective-error recursion, when computed.
    pub big_c: Option<T>,
    /// Norm of the stacked start when it is nonzero; the deviation envelope
    /// then carries a decaying `beta^k` times this term.
    pub initial_norm: Option<T>,
}

impl<T: Real> BoundSet<T> {
    pub fn compute<P: ConsensusProblem<T>>(
        prob: &P,
        w: &MixingMatrix<T>,
        alpha: T,
    ) -> Self {
        Self::compute_with(prob, w, alpha, &Tolerances::default())
    }

    /// Bounds for a run started at `x0`. A nonzero start swaps the gradient
    /// bound for its generalized form and adds the decaying start-norm term
    /// to the deviation envelope.
    pub fn compute_for_start<P: ConsensusProblem<T>>(
        prob: &P,
        w: &MixingMatrix<T>,
        alpha: T,
        x0: &AgentStates<T>,
    ) -> Self {
        let zero_start = x0.stacked().iter().all(|&v| v == T::zero());
        if zero_start {
            return Self::compute(prob, w, alpha);
        }
        let d = generalized_gradient_bound(prob, x0, w, alpha).ok();
        let mut bounds = Self::assemble(prob, w, alpha, &Tolerances::default(), d);
        bounds.initial_norm = Some(linalg::norm(x0.stacked()));
        bounds
    }

    pub fn compute_with<P: ConsensusProblem<T>>(
        prob: &P,
        w: &MixingMatrix<T>,
        alpha: T,
        tol: &Tolerances,
    ) -> Self {
        Self::assemble(prob, w, alpha, tol, gradient_bound(prob).ok())
    }

    fn assemble<P: ConsensusProblem<T>>(
        prob: &P,
        w: &MixingMatrix<T>,
        alpha: T,
        tol: &Tolerances,
        d: Option<T>,
    ) -> Self {
        let l_h = prob.max_lipschitz();
        let l_fbar = prob.mean_lipschitz();
        let lambda_n = w.lambda_n();
        let beta = w.beta();
        let alpha_max = (T::one() + lambda_n) / l_h;
        let dev_bound = d.map(|d| deviation_bound(alpha, d, beta));
        let constants = rate_constants(prob, T::of(tol.theta));
        let (c1, c2) = match constants {
            Some((c1, c2)) => (Some(c1), Some(c2)),
            None => (None, None),
        };
        let rate = match (c2, d) {
            (Some(c2), Some(d)) => linear_rate_constants(alpha, c2, d, l_h, beta, None).ok(),
            _ => None,
        };
        Self {
            alpha,
            l_h,
            l_fbar,
            lambda_n,
            beta,
            alpha_max,
            d,
            dev_bound,
            c1,
            c2,
            delta: rate.map(|r| r.delta),
            c3: rate.map(|r| r.c3),
            c4: rate.map(|r| r.c4),
            neighborhood: rate.map(|r| r.neighborhood),
            local_neighborhood: match (rate, dev_bound) {
                (Some(r), Some(dev)) => Some(r.neighborhood + dev),
                _ => None,
            },
            big_c: None,
            initial_norm: None,
        }
    }

    pub fn with_objective_error_constant(mut self, c: T) -> Self {
        self.big_c = Some(c);
        self
    }

    /// `min(alpha_max, c1)` when `c1` is known, the stability ceiling alone
    /// otherwise.
    pub fn ceiling(&self) -> T {
        match self.c1 {
            Some(c1) => self.alpha_max.min(c1),
            None => self.alpha_max,
        }
    }

    /// Whether the stepsize satisfies the stability hypothesis
    /// `alpha <= (1 + lambda_n) / L_h`; the gradient, deviation, and
    /// potential-descent guarantees only apply then.
    pub fn stability_compliant(&self) -> bool {
        self.alpha <= self.alpha_max * (T::one() + T::of(1e-12))
    }

    /// Whether the stepsize also satisfies `alpha <= c1`, the extra
    /// hypothesis behind the linear-rate recursion.
    pub fn rate_compliant(&self) -> bool {
        self.stability_compliant()
            && match self.c1 {
                Some(c1) => self.alpha <= c1 * (T::one() + T::of(1e-12)),
                None => false,
            }
    }

    /// Deviation envelope at a given round: the steady floor
    /// `alpha D / (1 - beta)` plus, for nonzero starts, the decaying
    /// `beta^k ||x(0)||` term.
    pub fn deviation_envelope(&self, round: usize) -> Option<T> {
        self.dev_bound.map(|dev| {
            dev + self.initial_norm.map_or(T::zero(), |n0| self.beta.powi(round as i32) * n0)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;
    use crate::problems::{least_squares, quadratic_example};

    #[test]
    fn gradient_bound_on_quadratic_example() {
        let d = gradient_bound(&quadratic_example(1.0f64)).unwrap();
        assert!((d - 3.0f64.sqrt()).abs() < 1e-14);
        let d4 = gradient_bound(&quadratic_example(4.0f64)).unwrap();
        assert!((d4 - 4.0 * 3.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn gradient_bound_zero_when_all_agents_minimized_at_origin() {
        let a = vec![DenseMatrix::<f64>::identity(2); 3];
        let b = vec![vec![0.0f64; 2]; 3];
        let prob = least_squares(a, b).unwrap();
        assert_eq!(gradient_bound(&prob).unwrap(), 0.0);
    }

    #[test]
    fn generalized_bound_collapses_at_zero_and_consensus_starts() {
        let prob = quadratic_example(1.0f64);
        let w = MixingMatrix::swap_example(0.2).unwrap();
        let base = gradient_bound(&prob).unwrap();

        let zero = AgentStates::zeros(3, 1);
        let at_zero = generalized_gradient_bound(&prob, &zero, &w, 0.5).unwrap();
        assert!((at_zero - base).abs() < 1e-12);

        let consensus = AgentStates::consensus(3, &[2.5]);
        let at_consensus = generalized_gradient_bound(&prob, &consensus, &w, 0.5).unwrap();
        assert!((at_consensus - base).abs() < 1e-9);
    }

    #[test]
    fn generalized_bound_matches_hand_value() {
        let prob = quadratic_example(1.0f64);
        let w = MixingMatrix::swap_example(0.2).unwrap();
        let x0 = AgentStates::from_stacked(3, 1, vec![1.0, 0.0, 2.0]).unwrap();
        let d = generalized_gradient_bound(&prob, &x0, &w, 0.5).unwrap();
        // 2 L (sum f_i(0) - f^o) = 3, extra = (1/0.5)(5 - 2.2) = 5.6.
        assert!((d - 8.6f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn stepsize_ceiling_takes_the_tighter_constant() {
        let prob = quadratic_example(1.0f64);
        let w = MixingMatrix::swap_example(0.2).unwrap();
        let ceiling = stepsize_ceiling(&prob, &w);
        assert!((ceiling - 0.5).abs() < 1e-12);
        let bounds = BoundSet::compute(&prob, &w, 0.3);
        assert!((bounds.alpha_max - 0.6).abs() < 1e-12);
        assert!((bounds.ceiling() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn strong_convexity_constants() {
        let (c1, c2) = sc_constants(1.0f64, 1.0);
        assert_eq!((c1, c2), (0.5, 0.5));
        let (c1, c2) = sc_constants(2.0f64, 8.0);
        assert!((c1 - 0.1).abs() < 1e-15 && (c2 - 1.6).abs() < 1e-15);
    }

    #[test]
    fn restricted_strong_convexity_constants() {
        assert_eq!(rsc_constants(0.7f64, 2.0, 0.0).unwrap(), (0.0, 0.7));
        assert_eq!(rsc_constants(0.7f64, 2.0, 1.0).unwrap(), (0.5, 0.0));
        assert_eq!(rsc_constants(0.5f64, 2.0, 0.5).unwrap(), (0.25, 0.25));
        assert!(rsc_constants(0.5f64, 2.0, 1.5).is_err());
    }

    #[test]
    fn linear_rate_default_split() {
        let rate = linear_rate_constants(0.5, 0.5, 3.0f64.sqrt(), 1.0, 0.4, None).unwrap();
        assert!((rate.delta - 1.0 / 3.0).abs() < 1e-14);
        assert!((rate.c3 - 0.875f64.sqrt()).abs() < 1e-14);
        // Closed form of the landing radius for the default split.
        let closed =
            0.5 * 3.0f64.sqrt() / 0.6 * (4.0f64 / (0.5 * 0.5) - 2.0 * 0.5 / 0.5).sqrt();
        assert!((rate.neighborhood - closed).abs() < 1e-10);
        assert!((rate.neighborhood - 5.4006).abs() < 1e-3);
    }

    #[test]
    fn linear_rate_vanishes_with_the_stepsize() {
        let rate = linear_rate_constants(1e-8, 0.5, 3.0f64.sqrt(), 1.0, 0.4, None).unwrap();
        assert!(rate.c3 < 1.0 && rate.c3 > 1.0 - 1e-8);
        assert!(rate.neighborhood < 1e-6);
        assert!(linear_rate_constants(3.0, 0.5, 1.0, 1.0, 0.4, None).is_err());
    }

    #[test]
    fn deviation_bound_values() {
        assert!((deviation_bound(0.1f64, 3.0f64.sqrt(), 0.4) - 0.28867513459481287).abs() < 1e-15);
        assert_eq!(deviation_bound(0.3f64, 0.0, 0.7), 0.0);
        assert_eq!(deviation_bound(0.3f64, 2.0, 0.0), 0.6);
    }

    #[test]
    fn objective_error_constant_cases() {
        let star = [1.0f64];
        let at_star = AgentStates::consensus(3, &star);
        assert_eq!(objective_error_constant(&at_star, &at_star, &star), 0.0);

        // Moving the start away from the fixed point grows the constant.
        let near = AgentStates::from_stacked(3, 1, vec![1.1, 1.0, 0.9]).unwrap();
        let far = AgentStates::from_stacked(3, 1, vec![2.0, 1.0, 0.0]).unwrap();
        let c_near = objective_error_constant(&near, &at_star, &star);
        let c_far = objective_error_constant(&far, &at_star, &star);
        assert!(c_far > c_near && c_near > 0.0);
    }

    #[test]
    fn descent_inequality_trivial_cases() {
        assert!(descent_inequality_check(0.0f64, 0.0, 0.5, 1.0, 1.0, 1.0, 0.4, 1e-10));
        assert!(!descent_inequality_check(1.0f64, 2.0, 0.5, 1.0, 0.001, 1.0, 0.4, 1e-10));
    }

    #[test]
    fn bound_set_without_minima_keeps_fields_absent() {
        let inst = crate::problems::generate_bp_instance::<f64>(6, 12, 3, 2, 2.0, 5).unwrap();
        let dual = crate::problems::basis_pursuit_dual(inst).unwrap();
        let g = crate::netgen::Graph::complete(3);
        let w = MixingMatrix::metropolis(&g);
        let bounds = BoundSet::compute(&dual, &w, 0.01);
        assert!(bounds.d.is_none() && bounds.c3.is_none());
        assert_eq!(bounds.ceiling(), bounds.alpha_max);
    }
}
