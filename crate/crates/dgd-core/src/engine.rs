//! The decentralized gradient descent round and the loop around it.
//!
//! Each synchronized round maps the stacked state `[x_(i)]` to
//! `x_(i) <- sum_j w_ij x_(j) - alpha grad f_i(x_(i))`, every agent reading
//! the same previous round (double-buffered, Jacobi style). The whole-network
//! map equals one unit-stepsize gradient descent step on the potential
//! returned by [`lyapunov_value`], which is what makes fixed stepsizes below
//! `(1 + lambda_n(W)) / L_h` provably safe.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg;
use crate::mixing::MixingMatrix;
use crate::problems::ConsensusProblem;
use crate::scalar::Real;

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("iterate diverged at round {round}: |entry| reached {magnitude:e}")]
    Diverged { round: usize, magnitude: f64 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

/// Stacked per-agent iterates at one round, agent-major: agent `i` owns
/// `x[i * p .. (i + 1) * p]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentStates<T> {
    round: usize,
    agents: usize,
    dim: usize,
    x: Vec<T>,
}

impl<T: Real> AgentStates<T> {
    pub fn zeros(agents: usize, dim: usize) -> Self {
        Self { round: 0, agents, dim, x: vec![T::zero(); agents * dim] }
    }

    pub fn from_stacked(agents: usize, dim: usize, x: Vec<T>) -> Result<Self, EngineError> {
        if x.len() != agents * dim {
            return Err(EngineError::ShapeMismatch(format!(
                "stacked vector has length {}, expected {} * {}",
                x.len(),
                agents,
                dim
            )));
        }
        Ok(Self { round: 0, agents, dim, x })
    }

    /// Same consensus value for every agent.
    pub fn consensus(agents: usize, value: &[T]) -> Self {
        let dim = value.len();
        let mut x = Vec::with_capacity(agents * dim);
        for _ in 0..agents {
            x.extend_from_slice(value);
        }
        Self { round: 0, agents, dim, x }
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn agents(&self) -> usize {
        self.agents
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn stacked(&self) -> &[T] {
        &self.x
    }

    pub fn agent(&self, i: usize) -> &[T] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    /// Network average `(1/n) sum_i x_(i)`.
    pub fn mean(&self) -> Vec<T> {
        let n = T::of(self.agents as f64);
        let mut m = vec![T::zero(); self.dim];
        for i in 0..self.agents {
            for (acc, &v) in m.iter_mut().zip(self.agent(i)) {
                *acc += v;
            }
        }
        for v in m.iter_mut() {
            *v /= n;
        }
        m
    }

    pub fn max_abs(&self) -> T {
        linalg::norm_inf(&self.x)
    }

    /// Largest per-agent distance from the network average.
    pub fn max_deviation_from_mean(&self) -> T {
        let mean = self.mean();
        (0..self.agents)
            .map(|i| linalg::dist(self.agent(i), &mean))
            .fold(T::zero(), T::max)
    }
}

/// Network average of the current round; identical to [`AgentStates::mean`].
pub fn mean_state<T: Real>(s: &AgentStates<T>) -> Vec<T> {
    s.mean()
}

/// Stacked gradient `[grad f_1(x_(1)); ...; grad f_n(x_(n))]`.
pub fn stacked_gradient<T: Real, P: ConsensusProblem<T>>(s: &AgentStates<T>, prob: &P) -> Vec<T> {
    let mut h = vec![T::zero(); s.agents() * s.dim()];
    for i in 0..s.agents() {
        prob.local_gradient_into(i, s.agent(i), &mut h[i * s.dim()..(i + 1) * s.dim()]);
    }
    h
}

/// The potential whose unit-stepsize gradient descent reproduces the round:
/// `-1/2 sum_ij w_ij x_i^T x_j + sum_i (1/2 ||x_i||^2 + alpha f_i(x_i))`.
/// Nonincreasing along the iteration whenever
/// `alpha <= (1 + lambda_n(W)) / L_h`.
pub fn lyapunov_value<T: Real, P: ConsensusProblem<T>>(
    s: &AgentStates<T>,
    w: &MixingMatrix<T>,
    alpha: T,
    prob: &P,
) -> T {
    let half = T::of(0.5);
    let quad = w.stacked_quadratic_form(s.dim(), s.stacked());
    let mut value = -half * quad;
    for i in 0..s.agents() {
        let xi = s.agent(i);
        value += half * linalg::dot(xi, xi) + alpha * prob.local_value(i, xi);
    }
    value
}

pub const DEFAULT_OVERFLOW_GUARD: f64 = 1e12;

/// One synchronized round. All agents mix and step from the same input
/// state. Returns the divergence error as soon as any entry magnitude
/// crosses `guard`.
pub fn dgd_step_guarded<T: Real, P: ConsensusProblem<T>>(
    s: &AgentStates<T>,
    w: &MixingMatrix<T>,
    alpha: T,
    prob: &P,
    guard: T,
) -> Result<AgentStates<T>, EngineError> {
    let (n, p) = (s.agents(), s.dim());
    assert_eq!(w.n(), n, "mixing matrix size must match the agent count");
    assert_eq!(prob.agents(), n, "problem agent count must match the state");
    assert_eq!(prob.dim(), p, "problem dimension must match the state");

    let mut next = vec![T::zero(); n * p];
    w.mix_stacked(p, s.stacked(), &mut next);
    let mut grad = vec![T::zero(); p];
    for i in 0..n {
        prob.local_gradient_into(i, s.agent(i), &mut grad);
        for d in 0..p {
            next[i * p + d] -= alpha * grad[d];
        }
    }

    let magnitude = linalg::norm_inf(&next);
    if !(magnitude <= guard) {
        return Err(EngineError::Diverged {
            round: s.round() + 1,
            magnitude: magnitude.as_f64(),
        });
    }
    Ok(AgentStates { round: s.round() + 1, agents: n, dim: p, x: next })
}

/// [`dgd_step_guarded`] with the default overflow guard.
pub fn dgd_step<T: Real, P: ConsensusProblem<T>>(
    s: &AgentStates<T>,
    w: &MixingMatrix<T>,
    alpha: T,
    prob: &P,
) -> Result<AgentStates<T>, EngineError> {
    dgd_step_guarded(s, w, alpha, prob, T::of(DEFAULT_OVERFLOW_GUARD))
}

#[derive(Debug, Clone)]
pub struct RunOptions<T> {
    pub max_iter: usize,
    /// Stop when `||x(k+1) - x(k)||` drops below this; `None` runs to
    /// `max_iter`.
    pub stop_tol: Option<T>,
    pub overflow_guard: T,
    /// Keep a full state snapshot every this many rounds (the initial state
    /// is always included when set).
    pub snapshot_every: Option<usize>,
}

impl<T: Real> Default for RunOptions<T> {
    fn default() -> Self {
        Self {
            max_iter: 1000,
            stop_tol: None,
            overflow_guard: T::of(DEFAULT_OVERFLOW_GUARD),
            snapshot_every: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RunOutcome<T> {
    /// Successive-iterate change dropped below the tolerance at this round.
    Converged { round: usize },
    MaxIterReached,
    /// The overflow guard tripped at this round.
    Diverged { round: usize, magnitude: T },
}

impl<T> RunOutcome<T> {
    pub fn diverged(&self) -> bool {
        matches!(self, RunOutcome::Diverged { .. })
    }
}

/// Full record of one run: where it started, where it stopped, and why.
#[derive(Debug, Clone)]
pub struct Trace<T> {
    pub alpha: T,
    pub outcome: RunOutcome<T>,
    /// Rounds actually applied.
    pub steps: usize,
    pub initial: AgentStates<T>,
    pub final_state: AgentStates<T>,
    pub snapshots: Vec<AgentStates<T>>,
}

/// Runs the iteration from `x0`, invoking `hook` on every state (the initial
/// one included) so diagnostics can observe each round. Divergence ends the
/// run and takes precedence over the stop tolerance.
pub fn run<T: Real, P: ConsensusProblem<T>>(
    prob: &P,
    w: &MixingMatrix<T>,
    alpha: T,
    x0: AgentStates<T>,
    opts: &RunOptions<T>,
    mut hook: impl FnMut(&AgentStates<T>),
) -> Trace<T> {
    assert!(alpha > T::zero(), "stepsize must be positive");
    let initial = x0.clone();
    let mut snapshots = Vec::new();
    if opts.snapshot_every.is_some() {
        snapshots.push(x0.clone());
    }
    hook(&x0);

    let mut state = x0;
    let mut steps = 0;
    let mut outcome = RunOutcome::MaxIterReached;
    while steps < opts.max_iter {
        let next = match dgd_step_guarded(&state, w, alpha, prob, opts.overflow_guard) {
            Ok(next) => next,
            Err(EngineError::Diverged { round, magnitude }) => {
                outcome = RunOutcome::Diverged { round, magnitude: T::of(magnitude) };
                break;
            }
            Err(e) => unreachable!("step cannot fail otherwise: {e}"),
        };
        steps += 1;
        hook(&next);
        if let Some(every) = opts.snapshot_every {
            if every > 0 && next.round() % every == 0 {
                snapshots.push(next.clone());
            }
        }
        let change = linalg::dist(next.stacked(), state.stacked());
        state = next;
        if let Some(tol) = opts.stop_tol {
            if change <= tol {
                outcome = RunOutcome::Converged { round: state.round() };
                break;
            }
        }
    }

    Trace { alpha, outcome, steps, initial, final_state: state, snapshots }
}
