//! Per-round error metrics and audits of the theoretical bounds.
//!
//! A [`Collector`] plugs into the engine's round hook, measures each state
//! against an oracle-supplied optimum, and flags any round where a bound
//! from the run's [`BoundSet`] fails to hold.

use serde::Serialize;

use crate::config::Tolerances;
use crate::engine::{self, AgentStates};
use crate::linalg;
use crate::mixing::MixingMatrix;
use crate::problems::ConsensusProblem;
use crate::scalar::Real;
use crate::theory::BoundSet;

/// Optimum data produced by a centralized oracle: a solution of the averaged
/// problem and its objective value. For problems with non-unique solution
/// sets this is a single high-accuracy representative, so distances measured
/// against it upper-bound the true projected distances.
#[derive(Debug, Clone)]
pub struct Reference<T> {
    pub x_star: Vec<T>,
    pub f_bar_star: T,
}

impl<T: Real> Reference<T> {
    /// Builds the reference from a solution vector, evaluating the averaged
    /// objective there rather than assuming a value.
    pub fn from_problem<P: ConsensusProblem<T>>(prob: &P, x_star: Vec<T>) -> Self {
        let f_bar_star = prob.mean_value(&x_star);
        Self { x_star, f_bar_star }
    }
}

/// Which audited bounds a round violated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ViolationFlags {
    /// Deviation from mean exceeded `alpha D / (1 - beta)`.
    pub deviation: bool,
    /// Stacked gradient norm exceeded `D`.
    pub gradient_norm: bool,
    /// Round potential increased.
    pub lyapunov: bool,
    /// Mean-error recursion `e(k+1)^2 <= c3^2 e(k)^2 + c4^2` failed.
    pub mean_recursion: bool,
    /// Per-agent error exceeded the geometric envelope.
    pub local_envelope: bool,
}

impl ViolationFlags {
    pub fn any(&self) -> bool {
        self.deviation
            || self.gradient_norm
            || self.lyapunov
            || self.mean_recursion
            || self.local_envelope
    }

    /// Compact label list, empty when clean.
    pub fn labels(&self) -> String {
        let mut parts = Vec::new();
        if self.deviation {
            parts.push("deviation");
        }
        if self.gradient_norm {
            parts.push("gradient");
        }
        if self.lyapunov {
            parts.push("lyapunov");
        }
        if self.mean_recursion {
            parts.push("recursion");
        }
        if self.local_envelope {
            parts.push("envelope");
        }
        parts.join(";")
    }
}

/// Everything measured about one round.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord<T> {
    pub round: usize,
    /// `max_i ||x_(i) - mean||`.
    pub max_deviation: T,
    /// Objective error of the mean iterate: `fbar(mean) - fbar*`.
    pub objective_error: T,
    /// Solution error of the mean iterate: `||mean - x*||`.
    pub mean_error: T,
    /// Stacked gradient norm `||h||`.
    pub gradient_norm: T,
    /// Round potential value.
    pub lyapunov: T,
    /// `max_i ||x_(i) - x*||`.
    pub local_error_max: T,
    pub flags: ViolationFlags,
}

/// Measures one state against the oracle reference. Flags stay clear here;
/// [`audit_flags`] (or a [`Collector`]) fills them from a [`BoundSet`].
pub fn measure<T: Real, P: ConsensusProblem<T>>(
    s: &AgentStates<T>,
    prob: &P,
    w: &MixingMatrix<T>,
    alpha: T,
    reference: &Reference<T>,
) -> IterationRecord<T> {
    let mean = s.mean();
    let h = engine::stacked_gradient(s, prob);
    let local_error_max = (0..s.agents())
        .map(|i| linalg::dist(s.agent(i), &reference.x_star))
        .fold(T::zero(), T::max);
    IterationRecord {
        round: s.round(),
        max_deviation: s.max_deviation_from_mean(),
        objective_error: prob.mean_value(&mean) - reference.f_bar_star,
        mean_error: linalg::dist(&mean, &reference.x_star),
        gradient_norm: linalg::norm(&h),
        lyapunov: engine::lyapunov_value(s, w, alpha, prob),
        local_error_max,
        flags: ViolationFlags::default(),
    }
}

/// Compares one measured round against the run's bounds. `initial` (the
/// round-zero record) anchors the geometric envelope and the potential
/// scale; `previous` enables the monotonicity and recursion audits.
///
/// Each audit only fires when the stepsize satisfies the hypothesis of the
/// bound it checks; a run above the ceiling is out of contract, not in
/// violation.
///
/// The monotonicity slack is relative to the potential scale of the run,
/// `max(|xi(0)|, |xi(k-1)|)`: the potential is a sum of terms the size of
/// its starting value, so its evaluation noise does not shrink with the
/// cancelled final value.
pub fn audit_flags<T: Real>(
    record: &IterationRecord<T>,
    previous: Option<&IterationRecord<T>>,
    initial: Option<&IterationRecord<T>>,
    bounds: &BoundSet<T>,
    tol: &Tolerances,
) -> ViolationFlags {
    let slack = T::of(tol.ineq_slack);
    let mut flags = ViolationFlags::default();
    let initial = initial.unwrap_or(record);

    if bounds.stability_compliant() {
        if let Some(dev_envelope) = bounds.deviation_envelope(record.round) {
            flags.deviation = record.max_deviation > dev_envelope + slack;
        }
        if let Some(d) = bounds.d {
            flags.gradient_norm = record.gradient_norm > d + slack;
        }
        if let Some(prev) = previous {
            let scale = prev.lyapunov.abs().max(initial.lyapunov.abs());
            let allowed = prev.lyapunov + T::of(tol.lyapunov_rel_slack) * scale;
            flags.lyapunov = record.lyapunov > allowed;
        }
    }
    if bounds.rate_compliant() {
        if let (Some(prev), Some(c3), Some(c4)) = (previous, bounds.c3, bounds.c4) {
            let rhs = c3 * c3 * prev.mean_error * prev.mean_error + c4 * c4;
            flags.mean_recursion = record.mean_error * record.mean_error > rhs + slack;
        }
        if let Some(envelope) = local_envelope(bounds, initial.mean_error, record.round) {
            flags.local_envelope = record.local_error_max > envelope + slack;
        }
    }
    flags
}

/// Geometric per-agent error envelope at round `k`:
/// `c3^k e(0) + neighborhood + deviation envelope`, when the constants exist.
pub fn local_envelope<T: Real>(
    bounds: &BoundSet<T>,
    initial_mean_error: T,
    round: usize,
) -> Option<T> {
    match (bounds.c3, bounds.neighborhood, bounds.deviation_envelope(round)) {
        (Some(c3), Some(nbhd), Some(dev)) => {
            Some(c3.powi(round as i32) * initial_mean_error + nbhd + dev)
        }
        _ => None,
    }
}

/// How far the evaluated gradients sit from their consensus counterparts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientDeviation<T> {
    /// `max_i ||grad f_i(x_(i)) - grad f_i(mean)||`.
    pub max_local: T,
    /// `||g - gbar||`: the gap between the average of local gradients and
    /// the gradient of the averaged objective at the mean.
    pub mean_gap: T,
}

pub fn gradient_deviation<T: Real, P: ConsensusProblem<T>>(
    s: &AgentStates<T>,
    prob: &P,
) -> GradientDeviation<T> {
    let mean = s.mean();
    let p = s.dim();
    let n = T::of(s.agents() as f64);
    let mut local = vec![T::zero(); p];
    let mut at_mean = vec![T::zero(); p];
    let mut g = vec![T::zero(); p];
    let mut max_local = T::zero();
    for i in 0..s.agents() {
        prob.local_gradient_into(i, s.agent(i), &mut local);
        prob.local_gradient_into(i, &mean, &mut at_mean);
        max_local = max_local.max(linalg::dist(&local, &at_mean));
        linalg::axpy(&mut g, T::one() / n, &local);
    }
    let gbar = prob.mean_gradient(&mean);
    GradientDeviation { max_local, mean_gap: linalg::dist(&g, &gbar) }
}

/// Worst per-agent objective error `max_i (fbar(x_(i)) - fbar*)`.
pub fn local_objective_gap<T: Real, P: ConsensusProblem<T>>(
    s: &AgentStates<T>,
    prob: &P,
    reference: &Reference<T>,
) -> T {
    (0..s.agents())
        .map(|i| prob.mean_value(s.agent(i)) - reference.f_bar_star)
        .fold(T::neg_infinity(), T::max)
}

/// Round hook that measures every state and audits it against the bounds.
pub struct Collector<'a, T, P> {
    prob: &'a P,
    w: &'a MixingMatrix<T>,
    alpha: T,
    reference: &'a Reference<T>,
    bounds: &'a BoundSet<T>,
    tol: Tolerances,
    records: Vec<IterationRecord<T>>,
    violations: usize,
}

impl<'a, T: Real, P: ConsensusProblem<T>> Collector<'a, T, P> {
    pub fn new(
        prob: &'a P,
        w: &'a MixingMatrix<T>,
        alpha: T,
        reference: &'a Reference<T>,
        bounds: &'a BoundSet<T>,
    ) -> Self {
        Self {
            prob,
            w,
            alpha,
            reference,
            bounds,
            tol: Tolerances::default(),
            records: Vec::new(),
            violations: 0,
        }
    }

    pub fn observe(&mut self, s: &AgentStates<T>) {
        let mut record = measure(s, self.prob, self.w, self.alpha, self.reference);
        record.flags = audit_flags(
            &record,
            self.records.last(),
            self.records.first(),
            self.bounds,
            &self.tol,
        );
        if record.flags.any() {
            self.violations += 1;
        }
        self.records.push(record);
    }

    pub fn records(&self) -> &[IterationRecord<T>] {
        &self.records
    }

    pub fn into_records(self) -> Vec<IterationRecord<T>> {
        self.records
    }

    /// Rounds with at least one violated bound.
    pub fn violations(&self) -> usize {
        self.violations
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixing::MixingMatrix;
    use crate::problems::quadratic_example;

    fn setup() -> (impl ConsensusProblem<f64>, MixingMatrix<f64>, Reference<f64>) {
        let prob = quadratic_example(1.0);
        let reference = Reference::from_problem(&prob, vec![1.0]);
        (prob, MixingMatrix::swap_example(0.2).unwrap(), reference)
    }

    #[test]
    fn consensus_at_optimum_measures_zero() {
        let (prob, w, reference) = setup();
        let s = AgentStates::consensus(3, &[1.0]);
        let rec = measure(&s, &prob, &w, 0.5, &reference);
        assert_eq!(rec.max_deviation, 0.0);
        assert_eq!(rec.objective_error, 0.0);
        assert_eq!(rec.mean_error, 0.0);
        assert_eq!(rec.local_error_max, 0.0);
    }

    #[test]
    fn spread_state_separates_deviation_from_mean_error() {
        let (prob, w, reference) = setup();
        let s = AgentStates::from_stacked(3, 1, vec![1.0, 0.0, 2.0]).unwrap();
        let rec = measure(&s, &prob, &w, 0.5, &reference);
        // Mean sits exactly at the optimum while agents disagree by 1.
        assert!(rec.mean_error.abs() < 1e-15);
        assert!((rec.max_deviation - 1.0).abs() < 1e-15);
        assert!((rec.local_error_max - 1.0).abs() < 1e-15);
    }

    #[test]
    fn objective_error_respects_convexity_inequality() {
        let (prob, w, reference) = setup();
        let s = AgentStates::from_stacked(3, 1, vec![0.4, 0.1, 0.7]).unwrap();
        let rec = measure(&s, &prob, &w, 0.5, &reference);
        let mean = s.mean();
        let gbar = prob.mean_gradient(&mean);
        let ebar = linalg::sub(&mean, &reference.x_star);
        assert!(rec.objective_error <= linalg::dot(&gbar, &ebar) + 1e-12);
    }

    #[test]
    fn gradient_deviation_on_affine_gradients() {
        let (prob, _, _) = setup();
        let consensus = AgentStates::consensus(3, &[0.3]);
        let dev = gradient_deviation(&consensus, &prob);
        assert_eq!(dev.max_local, 0.0);
        assert_eq!(dev.mean_gap, 0.0);

        // Symmetric spread: local gradients differ but their mean matches
        // the gradient at the mean exactly.
        let spread = AgentStates::from_stacked(3, 1, vec![1.0, 0.0, 2.0]).unwrap();
        let dev = gradient_deviation(&spread, &prob);
        assert!((dev.max_local - 1.0).abs() < 1e-15);
        assert!(dev.mean_gap < 1e-15);
    }

    #[test]
    fn local_objective_gap_cases() {
        let (prob, _, reference) = setup();
        let at_star = AgentStates::consensus(3, &[1.0]);
        assert_eq!(local_objective_gap(&at_star, &prob, &reference), 0.0);

        let single = quadratic_example(1.0f64);
        let lone_ref = Reference::from_problem(&single, vec![1.0]);
        let s = AgentStates::consensus(3, &[0.5]);
        let gap = local_objective_gap(&s, &single, &lone_ref);
        let rec_obj = single.mean_value(&[0.5]) - lone_ref.f_bar_star;
        assert!((gap - rec_obj).abs() < 1e-15);
    }

    #[test]
    fn collector_flags_fabricated_violation() {
        let (prob, w, reference) = setup();
        let bounds = BoundSet::compute(&prob, &w, 0.5);
        let mut collector = Collector::new(&prob, &w, 0.5, &reference, &bounds);
        collector.observe(&AgentStates::zeros(3, 1));
        assert_eq!(collector.violations(), 0);

        // A state pushed far out violates the deviation and gradient bounds.
        let wild = AgentStates::from_stacked(3, 1, vec![90.0, -90.0, 0.0]).unwrap();
        collector.observe(&wild);
        assert_eq!(collector.violations(), 1);
        let rec = collector.records().last().unwrap();
        assert!(rec.flags.deviation && rec.flags.gradient_norm);
        assert!(!rec.flags.labels().is_empty());
    }
}
