//! Canned experiment setups, selectable with `--scenario <name>`.

use std::path::PathBuf;

use crate::config::{
    MixingScheme, NetworkConfig, OutputConfig, ProblemConfig, ProblemKind, RunConfig, RunSection,
};

pub const SCENARIO_NAMES: &[&str] = &["example21", "fig1", "fig2", "fig3", "fig4", "bp-desk"];

fn problem_defaults(kind: ProblemKind) -> ProblemConfig {
    ProblemConfig {
        kind,
        n: 0,
        p: 0,
        q: 0,
        sparsity: 0,
        gamma: None,
        curvature: 1.0,
        noise_sigma: 0.0,
        instance_seed: 0,
    }
}

fn output_defaults() -> OutputConfig {
    OutputConfig { dir: Some(PathBuf::from("out")), snapshot_every: 0, oracle_tol: 1e-10 }
}

fn run_defaults() -> RunSection {
    RunSection {
        alphas: Vec::new(),
        ceiling_fractions: Vec::new(),
        max_iter: 10_000,
        stop_tol: 1e-12,
        x0: None,
    }
}

/// Three-agent critical-stepsize study: just under the ceiling converges,
/// exactly at it the state cycles with period two, just above it diverges.
fn example21() -> RunConfig {
    RunConfig {
        problem: ProblemConfig { curvature: 1.0, ..problem_defaults(ProblemKind::QuadraticExample) },
        network: NetworkConfig {
            eta: 1.0,
            seed: 0,
            scheme: MixingScheme::SwapExample,
            tau: Some(0.2),
        },
        run: RunSection {
            alphas: vec![0.59, 0.60, 0.61],
            max_iter: 5000,
            stop_tol: 0.0,
            x0: Some(vec![1.0, 0.0, 2.0]),
            ..run_defaults()
        },
        output: output_defaults(),
    }
}

fn ls_network_problem() -> (ProblemConfig, NetworkConfig) {
    (
        ProblemConfig {
            n: 100,
            p: 3,
            noise_sigma: 0.5,
            instance_seed: 1001,
            ..problem_defaults(ProblemKind::LeastSquares)
        },
        NetworkConfig { eta: 0.3, seed: 7, scheme: MixingScheme::Metropolis, tau: None },
    )
}

/// Least-squares sweep over five stepsizes on a 100-agent network: the mean
/// error decays linearly, then lands on a stepsize-proportional floor.
fn fig1() -> RunConfig {
    let (problem, network) = ls_network_problem();
    RunConfig {
        problem,
        network,
        run: RunSection {
            ceiling_fractions: vec![0.9, 0.45, 0.2, 0.09, 0.04],
            max_iter: 40_000,
            stop_tol: 1e-13,
            ..run_defaults()
        },
        output: output_defaults(),
    }
}

/// Stepsize boundary probe: the computed ceiling converges while a stepsize
/// above it diverges.
fn fig2() -> RunConfig {
    let (problem, network) = ls_network_problem();
    RunConfig {
        problem,
        network,
        run: RunSection {
            ceiling_fractions: vec![1.0, 1.15],
            max_iter: 20_000,
            stop_tol: 1e-13,
            ..run_defaults()
        },
        output: output_defaults(),
    }
}

fn bp_paper_scale() -> (ProblemConfig, NetworkConfig) {
    (
        ProblemConfig {
            n: 100,
            p: 50,
            q: 100,
            sparsity: 10,
            instance_seed: 2002,
            ..problem_defaults(ProblemKind::BasisPursuit)
        },
        NetworkConfig { eta: 0.3, seed: 7, scheme: MixingScheme::Metropolis, tau: None },
    )
}

/// Basis-pursuit dual convergence across four stepsizes: linear decay of the
/// mean dual error to stepsize-proportional floors.
fn fig3() -> RunConfig {
    let (problem, network) = bp_paper_scale();
    RunConfig {
        problem,
        network,
        run: RunSection {
            ceiling_fractions: vec![0.9, 0.45, 0.225, 0.1125],
            max_iter: 20_000,
            stop_tol: 1e-12,
            ..run_defaults()
        },
        output: OutputConfig { oracle_tol: 1e-8, ..output_defaults() },
    }
}

/// Primal convergence companion to `fig3` with three stepsizes.
fn fig4() -> RunConfig {
    let mut cfg = fig3();
    cfg.run.ceiling_fractions = vec![0.9, 0.45, 0.225];
    cfg
}

/// Desk-scale basis pursuit used by the acceptance battery: 10 agents share
/// a 25 x 50 dictionary with a 3-sparse signal.
fn bp_desk() -> RunConfig {
    RunConfig {
        problem: ProblemConfig {
            n: 10,
            p: 25,
            q: 50,
            sparsity: 3,
            instance_seed: 3003,
            ..problem_defaults(ProblemKind::BasisPursuit)
        },
        network: NetworkConfig { eta: 0.5, seed: 11, scheme: MixingScheme::Metropolis, tau: None },
        run: RunSection {
            ceiling_fractions: vec![0.9, 0.09],
            max_iter: 60_000,
            stop_tol: 1e-12,
            ..run_defaults()
        },
        output: output_defaults(),
    }
}

pub fn canned(name: &str) -> Option<RunConfig> {
    match name {
        "example21" => Some(example21()),
        "fig1" => Some(fig1()),
        "fig2" => Some(fig2()),
        "fig3" => Some(fig3()),
        "fig4" => Some(fig4()),
        "bp-desk" => Some(bp_desk()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_scenario_validates() {
        for name in SCENARIO_NAMES {
            let cfg = canned(name).unwrap_or_else(|| panic!("missing scenario {name}"));
            cfg.validated().unwrap_or_else(|e| panic!("scenario {name}: {e}"));
        }
    }

    #[test]
    fn unknown_scenario_is_none() {
        assert!(canned("fig9").is_none());
    }
}
