//! Orchestration: build the network, the problem, and the oracle reference
//! from a config, sweep the stepsizes, and write traces plus bound files.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use dgd_core::diagnostics::{Collector, Reference};
use dgd_core::engine::{self, AgentStates, EngineError, RunOptions};
use dgd_core::linalg;
use dgd_core::mixing::{MixingError, MixingMatrix};
use dgd_core::netgen::{self, Graph, NetgenError};
use dgd_core::oracle::{self, OracleError};
use dgd_core::problems::{
    basis_pursuit_dual, generate_bp_instance, generate_noisy_ls_instance, quadratic_example,
    BasisPursuitDual, ConsensusProblem, ProblemError,
};
use dgd_core::theory::{self, BoundSet};

use crate::compare::{self, AlphaRun, StepsizeSummary};
use crate::config::{ConfigError, MixingScheme, ProblemKind, RunConfig};
use crate::trace;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Netgen(#[from] NetgenError),
    #[error(transparent)]
    Mixing(#[from] MixingError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    /// Process exit code for this failure class.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            _ => 1,
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), HarnessError> {
    fs::write(path, contents)
        .map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })
}

#[derive(Debug, Clone)]
pub struct AlphaReport {
    pub alpha: f64,
    pub diverged: bool,
    pub rounds: usize,
    pub violations: usize,
    pub trace_path: PathBuf,
    pub bounds_path: PathBuf,
    pub primal_path: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct ScenarioReport {
    pub label: String,
    pub out_dir: PathBuf,
    pub ceiling: f64,
    pub per_alpha: Vec<AlphaReport>,
    pub summary: Vec<StepsizeSummary>,
}

impl ScenarioReport {
    pub fn total_violations(&self) -> usize {
        self.per_alpha.iter().map(|a| a.violations).sum()
    }

    pub fn all_diverged(&self) -> bool {
        !self.per_alpha.is_empty() && self.per_alpha.iter().all(|a| a.diverged)
    }

    /// Exit code under the run command's contract: 0 success, 3 audited
    /// bound violations (audit mode), 4 when every stepsize diverged.
    pub fn exit_code(&self, audit: bool) -> i32 {
        if self.all_diverged() {
            4
        } else if audit && self.total_violations() > 0 {
            3
        } else {
            0
        }
    }
}

/// Builds the communication graph and mixing matrix for a validated config.
pub fn build_network(cfg: &RunConfig) -> Result<(Graph, MixingMatrix<f64>), HarnessError> {
    match cfg.network.scheme {
        MixingScheme::SwapExample => {
            let tau = cfg.network.tau.expect("validated config has tau");
            let w = MixingMatrix::swap_example(tau)?;
            Ok((Graph::complete(3), w))
        }
        scheme => {
            let n = cfg.problem.n;
            let graph = if cfg.network.eta >= 1.0 || n == 1 {
                Graph::complete(n)
            } else {
                netgen::generate_random_graph(n, cfg.network.eta, cfg.network.seed)?
            };
            let w = MixingMatrix::metropolis(&graph);
            let w = match scheme {
                MixingScheme::MetropolisLazy => w.lazy_transform(),
                _ => w,
            };
            Ok((graph, w))
        }
    }
}

/// Resolved problem data: oracles plus everything the sweep reports need.
enum Prepared {
    Quadratic {
        prob: dgd_core::problems::QuadraticExample<f64>,
        reference: Reference<f64>,
    },
    LeastSquares {
        prob: dgd_core::problems::LeastSquares<f64>,
        reference: Reference<f64>,
    },
    BasisPursuit {
        dual: BasisPursuitDual<f64>,
        reference: Reference<f64>,
        y_star: Vec<f64>,
    },
}

fn prepare_problem(
    cfg: &RunConfig,
    out_dir: &Path,
    label: &str,
) -> Result<Prepared, HarnessError> {
    match cfg.problem.kind {
        ProblemKind::QuadraticExample => {
            let prob = quadratic_example(cfg.problem.curvature);
            let reference = Reference::from_problem(&prob, vec![1.0]);
            Ok(Prepared::Quadratic { prob, reference })
        }
        ProblemKind::LeastSquares => {
            let inst = generate_noisy_ls_instance::<f64>(
                cfg.problem.n,
                cfg.problem.p,
                cfg.problem.noise_sigma,
                cfg.problem.instance_seed,
            );
            let json = serde_json::to_string_pretty(&inst).expect("instances serialize");
            write_file(&out_dir.join(format!("{label}_instance.json")), &json)?;
            let x_star = oracle::least_squares_solve(&inst)?;
            let prob = inst.problem()?;
            let reference = Reference::from_problem(&prob, x_star);
            Ok(Prepared::LeastSquares { prob, reference })
        }
        ProblemKind::BasisPursuit => {
            let mut inst = generate_bp_instance::<f64>(
                cfg.problem.p,
                cfg.problem.q,
                cfg.problem.n,
                cfg.problem.sparsity,
                cfg.problem.gamma.unwrap_or(1.0),
                cfg.problem.instance_seed,
            )?;
            if cfg.problem.gamma.is_none() {
                let auto = inst.suggested_gamma();
                inst = inst.with_gamma(auto)?;
            }
            let json = serde_json::to_string_pretty(&inst).expect("instances serialize");
            write_file(&out_dir.join(format!("{label}_instance.json")), &json)?;

            let cache_dir = out_dir.join("oracle_cache");
            let key = oracle::instance_key(&inst);
            let solution = match oracle::load_cached::<f64>(&cache_dir, &key) {
                Some(cached) => oracle::BpSolution {
                    x_star: cached.x_star,
                    y_star: cached.y_star.unwrap_or_default(),
                    iterations: cached.iterations.unwrap_or(0),
                    relative_residual: 0.0,
                },
                None => {
                    let sol = oracle::bp_centralized_solve(&inst, cfg.output.oracle_tol)?;
                    oracle::store_cached(
                        &cache_dir,
                        &oracle::CachedSolution {
                            key: key.clone(),
                            x_star: sol.x_star.clone(),
                            y_star: Some(sol.y_star.clone()),
                            iterations: Some(sol.iterations),
                        },
                    )?;
                    sol
                }
            };
            let dual = basis_pursuit_dual(inst)?;
            let reference = Reference::from_problem(&dual, solution.x_star.clone());
            Ok(Prepared::BasisPursuit { dual, reference, y_star: solution.y_star })
        }
    }
}

/// Runs every stepsize in the sweep, writing one trace CSV and one bounds
/// JSON per stepsize (plus a primal-error CSV for basis pursuit), and prints
/// the plateau comparison table.
pub fn run_scenario(
    cfg: &RunConfig,
    label: &str,
    audit: bool,
    out_override: Option<&Path>,
) -> Result<ScenarioReport, HarnessError> {
    let cfg = cfg.validated()?;
    let out_dir = out_override
        .map(Path::to_path_buf)
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&out_dir)
        .map_err(|source| HarnessError::Io { path: out_dir.clone(), source })?;

    let (graph, w) = build_network(&cfg)?;
    write_file(&out_dir.join(format!("{label}_graph.txt")), &graph.to_edge_list())?;
    write_file(&out_dir.join(format!("{label}_mixing.csv")), &w.to_csv())?;

    let prepared = prepare_problem(&cfg, &out_dir, label)?;
    match &prepared {
        Prepared::Quadratic { prob, reference } => {
            sweep(&cfg, label, audit, &out_dir, prob, &w, reference, None)
        }
        Prepared::LeastSquares { prob, reference } => {
            sweep(&cfg, label, audit, &out_dir, prob, &w, reference, None)
        }
        Prepared::BasisPursuit { dual, reference, y_star } => {
            let primal = PrimalContext { dual, y_star };
            sweep(&cfg, label, audit, &out_dir, dual, &w, reference, Some(&primal))
        }
    }
}

struct PrimalContext<'a> {
    dual: &'a BasisPursuitDual<f64>,
    y_star: &'a [f64],
}

#[allow(clippy::too_many_arguments)]
fn sweep<P: ConsensusProblem<f64>>(
    cfg: &RunConfig,
    label: &str,
    audit: bool,
    out_dir: &Path,
    prob: &P,
    w: &MixingMatrix<f64>,
    reference: &Reference<f64>,
    primal: Option<&PrimalContext<'_>>,
) -> Result<ScenarioReport, HarnessError> {
    let ceiling = theory::stepsize_ceiling(prob, w);
    let alphas: Vec<f64> = if cfg.run.alphas.is_empty() {
        cfg.run.ceiling_fractions.iter().map(|f| f * ceiling).collect()
    } else {
        cfg.run.alphas.clone()
    };

    let x0 = match &cfg.run.x0 {
        Some(flat) => AgentStates::from_stacked(cfg.problem.n, cfg.problem.p, flat.clone())?,
        None => AgentStates::zeros(cfg.problem.n, cfg.problem.p),
    };
    let opts_template = RunOptions {
        max_iter: cfg.run.max_iter,
        stop_tol: (cfg.run.stop_tol > 0.0).then_some(cfg.run.stop_tol),
        snapshot_every: (cfg.output.snapshot_every > 0).then_some(cfg.output.snapshot_every),
        ..Default::default()
    };

    let mut per_alpha = Vec::new();
    let mut alpha_runs = Vec::new();
    for (idx, &alpha) in alphas.iter().enumerate() {
        let bounds = BoundSet::compute_for_start(prob, w, alpha, &x0);
        let mut collector = Collector::new(prob, w, alpha, reference, &bounds);
        let mut primal_rows: Vec<(usize, f64, f64)> = Vec::new();

        let outcome = engine::run(prob, w, alpha, x0.clone(), &opts_template, |s| {
            collector.observe(s);
            if let Some(ctx) = primal {
                let y = ctx.dual.primal_iterate(s);
                let err = linalg::dist(&y, ctx.y_star);
                let bound = theory::bp_primal_bound(ctx.dual, s, &reference.x_star);
                primal_rows.push((s.round(), err, bound));
            }
        });

        let records = collector.records();
        let violations = collector.violations();
        let rows = trace::rows_from_records(records, &bounds);
        let trace_path = out_dir.join(format!("{label}_alpha{idx}_trace.csv"));
        trace::emit_trace(&rows, &trace_path)
            .map_err(|source| HarnessError::Io { path: trace_path.clone(), source })?;

        let bounds_path = out_dir.join(format!("{label}_alpha{idx}_bounds.json"));
        write_file(&bounds_path, &serde_json::to_string_pretty(&bounds).expect("bounds serialize"))?;

        let primal_path = if primal.is_some() {
            let path = out_dir.join(format!("{label}_alpha{idx}_primal.csv"));
            let mut text = String::from("k,primal_err,primal_bound\n");
            for (k, err, bound) in &primal_rows {
                text.push_str(&format!("{k},{err:.16e},{bound:.16e}\n"));
            }
            write_file(&path, &text)?;
            Some(path)
        } else {
            None
        };

        let diverged = outcome.outcome.diverged();
        alpha_runs.push(AlphaRun {
            alpha,
            mean_errors: records.iter().map(|r| r.mean_error).collect(),
            diverged,
            neighborhood: bounds.local_neighborhood,
        });
        per_alpha.push(AlphaReport {
            alpha,
            diverged,
            rounds: outcome.steps,
            violations,
            trace_path,
            bounds_path,
            primal_path,
        });
    }

    let summary = compare::compare_stepsizes(&alpha_runs);
    println!("scenario {label}: ceiling = {ceiling:.6e}");
    print!("{}", compare::summary_table(&summary));
    for report in &per_alpha {
        if report.diverged {
            println!("alpha {:.6e}: diverged after {} rounds", report.alpha, report.rounds);
        }
        if audit && report.violations > 0 {
            println!(
                "alpha {:.6e}: {} rounds violated audited bounds",
                report.alpha, report.violations
            );
        }
    }

    Ok(ScenarioReport {
        label: label.to_string(),
        out_dir: out_dir.to_path_buf(),
        ceiling,
        per_alpha,
        summary,
    })
}

/// Prints the mixing spectrum and the stepsize ceiling for a config.
pub fn spectrum(cfg: &RunConfig) -> Result<String, HarnessError> {
    let cfg = cfg.validated()?;
    let (_, w) = build_network(&cfg)?;
    let ceiling = match cfg.problem.kind {
        ProblemKind::QuadraticExample => {
            theory::stepsize_ceiling(&quadratic_example(cfg.problem.curvature), &w)
        }
        ProblemKind::LeastSquares => {
            let inst = generate_noisy_ls_instance::<f64>(
                cfg.problem.n,
                cfg.problem.p,
                cfg.problem.noise_sigma,
                cfg.problem.instance_seed,
            );
            theory::stepsize_ceiling(&inst.problem()?, &w)
        }
        ProblemKind::BasisPursuit => {
            let mut inst = generate_bp_instance::<f64>(
                cfg.problem.p,
                cfg.problem.q,
                cfg.problem.n,
                cfg.problem.sparsity,
                cfg.problem.gamma.unwrap_or(1.0),
                cfg.problem.instance_seed,
            )?;
            if cfg.problem.gamma.is_none() {
                let auto = inst.suggested_gamma();
                inst = inst.with_gamma(auto)?;
            }
            theory::stepsize_ceiling(&basis_pursuit_dual(inst)?, &w)
        }
    };
    let lambda_2 = w.lambda_2().map_or_else(|| "-".to_string(), |v| format!("{v:.12e}"));
    Ok(format!(
        "n = {}\nlambda_2 = {}\nlambda_n = {:.12e}\nbeta = {:.12e}\nstepsize_ceiling = {:.12e}\n",
        w.n(),
        lambda_2,
        w.lambda_n(),
        w.beta(),
        ceiling
    ))
}

/// Precomputes the oracle ground truth for a config and caches it on disk.
/// Returns a human-readable summary.
pub fn precompute_oracle(
    cfg: &RunConfig,
    out_override: Option<&Path>,
) -> Result<String, HarnessError> {
    let cfg = cfg.validated()?;
    let out_dir = out_override
        .map(Path::to_path_buf)
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    match cfg.problem.kind {
        ProblemKind::QuadraticExample => Ok("optimum is x* = 1 (closed form)\n".into()),
        ProblemKind::LeastSquares => {
            let inst = generate_noisy_ls_instance::<f64>(
                cfg.problem.n,
                cfg.problem.p,
                cfg.problem.noise_sigma,
                cfg.problem.instance_seed,
            );
            let x_star = oracle::least_squares_solve(&inst)?;
            Ok(format!("least-squares optimum: {x_star:?}\n"))
        }
        ProblemKind::BasisPursuit => {
            let mut inst = generate_bp_instance::<f64>(
                cfg.problem.p,
                cfg.problem.q,
                cfg.problem.n,
                cfg.problem.sparsity,
                cfg.problem.gamma.unwrap_or(1.0),
                cfg.problem.instance_seed,
            )?;
            if cfg.problem.gamma.is_none() {
                let auto = inst.suggested_gamma();
                inst = inst.with_gamma(auto)?;
            }
            let sol = oracle::bp_centralized_solve(&inst, cfg.output.oracle_tol)?;
            let ok = oracle::verify_gamma(&inst, &sol.y_star, 1e-3);
            let cache_dir = out_dir.join("oracle_cache");
            let key = oracle::instance_key(&inst);
            let path = oracle::store_cached(
                &cache_dir,
                &oracle::CachedSolution {
                    key: key.clone(),
                    x_star: sol.x_star.clone(),
                    y_star: Some(sol.y_star.clone()),
                    iterations: Some(sol.iterations),
                },
            )?;
            Ok(format!(
                "basis-pursuit oracle: {} iterations, relative residual {:.3e}, gamma check {}\ncached at {}\n",
                sol.iterations,
                sol.relative_residual,
                if ok { "passed" } else { "FAILED (raise gamma)" },
                path.display()
            ))
        }
    }
}
