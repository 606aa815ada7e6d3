//! Stepsize comparison: detect where each run's mean error flattens out and
//! summarize the plateau levels against the theoretical landing radius.

/// Mean-error history of one stepsize, plus its theoretical landing radius
/// when known.
#[derive(Debug, Clone)]
pub struct AlphaRun {
    pub alpha: f64,
    pub mean_errors: Vec<f64>,
    pub diverged: bool,
    pub neighborhood: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepsizeSummary {
    pub alpha: f64,
    pub diverged: bool,
    pub rounds_to_plateau: Option<usize>,
    /// Median of the final tenth of the mean-error history.
    pub plateau: Option<f64>,
    pub neighborhood: Option<f64>,
}

pub const PLATEAU_WINDOW: usize = 50;
pub const PLATEAU_REL_TOL: f64 = 1e-3;

/// First round at which the trailing window's relative spread falls under
/// the tolerance.
pub fn plateau_round(errors: &[f64], window: usize, rel_tol: f64) -> Option<usize> {
    if errors.len() < window {
        return None;
    }
    for end in window..=errors.len() {
        let slice = &errors[end - window..end];
        let max = slice.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = slice.iter().cloned().fold(f64::INFINITY, f64::min);
        if max <= 0.0 || (max - min) <= rel_tol * max {
            return Some(end - 1);
        }
    }
    None
}

/// Median of the final tenth (at least one element) of the history.
pub fn plateau_level(errors: &[f64]) -> Option<f64> {
    if errors.is_empty() {
        return None;
    }
    let tail_len = (errors.len() / 10).max(1);
    let mut tail: Vec<f64> = errors[errors.len() - tail_len..].to_vec();
    tail.sort_by(|a, b| a.partial_cmp(b).expect("finite errors"));
    let mid = tail.len() / 2;
    Some(if tail.len() % 2 == 1 { tail[mid] } else { 0.5 * (tail[mid - 1] + tail[mid]) })
}

/// One summary row per stepsize; diverged runs keep their flag and no
/// plateau statistics.
pub fn compare_stepsizes(runs: &[AlphaRun]) -> Vec<StepsizeSummary> {
    runs.iter()
        .map(|run| {
            if run.diverged {
                return StepsizeSummary {
                    alpha: run.alpha,
                    diverged: true,
                    rounds_to_plateau: None,
                    plateau: None,
                    neighborhood: run.neighborhood,
                };
            }
            StepsizeSummary {
                alpha: run.alpha,
                diverged: false,
                rounds_to_plateau: plateau_round(&run.mean_errors, PLATEAU_WINDOW, PLATEAU_REL_TOL),
                plateau: plateau_level(&run.mean_errors),
                neighborhood: run.neighborhood,
            }
        })
        .collect()
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.3e}"))
}

pub fn summary_table(rows: &[StepsizeSummary]) -> String {
    let mut out = String::from("alpha        status     rounds_to_plateau  plateau     neighborhood\n");
    for row in rows {
        let status = if row.diverged { "diverged" } else { "converged" };
        let rounds = row
            .rounds_to_plateau
            .map_or_else(|| "-".to_string(), |r| r.to_string());
        out.push_str(&format!(
            "{:<12.6e} {:<10} {:<18} {:<11} {}\n",
            row.alpha,
            status,
            rounds,
            cell(row.plateau),
            cell(row.neighborhood),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decaying_run(alpha: f64, floor: f64, n: usize) -> AlphaRun {
        let mean_errors = (0..n).map(|k| floor + 10.0 * 0.9f64.powi(k as i32)).collect();
        AlphaRun { alpha, mean_errors, diverged: false, neighborhood: Some(floor * 3.0) }
    }

    #[test]
    fn plateau_detected_after_decay_flattens() {
        let run = decaying_run(0.1, 1e-3, 400);
        let summary = compare_stepsizes(&[run]);
        let row = &summary[0];
        assert!(!row.diverged);
        let plateau = row.plateau.unwrap();
        assert!((plateau - 1e-3).abs() < 1e-4);
        assert!(row.rounds_to_plateau.unwrap() > 50);
    }

    #[test]
    fn plateau_levels_follow_the_floor() {
        let runs = vec![decaying_run(0.1, 1e-2, 400), decaying_run(0.01, 1e-3, 400)];
        let summary = compare_stepsizes(&runs);
        let hi = summary[0].plateau.unwrap();
        let lo = summary[1].plateau.unwrap();
        assert!(hi > lo);
        let ratio = hi / lo;
        assert!((2.0..=50.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn single_run_gives_one_row() {
        let summary = compare_stepsizes(&[decaying_run(0.3, 1e-4, 200)]);
        assert_eq!(summary.len(), 1);
        assert!(!summary_table(&summary).is_empty());
    }

    #[test]
    fn diverged_runs_are_marked_and_excluded_from_statistics() {
        let run = AlphaRun {
            alpha: 0.5,
            mean_errors: vec![1.0, 10.0, 100.0],
            diverged: true,
            neighborhood: None,
        };
        let summary = compare_stepsizes(&[run]);
        assert!(summary[0].diverged);
        assert_eq!(summary[0].plateau, None);
        assert!(summary_table(&summary).contains("diverged"));
    }

    #[test]
    fn short_histories_have_no_plateau_round() {
        assert_eq!(plateau_round(&[1.0; 10], 50, 1e-3), None);
        assert_eq!(plateau_level(&[]), None);
        assert_eq!(plateau_level(&[2.0]), Some(2.0));
    }
}
