//! Gradient oracles checked against central finite differences, Lipschitz
//! constants checked against sampled gradients, and the soft-threshold
//! contraction that the basis-pursuit error bound leans on.

mod common;

use common::{fd_gradient, gaussian_vec, power_iteration_top_eigenvalue, relative_error};
use dgd_core::linalg::{self, DenseMatrix};
use dgd_core::problems::{
    basis_pursuit_dual, generate_bp_instance, generate_ls_instance, quadratic_example, shrink,
    ConsensusProblem,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FD_STEP: f64 = 1e-6;
const FD_TOL: f64 = 1e-5;
const KINK_MARGIN: f64 = 1e-4;

fn fd_check_all_agents<P: ConsensusProblem<f64>>(
    prob: &P,
    points: usize,
    seed: u64,
    accept: impl Fn(&P, &[f64]) -> bool,
) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checked = 0;
    while checked < points {
        let x = gaussian_vec(&mut rng, prob.dim());
        if !accept(prob, &x) {
            continue;
        }
        for agent in 0..prob.agents() {
            let grad = prob.local_gradient(agent, &x);
            let fd = fd_gradient(|p| prob.local_value(agent, p), &x, FD_STEP);
            let err = relative_error(&grad, &fd);
            assert!(err < FD_TOL, "agent {agent}: FD mismatch {err:e} at {x:?}");
        }
        checked += 1;
    }
}

fn away_from_kinks(dual: &dgd_core::problems::BasisPursuitDual<f64>, x: &[f64]) -> bool {
    (0..dual.agents()).all(|i| {
        let z = dual.instance().blocks[i].matvec_transpose(x);
        z.iter().all(|v| (v.abs() - 1.0).abs() > KINK_MARGIN)
    })
}

#[test]
fn quadratic_gradients_match_finite_differences() {
    let prob = quadratic_example(2.5f64);
    fd_check_all_agents(&prob, 20, 11, |_, _| true);
}

#[test]
fn least_squares_gradients_match_finite_differences() {
    let prob = generate_ls_instance::<f64>(5, 3, 21).problem().unwrap();
    fd_check_all_agents(&prob, 20, 12, |_, _| true);
}

#[test]
fn bp_dual_gradients_match_finite_differences() {
    // 5 x 8 dictionary split over two agents; the dual objective is smooth
    // but only piecewise twice differentiable, so points near the threshold
    // kink are resampled.
    let inst = generate_bp_instance::<f64>(5, 8, 2, 3, 2.0, 33).unwrap();
    let dual = basis_pursuit_dual(inst).unwrap();
    fd_check_all_agents(&dual, 20, 13, away_from_kinks);
}

#[test]
fn lipschitz_constants_dominate_sampled_gradient_variation() {
    let quad = quadratic_example(1.7f64);
    let ls = generate_ls_instance::<f64>(4, 3, 5).problem().unwrap();
    let bp = basis_pursuit_dual(generate_bp_instance::<f64>(5, 10, 2, 3, 3.0, 6).unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let allowed = 1.0 + 1e-8;

    for _ in 0..1000 {
        let a1 = gaussian_vec(&mut rng, 1);
        let b1 = gaussian_vec(&mut rng, 1);
        for agent in 0..quad.agents() {
            let lhs = linalg::dist(&quad.local_gradient(agent, &a1), &quad.local_gradient(agent, &b1));
            assert!(lhs <= quad.local_lipschitz(agent) * allowed * linalg::dist(&a1, &b1));
        }

        let a3 = gaussian_vec(&mut rng, 3);
        let b3 = gaussian_vec(&mut rng, 3);
        for agent in 0..ls.agents() {
            let lhs = linalg::dist(&ls.local_gradient(agent, &a3), &ls.local_gradient(agent, &b3));
            assert!(lhs <= ls.local_lipschitz(agent) * allowed * linalg::dist(&a3, &b3));
        }

        let a5 = gaussian_vec(&mut rng, 5);
        let b5 = gaussian_vec(&mut rng, 5);
        for agent in 0..bp.agents() {
            let lhs = linalg::dist(&bp.local_gradient(agent, &a5), &bp.local_gradient(agent, &b5));
            assert!(lhs <= bp.local_lipschitz(agent) * allowed * linalg::dist(&a5, &b5));
        }
    }
}

#[test]
fn bp_dual_gradients_are_monotone() {
    // Convexity of each dual piece: (grad f_i(a) - grad f_i(b))^T (a - b) >= 0.
    let dual =
        basis_pursuit_dual(generate_bp_instance::<f64>(6, 12, 3, 3, 2.0, 41).unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..500 {
        let a = gaussian_vec(&mut rng, 6);
        let b = gaussian_vec(&mut rng, 6);
        let diff = linalg::sub(&a, &b);
        for agent in 0..dual.agents() {
            let gdiff = linalg::sub(
                &dual.local_gradient(agent, &a),
                &dual.local_gradient(agent, &b),
            );
            assert!(linalg::dot(&gdiff, &diff) >= -1e-12);
        }
    }
}

#[test]
fn shrink_is_a_contraction() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    for _ in 0..1000 {
        let a = gaussian_vec(&mut rng, 8);
        let b = gaussian_vec(&mut rng, 8);
        let sa = shrink(&a);
        let sb = shrink(&b);
        assert!(linalg::dist(&sa, &sb) <= linalg::dist(&a, &b) + 1e-15);
    }
}

#[test]
fn least_squares_lipschitz_matches_power_iteration() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let a = DenseMatrix::from_fn(3, 3, |_, _| {
            use rand::Rng;
            rng.sample::<f64, _>(rand_distr::StandardNormal)
        });
        let b = a.matvec(&[0.0, 0.0, 0.0]);
        let prob = dgd_core::problems::least_squares(vec![a.clone()], vec![b]).unwrap();
        let reference = power_iteration_top_eigenvalue(&a.gram(), 5000, 9);
        assert!(
            (prob.local_lipschitz(0) - reference).abs() < 1e-8,
            "eigensolver {} vs power iteration {}",
            prob.local_lipschitz(0),
            reference
        );
    }
}
