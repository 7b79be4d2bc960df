//! Robust recovery of a latent code from rectified, outlier-corrupted
//! Gaussian measurements by a generalized LASSO.

mod nonlinearity;
pub mod quadrature;
mod restricted;
mod solver;

pub use nonlinearity::{
    mu_parameter, sigma_eta_parameters, Estimate, Method, NonlinearityStats, BIAS_NODES,
    DEFAULT_MC_SAMPLES, MC_WARN_SE,
};
pub use restricted::{
    check_restricted_lower_bound, in_restricted_set, off_support_budget, restricted_ratio,
    RestrictedReport, RestrictedSetParams,
};
pub use solver::{
    agnostic_lambda, kkt_residuals, lasso_objective, linearization_residual, oracle_lambda,
    soft_threshold, solve_robust_lasso, KktResiduals, LambdaRule, LassoConfig, LassoSolution,
    DEFAULT_MAX_ITER, DEFAULT_TOL, KKT_TOL, LAMBDA_FLOOR, RANK_TOL,
};

use crate::generative::RecoveryInstance;

/// `max{sqrt(k ln k / d), sqrt(s ln d / d)}`; `k ln k` is replaced by `k`
/// when `k = 1`.
pub fn recovery_rate(d: usize, k: usize, s: usize) -> f64 {
    let (d, k, s) = (d as f64, k as f64, s as f64);
    let k_term = if k <= 1.0 { k } else { k * k.ln() };
    (k_term / d).sqrt().max((s * d.ln() / d).sqrt())
}

/// `||mu c* - c_hat|| + ||e* - e_hat|| / sqrt(d)` and `c_tilde` times the
/// rate.
pub fn recovery_error_and_bound(
    sol: &LassoSolution,
    instance: &RecoveryInstance,
    mu: f64,
    c_tilde: f64,
) -> (f64, f64) {
    let d = instance.d();
    let code_err = (&instance.c_star * mu - &sol.c_hat).norm();
    let outlier_err = (&instance.e_star - &sol.e_hat).norm() / (d as f64).sqrt();
    let bound = c_tilde * recovery_rate(d, instance.k(), instance.s);
    (code_err + outlier_err, bound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bias::BiasSpec;
    use crate::generative::generate_recovery_instance;
    use approx::assert_relative_eq;

    #[test]
    fn rate_examples() {
        assert_relative_eq!(
            recovery_rate(1000, 10, 50),
            0.587_697_000_119_200,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            recovery_rate(1000, 10, 50).powi(2),
            50.0 * 1000f64.ln() / 1000.0
        );
        assert_relative_eq!(recovery_rate(4000, 1, 0), 0.5 * recovery_rate(1000, 1, 0));
        assert_relative_eq!(recovery_rate(100, 1, 0), 0.1);
    }

    #[test]
    fn perfect_estimate_has_zero_error() {
        let inst =
            generate_recovery_instance(50, 3, 4, 0.01, 5.0, BiasSpec::Constant(0.0), 1).unwrap();
        let sol = LassoSolution {
            c_hat: &inst.c_star * 0.5,
            e_hat: inst.e_star.clone(),
            objective_trace: vec![],
            iterations: 0,
            converged: true,
            lambda: 1.0,
            kkt: KktResiduals {
                stationarity_c: 0.0,
                subgradient_e: 0.0,
            },
        };
        let (err, bound) = recovery_error_and_bound(&sol, &inst, 0.5, 2.0);
        assert_eq!(err, 0.0);
        assert_relative_eq!(bound, 2.0 * recovery_rate(50, 3, 4));
    }

    #[test]
    fn oracle_lambda_definition() {
        let inst =
            generate_recovery_instance(1000, 5, 0, 0.01, 5.0, BiasSpec::Constant(0.0), 9).unwrap();
        let lambda = oracle_lambda(&inst, 0.5);
        let z = linearization_residual(&inst, 0.5);
        assert_relative_eq!(
            lambda * 1000.0 / 2.0,
            (z + &inst.w).amax(),
            max_relative = 1e-15
        );
        assert!(lambda > 0.0 && lambda < 0.05);
    }
}
