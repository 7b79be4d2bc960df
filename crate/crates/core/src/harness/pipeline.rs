//! End-to-end runs of each task on a single instance.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::bias::{BiasModel, BiasSpec};
use crate::error::Result;
use crate::generative::{GenerativeInstance, RecoveryInstance, RecoverySpec};
use crate::lasso::{
    check_restricted_lower_bound, recovery_error_and_bound, solve_robust_lasso, LambdaRule,
    LassoConfig, LassoSolution, Method, NonlinearityStats, RestrictedReport, RestrictedSetParams,
};
use crate::replearn::{
    procrustes_align, reconstruct_matrix, sin_theta_distance, theoretical_rep_bound, truncated_svd,
    EstimatedMatrix, FillStrategy,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepSettings {
    pub model: BiasModel,
    pub gamma: f64,
    /// Margin used by the estimator; `None` takes the instance's realized
    /// margin.
    pub nu: Option<f64>,
    pub fill: FillStrategy,
    pub c0: f64,
}

/// Scalar results of one representation-learning run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RepReport {
    pub frob_err_sq: f64,
    /// `None` when the bound is vacuous.
    pub bound: Option<f64>,
    pub sin_theta: f64,
    pub procrustes_err: f64,
    pub total_loglik: f64,
}

#[derive(Debug, Clone)]
pub struct RepOutcome {
    pub report: RepReport,
    pub nu: f64,
    pub estimate: EstimatedMatrix,
    pub u: DMatrix<f64>,
    pub u_hat: DMatrix<f64>,
    /// Leading and `k`-th singular values of the true matrix.
    pub sigma_1: f64,
    pub sigma_k: f64,
}

/// Margin handed to the estimator. Without mixed rows the realized margin
/// is infinite and constrains nothing; `2 gamma` is then the largest value
/// the constants accept.
pub fn effective_nu(realized: f64, gamma: f64) -> f64 {
    realized.min(2.0 * gamma)
}

pub fn run_representation(inst: &GenerativeInstance, settings: &RepSettings) -> Result<RepOutcome> {
    let gamma = settings.gamma;
    let nu = effective_nu(settings.nu.unwrap_or(inst.realized_nu), gamma);
    let estimate = reconstruct_matrix(&inst.y, &settings.model, gamma, nu, settings.fill)?;
    let frob_err_sq = (&inst.m - &estimate.m_hat).norm_squared();

    let constants = settings.model.constants(gamma, nu)?;
    let bound = theoretical_rep_bound(&constants, inst.d(), settings.c0).ok();

    let k = inst.k();
    let truth = truncated_svd(&inst.m, k)?;
    let learned = truncated_svd(&estimate.m_hat, k)?;
    let (_, procrustes_err) = procrustes_align(&truth.u, &learned.u)?;
    let sin_theta = sin_theta_distance(&truth.u, &learned.u)?;

    Ok(RepOutcome {
        report: RepReport {
            frob_err_sq,
            bound,
            sin_theta,
            procrustes_err,
            total_loglik: estimate.total_loglik,
        },
        nu,
        estimate,
        sigma_1: truth.singular_values[0],
        sigma_k: truth.singular_values[k - 1],
        u: truth.u,
        u_hat: learned.u,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecSettings {
    pub rule: LambdaRule,
    pub tol: f64,
    pub max_iter: usize,
    pub c_tilde: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RecReport {
    pub error: f64,
    pub bound: f64,
    pub mu: f64,
    pub sigma: f64,
    pub eta: f64,
    pub lambda_used: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct RecOutcome {
    pub report: RecReport,
    pub solution: LassoSolution,
}

pub fn run_recovery(
    inst: &RecoveryInstance,
    stats: &NonlinearityStats,
    settings: &RecSettings,
) -> Result<RecOutcome> {
    let lambda = settings.rule.resolve(inst, stats);
    let cfg = LassoConfig::new(lambda)
        .with_rule(settings.rule)
        .with_tol(settings.tol)
        .with_max_iter(settings.max_iter);
    let solution = solve_robust_lasso(&inst.v, &inst.a, &cfg)?;
    let (error, bound) =
        recovery_error_and_bound(&solution, inst, stats.mu.value, settings.c_tilde);
    Ok(RecOutcome {
        report: RecReport {
            error,
            bound,
            mu: stats.mu.value,
            sigma: stats.sigma.value,
            eta: stats.eta.value,
            lambda_used: lambda,
            iterations: solution.iterations,
            converged: solution.converged,
        },
        solution,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagReport {
    #[serde(flatten)]
    pub check: RestrictedReport,
    pub lambda_used: f64,
    pub sigma: f64,
    pub eta: f64,
    pub at_w_norm: f64,
}

/// Restricted-set check on the design, outlier support and noise of a
/// freshly generated recovery instance.
pub fn run_diagnostic(
    spec: &RecoverySpec,
    rule: LambdaRule,
    samples: usize,
    seed: u64,
) -> Result<DiagReport> {
    let inst = spec.generate(seed)?;
    let stats = NonlinearityStats::compute(&spec.bias, Method::Quadrature)?;
    let lambda = rule.resolve(&inst, &stats);
    let at_w_norm = (inst.a.transpose() * &inst.w).amax();
    let params = RestrictedSetParams {
        lambda,
        sigma: stats.sigma.value,
        eta: stats.eta.value,
        support: inst.outlier_support(),
        at_w_norm,
        c: 1.0,
    };
    let check = check_restricted_lower_bound(&inst.a, samples, &params, seed)?;
    Ok(DiagReport {
        check,
        lambda_used: lambda,
        sigma: stats.sigma.value,
        eta: stats.eta.value,
        at_w_norm,
    })
}

pub fn default_recovery_bias() -> BiasSpec {
    BiasSpec::Constant(0.0)
}
