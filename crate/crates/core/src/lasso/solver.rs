use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use super::nonlinearity::NonlinearityStats;
use crate::error::{Error, Result};
use crate::generative::{relu_vector, RecoveryInstance};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 1000;
/// Stationarity residual the solver must reach before it reports
/// convergence.
pub const KKT_TOL: f64 = 1e-7;
/// Smallest singular value of `A` accepted by the solver.
pub const RANK_TOL: f64 = 1e-10;
/// Floor applied to the oracle rule when the residual vanishes.
pub const LAMBDA_FLOOR: f64 = 1e-12;

/// How the regularization weight is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaRule {
    Explicit(f64),
    /// `2 ||z + w||_inf / d`; needs ground truth.
    Oracle,
    /// `4 (sigma sqrt(2 ln 2d) + delta) / d`.
    Agnostic,
}

impl FromStr for LambdaRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "oracle" => Ok(LambdaRule::Oracle),
            "agnostic" => Ok(LambdaRule::Agnostic),
            other => match other.parse::<f64>() {
                Ok(x) if x.is_finite() && x > 0.0 => Ok(LambdaRule::Explicit(x)),
                _ => Err(Error::param(
                    "lambda",
                    format!("expected a positive number, `oracle` or `agnostic`, got `{other}`"),
                )),
            },
        }
    }
}

impl fmt::Display for LambdaRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LambdaRule::Explicit(x) => write!(f, "{x}"),
            LambdaRule::Oracle => f.write_str("oracle"),
            LambdaRule::Agnostic => f.write_str("agnostic"),
        }
    }
}

impl LambdaRule {
    pub fn resolve(&self, instance: &RecoveryInstance, stats: &NonlinearityStats) -> f64 {
        match *self {
            LambdaRule::Explicit(x) => x,
            LambdaRule::Oracle => oracle_lambda(instance, stats.mu.value),
            LambdaRule::Agnostic => {
                agnostic_lambda(instance.d(), stats.sigma.value, instance.delta)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoConfig {
    pub lambda: f64,
    pub rule: LambdaRule,
    pub tol: f64,
    pub max_iter: usize,
}

impl LassoConfig {
    pub fn new(lambda: f64) -> Self {
        Self {
            lambda,
            rule: LambdaRule::Explicit(lambda),
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }

    pub fn with_rule(mut self, rule: LambdaRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::param("lambda", "must be positive and finite"));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::param("tol", "must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::param("max_iter", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoSolution {
    pub c_hat: DVector<f64>,
    pub e_hat: DVector<f64>,
    /// Objective after each full sweep, starting with the initial point.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub lambda: f64,
    pub kkt: KktResiduals,
}

/// Violations of the optimality conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals {
    /// `||(1/d) A^T (A c + e - v)||_inf`.
    pub stationarity_c: f64,
    /// Largest deviation of the scaled residual from the subgradient of
    /// `lambda ||e||_1`.
    pub subgradient_e: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity_c.max(self.subgradient_e)
    }
}

pub fn soft_threshold(x: &DVector<f64>, tau: f64) -> DVector<f64> {
    x.map(|v| v.signum() * (v.abs() - tau).max(0.0))
}

fn check_shapes(
    v: &DVector<f64>,
    a: &DMatrix<f64>,
    c: &DVector<f64>,
    e: &DVector<f64>,
) -> Result<()> {
    let (d, k) = a.shape();
    if v.len() != d || e.len() != d || c.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "A is {d} x {k}, but v, c, e have lengths {}, {}, {}",
            v.len(),
            c.len(),
            e.len()
        )));
    }
    Ok(())
}

/// `(1/2d) ||v - A c - e||^2 + lambda ||e||_1`.
pub fn lasso_objective(
    v: &DVector<f64>,
    a: &DMatrix<f64>,
    c: &DVector<f64>,
    e: &DVector<f64>,
    lambda: f64,
) -> Result<f64> {
    check_shapes(v, a, c, e)?;
    let residual = v - a * c - e;
    Ok(residual.norm_squared() / (2.0 * v.len() as f64) + lambda * e.lp_norm(1))
}

pub fn kkt_residuals(
    v: &DVector<f64>,
    a: &DMatrix<f64>,
    c: &DVector<f64>,
    e: &DVector<f64>,
    lambda: f64,
) -> Result<KktResiduals> {
    check_shapes(v, a, c, e)?;
    let d = v.len() as f64;
    let residual = v - a * c - e;
    let stationarity_c = (a.transpose() * &residual).amax() / d;
    let subgradient_e = residual
        .iter()
        .zip(e.iter())
        .map(|(r, ei)| {
            let scaled = r / d;
            if *ei != 0.0 {
                (scaled - lambda * ei.signum()).abs()
            } else {
                (scaled.abs() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max);
    Ok(KktResiduals {
        stationarity_c,
        subgradient_e,
    })
}

/// Block coordinate descent on the robust LASSO objective.
///
/// Alternates an exact least-squares update of `c` (through a QR
/// factorization of `A` computed once) with the exact proximal update of
/// `e`, until the relative objective change drops below `tol` and the
/// stationarity residual below [`KKT_TOL`].
pub fn solve_robust_lasso(
    v: &DVector<f64>,
    a: &DMatrix<f64>,
    cfg: &LassoConfig,
) -> Result<LassoSolution> {
    cfg.validate()?;
    let (d, k) = a.shape();
    if d <= k {
        return Err(Error::param(
            "A",
            format!("needs more rows than columns, got {d} x {k}"),
        ));
    }
    if v.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "v has length {} but A has {d} rows",
            v.len()
        )));
    }
    let qr = a.clone().qr();
    let (q, r) = (qr.q(), qr.r());
    let smallest = r.singular_values().min();
    if !(smallest > RANK_TOL) {
        return Err(Error::RankDeficient { smallest });
    }
    let least_squares = |target: &DVector<f64>| -> DVector<f64> {
        r.solve_upper_triangular(&(q.transpose() * target))
            .expect("R has full rank")
    };

    let threshold = d as f64 * cfg.lambda;
    let mut e = DVector::zeros(d);
    let mut c = DVector::zeros(k);
    let mut trace = vec![lasso_objective(v, a, &c, &e, cfg.lambda)?];
    let mut converged = false;
    let mut iterations = 0;
    let mut kkt = kkt_residuals(v, a, &c, &e, cfg.lambda)?;

    while iterations < cfg.max_iter {
        iterations += 1;
        c = least_squares(&(v - &e));
        e = soft_threshold(&(v - a * &c), threshold);
        let current = lasso_objective(v, a, &c, &e, cfg.lambda)?;
        let previous = *trace.last().expect("trace starts nonempty");
        trace.push(current);
        kkt = kkt_residuals(v, a, &c, &e, cfg.lambda)?;
        let change = (previous - current).abs();
        if change <= cfg.tol * previous.abs().max(f64::MIN_POSITIVE) && kkt.max() <= KKT_TOL {
            converged = true;
            break;
        }
    }

    Ok(LassoSolution {
        c_hat: c,
        e_hat: e,
        objective_trace: trace,
        iterations,
        converged,
        lambda: cfg.lambda,
        kkt,
    })
}

/// Residual of the linearized model at the truth: `ReLU(A c* + b) - mu A c*`.
pub fn linearization_residual(instance: &RecoveryInstance, mu: f64) -> DVector<f64> {
    let signal = &instance.a * &instance.c_star;
    relu_vector(&(&signal + &instance.b)) - signal * mu
}

/// `2 ||z + w||_inf / d`, floored at [`LAMBDA_FLOOR`].
pub fn oracle_lambda(instance: &RecoveryInstance, mu: f64) -> f64 {
    let z = linearization_residual(instance, mu);
    let value = 2.0 * (z + &instance.w).amax() / instance.d() as f64;
    value.max(LAMBDA_FLOOR)
}

/// Ground-truth-free choice `4 (sigma sqrt(2 ln 2d) + delta) / d`.
pub fn agnostic_lambda(d: usize, sigma: f64, delta: f64) -> f64 {
    let d = d as f64;
    4.0 * (sigma * (2.0 * (2.0 * d).ln()).sqrt() + delta) / d
}
