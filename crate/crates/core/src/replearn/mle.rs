//! Constrained maximum-likelihood estimate of the pre-activation matrix.
//!
//! For a row with at least one positive observation the likelihood depends
//! on the candidate matrix only through the common shift `beta` between the
//! observed entries and their reconstruction, so the matrix program splits
//! into `d` one-dimensional problems over a closed interval of admissible
//! shifts. Censored entries do not enter the likelihood at all; they are
//! filled inside their admissible range by a [`FillStrategy`].

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::bias::{BiasKind, BiasModel, Extended};
use crate::error::{Error, Result};

/// Points in the coarse scan that precedes golden-section refinement.
pub const COARSE_GRID_POINTS: usize = 1_000;
/// Final bracket width of the golden-section refinement.
pub const REFINE_WIDTH: f64 = 1e-10;
/// Slack used when checking membership in the feasible set.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// Positive part of one observed row.
#[derive(Debug, Clone, PartialEq)]
pub struct RowObservation {
    pub index: usize,
    /// Columns with a strictly positive observation, ascending.
    pub support: Vec<usize>,
    /// Observed values on the support, sorted descending.
    pub positive_values: Vec<f64>,
    /// Column of the smallest positive observation.
    pub argmin_column: Option<usize>,
    pub len: usize,
}

impl RowObservation {
    pub fn s(&self) -> usize {
        self.support.len()
    }

    pub fn y_min_pos(&self) -> Option<f64> {
        self.positive_values.last().copied()
    }

    pub fn y_max(&self) -> Option<f64> {
        self.positive_values.first().copied()
    }

    pub fn is_fully_observed(&self) -> bool {
        self.s() == self.len
    }
}

pub fn row_support(y_row: &[f64], index: usize) -> Result<RowObservation> {
    let mut support = Vec::new();
    let mut argmin: Option<usize> = None;
    for (j, &y) in y_row.iter().enumerate() {
        if !(y >= 0.0) || !y.is_finite() {
            return Err(Error::param(
                "Y",
                format!("entry ({index}, {j}) = {y} is not a finite nonnegative number"),
            ));
        }
        if y > 0.0 {
            support.push(j);
            if argmin.is_none_or(|a| y < y_row[a]) {
                argmin = Some(j);
            }
        }
    }
    let mut positive_values: Vec<f64> = support.iter().map(|&j| y_row[j]).collect();
    positive_values.sort_by(|a, b| b.total_cmp(a));
    Ok(RowObservation {
        index,
        support,
        positive_values,
        argmin_column: argmin,
        len: y_row.len(),
    })
}

fn matrix_row(m: &DMatrix<f64>, i: usize) -> Vec<f64> {
    m.row(i).iter().copied().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowStatus {
    Interior,
    Boundary,
    EmptySupportRow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowMle {
    pub beta_hat: f64,
    pub feasible_interval: (f64, f64),
    pub loglik: f64,
    pub status: RowStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FillStrategy {
    UpperBoundary,
    LowerBoundary,
    #[default]
    Midpoint,
}

impl FromStr for FillStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "upper" | "upper_boundary" => Ok(FillStrategy::UpperBoundary),
            "lower" | "lower_boundary" => Ok(FillStrategy::LowerBoundary),
            "mid" | "midpoint" => Ok(FillStrategy::Midpoint),
            other => Err(Error::param(
                "fill",
                format!("expected upper, lower or mid, got `{other}`"),
            )),
        }
    }
}

impl fmt::Display for FillStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FillStrategy::UpperBoundary => "upper",
            FillStrategy::LowerBoundary => "lower",
            FillStrategy::Midpoint => "mid",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatedMatrix {
    pub m_hat: DMatrix<f64>,
    /// Estimated bias per row; `None` for rows without positive entries.
    pub beta_hats: Vec<Option<f64>>,
    pub row_status: Vec<RowStatus>,
    pub fill_strategy: FillStrategy,
    pub total_loglik: f64,
    pub gamma: f64,
    pub nu: f64,
}

/// Closed interval of shifts `beta` that keep a row inside the feasible set.
pub fn feasible_interval(row: &RowObservation, gamma: f64, nu: f64) -> Option<(f64, f64)> {
    let (y_max, y_min) = (row.y_max()?, row.y_min_pos()?);
    let lo = y_max - gamma;
    let mut hi = y_min + gamma;
    if !row.is_fully_observed() {
        hi = hi.min(y_min + gamma - nu);
    }
    Some((lo, hi))
}

fn ln_density(model: &BiasModel, x: f64) -> f64 {
    model.density(x).ln()
}

/// `log F(inf, x)`, the log-probability that a row with peak `x` stays
/// fully censored.
fn ln_censor_prob(model: &BiasModel, x: f64) -> f64 {
    model
        .interval_probability(Extended::PosInf, Extended::Finite(x))
        .expect("+inf >= any finite x")
        .ln()
}

/// Normalized log-likelihood term of a row with positive entries, for
/// candidate shift `beta`: `log p(beta) - log p(Y_(s))`. `-inf` when the
/// density vanishes at `beta`.
pub fn row_log_likelihood(
    row: &RowObservation,
    beta: f64,
    model: &BiasModel,
    gamma: f64,
    nu: f64,
) -> Result<f64> {
    let (lo, hi) = feasible_interval(row, gamma, nu).ok_or_else(|| {
        Error::param(
            "row",
            "row has no positive entries; use empty_row_log_likelihood",
        )
    })?;
    if !(beta >= lo - MEMBERSHIP_TOL && beta <= hi + MEMBERSHIP_TOL) {
        return Err(Error::Infeasible {
            matrix: "beta",
            row: row.index,
            reason: format!("{beta} outside [{lo}, {hi}]"),
        });
    }
    let reference = row.y_min_pos().expect("nonempty support");
    let ln_ref = ln_density(model, reference);
    if !ln_ref.is_finite() {
        return Err(Error::param(
            "bias",
            format!(
                "density vanishes at Y_(s) = {reference} in row {}; normalized likelihood undefined",
                row.index
            ),
        ));
    }
    Ok(ln_density(model, beta) - ln_ref)
}

/// Normalized term of a fully censored row whose reconstruction peaks at
/// `x_star`: `log F(inf, x*) - log F(inf, 0)`.
pub fn empty_row_log_likelihood(x_star: f64, model: &BiasModel) -> Result<f64> {
    let reference = ln_censor_prob(model, 0.0);
    if !reference.is_finite() {
        return Err(Error::param(
            "bias",
            "P(B <= 0) = 0; normalized likelihood of censored rows undefined",
        ));
    }
    Ok(ln_censor_prob(model, x_star) - reference)
}

/// Left edge of the density support, if finite.
fn support_edge(model: &BiasModel) -> Option<f64> {
    match model.kind() {
        BiasKind::ShiftedExponential { shift, .. } => Some(shift),
        _ => None,
    }
}

/// Golden-section search for a maximum of `f` on `[a, b]`.
fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, width: f64) -> f64 {
    let ratio = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - ratio * (b - a);
    let mut x2 = a + ratio * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > width {
        // `>=` keeps the left bracket on ties, favouring smaller beta
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - ratio * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + ratio * (b - a);
            f2 = f(x2);
        }
        if x1 == x2 {
            break;
        }
    }
    0.5 * (a + b)
}

/// The log-density is flat to machine precision within about `1e-8` of a
/// smooth mode, so golden-section search alone cannot locate it more
/// closely. Bisecting on the sign of `p'` near `beta` fixes that; the input
/// is returned unchanged when no sign change brackets it.
fn polish_stationary(model: &BiasModel, beta: f64, lo: f64, hi: f64) -> f64 {
    let slope = |x: f64| model.density_and_derivative(x).1;
    let (mut a, mut b) = ((beta - 1e-6).max(lo), (beta + 1e-6).min(hi));
    if !(slope(a) > 0.0 && slope(b) < 0.0) {
        return beta;
    }
    for _ in 0..100 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if slope(mid) > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

/// Maximizes `log p(beta)` over the row's feasible interval.
pub fn estimate_row_bias(
    row: &RowObservation,
    model: &BiasModel,
    gamma: f64,
    nu: f64,
) -> Result<RowMle> {
    let (lo, hi) = feasible_interval(row, gamma, nu).ok_or_else(|| {
        Error::param("row", "estimate_row_bias needs at least one positive entry")
    })?;
    if !(lo <= hi) {
        return Err(Error::InfeasibleRow {
            row: row.index,
            lo,
            hi,
        });
    }
    let objective = |beta: f64| ln_density(model, beta);

    // (value, beta); strict improvement only, so ties keep the smaller beta
    let mut best = (objective(lo), lo);
    let consider = |beta: f64, best: &mut (f64, f64)| {
        let value = objective(beta);
        if value > best.0 || (value == best.0 && beta < best.1) {
            *best = (value, beta);
        }
    };

    if hi > lo {
        let step = (hi - lo) / COARSE_GRID_POINTS as f64;
        let mut best_idx = 0;
        for idx in 1..=COARSE_GRID_POINTS {
            let beta = if idx == COARSE_GRID_POINTS {
                hi
            } else {
                lo + step * idx as f64
            };
            let before = best.1;
            consider(beta, &mut best);
            if best.1 != before {
                best_idx = idx;
            }
        }
        if best.0 == f64::NEG_INFINITY {
            return Err(Error::ZeroLikelihood {
                row: row.index,
                lo,
                hi,
            });
        }
        let a = (lo + step * best_idx.saturating_sub(1) as f64).max(lo);
        let b = (lo + step * (best_idx + 1) as f64).min(hi);
        let refined = golden_max(objective, a, b, REFINE_WIDTH);
        consider(polish_stationary(model, refined, lo, hi), &mut best);
        if let Some(edge) = support_edge(model) {
            if (lo..=hi).contains(&edge) {
                consider(edge, &mut best);
            }
        }
    } else if best.0 == f64::NEG_INFINITY {
        return Err(Error::ZeroLikelihood {
            row: row.index,
            lo,
            hi,
        });
    }

    let beta_hat = best.1;
    let on_edge = |x: f64| (beta_hat - x).abs() <= MEMBERSHIP_TOL;
    let status = if on_edge(lo) || on_edge(hi) || support_edge(model).is_some_and(on_edge) {
        RowStatus::Boundary
    } else {
        RowStatus::Interior
    };
    Ok(RowMle {
        beta_hat,
        feasible_interval: (lo, hi),
        loglik: row_log_likelihood(row, beta_hat, model, gamma, nu)?,
        status,
    })
}

fn fill_value(strategy: FillStrategy, gamma: f64, upper: f64) -> f64 {
    let upper = upper.max(-gamma);
    match strategy {
        FillStrategy::UpperBoundary => upper,
        FillStrategy::LowerBoundary => -gamma,
        FillStrategy::Midpoint => 0.5 * (upper - gamma),
    }
}

/// Solves the constrained likelihood program row by row and assembles the
/// estimate. Fully censored rows are set to `-gamma`, the maximizer of
/// their censoring probability.
pub fn reconstruct_matrix(
    y: &DMatrix<f64>,
    model: &BiasModel,
    gamma: f64,
    nu: f64,
    fill: FillStrategy,
) -> Result<EstimatedMatrix> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::param("gamma", "must be positive and finite"));
    }
    if !(nu > 0.0) {
        return Err(Error::param("nu", "must be positive"));
    }
    let (d, n) = y.shape();
    let mut m_hat = DMatrix::zeros(d, n);
    let mut beta_hats = Vec::with_capacity(d);
    let mut row_status = Vec::with_capacity(d);
    let mut total_loglik = 0.0;

    for i in 0..d {
        let y_row = matrix_row(y, i);
        let row = row_support(&y_row, i)?;
        if row.s() == 0 {
            m_hat.row_mut(i).fill(-gamma);
            total_loglik += empty_row_log_likelihood(-gamma, model)?;
            beta_hats.push(None);
            row_status.push(RowStatus::EmptySupportRow);
            continue;
        }
        let mle = estimate_row_bias(&row, model, gamma, nu)?;
        let beta = mle.beta_hat;
        let lowest = row.y_min_pos().expect("nonempty support") - beta;
        let off = fill_value(fill, gamma, lowest - nu);
        for j in 0..n {
            m_hat[(i, j)] = if y_row[j] > 0.0 { y_row[j] - beta } else { off };
        }
        total_loglik += mle.loglik;
        beta_hats.push(Some(beta));
        row_status.push(mle.status);
    }

    check_membership(&m_hat, y, gamma, nu, "M_hat").map_err(|e| {
        Error::DegenerateInstance(format!("internal consistency check failed: {e}"))
    })?;

    Ok(EstimatedMatrix {
        m_hat,
        beta_hats,
        row_status,
        fill_strategy: fill,
        total_loglik,
        gamma,
        nu,
    })
}

/// Verifies that `x` lies in the feasible set defined by `y`, `gamma` and
/// `nu`, up to [`MEMBERSHIP_TOL`].
pub fn check_membership(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    gamma: f64,
    nu: f64,
    name: &'static str,
) -> Result<()> {
    if x.shape() != y.shape() {
        return Err(Error::DimensionMismatch(format!(
            "{name} is {:?} but Y is {:?}",
            x.shape(),
            y.shape()
        )));
    }
    let fail = |row: usize, reason: String| Error::Infeasible {
        matrix: name,
        row,
        reason,
    };
    for i in 0..x.nrows() {
        let mut shift: Option<f64> = None;
        let mut lowest_on = f64::INFINITY;
        let mut highest_off = f64::NEG_INFINITY;
        for j in 0..x.ncols() {
            let v = x[(i, j)];
            if !(v.abs() <= gamma + MEMBERSHIP_TOL) {
                return Err(fail(
                    i,
                    format!("|{v}| exceeds gamma = {gamma} at column {j}"),
                ));
            }
            if y[(i, j)] > 0.0 {
                let here = y[(i, j)] - v;
                match shift {
                    None => shift = Some(here),
                    Some(s) if (s - here).abs() > MEMBERSHIP_TOL * (1.0 + s.abs()) => {
                        return Err(fail(
                            i,
                            format!("observed entries imply shifts {s} and {here}"),
                        ));
                    }
                    _ => {}
                }
                lowest_on = lowest_on.min(v);
            } else {
                highest_off = highest_off.max(v);
            }
        }
        if lowest_on.is_finite()
            && highest_off.is_finite()
            && lowest_on < highest_off + nu - MEMBERSHIP_TOL
        {
            return Err(fail(
                i,
                format!(
                    "margin {} between observed and censored entries is below nu = {nu}",
                    lowest_on - highest_off
                ),
            ));
        }
    }
    Ok(())
}

/// Unnormalized log-likelihood of one row of candidate `x`.
fn row_term(x: &DMatrix<f64>, row: &RowObservation, model: &BiasModel) -> f64 {
    match row.argmin_column {
        Some(j) => ln_density(model, row.y_min_pos().expect("support") - x[(row.index, j)]),
        None => ln_censor_prob(model, x.row(row.index).max()),
    }
}

/// `Lbar_Y(M) - Lbar_Y(X)` for two members of the feasible set.
pub fn log_likelihood_gap(
    m: &DMatrix<f64>,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    model: &BiasModel,
    gamma: f64,
    nu: f64,
) -> Result<f64> {
    check_membership(m, y, gamma, nu, "M")?;
    check_membership(x, y, gamma, nu, "X")?;
    let mut gap = 0.0;
    for i in 0..y.nrows() {
        let row = row_support(&matrix_row(y, i), i)?;
        let (lm, lx) = (row_term(m, &row, model), row_term(x, &row, model));
        // equal infinities carry no information about the difference
        if lm != lx {
            gap += lm - lx;
        }
    }
    Ok(gap)
}
