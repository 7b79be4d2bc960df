//! Learning the column space of a low-rank matrix observed through a
//! rectifier with random per-row bias.

mod mle;
mod subspace;

pub use mle::{
    check_membership, empty_row_log_likelihood, estimate_row_bias, feasible_interval,
    log_likelihood_gap, reconstruct_matrix, row_log_likelihood, row_support, EstimatedMatrix,
    FillStrategy, RowMle, RowObservation, RowStatus, COARSE_GRID_POINTS, MEMBERSHIP_TOL,
    REFINE_WIDTH,
};
pub use subspace::{
    procrustes_align, procrustes_error_bound, sin_theta_distance, truncated_svd, TruncatedSvd,
    RANK_TOL,
};

use crate::bias::BiasConstants;
use crate::error::{Error, Result};

pub const DEFAULT_C0: f64 = 2.0;

/// Upper bound on `||M - M_hat||_F^2`: `c0 * L * gamma * d / (beta * omega)`.
pub fn theoretical_rep_bound(constants: &BiasConstants, d: usize, c0: f64) -> Result<f64> {
    if constants.beta <= 0.0 || constants.omega <= 0.0 {
        return Err(Error::VacuousBound(format!(
            "beta = {}, omega = {}",
            constants.beta, constants.omega
        )));
    }
    Ok(c0 * constants.lipschitz * constants.gamma * d as f64 / (constants.beta * constants.omega))
}
