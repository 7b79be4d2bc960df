use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Singular values below this are treated as zero when flagging rank loss.
pub const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    /// `d x k`, orthonormal columns.
    pub u: DMatrix<f64>,
    /// Leading `k` singular values, descending.
    pub singular_values: Vec<f64>,
    /// `n x k`, orthonormal columns.
    pub v: DMatrix<f64>,
    /// All singular values, descending.
    pub spectrum: Vec<f64>,
    pub rank_deficient: bool,
}

impl TruncatedSvd {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut scaled = self.u.clone();
        for (mut col, s) in scaled.column_iter_mut().zip(&self.singular_values) {
            col *= *s;
        }
        scaled * self.v.transpose()
    }
}

pub fn truncated_svd(m: &DMatrix<f64>, k: usize) -> Result<TruncatedSvd> {
    let (d, n) = m.shape();
    if k == 0 || k > d.min(n) {
        return Err(Error::param(
            "k",
            format!("must be in 1..={} for a {d} x {n} matrix", d.min(n)),
        ));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("M", "contains non-finite entries"));
    }
    let svd = m.clone().svd(true, true);
    let u_full = svd.u.expect("requested U");
    let vt_full = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let spectrum: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let u = DMatrix::from_fn(d, k, |r, c| u_full[(r, order[c])]);
    let v = DMatrix::from_fn(n, k, |r, c| vt_full[(order[c], r)]);
    let singular_values = spectrum[..k].to_vec();
    let rank_deficient = singular_values[k - 1] < RANK_TOL;
    Ok(TruncatedSvd {
        u,
        singular_values,
        v,
        spectrum,
        rank_deficient,
    })
}

fn same_shape(u: &DMatrix<f64>, u_hat: &DMatrix<f64>) -> Result<()> {
    if u.shape() != u_hat.shape() {
        return Err(Error::DimensionMismatch(format!(
            "subspace bases have shapes {:?} and {:?}",
            u.shape(),
            u_hat.shape()
        )));
    }
    Ok(())
}

/// Orthogonal `O` minimizing `||U - U_hat O||_F`, and the attained value.
pub fn procrustes_align(u: &DMatrix<f64>, u_hat: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    same_shape(u, u_hat)?;
    let svd = (u_hat.transpose() * u).svd(true, true);
    let o = svd.u.expect("requested U") * svd.v_t.expect("requested V^T");
    let err = (u - u_hat * &o).norm();
    Ok((o, err))
}

/// Frobenius norm of the sines of the principal angles between the spans.
pub fn sin_theta_distance(u: &DMatrix<f64>, u_hat: &DMatrix<f64>) -> Result<f64> {
    same_shape(u, u_hat)?;
    let overlap = (u.transpose() * u_hat).norm_squared();
    Ok((u.ncols() as f64 - overlap).max(0.0).sqrt())
}

/// Upper bound on the aligned basis error for a rank-`k` perturbation
/// problem with leading singular value `sigma_1`, `k`-th singular value
/// `sigma_k` and perturbation norm `e_frob`.
pub fn procrustes_error_bound(sigma_1: f64, sigma_k: f64, e_frob: f64) -> f64 {
    2.0_f64.powf(1.5) * (2.0 * sigma_1 + e_frob) * e_frob / (sigma_k * sigma_k)
}
