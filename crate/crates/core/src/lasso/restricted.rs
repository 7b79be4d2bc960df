//! Empirical check of the restricted lower bound
//! `(1/2d) ||A h + f||^2 >= (1/128) (||h|| + ||f|| / sqrt(d))^2`
//! over pairs `(h, f)` drawn from the restricted set
//! `lambda ||f_off||_1 <= 2 (C (sqrt(k) sigma + eta) / sqrt(d)
//!     + sqrt(k) ||A^T w||_inf / d) ||h|| + 3 lambda ||f_S||_1`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedSetParams {
    pub lambda: f64,
    pub sigma: f64,
    pub eta: f64,
    /// Outlier support `S`.
    pub support: Vec<usize>,
    /// `||A^T w||_inf`.
    pub at_w_norm: f64,
    /// Absolute constant in the budget; taken as 1.
    pub c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RestrictedReport {
    pub num_checked: usize,
    pub num_violations: usize,
    pub min_ratio: f64,
}

/// Ratio of the two sides; `+inf` when both vanish.
pub fn restricted_ratio(a: &DMatrix<f64>, h: &DVector<f64>, f: &DVector<f64>) -> f64 {
    let d = a.nrows() as f64;
    let lhs = (a * h + f).norm_squared() / (2.0 * d);
    let rhs = (h.norm() + f.norm() / d.sqrt()).powi(2) / 128.0;
    if rhs == 0.0 {
        f64::INFINITY
    } else {
        lhs / rhs
    }
}

/// Largest `||f_off||_1` the restricted set admits for given `||h||` and
/// `||f_S||_1`.
pub fn off_support_budget(
    params: &RestrictedSetParams,
    d: usize,
    k: usize,
    h_norm: f64,
    on_l1: f64,
) -> f64 {
    let (d, k) = (d as f64, k as f64);
    let slope = params.c * (k.sqrt() * params.sigma + params.eta) / d.sqrt()
        + k.sqrt() * params.at_w_norm / d;
    (2.0 * slope * h_norm + 3.0 * params.lambda * on_l1) / params.lambda
}

fn split_l1(x: &DVector<f64>, on: &[bool]) -> (f64, f64) {
    x.iter()
        .zip(on)
        .fold((0.0, 0.0), |(inside, outside), (v, s)| {
            if *s {
                (inside + v.abs(), outside)
            } else {
                (inside, outside + v.abs())
            }
        })
}

/// Membership in the restricted set, with relative slack for rounding.
pub fn in_restricted_set(
    params: &RestrictedSetParams,
    on: &[bool],
    h: &DVector<f64>,
    f: &DVector<f64>,
) -> bool {
    let (on_l1, off_l1) = split_l1(f, on);
    let budget = off_support_budget(params, f.len(), h.len(), h.norm(), on_l1);
    off_l1 <= budget * (1.0 + 1e-12)
}

fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Rescales `x` on the off-support coordinates so their l1 mass is `mass`.
fn set_off_mass(x: &mut DVector<f64>, on: &[bool], mass: f64) {
    let (_, current) = split_l1(x, on);
    let scale = if current > 0.0 { mass / current } else { 0.0 };
    for (v, s) in x.iter_mut().zip(on) {
        if !*s {
            *v *= scale;
        }
    }
}

fn sample_pair(
    a: &DMatrix<f64>,
    params: &RestrictedSetParams,
    on: &[bool],
    rng: &mut ChaCha8Rng,
    adversarial: bool,
) -> (DVector<f64>, DVector<f64>) {
    let (d, k) = a.shape();
    let h = gaussian_vec(rng, k) * rng.random_range(0.01..2.0);
    let mut f = if adversarial {
        -(a * &h)
    } else {
        gaussian_vec(rng, d)
    };
    let (on_l1, off_l1) = split_l1(&f, on);
    let budget = off_support_budget(params, d, k, h.norm(), on_l1);
    let mass = if adversarial {
        budget.min(off_l1)
    } else {
        budget * rng.random::<f64>()
    };
    set_off_mass(&mut f, on, mass);
    (h, f)
}

/// Samples `samples` pairs from the restricted set and counts violations.
///
/// Even-numbered samples are random: Gaussian `h` and `f_S`, random
/// off-support direction with a uniform fraction of the budget. Odd ones
/// are adversarial: `f = -A h` on `S` and as far along `-A h` off `S` as
/// the budget allows, which drives the left side down.
pub fn check_restricted_lower_bound(
    a: &DMatrix<f64>,
    samples: usize,
    params: &RestrictedSetParams,
    seed: u64,
) -> Result<RestrictedReport> {
    let d = a.nrows();
    if !(params.lambda.is_finite() && params.lambda > 0.0) {
        return Err(Error::param("lambda", "must be positive and finite"));
    }
    let mut on = vec![false; d];
    for &i in &params.support {
        if i >= d {
            return Err(Error::param(
                "support",
                format!("index {i} out of range for d = {d}"),
            ));
        }
        on[i] = true;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = RestrictedReport {
        num_checked: 0,
        num_violations: 0,
        min_ratio: f64::INFINITY,
    };
    for t in 0..samples {
        let (h, f) = sample_pair(a, params, &on, &mut rng, t % 2 == 1);
        let ratio = restricted_ratio(a, &h, &f);
        report.num_checked += 1;
        if ratio < 1.0 {
            report.num_violations += 1;
        }
        report.min_ratio = report.min_ratio.min(ratio);
    }
    Ok(report)
}
