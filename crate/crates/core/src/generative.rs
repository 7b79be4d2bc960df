//! Synthetic single-layer ReLU instances for both problems.
//!
//! Each random ingredient is drawn from its own ChaCha stream of the seeded
//! generator, so the outlier pattern never shares randomness with `A`, and
//! changing `gamma` leaves the Gaussian draws untouched.

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::bias::{BiasModel, BiasSpec};
use crate::error::{Error, Result};

const STREAM_WEIGHTS: u64 = 1;
const STREAM_CODES: u64 = 2;
const STREAM_BIAS: u64 = 3;
const STREAM_SIGNAL: u64 = 4;
const STREAM_OUTLIER_SUPPORT: u64 = 5;
const STREAM_OUTLIER_SIGN: u64 = 6;
const STREAM_NOISE: u64 = 7;

/// Maximum bias redraws per row when a target margin is enforced.
pub const MAX_MARGIN_RETRIES: usize = 100;

pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

pub fn relu_matrix(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.map(relu)
}

pub fn relu_vector(x: &DVector<f64>) -> DVector<f64> {
    x.map(relu)
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn gaussian_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    // filled column-major, matching nalgebra storage
    DMatrix::from_iterator(
        rows,
        cols,
        (0..rows * cols).map(|_| StandardNormal.sample(rng)),
    )
}

/// Ground truth and observation for the representation-learning problem.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerativeInstance {
    pub a: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub b: DVector<f64>,
    pub m: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub gamma: f64,
    /// Smallest gap between the lowest uncensored and the highest censored
    /// pre-activation, over rows that have both. `+inf` when no row is
    /// mixed; no constraint then depends on it.
    pub realized_nu: f64,
    pub bias: BiasModel,
    pub seed: u64,
}

impl GenerativeInstance {
    pub fn d(&self) -> usize {
        self.m.nrows()
    }

    pub fn n(&self) -> usize {
        self.m.ncols()
    }

    pub fn k(&self) -> usize {
        self.a.ncols()
    }
}

/// Gap `min_{Y>0} M - max_{Y=0} M` for one row, or `None` when the row is
/// entirely censored or entirely observed.
pub fn row_margin<'a>(
    m_row: impl IntoIterator<Item = &'a f64>,
    y_row: impl IntoIterator<Item = &'a f64>,
) -> Option<f64> {
    let mut lowest_on = f64::INFINITY;
    let mut highest_off = f64::NEG_INFINITY;
    for (&m, &y) in m_row.into_iter().zip(y_row) {
        if y > 0.0 {
            lowest_on = lowest_on.min(m);
        } else {
            highest_off = highest_off.max(m);
        }
    }
    (lowest_on.is_finite() && highest_off.is_finite()).then(|| lowest_on - highest_off)
}

/// Parameters of a representation-learning instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepresentationSpec {
    pub d: usize,
    pub n: usize,
    pub k: usize,
    pub gamma: f64,
    pub bias: BiasModel,
    /// When set, rows whose margin falls below this value get their bias
    /// redrawn (at most [`MAX_MARGIN_RETRIES`] times).
    pub target_nu: Option<f64>,
}

impl RepresentationSpec {
    pub fn new(d: usize, n: usize, k: usize, gamma: f64, bias: BiasModel) -> Self {
        Self {
            d,
            n,
            k,
            gamma,
            bias,
            target_nu: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.d == 0 || self.n == 0 || self.k == 0 {
            return Err(Error::param("d, n, k", "must be positive"));
        }
        if self.k > self.d.min(self.n) {
            return Err(Error::param(
                "k",
                format!("must not exceed min(d, n) = {}", self.d.min(self.n)),
            ));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::param("gamma", "must be positive and finite"));
        }
        if let Some(nu) = self.target_nu {
            if !(nu.is_finite() && nu > 0.0) {
                return Err(Error::param("target_nu", "must be positive and finite"));
            }
        }
        Ok(())
    }

    pub fn generate(&self, seed: u64) -> Result<GenerativeInstance> {
        self.validate()?;
        let (d, n, k, gamma) = (self.d, self.n, self.k, self.gamma);

        let a = gaussian_matrix(&mut stream(seed, STREAM_WEIGHTS), d, k);
        let c_raw = gaussian_matrix(&mut stream(seed, STREAM_CODES), k, n);
        let raw = &a * &c_raw;
        let peak = raw.amax();
        if peak == 0.0 {
            return Err(Error::DegenerateInstance("AC is identically zero".into()));
        }
        let scale = gamma / peak;
        let c = c_raw * scale;
        // clamping absorbs the last-ulp rounding of the peak entry
        let m = (raw * scale).map(|x| x.clamp(-gamma, gamma));

        let mut bias_rng = stream(seed, STREAM_BIAS);
        let mut b = DVector::from_vec(self.bias.sample_with(&mut bias_rng, d));
        let mut y = DMatrix::zeros(d, n);
        let mut realized_nu = f64::INFINITY;
        for i in 0..d {
            let mut attempts = 0;
            loop {
                for j in 0..n {
                    y[(i, j)] = relu(m[(i, j)] + b[i]);
                }
                let margin = row_margin(m.row(i).iter(), y.row(i).iter());
                match (margin, self.target_nu) {
                    (Some(g), Some(target)) if g < target => {
                        attempts += 1;
                        if attempts > MAX_MARGIN_RETRIES {
                            return Err(Error::DegenerateInstance(format!(
                                "row {i}: margin {g} below target {target} after \
                                 {MAX_MARGIN_RETRIES} bias redraws"
                            )));
                        }
                        b[i] = self.bias.draw(&mut bias_rng);
                    }
                    (Some(g), _) => {
                        realized_nu = realized_nu.min(g);
                        break;
                    }
                    (None, _) => break,
                }
            }
        }
        Ok(GenerativeInstance {
            a,
            c,
            b,
            m,
            y,
            gamma,
            realized_nu,
            bias: self.bias,
            seed,
        })
    }
}

pub fn generate_representation_instance(
    d: usize,
    n: usize,
    k: usize,
    gamma: f64,
    bias: &BiasModel,
    seed: u64,
) -> Result<GenerativeInstance> {
    RepresentationSpec::new(d, n, k, gamma, *bias).generate(seed)
}

/// Ground truth and corrupted observation for the robust-recovery problem.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryInstance {
    pub a: DMatrix<f64>,
    pub c_star: DVector<f64>,
    pub b: DVector<f64>,
    pub e_star: DVector<f64>,
    pub w: DVector<f64>,
    pub v: DVector<f64>,
    pub s: usize,
    pub delta: f64,
    pub bias: BiasSpec,
    pub seed: u64,
}

impl RecoveryInstance {
    pub fn d(&self) -> usize {
        self.a.nrows()
    }

    pub fn k(&self) -> usize {
        self.a.ncols()
    }

    pub fn outlier_support(&self) -> Vec<usize> {
        (0..self.d()).filter(|&i| self.e_star[i] != 0.0).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoverySpec {
    pub d: usize,
    pub k: usize,
    pub s: usize,
    pub delta: f64,
    pub outlier_magnitude: f64,
    pub bias: BiasSpec,
}

pub const DEFAULT_OUTLIER_MAGNITUDE: f64 = 5.0;

impl RecoverySpec {
    pub fn new(d: usize, k: usize, s: usize, delta: f64, bias: BiasSpec) -> Self {
        Self {
            d,
            k,
            s,
            delta,
            outlier_magnitude: DEFAULT_OUTLIER_MAGNITUDE,
            bias,
        }
    }

    pub fn with_outlier_magnitude(mut self, magnitude: f64) -> Self {
        self.outlier_magnitude = magnitude;
        self
    }

    pub fn generate(&self, seed: u64) -> Result<RecoveryInstance> {
        let (d, k, s) = (self.d, self.k, self.s);
        if d == 0 || k == 0 {
            return Err(Error::param("d, k", "must be positive"));
        }
        if k > d {
            return Err(Error::param("k", format!("must not exceed d = {d}")));
        }
        if s > d {
            return Err(Error::param("s", format!("must not exceed d = {d}")));
        }
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(Error::param("delta", "must be nonnegative and finite"));
        }
        if !(self.outlier_magnitude.is_finite() && self.outlier_magnitude > 0.0) {
            return Err(Error::param(
                "outlier_magnitude",
                "must be positive and finite",
            ));
        }

        let a = gaussian_matrix(&mut stream(seed, STREAM_WEIGHTS), d, k);

        let mut signal_rng = stream(seed, STREAM_SIGNAL);
        let c_star = loop {
            let g: DVector<f64> =
                DVector::from_iterator(k, (0..k).map(|_| StandardNormal.sample(&mut signal_rng)));
            let norm = g.norm();
            if norm > 0.0 {
                break g / norm;
            }
        };

        let b = match self.bias {
            BiasSpec::Constant(b0) => DVector::from_element(d, b0),
            BiasSpec::Random(model) => {
                DVector::from_vec(model.sample_with(&mut stream(seed, STREAM_BIAS), d))
            }
        };

        let mut e_star = DVector::zeros(d);
        let support = index::sample(&mut stream(seed, STREAM_OUTLIER_SUPPORT), d, s);
        let mut sign_rng = stream(seed, STREAM_OUTLIER_SIGN);
        for i in support.iter() {
            let sign = if sign_rng.random_bool(0.5) { 1.0 } else { -1.0 };
            e_star[i] = sign * self.outlier_magnitude;
        }

        let w = if self.delta > 0.0 {
            let u = Uniform::new_inclusive(-self.delta, self.delta).expect("delta > 0");
            let mut noise_rng = stream(seed, STREAM_NOISE);
            DVector::from_iterator(d, (0..d).map(|_| u.sample(&mut noise_rng)))
        } else {
            DVector::zeros(d)
        };

        let v = relu_vector(&(&a * &c_star + &b)) + &e_star + &w;

        Ok(RecoveryInstance {
            a,
            c_star,
            b,
            e_star,
            w,
            v,
            s,
            delta: self.delta,
            bias: self.bias,
            seed,
        })
    }
}

#[allow(clippy::too_many_arguments)]
pub fn generate_recovery_instance(
    d: usize,
    k: usize,
    s: usize,
    delta: f64,
    outlier_magnitude: f64,
    bias: BiasSpec,
    seed: u64,
) -> Result<RecoveryInstance> {
    RecoverySpec::new(d, k, s, delta, bias)
        .with_outlier_magnitude(outlier_magnitude)
        .generate(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_default() -> BiasModel {
        BiasModel::default_for_gamma(1.0)
    }

    #[test]
    fn relu_examples() {
        assert_eq!(relu(-1.0), 0.0);
        assert_eq!(relu(2.5), 2.5);
        let x = DMatrix::from_row_slice(2, 2, &[-3.0, 0.5, 0.0, 7.0]);
        assert_eq!(
            relu_matrix(&x),
            DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.0, 7.0])
        );
    }

    fn rank(m: &DMatrix<f64>) -> usize {
        let sv = m.clone().svd(false, false).singular_values;
        let top = sv.max();
        sv.iter().filter(|&&s| s > 1e-10 * top).count()
    }

    #[test]
    fn small_instance_has_expected_shape() {
        let inst = generate_representation_instance(4, 6, 2, 1.0, &exp_default(), 1).unwrap();
        assert_eq!(rank(&inst.m), 2);
        assert_eq!(inst.m.amax(), 1.0);
        let again = generate_representation_instance(4, 6, 2, 1.0, &exp_default(), 1).unwrap();
        assert_eq!(inst, again);
    }

    #[test]
    fn instance_invariants_hold() {
        for seed in 0..10 {
            let inst =
                generate_representation_instance(30, 40, 3, 1.0, &exp_default(), seed).unwrap();
            assert!(inst.m.amax() <= inst.gamma);
            assert!(rank(&inst.m) <= 3);
            assert_eq!(
                relu_matrix(&(&inst.m + &inst.b * DVector::from_element(40, 1.0).transpose())),
                inst.y
            );
            for i in 0..inst.d() {
                for j in 0..inst.n() {
                    let on = inst.y[(i, j)] > 0.0;
                    assert_eq!(on, inst.m[(i, j)] + inst.b[i] > 0.0);
                    if on {
                        assert!((inst.y[(i, j)] - inst.m[(i, j)] - inst.b[i]).abs() < 1e-14);
                    }
                }
                if let Some(g) = row_margin(inst.m.row(i).iter(), inst.y.row(i).iter()) {
                    assert!(g >= inst.realized_nu);
                }
            }
            assert!(inst.realized_nu > 0.0);
        }
    }

    #[test]
    fn positive_fraction_is_nondegenerate() {
        let mut total = 0.0;
        for seed in 0..20 {
            let inst = generate_representation_instance(50, 100, 5, 1.0, &exp_default(), 3 + seed)
                .unwrap();
            let frac = inst.y.iter().filter(|&&v| v > 0.0).count() as f64 / 5000.0;
            assert!((0.01..=0.99).contains(&frac), "seed {seed}: {frac}");
            total += frac;
        }
        // P(B > -M) with M typically near zero is about e^{-2}
        let mean = total / 20.0;
        assert!((0.05..0.4).contains(&mean), "{mean}");
    }

    #[test]
    fn gamma_scales_pre_activations_exactly() {
        let bias = exp_default();
        let one = generate_representation_instance(20, 25, 3, 1.0, &bias, 11).unwrap();
        let two = generate_representation_instance(20, 25, 3, 2.0, &bias, 11).unwrap();
        assert_eq!(two.m, &one.m * 2.0);
        assert_eq!(one.a, two.a);
    }

    #[test]
    fn target_margin_is_enforced() {
        let mut spec =
            RepresentationSpec::new(20, 30, 3, 1.0, BiasModel::gaussian(0.0, 0.5).unwrap());
        spec.target_nu = Some(0.01);
        let inst = spec.generate(5).unwrap();
        assert!(inst.realized_nu >= 0.01);
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(generate_representation_instance(4, 6, 7, 1.0, &exp_default(), 1).is_err());
        assert!(generate_representation_instance(4, 6, 2, 0.0, &exp_default(), 1).is_err());
        assert!(
            generate_recovery_instance(10, 2, 11, 0.0, 5.0, BiasSpec::Constant(0.0), 1).is_err()
        );
    }

    #[test]
    fn recovery_without_noise_is_plain_relu() {
        let inst =
            generate_recovery_instance(10, 2, 0, 0.0, 5.0, BiasSpec::Constant(0.0), 1).unwrap();
        assert_eq!(inst.v, relu_vector(&(&inst.a * &inst.c_star)));
        assert!(inst.e_star.iter().all(|&e| e == 0.0));
        assert!(inst.w.iter().all(|&w| w == 0.0));
        assert!((inst.c_star.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn recovery_corruptions_respect_budgets() {
        let inst =
            generate_recovery_instance(100, 5, 10, 0.01, 5.0, BiasSpec::Constant(0.0), 2).unwrap();
        assert_eq!(inst.outlier_support().len(), 10);
        assert!(inst.e_star.iter().all(|&e| e == 0.0 || e.abs() == 5.0));
        assert!(inst.w.amax() <= 0.01);
        let rebuilt = relu_vector(&(&inst.a * &inst.c_star + &inst.b)) + &inst.e_star + &inst.w;
        assert_eq!(rebuilt, inst.v);
    }

    #[test]
    fn outliers_do_not_share_randomness_with_weights() {
        let base = RecoverySpec::new(50, 3, 5, 0.0, BiasSpec::Constant(0.0));
        let one = base.generate(8).unwrap();
        // a different k changes A but not the outlier streams
        let other = RecoverySpec { k: 4, ..base }.generate(8).unwrap();
        assert_ne!(one.a.ncols(), other.a.ncols());
        assert_eq!(one.e_star, other.e_star);
    }

    #[test]
    fn half_normal_mean() {
        let inst =
            generate_recovery_instance(10_000, 1, 0, 0.0, 5.0, BiasSpec::Constant(0.0), 5).unwrap();
        let mean = inst.v.mean();
        // ReLU(g) has mean 1/sqrt(2 pi) and variance 1/2 - 1/(2 pi)
        let sd = (0.5 - 1.0 / (2.0 * std::f64::consts::PI)).sqrt() / 100.0;
        assert!((mean - 0.398_942_28).abs() < 3.0 * sd, "{mean}");
    }
}
