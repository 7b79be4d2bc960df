//! One-dimensional bias laws and the distribution-dependent constants that
//! enter the likelihood and the recovery bounds.
//!
//! Every constant is computed by a dense grid scan over `[-gamma, gamma]`
//! with `grid_resolution` points per unit length, so the same code serves
//! all three families. Accuracy is checked by doubling the resolution.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, Open01};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

pub const DEFAULT_GRID_RESOLUTION: usize = 10_000;

/// Infima below this are reported as zero and the bound flagged vacuous.
pub const VACUOUS_THRESHOLD: f64 = 1e-12;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// A point on the extended real line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extended {
    NegInf,
    Finite(f64),
    PosInf,
}

impl Extended {
    pub fn neg(self) -> Self {
        match self {
            Extended::NegInf => Extended::PosInf,
            Extended::PosInf => Extended::NegInf,
            Extended::Finite(x) => Extended::Finite(-x),
        }
    }
}

impl From<f64> for Extended {
    fn from(x: f64) -> Self {
        Extended::Finite(x)
    }
}

impl PartialOrd for Extended {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        use Extended::*;
        match (self, other) {
            (NegInf, NegInf) | (PosInf, PosInf) => Some(Ordering::Equal),
            (NegInf, _) | (_, PosInf) => Some(Ordering::Less),
            (_, NegInf) | (PosInf, _) => Some(Ordering::Greater),
            (Finite(a), Finite(b)) => a.partial_cmp(b),
        }
    }
}

impl fmt::Display for Extended {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extended::NegInf => write!(f, "-inf"),
            Extended::PosInf => write!(f, "+inf"),
            Extended::Finite(x) => write!(f, "{x}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BiasKind {
    /// Density `rate * exp(-rate (x - shift))` on `[shift, inf)`.
    ShiftedExponential {
        rate: f64,
        shift: f64,
    },
    Gaussian {
        mean: f64,
        std: f64,
    },
    Logistic {
        loc: f64,
        scale: f64,
    },
}

/// An immutable bias distribution plus the grid resolution used for its
/// numerical constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasModel {
    kind: BiasKind,
    grid_resolution: usize,
}

/// Result of the flatness scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Flatness {
    pub value: f64,
    /// Set when the infimum fell below [`VACUOUS_THRESHOLD`].
    pub vacuous: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasConstants {
    pub beta: f64,
    pub lipschitz: f64,
    pub omega: f64,
    pub gamma: f64,
    pub nu: f64,
    pub vacuous: bool,
}

fn check_finite(name: &'static str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be finite, got {x}")))
    }
}

fn check_positive(name: &'static str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::param(
            name,
            format!("must be positive and finite, got {x}"),
        ))
    }
}

/// Uniform grid on `[lo, hi]` with `per_unit` points per unit length,
/// always including both endpoints.
pub(crate) fn grid(lo: f64, hi: f64, per_unit: usize) -> impl Iterator<Item = f64> {
    let len = (hi - lo).max(0.0);
    let intervals = ((len * per_unit as f64).ceil() as usize).max(1);
    let step = len / intervals as f64;
    (0..=intervals).map(move |i| {
        if i == intervals {
            hi
        } else {
            lo + step * i as f64
        }
    })
}

impl BiasModel {
    pub fn new(kind: BiasKind) -> Result<Self> {
        match kind {
            BiasKind::ShiftedExponential { rate, shift } => {
                check_positive("rate", rate)?;
                check_finite("shift", shift)?;
            }
            BiasKind::Gaussian { mean, std } => {
                check_finite("mean", mean)?;
                check_positive("std", std)?;
            }
            BiasKind::Logistic { loc, scale } => {
                check_finite("loc", loc)?;
                check_positive("scale", scale)?;
            }
        }
        Ok(Self {
            kind,
            grid_resolution: DEFAULT_GRID_RESOLUTION,
        })
    }

    pub fn shifted_exponential(rate: f64, shift: f64) -> Result<Self> {
        Self::new(BiasKind::ShiftedExponential { rate, shift })
    }

    pub fn gaussian(mean: f64, std: f64) -> Result<Self> {
        Self::new(BiasKind::Gaussian { mean, std })
    }

    pub fn logistic(loc: f64, scale: f64) -> Result<Self> {
        Self::new(BiasKind::Logistic { loc, scale })
    }

    /// Unit-rate exponential shifted to `-gamma - 1`. Its density is strictly
    /// decreasing on `[-gamma, gamma]`, which keeps the flatness constant
    /// positive.
    pub fn default_for_gamma(gamma: f64) -> Self {
        Self {
            kind: BiasKind::ShiftedExponential {
                rate: 1.0,
                shift: -gamma - 1.0,
            },
            grid_resolution: DEFAULT_GRID_RESOLUTION,
        }
    }

    pub fn with_grid_resolution(mut self, grid_resolution: usize) -> Result<Self> {
        if grid_resolution == 0 {
            return Err(Error::param("grid_resolution", "must be positive"));
        }
        self.grid_resolution = grid_resolution;
        Ok(self)
    }

    pub fn kind(&self) -> BiasKind {
        self.kind
    }

    pub fn grid_resolution(&self) -> usize {
        self.grid_resolution
    }

    pub fn density(&self, x: f64) -> f64 {
        self.density_and_derivative(x).0
    }

    /// Density and its derivative. For the shifted exponential the
    /// derivative at the shift point is the right derivative.
    pub fn density_and_derivative(&self, x: f64) -> (f64, f64) {
        match self.kind {
            BiasKind::ShiftedExponential { rate, shift } => {
                if x < shift {
                    (0.0, 0.0)
                } else {
                    let p = rate * (-rate * (x - shift)).exp();
                    (p, -rate * p)
                }
            }
            BiasKind::Gaussian { mean, std } => {
                let z = (x - mean) / std;
                let p = INV_SQRT_2PI / std * (-0.5 * z * z).exp();
                (p, -z / std * p)
            }
            BiasKind::Logistic { loc, scale } => {
                let z = (x - loc) / scale;
                let t = (-z.abs()).exp();
                let p = t / (scale * (1.0 + t) * (1.0 + t));
                // sigmoid(z), evaluated without overflow
                let sig = if z >= 0.0 {
                    1.0 / (1.0 + t)
                } else {
                    t / (1.0 + t)
                };
                (p, p * (1.0 - 2.0 * sig) / scale)
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self.kind {
            BiasKind::ShiftedExponential { rate, shift } => {
                if x <= shift {
                    0.0
                } else {
                    -(-rate * (x - shift)).exp_m1()
                }
            }
            BiasKind::Gaussian { mean, std } => {
                0.5 * erfc(-(x - mean) / (std * std::f64::consts::SQRT_2))
            }
            BiasKind::Logistic { loc, scale } => {
                let z = (x - loc) / scale;
                if z >= 0.0 {
                    1.0 / (1.0 + (-z).exp())
                } else {
                    let t = z.exp();
                    t / (1.0 + t)
                }
            }
        }
    }

    fn cdf_ext(&self, x: Extended) -> f64 {
        match x {
            Extended::NegInf => 0.0,
            Extended::PosInf => 1.0,
            Extended::Finite(v) => self.cdf(v),
        }
    }

    /// `P(-x1 <= B <= -x2)`; requires `x1 >= x2`.
    pub fn interval_probability(&self, x1: Extended, x2: Extended) -> Result<f64> {
        if matches!(x1, Extended::Finite(v) if v.is_nan())
            || matches!(x2, Extended::Finite(v) if v.is_nan())
            || x1 < x2
        {
            return Err(Error::InvalidInterval {
                x1: x1.to_string(),
                x2: x2.to_string(),
            });
        }
        let mass = self.cdf_ext(x2.neg()) - self.cdf_ext(x1.neg());
        Ok(mass.clamp(0.0, 1.0))
    }

    /// An interval holding all but a negligible amount of mass; used by
    /// quadrature over the bias.
    pub fn effective_support(&self) -> (f64, f64) {
        match self.kind {
            BiasKind::ShiftedExponential { rate, shift } => (shift, shift + 40.0 / rate),
            BiasKind::Gaussian { mean, std } => (mean - 10.0 * std, mean + 10.0 * std),
            BiasKind::Logistic { loc, scale } => (loc - 40.0 * scale, loc + 40.0 * scale),
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            BiasKind::ShiftedExponential { rate, shift } => {
                shift + Exp::new(rate).expect("validated rate").sample(rng)
            }
            BiasKind::Gaussian { mean, std } => {
                Normal::new(mean, std).expect("validated std").sample(rng)
            }
            BiasKind::Logistic { loc, scale } => {
                let u: f64 = Open01.sample(rng);
                loc + scale * (u / (1.0 - u)).ln()
            }
        }
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R, d: usize) -> Vec<f64> {
        (0..d).map(|_| self.draw(rng)).collect()
    }

    /// `d` i.i.d. draws, reproducible from `seed`.
    pub fn sample(&self, d: usize, seed: u64) -> Result<Vec<f64>> {
        if d == 0 {
            return Err(Error::param("d", "must be at least 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(self.sample_with(&mut rng, d))
    }

    /// Grid infimum of `p'(x)^2 / (4 p(x))` over `[-gamma, gamma]`.
    pub fn flatness_beta(&self, gamma: f64) -> Result<Flatness> {
        check_positive("gamma", gamma)?;
        let mut inf = f64::INFINITY;
        for x in grid(-gamma, gamma, self.grid_resolution) {
            let (p, dp) = self.density_and_derivative(x);
            if p > 0.0 {
                inf = inf.min(dp * dp / (4.0 * p));
            }
        }
        if inf.is_infinite() {
            return Err(Error::param(
                "gamma",
                format!("density vanishes on all of [-{gamma}, {gamma}]"),
            ));
        }
        Ok(if inf < VACUOUS_THRESHOLD {
            Flatness {
                value: 0.0,
                vacuous: true,
            }
        } else {
            Flatness {
                value: inf,
                vacuous: false,
            }
        })
    }

    /// Grid supremum of `max{ p(x)/F(x), |p'(x)|/p(x) }` over `[-gamma, gamma]`,
    /// with `F` the cdf.
    pub fn lipschitz_l(&self, gamma: f64) -> Result<f64> {
        check_positive("gamma", gamma)?;
        if self.cdf(-gamma) == 0.0 {
            return Err(Error::ZeroCdf { x: -gamma });
        }
        let mut sup = 0.0_f64;
        for x in grid(-gamma, gamma, self.grid_resolution) {
            let (p, dp) = self.density_and_derivative(x);
            let f = self.cdf(x);
            if f > 0.0 {
                sup = sup.max(p / f);
            }
            if p > 0.0 {
                sup = sup.max(dp.abs() / p);
            }
        }
        if sup > 0.0 {
            Ok(sup)
        } else {
            Err(Error::param(
                "gamma",
                "Lipschitz constant evaluates to zero",
            ))
        }
    }

    /// Least bias mass of any window `[-x, -y]` with `x, y` in
    /// `[-gamma, gamma]` and `x - y >= nu`. Windows of length exactly `nu`
    /// are the minimizers, so only those are scanned.
    pub fn omega_min_mass(&self, gamma: f64, nu: f64) -> Result<f64> {
        check_positive("gamma", gamma)?;
        check_positive("nu", nu)?;
        if nu > 2.0 * gamma {
            return Err(Error::InvalidInterval {
                x1: format!("{gamma}"),
                x2: format!("{}", gamma - nu),
            });
        }
        let mut min = f64::INFINITY;
        for t in grid(-gamma, gamma - nu, self.grid_resolution) {
            let mass = self.cdf(-t) - self.cdf(-t - nu);
            min = min.min(mass);
        }
        Ok(min.clamp(0.0, 1.0))
    }

    pub fn constants(&self, gamma: f64, nu: f64) -> Result<BiasConstants> {
        let flat = self.flatness_beta(gamma)?;
        let lipschitz = self.lipschitz_l(gamma)?;
        let omega = self.omega_min_mass(gamma, nu)?;
        Ok(BiasConstants {
            beta: flat.value,
            lipschitz,
            omega,
            gamma,
            nu,
            vacuous: flat.vacuous || omega < VACUOUS_THRESHOLD,
        })
    }
}

impl fmt::Display for BiasModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            BiasKind::ShiftedExponential { rate, shift } => {
                write!(f, "exp:rate={rate},shift={shift}")
            }
            BiasKind::Gaussian { mean, std } => write!(f, "gauss:mean={mean},std={std}"),
            BiasKind::Logistic { loc, scale } => write!(f, "logistic:loc={loc},scale={scale}"),
        }
    }
}

/// Splits `kind:key=value,...` into the kind and its named values, checking
/// that exactly `keys` are present.
fn parse_config<'a>(input: &'a str, keys: &[&str], rest: &'a str) -> Result<Vec<f64>> {
    let fail = |reason: String| Error::BiasConfig {
        input: input.to_string(),
        reason,
    };
    let mut values = vec![None; keys.len()];
    for pair in rest.split(',') {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| fail(format!("expected key=value, got `{pair}`")))?;
        let key = key.trim();
        let slot = keys
            .iter()
            .position(|k| *k == key)
            .ok_or_else(|| fail(format!("unknown key `{key}`")))?;
        if values[slot].is_some() {
            return Err(fail(format!("duplicate key `{key}`")));
        }
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| fail(format!("`{value}` is not a decimal number")))?;
        if !v.is_finite() {
            return Err(fail(format!("`{value}` is not finite")));
        }
        values[slot] = Some(v);
    }
    keys.iter()
        .zip(values)
        .map(|(k, v)| v.ok_or_else(|| fail(format!("missing key `{k}`"))))
        .collect()
}

impl FromStr for BiasModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, rest) = s.split_once(':').ok_or_else(|| Error::BiasConfig {
            input: s.to_string(),
            reason: "expected `kind:key=value,...`".into(),
        })?;
        let wrap = |e: Error| match e {
            Error::InvalidParameter { name, reason } => Error::BiasConfig {
                input: s.to_string(),
                reason: format!("{name} {reason}"),
            },
            other => other,
        };
        match kind.trim() {
            "exp" => {
                let v = parse_config(s, &["rate", "shift"], rest)?;
                Self::shifted_exponential(v[0], v[1]).map_err(wrap)
            }
            "gauss" => {
                let v = parse_config(s, &["mean", "std"], rest)?;
                Self::gaussian(v[0], v[1]).map_err(wrap)
            }
            "logistic" => {
                let v = parse_config(s, &["loc", "scale"], rest)?;
                Self::logistic(v[0], v[1]).map_err(wrap)
            }
            other => Err(Error::BiasConfig {
                input: s.to_string(),
                reason: format!("unknown kind `{other}`"),
            }),
        }
    }
}

/// Bias used by the recovery problem: either one constant shared by every
/// coordinate or i.i.d. draws from a model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BiasSpec {
    Constant(f64),
    Random(BiasModel),
}

impl fmt::Display for BiasSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BiasSpec::Constant(b0) => write!(f, "const:value={b0}"),
            BiasSpec::Random(m) => m.fmt(f),
        }
    }
}

impl FromStr for BiasSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s.split_once(':') {
            Some((kind, rest)) if kind.trim() == "const" => {
                let v = parse_config(s, &["value"], rest)?;
                Ok(BiasSpec::Constant(v[0]))
            }
            _ => s.parse().map(BiasSpec::Random),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn exp(rate: f64, shift: f64) -> BiasModel {
        BiasModel::shifted_exponential(rate, shift).unwrap()
    }

    fn std_normal() -> BiasModel {
        BiasModel::gaussian(0.0, 1.0).unwrap()
    }

    /// Composite Simpson over `[lo, hi]`; independent of the cdf code.
    fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
        let n = n + n % 2;
        let h = (hi - lo) / n as f64;
        let mut acc = f(lo) + f(hi);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(lo + h * i as f64);
        }
        acc * h / 3.0
    }

    #[test]
    fn density_examples() {
        assert_eq!(exp(1.0, -1.0).density_and_derivative(-1.0), (1.0, -1.0));
        let (p, dp) = std_normal().density_and_derivative(0.0);
        assert_relative_eq!(p, 0.398_942_280_401_432_7, epsilon = 1e-15);
        assert_eq!(dp, 0.0);
        let (p, dp) = exp(2.0, 0.0).density_and_derivative(1.0);
        let e2 = (-2.0_f64).exp();
        assert_relative_eq!(p, 2.0 * e2, epsilon = 1e-15);
        assert_relative_eq!(dp, -4.0 * e2, epsilon = 1e-15);
        assert_eq!(exp(2.0, 0.0).density_and_derivative(-0.5), (0.0, 0.0));
    }

    #[test]
    fn derivative_matches_central_differences() {
        let h = 1e-5;
        let models = [
            exp(1.3, -2.0),
            std_normal(),
            BiasModel::gaussian(0.4, 0.7).unwrap(),
            BiasModel::logistic(-0.2, 0.8).unwrap(),
        ];
        for m in models {
            for i in 0..=40 {
                let x = -1.9 + 0.1 * i as f64;
                let fd = (m.density(x + h) - m.density(x - h)) / (2.0 * h);
                let (_, dp) = m.density_and_derivative(x);
                assert!((fd - dp).abs() < 1e-4, "{m} at {x}: fd {fd} vs {dp}");
            }
        }
    }

    #[test]
    fn density_integrates_to_one_and_cdf_matches_quadrature() {
        let models = [
            exp(1.0, -2.0),
            BiasModel::gaussian(0.3, 1.4).unwrap(),
            BiasModel::logistic(0.0, 1.0).unwrap(),
        ];
        for m in models {
            let (lo, hi) = m.effective_support();
            let total = simpson(|x| m.density(x), lo, hi, 400_000);
            assert!((total - 1.0).abs() < 1e-6, "{m}: mass {total}");
            assert!(m.cdf(lo - 1.0) < 1e-9);
            assert!(1.0 - m.cdf(hi + 1.0) < 1e-9);
            for x in [-1.5, -0.25, 0.0, 0.8] {
                let q = simpson(|t| m.density(t), lo.max(-60.0), x, 200_000);
                let q = if x <= lo { 0.0 } else { q };
                assert!(
                    (q - m.cdf(x)).abs() < 1e-7,
                    "{m}: cdf({x}) {q} vs {}",
                    m.cdf(x)
                );
            }
        }
    }

    #[test]
    fn interval_probability_examples() {
        let m = exp(1.0, -1.0);
        assert_eq!(m.interval_probability(0.4.into(), 0.4.into()).unwrap(), 0.0);
        assert_eq!(
            m.interval_probability(Extended::PosInf, Extended::NegInf)
                .unwrap(),
            1.0
        );
        let p = m
            .interval_probability(Extended::PosInf, 0.0.into())
            .unwrap();
        let quad = simpson(|x| m.density(x), -1.0, 0.0, 100_000);
        assert_relative_eq!(p, 1.0 - (-1.0_f64).exp(), epsilon = 1e-12);
        assert_relative_eq!(p, quad, epsilon = 1e-9);
        assert!(matches!(
            m.interval_probability(0.0.into(), 1.0.into()),
            Err(Error::InvalidInterval { .. })
        ));
        assert!(m
            .interval_probability(Extended::NegInf, Extended::PosInf)
            .is_err());
    }

    #[test]
    fn interval_probability_is_additive() {
        let m = BiasModel::logistic(0.2, 0.6).unwrap();
        for (a, b, c) in [(2.0, 0.5, -1.0), (0.3, 0.2, 0.1), (5.0, -5.0, -6.0)] {
            let whole = m.interval_probability(a.into(), c.into()).unwrap();
            let parts = m.interval_probability(a.into(), b.into()).unwrap()
                + m.interval_probability(b.into(), c.into()).unwrap();
            assert!((whole - parts).abs() < 1e-9);
        }
    }

    #[test]
    fn sampling() {
        let g = std_normal().sample(100_000, 7).unwrap();
        let mean = g.iter().sum::<f64>() / g.len() as f64;
        assert!(mean.abs() < 3.0 / (1e5_f64).sqrt());
        let e = exp(1.0, 0.0).sample(100_000, 7).unwrap();
        assert!(e.iter().all(|&x| x >= 0.0));
        assert_eq!(e, exp(1.0, 0.0).sample(100_000, 7).unwrap());
        assert!(std_normal().sample(0, 1).is_err());
    }

    #[test]
    fn flatness_examples() {
        let f = std_normal().flatness_beta(1.0).unwrap();
        assert_eq!(f.value, 0.0);
        assert!(f.vacuous);

        let b = exp(1.0, -2.0).flatness_beta(1.0).unwrap();
        assert!(!b.vacuous);
        assert_relative_eq!(b.value, (-3.0_f64).exp() / 4.0, max_relative = 1e-12);

        let b = exp(2.0, -2.0).flatness_beta(0.5).unwrap();
        assert_relative_eq!(b.value, 2.0 * (-5.0_f64).exp(), max_relative = 1e-12);
    }

    #[test]
    fn lipschitz_examples() {
        // p/F = e^{-(x+2)} / (1 - e^{-(x+2)}) is largest at x = -1, and
        // |p'|/p = 1 everywhere, so the p'/p branch wins.
        let l = exp(1.0, -2.0).lipschitz_l(1.0).unwrap();
        let ratio_at_left = (-1.0_f64).exp() / (1.0 - (-1.0_f64).exp());
        assert!(ratio_at_left < 1.0);
        assert_relative_eq!(l, 1.0, epsilon = 1e-12);

        let lg = std_normal().lipschitz_l(1.0).unwrap();
        assert!(lg >= 1.0);
        // p(-1)/Phi(-1) dominates for the standard normal
        let expected = 0.241_970_724_519_143_37 / 0.158_655_253_931_457_05;
        assert_relative_eq!(lg, expected, max_relative = 1e-9);

        assert!(matches!(
            exp(1.0, -0.5).lipschitz_l(1.0),
            Err(Error::ZeroCdf { .. })
        ));
    }

    #[test]
    fn omega_examples() {
        let g = std_normal();
        let full = g.omega_min_mass(1.0, 2.0).unwrap();
        assert_relative_eq!(full, g.cdf(1.0) - g.cdf(-1.0), epsilon = 1e-15);

        let w = g.omega_min_mass(1.0, 0.5).unwrap();
        assert_relative_eq!(w, g.cdf(1.0) - g.cdf(0.5), epsilon = 1e-12);
        assert!((w - 0.1499).abs() < 1e-4);

        // decreasing density: the rightmost window [0.5, 1] is lightest
        let e = exp(1.0, -3.0).omega_min_mass(1.0, 0.5).unwrap();
        assert_relative_eq!(e, (-3.5_f64).exp() - (-4.0_f64).exp(), max_relative = 1e-12);

        assert!(matches!(
            g.omega_min_mass(1.0, 2.5),
            Err(Error::InvalidInterval { .. })
        ));
    }

    #[test]
    fn omega_monotone_on_lattice() {
        for m in [
            exp(1.0, -4.0),
            std_normal(),
            BiasModel::logistic(0.3, 0.5).unwrap(),
        ] {
            let m = m.with_grid_resolution(2_000).unwrap();
            let gammas = [0.6, 0.9, 1.2, 1.5, 1.8];
            let nus = [0.05, 0.15, 0.3, 0.6, 1.0];
            for (gi, &g) in gammas.iter().enumerate() {
                for (ni, &nu) in nus.iter().enumerate() {
                    let w = m.omega_min_mass(g, nu).unwrap();
                    if gi + 1 < gammas.len() {
                        let wider = m.omega_min_mass(gammas[gi + 1], nu).unwrap();
                        assert!(wider <= w + 1e-12, "{m}: gamma {g} nu {nu}");
                    }
                    if ni + 1 < nus.len() {
                        let longer = m.omega_min_mass(g, nus[ni + 1]).unwrap();
                        assert!(longer >= w - 1e-12, "{m}: gamma {g} nu {nu}");
                    }
                }
            }
        }
    }

    #[test]
    fn constants_converge_under_grid_doubling() {
        let models = [
            exp(1.0, -2.0),
            exp(0.5, -3.0),
            BiasModel::logistic(2.0, 0.5).unwrap(),
        ];
        for m in models {
            let coarse = m
                .with_grid_resolution(500)
                .unwrap()
                .constants(1.0, 0.3)
                .unwrap();
            let fine = m
                .with_grid_resolution(1_000)
                .unwrap()
                .constants(1.0, 0.3)
                .unwrap();
            for (a, b) in [
                (coarse.beta, fine.beta),
                (coarse.lipschitz, fine.lipschitz),
                (coarse.omega, fine.omega),
            ] {
                assert!((a - b).abs() <= 0.01 * b.abs(), "{m}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn config_strings() {
        let m: BiasModel = "exp:rate=1,shift=-2".parse().unwrap();
        assert_eq!(m, exp(1.0, -2.0));
        let g: BiasModel = "gauss:mean=0,std=1".parse().unwrap();
        assert_eq!(g, std_normal());
        let l: BiasModel = "logistic:loc=0,scale=1".parse().unwrap();
        assert_eq!(l.to_string(), "logistic:loc=0,scale=1");
        assert_eq!(m.to_string().parse::<BiasModel>().unwrap(), m);
        for bad in [
            "exp",
            "exp:rate=1",
            "exp:rate=1,shift=-2,foo=3",
            "exp:rate=-1,shift=0",
            "gauss:mean=0,std=abc",
            "cauchy:loc=0,scale=1",
            "gauss:mean=0,mean=1",
        ] {
            assert!(bad.parse::<BiasModel>().is_err(), "{bad}");
        }
        assert_eq!(
            "const:value=0.5".parse::<BiasSpec>().unwrap(),
            BiasSpec::Constant(0.5)
        );
        assert_eq!(
            "gauss:mean=0,std=1".parse::<BiasSpec>().unwrap(),
            BiasSpec::Random(std_normal())
        );
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    fn any_model() -> impl Strategy<Value = BiasModel> {
        prop_oneof![
            (0.2f64..3.0, -4.0f64..0.0)
                .prop_map(|(r, s)| BiasModel::shifted_exponential(r, s).unwrap()),
            (-1.0f64..1.0, 0.3f64..2.0).prop_map(|(m, s)| BiasModel::gaussian(m, s).unwrap()),
            (-1.0f64..1.0, 0.3f64..2.0).prop_map(|(l, s)| BiasModel::logistic(l, s).unwrap()),
        ]
    }

    proptest! {
        #[test]
        fn cdf_is_monotone(m in any_model(), a in -6.0f64..6.0, b in -6.0f64..6.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(m.cdf(lo) <= m.cdf(hi));
            prop_assert!(m.density(a) >= 0.0);
        }

        #[test]
        fn exponential_flatness_has_closed_form(rate in 0.2f64..3.0, gamma in 0.2f64..2.0) {
            let m = BiasModel::shifted_exponential(rate, -gamma - 0.5).unwrap();
            let beta = m.flatness_beta(gamma).unwrap().value;
            let closed = rate * rate * m.density(gamma) / 4.0;
            prop_assert!((beta - closed).abs() <= 0.01 * closed);
        }
    }
}
