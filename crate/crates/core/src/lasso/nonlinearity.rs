//! Moments of the rectified Gaussian that set the scale and noise level of
//! the linearized recovery problem.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::quadrature::GaussLegendre;
use crate::bias::BiasSpec;
use crate::error::{Error, Result};
use crate::generative::relu;

pub const DEFAULT_MC_SAMPLES: usize = 1_000_000;
/// Monte Carlo estimates with a larger standard error are flagged.
pub const MC_WARN_SE: f64 = 1e-3;
/// Outer rule size when the bias is itself random.
pub const BIAS_NODES: usize = 200;

const GAUSS_RANGE: f64 = 12.0;
const PANELS: usize = 24;
const RULE_POINTS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Quadrature,
    MonteCarlo { samples: usize, seed: u64 },
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Quadrature => f.write_str("quadrature"),
            Method::MonteCarlo { samples, .. } => write!(f, "monte_carlo({samples})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    /// Present for Monte Carlo estimates only.
    pub std_error: Option<f64>,
}

impl Estimate {
    fn exact(value: f64) -> Self {
        Self {
            value,
            std_error: None,
        }
    }

    pub fn is_noisy(&self) -> bool {
        self.std_error.is_some_and(|se| se > MC_WARN_SE)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlinearityStats {
    pub mu: Estimate,
    pub sigma: Estimate,
    pub eta: Estimate,
    pub method: Method,
    pub bias: BiasSpec,
}

impl NonlinearityStats {
    pub fn compute(bias: &BiasSpec, method: Method) -> Result<Self> {
        let mu = mu_parameter(bias, method)?;
        let (sigma, eta) = sigma_eta_parameters(bias, mu.value, method)?;
        Ok(Self {
            mu,
            sigma,
            eta,
            method,
            bias: *bias,
        })
    }

    pub fn warnings(&self) -> Vec<String> {
        [("mu", self.mu), ("sigma", self.sigma), ("eta", self.eta)]
            .into_iter()
            .filter(|(_, e)| e.is_noisy())
            .map(|(name, e)| {
                format!(
                    "{name}: Monte Carlo standard error {:.2e} exceeds {MC_WARN_SE:e}",
                    e.std_error.unwrap_or(f64::NAN)
                )
            })
            .collect()
    }
}

/// `E[h(g)]` for standard normal `g`, with `h` smooth except at `kink`.
fn gauss_expect(rule: &GaussLegendre, h: impl Fn(f64) -> f64, kink: f64) -> f64 {
    let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let f = |x: f64| h(x) * phi(x);
    if kink > -GAUSS_RANGE && kink < GAUSS_RANGE {
        rule.composite(&f, -GAUSS_RANGE, kink, PANELS)
            + rule.composite(&f, kink, GAUSS_RANGE, PANELS)
    } else {
        rule.composite(&f, -GAUSS_RANGE, GAUSS_RANGE, 2 * PANELS)
    }
}

/// `E[h(g, b)]` with `b` drawn from the bias spec, by quadrature.
fn quad_expect(bias: &BiasSpec, h: impl Fn(f64, f64) -> f64) -> f64 {
    let inner = GaussLegendre::new(RULE_POINTS);
    match bias {
        BiasSpec::Constant(b) => gauss_expect(&inner, |g| h(g, *b), -b),
        BiasSpec::Random(model) => {
            let outer = GaussLegendre::new(BIAS_NODES);
            let (lo, hi) = model.effective_support();
            outer
                .mapped(lo, hi)
                .map(|(b, w)| w * model.density(b) * gauss_expect(&inner, |g| h(g, b), -b))
                .sum()
        }
    }
}

fn mc_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn draw_bias(bias: &BiasSpec, rng: &mut ChaCha8Rng) -> f64 {
    match bias {
        BiasSpec::Constant(b) => *b,
        BiasSpec::Random(model) => model.draw(rng),
    }
}

/// Sample means of each of `h`'s outputs, with standard errors.
fn mc_expect<const N: usize>(
    bias: &BiasSpec,
    samples: usize,
    seed: u64,
    stream: u64,
    h: impl Fn(f64, f64) -> [f64; N],
) -> Result<[(f64, f64); N]> {
    if samples < 2 {
        return Err(Error::param(
            "samples",
            "Monte Carlo needs at least 2 samples",
        ));
    }
    let mut rng = mc_rng(seed, stream);
    let mut sum = [0.0; N];
    let mut sum_sq = [0.0; N];
    for _ in 0..samples {
        let g: f64 = rng.sample(StandardNormal);
        let b = draw_bias(bias, &mut rng);
        for (i, v) in h(g, b).into_iter().enumerate() {
            sum[i] += v;
            sum_sq[i] += v * v;
        }
    }
    let n = samples as f64;
    Ok(std::array::from_fn(|i| {
        let mean = sum[i] / n;
        let var = ((sum_sq[i] - n * mean * mean) / (n - 1.0)).max(0.0);
        (mean, (var / n).sqrt())
    }))
}

fn check_bias(bias: &BiasSpec) -> Result<()> {
    if let BiasSpec::Constant(b) = bias {
        if !b.is_finite() {
            return Err(Error::param("bias", "constant bias must be finite"));
        }
    }
    Ok(())
}

/// `E[ReLU(g + b) g]` for standard normal `g`.
pub fn mu_parameter(bias: &BiasSpec, method: Method) -> Result<Estimate> {
    check_bias(bias)?;
    let h = |g: f64, b: f64| relu(g + b) * g;
    match method {
        Method::Quadrature => Ok(Estimate::exact(quad_expect(bias, h))),
        Method::MonteCarlo { samples, seed } => {
            let [(mean, se)] = mc_expect(bias, samples, seed, 1, |g, b| [h(g, b)])?;
            Ok(Estimate {
                value: mean,
                std_error: Some(se),
            })
        }
    }
}

/// `sigma = sqrt(E[(ReLU(g + b) - mu g)^2])` and
/// `eta = sqrt(E[g^2 (ReLU(g + b) - mu g)^2])`.
pub fn sigma_eta_parameters(
    bias: &BiasSpec,
    mu: f64,
    method: Method,
) -> Result<(Estimate, Estimate)> {
    check_bias(bias)?;
    let residual_sq = move |g: f64, b: f64| (relu(g + b) - mu * g).powi(2);
    match method {
        Method::Quadrature => {
            let s2 = quad_expect(bias, residual_sq);
            let e2 = quad_expect(bias, |g, b| g * g * residual_sq(g, b));
            Ok((Estimate::exact(s2.sqrt()), Estimate::exact(e2.sqrt())))
        }
        Method::MonteCarlo { samples, seed } => {
            let [(s2, s2_se), (e2, e2_se)] = mc_expect(bias, samples, seed, 2, |g, b| {
                let r = residual_sq(g, b);
                [r, g * g * r]
            })?;
            // delta method for the square root
            let root = |m: f64, se: f64| Estimate {
                value: m.sqrt(),
                std_error: Some(se / (2.0 * m.sqrt())),
            };
            Ok((root(s2, s2_se), root(e2, e2_se)))
        }
    }
}
