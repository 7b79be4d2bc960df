//! Flat `key = value` experiment configuration.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::bias::{BiasModel, BiasSpec};
use crate::error::{Error, Result};
use crate::generative::DEFAULT_OUTLIER_MAGNITUDE;
use crate::lasso::{LambdaRule, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::replearn::{FillStrategy, DEFAULT_C0};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    RepLearning,
    RobustRecovery,
    Diagnostics,
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "rep_learning" => Ok(Task::RepLearning),
            "robust_recovery" => Ok(Task::RobustRecovery),
            "diagnostics" => Ok(Task::Diagnostics),
            other => Err(format!(
                "expected rep_learning, robust_recovery or diagnostics, got `{other}`"
            )),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::RepLearning => "rep_learning",
            Task::RobustRecovery => "robust_recovery",
            Task::Diagnostics => "diagnostics",
        })
    }
}

/// A dimension given either explicitly or as a multiple of `d`.
#[derive(Debug, Clone, PartialEq)]
pub enum DimRule {
    Values(Vec<usize>),
    /// `ceil(factor * d)`.
    ScaleOfD(f64),
}

impl DimRule {
    pub fn resolve(&self, d: usize) -> Vec<usize> {
        match self {
            DimRule::Values(v) => v.clone(),
            // the small offset keeps 0.02 * 250 from rounding up to 6
            DimRule::ScaleOfD(f) => vec![(f * d as f64 - 1e-9).ceil().max(0.0) as usize],
        }
    }
}

impl fmt::Display for DimRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DimRule::Values(v) => {
                let parts: Vec<String> = v.iter().map(usize::to_string).collect();
                f.write_str(&parts.join(","))
            }
            DimRule::ScaleOfD(x) => write!(f, "{x}d"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NuChoice {
    Realized,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub task: Task,
    pub d: Vec<usize>,
    pub n: DimRule,
    pub k: Vec<usize>,
    pub s: DimRule,
    pub gamma: f64,
    pub nu: NuChoice,
    pub delta: f64,
    /// Bias for representation learning; a model.
    pub rep_bias: BiasModel,
    /// Bias for recovery and diagnostics; a model or a constant.
    pub rec_bias: BiasSpec,
    pub lambda: LambdaRule,
    pub seeds: Vec<u64>,
    pub fill: FillStrategy,
    pub output_dir: PathBuf,
    pub outlier_magnitude: f64,
    pub samples: usize,
    pub c0: f64,
    pub c_tilde: f64,
    pub tol: f64,
    pub max_iter: usize,
}

const KEYS: &[&str] = &[
    "task",
    "d",
    "n",
    "k",
    "s",
    "gamma",
    "nu",
    "delta",
    "bias",
    "lambda",
    "seeds",
    "fill",
    "output_dir",
    "outlier_magnitude",
    "samples",
    "c0",
    "c_tilde",
    "tol",
    "max_iter",
];

fn config_err(key: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        reason: reason.into(),
    }
}

fn parse_scalar<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| config_err(key, format!("cannot parse `{value}`")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    let items: Vec<T> = value
        .split(',')
        .map(|part| parse_scalar(key, part.trim()))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(config_err(key, "list is empty"));
    }
    Ok(items)
}

fn parse_dim_rule(key: &str, value: &str) -> Result<DimRule> {
    if let Some(factor) = value.strip_suffix('d') {
        let f: f64 = parse_scalar(key, factor.trim())?;
        if !(f.is_finite() && f >= 0.0) {
            return Err(config_err(key, "scale factor must be nonnegative"));
        }
        return Ok(DimRule::ScaleOfD(f));
    }
    parse_list(key, value).map(DimRule::Values)
}

/// Comma list of seeds; `a-b` expands to the inclusive range.
fn parse_seeds(value: &str) -> Result<Vec<u64>> {
    let mut seeds = Vec::new();
    for part in value.split(',').map(str::trim) {
        match part.split_once('-') {
            Some((lo, hi)) => {
                let (lo, hi): (u64, u64) = (
                    parse_scalar("seeds", lo.trim())?,
                    parse_scalar("seeds", hi.trim())?,
                );
                if lo > hi {
                    return Err(config_err("seeds", format!("empty range `{part}`")));
                }
                seeds.extend(lo..=hi);
            }
            None => seeds.push(parse_scalar("seeds", part)?),
        }
    }
    let mut seen = HashSet::new();
    if let Some(dup) = seeds.iter().find(|s| !seen.insert(**s)) {
        return Err(config_err("seeds", format!("seed {dup} appears twice")));
    }
    Ok(seeds)
}

fn positive(key: &str, x: f64) -> Result<f64> {
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(config_err(key, "must be positive and finite"))
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        text.parse()
    }
}

impl FromStr for ExperimentConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut entries: Vec<(String, String)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                config_err(
                    line,
                    format!("line {} is not of the form `key = value`", lineno + 1),
                )
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(config_err(key, "unknown key"));
            }
            if entries.iter().any(|(k, _)| k == key) {
                return Err(config_err(key, "given more than once"));
            }
            if value.is_empty() {
                return Err(config_err(key, "missing value"));
            }
            entries.push((key.to_string(), value.to_string()));
        }
        let get = |key: &str| {
            entries
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.as_str())
        };
        let require = |key: &str| get(key).ok_or_else(|| config_err(key, "required"));

        let task: Task = require("task")?
            .parse()
            .map_err(|reason: String| config_err("task", reason))?;
        let d: Vec<usize> = parse_list("d", require("d")?)?;
        if d.contains(&0) {
            return Err(config_err("d", "dimensions must be positive"));
        }
        let k: Vec<usize> = parse_list("k", require("k")?)?;
        if k.contains(&0) {
            return Err(config_err("k", "must be positive"));
        }
        let n = match get("n") {
            Some(v) => parse_dim_rule("n", v)?,
            None => DimRule::ScaleOfD(2.0),
        };
        let s = match get("s") {
            Some(v) => parse_dim_rule("s", v)?,
            None => DimRule::Values(vec![0]),
        };
        let gamma = positive(
            "gamma",
            get("gamma").map_or(Ok(1.0), |v| parse_scalar("gamma", v))?,
        )?;
        let nu = match get("nu") {
            None | Some("realized") => NuChoice::Realized,
            Some(v) => NuChoice::Fixed(positive("nu", parse_scalar("nu", v)?)?),
        };
        let delta: f64 = get("delta").map_or(Ok(0.01), |v| parse_scalar("delta", v))?;
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(config_err("delta", "must be nonnegative"));
        }
        let (rep_bias, rec_bias) = match get("bias") {
            None => (BiasModel::default_for_gamma(gamma), BiasSpec::Constant(0.0)),
            Some(v) => {
                let spec: BiasSpec = v
                    .parse()
                    .map_err(|e: Error| config_err("bias", e.to_string()))?;
                match (task, spec) {
                    (Task::RepLearning, BiasSpec::Constant(_)) => {
                        return Err(config_err(
                            "bias",
                            "representation learning needs a bias distribution",
                        ))
                    }
                    (_, BiasSpec::Random(m)) => (m, spec),
                    (_, BiasSpec::Constant(_)) => (BiasModel::default_for_gamma(gamma), spec),
                }
            }
        };
        let lambda = match get("lambda") {
            None => LambdaRule::Oracle,
            Some(v) => v
                .parse()
                .map_err(|e: Error| config_err("lambda", e.to_string()))?,
        };
        let seeds = parse_seeds(require("seeds")?)?;
        let fill = match get("fill") {
            None => FillStrategy::default(),
            Some(v) => v
                .parse()
                .map_err(|e: Error| config_err("fill", e.to_string()))?,
        };
        let samples = get("samples").map_or(Ok(100), |v| parse_scalar("samples", v))?;
        let max_iter =
            get("max_iter").map_or(Ok(DEFAULT_MAX_ITER), |v| parse_scalar("max_iter", v))?;
        if max_iter == 0 {
            return Err(config_err("max_iter", "must be at least 1"));
        }

        Ok(ExperimentConfig {
            task,
            d,
            n,
            k,
            s,
            gamma,
            nu,
            delta,
            rep_bias,
            rec_bias,
            lambda,
            seeds,
            fill,
            output_dir: PathBuf::from(get("output_dir").unwrap_or("results")),
            outlier_magnitude: positive(
                "outlier_magnitude",
                get("outlier_magnitude").map_or(Ok(DEFAULT_OUTLIER_MAGNITUDE), |v| {
                    parse_scalar("outlier_magnitude", v)
                })?,
            )?,
            samples,
            c0: positive(
                "c0",
                get("c0").map_or(Ok(DEFAULT_C0), |v| parse_scalar("c0", v))?,
            )?,
            c_tilde: positive(
                "c_tilde",
                get("c_tilde").map_or(Ok(1.0), |v| parse_scalar("c_tilde", v))?,
            )?,
            tol: positive(
                "tol",
                get("tol").map_or(Ok(DEFAULT_TOL), |v| parse_scalar("tol", v))?,
            )?,
            max_iter,
        })
    }
}
