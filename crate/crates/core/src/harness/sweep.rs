use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use super::config::{ExperimentConfig, NuChoice, Task};
use super::pipeline::{run_diagnostic, run_recovery, run_representation, RecSettings, RepSettings};
use crate::error::{Error, Result};
use crate::generative::{RecoverySpec, RepresentationSpec};
use crate::io::{format_f64, write_json};
use crate::lasso::{Method, NonlinearityStats};

/// One row of `results.csv`. Fields that do not apply to the task are
/// empty; `error` holds the message of a failed cell.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultRecord {
    pub task: String,
    pub d: usize,
    pub n: Option<usize>,
    pub k: usize,
    pub s: Option<usize>,
    pub gamma: Option<f64>,
    pub nu: Option<f64>,
    pub delta: Option<f64>,
    pub bias: String,
    pub lambda_mode: Option<String>,
    pub fill: Option<String>,
    pub seed: u64,
    pub frob_err_sq: Option<f64>,
    pub rep_bound: Option<f64>,
    pub bound_vacuous: Option<bool>,
    pub sin_theta: Option<f64>,
    pub procrustes_err: Option<f64>,
    pub recovery_error: Option<f64>,
    pub recovery_bound: Option<f64>,
    pub mu: Option<f64>,
    pub lambda_used: Option<f64>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub num_checked: Option<usize>,
    pub num_violations: Option<usize>,
    pub min_ratio: Option<f64>,
    pub error: Option<String>,
    /// Written to `timings.csv`, not `results.csv`.
    pub wall_time_ms: f64,
}

pub const RESULT_COLUMNS: &[&str] = &[
    "task",
    "d",
    "n",
    "k",
    "s",
    "gamma",
    "nu",
    "delta",
    "bias",
    "lambda_mode",
    "fill",
    "seed",
    "frob_err_sq",
    "rep_bound",
    "bound_vacuous",
    "sin_theta",
    "procrustes_err",
    "recovery_error",
    "recovery_bound",
    "mu",
    "lambda_used",
    "iterations",
    "converged",
    "num_checked",
    "num_violations",
    "min_ratio",
    "error",
];

pub const TIMING_COLUMNS: &[&str] = &["task", "d", "n", "k", "s", "seed", "wall_time_ms"];

fn opt<T: ToString>(x: &Option<T>) -> String {
    x.as_ref().map(T::to_string).unwrap_or_default()
}

fn opt_f(x: Option<f64>) -> String {
    x.map(format_f64).unwrap_or_default()
}

impl ResultRecord {
    pub fn fields(&self) -> Vec<String> {
        vec![
            self.task.clone(),
            self.d.to_string(),
            opt(&self.n),
            self.k.to_string(),
            opt(&self.s),
            opt_f(self.gamma),
            opt_f(self.nu),
            opt_f(self.delta),
            self.bias.clone(),
            opt(&self.lambda_mode),
            opt(&self.fill),
            self.seed.to_string(),
            opt_f(self.frob_err_sq),
            opt_f(self.rep_bound),
            opt(&self.bound_vacuous),
            opt_f(self.sin_theta),
            opt_f(self.procrustes_err),
            opt_f(self.recovery_error),
            opt_f(self.recovery_bound),
            opt_f(self.mu),
            opt_f(self.lambda_used),
            opt(&self.iterations),
            opt(&self.converged),
            opt(&self.num_checked),
            opt(&self.num_violations),
            opt_f(self.min_ratio),
            opt(&self.error),
        ]
    }

    fn timing_fields(&self) -> Vec<String> {
        vec![
            self.task.clone(),
            self.d.to_string(),
            opt(&self.n),
            self.k.to_string(),
            opt(&self.s),
            self.seed.to_string(),
            format!("{:.3}", self.wall_time_ms),
        ]
    }

    fn group_key(&self) -> (usize, Option<usize>, usize, Option<usize>) {
        (self.d, self.n, self.k, self.s)
    }
}

fn record_cell(
    base: ResultRecord,
    run: impl FnOnce(&mut ResultRecord) -> Result<()>,
) -> ResultRecord {
    let mut record = base;
    let start = Instant::now();
    if let Err(e) = run(&mut record) {
        record.error = Some(e.to_string());
    }
    record.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    record
}

/// Runs every cell of the configuration's Cartesian product. Failures are
/// recorded in the `error` column; the sweep always completes.
pub fn run_sweep(config: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    let mut records = Vec::new();
    let needs_stats = config.task != Task::RepLearning;
    let stats = if needs_stats {
        Some(NonlinearityStats::compute(
            &config.rec_bias,
            Method::Quadrature,
        )?)
    } else {
        None
    };

    for &d in &config.d {
        for &k in &config.k {
            match config.task {
                Task::RepLearning => {
                    for n in config.n.resolve(d) {
                        for &seed in &config.seeds {
                            records.push(rep_cell(config, d, n, k, seed));
                        }
                    }
                }
                Task::RobustRecovery | Task::Diagnostics => {
                    for s in config.s.resolve(d) {
                        for &seed in &config.seeds {
                            let stats = stats.as_ref().expect("computed for recovery tasks");
                            records.push(rec_cell(config, stats, d, k, s, seed));
                        }
                    }
                }
            }
        }
    }
    Ok(records)
}

fn rep_cell(config: &ExperimentConfig, d: usize, n: usize, k: usize, seed: u64) -> ResultRecord {
    let base = ResultRecord {
        task: config.task.to_string(),
        d,
        n: Some(n),
        k,
        gamma: Some(config.gamma),
        bias: config.rep_bias.to_string(),
        fill: Some(config.fill.to_string()),
        seed,
        ..Default::default()
    };
    record_cell(base, |r| {
        let inst =
            RepresentationSpec::new(d, n, k, config.gamma, config.rep_bias).generate(seed)?;
        let settings = RepSettings {
            model: config.rep_bias,
            gamma: config.gamma,
            nu: match config.nu {
                NuChoice::Realized => None,
                NuChoice::Fixed(x) => Some(x),
            },
            fill: config.fill,
            c0: config.c0,
        };
        let out = run_representation(&inst, &settings)?;
        r.nu = Some(out.nu);
        r.frob_err_sq = Some(out.report.frob_err_sq);
        r.rep_bound = out.report.bound;
        r.bound_vacuous = Some(out.report.bound.is_none());
        r.sin_theta = Some(out.report.sin_theta);
        r.procrustes_err = Some(out.report.procrustes_err);
        Ok(())
    })
}

fn rec_cell(
    config: &ExperimentConfig,
    stats: &NonlinearityStats,
    d: usize,
    k: usize,
    s: usize,
    seed: u64,
) -> ResultRecord {
    let base = ResultRecord {
        task: config.task.to_string(),
        d,
        k,
        s: Some(s),
        delta: Some(config.delta),
        bias: config.rec_bias.to_string(),
        lambda_mode: Some(config.lambda.to_string()),
        seed,
        ..Default::default()
    };
    let spec = RecoverySpec::new(d, k, s, config.delta, config.rec_bias)
        .with_outlier_magnitude(config.outlier_magnitude);
    record_cell(base, |r| {
        if config.task == Task::Diagnostics {
            let report = run_diagnostic(&spec, config.lambda, config.samples, seed)?;
            r.lambda_used = Some(report.lambda_used);
            r.num_checked = Some(report.check.num_checked);
            r.num_violations = Some(report.check.num_violations);
            r.min_ratio = Some(report.check.min_ratio);
            return Ok(());
        }
        let inst = spec.generate(seed)?;
        let settings = RecSettings {
            rule: config.lambda,
            tol: config.tol,
            max_iter: config.max_iter,
            c_tilde: config.c_tilde,
        };
        let out = run_recovery(&inst, stats, &settings)?;
        r.recovery_error = Some(out.report.error);
        r.recovery_bound = Some(out.report.bound);
        r.mu = Some(out.report.mu);
        r.lambda_used = Some(out.report.lambda_used);
        r.iterations = Some(out.report.iterations);
        r.converged = Some(out.report.converged);
        Ok(())
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Spread {
    pub median: f64,
    pub iqr: f64,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn spread(values: &[f64]) -> Option<Spread> {
    let mut sorted: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if sorted.is_empty() {
        return None;
    }
    sorted.sort_by(f64::total_cmp);
    Some(Spread {
        median: quantile(&sorted, 0.5),
        iqr: quantile(&sorted, 0.75) - quantile(&sorted, 0.25),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryEntry {
    pub d: usize,
    pub n: Option<usize>,
    pub k: usize,
    pub s: Option<usize>,
    pub runs: usize,
    pub failures: usize,
    pub metrics: BTreeMap<String, Spread>,
}

/// Per-`(d, n, k, s)` median and interquartile range of the error columns
/// and of error / bound.
pub fn summarize(records: &[ResultRecord]) -> Vec<SummaryEntry> {
    let mut order = Vec::new();
    let mut groups: BTreeMap<_, Vec<&ResultRecord>> = BTreeMap::new();
    for r in records {
        let key = r.group_key();
        if !groups.contains_key(&key) {
            order.push(key);
        }
        groups.entry(key).or_default().push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let rows = &groups[&key];
            let column = |f: &dyn Fn(&ResultRecord) -> Option<f64>| -> Vec<f64> {
                rows.iter().filter_map(|r| f(r)).collect()
            };
            let ratio = |a: Option<f64>, b: Option<f64>| Some(a? / b?);
            let candidates: [(&str, Vec<f64>); 8] = [
                ("frob_err_sq", column(&|r| r.frob_err_sq)),
                (
                    "frob_err_sq_over_bound",
                    column(&|r| ratio(r.frob_err_sq, r.rep_bound)),
                ),
                ("sin_theta", column(&|r| r.sin_theta)),
                ("procrustes_err", column(&|r| r.procrustes_err)),
                ("recovery_error", column(&|r| r.recovery_error)),
                (
                    "recovery_error_over_bound",
                    column(&|r| ratio(r.recovery_error, r.recovery_bound)),
                ),
                ("min_ratio", column(&|r| r.min_ratio)),
                (
                    "num_violations",
                    column(&|r| r.num_violations.map(|v| v as f64)),
                ),
            ];
            let metrics = candidates
                .into_iter()
                .filter_map(|(name, values)| spread(&values).map(|s| (name.to_string(), s)))
                .collect();
            SummaryEntry {
                d: key.0,
                n: key.1,
                k: key.2,
                s: key.3,
                runs: rows.len(),
                failures: rows.iter().filter(|r| r.error.is_some()).count(),
                metrics,
            }
        })
        .collect()
}

pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const TIMINGS_FILE: &str = "timings.csv";

fn write_csv(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let wrap = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::Parse {
            path: path.to_path_buf(),
            reason: format!("{other:?}"),
        },
    };
    let mut w = csv::Writer::from_path(path).map_err(wrap)?;
    w.write_record(header).map_err(wrap)?;
    for row in rows {
        w.write_record(&row).map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `results.csv`, `summary.json` and `timings.csv` into
/// `output_dir`. Existing results are only replaced when `force` is set.
pub fn emit_results(records: &[ResultRecord], output_dir: &Path, force: bool) -> Result<()> {
    if records.is_empty() {
        return Err(Error::param("records", "nothing to write"));
    }
    let results = output_dir.join(RESULTS_FILE);
    if results.exists() && !force {
        return Err(Error::OutputExists(output_dir.to_path_buf()));
    }
    fs::create_dir_all(output_dir).map_err(|e| Error::io(output_dir, e))?;
    write_csv(
        &results,
        RESULT_COLUMNS,
        records.iter().map(ResultRecord::fields),
    )?;
    write_csv(
        &output_dir.join(TIMINGS_FILE),
        TIMING_COLUMNS,
        records.iter().map(ResultRecord::timing_fields),
    )?;
    write_json(&output_dir.join(SUMMARY_FILE), &summarize(records))
}
