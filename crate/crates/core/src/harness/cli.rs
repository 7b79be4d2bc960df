use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use super::config::ExperimentConfig;
use super::pipeline::{
    default_recovery_bias, run_diagnostic, run_recovery, run_representation, RecSettings,
    RepSettings,
};
use super::sweep::{emit_results, run_sweep, RESULTS_FILE};
use crate::bias::{BiasModel, BiasSpec};
use crate::error::{Error, Result};
use crate::generative::{RecoverySpec, RepresentationSpec, DEFAULT_OUTLIER_MAGNITUDE};
use crate::io::{
    load_instance, read_manifest, save_recovery, save_representation, write_json, write_matrix,
    write_optional_vector, write_vector, Instance, MANIFEST,
};
use crate::lasso::{LambdaRule, Method, NonlinearityStats, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::replearn::{FillStrategy, DEFAULT_C0};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "relurec",
    version,
    about = "Synthetic experiments on learning from rectified linear observations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate an instance directory
    Gen(GenArgs),
    /// Estimate the pre-activation matrix and its column space
    LearnRep(LearnRepArgs),
    /// Recover a latent code from corrupted measurements
    Recover(RecoverArgs),
    /// Run a configured parameter sweep
    Sweep(SweepArgs),
    /// Check the restricted lower bound on a random design
    Diag(DiagArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Problem {
    Rep,
    Recovery,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    problem: Problem,
    #[arg(long)]
    d: usize,
    /// Columns of the representation problem [default: 2d]
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    s: usize,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 0.01)]
    delta: f64,
    #[arg(long, default_value_t = DEFAULT_OUTLIER_MAGNITUDE)]
    magnitude: f64,
    /// Bias config string, e.g. `exp:rate=1,shift=-2` or `const:value=0`
    #[arg(long)]
    bias: Option<String>,
    /// Redraw row biases until every mixed row has at least this margin
    #[arg(long)]
    target_nu: Option<f64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct LearnRepArgs {
    #[arg(long)]
    input: PathBuf,
    /// [default: from the manifest]
    #[arg(long)]
    gamma: Option<f64>,
    /// [default: from the manifest]
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long, default_value = "mid", value_parser = parse_fill)]
    fill: FillStrategy,
    /// [default: from the manifest]
    #[arg(long)]
    bias: Option<String>,
    #[arg(long, default_value_t = DEFAULT_C0)]
    c0: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct RecoverArgs {
    #[arg(long)]
    input: PathBuf,
    /// A positive number, `oracle` or `agnostic`
    #[arg(long, default_value = "oracle", value_parser = parse_lambda)]
    lambda: LambdaRule,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    max_iter: usize,
    #[arg(long, default_value_t = 1.0)]
    c_tilde: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `output_dir` from the config
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct DiagArgs {
    #[arg(long)]
    d: usize,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    s: usize,
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long, default_value_t = 11)]
    seed: u64,
    #[arg(long, default_value_t = 0.01)]
    delta: f64,
    #[arg(long, default_value = "const:value=0")]
    bias: String,
    #[arg(long, default_value = "oracle", value_parser = parse_lambda)]
    lambda: LambdaRule,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

fn parse_lambda(s: &str) -> std::result::Result<LambdaRule, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_fill(s: &str) -> std::result::Result<FillStrategy, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code: 0 on success, 1 on usage errors, 2 on runtime
/// failures.
pub fn cli_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Gen(args) => gen(args),
        Command::LearnRep(args) => learn_rep(args),
        Command::Recover(args) => recover(args),
        Command::Sweep(args) => sweep(args),
        Command::Diag(args) => diag(args),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config { .. }
                | Error::BiasConfig { .. }
                | Error::InvalidParameter { .. } => EXIT_USAGE,
                _ => EXIT_RUNTIME,
            }
        }
    }
}

fn guard(dir: &Path, marker: &str, force: bool) -> Result<()> {
    if dir.join(marker).exists() && !force {
        return Err(Error::OutputExists(dir.to_path_buf()));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn gen(args: GenArgs) -> Result<()> {
    guard(&args.out, MANIFEST, args.force)?;
    match args.problem {
        Problem::Rep => {
            let model = match &args.bias {
                Some(text) => text.parse()?,
                None => BiasModel::default_for_gamma(args.gamma),
            };
            let n = args.n.unwrap_or(2 * args.d);
            let mut spec = RepresentationSpec::new(args.d, n, args.k, args.gamma, model);
            spec.target_nu = args.target_nu;
            let inst = spec.generate(args.seed)?;
            save_representation(&args.out, &inst)?;
            println!(
                "wrote {} x {} representation instance (realized nu {}) to {}",
                inst.d(),
                inst.n(),
                inst.realized_nu,
                args.out.display()
            );
        }
        Problem::Recovery => {
            let bias: BiasSpec = match &args.bias {
                Some(text) => text.parse()?,
                None => default_recovery_bias(),
            };
            let inst = RecoverySpec::new(args.d, args.k, args.s, args.delta, bias)
                .with_outlier_magnitude(args.magnitude)
                .generate(args.seed)?;
            save_recovery(&args.out, &inst)?;
            println!(
                "wrote d = {}, k = {}, s = {} recovery instance to {}",
                inst.d(),
                inst.k(),
                inst.s,
                args.out.display()
            );
        }
    }
    Ok(())
}

fn print_json<T: Serialize>(value: &T) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("plain data serializes")
    );
}

fn learn_rep(args: LearnRepArgs) -> Result<()> {
    let inst = match load_instance(&args.input)? {
        Instance::Representation(inst) => inst,
        Instance::Recovery(_) => {
            return Err(Error::param(
                "input",
                "learn-rep needs a representation instance",
            ))
        }
    };
    let manifest = read_manifest(&args.input)?;
    guard(&args.out, "report.json", args.force)?;
    let model = match &args.bias {
        Some(text) => text.parse()?,
        None => inst.bias,
    };
    let settings = RepSettings {
        model,
        gamma: args.gamma.or(manifest.gamma).unwrap_or(inst.gamma),
        nu: args.nu.or(manifest.nu),
        fill: args.fill,
        c0: args.c0,
    };
    let out = run_representation(&inst, &settings)?;
    write_matrix(&args.out.join("m_hat.csv"), &out.estimate.m_hat)?;
    write_optional_vector(&args.out.join("beta_hat.csv"), &out.estimate.beta_hats)?;
    write_matrix(&args.out.join("u_hat.csv"), &out.u_hat)?;
    write_json(&args.out.join("report.json"), &out.report)?;
    print_json(&out.report);
    Ok(())
}

fn recover(args: RecoverArgs) -> Result<()> {
    let inst = match load_instance(&args.input)? {
        Instance::Recovery(inst) => inst,
        Instance::Representation(_) => {
            return Err(Error::param("input", "recover needs a recovery instance"))
        }
    };
    guard(&args.out, "report.json", args.force)?;
    let stats = NonlinearityStats::compute(&inst.bias, Method::Quadrature)?;
    let settings = RecSettings {
        rule: args.lambda,
        tol: args.tol,
        max_iter: args.max_iter,
        c_tilde: args.c_tilde,
    };
    let out = run_recovery(&inst, &stats, &settings)?;
    write_vector(&args.out.join("c_hat.csv"), &out.solution.c_hat)?;
    write_vector(&args.out.join("e_hat.csv"), &out.solution.e_hat)?;
    write_vector(
        &args.out.join("trace.csv"),
        &nalgebra::DVector::from_vec(out.solution.objective_trace.clone()),
    )?;
    write_json(&args.out.join("report.json"), &out.report)?;
    print_json(&out.report);
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<()> {
    let config = ExperimentConfig::from_file(&args.config)?;
    let out_dir = args.out.unwrap_or_else(|| config.output_dir.clone());
    if out_dir.join(RESULTS_FILE).exists() && !args.force {
        return Err(Error::OutputExists(out_dir));
    }
    let records = run_sweep(&config)?;
    emit_results(&records, &out_dir, args.force)?;
    let failed = records.iter().filter(|r| r.error.is_some()).count();
    println!(
        "{} records ({failed} failed) written to {}",
        records.len(),
        out_dir.join(RESULTS_FILE).display()
    );
    Ok(())
}

fn diag(args: DiagArgs) -> Result<()> {
    let bias: BiasSpec = args.bias.parse()?;
    if let Some(dir) = &args.out {
        guard(dir, "report.json", args.force)?;
    }
    let spec = RecoverySpec::new(args.d, args.k, args.s, args.delta, bias);
    let report = run_diagnostic(&spec, args.lambda, args.samples, args.seed)?;
    if let Some(dir) = &args.out {
        write_json(&dir.join("report.json"), &report)?;
    }
    print_json(&report);
    Ok(())
}
