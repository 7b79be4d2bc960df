use std::fs;
use std::path::Path;

use relurec::harness::{emit_results, run_sweep, ExperimentConfig, RESULTS_FILE, RESULT_COLUMNS};
use relurec::Error;

const RESULTS_HEADER: &str = "task,d,n,k,s,gamma,nu,delta,bias,lambda_mode,fill,seed,\
frob_err_sq,rep_bound,bound_vacuous,sin_theta,procrustes_err,recovery_error,recovery_bound,\
mu,lambda_used,iterations,converged,num_checked,num_violations,min_ratio,error";

const SMALL_REP: &str = "task = rep_learning\nd = 12, 20\nn = 2d\nk = 2\nseeds = 1-3\n";
const SMALL_REC: &str =
    "task = robust_recovery\nd = 60\nk = 3\ns = 0.05d\nbias = const:value=0\nseeds = 4,5\n";
const SMALL_DIAG: &str = "task = diagnostics\nd = 80\nk = 3\ns = 4\nsamples = 20\nseeds = 2\n";

fn run_into(text: &str, dir: &Path) -> Vec<u8> {
    let cfg: ExperimentConfig = text.parse().unwrap();
    let records = run_sweep(&cfg).unwrap();
    emit_results(&records, dir, true).unwrap();
    fs::read(dir.join(RESULTS_FILE)).unwrap()
}

#[test]
fn results_header_is_frozen() {
    assert_eq!(RESULT_COLUMNS.join(","), RESULTS_HEADER);
    let dir = tempfile::tempdir().unwrap();
    let bytes = run_into(SMALL_REP, dir.path());
    let text = String::from_utf8(bytes).unwrap();
    assert_eq!(text.lines().next().unwrap(), RESULTS_HEADER);
}

#[test]
fn sweeps_are_byte_reproducible() {
    for text in [SMALL_REP, SMALL_REC, SMALL_DIAG] {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        assert_eq!(run_into(text, a.path()), run_into(text, b.path()), "{text}");
    }
}

#[test]
fn sweep_records_follow_configuration_order() {
    let cfg: ExperimentConfig = SMALL_REP.parse().unwrap();
    let records = run_sweep(&cfg).unwrap();
    let order: Vec<(usize, u64)> = records.iter().map(|r| (r.d, r.seed)).collect();
    assert_eq!(
        order,
        vec![(12, 1), (12, 2), (12, 3), (20, 1), (20, 2), (20, 3)]
    );
    assert!(records
        .iter()
        .all(|r| r.n == Some(2 * r.d) && r.error.is_none()));
    assert!(records
        .iter()
        .all(|r| r.sin_theta.unwrap() <= r.procrustes_err.unwrap() + 1e-12));

    let cfg: ExperimentConfig = SMALL_REC.parse().unwrap();
    let records = run_sweep(&cfg).unwrap();
    assert_eq!(records.len(), 2);
    assert!(records
        .iter()
        .all(|r| r.s == Some(3) && r.converged == Some(true)));

    let cfg: ExperimentConfig = SMALL_DIAG.parse().unwrap();
    let records = run_sweep(&cfg).unwrap();
    assert_eq!(records[0].num_checked, Some(20));
}

#[test]
fn failing_cells_are_recorded_not_fatal() {
    // k larger than d cannot be generated; the sweep keeps going
    let cfg: ExperimentConfig = "task = rep_learning\nd = 3, 10\nk = 4\nseeds = 1\n"
        .parse()
        .unwrap();
    let records = run_sweep(&cfg).unwrap();
    assert_eq!(records.len(), 2);
    assert!(records[0].error.as_deref().unwrap().contains("k"));
    assert!(records[1].error.is_none());
}

#[test]
fn existing_results_need_force() {
    let dir = tempfile::tempdir().unwrap();
    let cfg: ExperimentConfig = SMALL_DIAG.parse().unwrap();
    let records = run_sweep(&cfg).unwrap();
    emit_results(&records, dir.path(), false).unwrap();
    assert!(matches!(
        emit_results(&records, dir.path(), false),
        Err(Error::OutputExists(_))
    ));
    emit_results(&records, dir.path(), true).unwrap();
    for name in ["results.csv", "timings.csv", "summary.json"] {
        assert!(dir.path().join(name).is_file(), "{name}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary[0]["runs"], 1);
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["rep_learning.cfg", "robust_recovery.cfg", "diagnostics.cfg"] {
        ExperimentConfig::from_file(&root.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}
