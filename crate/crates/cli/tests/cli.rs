use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn relurec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relurec"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn help_and_version_exit_zero() {
    let out = relurec(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in ["gen", "learn-rep", "recover", "sweep", "diag"] {
        assert!(text.contains(sub), "{sub} missing from help");
    }
    assert_eq!(relurec(&["--version"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(relurec(&[]).status.code(), Some(1));
    assert_eq!(relurec(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        relurec(&["recover", "--input", "x", "--out", "y", "--lambda", "-3"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn representation_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let inst = tmp.path().join("inst");
    let out = tmp.path().join("out");
    let gen = relurec(&[
        "gen",
        "--problem",
        "rep",
        "--d",
        "20",
        "--k",
        "3",
        "--seed",
        "2",
        "--out",
        path(&inst),
    ]);
    assert_eq!(
        gen.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&gen.stderr)
    );
    for f in ["instance.json", "a.csv", "c.csv", "b.csv", "m.csv", "y.csv"] {
        assert!(inst.join(f).is_file(), "{f}");
    }

    let again = relurec(&[
        "gen",
        "--problem",
        "rep",
        "--d",
        "20",
        "--k",
        "3",
        "--out",
        path(&inst),
    ]);
    assert_eq!(
        again.status.code(),
        Some(2),
        "existing output must not be overwritten"
    );

    let learn = relurec(&["learn-rep", "--input", path(&inst), "--out", path(&out)]);
    assert_eq!(
        learn.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&learn.stderr)
    );
    for f in ["m_hat.csv", "beta_hat.csv", "u_hat.csv", "report.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let r = report(&out);
    let sin = r["sin_theta"].as_f64().unwrap();
    let proc_err = r["procrustes_err"].as_f64().unwrap();
    assert!(sin <= proc_err + 1e-12);
    assert_eq!(
        fs::read_to_string(out.join("m_hat.csv"))
            .unwrap()
            .lines()
            .count(),
        20
    );
}

#[test]
fn recovery_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let inst = tmp.path().join("inst");
    let out = tmp.path().join("out");
    let gen = relurec(&[
        "gen",
        "--problem",
        "recovery",
        "--d",
        "200",
        "--k",
        "4",
        "--s",
        "5",
        "--seed",
        "3",
        "--out",
        path(&inst),
    ]);
    assert_eq!(
        gen.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&gen.stderr)
    );

    let rec = relurec(&[
        "recover",
        "--input",
        path(&inst),
        "--lambda",
        "agnostic",
        "--out",
        path(&out),
    ]);
    assert_eq!(
        rec.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&rec.stderr)
    );
    let r = report(&out);
    assert_eq!(r["converged"], true);
    assert!((r["mu"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    let values: Vec<f64> = trace.lines().map(|l| l.parse().unwrap()).collect();
    assert!(values.windows(2).all(|w| w[1] <= w[0] + 1e-12));

    // a representation instance is the wrong input for `recover`
    let rep = tmp.path().join("rep");
    relurec(&[
        "gen",
        "--problem",
        "rep",
        "--d",
        "10",
        "--k",
        "2",
        "--out",
        path(&rep),
    ]);
    let wrong = relurec(&[
        "recover",
        "--input",
        path(&rep),
        "--out",
        path(&tmp.path().join("x")),
    ]);
    assert_ne!(wrong.status.code(), Some(0));
}

#[test]
fn sweep_and_diag() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("sweep.cfg");
    fs::write(
        &cfg,
        "task = robust_recovery\nd = 80\nk = 3\ns = 2\nseeds = 1-2\n",
    )
    .unwrap();
    let out = tmp.path().join("results");
    let run = relurec(&["sweep", "--config", path(&cfg), "--out", path(&out)]);
    assert_eq!(
        run.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert_eq!(
        relurec(&["sweep", "--config", path(&cfg), "--out", path(&out)])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        relurec(&[
            "sweep",
            "--config",
            path(&cfg),
            "--out",
            path(&out),
            "--force"
        ])
        .status
        .code(),
        Some(0)
    );

    fs::write(
        &cfg,
        "task = robust_recovery\nd = 80\nk = 3\nseeds = 1\ncolour = blue\n",
    )
    .unwrap();
    let bad = relurec(&[
        "sweep",
        "--config",
        path(&cfg),
        "--out",
        path(&out),
        "--force",
    ]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("colour"));

    let diag = relurec(&[
        "diag",
        "--d",
        "100",
        "--k",
        "3",
        "--s",
        "5",
        "--samples",
        "10",
    ]);
    assert_eq!(
        diag.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&diag.stderr)
    );
    let text = String::from_utf8_lossy(&diag.stdout);
    assert!(text.contains("\"num_checked\": 10"), "{text}");
}
