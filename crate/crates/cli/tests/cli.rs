use std::path::Path;
use std::process::{Command, Output};

fn ken(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ken"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gmm(dir: &Path, name: &str, means: &str, seed: &str) -> String {
    let out = dir.join(name);
    let o = ken(&[
        "synth",
        "gmm",
        "--means",
        means,
        "--std",
        "0.2",
        "--count",
        "60",
        "--seed",
        seed,
        "--out",
        path(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    path(&out).to_owned()
}

fn report(o: &Output) -> serde_json::Value {
    serde_json::from_str(&stdout(o)).expect("report JSON on stdout")
}

#[test]
fn help_documents_every_flag() {
    let o = ken(&["score", "--help"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for flag in [
        "--test",
        "--ref",
        "--sigma",
        "--select-sigma",
        "--sigma-grid",
        "--variance-threshold",
        "--subsample",
        "--trials",
        "--eta",
        "--cutoff-abs",
        "--cutoff-rel",
        "--factor",
        "--basis",
        "--rken",
        "--top-k",
        "--top-r",
        "--oracle",
        "--out",
        "--seed",
        "--quiet",
    ] {
        assert!(text.contains(flag), "score help lacks {flag}");
    }
    for sub in ["score", "modes", "bandwidth", "synth", "verify"] {
        assert!(stdout(&ken(&["--help"])).contains(sub));
        assert_eq!(ken(&[sub, "--help"]).status.code(), Some(0));
    }
}

#[test]
fn score_requires_a_bandwidth() {
    let dir = tempfile::tempdir().unwrap();
    let a = gmm(dir.path(), "a.csv", "0,0", "1");
    let o = ken(&["score", "--test", &a, "--ref", &a]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!stderr(&o).is_empty());
    let both = ken(&[
        "score",
        "--test",
        &a,
        "--ref",
        &a,
        "--sigma",
        "1",
        "--select-sigma",
    ]);
    assert_eq!(both.status.code(), Some(1));
}

#[test]
fn identical_inputs_score_zero() {
    let dir = tempfile::tempdir().unwrap();
    let a = gmm(dir.path(), "a.csv", "0,0;2,2", "1");
    let o = ken(&[
        "score", "--test", &a, "--ref", &a, "--eta", "1", "--sigma", "1",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let value = report(&o);
    assert!(value["ken"].as_f64().unwrap() <= 1e-6);
    assert!(stderr(&o).starts_with("KEN="));
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let t = gmm(dir.path(), "t.csv", "0,0;2,0", "1");
    let r = gmm(dir.path(), "r.kenf", "0,0", "2");
    let args = [
        "--test",
        &t,
        "--ref",
        &r,
        "--select-sigma",
        "--sigma-grid",
        "0.5,1",
        "--rken",
        "--seed",
        "9",
    ];
    let first = dir.path().join("first.json");
    let second = dir.path().join("second.json");
    for out in [&first, &second] {
        let mut full = vec!["modes"];
        full.extend_from_slice(&args);
        full.extend_from_slice(&["--out", path(out)]);
        let o = ken(&full);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let lines = stdout(&o);
        assert!(lines.starts_with("KEN="), "{lines}");
        assert!(lines.contains("mode 1 eigenvalue="), "{lines}");
    }
    let a = std::fs::read(&first).unwrap();
    assert_eq!(a, std::fs::read(&second).unwrap());
    let value: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(value["config"]["seed"], 9);
    assert!(value["rken"].is_number());
    assert!(value["metadata"]["bandwidth_selection"]["sigma"].is_number());
}

#[test]
fn unreadable_and_malformed_inputs_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "1.0,2.0\n3.0\n").unwrap();
    let o = ken(&[
        "score",
        "--test",
        path(&bad),
        "--ref",
        path(&bad),
        "--sigma",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));

    let missing = dir.path().join("nope.csv");
    let o = ken(&[
        "score",
        "--test",
        path(&missing),
        "--ref",
        path(&bad),
        "--sigma",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn verify_agrees_on_random_instance_and_catches_corruption() {
    let o = ken(&[
        "verify", "--random", "--n", "6", "--m", "5", "--d", "3", "--seed", "11",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let deviation: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("max deviation: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(deviation <= 1e-6);

    let corrupt = ken(&["verify", "--random", "--corrupt"]);
    assert_eq!(corrupt.status.code(), Some(2), "{}", stdout(&corrupt));
}

#[test]
fn verify_on_identical_files_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let a = gmm(dir.path(), "a.csv", "0,0;1,1", "4");
    let out = dir.path().join("check.json");
    let o = ken(&["verify", "--test", &a, "--ref", &a, "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let deviation: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("max deviation: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(deviation <= 1e-8, "{deviation}");
    assert!(out.exists());
}

#[test]
fn synth_formats_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("s.csv");
    let bin = dir.path().join("s.kenf");
    let labels = dir.path().join("labels.txt");
    for (out, extra) in [(&csv, None), (&bin, Some(&labels))] {
        let mut args = vec![
            "synth",
            "gmm",
            "--weights",
            "0.7,0.3",
            "--means",
            "0,0;5,5",
            "--count",
            "50",
            "--seed",
            "3",
            "--out",
            path(out),
        ];
        if let Some(l) = extra {
            args.extend_from_slice(&["--labels-out", path(l)]);
        }
        let o = ken(&args);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    assert_eq!(&std::fs::read(&bin).unwrap()[..4], b"KENF");
    assert_eq!(
        std::fs::read_to_string(&labels).unwrap().lines().count(),
        50
    );
    let o = ken(&[
        "score",
        "--test",
        path(&csv),
        "--ref",
        path(&bin),
        "--sigma",
        "1",
        "--quiet",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).is_empty());
    assert!(report(&o)["ken"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn four_novel_modes_score_near_one_point_four() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("fig1col2_test.csv");
    let r = dir.path().join("fig1col2_ref.csv");
    let o = ken(&[
        "synth",
        "figure1",
        "--column",
        "2",
        "--seed",
        "2024",
        "--out-test",
        path(&t),
        "--out-ref",
        path(&r),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = ken(&[
        "score",
        "--test",
        path(&t),
        "--ref",
        path(&r),
        "--eta",
        "1",
        "--sigma",
        "0.5",
        "--factor",
        "pivoted",
        "--quiet",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let ken_value = report(&o)["ken"].as_f64().unwrap();
    assert!((ken_value - 1.40).abs() <= 0.15, "{ken_value}");
}
