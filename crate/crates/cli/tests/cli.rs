use std::path::Path;
use std::process::{Command, Output, Stdio};

fn mnx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mnx"))
        .args(args)
        .env_remove("MNX_THREADS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn data_lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

#[test]
fn density_writes_curve_with_contract_header() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run1");
    let o = mnx(&[
        "density",
        "--model",
        "wiener-const",
        "--n",
        "100",
        "--replications",
        "100",
        "--refinement",
        "4",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let lines = data_lines(&out.join("qn_curve.csv"));
    assert_eq!(lines[0], "z,first_order,second_order,n,N,seed");
    assert_eq!(lines.len(), 82);
    let first: Vec<&str> = lines[41].split(',').collect();
    assert_eq!(first[0], "0");
    assert_eq!(&first[3..], ["100", "100", "1"]);

    let m: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("moments.json")).unwrap()).unwrap();
    assert!((m["m1"].as_f64().unwrap() - 2f64.sqrt() / 3.0).abs() < 1e-12);
    assert_eq!(m["m2"], 0.0);
    assert_eq!(m["N"], 100);
    assert_eq!(m["header"]["seed"], 1);
}

#[test]
fn every_csv_starts_with_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let o = mnx(&[
        "coeffs",
        "--model",
        "ou",
        "--n",
        "8",
        "-N",
        "100",
        "--refinement",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("coeffs.csv")).unwrap();
    let head: Vec<&str> = text.split("\r\n").take(4).collect();
    assert!(head[0].starts_with("# mnx "));
    assert!(head[1].starts_with("# config_sha256 ") && head[1].len() == 16 + 64);
    assert_eq!(head[2], "# seed 1");
    assert_eq!(head[3], "replication,c_inf,f_inf,m,k,z_degree,coefficient");
}

#[test]
fn study_has_one_row_per_n_function_and_order() {
    let dir = tempfile::tempdir().unwrap();
    let o = mnx(&[
        "study",
        "--model",
        "wiener-const",
        "--n-list",
        "4,8,16",
        "-N",
        "100",
        "--refinement",
        "2",
        "--functions",
        "z,z3,cdf",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let lines = data_lines(&dir.path().join("errors.csv"));
    assert_eq!(lines.len(), 1 + 3 * 3 * 2);
    let mut keys: Vec<String> = lines[1..]
        .iter()
        .map(|l| l.split(',').take(3).collect::<Vec<_>>().join(","))
        .collect();
    keys.sort();
    keys.dedup();
    assert_eq!(keys.len(), 18);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"version": 1, "model": "wiener-const", "seed": 7, "n": 16, "replications": 100, "refinement": 2}"#,
    )
    .unwrap();
    let out = dir.path().join("o");
    let o = mnx(&[
        "density",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "9",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let lines = data_lines(&out.join("qn_curve.csv"));
    assert!(lines[1].ends_with(",16,100,9"), "{}", lines[1]);
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    for args in [
        vec!["density", "--model", "ou", "--n", "1", "--out", d],
        vec!["density", "--model", "no-such-model", "--out", d],
        vec!["density", "--model", "ou", "--param", "kappa", "--out", d],
        vec!["density", "--model", "ou", "--unknown-flag"],
        vec!["study", "--model", "ou", "--n-list", "8,4,16", "--out", d],
        vec!["density", "--model", "ou", "-N", "5", "--out", d],
    ] {
        let o = mnx(&args);
        assert_eq!(
            code(&o),
            2,
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"version": 1, "model": "ou", "sead": 3}"#).unwrap();
    let o = mnx(&["density", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("sead"));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn unwritable_output_exits_one_without_partial_files() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let o = mnx(&[
        "density",
        "--model",
        "wiener-const",
        "--n",
        "8",
        "-N",
        "100",
        "--refinement",
        "2",
        "--out",
        blocker.join("sub").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 1);
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn env_thread_fallback_gives_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str, threads: Option<&str>| {
        let out = dir.path().join(sub);
        let mut c = Command::new(env!("CARGO_BIN_EXE_mnx"));
        c.args([
            "residual",
            "--model",
            "ou",
            "--n-list",
            "4,8,16",
            "-N",
            "100",
            "--refinement",
            "4",
        ])
        .arg("--out")
        .arg(&out)
        .stdout(Stdio::null());
        match threads {
            Some(t) => c.env("MNX_THREADS", t),
            None => c.env_remove("MNX_THREADS"),
        };
        assert!(c.status().unwrap().success());
        std::fs::read(out.join("residual.csv")).unwrap()
    };
    assert_eq!(run("a", Some("2")), run("b", None));
}

#[test]
fn validate_reports_guard_results() {
    let dir = tempfile::tempdir().unwrap();
    let o = mnx(&[
        "validate",
        "--model",
        "wiener-sin",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("validation.json")).unwrap())
            .unwrap();
    assert_eq!(v["pass"], true);
    assert!(v["min_abs_a"].as_f64().unwrap() > 0.0);
}
