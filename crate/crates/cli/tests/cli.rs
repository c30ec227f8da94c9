use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::Rng;
use rand_distr::StandardNormal;

use knockagg::rng::rng_from_seed;

fn knockagg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_knockagg"))
        .args(args)
        .env_remove("KNOCKAGG_SEED")
        .output()
        .expect("spawn knockagg")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Raw (unnormalized) Gaussian design and a response with two signals.
fn write_node(dir: &Path, name: &str, n: usize, p: usize, seed: u64) -> (PathBuf, PathBuf) {
    let mut rng = rng_from_seed(seed);
    let x: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.sample(StandardNormal)).collect()).collect();
    let y: Vec<f64> = x
        .iter()
        .map(|row| 0.8 * row[0] - 0.8 * row[1] + rng.sample::<f64, _>(StandardNormal))
        .collect();
    let design = dir.join(format!("{name}_x.csv"));
    let response = dir.join(format!("{name}_y.txt"));
    let body: String = x
        .iter()
        .map(|r| r.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",") + "\n")
        .collect();
    fs::write(&design, body).unwrap();
    fs::write(&response, y.iter().map(|v| format!("{v}\n")).collect::<String>()).unwrap();
    (design, response)
}

fn run_node(dir: &Path, design: &Path, response: &Path, out: &str, extra: &[&str]) -> Output {
    let out = dir.join(out);
    let mut args = vec!["node", "--design", s(design), "--response", s(response), "--out", s(&out)];
    args.extend_from_slice(extra);
    knockagg(&args)
}

#[test]
fn node_writes_a_deterministic_summary() {
    let dir = tempfile::tempdir().unwrap();
    let (x, y) = write_node(dir.path(), "a", 40, 10, 1);
    let out = run_node(dir.path(), &x, &y, "a1.kag", &["--seed", "3"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = run_node(dir.path(), &x, &y, "a2.kag", &["--seed", "3"]);
    assert_eq!(code(&out), 0);
    let a = fs::read(dir.path().join("a1.kag")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("a2.kag")).unwrap());
    // raw32 message: 19-byte header, 2 bytes of signs, 4 bytes per W
    assert_eq!(a.len(), 19 + 2 + 40);
    assert_eq!(&a[..4], b"KAG1");
    let files: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert!(files.iter().all(|f| !f.to_string_lossy().contains(".tmp")), "{files:?}");
}

#[test]
fn node_rejects_short_designs_and_bad_cells() {
    let dir = tempfile::tempdir().unwrap();
    let (x, y) = write_node(dir.path(), "short", 15, 10, 2);
    let out = run_node(dir.path(), &x, &y, "s.kag", &[]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("n >= 2p"), "{}", stderr(&out));

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "1,2\n3,oops\n").unwrap();
    let out = run_node(dir.path(), &bad, &y, "b.kag", &[]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("row 2, column 2"), "{}", stderr(&out));

    let out = knockagg(&["node", "--bogus"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn aggregate_combines_node_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for i in 0..3 {
        let (x, y) = write_node(dir.path(), &format!("n{i}"), 60, 8, 10 + i);
        let name = format!("n{i}.kag");
        let id = i.to_string();
        let out = run_node(dir.path(), &x, &y, &name, &["--node-id", &id, "--mode", "fixed16"]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        files.push(dir.path().join(name));
    }
    let csv_path = dir.path().join("sel.csv");
    let mut args = vec!["aggregate", "--q", "0.2", "--gamma", "max", "--out", s(&csv_path)];
    args.extend(files.iter().map(|f| s(f)));
    let out = knockagg(&args);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = fs::read_to_string(&csv_path).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "feature_index,W,chi,P,omega,rejected");
    assert_eq!(lines.len(), 9);

    let mut args = vec!["aggregate", "--q", "1.5"];
    args.extend(files.iter().map(|f| s(f)));
    assert_eq!(code(&knockagg(&args)), 1);

    let (x, y) = write_node(dir.path(), "wide", 60, 9, 20);
    assert_eq!(code(&run_node(dir.path(), &x, &y, "wide.kag", &["--mode", "fixed16"])), 0);
    let wide = dir.path().join("wide.kag");
    let out = knockagg(&["aggregate", s(&files[0]), s(&wide)]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("p = 9"), "{}", stderr(&out));

    let garbage = dir.path().join("garbage.kag");
    fs::write(&garbage, b"KAG1 not really").unwrap();
    assert_eq!(code(&knockagg(&["aggregate", s(&garbage)])), 1);
}

#[test]
fn baselines_and_knockoff_check() {
    let dir = tempfile::tempdir().unwrap();
    let (x0, y0) = write_node(dir.path(), "b0", 50, 6, 30);
    let (x1, y1) = write_node(dir.path(), "b1", 50, 6, 31);
    for method in ["ols", "vote"] {
        let out = knockagg(&[
            "baseline", "--method", method, "--design", s(&x0), "--design", s(&x1), "--response", s(&y0),
            "--response", s(&y1),
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        let csv = String::from_utf8(out.stdout).unwrap();
        assert_eq!(csv.lines().count(), 7, "{method}");
    }
    let out = knockagg(&["validate-knockoffs", "--design", s(&x0), "--seed", "4"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("pass"));
}

fn metrics_rows(dir: &Path) -> Vec<String> {
    fs::read_to_string(dir.join("metrics.csv")).unwrap().lines().map(String::from).collect()
}

#[test]
fn bundled_fig1_small_covers_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = knockagg(&["experiment", "--bundled", "fig1_iid_small", "--replicates", "1", "--out-dir", s(dir.path())]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows = metrics_rows(dir.path());
    let means: Vec<&String> = rows.iter().filter(|r| r.starts_with("mean,")).collect();
    assert_eq!(means.len(), 12);
    let mut seen: Vec<(String, String)> = means
        .iter()
        .map(|r| {
            let f: Vec<&str> = r.split(',').collect();
            (f[4].to_string(), f[5].to_string())
        })
        .collect();
    seen.sort();
    seen.dedup();
    assert_eq!(seen.len(), 12);
    assert!(dir.path().join("power_knockagg_m5.dat").exists());
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 12);
}

#[test]
fn bundled_table1_small_has_three_methods() {
    let dir = tempfile::tempdir().unwrap();
    let out = knockagg(&["experiment", "--bundled", "table1_small", "--replicates", "2", "--out-dir", s(dir.path())]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows = metrics_rows(dir.path());
    let methods: Vec<&str> = rows
        .iter()
        .filter(|r| r.starts_with("mean,"))
        .map(|r| r.split(',').nth(1).unwrap())
        .collect();
    assert_eq!(methods, ["knockagg", "ols_bhq", "lasso_vote"]);
    assert!(rows[0].contains("fdp_sd"));
}

#[test]
fn seed_override_and_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(
        &cfg,
        r#"{"experiment":"fdr","p":20,"n":60,"m":3,"k":8,"amplitude":4.0,"replicates":3,"seed":1}"#,
    )
    .unwrap();
    let run = |sub: &str, extra: &[&str], env: Option<&str>| {
        let out_dir = dir.path().join(sub);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_knockagg"));
        cmd.args(["experiment", s(&cfg), "--out-dir", s(&out_dir)]).args(extra);
        match env {
            Some(v) => cmd.env("KNOCKAGG_SEED", v),
            None => cmd.env_remove("KNOCKAGG_SEED"),
        };
        let out = cmd.output().unwrap();
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        fs::read_to_string(out_dir.join("metrics.csv")).unwrap()
    };
    let base = run("a", &[], None);
    assert_eq!(base, run("b", &[], None));
    let other = run("c", &["--seed", "2"], None);
    assert_ne!(base, other);
    assert_eq!(other, run("d", &[], Some("2")));
    assert_eq!(base, run("e", &["--seed", "1"], Some("2")));
}

#[test]
fn experiment_validation_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"experiment":"fdr","p":10,"n":15,"m":2,"k":3,"amplitude":2.5,"replicates":3}"#).unwrap();
    let out = knockagg(&["experiment", s(&cfg), "--out-dir", s(dir.path())]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("n >= 2p"), "{}", stderr(&out));
    fs::write(&cfg, r#"{"experiment":"fdr","p":10,"typo":1}"#).unwrap();
    assert_eq!(code(&knockagg(&["experiment", s(&cfg)])), 1);
    assert_eq!(code(&knockagg(&["experiment", "--bundled", "table1_full"])), 1);
    let out = knockagg(&["experiment", "--list"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("fig1_iid_small"));
}

#[test]
fn recovery_config_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("r.json");
    fs::write(&cfg, r#"{"experiment":"recovery","p":50,"m":[2,4],"replicates":2,"seed":3}"#).unwrap();
    let out = knockagg(&["experiment", s(&cfg), "--out-dir", s(dir.path())]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = fs::read_to_string(dir.path().join("recovery.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}
