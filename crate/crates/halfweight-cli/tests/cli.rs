use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_halfweight"));
    c.env_remove("HALFWEIGHT_CONFIG");
    c
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn halfweight");
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn build_bundle(dir: &Path, n_max: usize) -> std::path::PathBuf {
    let path = dir.join("bundle.json");
    run_ok(bin().args(["eigenform", "--n-max", &n_max.to_string(), "--out"]).arg(&path));
    path
}

/// Rows of a CSV written by the CLI: the echo line, the header, then data.
fn csv_rows(path: &Path) -> (Value, Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let echo = lines.next().unwrap().strip_prefix("# ").expect("echo line");
    let header = lines.next().unwrap().split(',').map(str::to_owned).collect();
    let rows = lines.map(|l| l.split(',').map(str::to_owned).collect()).collect();
    (serde_json::from_str(echo).unwrap(), header, rows)
}

fn squarefree_or_even_powers(mut n: u64) -> bool {
    let mut p = 3;
    while p * p <= n {
        let mut k = 0;
        while n % p == 0 {
            n /= p;
            k += 1;
        }
        if k > 1 && k % 2 == 1 {
            return false;
        }
        p += 2;
    }
    true
}

#[test]
fn charsum_rows_match_admissible_count() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("charsum.csv");
    let (d_max, m_max) = (60u64, 12u64);
    let out = run_ok(
        bin()
            .args(["charsum-verify", "--d-max", &d_max.to_string(), "--m-max", &m_max.to_string(), "--out"])
            .arg(&csv),
    );
    let mut want = 0;
    for d in 1..=d_max {
        let e = d.trailing_zeros();
        if e > 2 || !squarefree_or_even_powers(d >> e) {
            continue;
        }
        want += (1..=m_max).filter(|m| e != 1 || m % 4 == 1).count();
    }
    let summary = stdout_json(&out);
    assert_eq!(summary["rows"].as_u64().unwrap() as usize, want);
    assert_eq!(summary["pass"], Value::Bool(true));
    let (echo, header, rows) = csv_rows(&csv);
    assert_eq!(echo["d_max"], d_max);
    assert_eq!(header[..5], ["e", "a", "b", "d", "m"]);
    assert_eq!(rows.len(), want);
}

#[test]
fn eigenform_then_cusps() {
    let dir = TempDir::new().unwrap();
    let bundle = build_bundle(dir.path(), 2000);
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&bundle).unwrap()).unwrap();
    assert_eq!(doc["config"]["n_max"], 2000);
    let csv = dir.path().join("cusps.csv");
    run_ok(bin().args(["cusps", "--n-max", "100", "--in"]).arg(&bundle).arg("--out").arg(&csv));
    let (_, header, rows) = csv_rows(&csv);
    assert_eq!(header, ["n", "f_re", "f_im", "g_re", "g_im", "h_re", "h_im"]);
    assert_eq!(rows.len(), 100);
    // λ_f(1) = 1 after normalization.
    assert_eq!(rows[0][1].parse::<f64>().unwrap(), 1.0);
    assert!(rows[0][2].parse::<f64>().unwrap().abs() < 1e-12);

    let too_many = bin().args(["cusps", "--n-max", "5000", "--in"]).arg(&bundle).output().unwrap();
    assert!(!too_many.status.success());
}

#[test]
fn lflat_grid_independent_of_threads() {
    let dir = TempDir::new().unwrap();
    let bundle = build_bundle(dir.path(), 20_000);
    let grid = |name: &str, extra: &[&str]| {
        let out = dir.path().join(name);
        run_ok(
            bin()
                .args(extra)
                .args(["lflat-grid", "--sigma", "2:3:0.5", "--tau", "0:4:2", "--r-max", "5", "--in"])
                .arg(&bundle)
                .arg("--out")
                .arg(&out),
        );
        out
    };
    let a = grid("a.csv", &["--threads", "1"]);
    let b = grid("b.csv", &[]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let (echo, header, rows) = csv_rows(&a);
    assert_eq!(echo["r_max"], 5);
    assert_eq!(header, ["sigma", "tau", "re", "im", "abs", "r_max", "T", "err_kernel", "err_tail", "err_octave"]);
    assert_eq!(rows.len(), 9);
    let plot = std::fs::read_to_string(dir.path().join("a.gp")).unwrap();
    assert!(plot.contains("'a.csv'"));
}

#[test]
fn missing_input_fails() {
    let out = bin().args(["cusps", "--n-max", "10", "--in", "/nonexistent/bundle.json"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bundle"));
}

#[test]
fn bad_range_fails() {
    let dir = TempDir::new().unwrap();
    let bundle = build_bundle(dir.path(), 2000);
    let out = bin()
        .args(["lflat-grid", "--sigma", "3:2:1", "--tau", "0", "--in"])
        .arg(&bundle)
        .arg("--out")
        .arg(dir.path().join("g.csv"))
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn config_from_env_and_flag() {
    let dir = TempDir::new().unwrap();
    let env_cfg = dir.path().join("env.json");
    std::fs::write(&env_cfg, r#"{"ell": 1}"#).unwrap();
    let flag_cfg = dir.path().join("flag.json");
    std::fs::write(&flag_cfg, r#"{"ell": 5}"#).unwrap();

    // ell = 1 is rejected, so the env file is really read.
    let out = bin()
        .env("HALFWEIGHT_CONFIG", &env_cfg)
        .args(["charsum-verify", "--d-max", "10", "--m-max", "4"])
        .output()
        .unwrap();
    assert!(!out.status.success());

    // The flag wins over the environment.
    let csv = dir.path().join("c.csv");
    run_ok(
        bin()
            .env("HALFWEIGHT_CONFIG", &env_cfg)
            .arg("--config")
            .arg(&flag_cfg)
            .args(["charsum-verify", "--d-max", "10", "--m-max", "4", "--out"])
            .arg(&csv),
    );
    let (echo, _, _) = csv_rows(&csv);
    assert_eq!(echo["ell"], 5);

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"elll": 6}"#).unwrap();
    let out = bin().arg("--config").arg(&bad).args(["charsum-verify", "--d-max", "5"]).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn signs_and_riesz_report() {
    let dir = TempDir::new().unwrap();
    let bundle = build_bundle(dir.path(), 3000);
    let s = stdout_json(&run_ok(bin().args(["signs", "--x", "2000", "--in"]).arg(&bundle)));
    assert!(s["report"]["changes"].as_u64().unwrap() > 0);
    let r = stdout_json(&run_ok(bin().args(["riesz", "--x", "2000", "--in"]).arg(&bundle)));
    assert_eq!(r["bound"]["pass"], Value::Bool(true));
}
