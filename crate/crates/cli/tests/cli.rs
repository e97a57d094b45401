use std::fs;
use std::path::Path;
use std::process::Command;

fn ftkreg(args: &[&str]) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_ftkreg")).args(args).output().expect("spawn ftkreg");
    assert!(out.status.success(), "ftkreg {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

const SPEC: &str = r#"{
  "model": "legendre_lift",
  "grid": {"start": -1.0, "end": 1.0, "n_points": 60},
  "response": "integral_square",
  "noise": {"gaussian_iid": {"sd": 0.1}},
  "mar": {"expit": {"offset": 1.0}},
  "T": 30.0,
  "delta": 0.1,
  "seed": 7
}"#;

const SIM1: &str = r#"{
  "T_values": [4.0, 6.0],
  "mar_rates": [0.0, 0.3],
  "delta": 0.05,
  "M": 3,
  "seed": 5,
  "grid_points": 40,
  "pilot_draws": 2000,
  "continuous": {"semimetric": "l2deriv2", "bandwidth": {"knn": [5, 10]}, "cv": {"exclusion": 20, "max_points": 5}},
  "discrete": {"semimetric": "l2deriv2", "bandwidth": {"knn": [2, 3]}}
}"#;

const SIM2: &str = r#"{
  "n_fixed": 30,
  "delta_grid": [0.1, 0.2, 0.3],
  "eval_curves": 5,
  "N": 4,
  "mar_rates": [0.0, 0.2],
  "seed": 3,
  "grid_points": 30,
  "pilot_draws": 2000,
  "estimator": {"semimetric": "l2deriv1", "bandwidth": {"knn": [3, 5, 8]}}
}"#;

fn simulate(dir: &Path) -> String {
    let spec = write(dir, "spec.json", SPEC);
    let data = dir.join("data.csv").to_str().unwrap().to_owned();
    ftkreg(&["simulate", "--spec", &spec, "--out", &data]);
    data
}

fn query_file(dir: &Path) -> String {
    let mut text = String::from("# grid,-1,1,60\n");
    text.push_str(&(0..60).map(|i| format!("v_{i}")).collect::<Vec<_>>().join(","));
    text.push('\n');
    for level in [0.8, -0.3] {
        let row: Vec<String> = (0..60)
            .map(|i| {
                let s = -1.0 + 2.0 * i as f64 / 59.0;
                format!("{}", level * s + 0.5 * (1.5 * s * s - 0.5))
            })
            .collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    write(dir, "x.csv", &text)
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path());
    let first = fs::read(&data).unwrap();
    ftkreg(&["--threads", "1", "simulate", "--spec", &write(dir.path(), "spec.json", SPEC), "--out", &data]);
    assert_eq!(first, fs::read(&data).unwrap());
    let text = String::from_utf8(first).unwrap();
    assert!(text.starts_with("# grid,"));
    assert_eq!(text.lines().count(), 2 + 300);
}

#[test]
fn ci_rows_have_documented_columns() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path());
    let x = query_file(dir.path());
    for psi in ["identity", "cdf:0.3", "quantile:0.5"] {
        let out = String::from_utf8(ftkreg(&["ci", "--data", &data, "--x", &x, "--psi", psi, "--level", "0.9"])).unwrap();
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[0], "point,lower,upper,method,h,p_hat,Fx_hat,M1,M2,W2bar");
        assert_eq!(lines.len(), 3, "{psi}: {out}");
        for row in &lines[1..] {
            let f: Vec<&str> = row.split(',').collect();
            assert_eq!(f.len(), 10);
            assert_eq!(f[3], "asymptotic");
            let (p, lo, hi): (f64, f64, f64) = (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap());
            assert!(lo <= p && p <= hi);
        }
    }
}

#[test]
fn ci_reads_estimator_config() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path());
    let x = query_file(dir.path());
    let cfg = write(dir.path(), "est.toml", "kernel = \"quadratic\"\nsemimetric = \"l2\"\nbandwidth = { fixed = 0.9 }\n");
    let out = String::from_utf8(ftkreg(&["ci", "--data", &data, "--x", &x, "--config", &cfg])).unwrap();
    let h: f64 = out.lines().nth(1).unwrap().split(',').nth(4).unwrap().parse().unwrap();
    assert_eq!(h, 0.9);

    let bad = write(dir.path(), "bad.toml", "bandwith = { fixed = 0.9 }\n");
    let status = Command::new(env!("CARGO_BIN_EXE_ftkreg"))
        .args(["ci", "--data", &data, "--x", &x, "--config", &bad])
        .output()
        .unwrap()
        .status;
    assert!(!status.success());
}

#[test]
fn bootstrap_ci_is_identical_across_threads() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path());
    let x = query_file(dir.path());
    let args = ["ci", "--data", &data, "--x", &x, "--method", "bootstrap", "--B", "300", "--seed", "11"];
    let one = ftkreg(&[&["--threads", "1"], &args[..]].concat());
    let four = ftkreg(&[&["--threads", "4"], &args[..]].concat());
    let again = ftkreg(&args);
    assert_eq!(one, four);
    assert_eq!(one, again);
    assert!(String::from_utf8(one).unwrap().lines().nth(1).unwrap().contains(",bootstrap,"));
}

#[test]
fn sim1_outputs_are_identical_across_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "sim1.json", SIM1);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ftkreg(&["--threads", "1", "sim1", "--config", &cfg, "--out-dir", a.to_str().unwrap()]);
    ftkreg(&["--threads", "3", "sim1", "--config", &cfg, "--out-dir", b.to_str().unwrap()]);
    for f in ["table1.csv", "sim1_replicates.csv", "meta.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let table = fs::read_to_string(a.join("table1.csv")).unwrap();
    assert_eq!(table.lines().next().unwrap(), "T,mar,stat,continuous,discrete,failrate");
    assert_eq!(table.lines().count(), 1 + 2 * 2 * 4);
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 5);
    assert_eq!(meta["config"]["M"], 3);
}

#[test]
fn sim2_outputs_are_identical_across_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "sim2.json", SIM2);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ftkreg(&["--threads", "1", "sim2", "--config", &cfg, "--out-dir", a.to_str().unwrap()]);
    ftkreg(&["--threads", "2", "sim2", "--config", &cfg, "--out-dir", b.to_str().unwrap()]);
    for f in ["mise.csv", "table2.csv", "sim2_replicates.csv", "mise.svg", "meta.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let mise = fs::read_to_string(a.join("mise.csv")).unwrap();
    assert_eq!(mise.lines().next().unwrap(), "mar,delta,mise,se_of_mise");
    assert_eq!(mise.lines().count(), 1 + 2 * 3);
    let svg = fs::read_to_string(a.join("mise.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
}

#[test]
fn rejects_bad_arguments() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path());
    let x = query_file(dir.path());
    for psi in ["median", "quantile:1.5", "cdf:abc"] {
        let out = Command::new(env!("CARGO_BIN_EXE_ftkreg"))
            .args(["ci", "--data", &data, "--x", &x, "--psi", psi])
            .output()
            .unwrap();
        assert!(!out.status.success(), "{psi}");
    }
    let bad = write(dir.path(), "bad.json", "{\"T_values\": [4.0], \"M\": 1}");
    let out = Command::new(env!("CARGO_BIN_EXE_ftkreg"))
        .args(["sim1", "--config", &bad, "--out-dir", dir.path().join("o").to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
}
