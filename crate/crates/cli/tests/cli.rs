use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn kgvar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kgvar")).args(args).output().expect("spawn kgvar")
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn stderr_record(o: &Output) -> Value {
    let s = String::from_utf8_lossy(&o.stderr);
    serde_json::from_str(s.lines().last().expect("error record")).expect("json error record")
}

/// Rows of a CSV file, skipping `#` provenance lines.
fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    (header, lines.map(|l| l.split(',').map(String::from).collect()).collect())
}

#[test]
fn feynman_sweep_seed_7_is_positive() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    let o = kgvar(&["positivity", "--seed", "7", "--out", &out_arg(&dir)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&dir);
    assert_eq!(r["results"]["verdict_re"], "positive");
    assert_eq!(r["results"]["seed"], 7);
    assert_eq!(r["results"]["per_function"].as_array().unwrap().len(), 200);
    assert_eq!(r["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(r["config"]["kernel"], "feynman");
    assert!(dir.join("summary.csv").exists() && dir.join("sigma.dat").exists());
}

#[test]
fn inadmissible_zeta_exits_2_without_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    let o = kgvar(&["noisy-propagator", "--set", "zeta=[0.75, 0.0, 0.0, 0.0]", "--out", &out_arg(&dir)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.exists());
    let rec = stderr_record(&o);
    assert_eq!(rec["error"]["kind"], "config");
    assert_eq!(rec["error"]["exit_code"], 2);
    assert!(rec["error"]["message"].as_str().unwrap().contains("zeta"));
}

#[test]
fn laplace_check_passes_on_default_matrix() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    let o = kgvar(&["laplace-check", "--out", &out_arg(&dir)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = csv_rows(&dir.join("summary.csv"));
    let col = header.iter().position(|h| h == "rel_error").unwrap();
    assert_eq!(rows.len(), 16);
    for r in rows {
        assert!(r[col].parse::<f64>().unwrap() < 1e-3);
    }
    assert!(header.contains(&"lhs_re".to_string()) && header.contains(&"rhs_im".to_string()));
}

#[test]
fn same_seed_gives_identical_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["--set", "n_functions=12", "--set", "kernel=noisy_feynman", "--set", "zeta=[0.1,0.2,0,0]", "--seed", "11"];
    let mut runs = Vec::new();
    for (i, threads) in ["1", "4"].iter().enumerate() {
        let dir = tmp.path().join(format!("run{i}"));
        let mut a = vec!["positivity", "--threads", threads, "--out"];
        let d = out_arg(&dir);
        a.push(&d);
        a.extend(args);
        assert_eq!(kgvar(&a).status.code(), Some(0));
        runs.push(dir);
    }
    let strip = |p: &Path| -> String {
        std::fs::read_to_string(p.join("report.json"))
            .unwrap()
            .lines()
            .filter(|l| !l.contains("timestamp_unix"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip(&runs[0]), strip(&runs[1]));
    for f in ["summary.csv", "sigma.dat"] {
        assert_eq!(std::fs::read(runs[0].join(f)).unwrap(), std::fs::read(runs[1].join(f)).unwrap());
    }
}

#[test]
fn csv_floats_round_trip_to_report_values() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    assert_eq!(kgvar(&["positivity", "--set", "n_functions=10", "--out", &out_arg(&dir)]).status.code(), Some(0));
    let r = report(&dir);
    let (_, rows) = csv_rows(&dir.join("summary.csv"));
    for (row, pf) in rows.iter().zip(r["results"]["per_function"].as_array().unwrap()) {
        assert_eq!(row[1].parse::<f64>().unwrap().to_bits(), pf["re"].as_f64().unwrap().to_bits());
        assert_eq!(row[2].parse::<f64>().unwrap().to_bits(), pf["im"].as_f64().unwrap().to_bits());
    }
}

#[test]
fn config_file_flags_and_overrides_layer() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    std::fs::write(
        &cfg,
        "out = \"ignored-by-flag\"\n[semigroup]\nn_modes = 3\nseed = 1\ntau = [0.0, 0.25]\n[positivity]\nn_functions = 999\n",
    )
    .unwrap();
    let dir = tmp.path().join("run");
    let o = kgvar(&["semigroup", "--config", cfg.to_str().unwrap(), "--set", "n_modes=4", "--seed", "5", "--out", &out_arg(&dir)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let c = &report(&dir)["config"];
    assert_eq!(c["n_modes"], 4);
    assert_eq!(c["seed"], 5);
    assert_eq!(c["tau"], serde_json::json!([0.0, 0.25]));
    // every table carries the resolved config
    let text = std::fs::read_to_string(dir.join("semigroup.dat")).unwrap();
    assert!(text.lines().any(|l| l.starts_with("# config ") && l.contains("\"n_modes\":4")));
}

#[test]
fn unknown_keys_and_bad_flags_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    let o = kgvar(&["dispersion", "--set", "n_momentum=3", "--out", &out_arg(&dir)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr_record(&o)["error"]["message"].as_str().unwrap().contains("n_momentum"));
    let o = kgvar(&["dispersion", "--seed", "x"]);
    assert_eq!(o.status.code(), Some(2));
    let o = kgvar(&["semigroup", "--set", "tau=[-1.0]", "--out", &out_arg(&dir)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.exists());
}

#[test]
fn indefinite_kernel_reports_violation() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    let o = kgvar(&[
        "positivity",
        "--set",
        "kernel=commutator_fixed_mass",
        "--set",
        "n_functions=20",
        "--set",
        "n_space=4",
        "--set",
        "n_time=6",
        "--out",
        &out_arg(&dir),
    ]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(report(&dir)["results"]["verdict_re"], "violated");
}

#[test]
fn checks_pass_with_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    for cmd in ["dispersion", "propagator", "noisy-propagator", "semigroup", "mike-check"] {
        let dir = tmp.path().join(cmd);
        let o = kgvar(&[cmd, "--out", &out_arg(&dir)]);
        assert_eq!(o.status.code(), Some(0), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(report(&dir)["command"], cmd);
    }
}

#[test]
fn dry_run_prints_resolved_config_only() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    let o = kgvar(&["mike-check", "--dry-run", "--set", "levels=4", "--out", &out_arg(&dir)]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["levels"], 4);
    assert!(!dir.exists());
}
