//! CLI acceptance: byte-identical outputs across runs and worker counts,
//! plus the documented exit-code contract.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_robust-crowdsense");

fn run(args: &[&str], threads: &str, dir: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .env("ROBUST_CROWDSENSE_THREADS", threads)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

/// All regular files under `dir`, keyed by relative path.
fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(cur) = stack.pop() {
        for entry in fs::read_dir(&cur).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                files.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    files
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

const HARD_SCENARIO: &str = r#"
T = 1
L = 1
requirement = [[1]]

[[curves]]
scale = 1.0
exponent = 3.0

[spec]
kind = "hard"
epsilon = 0.1
"#;

const SOFT_SCENARIO: &str = r#"
T = 10
L = 2

[requirement]
low = 1
high = [2, 4]

[[curves]]
scale = 1.0
exponent = 3.0

[[curves]]
scale = 2.0
exponent = 3.0

[spec]
kind = "soft"
alpha = [0.6, 0.8]
beta = 0.9

[search]
mc_samples = 2000
"#;

const SMALL_EXPERIMENT: &str = r#"
mode = "soft"
T = 8
L = 2
replications = 3
master_seed = 99

[alpha]
low = 0.6
high = 0.8

[search]
mc_samples = 500
"#;

/// Criterion 8: fixed (config, seed) produces byte-identical outputs across
/// repeated runs and across worker counts 1 and 8.
#[test]
fn c8_byte_identical_outputs() {
    let work = tempfile::tempdir().unwrap();
    let hard = write_config(work.path(), "hard.toml", HARD_SCENARIO);
    let soft = write_config(work.path(), "soft.toml", SOFT_SCENARIO);
    let experiment = write_config(work.path(), "exp.toml", SMALL_EXPERIMENT);

    let jobs: Vec<(&str, Vec<String>)> = vec![
        ("solve-hard", vec!["solve-hard".into(), "--config".into(), hard, "--seed".into(), "7".into()]),
        ("solve-soft", vec!["solve-soft".into(), "--config".into(), soft, "--seed".into(), "11".into()]),
        ("table1", vec!["table1".into(), "--replications".into(), "3".into(), "--seed".into(), "5".into()]),
        ("sweep", vec!["sweep".into(), "--config".into(), experiment, "--seed".into(), "13".into()]),
    ];

    let mut violations = Vec::new();
    for (name, args) in &jobs {
        let mut outputs = Vec::new();
        for (tag, threads) in [("a", "1"), ("b", "8"), ("c", "8")] {
            let out_dir = work.path().join(format!("{name}-{tag}"));
            let mut full: Vec<&str> = args.iter().map(String::as_str).collect();
            let out_str = out_dir.to_string_lossy().into_owned();
            full.push("--out");
            full.push(&out_str);
            let output = run(&full, threads, work.path());
            if !output.status.success() {
                violations.push(format!(
                    "{name} (threads {threads}) failed: {}",
                    String::from_utf8_lossy(&output.stderr)
                ));
                continue;
            }
            // strip the out-path echo, which legitimately differs per run dir
            let stdout: Vec<u8> = String::from_utf8(output.stdout)
                .unwrap()
                .lines()
                .filter(|l| !l.starts_with("wrote "))
                .collect::<Vec<_>>()
                .join("\n")
                .into_bytes();
            outputs.push((threads, snapshot(&out_dir), stdout));
        }
        for pair in outputs.windows(2) {
            let (t0, files0, stdout0) = &pair[0];
            let (t1, files1, stdout1) = &pair[1];
            if files0 != files1 {
                violations.push(format!("{name}: files differ between threads {t0} and {t1}"));
            }
            if stdout0 != stdout1 {
                violations.push(format!("{name}: stdout differs between threads {t0} and {t1}"));
            }
        }
    }

    if violations.is_empty() {
        println!("ACCEPTANCE C8 (determinism across runs and worker counts): PASS");
    } else {
        println!("ACCEPTANCE C8 (determinism across runs and worker counts): FAIL");
        for v in &violations {
            println!("  - {v}");
        }
        panic!("C8 failed {} sub-clause(s)", violations.len());
    }
}

#[test]
fn solve_hard_worked_example() {
    let work = tempfile::tempdir().unwrap();
    let hard = write_config(work.path(), "hard.toml", HARD_SCENARIO);
    let out_dir = work.path().join("out");
    let output = run(
        &["solve-hard", "--config", &hard, "--out", out_dir.to_str().unwrap()],
        "0",
        work.path(),
    );
    assert!(output.status.success());
    let record: serde_json::Value =
        serde_json::from_slice(&fs::read(out_dir.join("solution.json")).unwrap()).unwrap();
    let rho = record["policy"][0][0].as_f64().unwrap();
    let objective = record["objective"].as_f64().unwrap();
    assert!((rho - 0.9).abs() < 1e-8, "rho {rho}");
    assert!((objective - 0.6561).abs() < 1e-7, "objective {objective}");
    assert!(record["pa1"]["feasible"].as_bool().unwrap());
}

#[test]
fn malformed_config_exits_one_with_field_message() {
    let work = tempfile::tempdir().unwrap();
    let bad = write_config(
        work.path(),
        "bad.toml",
        &HARD_SCENARIO.replace("epsilon = 0.1", "epsilon = \"high\""),
    );
    let output = run(&["solve-hard", "--config", &bad], "0", work.path());
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("epsilon"), "stderr: {stderr}");

    // a missing file is also a configuration error
    let output = run(&["solve-hard", "--config", "nope.toml"], "0", work.path());
    assert_eq!(output.status.code(), Some(1));

    // and so is a missing --config for the solve commands
    let output = run(&["solve-hard"], "0", work.path());
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn unreachable_band_is_a_config_error() {
    let work = tempfile::tempdir().unwrap();
    let cfg = write_config(
        work.path(),
        "band.toml",
        &SOFT_SCENARIO.replace("beta = 0.9", "beta = 0.995"),
    );
    let output = run(&["solve-soft", "--config", &cfg], "0", work.path());
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("band"), "stderr: {stderr}");
}

#[test]
fn exhausted_escalation_exits_two_with_trajectory() {
    let work = tempfile::tempdir().unwrap();
    // estimates at 50 samples are multiples of 0.02 and can never land in
    // the band (1e-5, 2e-5), so every escalation round must fail
    let cfg = write_config(
        work.path(),
        "stuck.toml",
        r#"
T = 5
L = 1
requirement = [[1], [1], [1], [1], [1]]

[[curves]]
scale = 1.0
exponent = 3.0

[spec]
kind = "soft"
alpha = 0.6
beta = 0.9

[search]
sigma_lo = 1e-5
sigma_hi = 2e-5
mc_samples = 50
max_bisect = 25
"#,
    );
    let output = run(&["solve-soft", "--config", &cfg], "0", work.path());
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("did not terminate"), "stderr: {stderr}");
    assert!(stderr.contains("gamma="), "diagnostic carries the probe trajectory");
}

#[test]
fn special_case_emits_certificate_and_slacks() {
    let work = tempfile::tempdir().unwrap();
    let cfg = write_config(
        work.path(),
        "special.toml",
        r#"
T = 100
L = 2

[requirement]
low = [2, 3]
high = [2, 3]

[[curves]]
scale = 1.0
exponent = 3.0

[[curves]]
scale = 2.0
exponent = 3.0

[spec]
kind = "soft"
alpha = [0.5, 0.9]
beta = 0.95
"#,
    );
    let out_dir = work.path().join("out");
    let output = run(
        &["special-case", "--config", &cfg, "--out", out_dir.to_str().unwrap()],
        "0",
        work.path(),
    );
    assert!(output.status.success());
    let record: serde_json::Value =
        serde_json::from_slice(&fs::read(out_dir.join("solution.json")).unwrap()).unwrap();
    let rho0 = record["rho"][0].as_f64().unwrap();
    assert!((rho0 - 0.61631).abs() < 1e-4, "rho0 {rho0}");
    assert!(record["clamped"][1].as_bool().unwrap());
    assert_eq!(record["certificate"]["formula"].as_str().unwrap(), "theorem6");
    for chk in record["pb1"].as_array().unwrap() {
        assert!(chk["slack"].as_f64().unwrap() >= -0.02);
    }
}

#[test]
fn simulate_emits_all_four_tables() {
    let work = tempfile::tempdir().unwrap();
    let cfg = write_config(
        work.path(),
        "exp.toml",
        "mode = \"hard\"\nT = 8\nL = 2\nreplications = 2\n\n[search]\nmc_samples = 300\n",
    );
    let out_dir = work.path().join("out");
    let output = run(
        &["simulate", "--config", &cfg, "--seed", "21", "--out", out_dir.to_str().unwrap()],
        "0",
        work.path(),
    );
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    for name in [
        "table1.csv",
        "gap_hard.csv",
        "gap_soft_setting1.csv",
        "gap_soft_setting2.csv",
    ] {
        let text = fs::read_to_string(out_dir.join(name)).unwrap();
        assert!(text.lines().count() > 1, "{name} has rows");
    }
}

#[test]
fn table1_csv_shape() {
    let work = tempfile::tempdir().unwrap();
    let out_dir = work.path().join("out");
    let output = run(
        &[
            "table1",
            "--replications",
            "2",
            "--seed",
            "3",
            "--out",
            out_dir.to_str().unwrap(),
        ],
        "0",
        work.path(),
    );
    assert!(output.status.success());
    let csv = fs::read_to_string(out_dir.join("table1.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "one_minus_epsilon,our,lower_bound,uniform,random"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 5);
    assert!(rows[0].starts_with("0.920000,0.92"));
    assert!(rows[4].starts_with("1.000000,1.000000,1.000000,1.000000,"));
}
