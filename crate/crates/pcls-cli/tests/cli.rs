//! End-to-end tests of the `pcls` binary: exit codes, file formats, and
//! determinism, exercised through real process invocations.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use approx::assert_relative_eq;
use pcls::modelspec::ModelSpec;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pcls"))
}

fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../specs")
        .join(name)
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}",
            String::from_utf8_lossy(&out.stdout)
        )
    })
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("process exited")
}

#[test]
fn validate_accepts_the_shipped_specs() {
    for name in ["full_default.json", "ls_only.json", "pc_only.json"] {
        let out = bin().arg("validate").arg(shipped(name)).output().unwrap();
        assert_eq!(
            code(&out),
            0,
            "{name}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let report = stdout_json(&out);
        assert_eq!(report["valid"], true, "{name}");
        let fp = report["fingerprint"].as_str().unwrap();
        assert_eq!(fp.len(), 64);
        assert!(fp.chars().all(|c| c.is_ascii_hexdigit()));
        assert_eq!(report["diagnostics"].as_array().unwrap().len(), 0);
    }
}

#[test]
fn validate_reports_diagnostics_with_paths() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{
          "schema": 1,
          "partition": { "period": 2, "lengths": [1.0, 2.0] },
          "ls": {
            "psi": [
              { "type": "laplace_mixture", "weights": [-1.0], "rates": [0.1] },
              { "type": "laplace_mixture", "weights": [1.0], "rates": [0.0] }
            ],
            "gamma": [
              { "family": "exponential", "theta": 1.0, "sigma2": 1.0 },
              { "family": "exponential", "theta": 1.0, "sigma2": 1.0 }
            ]
          },
          "pc": { "sigma": [1.0, 2.0], "rho": 1.5 }
        }"#,
    )
    .unwrap();
    let out = bin().arg("validate").arg(&bad).output().unwrap();
    assert_eq!(code(&out), 2);
    let report = stdout_json(&out);
    assert_eq!(report["valid"], false);
    let paths: Vec<&str> = report["diagnostics"]
        .as_array()
        .unwrap()
        .iter()
        .map(|d| d["path"].as_str().unwrap())
        .collect();
    assert!(paths.contains(&"pc.rho"), "paths: {paths:?}");
    assert!(paths.contains(&"ls.psi[0].weights"), "paths: {paths:?}");

    // Unparseable file: exit 2 with a parse-located diagnostic.
    let garbled = dir.path().join("garbled.json");
    std::fs::write(&garbled, "{ not json").unwrap();
    let out = bin().arg("validate").arg(&garbled).output().unwrap();
    assert_eq!(code(&out), 2);
    let report = stdout_json(&out);
    assert_eq!(report["diagnostics"][0]["path"], "(parse)");

    // Missing file: exit 2.
    let out = bin()
        .arg("validate")
        .arg(dir.path().join("absent.json"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn cov_single_point_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let out_file = dir.path().join("cov.csv");
    let out = bin()
        .arg("cov")
        .arg(shipped("full_default.json"))
        .args(["--grid", "1:1:1", "--out"])
        .arg(&out_file)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&out_file).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "1");
    let value: f64 = lines[1].parse().unwrap();

    let spec = ModelSpec::load(&shipped("full_default.json")).unwrap();
    let model = spec.build().unwrap();
    assert_relative_eq!(
        value,
        model.total_cov(1.0, 1.0).unwrap(),
        max_relative = 1e-14
    );
}

#[test]
fn cov_rejects_nonpositive_points() {
    let dir = tempfile::tempdir().unwrap();
    let points = dir.path().join("points.txt");
    std::fs::write(&points, "-1.0 2.0\n").unwrap();
    let out = bin()
        .arg("cov")
        .arg(shipped("full_default.json"))
        .arg("--points")
        .arg(&points)
        .arg("--out")
        .arg(dir.path().join("cov.csv"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn cov_dense_grid_json_passes_without_repair() {
    let dir = tempfile::tempdir().unwrap();
    let out_file = dir.path().join("cov.json");
    let out = bin()
        .arg("cov")
        .arg(shipped("full_default.json"))
        .args(["--grid", "0.125:6:0.125", "--format", "json", "--out"])
        .arg(&out_file)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out_file).unwrap()).unwrap();
    assert_eq!(doc["grid"].as_array().unwrap().len(), 48);
    assert_eq!(doc["values"].as_array().unwrap().len(), 48);
    assert_eq!(doc["repaired"], false);
    assert!(doc["min_eigenvalue"].as_f64().unwrap() > 0.0);
}

#[test]
fn simulate_is_deterministic_and_prints_the_fingerprint() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: &str, file: &str| -> (Vec<u8>, String) {
        let path = dir.path().join(file);
        let out = bin()
            .arg("simulate")
            .arg(shipped("full_default.json"))
            .args(["--paths", "2", "--seed", seed, "--out"])
            .arg(&path)
            .output()
            .unwrap();
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let fp = String::from_utf8(out.stdout).unwrap().trim().to_string();
        (std::fs::read(&path).unwrap(), fp)
    };
    let (a, fp_a) = run("7", "a.csv");
    let (b, fp_b) = run("7", "b.csv");
    let (c, _) = run("8", "c.csv");
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!(fp_a, fp_b);
    assert_eq!(fp_a.len(), 64);

    // The fingerprint matches the library's notion.
    let spec = ModelSpec::load(&shipped("full_default.json")).unwrap();
    assert_eq!(fp_a, spec.fingerprint());
}

#[test]
fn simulate_is_invariant_to_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: &str, file: &str| -> Vec<u8> {
        let path = dir.path().join(file);
        let out = bin()
            .env("PCLS_THREADS", threads)
            .arg("simulate")
            .arg(shipped("full_default.json"))
            .args([
                "--paths",
                "6",
                "--seed",
                "42",
                "--method",
                "component_wise",
                "--out",
            ])
            .arg(&path)
            .output()
            .unwrap();
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(&path).unwrap()
    };
    assert_eq!(run("1", "t1.csv"), run("4", "t4.csv"));
}

#[test]
fn simulate_refuses_component_wise_with_closed_form_weights() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("closed.json");
    std::fs::write(
        &spec,
        r#"{
          "schema": 1,
          "partition": { "period": 1, "lengths": [2.0] },
          "ls": {
            "psi": [ { "type": "closed_form", "name": "quadratic_gaussian" } ],
            "gamma": [ { "family": "exponential", "theta": 1.0, "sigma2": 1.0 } ]
          }
        }"#,
    )
    .unwrap();
    let out = bin()
        .arg("simulate")
        .arg(&spec)
        .args([
            "--paths",
            "2",
            "--method",
            "component_wise",
            "--grid",
            "0.5:3:0.5",
            "--out",
        ])
        .arg(dir.path().join("e.csv"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));

    // The factorization method accepts the same model.
    let out = bin()
        .arg("simulate")
        .arg(&spec)
        .args([
            "--paths",
            "2",
            "--method",
            "joint_factorization",
            "--grid",
            "0.5:3:0.5",
            "--out",
        ])
        .arg(dir.path().join("e2.csv"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn simulate_binary_layout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("e.bin");
    let out = bin()
        .arg("simulate")
        .arg(shipped("pc_only.json"))
        .args([
            "--paths", "3", "--seed", "5", "--grid", "1:2:0.5", "--format", "binary", "--out",
        ])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let bytes = std::fs::read(&path).unwrap();
    let newline = bytes.iter().position(|&b| b == b'\n').unwrap();
    let header: serde_json::Value = serde_json::from_slice(&bytes[..newline]).unwrap();
    assert_eq!(header["n_paths"], 3);
    assert_eq!(header["seed"], 5);
    assert_eq!(header["method"], "joint_factorization");
    assert_eq!(header["grid"].as_array().unwrap().len(), 3);
    assert_eq!(bytes.len() - newline - 1, 8 * 3 * 3);
}

#[test]
fn spectral_check_passes_at_default_tolerances() {
    // Purely atomic spectrum: tight default tolerance.
    let out = bin()
        .arg("spectral-check")
        .arg(shipped("pc_only.json"))
        .args(["--pairs", "40", "--seed", "3"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = stdout_json(&out);
    assert_eq!(report["spectrum"], "atomic");
    assert_eq!(report["tol"], 1e-8);
    assert_eq!(report["pass"], true);
    assert!(report["phase_convention"]
        .as_str()
        .unwrap()
        .contains("conjugate"));

    // Density spectrum: quadrature-limited default tolerance.
    let out = bin()
        .arg("spectral-check")
        .arg(shipped("full_default.json"))
        .args(["--pairs", "20", "--seed", "3"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = stdout_json(&out);
    assert_eq!(report["spectrum"], "density");
    assert_eq!(report["tol"], 1e-4);
    assert_eq!(report["pass"], true);
}

#[test]
fn spectral_check_fails_below_the_quadrature_floor() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("masses.csv");
    let out = bin()
        .arg("spectral-check")
        .arg(shipped("full_default.json"))
        .args(["--pairs", "10", "--seed", "3", "--tol", "1e-15", "--dump"])
        .arg(&dump)
        .output()
        .unwrap();
    assert_eq!(code(&out), 5, "{}", String::from_utf8_lossy(&out.stderr));
    let report = stdout_json(&out);
    assert_eq!(report["pass"], false);
    assert!(report["max_deviation"].as_f64().unwrap() > 1e-15);
    let dumped = std::fs::read_to_string(&dump).unwrap();
    assert!(dumped.starts_with("j,k,lambda,mass_re,mass_im,kind"));
    assert!(dumped.lines().count() > 1);
}

#[test]
fn mc_check_exit_codes() {
    let out = bin()
        .arg("mc-check")
        .arg(shipped("pc_only.json"))
        .args(["--paths", "5000", "--seed", "9"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = stdout_json(&out);
    assert_eq!(report["pass"], true);
    assert_eq!(report["pairs_checked"], 45);
    assert_eq!(report["method"], "joint_factorization");

    // Zero paths is a usage error, not a numeric failure.
    let out = bin()
        .arg("mc-check")
        .arg(shipped("pc_only.json"))
        .args(["--paths", "0"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn usage_errors_exit_with_2() {
    // No subcommand.
    let out = bin().output().unwrap();
    assert_eq!(code(&out), 2);
    // Unknown flag.
    let out = bin()
        .arg("validate")
        .arg(shipped("pc_only.json"))
        .arg("--frobnicate")
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
    // cov without --out.
    let out = bin()
        .arg("cov")
        .arg(shipped("pc_only.json"))
        .args(["--grid", "1:2:1"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
    // Conflicting grid sources.
    let out = bin()
        .arg("cov")
        .arg(shipped("pc_only.json"))
        .args(["--grid", "1:2:1", "--points", "x.txt", "--out", "y.csv"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
    // Malformed grid flag.
    let out = bin()
        .arg("cov")
        .arg(shipped("pc_only.json"))
        .args(["--grid", "1:2", "--out", "y.csv"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}
