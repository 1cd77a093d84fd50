use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn sqstat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sqstat")).args(args).output().expect("binary runs")
}

fn json_ok(args: &[&str]) -> Value {
    let out = sqstat(args);
    assert!(out.status.success(), "{:?}: {}", args, String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn error_of(args: &[&str]) -> (i32, Value) {
    let out = sqstat(args);
    let code = out.status.code().expect("exit code");
    let err: Value = serde_json::from_slice(&out.stderr).expect("stderr is an error JSON");
    assert_eq!(err["exit_code"].as_i64(), Some(code as i64));
    (code, err)
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
#[allow(clippy::approx_constant)] // the rounded input is the point
fn compute_two_level() {
    let v = json_ok(&[
        "compute",
        "--model",
        "two_level",
        "--param",
        "epsilon=1",
        "--y",
        "E=0.6931",
        "--squeeze",
        "identity",
    ]);
    let phi = v["phi"].as_f64().unwrap();
    assert!((phi - -(1.0 + (-0.6931f64).exp()).ln()).abs() < 1e-14);
    assert!((phi - -0.405465).abs() < 1e-4);
    assert_eq!(v["rows"].as_array().unwrap().len(), 2);
    assert!(v["entropy_J"].is_number() && v["entropy_theta"].is_number());
}

#[test]
fn compute_csv_rows() {
    let out =
        sqstat(&["compute", "--model", "spin_half_paramagnet", "--param", "N=4", "--y", "M=0.2", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "M,ln_g,ln_class,macro_prob,config_prob,boltzmann_factor");
    assert_eq!(lines.count(), 5);
}

#[test]
fn emitted_model_reingests_identically() {
    let dir = tempfile::tempdir().unwrap();
    for (model, params, env) in [
        ("einstein_solid", vec!["N=3", "E_max=40"], vec!["--y", "E=0.7"]),
        ("lattice_gas", vec!["sites=12", "N_max=12", "site_energy=0.5"], vec!["--y", "E=0.4", "--y", "N=0.3"]),
        ("spin_half_paramagnet", vec!["N=6"], vec!["--X", "M=2"]),
    ] {
        let file = dir.path().join(format!("{model}.json"));
        let mut args = vec!["compute", "--model", model, "--squeeze", "tsallis", "--q", "1.5"];
        for p in &params {
            args.extend(["--param", p]);
        }
        args.extend(&env);
        args.extend(["--emit-model", path_str(&file)]);
        let direct = sqstat(&args);
        assert!(direct.status.success(), "{}", String::from_utf8_lossy(&direct.stderr));
        let again = sqstat(&["compute", "--model-file", path_str(&file)]);
        assert!(again.status.success(), "{}", String::from_utf8_lossy(&again.stderr));
        assert_eq!(direct.stdout, again.stdout, "{model}");
    }
}

#[test]
fn hand_written_model_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("m.json");
    std::fs::write(
        &file,
        r#"{"variables": [{"name": "E", "kind": "exchanged"}],
            "rows": [{"x": [0.0], "ln_g": 0.0}, {"x": [1.0], "ln_g": 0.0}],
            "environment": {"y": {"E": 0.6931471805599453}}}"#,
    )
    .unwrap();
    let v = json_ok(&["compute", "--model-file", path_str(&file)]);
    assert!((v["phi"].as_f64().unwrap() + 1.5f64.ln()).abs() < 1e-15);
    // command-line values override the file's environment
    let v = json_ok(&["compute", "--model-file", path_str(&file), "--y", "E=0"]);
    assert!((v["phi"].as_f64().unwrap() + 2f64.ln()).abs() < 1e-15);
}

#[test]
fn runs_are_bit_identical() {
    let args = [
        "compute",
        "--model",
        "einstein_solid",
        "--param",
        "N=5",
        "--param",
        "E_max=80",
        "--y",
        "E=0.3",
        "--squeeze",
        "tsallis",
        "--q",
        "0.7",
    ];
    assert_eq!(sqstat(&args).stdout, sqstat(&args).stdout);
    let k = ["kinetics", "--steps", "50", "--seed", "9", "--squeeze", "tsallis", "--q", "1.5"];
    assert_eq!(sqstat(&k).stdout, sqstat(&k).stdout);
}

#[test]
fn fluct_two_level_variance() {
    let v = json_ok(&["fluct", "--model", "two_level", "--param", "epsilon=1", "--y", &format!("E={}", 2f64.ln())]);
    let var = v["variances"]["E"]["extensive"].as_f64().unwrap();
    assert!((var - 2.0 / 9.0).abs() < 1e-10);
    let product = var * v["variances"]["E"]["intensive"].as_f64().unwrap();
    assert!((product - 1.0).abs() < 1e-8);
    assert_eq!(v["tsallis_scale"].as_f64(), Some(1.0));
}

#[test]
fn kinetics_zero_steps_reports_initial_state() {
    let v = json_ok(&["kinetics", "--lattice-radius", "2", "--steps", "0"]);
    assert_eq!(v["steps_taken"], 0);
    let trace = v["trace"].as_array().unwrap();
    assert_eq!(trace.len(), 1);
    assert!(trace[0]["S"].is_number());
    assert_eq!(v["initial_state"], v["final_state"]);
    assert_eq!(v["velocities"].as_array().unwrap().len(), 13);
}

#[test]
fn kinetics_trace_csv() {
    let out = sqstat(&["kinetics", "--steps", "200", "--trace-every", "50", "--xi", "soft", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,S,sum_F,sum_F_v2,max_abs_rhs");
    let entropies: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(entropies.len(), 5);
    assert!(entropies.windows(2).all(|w| w[1] >= w[0] - 1e-12));
}

#[test]
fn infer_planted_q() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("ratios.csv");
    let mut text = String::from("ln_g,ratio\n");
    for i in 0..=40 {
        let lg = i as f64 * 0.1;
        text.push_str(&format!("{lg},{}\n", (-0.5 * lg).exp()));
    }
    std::fs::write(&data, text).unwrap();
    let v = json_ok(&["infer", "--data", path_str(&data)]);
    assert!((v["q"].as_f64().unwrap() - 1.5).abs() < 1e-3);
    assert!(v["residual"].as_f64().unwrap() < 1e-6);
    assert_eq!(v["power_law"], true);
    assert_eq!(v["reconstruction"].as_array().unwrap().len(), 41);
}

#[test]
fn infer_superstatistics() {
    let dir = tempfile::tempdir().unwrap();
    let density = dir.path().join("f.csv");
    // uniform density on [0.5, 1.5]
    let mut text = String::from("beta,f\n");
    for i in 0..=1000 {
        text.push_str(&format!("{},1\n", 0.5 + i as f64 * 1e-3));
    }
    std::fs::write(&density, text).unwrap();
    let v = json_ok(&["infer", "--density", path_str(&density), "--energy", "0", "--energy", "2"]);
    let f = v["factors"].as_array().unwrap();
    assert_eq!(f[0]["B"].as_f64(), Some(1.0));
    let exact = ((-1.0f64).exp() - (-3.0f64).exp()) / 2.0;
    assert!((f[1]["B"].as_f64().unwrap() - exact).abs() < 1e-6);
}

#[test]
fn sweep_phi_increases_with_beta() {
    let v = json_ok(&[
        "sweep",
        "--model",
        "einstein_solid",
        "--param",
        "N=3",
        "--param",
        "E_max=50",
        "--y",
        "E=1",
        "--axis",
        "E",
        "--from",
        "0.1",
        "--to",
        "3",
        "--steps",
        "30",
    ]);
    let phis: Vec<f64> = v["points"].as_array().unwrap().iter().map(|p| p["phi"].as_f64().unwrap()).collect();
    assert_eq!(phis.len(), 30);
    // Z decreasing in β for a nonnegative spectrum
    assert!(phis.windows(2).all(|w| w[1] > w[0]));

    let out = sqstat(&[
        "sweep",
        "--model",
        "two_level",
        "--param",
        "epsilon=1",
        "--y",
        "E=1",
        "--axis",
        "E",
        "--from",
        "0",
        "--to",
        "1",
        "--steps",
        "3",
        "--format",
        "csv",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next().unwrap(), "phi,entropy_J,entropy_theta,y_E,obs_E");
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let out =
        sqstat(&["compute", "--model", "two_level", "--param", "epsilon=1", "--y", "E=1", "--out", path_str(&path)]);
    assert!(out.status.success() && out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert!(v["phi"].is_number());
}

#[test]
fn exit_codes_by_error_class() {
    let (code, err) = error_of(&["compute", "--y", "E=1"]);
    assert_eq!((code, err["error"].as_str()), (2, Some("usage")));
    let (code, _) = error_of(&["compute", "--model", "two_level", "--param", "epsilon=1", "--y", "E"]);
    assert_eq!(code, 2);
    let (code, _) = error_of(&[
        "sweep",
        "--model",
        "two_level",
        "--param",
        "epsilon=1",
        "--y",
        "E=1",
        "--axis",
        "E",
        "--from",
        "0",
        "--to",
        "1",
        "--steps",
        "1",
    ]);
    assert_eq!(code, 2);
    let (code, err) = error_of(&["compute", "--model", "two_level", "--param", "epsilon=-1", "--y", "E=1"]);
    assert_eq!((code, err["error"].as_str()), (3, Some("invalid_model")));
    let (code, err) = error_of(&["compute", "--model-file", "/nonexistent/model.json"]);
    assert_eq!((code, err["error"].as_str()), (5, Some("io")));

    let dir = tempfile::tempdir().unwrap();
    let density = dir.path().join("f.csv");
    std::fs::write(&density, "beta,f\n0,1\n1,1\n2,1\n").unwrap();
    let (code, err) = error_of(&["infer", "--density", path_str(&density), "--energy", "1"]);
    assert_eq!((code, err["error"].as_str()), (4, Some("unnormalized")));
}

#[test]
fn help_documents_exit_codes() {
    let out = sqstat(&["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("Exit codes") && text.contains("SQSTAT_LOG"));
}
