use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_holonomy")).args(args).output().expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("stdout is not JSON ({e}): {}\nstderr: {}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr))
    })
}

#[test]
fn verify_parallel_spin7() {
    let out = run(&["verify", "--builtin", "yasui_ootsuka", "--structure", "spin7", "--closure", "derived"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert!(r["residuals"]["dOmega_max"].as_f64().unwrap() < 1e-9);
    assert_eq!(r["classes"]["W0"]["member"], true);
    assert_eq!(r["tol"], 1e-8);
    assert_eq!(r["seed"], 42);
    assert_eq!(r["points"], 100);
    assert_eq!(r["input_digest"].as_str().unwrap().len(), 64);
}

#[test]
fn derive_prints_flow() {
    let out = run(&["derive", "--builtin", "brandhuber", "--structure", "g2"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    let rhs: Vec<&str> = r["flow"]["rhs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(rhs.contains(&"dC/dr = (1/4)*(C/B^2 - C/A^2)"), "{rhs:?}");
    assert_eq!(r["flow"]["leftovers_ok"], true);
    assert_eq!(r["flow"]["unknowns"], serde_json::json!(["A", "B", "C", "D"]));
}

#[test]
fn flat_document_is_in_every_class() {
    let path = data("flat7.ans");
    let out = run(&["classify", "--ansatz", path.to_str().unwrap(), "--structure", "g2"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    let classes = r["classes"].as_object().unwrap();
    assert!(classes.len() >= 6);
    for (name, v) in classes {
        // Nearly parallel requires a nonzero constant; flat space has zero.
        if name != "nearly_parallel" {
            assert_eq!(v["member"], true, "{name}");
        }
    }
}

#[test]
fn closure_file_is_accepted() {
    let ans = data("konishi_naka.ans");
    let flow = data("konishi_naka.flow");
    let out = run(&["verify", "--ansatz", ans.to_str().unwrap(), "--closure", flow.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out);
    assert!(r["residuals"]["dphi_max"].as_f64().unwrap() < 1e-9);
    assert!(r["residuals"]["dstar_phi_max"].as_f64().unwrap() < 1e-9);
}

#[test]
fn failing_verification_exits_one() {
    let out = run(&["verify", "--builtin", "brandhuber", "--closure", "none", "--points", "10"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(report(&out)["status"], "fail");
}

#[test]
fn input_errors_exit_two() {
    assert_eq!(run(&["verify", "--builtin", "taub_nut"]).status.code(), Some(2));
    assert_eq!(run(&["verify", "--ansatz", "/nonexistent/file.ans"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["verify", "--builtin", "brandhuber", "--structure", "spin7"]).status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.ans");
    let text = std::fs::read_to_string(data("flat7.ans")).unwrap().replace("e7 = dx7", "e7 = dz");
    std::fs::write(&bad, text).unwrap();
    let out = run(&["verify", "--ansatz", bad.to_str().unwrap(), "--structure", "g2"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 12"), "{err}");
}

#[test]
fn reports_are_byte_stable() {
    let args = ["classify", "--builtin", "konishi_naka", "--closure", "derived", "--points", "30", "--seed", "7"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let mut with_out = args.to_vec();
    with_out.extend(["--out", path.to_str().unwrap()]);
    let c = run(&with_out);
    assert_eq!(c.status.code(), Some(0));
    assert!(c.stdout.is_empty());
    assert_eq!(std::fs::read(&path).unwrap(), a.stdout);

    let other_seed = run(&["classify", "--builtin", "konishi_naka", "--closure", "derived", "--points", "30", "--seed", "8"]);
    assert_ne!(report(&other_seed)["input_digest"], report(&a)["input_digest"]);
}

#[test]
fn integrate_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("yo.csv");
    let out = run(&[
        "integrate", "--builtin", "yasui_ootsuka", "--closure", "derived", "--initial", "a=1,b=1", "--to", "0.3", "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out);
    assert_eq!(r["trajectory_csv_path"], csv.to_str().unwrap());
    assert!(r["residuals"]["dOmega_max"].as_f64().unwrap() < 1e-8);
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("t,a,b"), "{header}");
    assert!(lines.count() > 2);
}

#[test]
fn report_forms_lists_expansions() {
    let out = run(&["report-forms", "--structure", "spin7"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    let forms = r["forms"].as_object().unwrap();
    assert_eq!(forms["Omega"].as_array().unwrap().len(), 14);
    assert!(!forms["sign_difference"].as_array().unwrap().is_empty());

    let g2 = report(&run(&["report-forms", "--structure", "g2"]));
    for key in ["phi", "star_phi", "omega", "psi_plus", "psi_minus"] {
        assert!(g2["forms"][key].is_array(), "{key}");
    }
}

#[test]
fn fixed_lambda_is_honoured() {
    let out = run(&["derive", "--builtin", "konishi_naka", "--lambda", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["lambda"], serde_json::json!(["2", "2"]));
    assert_eq!(r["flow"]["selection"], "fixed");
}
