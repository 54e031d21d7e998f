use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn ruc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ruc"))
        .args(args)
        .env("RUC_LOG", "error")
        .output()
        .expect("ruc runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn fixtures() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let fx = dir.path().join("fx");
    let o = ruc(&["fixtures", "--out", fx.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    (dir, fx)
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

fn json_out(o: &Output) -> Value {
    serde_json::from_str(&stdout(o)).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

#[test]
fn woven_cases() {
    let (_d, fx) = fixtures();
    let o = ruc(&["cases", "--spec", &p(&fx, "woven3d.json")]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("case 1: gamma = [+1, +1, +1, +1, +1, +1]  span {11, 22, 33, 12}"), "{text}");
    assert!(text.contains("case 2: gamma = [+1, +1, -1, -1, +1, +1]  span {23, 13}"), "{text}");

    let o = ruc(&["cases", "--spec", &p(&fx, "woven3d.json"), "--format", "json"]);
    let v = json_out(&o);
    let cases = v["cases"].as_array().unwrap();
    assert_eq!(cases.len(), 2);
    assert_eq!(cases[1]["gammas"], serde_json::json!([1, 1, -1, -1, 1, 1]));
}

#[test]
fn honeycomb_shear_signs() {
    let (_d, fx) = fixtures();
    let o = ruc(&["check", "--spec", &p(&fx, "honeycomb.json"), "--load", &p(&fx, "shear.json"), "--format", "json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = json_out(&o);
    assert_eq!(v["result"]["verdict"], "admissible");
    assert_eq!(v["result"]["gammas"], serde_json::json!([1, -1, -1]));
}

#[test]
fn inadmissible_load_exits_2() {
    let (_d, fx) = fixtures();
    let o = ruc(&["check", "--spec", &p(&fx, "woven3d.json"), "--load", &p(&fx, "woven3d_mixed.json")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("relation E3"), "{}", stderr(&o));

    let o = ruc(&[
        "solve",
        "--spec",
        &p(&fx, "woven3d.json"),
        "--mesh",
        &p(&fx, "woven3d_mesh.json"),
        "--material",
        &p(&fx, "woven3d_materials.json"),
        "--load",
        &p(&fx, "woven3d_mixed.json"),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn broken_spec_fails_validation() {
    let (d, fx) = fixtures();
    let mut spec: Value = serde_json::from_str(&std::fs::read_to_string(fx.join("honeycomb.json")).unwrap()).unwrap();
    spec["relations"].as_array_mut().unwrap().pop();
    let broken = d.path().join("broken.json");
    std::fs::write(&broken, spec.to_string()).unwrap();
    let report = d.path().join("report.json");
    let o = ruc(&["validate", "--spec", broken.to_str().unwrap(), "--report", report.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("not covered"), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(v["ok"], false);
    assert!(!v["report"]["uncovered_facets"].as_array().unwrap().is_empty());

    let o = ruc(&["validate", "--spec", &p(&fx, "honeycomb.json"), "--mesh", &p(&fx, "honeycomb_mesh.json")]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn missing_input_is_an_internal_error() {
    let o = ruc(&["cases", "--spec", "/nonexistent/spec.json"]);
    assert_eq!(o.status.code(), Some(1));
    let o = ruc(&["cases", "--spec", "x.json", "--tol=-1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn pair_and_constraints_artifacts() {
    let (d, fx) = fixtures();
    let pairs = d.path().join("pairs.json");
    let o = ruc(&[
        "pair",
        "--spec",
        &p(&fx, "honeycomb.json"),
        "--mesh",
        &p(&fx, "honeycomb_mesh.json"),
        "--out",
        pairs.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&pairs).unwrap()).unwrap();
    let first = &v[0];
    for key in ["slave", "master", "relation_chain", "T_composed", "offset_composed"] {
        assert!(first.get(key).is_some(), "missing {key}");
    }

    let csv = d.path().join("eqs.csv");
    let o = ruc(&[
        "constraints",
        "--spec",
        &p(&fx, "honeycomb.json"),
        "--mesh",
        &p(&fx, "honeycomb_mesh.json"),
        "--load",
        &p(&fx, "shear.json"),
        "--format",
        "csv",
        "-o",
        csv.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("gamma = [+1, -1, -1]"));
    assert!(std::fs::read_to_string(&csv).unwrap().lines().count() > 10);

    let o = ruc(&[
        "constraints",
        "--spec",
        &p(&fx, "honeycomb.json"),
        "--mesh",
        &p(&fx, "honeycomb_mesh.json"),
        "--load",
        &p(&fx, "shear.json"),
    ]);
    let eqs: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(eqs.is_object() || eqs.is_array());
}

#[test]
fn solve_and_homogenize_are_repeatable() {
    let (d, fx) = fixtures();
    let cell = [
        "--spec".to_string(),
        p(&fx, "checkerboard_ruc.json"),
        "--mesh".to_string(),
        p(&fx, "checkerboard_ruc_mesh.json"),
        "--material".to_string(),
        p(&fx, "checkerboard_materials.json"),
    ];
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let sol = d.path().join("sol.json");
        let csv = d.path().join("gauss.csv");
        let mut args: Vec<String> = vec!["solve".into()];
        args.extend(cell.iter().cloned());
        args.extend([
            "--load".into(),
            p(&fx, "checkerboard_load.json"),
            "-o".into(),
            sol.to_str().unwrap().into(),
            "--gauss-csv".into(),
            csv.to_str().unwrap().into(),
            "--format".into(),
            "json".into(),
        ]);
        let o = ruc(&args.iter().map(String::as_str).collect::<Vec<_>>());
        assert!(o.status.success(), "{}", stderr(&o));
        let h = d.path().join("c.json");
        let mut hargs: Vec<String> = vec!["homogenize".into()];
        hargs.extend(cell.iter().cloned());
        hargs.extend(["-o".into(), h.to_str().unwrap().into(), "--threads".into(), "2".into()]);
        let oh = ruc(&hargs.iter().map(String::as_str).collect::<Vec<_>>());
        assert!(oh.status.success(), "{}", stderr(&oh));
        outputs.push((
            o.stdout,
            std::fs::read(&sol).unwrap(),
            std::fs::read(&csv).unwrap(),
            std::fs::read(&h).unwrap(),
        ));
    }
    assert!(outputs[0] == outputs[1], "outputs differ between identical runs");
    let v: Value = serde_json::from_slice(&outputs[0].0).unwrap();
    let mean: Vec<f64> = serde_json::from_value(v["mean_strain"].clone()).unwrap();
    for (a, b) in mean.iter().zip([0.01, -0.004, 0.006]) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn verify_detects_wrong_signs() {
    let (_d, fx) = fixtures();
    let base = [
        "verify",
        "--spec",
        &p(&fx, "honeycomb.json"),
        "--mesh",
        &p(&fx, "honeycomb_mesh.json"),
        "--layout",
        &p(&fx, "honeycomb_layout.json"),
        "--material",
        &p(&fx, "honeycomb_materials.json"),
        "--load",
        &p(&fx, "shear.json"),
    ]
    .map(String::from);
    let args: Vec<&str> = base.iter().map(String::as_str).chain(["--stiffness", "--format", "json"]).collect();
    let o = ruc(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = json_out(&o);
    assert_eq!(v["equivalence"]["passed"], true);
    assert_eq!(v["stiffness"]["passed"], true);

    let args: Vec<&str> = base.iter().map(String::as_str).chain(["--gammas", "1,1,1", "--format", "json"]).collect();
    let o = ruc(&args);
    assert_eq!(o.status.code(), Some(2));
    let v = json_out(&o);
    let r = v["equivalence"]["strain_residual"].as_f64().unwrap();
    assert!(r > 1e-2, "{r}");

    let uc = p(&fx, "honeycomb_uc_mesh.json");
    let args: Vec<&str> = base.iter().map(String::as_str).chain(["--uc-mesh", uc.as_str()]).collect();
    let o = ruc(&args);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn full_cell_checkerboard_has_classical_spec() {
    let (_d, fx) = fixtures();
    let o = ruc(&["cases", "--spec", &p(&fx, "checkerboard_uc.json"), "--format", "json"]);
    let v = json_out(&o);
    assert_eq!(v["cases"].as_array().unwrap().len(), 1);
    assert_eq!(v["cases"][0]["dimension"], 3);
}
