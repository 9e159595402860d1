use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use riskstab::{
    demo, DecisionSet, DiscreteMeasure, MeanRiskModel, ParamMap, RecourseModel, RiskSpec,
};

fn riskstab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_riskstab"))
        .args(args)
        .output()
        .expect("spawn riskstab")
}

fn demo_dir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for (name, text) in demo::files().unwrap() {
        fs::write(dir.path().join(name), text).unwrap();
    }
    dir
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    fs::write(dir.join(name), text).unwrap();
    p(dir, name)
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn scalar(out: &Output) -> f64 {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).trim().parse().unwrap()
}

#[test]
fn eval_all_reports_phi_and_argmin() {
    let d = demo_dir();
    let out = riskstab(&[
        "eval",
        "--model",
        &p(d.path(), "strict_minimizer_model.json"),
        "--measure",
        &p(d.path(), "smoothed_dirac.json"),
        "--all",
    ]);
    let v = stdout_json(&out);
    assert_eq!(v["q"].as_array().unwrap().len(), 9);
    assert_eq!(v["argmin"].as_array().unwrap().len(), 1);
    assert_eq!(v["argmin"][0]["x"][0].as_f64(), Some(0.0));
    // E|0 - z| over the smoothed Dirac is its mean
    assert!((v["phi"].as_f64().unwrap() - 0.1).abs() < 1e-12);
    assert_eq!(v["moment"]["feasible"], true);
}

#[test]
fn eval_single_decision() {
    let d = demo_dir();
    let out = riskstab(&[
        "eval",
        "--model",
        &p(d.path(), "strict_minimizer_model.json"),
        "--measure",
        &p(d.path(), "smoothed_dirac.json"),
        "--x",
        "8",
    ]);
    let v = stdout_json(&out);
    assert_eq!(v["x"][0].as_f64(), Some(1.0));
    assert!((v["q"].as_f64().unwrap() - 0.9).abs() < 1e-12);

    let out = riskstab(&[
        "eval",
        "--model",
        &p(d.path(), "strict_minimizer_model.json"),
        "--measure",
        &p(d.path(), "smoothed_dirac.json"),
        "--x",
        "9",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_or_malformed_input_exits_2() {
    let d = demo_dir();
    let out = riskstab(&[
        "eval",
        "--model",
        &p(d.path(), "no_such_model.json"),
        "--measure",
        &p(d.path(), "base_measure.json"),
        "--all",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no_such_model.json"));

    let bad = write(
        d.path(),
        "bad.json",
        r#"{"dim": 1, "atoms": [{"point": [0.0], "weight": -1.0}]}"#,
    );
    let out = riskstab(&[
        "metrics",
        "--measure",
        &bad,
        "--measure2",
        &bad,
        "--kind",
        "bl",
    ]);
    assert_eq!(out.status.code(), Some(2));

    let plane = write(
        d.path(),
        "plane.json",
        &serde_json::to_string(&DiscreteMeasure::dirac(vec![0.0, 0.0]).unwrap()).unwrap(),
    );
    let out = riskstab(&[
        "eval",
        "--model",
        &p(d.path(), "expectation_model.json"),
        "--measure",
        &plane,
        "--all",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn infeasible_recourse_exits_3_naming_the_point() {
    let d = demo_dir();
    // y = z - x with y >= 0: infeasible whenever z < x
    let recourse = RecourseModel::Linear {
        a: vec![vec![1.0]],
        q: ParamMap::constant(vec![1.0], 1, 1),
        h: ParamMap::affine(vec![vec![-1.0]], vec![vec![1.0]], vec![0.0]).unwrap(),
    };
    let model = MeanRiskModel::new(
        recourse,
        RiskSpec::Expectation,
        DecisionSet::new(vec![vec![0.5]]).unwrap(),
        1.0,
        1.0,
    )
    .unwrap();
    let m = write(d.path(), "m.json", &model.to_json().unwrap());
    let nu = write(
        d.path(),
        "nu.json",
        &serde_json::to_string(&DiscreteMeasure::from_scalars(&[(-1.0, 0.5), (2.0, 0.5)]).unwrap())
            .unwrap(),
    );
    let out = riskstab(&["eval", "--model", &m, "--measure", &nu, "--all"]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("x=[0.5]") && err.contains("z=[-1.0]"), "{err}");
}

#[test]
fn metric_values() {
    let d = tempfile::tempdir().unwrap();
    let dirac = |name: &str, x: f64| {
        write(
            d.path(),
            name,
            &serde_json::to_string(&DiscreteMeasure::dirac(vec![x]).unwrap()).unwrap(),
        )
    };
    let (d0, d1, d2, d3) = (
        dirac("d0.json", 0.0),
        dirac("d1.json", 1.0),
        dirac("d2.json", 2.0),
        dirac("d3.json", 3.0),
    );
    let run = |a: &str, b: &str, kind: &str, q: &str| {
        scalar(&riskstab(&[
            "metrics",
            "--measure",
            a,
            "--measure2",
            b,
            "--kind",
            kind,
            "--q",
            q,
        ]))
    };
    assert_eq!(run(&d2, &d2, "psi", "2"), 0.0);
    assert!((run(&d0, &d1, "wasserstein", "1") - 1.0).abs() < 1e-12);
    assert!((run(&d2, &d3, "fm", "2") - 3.0).abs() < 1e-12);
    assert!((run(&d0, &d3, "bl", "1") - 2.0).abs() < 1e-12);
    let out = riskstab(&[
        "metrics",
        "--measure",
        &d0,
        "--measure2",
        &d1,
        "--kind",
        "wasserstein",
        "--q",
        "0.5",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

fn stability(
    d: &Path,
    model: &str,
    measure: &str,
    scheme: &str,
    out: &Path,
    extra: &[&str],
) -> Output {
    let mut args = vec![
        "stability".to_string(),
        "--model".into(),
        p(d, model),
        "--measure".into(),
        p(d, measure),
        "--scheme".into(),
        p(d, scheme),
        "--out".into(),
        out.display().to_string(),
    ];
    args.extend(extra.iter().map(|s| s.to_string()));
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    riskstab(&refs)
}

#[test]
fn zero_contamination_gives_zero_columns() {
    let d = demo_dir();
    let scheme = r#"{"kind": "contamination", "direction": {"dim": 1, "atoms": [{"point": [5.0], "weight": 1.0}]}, "t_schedule": [0.0, 0.0, 0.0]}"#;
    write(d.path(), "zero.json", scheme);
    let out_dir = d.path().join("out");
    let out = stability(
        d.path(),
        "expectation_model.json",
        "base_measure.json",
        "zero.json",
        &out_dir,
        &[],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(out_dir.join("report.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    for r in rows {
        let cells: Vec<&str> = r.split(',').collect();
        assert!(
            cells[2..7].iter().all(|c| c.parse::<f64>().unwrap() == 0.0),
            "{r}"
        );
    }
}

#[test]
fn saa_demo_passes_its_gate() {
    let d = demo_dir();
    let out_dir = d.path().join("out");
    let out = stability(
        d.path(),
        "expectation_model.json",
        "base_measure.json",
        "saa_scheme.json",
        &out_dir,
        &["--gate", "delta_phi_abs:3", "--seed", "0"],
    );
    let v = stdout_json(&out);
    assert_eq!(v["rows"], 3);
    assert_eq!(v["gates"][0]["verdict"]["pass"], true);
    for f in ["report.csv", "report.json", "report.svg"] {
        assert!(out_dir.join(f).is_file());
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["rows"].as_array().unwrap().len(), 3);
}

#[test]
fn failing_gate_exits_4() {
    let d = demo_dir();
    let out_dir = d.path().join("out");
    // the escape family keeps d_psi near 1 while BL vanishes
    let out = stability(
        d.path(),
        "expectation_model.json",
        "base_measure.json",
        "escape_scheme.json",
        &out_dir,
        &["--gate", "d_bl:10", "--gate", "d_psi factor 3"],
    );
    assert_eq!(
        out.status.code(),
        Some(4),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["gates"][0]["verdict"]["pass"], true);
    assert_eq!(v["gates"][1]["verdict"]["pass"], false);
    assert_eq!(v["integrability_verdict"], false);
    assert!(out_dir.join("report.csv").is_file());

    let out = stability(
        d.path(),
        "expectation_model.json",
        "base_measure.json",
        "escape_scheme.json",
        &out_dir,
        &["--gate", "nope:3"],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn outputs_are_byte_identical() {
    let d = demo_dir();
    let read = |dir: &PathBuf| -> Vec<Vec<u8>> {
        ["report.csv", "report.json", "report.svg"]
            .iter()
            .map(|f| fs::read(dir.join(f)).unwrap())
            .collect()
    };
    let (a, b) = (d.path().join("a"), d.path().join("b"));
    for dir in [&a, &b] {
        let out = stability(
            d.path(),
            "avar_model.json",
            "base_measure.json",
            "saa_scheme.json",
            dir,
            &[],
        );
        assert!(out.status.success());
    }
    assert_eq!(read(&a), read(&b));
}

#[test]
fn certify_reports_growth_constants() {
    let d = demo_dir();
    let out = riskstab(&[
        "certify",
        "--model",
        &p(d.path(), "growth_milp.json"),
        "--measure",
        &p(d.path(), "radial_sampler.json"),
        "--samples",
        "500",
        "--out",
        &d.path().join("cert").display().to_string(),
    ]);
    let v = stdout_json(&out);
    assert_eq!(v["gamma"].as_f64(), Some(1.0));
    assert_eq!(v["eta_hat"].as_array().unwrap().len(), 5);
    assert!(v["max_residual_margin"].as_f64().unwrap() <= 0.0);
    assert!(d.path().join("cert/certificate.json").is_file());

    // a plain measure is accepted and sampled by weight
    let out = riskstab(&[
        "certify",
        "--model",
        &p(d.path(), "growth_linear.json"),
        "--measure",
        &p(d.path(), "base_measure.json"),
        "--samples",
        "200",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}
