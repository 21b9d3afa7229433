use std::path::Path;
use std::process::{Command, Output};

fn gsmap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gsmap")).args(args).output().expect("run gsmap")
}

fn ok(args: &[&str]) -> String {
    let out = gsmap(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn encode_decode_compare_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let ply = dir.path().join("in.ply");
    let gsmc = dir.path().join("out.gsmc");
    let dec = dir.path().join("dec.ply");
    let dec2 = dir.path().join("dec2.ply");
    ok(&["gen", p(&ply), "--n", "3000", "--seed", "4"]);

    let report = ok(&["--json", "encode", p(&ply), p(&gsmc), "--k", "45", "--threads", "2"]);
    let report: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(report["n"], 3000);
    assert_eq!(report["side"], 64);
    assert_eq!(report["miniplas"]["passes"].as_array().unwrap().len(), 1);

    ok(&["decode", p(&gsmc), p(&dec)]);
    ok(&["decode", p(&gsmc), p(&dec2)]);
    assert_eq!(std::fs::read(&dec).unwrap(), std::fs::read(&dec2).unwrap());

    let cmp: serde_json::Value = serde_json::from_str(&ok(&["--json", "compare", p(&dec), p(&dec2)])).unwrap();
    assert_eq!(cmp["attribute_psnr"], "inf");

    let text = ok(&["compare", p(&ply), p(&dec)]);
    assert!(text.contains("position"));
    assert!(text.contains("attribute PSNR"));
}

#[test]
fn text_report_has_stage_table() {
    let dir = tempfile::tempdir().unwrap();
    let ply = dir.path().join("in.ply");
    let gsmc = dir.path().join("out.gsmc");
    ok(&["gen", p(&ply), "--n", "500"]);
    let text = ok(&["encode", p(&ply), p(&gsmc), "--qp", "3", "--mbs", "8"]);
    for column in ["Morton 3D", "Morton 2D", "PCA", "MiniPLAS", "All", "bits per primitive"] {
        assert!(text.contains(column), "missing {column}");
    }
}

#[test]
fn truncated_container_leaves_no_output() {
    let dir = tempfile::tempdir().unwrap();
    let ply = dir.path().join("in.ply");
    let gsmc = dir.path().join("out.gsmc");
    let dec = dir.path().join("dec.ply");
    ok(&["gen", p(&ply), "--n", "800"]);
    ok(&["encode", p(&ply), p(&gsmc)]);
    let bytes = std::fs::read(&gsmc).unwrap();
    std::fs::write(&gsmc, &bytes[..bytes.len() - 10]).unwrap();
    let out = gsmap(&["decode", p(&gsmc), p(&dec)]);
    assert_eq!(out.status.code(), Some(7));
    assert!(!dec.exists());
}

#[test]
fn exit_codes_per_class() {
    let dir = tempfile::tempdir().unwrap();
    let ply = dir.path().join("in.ply");
    ok(&["gen", p(&ply), "--n", "100"]);
    let out_path = dir.path().join("x.gsmc");

    assert_eq!(gsmap(&["encode", "/nonexistent/in.ply", p(&out_path)]).status.code(), Some(2));
    assert_eq!(gsmap(&["encode", p(&ply), p(&out_path), "--k", "13"]).status.code(), Some(5));
    assert_eq!(gsmap(&["encode", p(&ply), p(&out_path), "--mbs", "6"]).status.code(), Some(5));
    assert_eq!(gsmap(&["encode", p(&ply), p(&out_path), "--bogus"]).status.code(), Some(5));

    let ascii = dir.path().join("ascii.ply");
    std::fs::write(&ascii, "ply\nformat ascii 1.0\nelement vertex 0\nend_header\n").unwrap();
    assert_eq!(gsmap(&["encode", p(&ascii), p(&out_path)]).status.code(), Some(3));

    let bad_backend = dir.path().join("backend.json");
    std::fs::write(&bad_backend, r#"{"name":"x","encode":"cp {in} {out}","decode":"cp {in} {out}"}"#).unwrap();
    let out = gsmap(&["encode", p(&ply), p(&out_path), "--backend-config", p(&bad_backend)]);
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn external_backend_through_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let ply = dir.path().join("in.ply");
    let gsmc = dir.path().join("out.gsmc");
    let dec = dir.path().join("dec.ply");
    let backend = dir.path().join("backend.json");
    std::fs::write(
        &backend,
        r#"{"name":"copy","encode":"cp {in} {out} # {w} {h} {qp} {lossless}","decode":"cp {in} {out}","max_parallel":2}"#,
    )
    .unwrap();
    ok(&["gen", p(&ply), "--n", "400"]);
    ok(&["encode", p(&ply), p(&gsmc), "--backend-config", p(&backend)]);
    // the container names its backend; decoding without it is a config error
    assert_eq!(gsmap(&["decode", p(&gsmc), p(&dec)]).status.code(), Some(5));
    ok(&["decode", p(&gsmc), p(&dec), "--backend-config", p(&backend)]);

    let failing = dir.path().join("failing.json");
    std::fs::write(
        &failing,
        r#"{"name":"fail","encode":"false {in} {out} {w} {h} {qp} {lossless}","decode":"false {in} {out}"}"#,
    )
    .unwrap();
    let out = gsmap(&["encode", p(&ply), p(&gsmc), "--backend-config", p(&failing)]);
    assert_eq!(out.status.code(), Some(6));
}

#[test]
fn analyze_reports_layouts_and_evr() {
    let dir = tempfile::tempdir().unwrap();
    let ply = dir.path().join("in.ply");
    ok(&["gen", p(&ply), "--n", "5000", "--seed", "2"]);
    let json: serde_json::Value = serde_json::from_str(&ok(&["--json", "analyze", p(&ply)])).unwrap();
    let layouts = json["layouts"].as_array().unwrap();
    let names: Vec<&str> = layouts.iter().map(|l| l["layout"].as_str().unwrap()).collect();
    assert_eq!(names, ["random", "row-major", "morton2", "morton2+miniplas(4)"]);
    let joint = &json["evr"][0];
    assert_eq!(joint["mode"], "joint");
    assert!((joint["cumulative"][44].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn config_file_sets_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let ply = dir.path().join("in.ply");
    let gsmc = dir.path().join("out.gsmc");
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"k":6,"pca_mode":"per-color","qp":{"sh_dc":0,"ac":2,"scale":0,"opacity":0,"rotation":1}}"#)
        .unwrap();
    ok(&["gen", p(&ply), "--n", "300"]);
    let report: serde_json::Value =
        serde_json::from_str(&ok(&["--json", "encode", p(&ply), p(&gsmc), "--config", p(&cfg), "--k", "9"])).unwrap();
    assert_eq!(report["k"], 9);
    assert_eq!(report["pca_mode"], "per-color");
    assert_eq!(report["bitrate"]["images"].as_array().unwrap().len(), 10);
}
