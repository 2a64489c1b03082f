//! End-to-end runs of the `firegrid` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn firegrid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_firegrid"))
        .args(args)
        .env_remove("FIREGRID_BACKEND")
        .env("RUST_LOG", "info")
        .output()
        .expect("binary runs")
}

fn text(out: &Output) -> String {
    format!(
        "{}{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    )
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Runs the risk stage on the 3x3 fixture into `dir/risk.json`.
fn risk_into(dir: &Path, r_psps: &str) -> (PathBuf, Output) {
    let out = dir.join("risk.json");
    let o = firegrid(&[
        "risk",
        "--network",
        s(&data("grid3.json")),
        "--raster",
        s(&data("grid3_raster.csv")),
        "--raster-meta",
        s(&data("grid3_meta.json")),
        "--r-psps",
        r_psps,
        "--out",
        s(&out),
    ]);
    (out, o)
}

#[test]
fn validate_accepts_fixture() {
    let o = firegrid(&["validate", "--network", s(&data("grid3.json"))]);
    assert!(o.status.success(), "{}", text(&o));
    assert!(
        text(&o).contains("3 buses, 3 lines, 1 generators, 0 errors"),
        "{}",
        text(&o)
    );
}

#[test]
fn validate_names_missing_field() {
    let dir = tempfile::tempdir().unwrap();
    let mut net = json(&data("grid3.json"));
    net["lines"][0].as_object_mut().unwrap().remove("flow_limit");
    let p = dir.path().join("net.json");
    std::fs::write(&p, net.to_string()).unwrap();
    let o = firegrid(&["validate", "--network", s(&p)]);
    assert!(!o.status.success());
    let t = text(&o);
    assert!(t.contains("flow_limit") && t.contains("net.json"), "{t}");
}

#[test]
fn validate_fails_on_dangling_bus() {
    let dir = tempfile::tempdir().unwrap();
    let mut net = json(&data("grid3.json"));
    net["lines"][2]["to_bus"] = "nowhere".into();
    let p = dir.path().join("net.json");
    std::fs::write(&p, net.to_string()).unwrap();
    let o = firegrid(&["validate", "--network", s(&p)]);
    assert!(!o.status.success());
    assert!(text(&o).contains("nowhere"), "{}", text(&o));
}

#[test]
fn risk_matches_sampled_golden_and_caches() {
    let dir = tempfile::tempdir().unwrap();
    let (out, o) = risk_into(dir.path(), "500");
    assert!(o.status.success(), "{}", text(&o));
    let got = json(&out);
    let want = json(&data("grid3_risk_golden.json"));
    let stats = &got["pixel_stats"];
    assert!((stats["mean"].as_f64().unwrap() - want["mean"].as_f64().unwrap()).abs() < 1e-9);
    assert!((stats["std_dev"].as_f64().unwrap() - want["std_dev"].as_f64().unwrap()).abs() < 1e-9);
    let (g, w) = (
        got["line_day_risk"].as_array().unwrap(),
        want["line_day_risk"].as_array().unwrap(),
    );
    assert_eq!(g.len(), w.len());
    for (gl, wl) in g.iter().zip(w) {
        for (a, b) in gl.as_array().unwrap().iter().zip(wl.as_array().unwrap()) {
            let (a, b) = (a.as_f64().unwrap(), b.as_f64().unwrap());
            assert!((a - b).abs() <= 1e-3 * b.max(1e-9), "{a} vs {b}");
        }
    }
    // Every line carries risk on day one, inside the medium band.
    assert_eq!(got["harden_set"], serde_json::json!(["diag", "bend", "tie"]));

    let before = std::fs::metadata(&out).unwrap().modified().unwrap();
    let (_, again) = risk_into(dir.path(), "500");
    assert!(again.status.success());
    assert!(text(&again).contains("up to date"), "{}", text(&again));
    assert_eq!(std::fs::metadata(&out).unwrap().modified().unwrap(), before);

    // A changed threshold invalidates the stamp.
    let (_, third) = risk_into(dir.path(), "400");
    assert!(!text(&third).contains("up to date"));
    assert_eq!(json(&out)["thresholds"]["r_psps"], 400.0);
}

fn build(dir: &Path, risk: &Path, model: &str, budget: &str, extra: &[&str]) -> Output {
    let net = data("grid3.json");
    let mut args = vec![
        "build",
        "--network",
        s(&net),
        "--risk",
        s(risk),
        "--model",
        model,
        "--budget",
        budget,
        "--out-dir",
        s(dir),
    ];
    args.extend_from_slice(extra);
    firegrid(&args)
}

#[test]
fn emit_only_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (risk, _) = risk_into(dir.path(), "500");
    let o = build(dir.path(), &risk, "E-M8", "1.5", &["--emit-only"]);
    assert!(!o.status.success());
    assert!(text(&o).contains("baseline"), "{}", text(&o));

    build(dir.path(), &risk, "BL-M0", "0", &[]);
    let base = dir.path().join("base.json");
    let o = firegrid(&[
        "solve",
        "--model",
        s(&dir.path().join("BL-M0@0.json")),
        "--out",
        s(&base),
        "--gap",
        "0",
    ]);
    assert!(o.status.success(), "{}", text(&o));
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let o = build(d, &risk, "E-M8", "1.5", &["--emit-only", "--baseline", s(&base)]);
        assert!(o.status.success(), "{}", text(&o));
        assert!(text(&o).contains("sha256="));
    }
    let ma = std::fs::read(a.join("E-M8@1.5.mps")).unwrap();
    assert_eq!(ma, std::fs::read(b.join("E-M8@1.5.mps")).unwrap());
    assert!(!a.join("E-M8@1.5.json").exists());
}

#[test]
fn process_backend_matches_in_process_solver() {
    let dir = tempfile::tempdir().unwrap();
    let (risk, _) = risk_into(dir.path(), "500");
    let o = build(dir.path(), &risk, "BL-M1", "1", &[]);
    assert!(o.status.success(), "{}", text(&o));
    let model = dir.path().join("BL-M1@1.json");

    let cfg = dir.path().join("self.json");
    let spec = serde_json::json!({
        "name": "self-mps",
        "command": env!("CARGO_BIN_EXE_firegrid"),
        "args": ["solve-mps", "{model}", "{solution}", "--gap", "{gap}", "--time-limit", "{time_limit}"],
        "solution_format": "plain"
    });
    std::fs::write(&cfg, spec.to_string()).unwrap();

    let via_proc = dir.path().join("proc.json");
    let o = firegrid(&[
        "solve",
        "--model",
        s(&model),
        "--out",
        s(&via_proc),
        "--gap",
        "0",
        "--backend",
        s(&cfg),
    ]);
    assert!(o.status.success(), "{}", text(&o));
    let direct = dir.path().join("direct.json");
    let o = firegrid(&["solve", "--model", s(&model), "--out", s(&direct), "--gap", "0"]);
    assert!(o.status.success(), "{}", text(&o));

    let (p, d) = (json(&via_proc), json(&direct));
    assert_eq!(p["backend"], "self-mps");
    assert_eq!(p["status"], "optimal");
    assert_eq!(d["status"], "optimal");
    let (po, dobj) = (p["objective"].as_f64().unwrap(), d["objective"].as_f64().unwrap());
    assert!((po - dobj).abs() < 1e-9, "{po} vs {dobj}");
    assert!(p["verification"]["feasible"].as_bool().unwrap(), "{p}");
}

#[test]
fn failing_process_backend_is_an_error_status() {
    let dir = tempfile::tempdir().unwrap();
    let (risk, _) = risk_into(dir.path(), "500");
    build(dir.path(), &risk, "BL-M1", "0", &[]);
    let cfg = dir.path().join("false.json");
    std::fs::write(
        &cfg,
        r#"{"name": "broken", "command": "false", "solution_format": "plain"}"#,
    )
    .unwrap();
    let out = dir.path().join("sol.json");
    let o = firegrid(&[
        "solve",
        "--model",
        s(&dir.path().join("BL-M1@0.json")),
        "--out",
        s(&out),
        "--backend",
        s(&cfg),
    ]);
    assert!(!o.status.success());
    assert_eq!(json(&out)["status"], "error");
}

fn write_config(dir: &Path, risk: &Path, budgets: &str, models: &str, extra: &str) -> PathBuf {
    let cfg = dir.join("run.toml");
    std::fs::write(
        &cfg,
        format!(
            "[inputs]\nnetwork = {:?}\nrisk = {:?}\n\n[budgets]\nvalues = {budgets}\n\n[models]\nids = {models}\n\n[solver]\nmip_gap = 0.0\n{extra}",
            s(&data("grid3.json")),
            s(risk)
        ),
    )
    .unwrap();
    cfg
}

fn run(cfg: &Path, out: &Path) -> Output {
    firegrid(&["run", "--config", s(cfg), "--out-dir", s(out), "--jobs", "2"])
}

#[test]
fn single_scenario_run() {
    let dir = tempfile::tempdir().unwrap();
    let (risk, _) = risk_into(dir.path(), "500");
    let cfg = write_config(dir.path(), &risk, "[0]", "[\"BL-M0\"]", "");
    let out = dir.path().join("out");
    let o = run(&cfg, &out);
    assert!(o.status.success(), "{}", text(&o));
    let m = json(&out.join("manifest.json"));
    let sc = m["scenarios"].as_array().unwrap();
    assert_eq!(sc.len(), 1);
    assert_eq!(sc[0]["scenario"], "BL-M0@0");
    assert_eq!(sc[0]["status"], "optimal");
    assert!(out.join("solutions/BL-M0@0.json").exists());
    assert!(out.join("models/BL-M0@0.mps").exists());
}

#[test]
fn infeasible_scenario_does_not_fail_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let (risk, _) = risk_into(dir.path(), "500");
    // Only `diag` touches a vulnerable bus and it costs more than the budget,
    // so the budget-share policy cannot be met.
    let cfg = write_config(dir.path(), &risk, "[1]", "[\"BL-M0\", \"BL-M1\", \"M2\", \"E-M6\"]", "");
    let out = dir.path().join("out");
    let o = run(&cfg, &out);
    assert!(o.status.success(), "{}", text(&o));
    let m = json(&out.join("manifest.json"));
    let status: Vec<(String, String)> = m["scenarios"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| {
            (
                r["scenario"].as_str().unwrap().to_owned(),
                r["status"].as_str().unwrap().to_owned(),
            )
        })
        .collect();
    assert_eq!(status.len(), 4, "{status:?}");
    let infeasible: Vec<_> = status.iter().filter(|s| s.1 == "infeasible").collect();
    assert_eq!(infeasible.len(), 1, "{status:?}");
    assert_eq!(infeasible[0].0, "M2@1");
    assert_eq!(status.iter().filter(|s| s.1 == "optimal").count(), 3, "{status:?}");
    assert!(out.join("report.csv").exists());
}

#[test]
fn warm_starts_chain_and_rerun_is_cached() {
    let dir = tempfile::tempdir().unwrap();
    let (risk, _) = risk_into(dir.path(), "500");
    let cfg = write_config(dir.path(), &risk, "[0, 1, 2.5]", "[\"BL-M1\"]", "");
    let out = dir.path().join("out");
    let o = run(&cfg, &out);
    assert!(o.status.success(), "{}", text(&o));
    let m = json(&out.join("manifest.json"));
    let rows = m["scenarios"].as_array().unwrap();
    let warm: Vec<&Value> = rows.iter().map(|r| &r["warm_start_from"]).collect();
    assert_eq!(warm, [&Value::Null, &Value::from("BL-M1@0"), &Value::from("BL-M1@1")]);
    assert!(rows.iter().all(|r| r["cached"] == false));
    assert_eq!(m["monotonicity"]["BL-M1"]["status"], "passed");

    let o = run(&cfg, &out);
    assert!(o.status.success(), "{}", text(&o));
    let again = json(&out.join("manifest.json"));
    let rows2 = again["scenarios"].as_array().unwrap();
    assert!(rows2.iter().all(|r| r["cached"] == true), "{rows2:?}");
    for (a, b) in rows.iter().zip(rows2) {
        assert_eq!(a["objective"], b["objective"]);
        assert_eq!(a["model_sha256"], b["model_sha256"]);
    }
}

#[test]
fn locked_output_dir_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let (risk, _) = risk_into(dir.path(), "500");
    let cfg = write_config(dir.path(), &risk, "[0]", "[\"BL-M0\"]", "");
    let out = dir.path().join("out");
    std::fs::create_dir_all(&out).unwrap();
    std::fs::write(out.join(".firegrid.lock"), "").unwrap();
    let o = run(&cfg, &out);
    assert!(!o.status.success());
    assert!(text(&o).contains("locked"), "{}", text(&o));
    assert!(!out.join("manifest.json").exists());
    assert!(out.join(".firegrid.lock").exists());
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (risk, _) = risk_into(dir.path(), "500");
    let cfg = write_config(dir.path(), &risk, "[0]", "[\"BL-M0\"]", "mip_gapp = 0.1\n");
    let o = run(&cfg, &dir.path().join("out"));
    assert!(!o.status.success());
    assert!(text(&o).contains("mip_gapp"), "{}", text(&o));
}

#[test]
fn report_from_solutions() {
    let dir = tempfile::tempdir().unwrap();
    let (risk, _) = risk_into(dir.path(), "500");
    build(dir.path(), &risk, "E-M6", "1", &[]);
    let sol = dir.path().join("E-M6@1.sol.json");
    let o = firegrid(&[
        "solve",
        "--model",
        s(&dir.path().join("E-M6@1.json")),
        "--out",
        s(&sol),
        "--network",
        s(&data("grid3.json")),
    ]);
    assert!(o.status.success(), "{}", text(&o));
    assert!(dir.path().join("E-M6@1.sol.post.json").exists());
    let rep = dir.path().join("report");
    let o = firegrid(&[
        "report",
        "--network",
        s(&data("grid3.json")),
        "--risk",
        s(&risk),
        "--solutions",
        s(&dir.path().join("E-M6@1.sol.post.json")),
        "--out-dir",
        s(&rep),
    ]);
    assert!(o.status.success(), "{}", text(&o));
    assert!(rep.join("report.csv").exists() && rep.join("curves/E-M6.csv").exists());
}
