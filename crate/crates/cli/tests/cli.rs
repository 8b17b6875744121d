use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_thermal-ballast"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn synth(dir: &Path, days: &str) -> PathBuf {
    let o = run(&["synth", "--out", dir.to_str().unwrap(), "--start", "2024-04-08", "--days", days]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    dir.join("project.json")
}

fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn simulate_is_repeatable_and_confined_to_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let project = synth(dir.path(), "7");
    let before = snapshot(dir.path());
    let p = project.to_str().unwrap();

    let first = dir.path().join("a");
    let second = dir.path().join("b");
    for out in [&first, &second] {
        let o = run(&["simulate", "--project", p, "--controlled", "--figure-data", "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = snapshot(&first);
    assert_eq!(a, snapshot(&second));
    assert!(a.contains_key(Path::new("controlled_ledger.csv")));
    assert!(a.contains_key(Path::new("controlled_figure_alpha_winter.csv")));

    let mut after = snapshot(dir.path());
    after.retain(|k, _| !k.starts_with("a") && !k.starts_with("b"));
    assert_eq!(before, after);

    let ledger = String::from_utf8(a[Path::new("controlled_ledger.csv")].clone()).unwrap();
    assert_eq!(
        ledger.lines().next(),
        Some("timestamp,mode,alpha,delta_T,e_pred,e_solar,grid_import,emissions,delta_co2")
    );
    assert_eq!(ledger.lines().count(), 7 * 48 + 1);
}

#[test]
fn baseline_summary_has_null_reductions() {
    let dir = tempfile::tempdir().unwrap();
    let project = synth(dir.path(), "3");
    let o = run(&["simulate", "--scenario", project.to_str().unwrap(), "--baseline"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("output/baseline_summary.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["controlled"], false);
    assert!(v["emissions_reduction_percent"].is_null());
    assert!(v["controlled_emissions_kg"].is_null());
    assert!(v["baseline_emissions_kg"].as_f64().unwrap() > 0.0);
}

#[test]
fn tune_writes_tables_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let project = synth(dir.path(), "7");
    let spec = dir.path().join("spec.json");
    std::fs::write(
        &spec,
        r#"{"horizons_h": [12, 24], "steps_min": [30, 60], "omegas": {"count": 4, "lo": 1e4, "hi": 1e13}}"#,
    )
    .unwrap();
    let mut outs = Vec::new();
    for (name, threads) in [("x", "4"), ("y", "1")] {
        let out = dir.path().join(name);
        let o = bin()
            .env("THERMAL_BALLAST_THREADS", threads)
            .args([
                "tune",
                "--project",
                project.to_str().unwrap(),
                "--spec",
                spec.to_str().unwrap(),
                "--heatmap-data",
                "--out",
                out.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(stdout(&o).contains("optimum"));
        outs.push(snapshot(&out));
    }
    assert_eq!(outs[0], outs[1]);
    let cells = String::from_utf8(outs[0][Path::new("tune_cells.csv")].clone()).unwrap();
    assert_eq!(cells.lines().count(), 1 + 2 * 2 * 4);
    let heat = String::from_utf8(outs[0][Path::new("tune_heatmap.csv")].clone()).unwrap();
    assert_eq!(heat.lines().count(), 1 + 4);
    let opt: serde_json::Value =
        serde_json::from_slice(&outs[0][Path::new("tune_optimum.json")]).unwrap();
    assert!(opt["optimum"]["max_daily_delta_t"].as_f64().unwrap() <= 1.5);
}

#[test]
fn report_writes_both_runs_and_comfort() {
    let dir = tempfile::tempdir().unwrap();
    let project = synth(dir.path(), "5");
    let o = run(&["report", "--project", project.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("output/controlled_summary.json")).unwrap())
            .unwrap();
    let base = v["baseline_emissions_kg"].as_f64().unwrap();
    let ctrl = v["controlled_emissions_kg"].as_f64().unwrap();
    let pct = v["emissions_reduction_percent"].as_f64().unwrap();
    assert!((pct - 100.0 * (base - ctrl) / base).abs() < 1e-9);
    let comfort = v["comfort"].as_array().unwrap();
    assert!(!comfort.is_empty());
    for c in comfort {
        assert!(c["shifted"]["pmv"].is_number());
        assert!(c["existing_building_ok"].is_boolean());
    }
    assert!(dir.path().join("output/baseline_ledger.csv").exists());
}

#[test]
fn identify_recovers_synthetic_surrogate() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "2");
    let model = dir.path().join("fit/winter.json");
    let o = run(&[
        "identify",
        "--data",
        dir.path().join("training_winter.csv").to_str().unwrap(),
        "--mode",
        "heating",
        "--order",
        "2",
        "--split",
        "0.7",
        "--out",
        model.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let fit: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(fit["r2"].as_f64().unwrap() >= 0.95);
    assert!(fit["nmae_percent"].as_f64().unwrap() <= 5.0);
    let saved: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(model).unwrap()).unwrap();
    assert_eq!(saved["mode"], "heating");
}

#[test]
fn envelope_prints_table_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let def = dir.path().join("envelope.json");
    std::fs::write(
        &def,
        r#"{"components": [
            {"name": "wall", "layers": [[0.2, 1.7, 2300, 920], [0.08, 0.04, 30, 1400]], "area": 10.0},
            {"name": "floor", "layers": [[0.1, 1.7, 2300, 920]], "area": 5.0, "r_si": 0.17}
        ]}"#,
    )
    .unwrap();
    let o = run(&["envelope", "--definition", def.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("wall") && text.contains("floor") && text.contains("total C_m"));
    let o = run(&["envelope", "--definition", def.to_str().unwrap(), "--json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let parts: f64 = v["components"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["capacity"].as_f64().unwrap())
        .sum();
    assert!((parts - v["total_capacity"].as_f64().unwrap()).abs() < 1e-9);
}

#[test]
fn decide_prints_decision() {
    let dir = tempfile::tempdir().unwrap();
    let window = dir.path().join("window.json");
    std::fs::write(
        &window,
        r#"{"config": {"omega": 1e9, "horizon_steps": 4, "step_minutes": 60, "gamma": 1.0,
                       "mode": "heating", "c_th": 6531.77},
            "window": {"e_pred": [1.0, 0.2, 0.2, 1.0], "e_solar": [0.0, 1.5, 1.2, 0.0],
                       "ci": [300, 150, 160, 320]}}"#,
    )
    .unwrap();
    let o = run(&["decide", "--window", window.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let d: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    // C²/(2ωm)·ΣCI/ΣΔE = 6531.77²/(8e9)·930/2.3
    let expected = 6531.77f64.powi(2) / 8e9 * 930.0 / 2.3;
    assert!((d["alpha_unsaturated"].as_f64().unwrap() - expected).abs() < 1e-12);
    assert_eq!(d["alpha"].as_f64().unwrap(), expected.min(1.0));
}

#[test]
fn pmv_reports_classes() {
    let o = run(&["pmv", "--ta", "20", "--v", "0.1", "--rh", "50", "--met", "1.2", "--clo", "1.1"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("PMV -0.31"), "{text}");
    assert!(text.contains("existing building: within"));
}

#[test]
fn exit_codes() {
    assert_eq!(run(&[]).status.code(), Some(2));
    assert_eq!(run(&["simulate", "--project", "x.json"]).status.code(), Some(2));
    assert_eq!(run(&["pmv", "--ta", "warm"]).status.code(), Some(2));
    assert_eq!(run(&["simulate", "--project", "/nonexistent/p.json", "--baseline"]).status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let project = synth(dir.path(), "2");
    let text = std::fs::read_to_string(&project).unwrap().replace("gCO2/kWh", "kgCO2/kWh");
    std::fs::write(&project, text).unwrap();
    let o = run(&["simulate", "--project", project.to_str().unwrap(), "--baseline"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("datasets.ci.unit"));
    assert!(!dir.path().join("output").exists());
}
