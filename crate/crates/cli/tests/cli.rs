use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bioinverse_core::io::write_curve_csv;
use bioinverse_core::models::BumpModel;
use serde_json::{json, Value};
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_bioinverse"));
    c.env_remove("BIOINVERSE_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn write_config(dir: &Path, name: &str, value: Value) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(&value).unwrap()).unwrap();
    p
}

fn bump_config(extra: Value) -> Value {
    let mut v = json!({
        "model": {"kind": "bump", "radius": 0.3, "n_vertices": 181},
        "rays": {"range": {"start": 2, "end": 178, "step": 4, "max_length": 0.2}},
        "theta_true": [0.3, 0.1],
        "seed": 42
    });
    for (k, x) in extra.as_object().unwrap() {
        v[k] = x.clone();
    }
    v
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn forward_at_zero_is_the_reference_semicircle() {
    let t = TempDir::new().unwrap();
    let cfg = write_config(t.path(), "c.json", bump_config(json!({})));
    let out = t.path().join("fwd");
    let o = run(&["forward", "--config", s(&cfg), "--out", s(&out), "--theta", "0,0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let reference = t.path().join("ref.csv");
    write_curve_csv(&reference, &BumpModel::<f64>::default().reference_curve()).unwrap();
    assert_eq!(fs::read(out.join("interface.csv")).unwrap(), fs::read(reference).unwrap());
    let meta: Value = serde_json::from_slice(&fs::read(out.join("forward.json")).unwrap()).unwrap();
    assert_eq!(meta["run"]["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn forward_outside_injectivity_bound_is_a_validation_error() {
    let t = TempDir::new().unwrap();
    let cfg = write_config(t.path(), "c.json", bump_config(json!({})));
    let o = run(&["forward", "--config", s(&cfg), "--out", s(&t.path().join("o")), "--theta", "7,-0.1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("p1"), "{}", stderr(&o));
}

#[test]
fn missing_scenario_file_is_a_validation_error() {
    let t = TempDir::new().unwrap();
    let cfg = write_config(t.path(), "c.json", json!({"model": {"kind": "fem", "scenario": "nope.json"}}));
    let o = run(&["forward", "--config", s(&cfg), "--out", s(&t.path().join("o")), "--theta", "400,0.3"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn missing_model_constants_are_rejected() {
    let t = TempDir::new().unwrap();
    let cfg = write_config(t.path(), "c.json", json!({"model": {"kind": "bump", "radius": 0.3}}));
    let o = run(&["synth", "--config", s(&cfg), "--out", s(&t.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn synth_writes_one_file_per_level_reproducibly() {
    let t = TempDir::new().unwrap();
    let cfg = write_config(t.path(), "c.json", bump_config(json!({"sigmas": [0.0, 1e-4, 1e-3, 1e-2]})));
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    for dir in [&a, &b] {
        let o = run(&["synth", "--config", s(&cfg), "--out", s(dir)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let mut names: Vec<String> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(names, ["observation_0.json", "observation_1.json", "observation_2.json", "observation_3.json"]);
    for n in &names {
        assert_eq!(fs::read(a.join(n)).unwrap(), fs::read(b.join(n)).unwrap());
    }
    let o0: Value = serde_json::from_slice(&fs::read(a.join("observation_0.json")).unwrap()).unwrap();
    assert!(o0["observation"]["offsets"].as_array().unwrap().iter().all(|v| v.as_f64() == Some(0.0)));
    assert_eq!(o0["observation"]["provenance"]["seed"], 42);
}

#[test]
fn seed_flag_changes_the_noise() {
    let t = TempDir::new().unwrap();
    let cfg = write_config(t.path(), "c.json", bump_config(json!({"sigmas": [1e-3]})));
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    assert!(run(&["synth", "--config", s(&cfg), "--out", s(&a)]).status.success());
    assert!(run(&["synth", "--config", s(&cfg), "--out", s(&b), "--seed", "7"]).status.success());
    assert_ne!(fs::read(a.join("observation_0.json")).unwrap(), fs::read(b.join("observation_0.json")).unwrap());
}

#[test]
fn invert_recovers_noise_free_bump() {
    let t = TempDir::new().unwrap();
    let cfg = write_config(t.path(), "c.json", bump_config(json!({"initial_guesses": [[0.15, 0.05]]})));
    let data = t.path().join("data");
    assert!(run(&["synth", "--config", s(&cfg), "--out", s(&data)]).status.success());
    let out = t.path().join("inv");
    let obs = data.join("observation_0.json");
    let o = run(&["invert", "--config", s(&cfg), "--observation", s(&obs), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r: Value = serde_json::from_slice(&fs::read(out.join("result.json")).unwrap()).unwrap();
    assert_eq!(r["result"]["status"], "converged_grad");
    let x: Vec<f64> = r["result"]["x"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!(((x[0] - 0.3) / 0.3).abs() < 1e-5 && ((x[1] - 0.1) / 0.1).abs() < 1e-5, "{x:?}");
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.starts_with("k,status,mu,err_res_mm,err_grad,p1,p2\n"));
}

#[test]
fn optimum_outside_bounds_exits_with_blowup_code() {
    let t = TempDir::new().unwrap();
    let model = json!({"kind": "offset", "x_min": -1.0, "x_max": 1.0, "n_vertices": 11});
    let gen = write_config(
        t.path(),
        "gen.json",
        json!({"model": model, "rays": {"range": {"start": 0, "end": 10, "max_length": 2.0}}, "theta_true": [0.5]}),
    );
    let fit = write_config(
        t.path(),
        "fit.json",
        json!({"model": model, "parameters": [{"name": "h", "lower": -0.1, "upper": 0.1, "unit": "mm"}], "initial_guesses": [[0.0]]}),
    );
    let data = t.path().join("data");
    assert!(run(&["synth", "--config", s(&gen), "--out", s(&data)]).status.success());
    let o = run(&["invert", "--config", s(&fit), "--observation", s(&data.join("observation_0.json")), "--out", s(&t.path().join("inv"))]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn observation_from_another_model_is_rejected() {
    let t = TempDir::new().unwrap();
    let bump = write_config(t.path(), "b.json", bump_config(json!({"initial_guesses": [[0.1, 0.1]]})));
    let off = write_config(
        t.path(),
        "o.json",
        json!({"model": {"kind": "offset", "x_min": -1.0, "x_max": 1.0, "n_vertices": 11},
               "rays": {"range": {"start": 0, "end": 10, "max_length": 2.0}}, "theta_true": [0.5]}),
    );
    let data = t.path().join("data");
    assert!(run(&["synth", "--config", s(&off), "--out", s(&data)]).status.success());
    let o = run(&["invert", "--config", s(&bump), "--observation", s(&data.join("observation_0.json")), "--out", s(&t.path().join("i"))]);
    assert_eq!(o.status.code(), Some(2));
}

fn campaign_config(t: &TempDir) -> PathBuf {
    write_config(
        t.path(),
        "camp.json",
        bump_config(json!({
            "sigmas": [1e-4, 1e-3],
            "initial_guesses": [[0.45, 0.05], [0.15, 0.15], [0.36, 0.07]]
        })),
    )
}

fn listing(dir: &Path, suffix: &str) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(suffix))
        .collect();
    v.sort();
    v
}

#[test]
fn campaign_writes_traces_and_summary_and_resumes() {
    let t = TempDir::new().unwrap();
    let cfg = campaign_config(&t);
    let out = t.path().join("camp");
    let o = run(&["campaign", "--config", s(&cfg), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(listing(&out.join("runs"), ".trace.csv").len(), 6);
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert_eq!(
        lines.next().unwrap(),
        "sigma_mm,mean_err_res_mm,std_err_res_mm,mean_p1,std_p1,mean_p2,std_p2,n_completed,n_failed"
    );
    let means: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(means.len(), 2);
    assert!(means[0] < means[1], "{means:?}");

    let before = fs::read(out.join("summary.json")).unwrap();
    fs::remove_file(out.join("runs/level1_guess2.json")).unwrap();
    let o = run(&["campaign", "--config", s(&cfg), "--out", s(&out)]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("1 computed, 5 reused"));
    assert_eq!(fs::read(out.join("summary.json")).unwrap(), before);

    let o = run(&["campaign", "--config", s(&cfg), "--out", s(&out), "--seed", "3"]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("6 computed, 0 reused"));
}

#[test]
fn report_single_trace_and_campaign_directory() {
    let t = TempDir::new().unwrap();
    let cfg = campaign_config(&t);
    let out = t.path().join("camp");
    assert!(run(&["campaign", "--config", s(&cfg), "--out", s(&out)]).status.success());

    let single = t.path().join("single");
    let trace = out.join("runs/level0_guess0.trace.csv");
    let o = run(&["report", s(&trace), "--out", s(&single)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let result: Value = serde_json::from_slice(&fs::read(out.join("runs/level0_guess0.json")).unwrap()).unwrap();
    let iterations = result["outcome"]["Ok"]["iterations"].as_u64().unwrap() as usize;
    let tidy = fs::read_to_string(single.join("level0_guess0.csv")).unwrap();
    assert_eq!(tidy.lines().count(), 1 + iterations + 1);
    assert!(tidy.starts_with("k,err_res_mm,err_grad,mu,p1,p2\n"));

    let o = run(&["report", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = out.join("report");
    assert_eq!(listing(&report, ".csv").len(), 7);
    assert!(fs::read_to_string(report.join("merged.csv")).unwrap().starts_with("run,k,quantity,value\n"));
}

#[test]
fn report_on_empty_directory_fails() {
    let t = TempDir::new().unwrap();
    let o = run(&["report", s(t.path())]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn thread_variable_is_validated() {
    let t = TempDir::new().unwrap();
    let cfg = write_config(t.path(), "c.json", bump_config(json!({})));
    let o = bin()
        .args(["forward", "--config", s(&cfg), "--out", s(&t.path().join("o"))])
        .env("BIOINVERSE_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = bin()
        .args(["forward", "--config", s(&cfg), "--out", s(&t.path().join("o"))])
        .env("BIOINVERSE_THREADS", "2")
        .output()
        .unwrap();
    assert!(o.status.success());
}
