use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn housing(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_housing"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// A temp dir holding the generated fixtures under `fx/`.
fn workspace() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    let out = housing(dir.path(), &["gen-fixtures", "fx"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    dir
}

fn json(path: PathBuf) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write_config(dir: &Path, name: &str, value: serde_json::Value) -> String {
    std::fs::write(dir.join("fx").join(name), value.to_string()).unwrap();
    format!("fx/{name}")
}

#[test]
fn explore_reports_exact_linear_driver() {
    let ws = workspace();
    let dwelling = std::fs::read_to_string(ws.path().join("fx/dwelling.csv")).unwrap();
    let mut linear = String::from("date,value\n");
    for line in dwelling.lines().skip(1) {
        let (date, value) = line.split_once(',').unwrap();
        let v: f64 = value.parse().unwrap();
        linear.push_str(&format!("{date},{}\n", 0.5 * v - 40.0));
    }
    std::fs::write(ws.path().join("fx/linear.csv"), linear).unwrap();
    let config = write_config(
        ws.path(),
        "explore.json",
        serde_json::json!({
            "inputs": {
                "dwelling": {"path": "dwelling.csv"},
                "drivers": {"linear": {"path": "linear.csv"}, "migration": {"path": "migration.csv"}}
            }
        }),
    );
    let out = housing(ws.path(), &["--config", &config, "--out", "o", "explore"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = json(ws.path().join("o/explore.json"));
    let screens = report["screens"].as_array().unwrap();
    let linear = screens.iter().find(|s| s["driver"] == "linear").unwrap();
    for side in ["pre", "post"] {
        let p = linear[side]["regression"]["p_value"].as_f64().unwrap();
        assert!(p < 1e-9, "{side}: p = {p}");
    }
}

#[test]
fn explore_input_errors_exit_2() {
    let ws = workspace();
    let missing = write_config(
        ws.path(),
        "missing.json",
        serde_json::json!({"inputs": {"dwelling": {"path": "nope.csv"}, "drivers": {"m": {"path": "migration.csv"}}}}),
    );
    let out = housing(ws.path(), &["--config", &missing, "--out", "o", "explore"]);
    assert_eq!(code(&out), 2);

    std::fs::write(
        ws.path().join("fx/late.csv"),
        "date,value\n2040-03-31,1\n2040-06-30,2\n2040-09-30,4\n",
    )
    .unwrap();
    let disjoint = write_config(
        ws.path(),
        "disjoint.json",
        serde_json::json!({"inputs": {"dwelling": {"path": "dwelling.csv"}, "drivers": {"late": {"path": "late.csv"}}}}),
    );
    let out = housing(ws.path(), &["--config", &disjoint, "--out", "o", "explore"]);
    assert_eq!(code(&out), 2);
    assert!(
        stderr(&out).contains("no overlapping dates"),
        "{}",
        stderr(&out)
    );

    let out = housing(ws.path(), &["--out", "o", "explore"]);
    assert_eq!(code(&out), 2, "no config means no inputs");
}

#[test]
fn simulate_writes_every_step_and_a_unique_peak() {
    let ws = workspace();
    let out = housing(
        ws.path(),
        &["--config", "fx/config.json", "--out", "o", "simulate"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = std::fs::read_to_string(ws.path().join("o/trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,Y,S,D,alpha"));
    let times: Vec<f64> = lines
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    // 59 quarters at dt = 0.05, plus the initial row.
    assert_eq!(times.len(), 59 * 20 + 1);
    assert!(times
        .windows(2)
        .all(|w| ((w[1] - w[0]) - 0.05).abs() < 1e-9));
    let summary = json(ws.path().join("o/simulate_summary.json"));
    assert_eq!(summary["alpha"]["unique_peak"], true);
    assert!(summary["final_y"].as_f64().unwrap() > 0.0);
}

#[test]
fn simulate_error_codes() {
    let ws = workspace();
    let run = |args: &[&str]| {
        let mut full = vec!["--config", "fx/config.json", "--out", "o", "simulate"];
        full.extend_from_slice(args);
        code(&housing(ws.path(), &full))
    };
    assert_eq!(run(&["--t-end", "-1"]), 2, "t_end before start");
    assert_eq!(
        run(&["--t-end", "100"]),
        2,
        "rate path does not reach t_end"
    );
    assert_eq!(run(&["--dt", "0"]), 2);

    let explosive = write_config(
        ws.path(),
        "explosive.json",
        serde_json::json!({
            "inputs": {"rate": {"path": "rate_monthly.csv"}},
            "dynamics": {
                "params": {"k": 20, "C": 0.632, "r": 0.5, "K": 800, "c": 0.1, "a": 1, "b": 30},
                "initial": {"Y": 500, "S": 400, "D": 200}
            }
        }),
    );
    let out = housing(
        ws.path(),
        &["--config", &explosive, "--out", "o", "simulate"],
    );
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert!(stderr(&out).contains("blow-up at t"), "{}", stderr(&out));
}

#[test]
fn fit_gev_writes_one_model_per_window() {
    let ws = workspace();
    let out = housing(
        ws.path(),
        &["--config", "fx/config.json", "--out", "o", "fit-gev"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for label in ["pre2020", "post2020"] {
        let model = json(ws.path().join(format!("o/gev_{label}.json")));
        for key in ["ks_p", "ad_p"] {
            let p = model["diagnostics"][key].as_f64().unwrap();
            assert!((0.0..=1.0).contains(&p), "{label} {key} = {p}");
        }
        assert!(ws.path().join(format!("o/blocks_{label}.csv")).exists());
    }

    let out = housing(
        ws.path(),
        &[
            "--config",
            "fx/config.json",
            "--out",
            "o2",
            "fit-gev",
            "--window",
            "y2020,2020-01-01,2020-12-31",
        ],
    );
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("too few blocks"), "{}", stderr(&out));
}

#[test]
fn scenario_directions_and_offset() {
    let ws = workspace();
    let run = |model: &str, cpi: &str, extra: &[&str]| {
        let mut args = vec![
            "--out",
            "o",
            "scenario",
            "--model",
            model,
            "--baseline-rate",
            "6.0",
            "--baseline-cpi",
            cpi,
            "--d-rate",
            "1.0",
            "--d-cpi",
            "10.0",
        ];
        args.extend_from_slice(extra);
        housing(ws.path(), &args)
    };
    let post = run("post2020", "130", &["--offset"]);
    assert_eq!(code(&post), 0, "{}", stderr(&post));
    assert!(stdout(&post).contains("direction: rightward"));
    assert!(stdout(&post).contains("offsetting rate increase: 6.41657"));
    let result = json(ws.path().join("o/scenario.json"));
    assert_eq!(result["direction"], "rightward");
    assert!((result["d_mu"].as_f64().unwrap() - 1.576).abs() < 1e-3);
    let density = std::fs::read_to_string(ws.path().join("o/scenario_density.csv")).unwrap();
    assert!(density.starts_with("x,baseline,shifted\n"));

    let pre = run("pre2020", "100", &[]);
    assert_eq!(code(&pre), 0, "{}", stderr(&pre));
    assert!(stdout(&pre).contains("direction: leftward"));

    assert_eq!(
        code(&run("pre2020", "130", &[])),
        2,
        "negative scale at CPI 130"
    );
    let out = housing(
        ws.path(),
        &[
            "--out",
            "o",
            "scenario",
            "--model",
            "post2020",
            "--baseline-cpi",
            "130",
        ],
    );
    assert_eq!(code(&out), 2, "baseline rate is required");
}

#[test]
fn scenario_reads_fitted_model() {
    let ws = workspace();
    let fit = housing(
        ws.path(),
        &["--config", "fx/config.json", "--out", "o", "fit-gev"],
    );
    assert_eq!(code(&fit), 0);
    let out = housing(
        ws.path(),
        &[
            "--out",
            "s",
            "scenario",
            "--model",
            "o/gev_post2020.json",
            "--baseline-rate",
            "6",
            "--baseline-cpi",
            "130",
            "--d-cpi",
            "10",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(
        json(ws.path().join("s/scenario.json"))["d_mu"]
            .as_f64()
            .unwrap()
            > 0.0
    );
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn every_command_is_byte_identical_across_reruns() {
    let ws = workspace();
    let commands: [&[&str]; 5] = [
        &["explore"],
        &["simulate"],
        &["fit-logistic"],
        &["fit-ode"],
        &["fit-gev"],
    ];
    for out_dir in ["run1", "run2"] {
        for cmd in commands {
            let mut args = vec![
                "--config",
                "fx/config.json",
                "--out",
                out_dir,
                "--seed",
                "42",
            ];
            args.extend_from_slice(cmd);
            let out = housing(ws.path(), &args);
            assert_eq!(code(&out), 0, "{cmd:?}: {}", stderr(&out));
        }
        let out = housing(
            ws.path(),
            &[
                "--out",
                out_dir,
                "scenario",
                "--model",
                "post2020",
                "--baseline-rate",
                "6",
                "--baseline-cpi",
                "130",
                "--d-rate",
                "1",
                "--d-cpi",
                "10",
                "--offset",
            ],
        );
        assert_eq!(code(&out), 0);
    }
    let a = snapshot(&ws.path().join("run1"));
    let b = snapshot(&ws.path().join("run2"));
    assert_eq!(a.len(), 11);
    assert_eq!(a, b);

    let again = tempfile::tempdir().unwrap();
    assert_eq!(code(&housing(again.path(), &["gen-fixtures", "fx"])), 0);
    let fresh = snapshot(&again.path().join("fx"));
    assert_eq!(fresh.len(), 7);
    assert_eq!(fresh, snapshot(&ws.path().join("fx")));
}

#[test]
fn config_errors_exit_2() {
    let ws = workspace();
    std::fs::write(ws.path().join("bad.json"), "{\"no_such_key\": 1}").unwrap();
    assert_eq!(
        code(&housing(ws.path(), &["--config", "bad.json", "simulate"])),
        2
    );
    assert_eq!(
        code(&housing(
            ws.path(),
            &["--config", "absent.json", "simulate"]
        )),
        2
    );
    assert_eq!(
        code(&housing(
            ws.path(),
            &["--cut-date", "not-a-date", "explore"]
        )),
        2
    );
}
