use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rwre(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rwre"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn header(path: &Path) -> String {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string()
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn trivial_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = rwre(&["verify", "--suite", "trivial"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stdout).contains("overall: PASS"));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&rwre(&["simulate-walk", "--steps", "ten"], dir.path())), 1);
    assert_eq!(code(&rwre(&["simulate-walk"], dir.path())), 1);
    assert_eq!(code(&rwre(&["simulate-walk", "--env", "nope"], dir.path())), 1);
    assert_eq!(code(&rwre(&["no-such-command"], dir.path())), 1);
    assert_eq!(code(&rwre(&["--help"], dir.path())), 0);
}

#[test]
fn verdicts_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let pass = rwre(
        &[
            "simulate-walk",
            "--env",
            "constant:1",
            "--steps",
            "10,100,1000",
            "--tolerance",
            "1e-9",
        ],
        dir.path(),
    );
    assert_eq!(code(&pass), 0);
    // 1000 steps cannot reach the 8/9 limit to one part in a million.
    let fail = rwre(
        &[
            "simulate-walk",
            "--env",
            "iid-two-point:1,2,0.5",
            "--steps",
            "10,100,1000",
            "--tolerance",
            "1e-6",
        ],
        dir.path(),
    );
    assert_eq!(code(&fail), 2);
}

#[test]
fn walk_csv_columns() {
    let dir = tempfile::tempdir().unwrap();
    let o = rwre(
        &[
            "simulate-walk",
            "--env",
            "iid-two-point:1,2,0.5",
            "--steps",
            "10,100",
            "--out",
            "w",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    let w = dir.path().join("w");
    assert_eq!(
        header(&w.join("curve.csv")),
        "n,second_moment,second_moment_over_n,stderr,method"
    );
    assert_eq!(report(&w)["config"]["steps"], serde_json::json!([10, 100]));
}

#[test]
fn ctmc_and_diffusion_csv_columns() {
    let dir = tempfile::tempdir().unwrap();
    let o = rwre(
        &[
            "simulate-ctmc",
            "--env",
            "constant:1",
            "--horizons",
            "1,2",
            "--streams",
            "200",
            "--out",
            "c",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    assert_eq!(
        header(&dir.path().join("c/curve.csv")),
        "t,second_moment_over_t,stderr,events_per_t"
    );
    let o = rwre(
        &[
            "simulate-diffusion",
            "--env",
            "flow:2,0,1",
            "--horizons",
            "1",
            "--dt",
            "0.01",
            "--streams",
            "200",
            "--out",
            "d",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        header(&dir.path().join("d/curve.csv")),
        "t,second_moment_over_t,stderr,em_bias"
    );
}

#[test]
fn corrector_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o = rwre(
        &["corrector", "--env", "constant:1", "--range", "50", "--out", "f"],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    let table = fs::read_to_string(dir.path().join("f/table.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("m_or_x,f,f_over_msq"));
    assert!(table.lines().any(|l| l == "3,6,0.6666666666666666"));
    assert!(dir.path().join("f/residuals.csv").exists());
}

#[test]
fn estimate_limit_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let o = rwre(&["estimate-limit", "--env", "iid-two-point:1,2,0.5"], dir.path());
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["limit"].as_f64().unwrap() - 8.0 / 9.0).abs() < 1e-12);
    let o = rwre(&["estimate-limit", "--env", "iid-uniform:0,1"], dir.path());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["limit"].as_f64(), Some(0.0));
    assert_eq!(v["divergent"], serde_json::json!(true));
}

#[test]
fn config_file_with_flags_winning() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("run.json"),
        r#"{"env": "constant:1", "steps": [5, 7], "seed": 3}"#,
    )
    .unwrap();
    let o = rwre(
        &[
            "--config",
            "run.json",
            "simulate-walk",
            "--steps",
            "4",
            "--out",
            "w",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&dir.path().join("w"));
    assert_eq!(r["config"]["steps"], serde_json::json!([4]));
    assert_eq!(r["config"]["seed"], serde_json::json!(3));
    assert_eq!(r["config"]["env"], serde_json::json!("constant:1"));

    fs::write(dir.path().join("bad.json"), r#"{"stepz": [1]}"#).unwrap();
    assert_eq!(
        code(&rwre(&["--config", "bad.json", "simulate-walk"], dir.path())),
        1
    );
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let runs = [("1", "a"), ("4", "b"), ("4", "c")];
    for (threads, sub) in runs {
        let here = dir.path().join(sub);
        fs::create_dir(&here).unwrap();
        let args = [
            "--threads",
            threads,
            "simulate-walk",
            "--env",
            "iid-two-point:1,2,0.5",
            "--steps",
            "10,1000",
            "--exact-limit",
            "10",
            "--streams",
            "2000",
            "--seed",
            "5",
            "--out",
            "out",
        ];
        assert_eq!(code(&rwre(&args, &here)), 0);
    }
    for name in ["report.json", "curve.csv"] {
        let read = |sub: &str| fs::read(dir.path().join(sub).join("out").join(name)).unwrap();
        assert_eq!(read("a"), read("b"));
        assert_eq!(read("a"), read("c"));
    }
}
