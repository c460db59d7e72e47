use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn model(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../models")
        .join(name)
        .display()
        .to_string()
}

fn qconc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qconc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn csv_rows(out: &Output) -> Vec<csv::StringRecord> {
    csv::Reader::from_reader(out.stdout.as_slice())
        .records()
        .map(|r| r.unwrap())
        .collect()
}

fn header(out: &Output) -> Vec<String> {
    let mut rd = csv::Reader::from_reader(out.stdout.as_slice());
    rd.headers().unwrap().iter().map(String::from).collect()
}

fn column(out: &Output, name: &str) -> Vec<String> {
    let i = header(out)
        .iter()
        .position(|h| h == name)
        .expect("column present");
    csv_rows(out).iter().map(|r| r[i].to_string()).collect()
}

#[test]
fn bernstein_grid_on_ring_decreases_in_n() {
    let out = qconc(&[
        "bound",
        "--model",
        &model("ring.json"),
        "--flavor",
        "bernstein",
        "--n",
        "100,1000,10000",
        "--gamma",
        "0.05,0.1,0.2",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(
        header(&out),
        [
            "flavor",
            "parameter",
            "horizon",
            "gamma",
            "bound",
            "exponent",
            "prefactor",
            "valid",
            "two_sided",
            "b",
            "c",
            "epsilon",
            "n_rho",
            "g",
            "m",
            "alpha",
            "reason"
        ]
    );
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 9);
    for g in ["0.05", "0.1", "0.2"] {
        let bounds: Vec<f64> = rows
            .iter()
            .filter(|r| &r[3] == g)
            .map(|r| r[4].parse().unwrap())
            .collect();
        assert_eq!(bounds.len(), 3);
        assert!(bounds.windows(2).all(|w| w[1] < w[0]), "{bounds:?}");
    }
}

#[test]
fn hoeffding_out_of_regime_warns_and_succeeds() {
    let out = qconc(&[
        "bound",
        "--model",
        &model("ring.json"),
        "--flavor",
        "hoeffding",
        "--n",
        "4,8",
        "--gamma",
        "0.1",
    ]);
    assert_eq!(code(&out), 0);
    assert!(column(&out, "valid").iter().all(|v| v == "false"));
    assert!(stderr(&out).contains("warning"));
}

#[test]
fn counting_rows_echo_constants() {
    let out = qconc(&[
        "bound",
        "--model",
        &model("driven_qubit.json"),
        "--t",
        "50,100",
        "--gamma",
        "0.1",
        "--format",
        "structured",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    let rows = doc["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    for r in rows {
        assert_eq!(r["flavor"], "counting");
        assert!((r["m"].as_f64().unwrap() - 2.0 / 9.0).abs() < 1e-9);
        for k in ["epsilon", "alpha", "b"] {
            assert!(r[k].as_f64().unwrap() > 0.0, "{k}");
        }
    }
    let names: Vec<&str> = doc["constants"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert!(names.contains(&"epsilon"));
}

#[test]
fn every_flavor_runs_on_its_model() {
    let cases = [
        (
            "ring_schedule.json",
            "tdm-bernstein,tdm-hoeffding",
            "--n",
            "1000",
        ),
        ("ring_pair.json", "multitime", "--n", "1000"),
        ("two_block.json", "reducible", "--n", "1000"),
        ("ring_family.json", "ci", "--n", "1000"),
        ("two_state.json", "flux", "--n", "200"),
        ("poisson.json", "counting", "--t", "100"),
    ];
    for (file, flavor, axis, h) in cases {
        let out = qconc(&[
            "bound",
            "--model",
            &model(file),
            "--flavor",
            flavor,
            axis,
            h,
            "--gamma",
            "0.2",
        ]);
        assert_eq!(code(&out), 0, "{file}: {}", stderr(&out));
        assert!(!csv_rows(&out).is_empty(), "{file}");
    }
}

#[test]
fn wrong_flavor_is_a_usage_error() {
    let out = qconc(&[
        "bound",
        "--model",
        &model("ring.json"),
        "--flavor",
        "counting",
        "--n",
        "10",
        "--gamma",
        "0.1",
    ]);
    assert_eq!(code(&out), 1);
    let out = qconc(&["bound", "--model", &model("ring.json"), "--n", "10"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn malformed_matrix_reports_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    let mut doc: Value =
        serde_json::from_str(&std::fs::read_to_string(model("ring.json")).unwrap()).unwrap();
    doc["kraus"][1]["matrix"][0][1] = Value::String("x".into());
    std::fs::write(&path, doc.to_string()).unwrap();
    let out = qconc(&[
        "bound",
        "--model",
        path.to_str().unwrap(),
        "--n",
        "10",
        "--gamma",
        "0.1",
    ]);
    assert_eq!(code(&out), 2);
    assert!(
        stderr(&out).contains("kraus[1].matrix[0][1]"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn non_trace_preserving_kraus_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("leaky.json");
    let mut doc: Value =
        serde_json::from_str(&std::fs::read_to_string(model("two_unitary.json")).unwrap()).unwrap();
    doc["kraus"][1]["matrix"][0][1] = serde_json::json!(0.5);
    std::fs::write(&path, doc.to_string()).unwrap();
    let out = qconc(&[
        "bound",
        "--model",
        path.to_str().unwrap(),
        "--n",
        "10",
        "--gamma",
        "0.1",
    ]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn simulate_rejects_zero_trials() {
    let out = qconc(&[
        "simulate",
        "--model",
        &model("ring.json"),
        "--n",
        "10",
        "--gamma",
        "0.1",
        "--trials",
        "0",
    ]);
    assert_eq!(code(&out), 1);
}

#[test]
fn simulate_is_reproducible_and_seed_sensitive() {
    let run = |seed: &str| {
        qconc(&[
            "simulate",
            "--model",
            &model("ring.json"),
            "--n",
            "50",
            "--gamma",
            "0.1",
            "--trials",
            "500",
            "--seed",
            seed,
        ])
    };
    let (a, b, c) = (run("4"), run("4"), run("5"));
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn simulated_click_rate_matches_intensity() {
    let out = qconc(&[
        "simulate",
        "--model",
        &model("driven_qubit.json"),
        "--t",
        "100",
        "--gamma",
        "0.1",
        "--trials",
        "2000",
        "--seed",
        "9",
        "--format",
        "structured",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    let s = &doc["summary"]["counting"][0];
    let z = s["z"].as_f64().unwrap();
    assert!(z.abs() < 4.0, "z = {z}");
}

#[test]
fn simulate_dumps_one_record_per_line() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("traj.jsonl");
    let out = qconc(&[
        "simulate",
        "--model",
        &model("ring.json"),
        "--n",
        "20",
        "--gamma",
        "0.1",
        "--trials",
        "10",
        "--dump",
        dump.to_str().unwrap(),
        "--dump-limit",
        "3",
    ]);
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(&dump).unwrap();
    let lines: Vec<Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 3);
    for (k, l) in lines.iter().enumerate() {
        assert_eq!(l["stream"], k as u64);
        assert_eq!(l["outcomes"].as_array().unwrap().len(), 20);
    }
}

#[test]
fn verify_passes_on_small_ring_grid() {
    let out = qconc(&[
        "verify",
        "--model",
        &model("ring.json"),
        "--flavor",
        "bernstein,hoeffding",
        "--n",
        "4,8,14",
        "--gamma",
        "0.1,0.5,0.9",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let verdicts = column(&out, "verdict");
    assert!(verdicts.iter().all(|v| v == "pass" || v == "skipped"));
    assert!(verdicts.iter().filter(|v| *v == "pass").count() >= 9);
    assert!(column(&out, "method")
        .iter()
        .all(|m| m == "dp" || m == "none"));
}

#[test]
fn corrupted_gap_is_caught() {
    let out = qconc(&[
        "verify",
        "--model",
        &model("two_unitary.json"),
        "--flavor",
        "bernstein",
        "--n",
        "16",
        "--gamma",
        "0.1,0.3",
        "--epsilon",
        "100",
    ]);
    assert_eq!(code(&out), 6);
    assert!(column(&out, "verdict").iter().any(|v| v == "fail"));
}

#[test]
fn counting_verify_needs_monte_carlo() {
    let base = [
        "verify",
        "--model",
        &model("driven_qubit.json"),
        "--t",
        "20",
        "--gamma",
        "0.1",
    ];
    let out = qconc(&base);
    assert_eq!(code(&out), 5);
    let mut args = base.to_vec();
    args.extend(["--trials", "1000", "--seed", "2"]);
    let out = qconc(&args);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(column(&out, "method"), ["mc"]);
    assert_eq!(column(&out, "verdict"), ["pass"]);
}

#[test]
fn analyze_emits_one_document() {
    for file in [
        "ring.json",
        "driven_qubit.json",
        "two_state.json",
        "two_block.json",
    ] {
        let out = qconc(&["analyze", "--model", &model(file)]);
        assert_eq!(code(&out), 0, "{file}: {}", stderr(&out));
        let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(doc["command"], "analyze");
        assert!(doc["summary"].is_object());
    }
}

#[test]
fn report_goes_to_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    let out = qconc(&[
        "bound",
        "--model",
        &model("ring.json"),
        "--n",
        "100",
        "--gamma",
        "0.1",
        "--output",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
    assert!(std::fs::read_to_string(&path)
        .unwrap()
        .starts_with("flavor,"));
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&qconc(&["--help"])), 0);
    assert_eq!(code(&qconc(&["--version"])), 0);
    assert_eq!(code(&qconc(&["frobnicate"])), 1);
}
