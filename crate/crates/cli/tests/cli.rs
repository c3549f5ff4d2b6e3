use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_shapley-flow"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("shapley-flow-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("json on stdout")
}

#[test]
fn simulate_writes_requested_events() {
    let o = run(&["simulate", "--beta", "0.3", "--start", "random", "--events", "500", "--format", "csv"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(rdr.records().count(), 500);
}

#[test]
fn zero_sum_run_stops_at_equilibrium() {
    let o = run(&["simulate", "--beta", "0.618033988749", "--start", "random"]);
    assert!(o.status.success());
    let v = json(&o);
    assert_eq!(v["terminated_at_e"], true);
    assert!(v["final_distance_to_e"].as_f64().unwrap() < 1e-3);
}

#[test]
fn constrained_run_has_mixed_labels() {
    let d = scratch("constrained");
    let game = d.join("game.json");
    std::fs::write(&game, r#"{"family_beta": 0.7}"#).unwrap();
    let o = run(&["simulate", "--game", game.to_str().unwrap(), "--constrained-J", "--events", "12"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    let legs = v["trajectory"]["legs"].as_array().unwrap();
    assert_eq!(legs.len(), 12);
    for leg in legs {
        assert!(leg["targets"]["ia"].get("Mixed").is_some());
        assert!(leg["targets"]["ib"].get("Mixed").is_some());
    }
}

#[test]
fn integration_error_exits_with_two() {
    let d = scratch("coord");
    let game = d.join("coord.json");
    std::fs::write(&game, r#"{"A": [[1,0,0],[0,1,0],[0,0,1]], "B": [[1,0,0],[0,1,0],[0,0,1]]}"#).unwrap();
    let o = run(&["simulate", "--game", game.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn out_directory_gets_json_and_csv_and_is_reproducible() {
    let (a, b) = (scratch("repro-a"), scratch("repro-b"));
    for d in [&a, &b] {
        let o = run(&["simulate", "--beta", "0.4", "--seed", "9", "--events", "200", "--out", d.to_str().unwrap()]);
        assert!(o.status.success());
    }
    for f in ["trajectory.json", "trajectory.csv"] {
        let x = std::fs::read(a.join(f)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn corner_table_has_sixteen_entries() {
    let o = run(&["verify", "--only", "corner-tables", "--beta", "0.5", "--format", "csv"]);
    let text = stdout(&o);
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(rdr.headers().unwrap(), vec!["beta", "entry_id", "predicted", "measured", "rel_error"]);
    let rows: Vec<_> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 16);
    for r in &rows {
        let measured: f64 = r[3].parse().unwrap();
        assert!(measured > 0.0);
    }
}

#[test]
fn ratio_report_exit_code_matches_verdict() {
    let o = run(&["verify", "--only", "ratios"]);
    let v = json(&o);
    let claims = v["report"]["claims"].as_array().unwrap();
    assert_eq!(claims.len(), 6);
    let all = claims.iter().all(|c| c["holds"] == true);
    assert_eq!(v["passed"], all);
    assert_eq!(o.status.success(), all);
}

#[test]
fn fixed_points_over_a_range() {
    let o = run(&["jitter", "fixed-points", "--k", "50..60"]);
    assert!(o.status.success());
    let v = json(&o);
    let pts = v["points"].as_array().unwrap();
    assert_eq!(pts.len(), 11);
    for p in pts {
        assert!(p["residual"].as_f64().unwrap() <= 1e-9);
    }
}

#[test]
fn realize_round_trips() {
    let o = run(&["jitter", "realize", "--seq", "50,52,50,52"]);
    assert!(o.status.success());
    let v = json(&o);
    assert_eq!(v["verified"], true);
    assert_eq!(v["realization"]["realized"], serde_json::json!([50, 52, 50, 52]));
}

#[test]
fn period_three_orbit() {
    let o = run(&["jitter", "periodic", "--n", "3"]);
    assert!(o.status.success());
    let v = json(&o);
    assert_eq!(v["orbit"]["period"], 3);
    assert!(v["orbit"]["residual"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn unknown_criterion_is_rejected() {
    let o = run(&["verify", "--only", "no-such-check"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown criterion"));
}

#[test]
fn sweep_writes_one_file_per_point() {
    let d = scratch("sweep");
    let o = run(&["sweep", "--steps", "4", "--out", d.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(std::fs::read_dir(d.join("sweep")).unwrap().count(), 4);
    assert!(d.join("sweep.json").exists());
}
