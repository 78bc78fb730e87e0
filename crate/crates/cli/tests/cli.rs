use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use tempfile::TempDir;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data").join(name)
}

fn dhpe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dhpe"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn generate(dir: &TempDir, name: &str, resistances: &Path, count: &str, epsilon: &str, seed: &str) -> PathBuf {
    let out = dir.path().join(name);
    let o = dhpe(&[
        "generate",
        "--network",
        s(&data("fig2_network.json")),
        "--resistances",
        s(resistances),
        "--count",
        count,
        "--epsilon",
        epsilon,
        "--seed",
        seed,
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

fn symmetric_resistances(dir: &TempDir) -> (PathBuf, Vec<f64>) {
    let supply = vec![0.0071, 0.00028, 0.0767, 0.54, 0.57, 0.031, 0.39, 0.7, 2.067, 0.39, 0.64];
    let valves = vec![0.1, 0.3, 0.2, 0.1, 0.4, 0.1];
    let path = dir.path().join("sym.json");
    let json = serde_json::json!({ "supply": supply, "valves": valves });
    std::fs::write(&path, json.to_string()).unwrap();
    (path, supply.into_iter().chain(valves).collect())
}

#[test]
fn validate_exit_codes() {
    assert_eq!(dhpe(&["validate", s(&data("fig1_network.json"))]).status.code(), Some(0));
    assert_eq!(dhpe(&["validate", s(&data("fig2_network.json"))]).status.code(), Some(0));

    let dir = TempDir::new().unwrap();
    let text = std::fs::read_to_string(data("fig1_network.json")).unwrap();
    let truncated = dir.path().join("truncated.json");
    std::fs::write(&truncated, &text[..text.len() / 2]).unwrap();
    let o = dhpe(&["validate", s(&truncated)]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    // Node 5 becomes a second parent of node 1: 1 -> 4 -> 5 -> 1 closes a loop.
    let mut net: serde_json::Value = serde_json::from_str(&text).unwrap();
    net["supply_edges"].as_array_mut().unwrap().push(serde_json::json!([5, 4]));
    let cyclic = dir.path().join("cyclic.json");
    std::fs::write(&cyclic, net.to_string()).unwrap();
    let o = dhpe(&["validate", s(&cyclic)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("not a tree"), "{}", stdout(&o));
}

#[test]
fn generate_writes_requested_rows() {
    let dir = TempDir::new().unwrap();
    let csv = generate(&dir, "c.csv", &data("fig2_resistances.json"), "4", "0", "3");
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5);
    assert_eq!(
        lines[0],
        "t,p_alpha,p_beta,u_1,u_2,u_3,u_4,u_5,u_6,qb_1,qb_2,qb_3,qb_4,qb_5,qb_6"
    );
    for row in &lines[1..] {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 15);
        // at least 12 significant digits in every measured value
        for f in &fields[1..] {
            let mantissa = f.split('e').next().unwrap();
            let digits = mantissa.chars().filter(char::is_ascii_digit).count();
            assert!(digits >= 12, "{f}");
        }
    }
}

#[test]
fn generate_rejects_zero_count() {
    let dir = TempDir::new().unwrap();
    let o = dhpe(&[
        "generate",
        "--network",
        s(&data("fig2_network.json")),
        "--resistances",
        s(&data("fig2_resistances.json")),
        "--count",
        "0",
        "--out",
        s(&dir.path().join("x.csv")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("x.csv").exists());
}

#[test]
fn generate_is_byte_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = generate(&dir, "a.csv", &data("fig2_resistances.json"), "7", "0.01", "11");
    let b = generate(&dir, "b.csv", &data("fig2_resistances.json"), "7", "0.01", "11");
    let c = generate(&dir, "c.csv", &data("fig2_resistances.json"), "7", "0.01", "12");
    let a = std::fs::read(a).unwrap();
    assert_eq!(a, std::fs::read(b).unwrap());
    assert_ne!(a, std::fs::read(c).unwrap());
}

#[test]
fn generate_estimate_round_trip_symmetric() {
    let dir = TempDir::new().unwrap();
    let (res, truth) = symmetric_resistances(&dir);
    let csv = generate(&dir, "c.csv", &res, "4", "0", "5");
    let out = dir.path().join("r.json");
    let o = dhpe(&[
        "estimate",
        "--network",
        s(&data("fig2_network.json")),
        "--conditions",
        s(&csv),
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["rank"], 17);
    let s_hat: Vec<f64> = serde_json::from_value(report["s_hat"].clone()).unwrap();
    for (e, t) in s_hat.iter().zip(&truth) {
        assert!(((e - t) / t).abs() <= 1e-6, "{e} vs {t}");
    }
}

#[test]
fn estimate_prints_reference_table() {
    let dir = TempDir::new().unwrap();
    let csv = generate(&dir, "c.csv", &data("fig2_resistances.json"), "4", "0", "0");
    let o = dhpe(&[
        "estimate",
        "--network",
        s(&data("fig2_network.json")),
        "--conditions",
        s(&csv),
        "--truth",
        s(&data("fig2_resistances.json")),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = stdout(&o);
    let row = |name: &str| -> Vec<f64> {
        let line = table
            .lines()
            .find(|l| l.split_whitespace().take(2).collect::<Vec<_>>().join(" ") == name)
            .unwrap_or_else(|| panic!("{name} missing from\n{table}"));
        line.split_whitespace().skip(2).map(|x| x.parse().unwrap()).collect()
    };
    assert_eq!(row("valve 5"), vec![0.4, 0.4]);
    assert_eq!(row("pipe 11"), vec![0.57, 0.57]);
    // asymmetric pairs come out as the average
    assert_eq!(row("pipe 9")[1], 0.06785);
    assert_eq!(row("pipe 15")[1], 1.8285);
}

#[test]
fn estimate_rejects_wrong_valve_count() {
    let dir = TempDir::new().unwrap();
    let csv = generate(&dir, "c.csv", &data("fig2_resistances.json"), "4", "0", "0");
    let o = dhpe(&[
        "estimate",
        "--network",
        s(&data("fig1_network.json")),
        "--conditions",
        s(&csv),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("dimension"), "{}", stderr(&o));
}

#[test]
fn estimate_rejects_empty_csv() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("empty.csv");
    std::fs::write(&csv, "t,p_alpha,p_beta,u_1,u_2,u_3,qb_1,qb_2,qb_3\n").unwrap();
    let o = dhpe(&[
        "estimate",
        "--network",
        s(&data("fig1_network.json")),
        "--conditions",
        s(&csv),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn single_condition_warns_and_succeeds() {
    let dir = TempDir::new().unwrap();
    let csv = generate(&dir, "c.csv", &data("fig2_resistances.json"), "1", "0", "0");
    let o = dhpe(&[
        "estimate",
        "--network",
        s(&data("fig2_network.json")),
        "--conditions",
        s(&csv),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let err = stderr(&o);
    assert!(err.contains("warning"), "{err}");
    assert!(err.contains("[pipe"), "{err}");

    let o = dhpe(&[
        "identifiability",
        "--network",
        s(&data("fig2_network.json")),
        "--conditions",
        s(&csv),
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("rank 6/17"), "{}", stdout(&o));
}

#[test]
fn report_reprints_saved_result() {
    let dir = TempDir::new().unwrap();
    let csv = generate(&dir, "c.csv", &data("fig2_resistances.json"), "6", "0.01", "2");
    let out = dir.path().join("r.json");
    let o = dhpe(&[
        "estimate",
        "--network",
        s(&data("fig2_network.json")),
        "--conditions",
        s(&csv),
        "--out",
        s(&out),
    ]);
    assert!(o.status.success());
    let r = dhpe(&["report", s(&out)]);
    assert!(r.status.success());
    assert_eq!(stdout(&o), stdout(&r));
}

#[test]
fn simulate_reports_feasible_state() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("state.json");
    let o = dhpe(&[
        "simulate",
        "--network",
        s(&data("fig2_network.json")),
        "--resistances",
        s(&data("fig2_resistances.json")),
        "--flows",
        "150,150,150,150,150,150",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let state: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let u: Vec<f64> = serde_json::from_value(state["valve_settings"].clone()).unwrap();
    assert!(u.iter().all(|&x| x > 0.0 && x <= 1.0));
    // At the minimum feasible pressure some valve is fully open.
    assert!(u.iter().any(|&x| (x - 1.0).abs() < 1e-9));
    let q: Vec<f64> = serde_json::from_value(state["supply_flows"].clone()).unwrap();
    assert!((q[0] - 900.0).abs() < 1e-9);

    let low = dhpe(&[
        "simulate",
        "--network",
        s(&data("fig2_network.json")),
        "--resistances",
        s(&data("fig2_resistances.json")),
        "--flows",
        "150,150,150,150,150,150",
        "--dp",
        "1",
    ]);
    assert_eq!(low.status.code(), Some(1));
}

#[test]
fn montecarlo_smoke_config() {
    let dir = TempDir::new().unwrap();
    let t0 = Instant::now();
    let o = dhpe(&["montecarlo", "--config", s(&data("smoke_montecarlo.json")), "--out", s(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(t0.elapsed().as_secs_f64() < 1.0);
    for f in ["summary.csv", "boxplot.csv", "boxplot.svg", "interval_edge5.svg", "interval_edge11.svg"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert!(summary.starts_with("edge,T,q025,q250,q500,q750,q975\n"));
    let boxplot = std::fs::read_to_string(dir.path().join("boxplot.csv")).unwrap();
    assert!(boxplot.starts_with("edge,median,q1,q3,lo_whisker,hi_whisker,n_outliers\n"));
    assert_eq!(boxplot.lines().count(), 18);
}

#[test]
fn montecarlo_reduced_trials_narrow_with_more_conditions() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("cfg.json");
    let json = serde_json::json!({
        "condition_counts": [10, 25, 50, 100],
        "trials": 100,
        "epsilon": 0.01,
        "seed": 2022,
        "network": s(&data("fig2_network.json")),
        "resistances": s(&data("fig2_resistances.json")),
    });
    std::fs::write(&cfg, json.to_string()).unwrap();
    let out = dir.path().join("mc");
    let o = dhpe(&["montecarlo", "--config", s(&cfg), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));

    let text = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    for edge in ["5", "11"] {
        let widths: Vec<f64> = text
            .lines()
            .skip(1)
            .map(|l| l.split(',').collect::<Vec<_>>())
            .filter(|f| f[0] == edge)
            .map(|f| f[6].parse::<f64>().unwrap() - f[2].parse::<f64>().unwrap())
            .collect();
        assert_eq!(widths.len(), 4);
        assert!(widths.windows(2).all(|w| w[1] < w[0]), "edge {edge}: {widths:?}");
    }
}

#[test]
fn montecarlo_rejects_bad_config() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"condition_counts": [10], "trials": 0, "epsilon": 0.01, "seed": 1}"#).unwrap();
    let o = dhpe(&["montecarlo", "--config", s(&cfg), "--out", s(&dir.path().join("mc"))]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn inputs_are_not_modified() {
    let dir = TempDir::new().unwrap();
    let files = [data("fig2_network.json"), data("fig2_resistances.json")];
    let before: Vec<Vec<u8>> = files.iter().map(|f| std::fs::read(f).unwrap()).collect();
    let csv = generate(&dir, "c.csv", &files[1], "3", "0.01", "1");
    let csv_before = std::fs::read(&csv).unwrap();
    dhpe(&["estimate", "--network", s(&files[0]), "--conditions", s(&csv)]);
    dhpe(&["validate", s(&files[0])]);
    let after: Vec<Vec<u8>> = files.iter().map(|f| std::fs::read(f).unwrap()).collect();
    assert_eq!(before, after);
    assert_eq!(csv_before, std::fs::read(&csv).unwrap());
}
