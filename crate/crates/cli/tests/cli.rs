use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn goldssr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_goldssr"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = goldssr(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn records(csv_text: &str) -> Vec<HashMap<String, String>> {
    let mut r = csv::Reader::from_reader(csv_text.as_bytes());
    let header: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    r.records()
        .map(|rec| {
            header
                .iter()
                .cloned()
                .zip(rec.unwrap().iter().map(String::from))
                .collect()
        })
        .collect()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn power_echoes_inputs_and_matches_json() {
    let text = ok(&["power", "--n", "525"]);
    let fields: HashMap<&str, &str> = text
        .lines()
        .filter_map(|l| l.split_once(char::is_whitespace))
        .map(|(k, v)| (k, v.trim()))
        .collect();
    assert_eq!(fields["n"], "525");
    assert_eq!(fields["alloc"], "1:1:1");
    assert_eq!(fields["delta_er"], "0.3");
    let p: f64 = fields["power"].parse().unwrap();
    assert!(p >= 0.80);
    assert_eq!(fields["power"].split('.').nth(1).unwrap().len(), 6);

    let json: serde_json::Value = serde_json::from_str(&ok(&["power", "--n", "525", "--json"])).unwrap();
    assert_eq!(json["power"].as_f64().unwrap(), p);
    assert_eq!(json["n"], 525);
    assert_eq!(json["mu_p"].as_f64().unwrap(), 0.6);
}

#[test]
fn missing_required_flag_is_a_usage_error() {
    let out = goldssr(&["power"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("--n") && err.contains("Usage"), "{err}");
    assert_eq!(goldssr(&["simulate"]).status.code(), Some(2));
    assert_eq!(goldssr(&["reproduce", "fig9"]).status.code(), Some(2));
}

#[test]
fn invalid_design_fails_without_usage_error() {
    let out = goldssr(&["samplesize", "--mu-p", "-0.1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn reproduce_fixed_design_sizes() {
    let rows = records(&ok(&["reproduce", "table4"]));
    let n: Vec<(String, String, i64)> = rows
        .iter()
        .map(|r| (r["mu_P"].clone(), r["alloc"].clone(), r["n"].parse().unwrap()))
        .collect();
    assert_eq!(n[0], ("0.6".into(), "1:1:1".into(), 525));
    assert_eq!((&n[1].0[..], &n[1].1[..]), ("0.6", "3:2:1"));
    assert!((n[1].2 - 452).abs() <= 6);
    assert_eq!(n[2], ("0.9".into(), "1:1:1".into(), 525));
    assert_eq!((&n[3].0[..], &n[3].1[..]), ("0.9", "3:2:1"));
    assert!((n[3].2 - 438).abs() <= 6);
    for r in &rows {
        assert!(r["power"].parse::<f64>().unwrap() >= 0.8);
    }
}

#[test]
fn reproduce_power_curves_smoke_ordering() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    ok(&["reproduce", "fig2", "--smoke", "--out", out]);
    let rows = records(&fs::read_to_string(dir.path().join("fig2.csv")).unwrap());
    assert_eq!(rows.len(), 4 * 4 * 13);
    let mut by_point: HashMap<(String, String, u64), HashMap<String, f64>> = HashMap::new();
    for r in &rows {
        assert_eq!(r["reps"], "2000");
        let n1: u64 = r["n1"].parse().unwrap();
        by_point
            .entry((r["mu_P"].clone(), r["alloc"].clone(), n1))
            .or_default()
            .insert(r["method"].clone(), r["power_global"].parse().unwrap());
    }
    for ((mu, alloc, n1), p) in by_point.iter().filter(|(k, _)| k.2 <= 150) {
        assert!(p["OS"] > p["XG"] && p["OS"] > p["POOLED"], "{mu} {alloc} {n1}: {p:?}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "reproduce fig2");
    assert_eq!(manifest["reps"], 2000);
    assert_eq!(manifest["scenarios"].as_array().unwrap().len(), rows.len());
}

#[test]
fn empty_grid_gives_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "empty.toml", "[grid]\nn1 = []\n");
    let out = goldssr(&["simulate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("scenario_id,method,mu_P,alloc,n1,zeta,reps,seed,power_global,mc_err,t1e_target,"));
}

#[test]
fn malformed_config_names_line_and_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "[design]\nmu_p = 0.9\nsigmaa = 1.0\n");
    let out = goldssr(&["samplesize", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3") && err.contains("sigmaa"), "{err}");

    let cfg = write(dir.path(), "type.toml", "[simulation]\nreps = \"many\"\n");
    let err = String::from_utf8_lossy(&goldssr(&["simulate", "--config", &cfg]).stderr).to_string();
    assert!(err.contains("line 2") && err.contains("reps"), "{err}");

    let cfg = write(dir.path(), "section.toml", "[plot]\nwidth = 3\n");
    let err = String::from_utf8_lossy(&goldssr(&["simulate", "--config", &cfg]).stderr).to_string();
    assert!(err.contains("line 1") && err.contains("plot"), "{err}");
}

const SMALL: &str = r#"
[design]
mu_p = 0.9
alloc = "3:2:1"

[simulation]
kind = "t1e"
reps = 300
seed = 7
nulls = ["ER", "EP", "RP"]

[grid]
method = ["OS", "XG"]
n1 = [30, 60]
"#;

#[test]
fn type1_config_rows_and_rerun_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let rows = records(&ok(&["simulate", "--config", &cfg]));
    // Two boundaries x two methods x two pilots; the EP boundary yields EP and RP rows.
    assert_eq!(rows.len(), 2 * 2 * 3);
    let targets: Vec<&str> = rows.iter().map(|r| r["t1e_target"].as_str()).collect();
    assert_eq!(targets.iter().filter(|t| **t == "ER").count(), 4);
    assert_eq!(targets.iter().filter(|t| **t == "RP").count(), 4);

    for r in rows.iter().step_by(5) {
        let again = records(&ok(&[
            "simulate",
            "--scenario",
            &r["scenario_id"],
            "--seed",
            &r["seed"],
            "--reps",
            &r["reps"],
        ]));
        let same = again.iter().find(|a| a["t1e_target"] == r["t1e_target"]).unwrap();
        assert_eq!(same, r);
    }
}

#[test]
fn output_independent_of_workers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let a = ok(&["simulate", "--config", &cfg, "--workers", "1", "--reps", "500"]);
    let b = ok(&["simulate", "--config", &cfg, "--workers", "3", "--reps", "500"]);
    assert_eq!(a, b);
    let c = ok(&[
        "simulate",
        "--config",
        &cfg,
        "--workers",
        "1",
        "--reps",
        "500",
        "--seed",
        "8",
    ]);
    assert_ne!(a, c);
}

#[test]
fn manifest_records_seed_and_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let out = dir.path().join("run");
    ok(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap(), "--smoke"]);
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 7);
    assert_eq!(m["reps"], 2000);
    let ids: Vec<&str> = m["scenarios"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert_eq!(ids.len(), 8);
    let rows = records(&fs::read_to_string(out.join("simulate.csv")).unwrap());
    for r in rows {
        assert!(ids.contains(&r["scenario_id"].as_str()));
        assert_eq!(r["seed"], "7");
    }
}

#[test]
fn fixed_and_inflated_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "fixed.toml",
        "[simulation]\nkind = \"fixed\"\nreps = 200\n[grid]\nmu_p = [0.6, 0.9]\n",
    );
    let rows = records(&ok(&["simulate", "--config", &cfg]));
    assert_eq!(rows.len(), 2);
    assert!(rows
        .iter()
        .all(|r| r["method"] == "FIXED" && r["n1"].is_empty() && r["n_final_median"] == "525.0"));

    let cfg = write(
        dir.path(),
        "inflated.toml",
        "[simulation]\nreps = 200\nzeta = \"optimal\"\n[grid]\nn1 = [30]\n",
    );
    let rows = records(&ok(&["simulate", "--config", &cfg]));
    let zeta: f64 = rows[0]["zeta"].parse().unwrap();
    assert!(zeta > 1.1 && zeta < 1.4, "{zeta}");

    let cfg = write(dir.path(), "bad_zeta.toml", "[simulation]\nzeta = \"large\"\n");
    let err = String::from_utf8_lossy(&goldssr(&["simulate", "--config", &cfg]).stderr).to_string();
    assert!(err.contains("zeta"), "{err}");
}

#[test]
fn samplesize_over_a_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "grid.toml", "[grid]\nsigma = [0.5, 1.0, 2.0]\n");
    let rows = records(&ok(&["samplesize", "--config", &cfg]));
    let n: Vec<u64> = rows.iter().map(|r| r["n"].parse().unwrap()).collect();
    assert_eq!(n[1], 525);
    assert!(n[0] < n[1] && n[1] < n[2]);
    // Under the normal critical value the size scales with σ², up to one block.
    assert!((n[2] as f64 - 4.0 * 525.0).abs() <= 12.0, "{n:?}");
}

#[test]
fn zeta_rows() {
    let rows = records(&ok(&["zeta", "--n1", "30,60,525"]));
    assert_eq!(rows.len(), 3);
    let z: Vec<&str> = rows.iter().map(|r| r["zeta"].as_str()).collect();
    let (z30, z60): (f64, f64) = (z[0].parse().unwrap(), z[1].parse().unwrap());
    assert!(z30 > z60 && z60 > 1.0);
    assert!(rows[0]["expected_power_zeta1"].parse::<f64>().unwrap() < 0.8);
    assert!(z[2].is_empty() && rows[2]["note"].contains("undefined"));
    assert_eq!(goldssr(&["zeta", "--n1", "31"]).status.code(), Some(0));
}

#[test]
fn estimate_on_a_data_file() {
    // Two blocks of E, R, P.
    let data = "# y arm block\n1.0 E 0\n2.0 R 0\n4.0 P 0\n\n2.0,E,1\n3.0,R,1\n7.0,P,1\n";
    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "pilot.txt", data);
    let rows = records(&ok(&["estimate", &file]));
    let est: HashMap<String, f64> = rows
        .iter()
        .map(|r| (r["method"].clone(), r["estimate"].parse().unwrap()))
        .collect();
    assert_eq!(rows.len(), 4);

    let y = [1.0, 2.0, 4.0, 2.0, 3.0, 7.0];
    let mean = y.iter().sum::<f64>() / 6.0;
    let os = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 5.0;
    // Within-group sums of squares: each pair differs by 1, 1 and 3.
    let pooled = (0.5 + 0.5 + 4.5) / 3.0;
    // Block sums 7 and 12.
    let xg = 12.5 / 3.0;
    for (m, want) in [("OS", os), ("POOLED", pooled), ("XG", xg)] {
        assert!((est[m] - want).abs() < 1e-6, "{m}: {} vs {want}", est[m]);
    }
    assert!(est["OSU"] < est["OS"]);

    let only = records(&ok(&["estimate", &file, "--method", "xg", "--method", "OS"]));
    assert_eq!(
        only.iter().map(|r| r["method"].as_str()).collect::<Vec<_>>(),
        ["XG", "OS"]
    );

    let bare = write(dir.path(), "bare.txt", "1\n2\n4\n");
    let rows = records(&ok(&["estimate", &bare]));
    assert_eq!(
        rows.iter().map(|r| r["method"].as_str()).collect::<Vec<_>>(),
        ["OS", "OSU"]
    );
    assert_eq!(goldssr(&["estimate", &bare, "--method", "XG"]).status.code(), Some(1));

    let ragged = write(dir.path(), "ragged.txt", "1 E\n2 R\n3\n");
    let err = String::from_utf8_lossy(&goldssr(&["estimate", &ragged]).stderr).to_string();
    assert!(err.contains("line 3"), "{err}");
    let bad = write(dir.path(), "bad.txt", "1 E\nx R\n");
    let err = String::from_utf8_lossy(&goldssr(&["estimate", &bad]).stderr).to_string();
    assert!(err.contains("line 2"), "{err}");
}
