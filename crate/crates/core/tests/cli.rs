mod common;

use common::{cli_ok, run_cli};
use terrastride::report::{load_run, AcceptanceSummary, Status};

fn s(p: &std::path::Path) -> String {
    p.display().to_string()
}

#[test]
fn usage_and_input_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = s(&dir.path().join("x"));
    for args in [
        vec!["terrain", "--mode", "volcano", "--out", &out],
        vec!["terrain", "--ct", "1.5", "--out", &out],
        vec!["trace", "--terrain-file", "/definitely/missing.json", "--out", &out],
        vec!["trace", "--out", &out],
        vec!["train-denoiser", "--episodes", "0", "--out", &out],
        vec!["report", "--metrics", "/definitely/missing", "--out", &out],
        vec!["no-such-subcommand"],
    ] {
        let o = run_cli(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn malformed_metrics_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("metrics.csv"), "epoch,loss\n1,2\n").unwrap();
    let o = run_cli(&["report", "--metrics", &s(dir.path()), "--out", &s(&dir.path().join("r"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn terrain_stats_and_zero_curriculum() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli_ok(&["terrain", "--mode", "stairs", "--ct", "1", "--seed", "2", "--out", &s(&dir.path().join("a"))]).unwrap();
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("distinct levels 11"), "{text}");
    let o = cli_ok(&["terrain", "--mode", "hills", "--ct", "0", "--seed", "2", "--out", &s(&dir.path().join("b"))]).unwrap();
    assert!(String::from_utf8_lossy(&o.stdout).contains("max 0.0000"));
    for f in ["terrain.pgm", "terrain.json", "spec.json", "manifest.json"] {
        assert!(dir.path().join("a").join(f).is_file(), "{f}");
    }
}

#[test]
fn config_file_sections_are_applied_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{ "terrain": { "mode": "edges", "size": 3.0, "seed": 4, "c_t": 0.5 } }"#).unwrap();
    let out = dir.path().join("t");
    cli_ok(&["--config", &s(&cfg), "terrain", "--ct", "1", "--out", &s(&out)]).unwrap();
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["config"]["mode"], "edges");
    assert_eq!(m["config"]["size"], 3.0);
    assert_eq!(m["config"]["c_t"], 1.0);
    assert_eq!(m["seed"], 4);
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn trace_on_flat_ground_with_zero_command() {
    let dir = tempfile::tempdir().unwrap();
    let field = dir.path().join("flat");
    cli_ok(&["terrain", "--mode", "flat", "--size", "6", "--seed", "0", "--out", &s(&field)]).unwrap();
    let out = dir.path().join("trace");
    cli_ok(&[
        "trace", "--terrain-file", &s(&field.join("terrain.pgm")), "--command", "0,0,0", "--steps", "90", "--seed", "1",
        "--out", &s(&out),
    ])
    .unwrap();
    let csv = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 90);
    let weights = [0.25, 0.25, 0.0, 0.0, 0.2, 0.2, 0.05, 0.05, 0.05, 0.05, 0.025, 0.025];
    for r in &rows {
        assert!((r[col("r_v_xy")] - 1.0).abs() < 1e-9);
        let c_r = r[col("c_r")];
        let mut total = 0.2 * c_r + (r[col("r_air")] + 0.1 * r[col("r_one")]) * (1.0 - c_r);
        for (k, w) in weights.iter().enumerate() {
            let w = if k < 2 { w * c_r } else { *w };
            total += w * r[1 + k];
        }
        assert!((total - r[col("total")]).abs() <= 1e-12);
    }
    let jsonl = std::fs::read_to_string(out.join("trace.jsonl")).unwrap();
    let first: serde_json::Value = serde_json::from_str(jsonl.lines().next().unwrap()).unwrap();
    assert_eq!(jsonl.lines().count(), 90);
    assert_eq!(first["clean"][0].as_array().unwrap().len(), terrastride::extero::SamplePattern::desk().len());
    assert!(first["noisy"][1].is_array() && first["reward"]["total"].is_number());
}

#[test]
fn training_subcommands_write_runs_the_report_can_read() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("d");
    let small = ["--episodes", "4", "--heldout", "2", "--epochs", "3", "--seed", "5", "--out"];
    let mut args = vec!["train-denoiser"];
    args.extend(small);
    let ds = s(&d);
    args.push(&ds);
    cli_ok(&args).unwrap();
    let run = load_run(&d).unwrap();
    assert_eq!(run.history.len(), 3);
    assert_eq!(run.summary.train_steps.offset, 1200);
    assert!(d.join("student.ckpt").is_file() && d.join("student.ckpt.json").is_file());

    let r = dir.path().join("r");
    let o = run_cli(&["report", "--metrics", &s(&d.join("metrics.csv")), "--out", &s(&r)]);
    assert_eq!(o.status.code(), Some(1));
    let summary: AcceptanceSummary = serde_json::from_str(&std::fs::read_to_string(r.join("summary.json")).unwrap()).unwrap();
    let ids: Vec<u8> = summary.criteria.iter().map(|c| c.id).collect();
    assert_eq!(ids, (1..=9).collect::<Vec<_>>());
    assert_eq!(summary.criteria[4].status, Status::Fail);
    assert!(r.join("loss.png").is_file() && r.join("gate.png").is_file());
}

#[test]
fn rerun_with_same_seed_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a", "b"] {
        let out = s(&dir.path().join(name));
        cli_ok(&["distill", "--episodes", "3", "--heldout", "1", "--epochs", "2", "--seed", "9", "--out", &out]).unwrap();
    }
    common::same_outputs(&dir.path().join("a"), &dir.path().join("b")).unwrap();
}

#[test]
fn deterministic_flag_pins_missing_seeds() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a", "b"] {
        cli_ok(&["--deterministic", "terrain", "--mode", "squares", "--size", "4", "--out", &s(&dir.path().join(name))]).unwrap();
    }
    common::same_outputs(&dir.path().join("a"), &dir.path().join("b")).unwrap();
}

#[test]
fn every_subcommand_reruns_bit_identically() {
    let dir = tempfile::tempdir().unwrap();
    common::determinism_suite(dir.path()).unwrap_or_else(|e| panic!("{e}"));
}
