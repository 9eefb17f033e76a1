//! End-to-end checks of the shipped binary: output files, manifest-based
//! reproduction, sweep aggregation, detector scoring, terrain generation,
//! and exit codes.

use std::fs;
use std::path::Path;
use std::process::Command;

use infoplan::stats::{mean, sample_std};
use infoplan::world::load_grid;

/// Overrides that keep a single run around a second.
const FAST_RUN: &[&str] = &[
    "--set",
    "world.rows=20",
    "--set",
    "world.cols=20",
    "--set",
    "world.peaks=4",
    "--set",
    "budget_samples=120",
    "--set",
    "pilot_samples=30",
    "--set",
    "init_opt_iters=40",
    "--set",
    "epoch_opt_iters=10",
    "--set",
    "search.iterations=150",
];

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_infoplan"))
}

fn run_ok(args: &[&str]) {
    let status = binary().args(args).status().expect("binary spawns");
    assert!(status.success(), "command failed: infoplan {}", args.join(" "));
}

fn exit_code(args: &[&str]) -> i32 {
    binary()
        .args(args)
        .output()
        .expect("binary spawns")
        .status
        .code()
        .expect("no signal")
}

#[test]
fn run_outputs_reproduce_from_manifest_echo() {
    let dir = tempfile::tempdir().expect("temp dir");
    let out_a = dir.path().join("a");
    let mut args = vec!["run", "--out", out_a.to_str().unwrap(), "--set", "seed=5"];
    args.extend_from_slice(FAST_RUN);
    run_ok(&args);

    // The manifest echoes the full effective config; rebuilding the run from
    // that echo alone must reproduce the results byte for byte.
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_a.join("manifest.json")).expect("manifest"))
            .expect("valid JSON");
    let echoed = manifest["config_toml"].as_str().expect("config echo");
    let config_path = dir.path().join("echo.toml");
    fs::write(&config_path, echoed).expect("write echo");

    let out_b = dir.path().join("b");
    run_ok(&[
        "run",
        "--config",
        config_path.to_str().unwrap(),
        "--out",
        out_b.to_str().unwrap(),
    ]);

    let a = fs::read(out_a.join("results.csv")).expect("results a");
    let b = fs::read(out_b.join("results.csv")).expect("results b");
    assert_eq!(a, b, "manifest-echo rerun changed results.csv");

    // Output files present and coherent.
    let results = String::from_utf8(a).expect("utf-8 CSV");
    let mut lines = results.lines();
    assert_eq!(
        lines.next(),
        Some("epoch,seed,mode,rho,samples,rmse,n_filtered,n_false_alarms,n_missed"),
        "results.csv header"
    );
    assert!(lines.next().is_some(), "results.csv has at least the pilot row");
    let trajectories = fs::read_to_string(out_a.join("trajectories.csv")).expect("trajectories");
    assert_eq!(
        trajectories.lines().next(),
        Some("epoch,step,x1,x2,heading"),
        "trajectories.csv header"
    );
    assert_eq!(manifest["seed"], 5, "manifest seed echo");
    assert!(manifest["final_rmse"].as_f64().expect("final rmse").is_finite());
}

/// Recompute the sweep summary from the per-run CSVs: per (mode, rho) group,
/// the sample grid is the union of every run's cumulative counts, each run
/// contributes its latest error at or before the grid point, and mean and
/// sample standard deviation are taken across contributing runs.
fn recompute_summary(sweep_dir: &Path) -> Vec<(String, f64, usize, usize, f64, f64)> {
    let mut rows = Vec::new();
    for mode in ["uct-none", "uct-copod"] {
        let rho = 0.1;
        let mut runs: Vec<Vec<(usize, f64)>> = Vec::new();
        for seed in 0..2 {
            let path = sweep_dir
                .join("runs")
                .join(mode)
                .join(format!("rho-{rho}"))
                .join(format!("seed-{seed}"))
                .join("results.csv");
            let text = fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing {path:?}"));
            let mut records = Vec::new();
            for line in text.lines().skip(1) {
                let fields: Vec<&str> = line.split(',').collect();
                records.push((
                    fields[4].parse::<usize>().expect("samples"),
                    fields[5].parse::<f64>().expect("rmse"),
                ));
            }
            runs.push(records);
        }
        let mut grid: Vec<usize> = runs.iter().flatten().map(|(s, _)| *s).collect();
        grid.sort_unstable();
        grid.dedup();
        for s in grid {
            let carried: Vec<f64> = runs
                .iter()
                .filter_map(|records| {
                    records.iter().rev().find(|(n, _)| *n <= s).map(|(_, r)| *r)
                })
                .collect();
            if carried.is_empty() {
                continue;
            }
            rows.push((
                mode.to_string(),
                rho,
                s,
                carried.len(),
                mean(&carried),
                sample_std(&carried),
            ));
        }
    }
    rows
}

#[test]
fn sweep_summary_matches_independent_recomputation() {
    let dir = tempfile::tempdir().expect("temp dir");
    let out = dir.path().join("sweep");
    let mut args = vec![
        "sweep",
        "--modes",
        "uct-none,uct-copod",
        "--seeds",
        "0..2",
        "--rhos",
        "0.1",
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(FAST_RUN);
    run_ok(&args);

    let expected = recompute_summary(&out);
    let summary = fs::read_to_string(out.join("summary.csv")).expect("summary");
    let mut lines = summary.lines();
    assert_eq!(
        lines.next(),
        Some("mode,rho,samples,n_runs,rmse_mean,rmse_std"),
        "summary.csv header"
    );
    let got: Vec<Vec<String>> = lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    assert_eq!(got.len(), expected.len(), "summary row count");
    for (row, want) in got.iter().zip(&expected) {
        assert_eq!(row[0], want.0, "mode column");
        assert_eq!(row[2].parse::<usize>().expect("samples"), want.2);
        assert_eq!(row[3].parse::<usize>().expect("n_runs"), want.3);
        let mean_got: f64 = row[4].parse().expect("mean");
        let std_got: f64 = row[5].parse().expect("std");
        assert!(
            (mean_got - want.4).abs() <= 1e-12,
            "mean mismatch at {} {}: {mean_got} vs {}",
            want.0,
            want.2,
            want.4
        );
        assert!(
            (std_got - want.5).abs() <= 1e-12,
            "std mismatch at {} {}: {std_got} vs {}",
            want.0,
            want.2,
            want.5
        );
    }
}

#[test]
fn copod_score_flags_the_planted_outlier() {
    let dir = tempfile::tempdir().expect("temp dir");
    let input = dir.path().join("points.csv");
    let mut text = String::from("x,y\n");
    for i in 0..30 {
        let a = (i as f64) * 0.1;
        text.push_str(&format!("{},{}\n", a, 1.0 + (a * 7.0).sin() * 0.1));
    }
    // Extreme in both columns: rank-based tail scores single it out.
    text.push_str("99.0,250.0\n");
    fs::write(&input, &text).expect("write input");

    let out = dir.path().join("scored.csv");
    run_ok(&[
        "copod-score",
        input.to_str().unwrap(),
        "--contamination",
        "0.1",
        "--out",
        out.to_str().unwrap(),
    ]);

    let scored = fs::read_to_string(&out).expect("scored output");
    let mut lines = scored.lines();
    assert_eq!(lines.next(), Some("x,y,score,flag"), "output header");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 31, "one output row per input row");
    // Input fields are echoed verbatim.
    for (row, input_line) in rows.iter().zip(text.lines().skip(1)) {
        assert_eq!(format!("{},{}", row[0], row[1]), input_line, "echoed fields");
    }
    assert_eq!(*rows[30].last().expect("flag"), "1", "planted outlier flagged");
    let flagged = rows.iter().filter(|r| *r.last().expect("flag") == "1").count();
    assert!(flagged <= 3, "nearly all benign rows stay unflagged, got {flagged}");
}

#[test]
fn terrain_rasters_round_trip_through_both_formats() {
    let dir = tempfile::tempdir().expect("temp dir");
    let asc = dir.path().join("hills.asc");
    let csv = dir.path().join("hills.csv");
    for out in [&asc, &csv] {
        run_ok(&[
            "terrain",
            "--seed",
            "11",
            "--rows",
            "18",
            "--cols",
            "23",
            "--peaks",
            "5",
            "--out",
            out.to_str().unwrap(),
        ]);
    }
    let from_asc = load_grid(&asc).expect("ESRI raster loads");
    let from_csv = load_grid(&csv).expect("CSV raster loads");
    assert_eq!(from_asc.rows(), 18);
    assert_eq!(from_asc.cols(), 23);
    assert_eq!(from_csv.rows(), 18);
    assert_eq!(from_csv.cols(), 23);
    for i in 0..18 {
        for j in 0..23 {
            let a = from_asc.values()[(i, j)];
            let c = from_csv.values()[(i, j)];
            assert!(
                (a - c).abs() <= 1e-9,
                "formats disagree at ({i},{j}): {a} vs {c}"
            );
        }
    }

    // Same seed, same bytes: the generator is deterministic.
    let again = dir.path().join("again.asc");
    run_ok(&[
        "terrain",
        "--seed",
        "11",
        "--rows",
        "18",
        "--cols",
        "23",
        "--peaks",
        "5",
        "--out",
        again.to_str().unwrap(),
    ]);
    assert_eq!(
        fs::read(&asc).expect("first raster"),
        fs::read(&again).expect("second raster"),
        "terrain generation must be deterministic per seed"
    );
}

#[test]
fn invalid_configuration_exits_with_code_2() {
    let dir = tempfile::tempdir().expect("temp dir");
    let out = dir.path().join("out");
    assert_eq!(
        exit_code(&[
            "run",
            "--out",
            out.to_str().unwrap(),
            "--set",
            "planner_mode=banana"
        ]),
        2,
        "unknown planner mode"
    );
    assert_eq!(
        exit_code(&["run", "--out", out.to_str().unwrap(), "--set", "rho=1.5"]),
        2,
        "rho out of range"
    );
    assert_eq!(
        exit_code(&[
            "run",
            "--out",
            out.to_str().unwrap(),
            "--set",
            "world.kind=file"
        ]),
        2,
        "file world without a path"
    );
}

#[test]
fn unwritable_output_exits_with_code_1() {
    let dir = tempfile::tempdir().expect("temp dir");
    let blocker = dir.path().join("blocker");
    fs::write(&blocker, "not a directory").expect("write blocker");
    let out = blocker.join("nested");
    let mut args = vec!["run", "--out", out.to_str().unwrap()];
    args.extend_from_slice(FAST_RUN);
    assert_eq!(exit_code(&args), 1, "output dir under a file");
}
