//! The experiment file surface: config TOML, results CSV, manifest JSON.
//!
//! Shows the artifact layout the `run` subcommand produces without shelling
//! out: writes a config file, invokes the CLI entry point on it, and reads
//! back the three output files — then re-runs from the manifest's embedded
//! config echo to demonstrate byte-identical reproduction.
//!
//! Run with: `cargo run --example experiment_files`

use infoplan::cli;

fn main() {
    let dir = std::env::temp_dir().join("infoplan-files-example");
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).expect("temp dir");

    // A small complete run, configured through a file like any user would.
    let config_path = dir.join("exp.toml");
    std::fs::write(
        &config_path,
        "seed = 12\n\
         budget_samples = 140\n\
         pilot_samples = 40\n\
         init_opt_iters = 150\n\
         epoch_opt_iters = 20\n\
         \n\
         [search]\n\
         iterations = 200\n\
         \n\
         [world]\n\
         rows = 20\n\
         cols = 20\n\
         peaks = 3\n",
    )
    .expect("write config");

    let out_a = dir.join("run-a");
    cli::run([
        "infoplan",
        "run",
        "--config",
        config_path.to_str().unwrap(),
        "--out",
        out_a.to_str().unwrap(),
    ]);

    let results_a = std::fs::read_to_string(out_a.join("results.csv")).expect("results");
    println!("\nresults.csv starts:");
    for line in results_a.lines().take(4) {
        println!("  {line}");
    }

    // The manifest embeds the complete effective config. Feeding it back in
    // reproduces the results file byte for byte.
    let manifest = std::fs::read_to_string(out_a.join("manifest.json")).expect("manifest");
    let manifest: serde_json::Value = serde_json::from_str(&manifest).expect("valid json");
    println!("\nmanifest: mode={} final_rmse={:.3}", manifest["mode"], manifest["final_rmse"].as_f64().unwrap());

    let echo_path = dir.join("echo.toml");
    std::fs::write(&echo_path, manifest["config_toml"].as_str().unwrap()).expect("write echo");
    let out_b = dir.join("run-b");
    cli::run([
        "infoplan",
        "run",
        "--config",
        echo_path.to_str().unwrap(),
        "--out",
        out_b.to_str().unwrap(),
    ]);
    let results_b = std::fs::read_to_string(out_b.join("results.csv")).expect("results");
    println!(
        "\nre-run from the manifest echo: results.csv identical = {}",
        results_a == results_b
    );
}
