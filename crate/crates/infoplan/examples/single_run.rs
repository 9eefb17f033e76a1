//! One complete sampling experiment, epoch by epoch.
//!
//! Runs the full closed loop on a small synthetic world: pilot collection,
//! per-epoch planning on uncertainty + outlier-occurrence reward maps,
//! sensing with spike injection, copula-based filtering, and GP refits —
//! printing the per-epoch record table as it would land in `results.csv`.
//!
//! Run with: `cargo run --example single_run`

use infoplan::{load_config, run_experiment};

fn main() {
    // Build the config exactly as `infoplan run --set ...` would.
    let overrides: Vec<(String, String)> = [
        ("world.rows", "24"),
        ("world.cols", "24"),
        ("world.peaks", "4"),
        ("budget_samples", "220"),
        ("pilot_samples", "50"),
        ("init_opt_iters", "200"),
        ("epoch_opt_iters", "30"),
        ("search.iterations", "250"),
        ("seed", "5"),
    ]
    .iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect();
    let config = load_config(None, &overrides).expect("valid overrides");
    let (world, pipeline) = config.build().expect("consistent config");

    println!(
        "mode {} on a {}x{} world, budget {} samples (pilot {}), rho {}\n",
        config.mode_label(),
        world.rows(),
        world.cols(),
        config.budget_samples,
        config.pilot_samples,
        config.rho
    );

    let result = run_experiment(&world, &pipeline).expect("run completes");

    println!("epoch  samples    rmse  filtered  false_alarms  missed");
    for r in &result.records {
        println!(
            "{:5}  {:7}  {:6.2}  {:8}  {:12}  {:6}",
            r.epoch, r.samples, r.rmse, r.n_filtered, r.n_false_alarms, r.n_missed
        );
    }

    let first = &result.records[0];
    let last = result.records.last().unwrap();
    let filtered: usize = result.records.iter().map(|r| r.n_filtered).sum();
    let false_alarms: usize = result.records.iter().map(|r| r.n_false_alarms).sum();
    println!(
        "\nrmse {:.2} -> {:.2} over {} planning epochs; {} samples filtered ({} false alarms)",
        first.rmse,
        last.rmse,
        result.records.len() - 1,
        filtered,
        false_alarms,
    );
}
