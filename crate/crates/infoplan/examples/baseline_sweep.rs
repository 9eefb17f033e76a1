//! A miniature baseline comparison, in process.
//!
//! Runs the planner/detector baselines over a few seeds on a small world and
//! compares seed-averaged final RMSE — the same contrast the `sweep`
//! subcommand produces at full scale, shrunk enough to finish in seconds.
//!
//! Run with: `cargo run --release --example baseline_sweep`

use infoplan::pipeline::parse_mode_label;
use infoplan::stats::{mean, sample_std};
use infoplan::{load_config, run_experiment};

fn main() {
    let seeds: Vec<u64> = (0..3).collect();
    let modes = ["uct-none", "uct-copod", "puct-copod"];

    let base: Vec<(String, String)> = [
        ("world.rows", "24"),
        ("world.cols", "24"),
        ("world.peaks", "5"),
        ("budget_samples", "200"),
        ("pilot_samples", "40"),
        ("init_opt_iters", "200"),
        ("epoch_opt_iters", "25"),
        ("search.iterations", "250"),
    ]
    .iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect();

    println!(
        "{} modes x {} seeds, 200-sample budget on a 24x24 world\n",
        modes.len(),
        seeds.len()
    );
    println!("mode         seed-mean final rmse   std     per-seed");
    for label in modes {
        let (planner, detector) = parse_mode_label(label).expect("known label");
        let mut finals = Vec::new();
        for &seed in &seeds {
            let mut config = load_config(None, &base).expect("valid overrides");
            config.planner_mode = planner;
            config.detector_mode = detector;
            config.seed = seed;
            let (world, pipeline) = config.build().expect("consistent config");
            let result = run_experiment(&world, &pipeline).expect("run completes");
            finals.push(result.records.last().unwrap().rmse);
        }
        let shown: Vec<String> = finals.iter().map(|r| format!("{r:.2}")).collect();
        println!(
            "{label:<12} {:>20.3}  {:>6.3}   [{}]",
            mean(&finals),
            sample_std(&finals),
            shown.join(", ")
        );
    }
}
