//! Copula-based outlier detection on a contaminated sample batch.
//!
//! Builds a smooth 2-D field, senses it along a space-filling pilot path,
//! injects spike outliers into a fraction of the samples, and shows how the
//! detector separates them: per-sample tail scores, the contamination-quantile
//! threshold, and the resulting confusion counts.
//!
//! Run with: `cargo run --example copod_outliers`

use infoplan::copod::{detect, fit_copod, score};
use infoplan::world::{bezier_pilot_path, inject_outliers, sense, synth_terrain};
use infoplan::SeedTree;
use ndarray::Array2;

fn main() {
    let world = synth_terrain(11, 40, 40, 5);
    let seeds = SeedTree::new(3);

    // Sense 80 samples along the pilot loop, then corrupt 10% of them.
    let mut sensing = seeds.stream("sensing", 0);
    let mut batch: Vec<_> = bezier_pilot_path(world.extent(), 80)
        .into_iter()
        .map(|p| sense(&world, p, 0.1, &mut sensing).expect("path stays inside"))
        .collect();
    let mut injection = seeds.stream("injection", 0);
    inject_outliers(&mut batch, 0.10, &mut injection);

    // Feature rows are [x1, x2, value]: scoring the value alone would flag
    // every sample from unusually high or low terrain.
    let mut features = Array2::zeros((batch.len(), 3));
    for (i, s) in batch.iter().enumerate() {
        features[(i, 0)] = s.location[0];
        features[(i, 1)] = s.location[1];
        features[(i, 2)] = s.value;
    }

    let contamination = 0.10;
    let model = fit_copod(&features, contamination).expect("well-formed batch");
    let flags = detect(&model, &features).expect("same shape as the fit");

    println!("fitted on {} samples, threshold {:.3} (top {:.0}% of scores)", batch.len(), model.threshold(), contamination * 100.0);
    println!("\n  score  flagged  injected  location            value");
    let mut rows: Vec<usize> = (0..batch.len()).collect();
    let scores: Vec<f64> = (0..batch.len())
        .map(|i| {
            let row: Vec<f64> = features.row(i).to_vec();
            score(&model, &row).expect("dims match")
        })
        .collect();
    rows.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    for &i in rows.iter().take(12) {
        let s = &batch[i];
        println!(
            "  {:5.2}  {:^7}  {:^8}  [{:5.1}, {:5.1}]      {:8.2}",
            scores[i],
            if flags[i] { "yes" } else { "-" },
            if s.is_injected_outlier { "yes" } else { "-" },
            s.location[0],
            s.location[1],
            s.value,
        );
    }

    let caught = batch
        .iter()
        .zip(&flags)
        .filter(|(s, &f)| f && s.is_injected_outlier)
        .count();
    let false_alarms = batch
        .iter()
        .zip(&flags)
        .filter(|(s, &f)| f && !s.is_injected_outlier)
        .count();
    let missed = batch
        .iter()
        .zip(&flags)
        .filter(|(s, &f)| !f && s.is_injected_outlier)
        .count();
    let injected = batch.iter().filter(|s| s.is_injected_outlier).count();
    println!(
        "\n{injected} spikes injected: {caught} caught, {missed} missed, {false_alarms} false alarms"
    );
}
