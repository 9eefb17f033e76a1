//! Synthetic terrain generation and raster round-trips.
//!
//! Generates the crater-and-bumps elevation field used by the simulation
//! experiments, prints an ASCII relief view, and round-trips the grid through
//! both on-disk raster formats (ESRI ASCII and headerized CSV) to show the
//! loaders reproduce it.
//!
//! Run with: `cargo run --example synth_terrain`

use infoplan::world::{load_grid, synth_terrain, write_csv_grid, write_esri_ascii};

fn main() {
    let grid = synth_terrain(7, 36, 60, 6);
    let values = grid.values();
    let (lo, hi) = values.iter().fold((f64::MAX, f64::MIN), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    println!(
        "terrain seed 7: {} rows x {} cols, elevation [{:.1}, {:.1}]\n",
        grid.rows(),
        grid.cols(),
        lo,
        hi
    );

    // Coarse relief view: one glyph per cell, darker = higher. Row 0 of the
    // array is the southern edge, so print top-down.
    let glyphs: &[char] = &[' ', '.', ':', '-', '=', '+', '*', '#', '%', '@'];
    for i in (0..grid.rows()).rev() {
        let mut line = String::with_capacity(grid.cols());
        for j in 0..grid.cols() {
            let t = (values[(i, j)] - lo) / (hi - lo);
            let k = ((t * (glyphs.len() - 1) as f64).round() as usize).min(glyphs.len() - 1);
            line.push(glyphs[k]);
        }
        println!("  {line}");
    }

    let dir = std::env::temp_dir().join("infoplan-terrain-example");
    std::fs::create_dir_all(&dir).expect("temp dir");
    type Writer = fn(&infoplan::world::ElevationGrid, &std::path::Path) -> Result<(), infoplan::world::WorldError>;
    let writers: [(&str, Writer); 2] = [
        ("terrain.asc", |g, p| write_esri_ascii(g, p)),
        ("terrain.csv", |g, p| write_csv_grid(g, p)),
    ];
    for (name, write) in writers {
        let path = dir.join(name);
        write(&grid, &path).expect("write raster");
        let loaded = load_grid(&path).expect("read raster back");
        let max_err = loaded
            .values()
            .iter()
            .zip(values.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        println!("\n{} round-trip: max abs error {max_err:.2e}", path.display());
    }
}
