//! Procedural terrain generation.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use super::{ElevationGrid, Extent};

/// Generate a deterministic synthetic terrain: a base level with a gentle planar
/// trend, one dominant crater (a tall Gaussian rim with an inner depression), and
/// `peak_count` additional anisotropic Gaussian bumps of random height, width, and
/// sign. The extent is `[0, cols] × [0, rows]` with unit cells.
///
/// The same `(seed, rows, cols, peak_count)` always produces the identical grid.
pub fn synth_terrain(seed: u64, rows: usize, cols: usize, peak_count: usize) -> ElevationGrid {
    assert!(rows >= 2 && cols >= 2, "terrain must be at least 2x2");
    assert!(peak_count >= 1, "peak_count must be at least 1");
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let (w, h) = (cols as f64, rows as f64);
    let scale = w.min(h);

    let base = 100.0;
    let trend1: f64 = rng.random_range(-0.3..0.3);
    let trend2: f64 = rng.random_range(-0.3..0.3);

    // Dominant crater: rim minus a narrower, deeper core.
    let crater_c = [
        rng.random_range(0.25 * w..0.75 * w),
        rng.random_range(0.25 * h..0.75 * h),
    ];
    let rim_height: f64 = rng.random_range(70.0..110.0);
    let rim_sigma: f64 = rng.random_range(0.10..0.16) * scale;
    let core_sigma = rim_sigma * rng.random_range(0.35..0.5);
    let core_depth = rim_height * rng.random_range(1.2..1.5);

    struct Bump {
        center: [f64; 2],
        height: f64,
        sigma: [f64; 2],
    }
    let bumps: Vec<Bump> = (0..peak_count)
        .map(|_| {
            let center = [
                rng.random_range(0.1 * w..0.9 * w),
                rng.random_range(0.1 * h..0.9 * h),
            ];
            let sign = if rng.random_bool(0.25) { -1.0 } else { 1.0 };
            let height = sign * rng.random_range(15.0..50.0);
            let sigma = [
                rng.random_range(0.06..0.18) * scale,
                rng.random_range(0.06..0.18) * scale,
            ];
            Bump {
                center,
                height,
                sigma,
            }
        })
        .collect();

    let gauss2 = |p: [f64; 2], c: [f64; 2], s1: f64, s2: f64| -> f64 {
        (-0.5 * (((p[0] - c[0]) / s1).powi(2) + ((p[1] - c[1]) / s2).powi(2))).exp()
    };

    let extent = Extent::new(0.0, w, 0.0, h).expect("positive size");
    let mut values = Array2::zeros((rows, cols));
    for i in 0..rows {
        for j in 0..cols {
            let p = [j as f64 + 0.5, i as f64 + 0.5];
            let mut v = base + trend1 * (p[0] - 0.5 * w) + trend2 * (p[1] - 0.5 * h);
            v += rim_height * gauss2(p, crater_c, rim_sigma, rim_sigma);
            v -= core_depth * gauss2(p, crater_c, core_sigma, core_sigma);
            for b in &bumps {
                v += b.height * gauss2(p, b.center, b.sigma[0], b.sigma[1]);
            }
            values[(i, j)] = v;
        }
    }
    ElevationGrid::new(values, extent).expect("finite by construction")
}
