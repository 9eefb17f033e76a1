//! Noisy sensing, spike-outlier injection, and the fixed pilot survey path.

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{ElevationGrid, Extent, WorldError};
use crate::stats::quantile;

/// One sensor reading: where it was taken, what came back, and (for simulation
/// bookkeeping only — never visible to the detector) whether a spike was injected.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub location: [f64; 2],
    pub value: f64,
    pub is_injected_outlier: bool,
}

/// Read the field at `location`: bilinear ground truth plus `N(0, noise_std²)` noise.
///
/// `noise_std` must be non-negative and finite; zero disables the noise.
pub fn sense<R: Rng + ?Sized>(
    grid: &ElevationGrid,
    location: [f64; 2],
    noise_std: f64,
    rng: &mut R,
) -> Result<Sample, WorldError> {
    assert!(
        noise_std.is_finite() && noise_std >= 0.0,
        "noise_std must be non-negative and finite, got {noise_std}"
    );
    let truth = grid.bilinear(location)?;
    let noise = if noise_std > 0.0 {
        Normal::new(0.0, noise_std).expect("validated std").sample(rng)
    } else {
        0.0
    };
    Ok(Sample {
        location,
        value: truth + noise,
        is_injected_outlier: false,
    })
}

/// Corrupt exactly `round(rho · M)` distinct, uniformly chosen samples of the batch
/// with additive spikes.
///
/// Each spike is `±a · r` where `a ~ U[1, 2)`, the sign is a fair coin, and `r` is
/// the 0.95–0.05 interquantile range of the batch values *before* injection, so
/// spike size scales with the variation actually present in the batch. Draw order is
/// fixed: the index set first, then one `(amplitude, sign)` pair per chosen index in
/// ascending index order. Corrupted samples get `is_injected_outlier = true`.
pub fn inject_outliers<R: Rng + ?Sized>(batch: &mut [Sample], rho: f64, rng: &mut R) {
    assert!((0.0..=1.0).contains(&rho), "rho must be in [0, 1], got {rho}");
    let m = batch.len();
    let k = ((rho * m as f64).round() as usize).min(m);
    if k == 0 {
        return;
    }
    let values: Vec<f64> = batch.iter().map(|s| s.value).collect();
    let range = quantile(&values, 0.95) - quantile(&values, 0.05);
    let mut chosen = sample_indices(rng, m, k).into_vec();
    chosen.sort_unstable();
    for idx in chosen {
        let amplitude: f64 = rng.random_range(1.0..2.0);
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        batch[idx].value += sign * amplitude * range;
        batch[idx].is_injected_outlier = true;
    }
}

/// The fixed pilot survey: a closed smooth loop through four perimeter waypoints and
/// one interior excursion, sampled at `n_samples` evenly spaced curve parameters.
///
/// The loop is a composite cubic Bezier through anchors at extent fractions
/// (0.15, 0.15) → (0.85, 0.15) → (0.85, 0.85) → (0.5, 0.5) → (0.15, 0.85) → close,
/// with Catmull-Rom tangents (control points `Pᵢ ± (Pᵢ₊₁ − Pᵢ₋₁)/6`), which keeps
/// every control point — and hence the whole curve — strictly inside the extent.
/// Returns `n_samples` points at parameters `k / n_samples`, `k = 0 .. n_samples-1`
/// (the closing anchor is not repeated).
pub fn bezier_pilot_path(extent: Extent, n_samples: usize) -> Vec<[f64; 2]> {
    assert!(n_samples >= 2, "pilot path needs at least 2 samples");
    let anchors = [
        extent.at_fraction(0.15, 0.15),
        extent.at_fraction(0.85, 0.15),
        extent.at_fraction(0.85, 0.85),
        extent.at_fraction(0.5, 0.5),
        extent.at_fraction(0.15, 0.85),
    ];
    let n_seg = anchors.len();
    let seg = |i: usize| -> ([f64; 2], [f64; 2], [f64; 2], [f64; 2]) {
        let prev = anchors[(i + n_seg - 1) % n_seg];
        let p0 = anchors[i];
        let p1 = anchors[(i + 1) % n_seg];
        let next = anchors[(i + 2) % n_seg];
        let c0 = [p0[0] + (p1[0] - prev[0]) / 6.0, p0[1] + (p1[1] - prev[1]) / 6.0];
        let c1 = [p1[0] - (next[0] - p0[0]) / 6.0, p1[1] - (next[1] - p0[1]) / 6.0];
        (p0, c0, c1, p1)
    };
    (0..n_samples)
        .map(|k| {
            let t = k as f64 / n_samples as f64 * n_seg as f64;
            let i = (t as usize).min(n_seg - 1);
            let u = t - i as f64;
            let (p0, c0, c1, p1) = seg(i);
            let w0 = (1.0 - u).powi(3);
            let w1 = 3.0 * (1.0 - u).powi(2) * u;
            let w2 = 3.0 * (1.0 - u) * u * u;
            let w3 = u.powi(3);
            [
                w0 * p0[0] + w1 * c0[0] + w2 * c1[0] + w3 * p1[0],
                w0 * p0[1] + w1 * c0[1] + w2 * c1[1] + w3 * p1[1],
            ]
        })
        .collect()
}
