//! Separable Gaussian smoothing for grids.

use ndarray::Array2;

/// Smooth `grid` with an isotropic Gaussian of standard deviation `sigma` (in cell
/// units), applied separably along rows then columns.
///
/// The kernel is truncated at `±⌈3σ⌉` cells and renormalized to sum to one.
/// Boundaries use symmetric reflection (index −1 maps to 0, −2 to 1, and likewise at
/// the far edge), which makes each output a convex combination of inputs: the result
/// never over- or undershoots the input range, and total mass is conserved up to the
/// (small) asymmetry reflection introduces near edges.
pub fn gaussian_smooth(grid: &Array2<f64>, sigma: f64) -> Array2<f64> {
    assert!(sigma.is_finite() && sigma > 0.0, "sigma must be positive, got {sigma}");
    let radius = (3.0 * sigma).ceil() as i64;
    let mut kernel = Vec::with_capacity(2 * radius as usize + 1);
    for k in -radius..=radius {
        kernel.push((-0.5 * (k as f64 / sigma).powi(2)).exp());
    }
    let total: f64 = kernel.iter().sum();
    for w in &mut kernel {
        *w /= total;
    }

    let (rows, cols) = grid.dim();
    // Pass 1: along each row (x1 direction).
    let mut tmp = Array2::zeros((rows, cols));
    for i in 0..rows {
        for j in 0..cols {
            let mut acc = 0.0;
            for (t, w) in kernel.iter().enumerate() {
                let src = reflect(j as i64 + t as i64 - radius, cols);
                acc += w * grid[(i, src)];
            }
            tmp[(i, j)] = acc;
        }
    }
    // Pass 2: along each column (x2 direction).
    let mut out = Array2::zeros((rows, cols));
    for i in 0..rows {
        for j in 0..cols {
            let mut acc = 0.0;
            for (t, w) in kernel.iter().enumerate() {
                let src = reflect(i as i64 + t as i64 - radius, rows);
                acc += w * tmp[(src, j)];
            }
            out[(i, j)] = acc;
        }
    }
    out
}

/// Symmetric (edge-inclusive) reflection of `idx` into `[0, n)`: the extension
/// pattern for n = 3 reads `... 1 0 | 0 1 2 | 2 1 ...`. Exact for any offset.
fn reflect(idx: i64, n: usize) -> usize {
    let n = n as i64;
    let period = 2 * n;
    let m = idx.rem_euclid(period);
    if m < n {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}
