//! Grid environments, vehicle motion, and sensing.
//!
//! The world is a rectangular region of the plane holding a scalar field (elevation)
//! discretized on a regular grid. Coordinates are `[x1, x2]` with `x1` along columns
//! and `x2` along rows; internally row 0 is the *low-x2* edge, so `values[(i, j)]`
//! reads bottom-up. Raster files store rows top-down and the parsers flip them.

mod io;
mod robot;
mod sense;
mod smooth;
mod terrain;

pub use io::{load_grid, write_csv_grid, write_esri_ascii};
pub use robot::{dubins_step, wrap_heading, MotionConfig, OccupancyGrid, RobotState, Workspace};
pub use sense::{bezier_pilot_path, inject_outliers, sense, Sample};
pub use smooth::gaussian_smooth;
pub use terrain::synth_terrain;

use ndarray::Array2;
use thiserror::Error;

/// Errors from world construction, file parsing, and sensing.
#[derive(Debug, Error)]
pub enum WorldError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid motion model: {0}")]
    InvalidMotion(String),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("point [{0}, {1}] lies outside the grid extent")]
    OutOfExtent(f64, f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Axis-aligned rectangular region `[x1_min, x1_max] × [x2_min, x2_max]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Extent {
    pub x1_min: f64,
    pub x1_max: f64,
    pub x2_min: f64,
    pub x2_max: f64,
}

impl Extent {
    pub fn new(x1_min: f64, x1_max: f64, x2_min: f64, x2_max: f64) -> Result<Self, WorldError> {
        let e = Self {
            x1_min,
            x1_max,
            x2_min,
            x2_max,
        };
        if ![x1_min, x1_max, x2_min, x2_max].iter().all(|v| v.is_finite()) {
            return Err(WorldError::InvalidGrid("extent bounds must be finite".into()));
        }
        if x1_min >= x1_max || x2_min >= x2_max {
            return Err(WorldError::InvalidGrid(format!(
                "extent must have positive size, got [{x1_min}, {x1_max}] x [{x2_min}, {x2_max}]"
            )));
        }
        Ok(e)
    }

    pub fn width(&self) -> f64 {
        self.x1_max - self.x1_min
    }

    pub fn height(&self) -> f64 {
        self.x2_max - self.x2_min
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x1_min && p[0] <= self.x1_max && p[1] >= self.x2_min && p[1] <= self.x2_max
    }

    pub fn center(&self) -> [f64; 2] {
        [
            0.5 * (self.x1_min + self.x1_max),
            0.5 * (self.x2_min + self.x2_max),
        ]
    }

    /// Point at fractional coordinates `(f1, f2)` of the extent, with `(0, 0)` the
    /// low corner and `(1, 1)` the high corner.
    pub fn at_fraction(&self, f1: f64, f2: f64) -> [f64; 2] {
        [self.x1_min + f1 * self.width(), self.x2_min + f2 * self.height()]
    }
}

/// Mapping between world coordinates and grid cells.
///
/// Cells are uniform; cell `(i, j)` covers `x1 ∈ [x1_min + j·dx1, x1_min + (j+1)·dx1)`
/// and the analogous `x2` band with row index increasing in `+x2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridGeometry {
    pub extent: Extent,
    pub rows: usize,
    pub cols: usize,
}

impl GridGeometry {
    pub fn new(extent: Extent, rows: usize, cols: usize) -> Result<Self, WorldError> {
        if rows < 2 || cols < 2 {
            return Err(WorldError::InvalidGrid(format!(
                "grid must be at least 2x2, got {rows}x{cols}"
            )));
        }
        Ok(Self { extent, rows, cols })
    }

    pub fn cell_dx1(&self) -> f64 {
        self.extent.width() / self.cols as f64
    }

    pub fn cell_dx2(&self) -> f64 {
        self.extent.height() / self.rows as f64
    }

    /// World coordinates of the center of cell `(i, j)`.
    pub fn cell_center(&self, i: usize, j: usize) -> [f64; 2] {
        debug_assert!(i < self.rows && j < self.cols);
        [
            self.extent.x1_min + (j as f64 + 0.5) * self.cell_dx1(),
            self.extent.x2_min + (i as f64 + 0.5) * self.cell_dx2(),
        ]
    }

    /// Cell containing `p`. Points on the high boundary clamp into the last cell, so
    /// every point of the closed extent maps to a valid cell.
    pub fn world_to_cell(&self, p: [f64; 2]) -> Result<(usize, usize), WorldError> {
        if !self.extent.contains(p) {
            return Err(WorldError::OutOfExtent(p[0], p[1]));
        }
        let j = (((p[0] - self.extent.x1_min) / self.cell_dx1()) as usize).min(self.cols - 1);
        let i = (((p[1] - self.extent.x2_min) / self.cell_dx2()) as usize).min(self.rows - 1);
        Ok((i, j))
    }
}

/// A scalar field on a regular grid.
#[derive(Clone, Debug)]
pub struct ElevationGrid {
    geom: GridGeometry,
    values: Array2<f64>,
}

impl ElevationGrid {
    /// Wrap `values` (shape `rows × cols`, row 0 at the low-`x2` edge) over `extent`.
    pub fn new(values: Array2<f64>, extent: Extent) -> Result<Self, WorldError> {
        let (rows, cols) = values.dim();
        let geom = GridGeometry::new(extent, rows, cols)?;
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(WorldError::InvalidGrid(format!(
                "grid values must be finite, found {v}"
            )));
        }
        Ok(Self { geom, values })
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geom
    }

    pub fn extent(&self) -> Extent {
        self.geom.extent
    }

    pub fn rows(&self) -> usize {
        self.geom.rows
    }

    pub fn cols(&self) -> usize {
        self.geom.cols
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn value_at_cell(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Bilinear interpolation of the field at `p`, treating stored values as samples
    /// at cell centers. Outside the ring of cell centers the field extends constantly
    /// to the extent boundary (interpolation coordinates clamp).
    pub fn bilinear(&self, p: [f64; 2]) -> Result<f64, WorldError> {
        if !self.geom.extent.contains(p) {
            return Err(WorldError::OutOfExtent(p[0], p[1]));
        }
        let e = self.geom.extent;
        // Continuous cell-center coordinates: cell (i, j) center sits at (i, j).
        let u = ((p[0] - e.x1_min) / self.geom.cell_dx1() - 0.5)
            .clamp(0.0, (self.geom.cols - 1) as f64);
        let v = ((p[1] - e.x2_min) / self.geom.cell_dx2() - 0.5)
            .clamp(0.0, (self.geom.rows - 1) as f64);
        let j0 = (u as usize).min(self.geom.cols - 2);
        let i0 = (v as usize).min(self.geom.rows - 2);
        let fu = u - j0 as f64;
        let fv = v - i0 as f64;
        let g = &self.values;
        let top = g[(i0, j0)] * (1.0 - fu) + g[(i0, j0 + 1)] * fu;
        let bot = g[(i0 + 1, j0)] * (1.0 - fu) + g[(i0 + 1, j0 + 1)] * fu;
        Ok(top * (1.0 - fv) + bot * fv)
    }
}

/// Count grid over the same geometry as an elevation grid; used to accumulate where
/// the outlier detector has fired.
#[derive(Clone, Debug)]
pub struct OccurrenceGrid {
    geom: GridGeometry,
    counts: Array2<f64>,
}

impl OccurrenceGrid {
    pub fn zeros(geom: GridGeometry) -> Self {
        Self {
            counts: Array2::zeros((geom.rows, geom.cols)),
            geom,
        }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geom
    }

    pub fn counts(&self) -> &Array2<f64> {
        &self.counts
    }

    /// Add one occurrence at the cell containing `p`. Points outside the extent are
    /// ignored (the planner never leaves it, but sensing code shouldn't panic).
    pub fn increment(&mut self, p: [f64; 2]) {
        if let Ok((i, j)) = self.geom.world_to_cell(p) {
            self.counts[(i, j)] += 1.0;
        }
    }

    /// Zero the count of the cell containing `p`; points outside are ignored.
    /// Used when a location is re-sampled: the standing incentive to revisit
    /// it has served its purpose.
    pub fn clear_at(&mut self, p: [f64; 2]) {
        if let Ok((i, j)) = self.geom.world_to_cell(p) {
            self.counts[(i, j)] = 0.0;
        }
    }

    pub fn reset(&mut self) {
        self.counts.fill(0.0);
    }

    pub fn total(&self) -> f64 {
        self.counts.sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn unit_extent() -> Extent {
        Extent::new(0.0, 4.0, 0.0, 2.0).unwrap()
    }

    #[test]
    fn extent_validation() {
        assert!(Extent::new(0.0, 0.0, 0.0, 1.0).is_err());
        assert!(Extent::new(1.0, 0.0, 0.0, 1.0).is_err());
        assert!(Extent::new(0.0, f64::NAN, 0.0, 1.0).is_err());
    }

    #[test]
    fn cell_center_round_trip() {
        let geom = GridGeometry::new(unit_extent(), 2, 4).unwrap();
        for i in 0..2 {
            for j in 0..4 {
                let c = geom.cell_center(i, j);
                assert_eq!(geom.world_to_cell(c).unwrap(), (i, j));
            }
        }
    }

    #[test]
    fn world_to_cell_boundary_clamps() {
        let geom = GridGeometry::new(unit_extent(), 2, 4).unwrap();
        assert_eq!(geom.world_to_cell([4.0, 2.0]).unwrap(), (1, 3));
        assert_eq!(geom.world_to_cell([0.0, 0.0]).unwrap(), (0, 0));
        assert!(geom.world_to_cell([4.0001, 1.0]).is_err());
    }

    #[test]
    fn grid_rejects_degenerate_shapes() {
        let e = unit_extent();
        assert!(ElevationGrid::new(Array2::zeros((1, 4)), e).is_err());
        assert!(ElevationGrid::new(array![[1.0, f64::NAN], [0.0, 0.0]], e).is_err());
    }

    #[test]
    fn bilinear_matches_cell_values_at_centers() {
        let g = ElevationGrid::new(array![[1.0, 2.0], [3.0, 4.0]], Extent::new(0.0, 2.0, 0.0, 2.0).unwrap()).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let c = g.geometry().cell_center(i, j);
                assert!((g.bilinear(c).unwrap() - g.value_at_cell(i, j)).abs() < 1e-12);
            }
        }
        // Midpoint of all four centers averages them.
        assert!((g.bilinear([1.0, 1.0]).unwrap() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn bilinear_is_exact_for_linear_fields() {
        // f(x1, x2) = 2 x1 - 3 x2 + 1 sampled at cell centers is reproduced exactly
        // inside the center hull.
        let e = Extent::new(0.0, 5.0, 0.0, 4.0).unwrap();
        let geom = GridGeometry::new(e, 8, 10).unwrap();
        let mut vals = Array2::zeros((8, 10));
        for i in 0..8 {
            for j in 0..10 {
                let c = geom.cell_center(i, j);
                vals[(i, j)] = 2.0 * c[0] - 3.0 * c[1] + 1.0;
            }
        }
        let g = ElevationGrid::new(vals, e).unwrap();
        for &p in &[[1.3, 2.1], [2.0, 1.0], [4.0, 3.3]] {
            let truth = 2.0 * p[0] - 3.0 * p[1] + 1.0;
            assert!((g.bilinear(p).unwrap() - truth).abs() < 1e-10, "at {p:?}");
        }
    }

    #[test]
    fn occurrence_grid_accumulates() {
        let geom = GridGeometry::new(unit_extent(), 2, 4).unwrap();
        let mut occ = OccurrenceGrid::zeros(geom);
        occ.increment([0.1, 0.1]);
        occ.increment([0.2, 0.3]);
        occ.increment([3.9, 1.9]);
        occ.increment([99.0, 0.0]); // outside: ignored
        assert_eq!(occ.counts()[(0, 0)], 2.0);
        assert_eq!(occ.counts()[(1, 3)], 1.0);
        assert_eq!(occ.total(), 3.0);
    }
}
