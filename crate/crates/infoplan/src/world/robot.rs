//! Vehicle state, Dubins-style motion, and workspace feasibility.
//!
//! The vehicle moves at constant speed `v` with a fixed integration step `dt` and a
//! finite set of steering rates. One planning step applies forward-Euler integration
//! using the *current* heading for displacement, then updates the heading:
//!
//! ```text
//! x1' = x1 + v · cos(θ) · dt
//! x2' = x2 + v · sin(θ) · dt
//! θ'  = wrap(θ + u · dt)
//! ```
//!
//! so every step covers exactly `v · dt` of ground distance regardless of steering.

use ndarray::Array2;

use super::{Extent, GridGeometry, WorldError};

/// Pose of the vehicle: position and heading in radians, kept in `[0, 2π)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RobotState {
    pub x1: f64,
    pub x2: f64,
    pub heading: f64,
}

impl RobotState {
    pub fn new(x1: f64, x2: f64, heading: f64) -> Self {
        Self {
            x1,
            x2,
            heading: wrap_heading(heading),
        }
    }

    pub fn position(&self) -> [f64; 2] {
        [self.x1, self.x2]
    }
}

/// Wrap an angle into `[0, 2π)`.
pub fn wrap_heading(theta: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let w = theta.rem_euclid(tau);
    // rem_euclid can return exactly tau when theta is a tiny negative number.
    if w >= tau {
        0.0
    } else {
        w
    }
}

/// Constant-speed motion model with a discrete symmetric steering set.
#[derive(Clone, Debug, PartialEq)]
pub struct MotionConfig {
    speed: f64,
    dt: f64,
    steering_set: Vec<f64>,
}

impl MotionConfig {
    /// `steering_set` must be strictly increasing, symmetric about zero, and of odd
    /// length (so it contains 0 — the straight-ahead action used by rollouts).
    pub fn new(speed: f64, dt: f64, steering_set: Vec<f64>) -> Result<Self, WorldError> {
        if !(speed.is_finite() && speed > 0.0) {
            return Err(WorldError::InvalidMotion(format!("speed must be positive, got {speed}")));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(WorldError::InvalidMotion(format!("dt must be positive, got {dt}")));
        }
        let n = steering_set.len();
        if n == 0 || n % 2 == 0 {
            return Err(WorldError::InvalidMotion(format!(
                "steering set must have odd length so it contains 0, got {n} entries"
            )));
        }
        for w in steering_set.windows(2) {
            if !(w[0] < w[1]) {
                return Err(WorldError::InvalidMotion(
                    "steering set must be strictly increasing".into(),
                ));
            }
        }
        for k in 0..n {
            let (a, b) = (steering_set[k], steering_set[n - 1 - k]);
            if (a + b).abs() > 1e-12 {
                return Err(WorldError::InvalidMotion(format!(
                    "steering set must be symmetric about zero ({a} vs {b})"
                )));
            }
        }
        Ok(Self {
            speed,
            dt,
            steering_set,
        })
    }

    /// Evenly spaced symmetric steering set `[-limit, ..., 0, ..., +limit]` with an
    /// odd number of `choices`.
    pub fn symmetric(speed: f64, dt: f64, limit: f64, choices: usize) -> Result<Self, WorldError> {
        if !(limit.is_finite() && limit > 0.0) {
            return Err(WorldError::InvalidMotion(format!("steering limit must be positive, got {limit}")));
        }
        if choices < 3 || choices % 2 == 0 {
            return Err(WorldError::InvalidMotion(format!(
                "steering choices must be an odd number >= 3, got {choices}"
            )));
        }
        let half = (choices / 2) as i64;
        let set = (-half..=half)
            .map(|k| limit * k as f64 / half as f64)
            .collect();
        Self::new(speed, dt, set)
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steering_set(&self) -> &[f64] {
        &self.steering_set
    }

    pub fn action_count(&self) -> usize {
        self.steering_set.len()
    }

    pub fn steering(&self, action: usize) -> f64 {
        self.steering_set[action]
    }

    /// Ground distance covered by one step.
    pub fn step_length(&self) -> f64 {
        self.speed * self.dt
    }
}

/// One forward-Euler motion step under steering rate `steering`.
pub fn dubins_step(state: RobotState, steering: f64, motion: &MotionConfig) -> RobotState {
    let d = motion.speed * motion.dt;
    RobotState {
        x1: state.x1 + d * state.heading.cos(),
        x2: state.x2 + d * state.heading.sin(),
        heading: wrap_heading(state.heading + steering * motion.dt),
    }
}

/// Optional obstacle mask over a grid; `true` cells are forbidden.
#[derive(Clone, Debug)]
pub struct OccupancyGrid {
    geom: GridGeometry,
    occupied: Array2<bool>,
}

impl OccupancyGrid {
    pub fn new(occupied: Array2<bool>, extent: Extent) -> Result<Self, WorldError> {
        let (rows, cols) = occupied.dim();
        let geom = GridGeometry::new(extent, rows, cols)?;
        Ok(Self { geom, occupied })
    }

    /// Whether `p` falls in an occupied cell. Points outside the extent count as
    /// occupied (there is nothing to stand on out there).
    pub fn blocked(&self, p: [f64; 2]) -> bool {
        match self.geom.world_to_cell(p) {
            Ok((i, j)) => self.occupied[(i, j)],
            Err(_) => true,
        }
    }
}

/// The region the vehicle may plan in: extent, motion model, optional obstacles.
#[derive(Clone, Debug)]
pub struct Workspace {
    pub extent: Extent,
    pub motion: MotionConfig,
    pub occupancy: Option<OccupancyGrid>,
}

impl Workspace {
    pub fn new(extent: Extent, motion: MotionConfig) -> Self {
        Self {
            extent,
            motion,
            occupancy: None,
        }
    }

    pub fn with_occupancy(mut self, occupancy: OccupancyGrid) -> Self {
        self.occupancy = Some(occupancy);
        self
    }

    fn admissible(&self, p: [f64; 2]) -> bool {
        self.extent.contains(p)
            && self
                .occupancy
                .as_ref()
                .map(|o| !o.blocked(p))
                .unwrap_or(true)
    }

    /// Pose after applying action `action` (an index into the steering set).
    pub fn step(&self, state: RobotState, action: usize) -> RobotState {
        dubins_step(state, self.motion.steering(action), &self.motion)
    }

    /// Whether applying `action` keeps the vehicle inside the extent and out of
    /// occupied cells.
    pub fn feasible(&self, state: RobotState, action: usize) -> bool {
        let next = self.step(state, action);
        self.admissible(next.position())
    }

    /// All feasible action indices from `state`, in increasing order.
    pub fn feasible_actions(&self, state: RobotState) -> Vec<usize> {
        (0..self.motion.action_count())
            .filter(|&a| self.feasible(state, a))
            .collect()
    }

    /// Whether a position is inside the extent and unoccupied (used by rollout
    /// termination, which tracks positions rather than actions).
    pub fn position_admissible(&self, p: [f64; 2]) -> bool {
        self.admissible(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI, TAU};

    fn motion() -> MotionConfig {
        MotionConfig::symmetric(2.0, 1.0, 0.15, 5).unwrap()
    }

    #[test]
    fn symmetric_set_layout() {
        let m = motion();
        assert_eq!(m.steering_set(), &[-0.15, -0.075, 0.0, 0.075, 0.15]);
        assert_eq!(m.steering(2), 0.0);
    }

    #[test]
    fn motion_validation() {
        assert!(MotionConfig::new(0.0, 1.0, vec![0.0]).is_err());
        assert!(MotionConfig::new(1.0, 0.0, vec![0.0]).is_err());
        assert!(MotionConfig::new(1.0, 1.0, vec![-0.1, 0.1]).is_err()); // even count
        assert!(MotionConfig::new(1.0, 1.0, vec![-0.1, 0.0, 0.2]).is_err()); // asymmetric
        assert!(MotionConfig::new(1.0, 1.0, vec![0.1, 0.0, -0.1]).is_err()); // not increasing
        assert!(MotionConfig::new(1.0, 1.0, vec![-0.1, 0.0, 0.1]).is_ok());
    }

    #[test]
    fn zero_steering_goes_straight() {
        let m = motion();
        let s = dubins_step(RobotState::new(1.0, 2.0, 0.0), 0.0, &m);
        assert_eq!(s, RobotState::new(3.0, 2.0, 0.0));
        let s = dubins_step(RobotState::new(1.0, 2.0, FRAC_PI_2), 0.0, &m);
        assert!((s.x1 - 1.0).abs() < 1e-12 && (s.x2 - 4.0).abs() < 1e-12);
        assert_eq!(s.heading, FRAC_PI_2);
    }

    #[test]
    fn displacement_uses_old_heading() {
        // Even with maximum steering the displacement direction is the pre-step
        // heading; only the new heading shows the turn.
        let m = motion();
        let s = dubins_step(RobotState::new(0.0, 0.0, 0.0), 0.15, &m);
        assert!((s.x1 - 2.0).abs() < 1e-12);
        assert_eq!(s.x2, 0.0);
        assert!((s.heading - 0.15).abs() < 1e-12);
    }

    #[test]
    fn step_length_is_constant() {
        let m = motion();
        for &u in m.steering_set() {
            let s0 = RobotState::new(0.3, -0.4, 1.234);
            let s1 = dubins_step(s0, u, &m);
            let d = ((s1.x1 - s0.x1).powi(2) + (s1.x2 - s0.x2).powi(2)).sqrt();
            assert!((d - m.step_length()).abs() < 1e-12);
        }
    }

    #[test]
    fn heading_wraps_into_range() {
        assert_eq!(wrap_heading(0.0), 0.0);
        assert!((wrap_heading(TAU + 0.5) - 0.5).abs() < 1e-12);
        assert!((wrap_heading(-0.5) - (TAU - 0.5)).abs() < 1e-12);
        assert!(wrap_heading(-1e-18) < TAU);
        let m = MotionConfig::new(1.0, 1.0, vec![-PI, 0.0, PI]).unwrap();
        let s = dubins_step(RobotState::new(0.0, 0.0, PI + 0.1), PI, &m);
        assert!(s.heading >= 0.0 && s.heading < TAU);
    }

    #[test]
    fn feasibility_tracks_extent() {
        let extent = Extent::new(0.0, 10.0, 0.0, 10.0).unwrap();
        let ws = Workspace::new(extent, motion());
        // Heading +x1 near the right wall: every action exits.
        let stuck = RobotState::new(9.5, 5.0, 0.0);
        assert!(ws.feasible_actions(stuck).is_empty());
        // Facing back into the interior all actions are fine.
        let free = RobotState::new(9.5, 5.0, PI);
        assert_eq!(ws.feasible_actions(free).len(), 5);
    }

    #[test]
    fn occupancy_blocks_actions() {
        let extent = Extent::new(0.0, 10.0, 0.0, 10.0).unwrap();
        // Occupy the right half of the world.
        let occupied = Array2::from_shape_fn((10, 10), |(_, j)| j >= 5);
        let ws = Workspace::new(extent, motion())
            .with_occupancy(OccupancyGrid::new(occupied, extent).unwrap());
        let s = RobotState::new(4.0, 5.0, 0.0); // next step lands at x1 = 6: blocked
        assert!(ws.feasible_actions(s).is_empty());
        let s = RobotState::new(4.0, 5.0, PI); // stepping left is open
        assert_eq!(ws.feasible_actions(s).len(), 5);
    }
}
