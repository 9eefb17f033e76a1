//! The closed sampling loop: plan, drive, sense, filter, refit, evaluate.
//!
//! An experiment starts with a **pilot phase** — samples collected along a
//! fixed closed path, independent of any planner — that freezes the
//! preprocessing statistics (inputs scaled to `[−1, 1]` per axis, targets
//! standardized by the pilot mean and standard deviation) and fits initial GP
//! hyperparameters. Then epochs repeat until the sampling budget is spent:
//!
//! 1. build per-cell reward maps from the current model: the normalized
//!    predictive standard deviation, and (for the two-objective planner) the
//!    normalized Gaussian-smoothed outlier occurrence counts;
//! 2. run the tree search from the robot's pose;
//! 3. drive the returned steering sequence, sensing one sample per step and
//!    truncating when the budget runs out;
//! 4. corrupt the fresh batch with injected spikes at rate `rho`;
//! 5. filter the batch according to the detector mode — keep everything,
//!    drop exactly the injected ones (the clairvoyant baseline), flag with a
//!    copula detector fit on all raw data so far, or re-flag the *entire*
//!    history with that detector;
//! 6. count flagged locations into the outlier occurrence grid;
//! 7. append the survivors and re-optimize the GP from its previous
//!    hyperparameters;
//! 8. record the root-mean-squared error of the predictive mean against the
//!    ground-truth grid, in raw field units.
//!
//! Every random draw comes from named, epoch-indexed streams of one root
//! seed, so two runs with equal configurations are bit-identical, and the
//! planner's draws never perturb the sensor's.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::copod::{detect, fit_copod};
use crate::gp::{self, Dataset, FittedGP, Hyperparams};
use crate::mcts::{search_with_tree, RewardMaps, SearchConfig, SearchRngs};
use crate::stats::sample_std;
use crate::stream::SeedTree;
use crate::world::{
    bezier_pilot_path, gaussian_smooth, inject_outliers, sense, ElevationGrid, Extent,
    GridGeometry, MotionConfig, OccurrenceGrid, RobotState, Sample, Workspace,
};

/// Which objectives the tree search plans over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerMode {
    /// Scalar search on the predictive-uncertainty map alone.
    Uct,
    /// Pareto search on uncertainty and outlier-occurrence maps together.
    Puct,
}

/// What happens to a freshly sensed batch before it reaches the model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorMode {
    /// Keep every sample, spikes included.
    None,
    /// Drop exactly the injected samples — the clairvoyant upper baseline.
    OracleLabels,
    /// Fit the copula detector on all raw data so far, flag the new batch.
    CopodBatch,
    /// Fit on all raw data and re-flag the entire history every epoch,
    /// rebuilding the training set and the occurrence grid from scratch.
    CopodAllHistory,
}

/// Failures preparing or running an experiment.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid pipeline configuration: {0}")]
    InvalidConfig(String),
    /// A numerical step (GP factorization, detector fit, degenerate pilot)
    /// failed; `epoch` 0 is the pilot phase.
    #[error("epoch {epoch}: numerical failure: {message}")]
    Numerical { epoch: usize, message: String },
    /// The planner found no feasible action twice in a row, even after an
    /// in-place quarter-turn.
    #[error("epoch {epoch}: planner stuck: no feasible action from the current pose, even after an in-place quarter-turn")]
    PlannerStuck { epoch: usize },
}

/// Everything one experiment run needs besides the world itself.
#[derive(Clone, Debug)]
pub struct PipelineConfig {
    pub planner_mode: PlannerMode,
    pub detector_mode: DetectorMode,
    /// Fraction of each sensed batch corrupted by injected spikes.
    pub rho: f64,
    /// Total samples the run may sense, pilot included.
    pub budget_samples: usize,
    /// Samples collected along the fixed pilot path.
    pub pilot_samples: usize,
    /// Hyperparameter ascent iterations after the pilot fit.
    pub init_opt_iters: usize,
    /// Hyperparameter ascent iterations after each epoch's append.
    pub epoch_opt_iters: usize,
    pub search: SearchConfig,
    pub motion: MotionConfig,
    /// Assumed outlier fraction for the detector threshold.
    pub contamination: f64,
    /// Gaussian smoothing radius (in cells) for the occurrence map.
    pub smoothing_sigma: f64,
    /// Standard deviation of the additive sensor noise, in field units.
    pub sensor_noise_std: f64,
    /// Root seed; all randomness derives from it through named streams.
    pub seed: u64,
    /// Keep a JSON dump of every epoch's search tree in the result.
    pub record_trees: bool,
}

impl PipelineConfig {
    /// Check internal consistency; called by [`run_experiment`] before work starts.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let err = |m: String| Err(PipelineError::InvalidConfig(m));
        if self.pilot_samples < 2 {
            return err(format!(
                "pilot_samples must be at least 2, got {}",
                self.pilot_samples
            ));
        }
        if self.budget_samples < self.pilot_samples {
            return err(format!(
                "budget_samples ({}) must cover pilot_samples ({})",
                self.budget_samples, self.pilot_samples
            ));
        }
        if !self.rho.is_finite() || !(0.0..=1.0).contains(&self.rho) {
            return err(format!("rho must lie in [0, 1], got {}", self.rho));
        }
        if !self.contamination.is_finite()
            || self.contamination <= 0.0
            || self.contamination >= 0.5
        {
            return err(format!(
                "contamination must lie in (0, 0.5), got {}",
                self.contamination
            ));
        }
        if !self.smoothing_sigma.is_finite() || self.smoothing_sigma <= 0.0 {
            return err(format!(
                "smoothing_sigma must be positive, got {}",
                self.smoothing_sigma
            ));
        }
        if !self.sensor_noise_std.is_finite() || self.sensor_noise_std < 0.0 {
            return err(format!(
                "sensor_noise_std must be non-negative, got {}",
                self.sensor_noise_std
            ));
        }
        let expected_objectives = match self.planner_mode {
            PlannerMode::Uct => 1,
            PlannerMode::Puct => 2,
        };
        if self.search.objective_count() != expected_objectives {
            return err(format!(
                "{:?} planning needs {} search objective(s), the search config has {}",
                self.planner_mode,
                expected_objectives,
                self.search.objective_count()
            ));
        }
        if self.planner_mode == PlannerMode::Puct
            && matches!(
                self.detector_mode,
                DetectorMode::None | DetectorMode::OracleLabels
            )
        {
            return err(
                "puct needs an outlier signal: pair it with copod_batch or copod_all_history"
                    .into(),
            );
        }
        Ok(())
    }

    /// Short name of this planner/detector pairing, used in result files.
    pub fn mode_label(&self) -> &'static str {
        mode_label(self.planner_mode, self.detector_mode)
    }
}

/// Short name of a planner/detector pairing: `uct-none`, `uct-best`,
/// `uct-copod`, `puct-copod`, `uct-copod-hist`, or `puct-copod-hist`.
pub fn mode_label(planner: PlannerMode, detector: DetectorMode) -> &'static str {
    match (planner, detector) {
        (PlannerMode::Uct, DetectorMode::None) => "uct-none",
        (PlannerMode::Uct, DetectorMode::OracleLabels) => "uct-best",
        (PlannerMode::Uct, DetectorMode::CopodBatch) => "uct-copod",
        (PlannerMode::Uct, DetectorMode::CopodAllHistory) => "uct-copod-hist",
        (PlannerMode::Puct, DetectorMode::CopodBatch) => "puct-copod",
        (PlannerMode::Puct, DetectorMode::CopodAllHistory) => "puct-copod-hist",
        (PlannerMode::Puct, DetectorMode::None) => "puct-none",
        (PlannerMode::Puct, DetectorMode::OracleLabels) => "puct-best",
    }
}

/// Parse a mode label produced by [`mode_label`] back into its parts.
pub fn parse_mode_label(label: &str) -> Option<(PlannerMode, DetectorMode)> {
    match label {
        "uct-none" => Some((PlannerMode::Uct, DetectorMode::None)),
        "uct-best" => Some((PlannerMode::Uct, DetectorMode::OracleLabels)),
        "uct-copod" => Some((PlannerMode::Uct, DetectorMode::CopodBatch)),
        "uct-copod-hist" => Some((PlannerMode::Uct, DetectorMode::CopodAllHistory)),
        "puct-copod" => Some((PlannerMode::Puct, DetectorMode::CopodBatch)),
        "puct-copod-hist" => Some((PlannerMode::Puct, DetectorMode::CopodAllHistory)),
        _ => None,
    }
}

/// Frozen preprocessing statistics: inputs to `[−1, 1]`, targets standardized.
///
/// Fitted once from the pilot batch and never updated, so the model's input
/// geometry and target scale stay fixed while data accumulates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Preprocessor {
    input_center: [f64; 2],
    input_halfwidth: [f64; 2],
    target_mean: f64,
    target_std: f64,
}

impl Preprocessor {
    /// Freeze statistics from the extent and the pilot batch's values.
    ///
    /// Fails when the values have zero sample standard deviation — a constant
    /// pilot leaves the target scale undefined.
    pub fn from_pilot(extent: Extent, values: &[f64]) -> Result<Self, PipelineError> {
        let std = sample_std(values);
        if !(std > 0.0) {
            return Err(PipelineError::Numerical {
                epoch: 0,
                message: "pilot values have zero variance; cannot standardize targets".into(),
            });
        }
        let center = extent.center();
        Ok(Self {
            input_center: center,
            input_halfwidth: [extent.width() / 2.0, extent.height() / 2.0],
            target_mean: crate::stats::mean(values),
            target_std: std,
        })
    }

    /// Map a world position into `[−1, 1]²` (inside the extent).
    pub fn transform_input(&self, p: [f64; 2]) -> [f64; 2] {
        [
            (p[0] - self.input_center[0]) / self.input_halfwidth[0],
            (p[1] - self.input_center[1]) / self.input_halfwidth[1],
        ]
    }

    /// Standardize a field value.
    pub fn transform_target(&self, y: f64) -> f64 {
        (y - self.target_mean) / self.target_std
    }

    /// Invert [`transform_target`].
    pub fn untransform_target(&self, z: f64) -> f64 {
        z * self.target_std + self.target_mean
    }

    /// Scale a standardized spread back to field units (no mean shift).
    pub fn untransform_spread(&self, s: f64) -> f64 {
        s * self.target_std
    }
}

/// What one epoch did: sampling progress, model quality, filter bookkeeping.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    /// 0 is the pilot phase; planning epochs count from 1.
    pub epoch: usize,
    /// Cumulative samples sensed so far, this epoch included.
    pub samples: usize,
    /// Root-mean-squared error of the predictive mean over all grid cells,
    /// in raw field units.
    pub rmse: f64,
    /// Samples of this epoch's batch removed by the detector.
    pub n_filtered: usize,
    /// Removed but not injected — good data thrown away.
    pub n_false_alarms: usize,
    /// Injected but kept — spikes that slipped through.
    pub n_missed: usize,
    /// The planner came back empty and the robot made an in-place
    /// quarter-turn before a successful retry.
    pub retried_after_terminal: bool,
    /// Poses at which this epoch's samples were taken.
    pub trajectory: Vec<RobotState>,
}

/// All epoch records of one run, plus optional search-tree dumps.
#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub records: Vec<EpochRecord>,
    /// One JSON dump per planning epoch when `record_trees` is set.
    pub tree_dumps: Vec<String>,
}

/// Root-mean-squared difference over all cells of two equally shaped grids.
pub fn rmse(pred: &Array2<f64>, truth: &Array2<f64>) -> f64 {
    assert_eq!(pred.dim(), truth.dim(), "rmse needs equal shapes");
    let n = pred.len() as f64;
    let ss: f64 = pred
        .iter()
        .zip(truth.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    (ss / n).sqrt()
}

/// Min-max normalize into `[0, 1]`; a constant grid maps to all zeros.
fn min_max_normalize(grid: &Array2<f64>) -> Array2<f64> {
    let min = grid.iter().copied().fold(f64::INFINITY, f64::min);
    let max = grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max > min {
        grid.mapv(|v| (v - min) / (max - min))
    } else {
        Array2::zeros(grid.dim())
    }
}

/// Per-cell reward layers for the planner, built fresh every epoch.
///
/// The first layer is the GP's predictive standard deviation over all cell
/// centers; the second (vector mode only) is the Gaussian-smoothed outlier
/// occurrence count. Each layer is min-max normalized to `[0, 1]` so the
/// exploration constant keeps one scale; a constant layer becomes all zeros.
pub fn build_reward_maps(
    model: &FittedGP,
    occurrence: &OccurrenceGrid,
    scaled_cells: &Array2<f64>,
    geometry: GridGeometry,
    planner_mode: PlannerMode,
    smoothing_sigma: f64,
) -> Result<RewardMaps, PipelineError> {
    let (rows, cols) = (geometry.rows, geometry.cols);
    let (_, std) = gp::predict(model, scaled_cells);
    let std_map = Array2::from_shape_vec((rows, cols), std.to_vec())
        .expect("predict returns one value per cell");
    let mut layers = vec![min_max_normalize(&std_map)];
    if planner_mode == PlannerMode::Puct {
        let smoothed = gaussian_smooth(occurrence.counts(), smoothing_sigma);
        layers.push(min_max_normalize(&smoothed));
    }
    RewardMaps::new(geometry, layers).map_err(|e| PipelineError::InvalidConfig(e.to_string()))
}

/// Mutable state threaded through the epochs of one run.
struct RunState {
    seeds: SeedTree,
    workspace: Workspace,
    preprocessor: Preprocessor,
    /// Every sample ever sensed, contaminated, in sensing order.
    raw_history: Vec<Sample>,
    /// Transformed training set the GP actually sees (survivors only).
    dataset: Dataset,
    hyperparams: Hyperparams,
    model: FittedGP,
    occurrence: OccurrenceGrid,
    pose: RobotState,
    samples_sensed: usize,
    /// Cell centers in scaled input coordinates, one row per cell.
    scaled_cells: Array2<f64>,
}

fn numerical(epoch: usize, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Numerical {
        epoch,
        message: e.to_string(),
    }
}

/// Samples as a detector feature matrix: one `[x1, x2, value]` row per sample.
fn feature_matrix(samples: &[Sample]) -> Array2<f64> {
    let rows: Vec<f64> = samples
        .iter()
        .flat_map(|s| [s.location[0], s.location[1], s.value])
        .collect();
    Array2::from_shape_vec((samples.len(), 3), rows).expect("3 features per sample")
}

/// Append the transformed survivors of a batch to the GP training set.
fn append_survivors(
    dataset: &mut Dataset,
    pre: &Preprocessor,
    batch: &[Sample],
    flags: &[bool],
    epoch: usize,
) -> Result<(), PipelineError> {
    for (sample, &flagged) in batch.iter().zip(flags) {
        if !flagged {
            dataset
                .push(
                    &pre.transform_input(sample.location),
                    pre.transform_target(sample.value),
                )
                .map_err(|e| numerical(epoch, e))?;
        }
    }
    Ok(())
}

/// Collect the pilot batch, freeze preprocessing, and fit the initial model.
fn run_pilot(world: &ElevationGrid, config: &PipelineConfig) -> Result<RunState, PipelineError> {
    let extent = world.extent();
    let seeds = SeedTree::new(config.seed);
    let path = bezier_pilot_path(extent, config.pilot_samples);

    let mut sensing = seeds.stream("sensing", 0);
    let mut batch = Vec::with_capacity(path.len());
    for &p in &path {
        batch.push(sense(world, p, config.sensor_noise_std, &mut sensing).map_err(|e| numerical(0, e))?);
    }
    let mut injection = seeds.stream("injection", 0);
    inject_outliers(&mut batch, config.rho, &mut injection);

    let values: Vec<f64> = batch.iter().map(|s| s.value).collect();
    let preprocessor = Preprocessor::from_pilot(extent, &values)?;

    let mut dataset = Dataset::new(2);
    for sample in &batch {
        dataset
            .push(
                &preprocessor.transform_input(sample.location),
                preprocessor.transform_target(sample.value),
            )
            .map_err(|e| numerical(0, e))?;
    }

    let outcome = gp::optimize_hyperparams(
        &dataset,
        &Hyperparams::standard_init(2),
        config.init_opt_iters,
    );
    let hyperparams = outcome.hyperparams;
    let model = gp::fit(&dataset, &hyperparams).map_err(|e| numerical(0, e))?;

    // The robot starts where the pilot path ended, facing along its last leg.
    let last = path[path.len() - 1];
    let prev = path[path.len() - 2];
    let pose = RobotState::new(last[0], last[1], (last[1] - prev[1]).atan2(last[0] - prev[0]));

    let geometry = *world.geometry();
    let mut cells = Vec::with_capacity(geometry.rows * geometry.cols * 2);
    for i in 0..geometry.rows {
        for j in 0..geometry.cols {
            let scaled = preprocessor.transform_input(geometry.cell_center(i, j));
            cells.extend_from_slice(&scaled);
        }
    }
    let scaled_cells = Array2::from_shape_vec((geometry.rows * geometry.cols, 2), cells)
        .expect("two coordinates per cell");

    Ok(RunState {
        seeds,
        workspace: Workspace::new(extent, config.motion.clone()),
        preprocessor,
        raw_history: batch,
        dataset,
        hyperparams,
        model,
        occurrence: OccurrenceGrid::zeros(geometry),
        pose,
        samples_sensed: config.pilot_samples,
        scaled_cells,
    })
}

/// Pilot trajectory for the epoch-0 record: positions with travel headings.
fn pilot_trajectory(extent: Extent, n: usize) -> Vec<RobotState> {
    let path = bezier_pilot_path(extent, n);
    (0..path.len())
        .map(|k| {
            let (from, to) = if k + 1 < path.len() {
                (path[k], path[k + 1])
            } else {
                (path[k - 1], path[k])
            };
            RobotState::new(path[k][0], path[k][1], (to[1] - from[1]).atan2(to[0] - from[0]))
        })
        .collect()
}

/// RMSE of the current model against the ground truth, in raw field units.
fn model_rmse(state: &RunState, world: &ElevationGrid) -> f64 {
    let (mean, _) = gp::predict(&state.model, &state.scaled_cells);
    let raw: Vec<f64> = mean
        .iter()
        .map(|&z| state.preprocessor.untransform_target(z))
        .collect();
    let pred = Array2::from_shape_vec((world.rows(), world.cols()), raw)
        .expect("one prediction per cell");
    rmse(&pred, world.values())
}

/// Flag the new batch (and, in the all-history mode, everything before it).
///
/// Returns the flags for the new batch and, when the whole history was
/// re-screened, the flags for the full history in sensing order.
fn detect_outliers(
    state: &RunState,
    batch: &[Sample],
    config: &PipelineConfig,
    epoch: usize,
) -> Result<(Vec<bool>, Option<Vec<bool>>), PipelineError> {
    match config.detector_mode {
        DetectorMode::None => Ok((vec![false; batch.len()], None)),
        DetectorMode::OracleLabels => {
            Ok((batch.iter().map(|s| s.is_injected_outlier).collect(), None))
        }
        DetectorMode::CopodBatch => {
            // Fit on everything collected so far — batch included — and
            // screen only the newcomers.
            let mut all: Vec<Sample> = state.raw_history.clone();
            all.extend_from_slice(batch);
            let model = fit_copod(&feature_matrix(&all), config.contamination)
                .map_err(|e| numerical(epoch, e))?;
            let flags = detect(&model, &feature_matrix(batch)).map_err(|e| numerical(epoch, e))?;
            Ok((flags, None))
        }
        DetectorMode::CopodAllHistory => {
            let mut all: Vec<Sample> = state.raw_history.clone();
            all.extend_from_slice(batch);
            let features = feature_matrix(&all);
            let model = fit_copod(&features, config.contamination)
                .map_err(|e| numerical(epoch, e))?;
            let all_flags = detect(&model, &features).map_err(|e| numerical(epoch, e))?;
            let batch_flags = all_flags[all.len() - batch.len()..].to_vec();
            Ok((batch_flags, Some(all_flags)))
        }
    }
}

/// Run one planning epoch; returns its record and, optionally, a tree dump.
fn run_epoch(
    state: &mut RunState,
    world: &ElevationGrid,
    config: &PipelineConfig,
    epoch: usize,
) -> Result<(EpochRecord, Option<String>), PipelineError> {
    // (1) Reward maps from the current model and occurrence counts.
    let maps = build_reward_maps(
        &state.model,
        &state.occurrence,
        &state.scaled_cells,
        *world.geometry(),
        config.planner_mode,
        config.smoothing_sigma,
    )?;

    // (2) Tree search from the current pose; a terminal root (the robot is
    // facing out of the workspace) earns one forced in-place turn toward the
    // workspace center before the run aborts.
    let mut rngs = SearchRngs {
        select: state.seeds.stream("search", epoch as u64),
        expand: state.seeds.stream("expansion", epoch as u64),
    };
    let mut retried = false;
    let (outcome, tree) =
        search_with_tree(&state.workspace, state.pose, &maps, &config.search, &mut rngs)
            .map_err(|e| PipelineError::InvalidConfig(e.to_string()))?;
    let (outcome, tree) = if outcome.terminal_root {
        retried = true;
        let center = state.workspace.extent.center();
        state.pose = RobotState::new(
            state.pose.x1,
            state.pose.x2,
            (center[1] - state.pose.x2).atan2(center[0] - state.pose.x1),
        );
        let (retry_outcome, retry_tree) =
            search_with_tree(&state.workspace, state.pose, &maps, &config.search, &mut rngs)
                .map_err(|e| PipelineError::InvalidConfig(e.to_string()))?;
        if retry_outcome.terminal_root {
            return Err(PipelineError::PlannerStuck { epoch });
        }
        (retry_outcome, retry_tree)
    } else {
        (outcome, tree)
    };
    let dump = config.record_trees.then(|| tree.to_json());

    // (3) Drive the sequence, sensing one sample per step within budget.
    let mut sensing = state.seeds.stream("sensing", epoch as u64);
    let mut batch = Vec::new();
    let mut trajectory = Vec::new();
    for &action in &outcome.actions {
        if state.samples_sensed >= config.budget_samples {
            break;
        }
        state.pose = state.workspace.step(state.pose, action);
        batch.push(
            sense(world, state.pose.position(), config.sensor_noise_std, &mut sensing)
                .map_err(|e| numerical(epoch, e))?,
        );
        trajectory.push(state.pose);
        state.samples_sensed += 1;
    }

    // (4) Spike injection at rate rho.
    let mut injection = state.seeds.stream("injection", epoch as u64);
    inject_outliers(&mut batch, config.rho, &mut injection);

    // (5) Outlier filtering per detector mode.
    let (flags, history_flags) = detect_outliers(state, &batch, config, epoch)?;
    let n_filtered = flags.iter().filter(|&&f| f).count();
    let n_false_alarms = batch
        .iter()
        .zip(&flags)
        .filter(|(s, &f)| f && !s.is_injected_outlier)
        .count();
    let n_missed = batch
        .iter()
        .zip(&flags)
        .filter(|(s, &f)| !f && s.is_injected_outlier)
        .count();

    // (6, 7) Occurrence updates and training-set growth. The all-history mode
    // rebuilds both from the fresh verdict on every sample ever sensed;
    // otherwise the new batch's flags are appended incrementally.
    state.raw_history.extend_from_slice(&batch);
    match history_flags {
        Some(all_flags) => {
            state.occurrence.reset();
            for (sample, &flagged) in state.raw_history.iter().zip(&all_flags) {
                if flagged {
                    state.occurrence.increment(sample.location);
                }
            }
            let mut rebuilt = Dataset::new(2);
            append_survivors(
                &mut rebuilt,
                &state.preprocessor,
                &state.raw_history,
                &all_flags,
                epoch,
            )?;
            state.dataset = rebuilt;
        }
        None => {
            // Re-sampling a cell retires its standing revisit incentive: the
            // detector has been updated with fresh data there. Clearing before
            // counting keeps this epoch's own flags.
            for sample in &batch {
                state.occurrence.clear_at(sample.location);
            }
            for (sample, &flagged) in batch.iter().zip(&flags) {
                if flagged {
                    state.occurrence.increment(sample.location);
                }
            }
            append_survivors(&mut state.dataset, &state.preprocessor, &batch, &flags, epoch)?;
        }
    }

    if state.dataset.is_empty() {
        return Err(numerical(
            epoch,
            "every sample was filtered out; nothing left to fit",
        ));
    }
    let outcome = gp::optimize_hyperparams(&state.dataset, &state.hyperparams, config.epoch_opt_iters);
    state.hyperparams = outcome.hyperparams;
    state.model = gp::fit(&state.dataset, &state.hyperparams).map_err(|e| numerical(epoch, e))?;

    // (8) Model quality against the ground truth.
    let record = EpochRecord {
        epoch,
        samples: state.samples_sensed,
        rmse: model_rmse(state, world),
        n_filtered,
        n_false_alarms,
        n_missed,
        retried_after_terminal: retried,
        trajectory,
    };
    Ok((record, dump))
}

/// Run a full experiment: pilot, then epochs until the budget is spent.
///
/// Returns one record per phase (epoch 0 is the pilot) in order. The run is a
/// pure function of the world, the configuration, and `config.seed`.
pub fn run_experiment(
    world: &ElevationGrid,
    config: &PipelineConfig,
) -> Result<ExperimentResult, PipelineError> {
    config.validate()?;
    let mut state = run_pilot(world, config)?;
    let mut records = vec![EpochRecord {
        epoch: 0,
        samples: state.samples_sensed,
        rmse: model_rmse(&state, world),
        n_filtered: 0,
        n_false_alarms: 0,
        n_missed: 0,
        retried_after_terminal: false,
        trajectory: pilot_trajectory(world.extent(), config.pilot_samples),
    }];
    let mut tree_dumps = Vec::new();
    let mut epoch = 1;
    while state.samples_sensed < config.budget_samples {
        let (record, dump) = run_epoch(&mut state, world, config, epoch)?;
        records.push(record);
        tree_dumps.extend(dump);
        epoch += 1;
    }
    Ok(ExperimentResult {
        records,
        tree_dumps,
    })
}
