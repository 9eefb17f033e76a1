//! Outlier-robust informative path planning.
//!
//! A batch simulator and library for planning sampling trajectories that map an
//! unknown scalar field (e.g. terrain elevation) under a sampling budget, when the
//! sensor stream is contaminated by spike outliers. The moving parts:
//!
//! * [`gp`] — exact Gaussian process regression with an anisotropic squared-exponential
//!   kernel, Cholesky-factorized inference, and Adam-based marginal-likelihood
//!   hyperparameter optimization.
//! * [`copod`] — copula-based outlier detection: per-dimension empirical tail CDFs,
//!   skewness-corrected negative-log tail scores, and quantile thresholding.
//! * [`mcts`] — Monte Carlo tree search over discrete steering sequences, in scalar
//!   (UCB) and multi-objective (Pareto-UCB) flavours.
//! * [`world`] — grid environments, Dubins-car motion, noisy sensing with outlier
//!   injection, Bezier pilot paths, and raster file I/O.
//! * [`pipeline`] — the closed sampling loop: build reward maps from the current GP
//!   posterior and outlier occurrence counts, plan, collect, filter, refit, evaluate.
//! * [`config`] / [`cli`] — TOML experiment configs and the batch command-line entry
//!   points (single runs, baseline sweeps, CSV scoring, terrain generation).
//!
//! The planner's second objective rewards revisiting locations where the detector
//! fired, so falsely discarded informative samples get recollected instead of leaving
//! holes in the model. See `examples/` for runnable demonstrations of each capability
//! and `README.md` for the experiment harness.

pub mod cli;
pub mod config;
pub mod copod;
pub mod gp;
pub mod mcts;
pub mod pipeline;
pub mod stats;
pub mod stream;
pub mod world;

pub use config::{load_config, ExperimentConfig, WorldKind, WorldSpec};
pub use pipeline::{
    run_experiment, DetectorMode, EpochRecord, ExperimentResult, PipelineConfig, PipelineError,
    PlannerMode,
};
pub use stream::SeedTree;

// Link the BLAS backend used by ndarray-linalg.
extern crate blas_src;
