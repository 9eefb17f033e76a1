//! Experiment configuration: a TOML schema with one key per pipeline knob.
//!
//! A configuration file is optional — every field has a default matching the
//! full-scale experiment — and any field can be overridden from the command
//! line with dotted-path `--set` assignments (`--set rho=0.2`,
//! `--set search.iterations=200`, `--set world.kind=file`). Overrides are
//! spliced into the parsed document *before* typed deserialization, so a bad
//! key or a type mismatch fails with the field's name, not a silent default.
//!
//! [`ExperimentConfig::build`] turns the declarative form into runnable parts:
//! the ground-truth elevation grid (synthesized or loaded from a raster file)
//! and a validated [`PipelineConfig`]. [`ExperimentConfig::to_toml_string`]
//! echoes the *complete* configuration — defaults filled in — which is what
//! run manifests store so a result can be reproduced byte for byte.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mcts::SearchConfig;
use crate::pipeline::{mode_label, DetectorMode, PipelineConfig, PipelineError, PlannerMode};
use crate::world::{load_grid, synth_terrain, ElevationGrid, MotionConfig, WorldError};

/// Failures reading, overriding, or materializing a configuration.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid override `{key}`: {message}")]
    Override { key: String, message: String },
    #[error("world setup failed: {0}")]
    World(#[from] WorldError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

/// Tree-search section of the configuration file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSection {
    pub iterations: usize,
    pub rollout_steps: usize,
    pub exploration_c: f64,
}

impl Default for SearchSection {
    fn default() -> Self {
        Self {
            iterations: 500,
            rollout_steps: 5,
            exploration_c: 1.0,
        }
    }
}

/// Motion-model section: constant speed, step time, symmetric steering set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionSection {
    pub speed: f64,
    pub dt: f64,
    /// Largest steering rate (rad/s); choices span `[-limit, limit]`.
    pub steering_limit: f64,
    /// Number of discrete steering rates; must be odd so 0 is included.
    pub steering_choices: usize,
}

impl Default for MotionSection {
    fn default() -> Self {
        Self {
            speed: 1.0,
            dt: 1.0,
            steering_limit: 0.15,
            steering_choices: 5,
        }
    }
}

/// Which source the ground-truth field comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorldKind {
    Synthetic,
    File,
}

/// Where the ground-truth field comes from.
///
/// A flat table rather than a tagged enum so that partial command-line
/// overrides compose: `--set world.rows=20` keeps the synthetic kind, and
/// `--set world.kind=file --set world.path=g.asc` switches sources without
/// restating anything. Fields the active kind does not use are ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldSpec {
    pub kind: WorldKind,
    /// Terrain seed (synthetic only).
    pub seed: u64,
    pub rows: usize,
    pub cols: usize,
    pub peaks: usize,
    /// Raster path (ESRI ASCII or headerized CSV); required for `kind = "file"`.
    pub path: String,
}

impl Default for WorldSpec {
    fn default() -> Self {
        Self {
            kind: WorldKind::Synthetic,
            seed: 7,
            rows: 50,
            cols: 50,
            peaks: 6,
            path: String::new(),
        }
    }
}

/// The complete declarative description of one experiment run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Root seed for every random stream of the run.
    pub seed: u64,
    pub planner_mode: PlannerMode,
    pub detector_mode: DetectorMode,
    /// Fraction of each sensed batch corrupted by injected spikes.
    pub rho: f64,
    pub budget_samples: usize,
    pub pilot_samples: usize,
    pub init_opt_iters: usize,
    pub epoch_opt_iters: usize,
    /// Detector threshold quantile: assumed outlier fraction.
    pub contamination: f64,
    /// Gaussian smoothing radius (cells) for the outlier occurrence map.
    pub smoothing_sigma: f64,
    /// Additive sensor noise standard deviation, in field units.
    pub sensor_noise_std: f64,
    /// Keep per-epoch search-tree JSON dumps in memory (written by the CLI).
    pub record_trees: bool,
    pub search: SearchSection,
    pub motion: MotionSection,
    pub world: WorldSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            planner_mode: PlannerMode::Puct,
            detector_mode: DetectorMode::CopodBatch,
            rho: 0.1,
            budget_samples: 2000,
            pilot_samples: 100,
            init_opt_iters: 500,
            epoch_opt_iters: 50,
            contamination: 0.1,
            smoothing_sigma: 3.0,
            sensor_noise_std: 0.1,
            record_trees: false,
            search: SearchSection::default(),
            motion: MotionSection::default(),
            world: WorldSpec::default(),
        }
    }
}

impl ExperimentConfig {
    /// Short planner/detector label (`uct-none`, `puct-copod`, …).
    pub fn mode_label(&self) -> &'static str {
        mode_label(self.planner_mode, self.detector_mode)
    }

    /// Echo the complete configuration, defaults included, as TOML.
    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Materialize the ground-truth world and the validated pipeline config.
    pub fn build(&self) -> Result<(ElevationGrid, PipelineConfig), ConfigError> {
        let world = match self.world.kind {
            WorldKind::Synthetic => synth_terrain(
                self.world.seed,
                self.world.rows,
                self.world.cols,
                self.world.peaks,
            ),
            WorldKind::File => {
                if self.world.path.is_empty() {
                    return Err(ConfigError::Parse(
                        "world.path is required when world.kind = \"file\"".into(),
                    ));
                }
                load_grid(&self.world.path)?
            }
        };
        let objective_count = match self.planner_mode {
            PlannerMode::Uct => 1,
            PlannerMode::Puct => 2,
        };
        let search = SearchConfig::new(
            self.search.exploration_c,
            self.search.iterations,
            self.search.rollout_steps,
            objective_count,
        )
        .map_err(|e| ConfigError::Parse(e.to_string()))?;
        let motion = MotionConfig::symmetric(
            self.motion.speed,
            self.motion.dt,
            self.motion.steering_limit,
            self.motion.steering_choices,
        )?;
        let pipeline = PipelineConfig {
            planner_mode: self.planner_mode,
            detector_mode: self.detector_mode,
            rho: self.rho,
            budget_samples: self.budget_samples,
            pilot_samples: self.pilot_samples,
            init_opt_iters: self.init_opt_iters,
            epoch_opt_iters: self.epoch_opt_iters,
            search,
            motion,
            contamination: self.contamination,
            smoothing_sigma: self.smoothing_sigma,
            sensor_noise_std: self.sensor_noise_std,
            seed: self.seed,
            record_trees: self.record_trees,
        };
        pipeline.validate()?;
        Ok((world, pipeline))
    }
}

/// Load a configuration: the file if given (defaults otherwise), then apply
/// dotted-path overrides, then deserialize with field-level error messages.
pub fn load_config(
    path: Option<&Path>,
    overrides: &[(String, String)],
) -> Result<ExperimentConfig, ConfigError> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
            path: p.display().to_string(),
            source,
        })?,
        None => String::new(),
    };
    let mut doc: toml::Value = toml::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    for (key, raw) in overrides {
        apply_override(&mut doc, key, raw)?;
    }
    doc.try_into()
        .map_err(|e| ConfigError::Parse(e.to_string()))
}

/// Splice `key = raw` into the document at a dotted path, creating
/// intermediate tables as needed.
///
/// The right-hand side is parsed as a TOML value (`0.2`, `true`, `[1, 2]`,
/// `"text"`); anything that does not parse is taken as a bare string, so
/// `--set detector_mode=copod_batch` works without quoting.
pub fn apply_override(doc: &mut toml::Value, key: &str, raw: &str) -> Result<(), ConfigError> {
    let parsed = parse_toml_value(raw);
    let segments: Vec<&str> = key.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(ConfigError::Override {
            key: key.to_string(),
            message: "empty path segment".into(),
        });
    }
    let mut cursor = doc;
    for segment in &segments[..segments.len() - 1] {
        let table = cursor
            .as_table_mut()
            .ok_or_else(|| ConfigError::Override {
                key: key.to_string(),
                message: format!("`{segment}` is not a table"),
            })?;
        cursor = table
            .entry(segment.to_string())
            .or_insert_with(|| toml::Value::Table(toml::map::Map::new()));
    }
    let last = segments[segments.len() - 1];
    let table = cursor.as_table_mut().ok_or_else(|| ConfigError::Override {
        key: key.to_string(),
        message: format!("parent of `{last}` is not a table"),
    })?;
    table.insert(last.to_string(), parsed);
    Ok(())
}

/// Parse a command-line value as TOML, falling back to a plain string.
fn parse_toml_value(raw: &str) -> toml::Value {
    let snippet = format!("v = {raw}");
    match toml::from_str::<toml::Value>(&snippet) {
        Ok(toml::Value::Table(mut t)) => t.remove("v").expect("just inserted"),
        _ => toml::Value::String(raw.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn over(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    #[test]
    fn empty_input_yields_the_defaults() {
        let config = load_config(None, &[]).unwrap();
        assert_eq!(config, ExperimentConfig::default());
        assert_eq!(config.budget_samples, 2000);
        assert_eq!(config.pilot_samples, 100);
        assert_eq!(config.search.iterations, 500);
        assert_eq!(config.search.rollout_steps, 5);
        assert_eq!(config.mode_label(), "puct-copod");
    }

    #[test]
    fn toml_echo_round_trips_exactly() {
        let mut config = ExperimentConfig::default();
        config.rho = 0.25;
        config.world.kind = WorldKind::File;
        config.world.path = "ground.asc".into();
        config.detector_mode = DetectorMode::CopodAllHistory;
        let echoed = config.to_toml_string();
        let parsed: ExperimentConfig = toml::from_str(&echoed).unwrap();
        assert_eq!(parsed, config);
    }

    #[test]
    fn dotted_overrides_reach_nested_sections() {
        let config = load_config(
            None,
            &over(&[
                ("rho", "0.2"),
                ("search.iterations", "123"),
                ("motion.steering_choices", "7"),
                ("detector_mode", "oracle_labels"),
                ("planner_mode", "\"uct\""),
                ("world.rows", "20"),
                ("record_trees", "true"),
            ]),
        )
        .unwrap();
        assert_eq!(config.rho, 0.2);
        assert_eq!(config.search.iterations, 123);
        assert_eq!(config.motion.steering_choices, 7);
        assert_eq!(config.detector_mode, DetectorMode::OracleLabels);
        assert_eq!(config.planner_mode, PlannerMode::Uct);
        assert!(config.record_trees);
        assert_eq!(config.world.kind, WorldKind::Synthetic);
        assert_eq!(config.world.rows, 20);
        assert_eq!(config.world.cols, 50, "unset world fields keep defaults");
    }

    #[test]
    fn unknown_keys_and_wrong_types_fail_with_the_field_name() {
        let err = load_config(None, &over(&[("rhoo", "0.2")])).unwrap_err();
        assert!(err.to_string().contains("rhoo"), "{err}");
        let err = load_config(None, &over(&[("rho", "\"high\"")])).unwrap_err();
        assert!(err.to_string().contains("rho"), "{err}");
        let err = load_config(None, &over(&[("search.wrong", "1")])).unwrap_err();
        assert!(err.to_string().contains("wrong"), "{err}");
    }

    #[test]
    fn config_file_and_overrides_compose() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.toml");
        std::fs::write(
            &path,
            "budget_samples = 300\npilot_samples = 40\n[search]\niterations = 50\n",
        )
        .unwrap();
        let config = load_config(Some(&path), &over(&[("budget_samples", "200")])).unwrap();
        assert_eq!(config.budget_samples, 200, "override wins over the file");
        assert_eq!(config.pilot_samples, 40, "file wins over the default");
        assert_eq!(config.search.iterations, 50);
        assert_eq!(config.search.rollout_steps, 5, "untouched default survives");
    }

    #[test]
    fn build_synthesizes_the_declared_world() {
        let config = load_config(
            None,
            &over(&[
                ("world.rows", "16"),
                ("world.cols", "18"),
                ("world.peaks", "2"),
                ("budget_samples", "120"),
                ("pilot_samples", "30"),
            ]),
        )
        .unwrap();
        let (world, pipeline) = config.build().unwrap();
        assert_eq!((world.rows(), world.cols()), (16, 18));
        assert_eq!(pipeline.budget_samples, 120);
        assert_eq!(pipeline.search.objective_count(), 2, "puct needs two objectives");
    }

    #[test]
    fn build_loads_a_world_from_a_raster_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ground.asc");
        let world = crate::world::synth_terrain(3, 12, 12, 2);
        crate::world::write_esri_ascii(&world, &path).unwrap();
        let config = load_config(
            None,
            &over(&[
                ("world.kind", "file"),
                ("world.path", &format!("\"{}\"", path.display())),
            ]),
        )
        .unwrap();
        let (loaded, _) = config.build().unwrap();
        assert_eq!(loaded.rows(), 12);
        for (a, b) in loaded.values().iter().zip(world.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn build_rejects_invalid_mode_pairings() {
        let config = load_config(
            None,
            &over(&[("planner_mode", "puct"), ("detector_mode", "none")]),
        )
        .unwrap();
        let err = config.build().unwrap_err();
        assert!(err.to_string().contains("puct"), "{err}");
    }

    #[test]
    fn partial_world_tables_keep_the_synthetic_defaults() {
        // A lone subfield override must not force restating the kind.
        let config = load_config(None, &over(&[("world.peaks", "9")])).unwrap();
        assert_eq!(config.world.kind, WorldKind::Synthetic);
        assert_eq!(config.world.seed, 7);
        assert_eq!((config.world.rows, config.world.cols), (50, 50));
        assert_eq!(config.world.peaks, 9);
    }

    #[test]
    fn file_world_without_a_path_is_rejected_at_build() {
        let config = load_config(None, &over(&[("world.kind", "file")])).unwrap();
        let err = config.build().unwrap_err();
        assert!(err.to_string().contains("world.path"), "{err}");
    }
}
