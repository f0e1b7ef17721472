//! Run configuration, read from TOML or JSON.

use std::path::{Path, PathBuf};

use boundary_core::nonparametric::Method;
use boundary_core::parametric::{Grouping, DEFAULT_EPSILON};
use boundary_core::simulate::{SimulationConfig, TreatmentSpec};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::io::{ColumnMap, RowPolicy};
use crate::pipeline::Stage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Base output directory; each run writes into its own subdirectory.
    pub out: PathBuf,
    pub stages: Vec<Stage>,
    /// Incident CSV to analyse instead of a simulated draw.
    pub input: Option<PathBuf>,
    pub columns: ColumnMap,
    pub row_policy: RowPolicy,
    pub simulation: SimulationConfig,
    pub fit: FitConfig,
    pub heterogeneity: HeterogeneityConfig,
    pub nonparametric: NonparametricConfig,
    pub did: DidConfig,
    pub eventstudy: EventStudyConfig,
    pub spectest: SpecTestConfig,
    pub network: NetworkConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("out"),
            stages: Stage::ALL.to_vec(),
            input: None,
            columns: ColumnMap::default(),
            row_policy: RowPolicy::default(),
            simulation: SimulationConfig::default(),
            fit: FitConfig::default(),
            heterogeneity: HeterogeneityConfig::default(),
            nonparametric: NonparametricConfig::default(),
            did: DidConfig::default(),
            eventstudy: EventStudyConfig::default(),
            spectest: SpecTestConfig::default(),
            network: NetworkConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub epsilon: f64,
    pub gap_thresholds: Vec<f64>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { epsilon: DEFAULT_EPSILON, gap_thresholds: vec![8.0, 15.0, 30.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeterogeneityConfig {
    pub groupings: Vec<Grouping>,
}

impl Default for HeterogeneityConfig {
    fn default() -> Self {
        Self { groupings: Grouping::ALL.to_vec() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NonparametricConfig {
    pub methods: Vec<Method>,
    /// `None` uses the Silverman rule.
    pub bandwidth: Option<f64>,
    pub grid_points: usize,
    pub loess_span: f64,
    pub spline_penalty: Option<f64>,
}

impl Default for NonparametricConfig {
    fn default() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            bandwidth: None,
            grid_points: boundary_core::nonparametric::DEFAULT_GRID_POINTS,
            loess_span: 0.30,
            spline_penalty: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DidConfig {
    pub treatment: TreatmentSpec,
    /// Keep treat/post flags already present in a loaded file.
    pub use_existing_flags: bool,
    /// Record-level boolean moderators interacted with the post period.
    pub moderators: Vec<ModeratorField>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeratorField {
    Urban,
    Critical,
    Insured,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EventStudyConfig {
    pub bin_weeks: u32,
}

impl Default for EventStudyConfig {
    fn default() -> Self {
        Self { bin_weeks: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpecTestConfig {
    pub resamples: usize,
}

impl Default for SpecTestConfig {
    fn default() -> Self {
        Self { resamples: 500 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub tasks: Vec<NetworkTask>,
    /// Edge list; a uniform line graph is used when absent.
    pub edges: Option<PathBuf>,
    pub stations: Option<PathBuf>,
    pub line_nodes: usize,
    pub line_travel_time: f64,
    pub diffusion: f64,
    pub kappa: f64,
    pub epsilon: f64,
    /// Closure horizon and step, minutes.
    pub closure_horizon: f64,
    pub closure_dt: f64,
    pub snapshot_every: usize,
    /// Distance-response CSV for the functional-form comparison; synthetic when absent.
    pub distance_response: Option<PathBuf>,
    pub synthetic: SyntheticDistanceResponse,
    /// Per-period CSV; the built-in reference periods are used when absent.
    pub periods: Option<PathBuf>,
    pub free_flow_speed: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            tasks: NetworkTask::ALL.to_vec(),
            edges: None,
            stations: None,
            line_nodes: 200,
            line_travel_time: 1.0,
            diffusion: 1.0,
            kappa: 0.156 * 0.156,
            epsilon: 0.5,
            closure_horizon: 30.0,
            closure_dt: 0.1,
            snapshot_every: 50,
            distance_response: None,
            synthetic: SyntheticDistanceResponse::default(),
            periods: None,
            free_flow_speed: boundary_core::network::REFERENCE_PERIODS[0].1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkTask {
    Solve,
    Closure,
    Formtest,
    Sqrtlaw,
}

impl NetworkTask {
    pub const ALL: &'static [NetworkTask] = &[NetworkTask::Solve, NetworkTask::Closure, NetworkTask::Formtest, NetworkTask::Sqrtlaw];
}

/// `ΔRT = β₀ (e^{κ_eff d} − 1) + noise` on evenly spaced distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticDistanceResponse {
    pub n: usize,
    pub max_distance: f64,
    pub kappa_eff: f64,
    pub beta0: f64,
    pub noise_sd: f64,
}

impl Default for SyntheticDistanceResponse {
    fn default() -> Self {
        Self { n: 500, max_distance: 15.0, kappa_eff: 0.156, beta0: 3.0, noise_sd: 0.5 }
    }
}

impl RunConfig {
    /// Parses by extension: `.json` as JSON, anything else as TOML.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        let bad = |message: String| LabError::Config { path: path.into(), message };
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let cfg: RunConfig = if is_json {
            serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?
        } else {
            toml::from_str(&text).map_err(|e| bad(e.to_string()))?
        };
        cfg.validate().map_err(|e| bad(e.to_string()))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.simulation.validate()?;
        let usage = |m: &str| Err(LabError::Usage(m.into()));
        if !(self.fit.epsilon > 0.0 && self.fit.epsilon < 1.0) {
            return usage("fit.epsilon must lie in (0, 1)");
        }
        if self.nonparametric.grid_points < 2 {
            return usage("nonparametric.grid_points must be at least 2");
        }
        if self.eventstudy.bin_weeks == 0 {
            return usage("eventstudy.bin_weeks must be at least 1");
        }
        if self.network.line_nodes < 2 || self.network.snapshot_every == 0 {
            return usage("network.line_nodes must be at least 2 and snapshot_every positive");
        }
        Ok(())
    }

    /// Canonical JSON used for hashing and for the manifest.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
