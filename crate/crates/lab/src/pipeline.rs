//! Staged runs writing tables and a manifest into a per-run directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use boundary_core::causal::{did_2x2, did_interactions, event_study, Moderator};
use boundary_core::data::{compute_effectiveness, coverage_gaps, summarize_dataset, Dataset, EffectivenessSeries, Urgency};
use boundary_core::network::{
    critical_distance, functional_form_test, half_distance, network_distances, sqrt_law_test, stability_bound, steady_state_residual,
    steady_state_solve, synthetic_distance_response, transient_coverage, CoverageField, DiffusionParams, StationSpec, StreetNetwork,
    TimeVaryingDiffusion,
};
use boundary_core::nonparametric::{compare_fit_quality, default_grid, estimate_curve, silverman_bandwidth, KernelConfig};
use boundary_core::parametric::{
    critical_boundary, fit_by_group, fit_exponential_decay, test_group_differences, DecayFit, Grouping, TestTarget,
};
use boundary_core::simulate::{inject_did_treatment, simulate_incidents};
use boundary_core::spectest::residual_specification_test;
use boundary_core::vulnerable::vulnerable_profile;
use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ModeratorField, NetworkTask, RunConfig};
use crate::error::{LabError, Result};
use crate::io::{format_timestamp, load_incidents, save_incidents};
use crate::network_io::{load_distance_response, load_network, load_periods, load_stations, write_coverage};
use crate::tables::*;

pub const ARTIFACT_VERSION: &str = concat!("boundary-lab ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Simulate,
    Fit,
    Heterogeneity,
    Nonparametric,
    Did,
    Eventstudy,
    Spectest,
    Network,
    Report,
}

impl Stage {
    /// Every stage in execution order.
    pub const ALL: &'static [Stage] = &[
        Stage::Simulate,
        Stage::Fit,
        Stage::Heterogeneity,
        Stage::Nonparametric,
        Stage::Did,
        Stage::Eventstudy,
        Stage::Spectest,
        Stage::Network,
        Stage::Report,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Simulate => "simulate",
            Stage::Fit => "fit",
            Stage::Heterogeneity => "heterogeneity",
            Stage::Nonparametric => "nonparametric",
            Stage::Did => "did",
            Stage::Eventstudy => "eventstudy",
            Stage::Spectest => "spectest",
            Stage::Network => "network",
            Stage::Report => "report",
        }
    }

    /// Comma-separated stage names; an empty string is an empty list.
    pub fn parse_list(s: &str) -> Result<Vec<Stage>> {
        s.split(',').map(str::trim).filter(|p| !p.is_empty()).map(Stage::from_str).collect()
    }
}

impl FromStr for Stage {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL.iter().copied().find(|st| st.as_str() == s).ok_or_else(|| {
            let known: Vec<&str> = Stage::ALL.iter().map(|s| s.as_str()).collect();
            LabError::Usage(format!("unknown stage `{s}` (expected one of {})", known.join(", ")))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact_version: String,
    pub schema_version: String,
    pub command: String,
    /// SHA-256 of the command and canonical configuration, output base excluded.
    pub config_hash: String,
    pub seed: u64,
    pub stages: Vec<Stage>,
    pub started_at: String,
    pub finished_at: String,
    pub run_dir: PathBuf,
    /// File names inside `run_dir`, in the order written.
    pub outputs: Vec<String>,
    pub config: serde_json::Value,
}

pub fn config_hash(command: &str, config: &RunConfig) -> String {
    let mut c = config.clone();
    c.out = PathBuf::new();
    let mut h = Sha256::new();
    h.update(ARTIFACT_VERSION.as_bytes());
    h.update([0]);
    h.update(command.as_bytes());
    h.update([0]);
    h.update(c.canonical_json().as_bytes());
    hex::encode(h.finalize())
}

/// Directory a run of `command` under `config` writes into.
pub fn run_dir(command: &str, config: &RunConfig) -> PathBuf {
    config.out.join(format!("run-{}", &config_hash(command, config)[..16]))
}

struct Context<'a> {
    config: &'a RunConfig,
    dir: PathBuf,
    outputs: Vec<String>,
    dataset: Option<Dataset>,
    series: Option<EffectivenessSeries>,
    fit: Option<DecayFit>,
    treated: Option<Dataset>,
}

fn derived_seed(seed: u64, stream: u64) -> u64 {
    seed.wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

impl Context<'_> {
    fn path(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        self.dir.join(name)
    }

    fn json<T: Serialize>(&mut self, table: &str, body: &T) -> Result<()> {
        let p = self.path(&format!("{table}.json"));
        write_json(&p, table, body)
    }

    fn csv(&mut self, name: &str, write: impl FnOnce(fs::File) -> std::result::Result<(), csv::Error>) -> Result<()> {
        let p = self.path(name);
        let file = fs::File::create(&p).map_err(|e| LabError::io(&p, e))?;
        write(file).map_err(|e| LabError::csv(&p, e))
    }

    fn dataset(&mut self) -> Result<&Dataset> {
        if self.dataset.is_none() {
            let ds = match &self.config.input {
                Some(path) => {
                    let report = load_incidents(path, &self.config.columns, self.config.row_policy)?;
                    for e in &report.invalid {
                        eprintln!("warning: {}: skipped {e}", path.display());
                    }
                    report.dataset
                }
                None => {
                    let mut sim = self.config.simulation.clone();
                    sim.seed = self.config.seed;
                    simulate_incidents(&sim)?
                }
            };
            self.dataset = Some(ds);
        }
        Ok(self.dataset.as_ref().unwrap())
    }

    fn info(&mut self) -> Result<DatasetInfo> {
        Ok(DatasetInfo::of(self.dataset()?))
    }

    fn series(&mut self) -> Result<&EffectivenessSeries> {
        if self.series.is_none() {
            let s = compute_effectiveness(self.dataset()?)?;
            self.series = Some(s);
        }
        Ok(self.series.as_ref().unwrap())
    }

    fn fit(&mut self) -> Result<DecayFit> {
        if self.fit.is_none() {
            let f = fit_exponential_decay(self.series()?)?;
            self.fit = Some(f);
        }
        Ok(self.fit.clone().unwrap())
    }

    fn treated(&mut self) -> Result<Dataset> {
        if self.treated.is_none() {
            let seed = derived_seed(self.config.seed, 1);
            let did = &self.config.did;
            let ds = self.dataset()?;
            let keep = did.use_existing_flags && ds.records().iter().all(|r| r.treatment.is_some());
            let t = if keep { ds.clone() } else { inject_did_treatment(ds, &did.treatment, seed)? };
            self.treated = Some(t);
        }
        Ok(self.treated.clone().unwrap())
    }

    fn run(&mut self, stage: Stage) -> Result<()> {
        match stage {
            Stage::Simulate => self.simulate(),
            Stage::Fit => self.decay(),
            Stage::Heterogeneity => self.heterogeneity(),
            Stage::Nonparametric => self.nonparametric(),
            Stage::Did => self.did(),
            Stage::Eventstudy => self.eventstudy(),
            Stage::Spectest => self.spectest(),
            Stage::Network => self.network(),
            Stage::Report => self.report(),
        }
    }

    fn simulate(&mut self) -> Result<()> {
        let ds = self.dataset()?.clone();
        let p = self.path("incidents.csv");
        save_incidents(&p, &ds, &self.config.columns)
    }

    fn decay(&mut self) -> Result<()> {
        let eps = self.config.fit.epsilon;
        let fit = self.fit()?;
        let mut rows = vec![DecayRow::new("all", &fit, critical_boundary(&fit, eps).ok())];
        let by_urgency = fit_by_group(self.dataset()?, Grouping::Urgency, eps)?;
        for u in Urgency::ALL {
            if let Some(g) = by_urgency.groups.iter().find(|g| g.label == u.as_str()) {
                rows.push(DecayRow::new(&g.label, &g.fit, g.boundary));
            }
        }
        let body = DecayTable { dataset: self.info()?, epsilon: eps, rows };
        self.json("decay_params", &body)
    }

    fn heterogeneity(&mut self) -> Result<()> {
        let eps = self.config.fit.epsilon;
        let mut blocks = Vec::new();
        for g in self.config.heterogeneity.groupings.clone() {
            let block = match fit_by_group(self.dataset()?, g, eps) {
                Ok(cmp) => {
                    let tests = [TestTarget::MeanTime, TestTarget::Lambda]
                        .into_iter()
                        .filter_map(|t| test_group_differences(&cmp, t).ok())
                        .collect();
                    HeterogeneityBlock { grouping: g.as_str().into(), groups: cmp.groups, tests, error: None }
                }
                Err(e) => {
                    HeterogeneityBlock { grouping: g.as_str().into(), groups: Vec::new(), tests: Vec::new(), error: Some(e.to_string()) }
                }
            };
            blocks.push(block);
        }
        let body = HeterogeneityTable { dataset: self.info()?, epsilon: eps, groupings: blocks };
        self.json("heterogeneity", &body)
    }

    fn nonparametric(&mut self) -> Result<()> {
        let np = self.config.nonparametric.clone();
        let fit = self.fit()?;
        let series = self.series()?.clone();
        let bandwidth = match np.bandwidth {
            Some(h) => h,
            None => silverman_bandwidth(series.times())?,
        };
        let grid = default_grid(&series, np.grid_points)?;
        let mut curves = Vec::new();
        for m in &np.methods {
            let mut cfg = KernelConfig::new(*m, bandwidth);
            cfg.loess_span = np.loess_span;
            cfg.spline_penalty = np.spline_penalty;
            curves.push(estimate_curve(&series, &cfg, &grid)?);
        }
        let comparison = compare_fit_quality(&series, &fit, &curves);
        let summaries = curves
            .iter()
            .map(|c| CurveSummary {
                method: c.config.method.as_str().into(),
                bandwidth: c.config.bandwidth,
                fallback_points: c.fallback_points.len(),
                selected_penalty: c.selected_penalty,
            })
            .collect();
        let body = NonparametricTable { dataset: self.info()?, grid_points: np.grid_points, curves: summaries, comparison };
        self.json("nonparametric_comparison", &body)?;
        self.csv("nonparametric_curves.csv", |f| write_curves(f, &curves))
    }

    fn did(&mut self) -> Result<()> {
        let treated = self.treated()?;
        let standard = did_2x2(&treated)?;
        let moderators: Vec<Moderator> = self
            .config
            .did
            .moderators
            .iter()
            .map(|m| {
                let (name, f): (&str, fn(&boundary_core::data::IncidentRecord) -> bool) = match m {
                    ModeratorField::Urban => ("urban", |r| r.urban),
                    ModeratorField::Critical => ("critical", |r| r.urgency == Urgency::Critical),
                    ModeratorField::Insured => ("insured", |r| r.has_insurance),
                };
                Moderator { name: name.into(), values: treated.records().iter().map(f).collect() }
            })
            .collect();
        let moderated = if moderators.is_empty() { None } else { Some(did_interactions(&treated, &moderators)?) };
        let injected = (self.config.input.is_none() || !self.config.did.use_existing_flags).then_some(self.config.did.treatment.effect);
        let body = DidTable {
            dataset: DatasetInfo::of(&treated),
            treatment_time: treated.treatment_time().map(format_timestamp),
            injected_effect: injected,
            standard,
            moderated,
        };
        self.json("did_results", &body)
    }

    fn eventstudy(&mut self) -> Result<()> {
        let treated = self.treated()?;
        let result = event_study(&treated, self.config.eventstudy.bin_weeks)?;
        let body =
            EventStudyTable { dataset: DatasetInfo::of(&treated), treatment_time: treated.treatment_time().map(format_timestamp), result };
        self.json("event_study", &body)
    }

    fn spectest(&mut self) -> Result<()> {
        let fit = self.fit()?;
        let seed = derived_seed(self.config.seed, 2);
        let resamples = self.config.spectest.resamples;
        let result = residual_specification_test(self.series()?, &fit, resamples, seed)?;
        let body = SpecTestTable { dataset: self.info()?, seed, lambda: fit.lambda, result };
        self.json("spec_tests", &body)
    }

    fn network(&mut self) -> Result<()> {
        let nc = self.config.network.clone();
        let tasks = &nc.tasks;
        if tasks.contains(&NetworkTask::Solve) || tasks.contains(&NetworkTask::Closure) {
            self.coverage(tasks.contains(&NetworkTask::Closure))?;
        }
        if tasks.contains(&NetworkTask::Formtest) {
            let (source, (d, y)) = match &nc.distance_response {
                Some(p) => (p.display().to_string(), load_distance_response(p)?),
                None => {
                    let s = &nc.synthetic;
                    let seed = derived_seed(self.config.seed, 3);
                    ("synthetic".to_string(), synthetic_distance_response(s.n, s.max_distance, s.kappa_eff, s.beta0, s.noise_sd, seed))
                }
            };
            let comparison = functional_form_test(&d, &y)?;
            let half = comparison.kappa.kappa_eff.and_then(|k| half_distance(k).ok());
            self.json("functional_form", &FormTable { source, comparison, half_distance: half })?;
        }
        if tasks.contains(&NetworkTask::Sqrtlaw) {
            let (source, tv, kappa) = match &nc.periods {
                Some(p) => {
                    let (tv, k) = load_periods(p, nc.free_flow_speed)?;
                    (p.display().to_string(), tv, k)
                }
                None => ("reference".to_string(), TimeVaryingDiffusion::reference(), TimeVaryingDiffusion::reference_kappa_eff()),
            };
            let result = sqrt_law_test(&tv, &kappa)?;
            self.json("time_varying_D-slope", &SqrtLawTable::new(&source, &tv, &kappa, result))?;
        }
        Ok(())
    }

    fn coverage(&mut self, closure: bool) -> Result<()> {
        let nc = self.config.network.clone();
        let (source, net) = match &nc.edges {
            Some(p) => (p.display().to_string(), load_network(p)?),
            None => ("line".to_string(), StreetNetwork::line(nc.line_nodes, nc.line_travel_time)?),
        };
        if !net.is_connected() {
            return Err(LabError::Usage(format!("network {source} is not connected")));
        }
        let stations = match &nc.stations {
            Some(p) => load_stations(p)?,
            None => vec![StationSpec::new(net.labels()[0].clone(), 1.0)],
        };
        let params = DiffusionParams::new(nc.diffusion, nc.kappa)?;
        let steady = steady_state_solve(&net, &params, &stations)?;
        let residual = steady_state_residual(&net, &steady)?;
        let max_relative_error = match (&nc.edges, stations.first()) {
            (None, Some(s)) => Some(line_error(&net, &steady, &params, nc.line_travel_time, &s.node)?),
            _ => None,
        };
        let mut snapshots = vec![steady.clone()];
        if closure {
            let initial = CoverageField { time: Some(0.0), sources: Vec::new(), ..steady.clone() };
            snapshots.extend(transient_coverage(&net, &params, &initial, nc.closure_horizon, nc.closure_dt, nc.snapshot_every)?);
        }
        let body = SteadyStateTable {
            source,
            nodes: net.node_count(),
            edges: net.edge_count(),
            diffusion: params.diffusion,
            kappa: params.kappa,
            kappa_eff: params.kappa_eff(),
            residual_inf: residual,
            critical_distance: critical_distance(&params, nc.epsilon)?,
            epsilon: nc.epsilon,
            max_relative_error,
            closure_snapshots: if closure { snapshots.len() - 1 } else { 0 },
            closure_stability_bound: stability_bound(&net, &params),
        };
        self.json("network_steady_state", &body)?;
        self.csv("network_coverage.csv", |f| write_coverage(f, &net, &snapshots))
    }

    fn report(&mut self) -> Result<()> {
        let info = self.info()?;
        let summary = summarize_dataset(self.dataset()?)?;
        self.json("summary_stats", &SummaryTable { dataset: info.clone(), summary })?;
        let config = self.config;
        let rows = coverage_gaps(self.dataset()?, &config.fit.gap_thresholds)?;
        self.json("coverage_gaps", &GapTable { dataset: info.clone(), rows })?;
        let profile = vulnerable_profile(self.dataset()?)?;
        self.json("vulnerable_pops", &VulnerableTable { dataset: info, profile })
    }
}

/// On a uniform line with spacing `h`, coverage decays at `√(κ / (D h))` per unit distance.
fn line_error(net: &StreetNetwork, u: &CoverageField, p: &DiffusionParams, h: f64, source: &str) -> Result<f64> {
    let d = network_distances(net, source)?;
    let s = net.node_index(source)?;
    let rate = (p.kappa / (p.diffusion * h)).sqrt();
    let reach = 3.0 / rate;
    let mut worst: f64 = 0.0;
    for (i, di) in d.iter().enumerate() {
        if let Some(di) = di.filter(|x| *x <= reach) {
            let expected = (-rate * di).exp();
            worst = worst.max((u.values[i] / u.values[s] / expected - 1.0).abs());
        }
    }
    Ok(worst)
}

/// Runs the configured stages in dependency order and writes `manifest.json`.
pub fn run_pipeline(config: &RunConfig, command: &str) -> Result<RunManifest> {
    config.validate()?;
    let started_at = Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true);
    let dir = run_dir(command, config);
    fs::create_dir_all(&dir).map_err(|e| LabError::io(&dir, e))?;
    let mut stages = config.stages.clone();
    stages.sort();
    stages.dedup();
    let mut ctx = Context { config, dir: dir.clone(), outputs: Vec::new(), dataset: None, series: None, fit: None, treated: None };
    for &stage in &stages {
        ctx.run(stage).map_err(|e| LabError::Stage { stage: stage.as_str(), source: Box::new(e) })?;
    }
    let manifest = RunManifest {
        artifact_version: ARTIFACT_VERSION.into(),
        schema_version: SCHEMA_VERSION.into(),
        command: command.into(),
        config_hash: config_hash(command, config),
        seed: config.seed,
        stages,
        started_at,
        finished_at: Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true),
        run_dir: dir.clone(),
        outputs: ctx.outputs,
        config: serde_json::to_value(config)?,
    };
    write_manifest(&dir, &manifest)?;
    Ok(manifest)
}

fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<()> {
    let p = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    fs::write(&p, text).map_err(|e| LabError::io(&p, e))
}
