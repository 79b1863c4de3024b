//! TOML experiment configuration. All angles are degrees.
//!
//! ```toml
//! [geometry]
//! num_sensors = 40
//! spacing = 0.5            # in carrier wavelengths
//!
//! [scenario]
//! doas_deg = [13.0, 15.0, 17.0, 19.0]
//! known_doas_deg = [17.0, 19.0]
//! num_snapshots = 10
//!
//! [sweep]
//! snr_start_db = -10.0
//! snr_stop_db = 20.0
//! snr_step_db = 2.5
//! trials = 100
//! base_seed = 1
//! estimators = ["esprit", "iesprit", "two_step_kai"]
//!
//! [output]
//! dir = "out"
//! name = "fig1"
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use crate::array::{noise_variance_from_snr_db, ArrayGeometry, SourceScenario};
use crate::error::{DoaError, Result};
use crate::kai::DEFAULT_INCREMENT;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimator {
    Esprit,
    Iesprit,
    TwoStepKai,
}

impl Estimator {
    pub const ALL: [Estimator; 3] = [Estimator::Esprit, Estimator::Iesprit, Estimator::TwoStepKai];

    pub fn name(&self) -> &'static str {
        match self {
            Estimator::Esprit => "esprit",
            Estimator::Iesprit => "iesprit",
            Estimator::TwoStepKai => "two_step_kai",
        }
    }

    /// Whether the estimator runs a reliability-factor sweep.
    pub fn sweeps_mu(&self) -> bool {
        !matches!(self, Estimator::Esprit)
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Estimator {
    type Err = DoaError;

    fn from_str(s: &str) -> Result<Self> {
        Estimator::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| DoaError::Config(format!("unknown estimator `{s}`")))
    }
}

/// Which sources enter the RMSE and the resolution test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RmseSources {
    /// Only the DOAs not given as prior knowledge.
    Unknown,
    All,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    geometry: RawGeometry,
    scenario: RawScenario,
    sweep: RawSweep,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeometry {
    num_sensors: usize,
    #[serde(default = "half")]
    spacing: f64,
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    doas_deg: Vec<f64>,
    #[serde(default)]
    known_doas_deg: Vec<f64>,
    num_snapshots: usize,
    num_sources: Option<usize>,
    source_powers: Option<Vec<f64>>,
    noise_variance: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    #[serde(default = "default_snr_start")]
    snr_start_db: f64,
    #[serde(default = "default_snr_stop")]
    snr_stop_db: f64,
    #[serde(default = "default_snr_step")]
    snr_step_db: f64,
    trials: usize,
    #[serde(default)]
    base_seed: u64,
    estimators: Option<Vec<String>>,
    #[serde(default = "default_increment")]
    increment: f64,
    #[serde(default = "default_rmse_sources")]
    rmse_sources: RmseSources,
    #[serde(default = "default_parallel")]
    parallel: bool,
}

fn default_snr_start() -> f64 {
    -10.0
}
fn default_snr_stop() -> f64 {
    20.0
}
fn default_snr_step() -> f64 {
    2.5
}
fn default_increment() -> f64 {
    DEFAULT_INCREMENT
}
fn default_rmse_sources() -> RmseSources {
    RmseSources::Unknown
}
fn default_parallel() -> bool {
    true
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    #[serde(default = "default_dir")]
    dir: PathBuf,
    #[serde(default = "default_name")]
    name: String,
}

impl Default for RawOutput {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            name: default_name(),
        }
    }
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_name() -> String {
    "sweep".into()
}

/// Validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub geometry: ArrayGeometry,
    pub doas_deg: Vec<f64>,
    pub known_doas_deg: Vec<f64>,
    pub num_snapshots: usize,
    pub source_powers: Vec<f64>,
    /// Replaces the SNR-derived noise variance at every grid point.
    pub noise_variance_override: Option<f64>,
    pub snr_grid_db: Vec<f64>,
    pub trials: usize,
    pub base_seed: u64,
    pub estimators: Vec<Estimator>,
    pub increment: f64,
    pub rmse_sources: RmseSources,
    pub parallel: bool,
    pub output_dir: PathBuf,
    pub output_name: String,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| DoaError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| DoaError::Config(e.to_string()))?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawConfig) -> Result<Self> {
        let cfg_err = |m: String| DoaError::Config(m);
        let geometry = ArrayGeometry::new(raw.geometry.num_sensors, raw.geometry.spacing, 1.0)
            .map_err(|e| cfg_err(e.to_string()))?;

        let sc = raw.scenario;
        let p = sc.doas_deg.len();
        if let Some(n) = sc.num_sources {
            if n != p {
                return Err(cfg_err(format!("num_sources = {n} but {p} DOAs listed")));
            }
        }
        let source_powers = sc.source_powers.unwrap_or_else(|| vec![1.0; p]);

        let sw = raw.sweep;
        if sw.trials == 0 {
            return Err(cfg_err("trials must be at least 1".into()));
        }
        let snr_grid_db = snr_grid(sw.snr_start_db, sw.snr_stop_db, sw.snr_step_db)?;
        let estimators = match sw.estimators {
            Some(names) => names.iter().map(|n| n.parse()).collect::<Result<Vec<_>>>()?,
            None => Estimator::ALL.to_vec(),
        };
        if estimators.is_empty() {
            return Err(cfg_err("estimator list is empty".into()));
        }
        if !(sw.increment > 0.0 && sw.increment <= 1.0) {
            return Err(cfg_err(format!("increment must lie in (0, 1], got {}", sw.increment)));
        }

        let cfg = Self {
            geometry,
            doas_deg: sc.doas_deg,
            known_doas_deg: sc.known_doas_deg,
            num_snapshots: sc.num_snapshots,
            source_powers,
            noise_variance_override: sc.noise_variance,
            snr_grid_db,
            trials: sw.trials,
            base_seed: sw.base_seed,
            estimators,
            increment: sw.increment,
            rmse_sources: sw.rmse_sources,
            parallel: sw.parallel,
            output_dir: raw.output.dir,
            output_name: raw.output.name,
        };
        // surfaces scenario errors (ordering, P < M, known subset) up front
        cfg.scenario_at(cfg.snr_grid_db[0])?;
        Ok(cfg)
    }

    pub fn num_sources(&self) -> usize {
        self.doas_deg.len()
    }

    pub fn doas(&self) -> Vec<f64> {
        self.doas_deg.iter().map(|d| d.to_radians()).collect()
    }

    pub fn known_doas(&self) -> Vec<f64> {
        self.known_doas_deg.iter().map(|d| d.to_radians()).collect()
    }

    /// Positions of the known DOAs within `doas_deg`.
    pub fn known_indices(&self) -> Result<Vec<usize>> {
        self.known_doas_deg
            .iter()
            .map(|k| {
                self.doas_deg
                    .iter()
                    .position(|d| (d - k).abs() < 1e-9)
                    .ok_or_else(|| DoaError::Config(format!("known DOA {k} is not among the scenario DOAs")))
            })
            .collect()
    }

    pub fn noise_variance_at(&self, snr_db: f64) -> f64 {
        self.noise_variance_override
            .unwrap_or_else(|| noise_variance_from_snr_db(snr_db))
    }

    pub fn scenario_at(&self, snr_db: f64) -> Result<SourceScenario> {
        let scenario = SourceScenario::new(
            self.doas(),
            self.source_powers.clone(),
            self.noise_variance_at(snr_db),
            self.num_snapshots,
            self.known_indices()?,
        )
        .map_err(|e| DoaError::Config(e.to_string()))?;
        scenario
            .check_geometry(&self.geometry)
            .map_err(|e| DoaError::Config(e.to_string()))?;
        Ok(scenario)
    }

    pub fn csv_path(&self) -> PathBuf {
        self.output_dir.join(format!("{}.csv", self.output_name))
    }
}

/// `start, start + step, ...` up to `stop` inclusive (with a small tolerance).
pub fn snr_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !start.is_finite() || !stop.is_finite() || stop < start {
        return Err(DoaError::Config(format!("empty SNR grid {start}:{step}:{stop}")));
    }
    if start == stop {
        return Ok(vec![start]);
    }
    if !(step > 0.0) || !step.is_finite() {
        return Err(DoaError::Config(format!("SNR step must be positive, got {step}")));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|k| start + k as f64 * step).collect())
}
