//! Experiment configuration: TOML with `[run]`, `[sensor]` and `[ga]` tables.

use std::path::{Path, PathBuf};

use anyhow::Result;
use cislunar_core::ekf::{NoiseModel, TrackSetup};
use cislunar_core::measurement::{Fidelity, SensorSpec, INDIVIDUAL_CADENCE_TU, MAX_RANGE_KM};
use cislunar_core::optimizer::GaConfig;
use cislunar_core::tasking::{build_schedule, Procedure};
use cislunar_core::{constants::arcsec_to_rad, CanonicalConstants, IntegratorConfig, Propagator};
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

/// Environment variable overriding `run.seed`.
pub const SEED_ENV: &str = "SDA_SEED";

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data")
}

/// Path of a bundled fixture.
pub fn fixture(name: &str) -> PathBuf {
    data_dir().join(name)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    pub procedure: Procedure,
    pub n_observers: usize,
    pub horizon_tu: f64,
    pub sigma_dyn: f64,
    /// Multiplier on the initial-estimate perturbation.
    pub init_error_scale: f64,
    pub slots_per_orbit: usize,
    pub si_max: f64,
    pub period_max: f64,
    pub failure_penalty_km: f64,
    pub dro_split: Option<f64>,
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Optimization target set.
    pub targets: Option<PathBuf>,
    /// Catalog the observer slots are generated from.
    pub observer_catalog: Option<PathBuf>,
    /// Explicit slot file; takes precedence over `observer_catalog`.
    pub slots: Option<PathBuf>,
    pub validation_catalog: Option<PathBuf>,
    pub constellation: Option<PathBuf>,
    /// Row group (`stp` column) selected from the constellation file.
    pub constellation_group: Option<String>,
    pub output: PathBuf,
    pub threads: Option<usize>,
}

impl Default for RunSection {
    fn default() -> Self {
        let filter = cislunar_core::catalog::FilterCriteria::default();
        Self {
            seed: 0,
            procedure: Procedure::StpB,
            n_observers: 4,
            horizon_tu: 8.0,
            sigma_dyn: 1e-5,
            init_error_scale: 1.0,
            slots_per_orbit: 5,
            si_max: filter.si_max,
            period_max: filter.period_max,
            failure_penalty_km: cislunar_core::harness::DEFAULT_FAILURE_PENALTY_KM,
            dro_split: Some(cislunar_core::catalog::DRO_SPLIT_PERIOD),
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            targets: None,
            observer_catalog: None,
            slots: None,
            validation_catalog: None,
            constellation: None,
            constellation_group: None,
            output: PathBuf::from("sda-out"),
            threads: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorSection {
    pub fidelity: Fidelity,
    /// Overrides the fidelity's angle noise when set.
    pub sigma_angle_arcsec: Option<f64>,
    pub max_range_km: f64,
    pub cadence_tu: f64,
}

impl Default for SensorSection {
    fn default() -> Self {
        Self {
            fidelity: Fidelity::Low,
            sigma_angle_arcsec: None,
            max_range_km: MAX_RANGE_KM,
            cadence_tu: INDIVIDUAL_CADENCE_TU,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaSection {
    pub population: usize,
    pub crossover_fraction: f64,
    pub max_generations: Option<usize>,
    pub stall_generations: usize,
    pub stall_tolerance: f64,
    pub elite_count: Option<usize>,
    pub duplicate_retries: usize,
    pub use_cache: bool,
    /// Defaults to the run seed.
    pub seed: Option<u64>,
}

impl Default for GaSection {
    fn default() -> Self {
        let d = GaConfig::default();
        Self {
            population: d.population,
            crossover_fraction: d.crossover_fraction,
            max_generations: d.max_generations,
            stall_generations: d.stall_generations,
            stall_tolerance: d.stall_tolerance,
            elite_count: d.elite_count,
            duplicate_retries: d.duplicate_retries,
            use_cache: d.use_cache,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub sensor: SensorSection,
    pub ga: GaSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| ConfigError::new(format!("invalid config: {e}")).into())
    }

    /// Loads a config file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let r = &mut cfg.run;
        for p in
            [&mut r.targets, &mut r.observer_catalog, &mut r.slots, &mut r.validation_catalog, &mut r.constellation]
                .into_iter()
                .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if r.output.is_relative() {
            r.output = base.join(&r.output);
        }
        Ok(cfg)
    }

    /// Applies `SDA_SEED` when set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.run.seed = v
                .trim()
                .parse()
                .map_err(|_| ConfigError::new(format!("{SEED_ENV}='{v}' is not an unsigned integer")))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let r = &self.run;
        let bad = |m: &str| -> Result<()> { Err(ConfigError::new(m).into()) };
        if r.n_observers == 0 {
            return bad("run.n_observers must be at least 1");
        }
        if !(r.horizon_tu > 0.0) || !(self.sensor.cadence_tu > 0.0) {
            return bad("run.horizon_tu and sensor.cadence_tu must be positive");
        }
        if !(r.sigma_dyn >= 0.0) || !(r.init_error_scale >= 0.0) {
            return bad("run.sigma_dyn and run.init_error_scale must be non-negative");
        }
        if r.slots_per_orbit == 0 {
            return bad("run.slots_per_orbit must be at least 1");
        }
        if self.sensor.sigma_angle_arcsec.is_some_and(|s| !(s >= 0.0)) || !(self.sensor.max_range_km > 0.0) {
            return bad("sensor noise must be non-negative and the range positive");
        }
        self.ga_config().validate().map_err(|e| ConfigError::new(e.to_string()))?;
        Ok(())
    }

    pub fn constants(&self) -> CanonicalConstants {
        CanonicalConstants::EARTH_MOON
    }

    pub fn propagator(&self) -> Propagator {
        Propagator::new(self.constants(), IntegratorConfig::with_tolerances(self.run.abs_tol, self.run.rel_tol))
    }

    pub fn sensor_spec(&self) -> SensorSpec {
        let c = self.constants();
        let mut s = SensorSpec::with_fidelity(self.sensor.fidelity, &c);
        if let Some(a) = self.sensor.sigma_angle_arcsec {
            s.sigma_angle = arcsec_to_rad(a);
        }
        s.max_range = c.km_to_du(self.sensor.max_range_km);
        s.individual_cadence = self.sensor.cadence_tu;
        s
    }

    /// Filter setup for `n_observers` under the configured procedure.
    pub fn track_setup(&self, n_observers: usize) -> Result<TrackSetup> {
        let sensor = self.sensor_spec();
        let schedule = build_schedule(self.run.procedure, n_observers, sensor.individual_cadence, self.run.horizon_tu)
            .map_err(|e| ConfigError::new(e.to_string()))?;
        let noise = NoiseModel::new(self.run.sigma_dyn, sensor.individual_cadence)
            .map_err(|e| ConfigError::new(e.to_string()))?
            .with_init_scale(self.run.init_error_scale);
        Ok(TrackSetup { schedule, noise, sensor, propagator: self.propagator() })
    }

    pub fn ga_config(&self) -> GaConfig {
        let g = &self.ga;
        GaConfig {
            population: g.population,
            crossover_fraction: g.crossover_fraction,
            max_generations: g.max_generations,
            stall_generations: g.stall_generations,
            stall_tolerance: g.stall_tolerance,
            elite_count: g.elite_count,
            duplicate_retries: g.duplicate_retries,
            use_cache: g.use_cache,
            seed: g.seed.unwrap_or(self.run.seed),
        }
    }

    pub fn targets_path(&self) -> PathBuf {
        self.run.targets.clone().unwrap_or_else(|| fixture("optimization_set.csv"))
    }

    pub fn observer_catalog_path(&self) -> PathBuf {
        self.run.observer_catalog.clone().unwrap_or_else(|| fixture("validation_pooled.csv"))
    }

    pub fn validation_catalog_path(&self) -> PathBuf {
        self.run.validation_catalog.clone().unwrap_or_else(|| fixture("validation_pooled.csv"))
    }
}
