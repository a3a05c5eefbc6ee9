//! Flat `key = value` experiment files.
//!
//! ```text
//! # comments run to end of line
//! system.bs_power_dbm = 30
//! hyper.n_epochs = 150
//! experiment.sweep = si_db
//! experiment.values = -90, -60, -30
//! experiment.scenarios = 3, fpa
//! ```
//!
//! Power-like keys are given in dB or dBm and stored linear.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::{db_to_linear, dbm_to_watts, Scenario, SystemConfig};
use crate::error::{Error, Result};
use crate::gml::GmlHyperParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    BsPowerDbm,
    UePowerDbm,
    SiDb,
    DlRateThreshold,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::BsPowerDbm => "bs_power_dbm",
            SweepAxis::UePowerDbm => "ue_power_dbm",
            SweepAxis::SiDb => "si_db",
            SweepAxis::DlRateThreshold => "dl_rate_threshold",
        }
    }

    /// Copy of `base` with this axis set to `value`.
    pub fn apply(self, base: &SystemConfig, value: f64) -> SystemConfig {
        let mut cfg = base.clone();
        match self {
            SweepAxis::BsPowerDbm => cfg.p_bs = dbm_to_watts(value),
            SweepAxis::UePowerDbm => cfg.p_ue_max = dbm_to_watts(value),
            SweepAxis::SiDb => cfg.si_power = db_to_linear(value),
            SweepAxis::DlRateThreshold => cfg.rate_th_dl = value,
        }
        cfg
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "bs_power_dbm" => Ok(SweepAxis::BsPowerDbm),
            "ue_power_dbm" => Ok(SweepAxis::UePowerDbm),
            "si_db" => Ok(SweepAxis::SiDb),
            "dl_rate_threshold" => Ok(SweepAxis::DlRateThreshold),
            other => Err(format!("unknown sweep axis {other:?}")),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputFormat {
    #[default]
    Csv,
    JsonLines,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "jsonl" | "json-lines" | "jsonlines" => Ok(OutputFormat::JsonLines),
            other => Err(format!("unknown output format {other:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub system: SystemConfig,
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub scenarios: Vec<Scenario>,
    pub n_realizations: usize,
    pub seed0: u64,
    pub hyper: GmlHyperParams,
    pub output: Option<PathBuf>,
    pub format: OutputFormat,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            system: SystemConfig::default(),
            axis: SweepAxis::BsPowerDbm,
            values: vec![30.0],
            scenarios: Scenario::ALL.to_vec(),
            n_realizations: 1,
            seed0: 0,
            hyper: GmlHyperParams::default(),
            output: None,
            format: OutputFormat::Csv,
        }
    }
}

fn num<T: FromStr>(v: &str) -> std::result::Result<T, String> {
    v.trim().parse().map_err(|_| format!("cannot parse {v:?}"))
}

fn flag(v: &str) -> std::result::Result<bool, String> {
    match v.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        other => Err(format!("expected a boolean, got {other:?}")),
    }
}

fn list<T: FromStr>(v: &str) -> std::result::Result<Vec<T>, String> {
    v.split(',').filter(|s| !s.trim().is_empty()).map(num).collect()
}

impl ExperimentSpec {
    /// Parses a spec file body on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let spec_err = |msg: String| Error::Spec { line: i + 1, msg };
            let (key, value) =
                line.split_once('=').ok_or_else(|| spec_err(format!("expected key = value, got {line:?}")))?;
            spec.set(key.trim(), value.trim()).map_err(spec_err)?;
        }
        spec.validate()?;
        Ok(spec)
    }

    /// Sets one dotted key.
    pub fn set(&mut self, key: &str, v: &str) -> std::result::Result<(), String> {
        let (section, name) = key.split_once('.').ok_or_else(|| format!("key {key:?} has no section"))?;
        match section {
            "system" => self.set_system(name, v),
            "hyper" => self.set_hyper(name, v),
            "experiment" => self.set_experiment(name, v),
            other => Err(format!("unknown section {other:?}")),
        }
    }

    fn set_system(&mut self, name: &str, v: &str) -> std::result::Result<(), String> {
        let s = &mut self.system;
        match name {
            "n_t" => s.n_t = num(v)?,
            "n_r" => s.n_r = num(v)?,
            "n_dl" => s.n_dl = num(v)?,
            "n_ul" => s.n_ul = num(v)?,
            "n_paths" => s.n_paths = num(v)?,
            "wavelength" => s.wavelength = num(v)?,
            "region_half" => s.region_half = num(v)?,
            "min_spacing" => s.min_spacing = num(v)?,
            "cell_size" => s.cell_size = num(v)?,
            "g0_db" => s.g0 = db_to_linear(num(v)?),
            "g0_xlink_db" => s.g0_xlink = db_to_linear(num(v)?),
            "alpha" => s.alpha = num(v)?,
            "alpha_xlink" => s.alpha_xlink = num(v)?,
            "si_db" => s.si_power = db_to_linear(num(v)?),
            "noise_dl_dbm" => s.noise_dl = dbm_to_watts(num(v)?),
            "noise_ul_dbm" => s.noise_ul = dbm_to_watts(num(v)?),
            "bs_power_dbm" => s.p_bs = dbm_to_watts(num(v)?),
            "ue_power_dbm" => s.p_ue_max = dbm_to_watts(num(v)?),
            "rate_th_dl" => s.rate_th_dl = num(v)?,
            "rate_th_ul" => s.rate_th_ul = num(v)?,
            "decoding_order" => s.decoding_order = Some(list(v)?),
            "literal_interference" => s.literal_interference = flag(v)?,
            "project_only_if_exceeded" => s.project_only_if_exceeded = flag(v)?,
            other => return Err(format!("unknown system key {other:?}")),
        }
        Ok(())
    }

    fn set_hyper(&mut self, name: &str, v: &str) -> std::result::Result<(), String> {
        let h = &mut self.hyper;
        let lr_slot = |n: &str| ["lr_p", "lr_w", "lr_z", "lr_c", "lr_u"].iter().position(|k| *k == n);
        match name {
            "n_inner" => h.n_inner = num(v)?,
            "n_outer" => h.n_outer = num(v)?,
            "n_epochs" => h.n_epochs = num(v)?,
            "gamma" => h.gamma = num(v)?,
            "rho1" => h.penalties.rho1 = num(v)?,
            "rho2" => h.penalties.rho2 = num(v)?,
            "rho3" => h.penalties.rho3 = num(v)?,
            "rho4" => h.penalties.rho4 = num(v)?,
            "lr" => h.learning_rates = [num(v)?; 5],
            "hidden" => h.hidden = num(v)?,
            "normalize_inputs" => h.normalize_inputs = flag(v)?,
            "step_scale" => h.step_scale = num(v)?,
            "position_gain" => h.position_gain = num(v)?,
            other => match lr_slot(other) {
                Some(k) => h.learning_rates[k] = num(v)?,
                None => return Err(format!("unknown hyper key {other:?}")),
            },
        }
        Ok(())
    }

    fn set_experiment(&mut self, name: &str, v: &str) -> std::result::Result<(), String> {
        match name {
            "sweep" => self.axis = v.parse()?,
            "values" => self.values = list(v)?,
            "scenarios" => {
                self.scenarios = v
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| s.parse::<Scenario>().map_err(|e| e.to_string()))
                    .collect::<std::result::Result<_, _>>()?
            }
            "realizations" => self.n_realizations = num(v)?,
            "seed0" => self.seed0 = num(v)?,
            "output" => self.output = Some(PathBuf::from(v.trim())),
            "format" => self.format = v.parse()?,
            other => return Err(format!("unknown experiment key {other:?}")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::Config("sweep value list is empty".into()));
        }
        if self.scenarios.is_empty() {
            return Err(Error::Config("scenario list is empty".into()));
        }
        if self.n_realizations == 0 {
            return Err(Error::Config("at least one realization is required".into()));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("sweep values must be finite".into()));
        }
        for &v in &self.values {
            self.axis.apply(&self.system, v).validate()?;
        }
        self.hyper.validate()
    }

    /// Number of records the spec produces.
    pub fn record_count(&self) -> usize {
        self.values.len() * self.scenarios.len() * self.n_realizations
    }
}

/// Spec file equivalent to [`ExperimentSpec::default`].
pub const DEFAULT_SPEC_TEXT: &str = "\
# system (powers in dBm, gains and SI in dB, lengths in metres)
system.n_t = 4
system.n_r = 4
system.n_dl = 2
system.n_ul = 2
system.n_paths = 6
system.wavelength = 0.01
system.region_half = 0.02
system.min_spacing = 0.005
system.cell_size = 200
system.g0_db = -40
system.g0_xlink_db = -50
system.alpha = 2.8
system.alpha_xlink = 3.5
system.si_db = -90
system.noise_dl_dbm = -90
system.noise_ul_dbm = -90
system.bs_power_dbm = 30
system.ue_power_dbm = 23
system.rate_th_dl = 1
system.rate_th_ul = 1
system.literal_interference = false
system.project_only_if_exceeded = false

# meta-learner
hyper.n_inner = 5
hyper.n_outer = 2
hyper.n_epochs = 300
hyper.gamma = 0.001
hyper.rho1 = 10
hyper.rho2 = 10
hyper.rho3 = 10
hyper.rho4 = 10000
hyper.lr = 0.001
hyper.hidden = 200
hyper.normalize_inputs = true
hyper.step_scale = 1
hyper.position_gain = 10

# experiment
experiment.sweep = bs_power_dbm
experiment.values = 30
experiment.scenarios = 1, 2, 3, fpa
experiment.realizations = 1
experiment.seed0 = 0
experiment.format = csv
";
