//! TOML run configuration.
//!
//! A file names one experiment and may carry a table for it; every field of
//! that table is optional and falls back to the driver default. Physical
//! values must carry a unit (see [`crate::units`]).

use std::fmt;
use std::path::{Path, PathBuf};

use rydex::experiments::{BoundConfig, ChernConfig, DeriveConfig, Engine, HrsConfig, PumpConfig, TransferConfig};
use serde::{Deserialize, Serialize};

use crate::units::{Frequency, Length, Time};

#[derive(Debug)]
pub struct ConfigError {
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err(message: impl Into<String>) -> ConfigError {
    ConfigError { message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Transfer,
    Pump,
    Bound,
    Hrs,
    Chern,
    Derive,
    Validate,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Transfer => "transfer",
            Experiment::Pump => "pump",
            Experiment::Bound => "bound",
            Experiment::Hrs => "hrs",
            Experiment::Chern => "chern",
            Experiment::Derive => "derive",
            Experiment::Validate => "validate",
        }
    }

    fn takes_engines(self) -> bool {
        matches!(self, Experiment::Pump | Experiment::Bound | Experiment::Hrs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: PathBuf::from("out"), formats: vec![Format::Csv, Format::Json, Format::Svg] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransferSection {
    pub n: usize,
    pub omega: Frequency,
    pub delta: Frequency,
    pub v_ratio: f64,
    pub spacing: Length,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base_rate: Option<Frequency>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<Frequency>,
    pub sigma: Length,
    pub ensemble: usize,
    pub exact_ensemble: usize,
    pub sigma_scan: Vec<Length>,
    pub samples_per_transfer: usize,
    pub window: f64,
}

impl Default for TransferSection {
    fn default() -> Self {
        let c = TransferConfig::default();
        TransferSection {
            n: c.n,
            omega: Frequency(c.omega),
            delta: Frequency(c.delta),
            v_ratio: c.v_ratio,
            spacing: Length(c.spacing),
            base_rate: c.base_rate.map(Frequency),
            mu: c.mu.map(Frequency),
            sigma: Length(c.sigma),
            ensemble: c.ensemble,
            exact_ensemble: c.exact_ensemble,
            sigma_scan: c.sigma_scan.into_iter().map(Length).collect(),
            samples_per_transfer: c.samples_per_transfer,
            window: c.window,
        }
    }
}

impl TransferSection {
    pub fn to_core(&self, seed: u64) -> TransferConfig {
        TransferConfig {
            n: self.n,
            omega: self.omega.0,
            delta: self.delta.0,
            v_ratio: self.v_ratio,
            spacing: self.spacing.0,
            base_rate: self.base_rate.map(|f| f.0),
            mu: self.mu.map(|f| f.0),
            sigma: self.sigma.0,
            ensemble: self.ensemble,
            exact_ensemble: self.exact_ensemble,
            sigma_scan: self.sigma_scan.iter().map(|l| l.0).collect(),
            seed,
            samples_per_transfer: self.samples_per_transfer,
            window: self.window,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PumpSection {
    pub n: usize,
    pub omega: Frequency,
    pub delta: Frequency,
    pub v_ratio: f64,
    pub spacing: Length,
    pub period: Time,
    pub steepness: f64,
    pub cell: usize,
    pub samples: usize,
    pub dt_max: Time,
    pub fast_fraction: f64,
    pub spread_threshold: f64,
}

impl Default for PumpSection {
    fn default() -> Self {
        let c = PumpConfig::default();
        PumpSection {
            n: c.n,
            omega: Frequency(c.omega),
            delta: Frequency(c.delta),
            v_ratio: c.v_ratio,
            spacing: Length(c.spacing),
            period: Time(c.period),
            steepness: c.steepness,
            cell: c.cell,
            samples: c.samples,
            dt_max: Time(c.dt_max),
            fast_fraction: c.fast_fraction,
            spread_threshold: c.spread_threshold,
        }
    }
}

impl PumpSection {
    pub fn to_core(&self, engines: Option<&[Engine]>) -> PumpConfig {
        let d = PumpConfig::default();
        PumpConfig {
            n: self.n,
            omega: self.omega.0,
            delta: self.delta.0,
            v_ratio: self.v_ratio,
            spacing: self.spacing.0,
            period: self.period.0,
            steepness: self.steepness,
            cell: self.cell,
            samples: self.samples,
            dt_max: self.dt_max.0,
            engines: engines.map_or(d.engines, <[Engine]>::to_vec),
            fast_fraction: self.fast_fraction,
            spread_threshold: self.spread_threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundSection {
    pub omega: Frequency,
    pub spacing: Length,
    pub dimer_n: usize,
    pub dimer_delta: Frequency,
    pub dimer_v_ratio: f64,
    pub dimer_site: usize,
    pub dimer_t_final: Time,
    pub dimer_floor: f64,
    pub pair_n: usize,
    pub pair_delta: Frequency,
    pub pair_v_ratio: f64,
    pub pair_site: usize,
    pub pair_time: Time,
    pub gamma: Frequency,
    pub samples: usize,
    pub trajectories: usize,
    pub max_excitations: usize,
}

impl Default for BoundSection {
    fn default() -> Self {
        let c = BoundConfig::default();
        BoundSection {
            omega: Frequency(c.omega),
            spacing: Length(c.spacing),
            dimer_n: c.dimer_n,
            dimer_delta: Frequency(c.dimer_delta),
            dimer_v_ratio: c.dimer_v_ratio,
            dimer_site: c.dimer_site,
            dimer_t_final: Time(c.dimer_t_final),
            dimer_floor: c.dimer_floor,
            pair_n: c.pair_n,
            pair_delta: Frequency(c.pair_delta),
            pair_v_ratio: c.pair_v_ratio,
            pair_site: c.pair_site,
            pair_time: Time(c.pair_time),
            gamma: Frequency(c.dephasing()),
            samples: c.samples,
            trajectories: c.trajectories,
            max_excitations: c.max_excitations,
        }
    }
}

impl BoundSection {
    pub fn to_core(&self, seed: u64, engines: Option<&[Engine]>) -> BoundConfig {
        let d = BoundConfig::default();
        BoundConfig {
            omega: self.omega.0,
            spacing: self.spacing.0,
            dimer_n: self.dimer_n,
            dimer_delta: self.dimer_delta.0,
            dimer_v_ratio: self.dimer_v_ratio,
            dimer_site: self.dimer_site,
            dimer_t_final: self.dimer_t_final.0,
            dimer_floor: self.dimer_floor,
            pair_n: self.pair_n,
            pair_delta: self.pair_delta.0,
            pair_v_ratio: self.pair_v_ratio,
            pair_site: self.pair_site,
            pair_time: self.pair_time.0,
            gamma: self.gamma.0,
            gamma_times_two_pi: false,
            samples: self.samples,
            trajectories: self.trajectories,
            seed,
            max_excitations: self.max_excitations,
            engines: engines.map_or(d.engines, <[Engine]>::to_vec),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HrsSection {
    pub omega: Frequency,
    pub delta: Frequency,
    pub v_ratio: f64,
    pub spacing: Length,
    pub hopping_range: usize,
    pub gammas: Vec<Frequency>,
    pub hrs_sites: usize,
    pub hrs_t_final: Time,
    pub exact_n: usize,
    pub exact_t_final: Time,
    pub samples: usize,
    pub trajectories: usize,
    pub max_excitations: usize,
    pub boundary_tolerance: f64,
    pub law_tolerance: f64,
    pub compare_from: Time,
    pub decay_kappa: Frequency,
    pub decay_gamma: Frequency,
    pub decay_detuning_ratio: f64,
    pub decay_n: usize,
    pub decay_t_final: Time,
}

impl Default for HrsSection {
    fn default() -> Self {
        let c = HrsConfig::default();
        assert!(!c.gamma_times_two_pi, "driver defaults are in rad/us");
        HrsSection {
            omega: Frequency(c.omega),
            delta: Frequency(c.delta),
            v_ratio: c.v_ratio,
            spacing: Length(c.spacing),
            hopping_range: c.hopping_range,
            gammas: c.gammas.into_iter().map(Frequency).collect(),
            hrs_sites: c.hrs_sites,
            hrs_t_final: Time(c.hrs_t_final),
            exact_n: c.exact_n,
            exact_t_final: Time(c.exact_t_final),
            samples: c.samples,
            trajectories: c.trajectories,
            max_excitations: c.max_excitations,
            boundary_tolerance: c.boundary_tolerance,
            law_tolerance: c.law_tolerance,
            compare_from: Time(c.compare_from),
            decay_kappa: Frequency(c.decay_kappa),
            decay_gamma: Frequency(c.decay_gamma),
            decay_detuning_ratio: c.decay_detuning_ratio,
            decay_n: c.decay_n,
            decay_t_final: Time(c.decay_t_final),
        }
    }
}

impl HrsSection {
    pub fn to_core(&self, seed: u64, engines: Option<&[Engine]>) -> HrsConfig {
        let d = HrsConfig::default();
        HrsConfig {
            omega: self.omega.0,
            delta: self.delta.0,
            v_ratio: self.v_ratio,
            spacing: self.spacing.0,
            hopping_range: self.hopping_range,
            gammas: self.gammas.iter().map(|g| g.0).collect(),
            gamma_times_two_pi: false,
            hrs_sites: self.hrs_sites,
            hrs_t_final: self.hrs_t_final.0,
            exact_n: self.exact_n,
            exact_t_final: self.exact_t_final.0,
            samples: self.samples,
            trajectories: self.trajectories,
            seed,
            max_excitations: self.max_excitations,
            boundary_tolerance: self.boundary_tolerance,
            law_tolerance: self.law_tolerance,
            compare_from: self.compare_from.0,
            decay_kappa: self.decay_kappa.0,
            decay_gamma: self.decay_gamma.0,
            decay_detuning_ratio: self.decay_detuning_ratio,
            decay_n: self.decay_n,
            decay_t_final: self.decay_t_final.0,
            engines: engines.map_or(d.engines, <[Engine]>::to_vec),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChernSection {
    pub omega: Frequency,
    pub delta: Frequency,
    pub v_ratio: f64,
    pub nnn: bool,
    pub grids: Vec<usize>,
    pub expected: Vec<i64>,
}

impl Default for ChernSection {
    fn default() -> Self {
        let c = ChernConfig::default();
        ChernSection { omega: Frequency(c.omega), delta: Frequency(c.delta), v_ratio: c.v_ratio, nnn: c.nnn, grids: c.grids, expected: c.expected }
    }
}

impl ChernSection {
    pub fn to_core(&self) -> ChernConfig {
        ChernConfig {
            omega: self.omega.0,
            delta: self.delta.0,
            v_ratio: self.v_ratio,
            nnn: self.nnn,
            grids: self.grids.clone(),
            expected: self.expected.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeriveSection {
    pub n: usize,
    pub omega: Frequency,
    pub delta: Frequency,
    pub v_ratio: f64,
    pub spacing: Length,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub range: Option<usize>,
}

impl Default for DeriveSection {
    fn default() -> Self {
        let c = DeriveConfig::default();
        DeriveSection { n: c.n, omega: Frequency(c.omega), delta: Frequency(c.delta), v_ratio: c.v_ratio, spacing: Length(c.spacing), range: c.range }
    }
}

impl DeriveSection {
    pub fn to_core(&self) -> DeriveConfig {
        DeriveConfig { n: self.n, omega: self.omega.0, delta: self.delta.0, v_ratio: self.v_ratio, spacing: self.spacing.0, range: self.range }
    }
}

/// Scalars first: TOML cannot place a bare key after a table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub engines: Option<Vec<Engine>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transfer: Option<TransferSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pump: Option<PumpSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<BoundSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hrs: Option<HrsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chern: Option<ChernSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derive: Option<DeriveSection>,
}

/// A config with every default filled in, plus the dotted keys that came
/// from defaults rather than from the file.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub config: RunConfig,
    pub defaulted: Vec<String>,
}

impl RunConfig {
    fn present_sections(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        for (name, present) in [
            ("transfer", self.transfer.is_some()),
            ("pump", self.pump.is_some()),
            ("bound", self.bound.is_some()),
            ("hrs", self.hrs.is_some()),
            ("chern", self.chern.is_some()),
            ("derive", self.derive.is_some()),
        ] {
            if present {
                out.push(name);
            }
        }
        out
    }

    /// Fills the experiment's table with defaults and checks that the rest
    /// of the file agrees with the chosen experiment.
    pub fn resolve(mut self) -> Result<RunConfig, ConfigError> {
        let name = self.experiment.name();
        if let Some(other) = self.present_sections().into_iter().find(|s| *s != name) {
            return Err(err(format!("table [{other}] does not belong to a `{name}` run")));
        }
        if self.engines.is_some() && !self.experiment.takes_engines() {
            return Err(err(format!("`{name}` has no engine choice; remove `engines`")));
        }
        if let Some(e) = &self.engines {
            if e.is_empty() {
                return Err(err("`engines` must name at least one engine"));
            }
        }
        if self.threads == Some(0) {
            return Err(err("`threads` must be at least 1"));
        }
        match self.experiment {
            Experiment::Transfer => {
                self.transfer.get_or_insert_with(Default::default);
            }
            Experiment::Pump => {
                self.pump.get_or_insert_with(Default::default);
            }
            Experiment::Bound => {
                self.bound.get_or_insert_with(Default::default);
            }
            Experiment::Hrs => {
                self.hrs.get_or_insert_with(Default::default);
            }
            Experiment::Chern => {
                self.chern.get_or_insert_with(Default::default);
            }
            Experiment::Derive => {
                self.derive.get_or_insert_with(Default::default);
            }
            Experiment::Validate => {}
        }
        self.check_driver()?;
        Ok(self)
    }

    fn check_driver(&self) -> Result<(), ConfigError> {
        let e = self.engines.as_deref();
        let res = match self.experiment {
            Experiment::Transfer => self.transfer.as_ref().map(|s| s.to_core(self.seed).validate()),
            Experiment::Pump => self.pump.as_ref().map(|s| s.to_core(e).validate()),
            Experiment::Bound => self.bound.as_ref().map(|s| s.to_core(self.seed, e).validate()),
            Experiment::Hrs => self.hrs.as_ref().map(|s| s.to_core(self.seed, e).validate()),
            _ => None,
        };
        match res {
            Some(Err(e)) => Err(err(format!("invalid [{}] settings: {e}", self.experiment.name()))),
            _ => Ok(()),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

fn collect_defaulted(raw: &toml::Table, full: &toml::Table, prefix: &str, out: &mut Vec<String>) {
    for (k, v) in full {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match (raw.get(k), v) {
            (None, _) => out.push(path),
            (Some(toml::Value::Table(r)), toml::Value::Table(f)) => collect_defaulted(r, f, &path, out),
            _ => {}
        }
    }
}

/// Parses and resolves config text. Syntax, key and unit errors carry the
/// line and column of the offending value.
pub fn parse_config_str(text: &str) -> Result<Resolved, ConfigError> {
    let config: RunConfig = toml::from_str(text).map_err(|e| err(e.to_string()))?;
    let config = config.resolve().map_err(|e| ConfigError { message: locate(text, e.message) })?;
    let raw: toml::Table = toml::from_str(text).map_err(|e| err(e.to_string()))?;
    let full: toml::Table = toml::from_str(&config.to_toml()).expect("resolved config re-parses");
    let mut defaulted = Vec::new();
    collect_defaulted(&raw, &full, "", &mut defaulted);
    Ok(Resolved { config, defaulted })
}

/// Prefixes a resolution error with the line of the table or key it names.
fn locate(text: &str, message: String) -> String {
    let needle = message
        .split(['[', ']'])
        .nth(1)
        .map(|s| format!("[{s}]"))
        .or_else(|| message.contains("`engines`").then(|| "engines".to_string()));
    if let Some(n) = needle {
        if let Some(line) = text.lines().position(|l| l.trim_start().starts_with(&n)) {
            return format!("line {}: {message}", line + 1);
        }
    }
    message
}

pub fn parse_config(path: &Path) -> Result<Resolved, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| err(format!("{}: {e}", path.display())))?;
    parse_config_str(&text).map_err(|e| err(format!("{}: {}", path.display(), e.message)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn minimal_transfer_config_takes_driver_defaults() {
        let r = parse_config_str("experiment = \"transfer\"\n[transfer]\nn = 6\nomega = \"5 MHz\"\ndelta = \"50 MHz\"\nv_ratio = 3\n").unwrap();
        let t = r.config.transfer.as_ref().unwrap();
        assert_eq!(t.omega.0, TAU * 5.0);
        assert_eq!(t.to_core(0), TransferConfig::default());
        assert!(r.defaulted.contains(&"transfer.ensemble".to_string()));
        assert!(!r.defaulted.contains(&"transfer.omega".to_string()));
    }

    #[test]
    fn unknown_keys_and_bare_numbers_are_rejected_with_lines() {
        let e = parse_config_str("experiment = \"pump\"\n[pump]\nperiodd = \"3 us\"\n").unwrap_err();
        assert!(e.message.contains("line 3"), "{}", e.message);
        let e = parse_config_str("experiment = \"pump\"\n[pump]\nomega = 31.4\n").unwrap_err();
        assert!(e.message.contains("line 3") && e.message.contains("unit"), "{}", e.message);
    }

    #[test]
    fn conflicting_engine_is_a_validation_error() {
        let e = parse_config_str("experiment = \"pump\"\nengines = [\"trajectory\"]\n").unwrap_err();
        assert!(e.message.contains("invalid [pump]"), "{}", e.message);
        let e = parse_config_str("experiment = \"chern\"\nengines = [\"exact\"]\n").unwrap_err();
        assert!(e.message.starts_with("line 2"), "{}", e.message);
        let e = parse_config_str("experiment = \"pump\"\n[hrs]\n").unwrap_err();
        assert!(e.message.starts_with("line 2"), "{}", e.message);
    }

    #[test]
    fn resolved_config_round_trips() {
        for exp in ["transfer", "pump", "bound", "hrs", "chern", "derive", "validate"] {
            let r = parse_config_str(&format!("experiment = \"{exp}\"\nseed = 7\n")).unwrap();
            let text = r.config.to_toml();
            let again = parse_config_str(&text).unwrap();
            assert_eq!(again.config, r.config, "{exp}");
            assert!(again.defaulted.is_empty(), "{exp}: {:?}", again.defaulted);
            assert_eq!(again.config.to_toml(), text);
        }
    }
}
