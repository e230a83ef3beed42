//! Drivers for the four numerical studies: entanglement transfer over a
//! designed chain, Thouless pumping, bound-state transport and the
//! ballistic-to-diffusive crossover, plus band topology, a coupling dump
//! and the invariant suite.

mod bands;
mod bound;
mod hrs;
mod pump;
mod transfer;
mod validate;

pub use bands::{run_chern, run_derive, ChernConfig, DeriveConfig};
pub use bound::{run_bound_state_transport, BoundConfig};
pub use hrs::{bulk_hopping, run_hrs_crossover, HrsConfig};
pub use pump::{run_thouless_pump, PumpConfig};
pub use transfer::{clean_peak_fidelities, design_for, design_transfer_couplings, designed_transfer_fidelity, mirror_coupling, run_entanglement_transfer, TransferConfig, TransferDesign};
pub use validate::run_invariant_suite;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observables::ObservableSeries;

/// Which Hamiltonian propagates the state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Exact,
    Effective,
    /// Exact Hamiltonian with noise unravelled into trajectories.
    Trajectory,
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Engine::Exact => "exact",
            Engine::Effective => "effective",
            Engine::Trajectory => "trajectory",
        })
    }
}

impl FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Engine::Exact),
            "effective" => Ok(Engine::Effective),
            "trajectory" => Ok(Engine::Trajectory),
            other => Err(Error::Invalid(format!("unknown engine `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub value: f64,
    pub unit: String,
}

/// Mean and spread of a scalar across independent realizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStat {
    pub name: String,
    pub mean: f64,
    /// Standard deviation across realizations (not of the mean).
    pub std: f64,
    pub count: usize,
    /// Seed of every realization, or the base seed of a trajectory batch.
    pub seeds: Vec<u64>,
}

impl EnsembleStat {
    pub fn from_samples(name: &str, samples: &[f64], seeds: Vec<u64>) -> Self {
        let (mean, std) = mean_std(samples);
        EnsembleStat { name: name.into(), mean, std, count: samples.len(), seeds }
    }

    pub fn std_err(&self) -> f64 {
        if self.count == 0 {
            return f64::NAN;
        }
        self.std / (self.count as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub id: String,
    pub parameters: Vec<Parameter>,
    pub series: Vec<ObservableSeries>,
    pub ensembles: Vec<EnsembleStat>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

impl ExperimentReport {
    pub fn new(id: &str) -> Self {
        ExperimentReport {
            id: id.into(),
            parameters: Vec::new(),
            series: Vec::new(),
            ensembles: Vec::new(),
            checks: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn param(&mut self, name: &str, value: f64, unit: &str) {
        self.parameters.push(Parameter { name: name.into(), value, unit: unit.into() });
    }

    pub fn check(&mut self, name: &str, pass: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), pass, detail: detail.into() });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn series(&self, name: &str) -> Option<&ObservableSeries> {
        self.series.iter().find(|s| s.name == name)
    }

    pub fn ensemble(&self, name: &str) -> Option<&EnsembleStat> {
        self.ensembles.iter().find(|s| s.name == name)
    }

    pub fn find_check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn parameter(&self, name: &str) -> Option<f64> {
        self.parameters.iter().find(|p| p.name == name).map(|p| p.value)
    }
}

/// Sample mean and (n - 1) standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Builds a series from parallel time and record vectors.
pub(crate) fn series_from(name: &str, note: &str, shape: Vec<usize>, times: &[f64], records: Vec<Vec<f64>>) -> Result<ObservableSeries> {
    let mut s = ObservableSeries::new(name, note, shape);
    for (&t, r) in times.iter().zip(records) {
        s.push(t, r)?;
    }
    Ok(s)
}

/// Weight of a symmetric `g2` matrix on the diagonal `|i - j| = d`,
/// counting each unordered pair once.
pub fn diagonal_weight(g2: &nalgebra::DMatrix<f64>, d: usize) -> f64 {
    let n = g2.nrows();
    (0..n.saturating_sub(d)).map(|i| g2[(i, i + d)]).sum()
}

/// Weights on every diagonal `d = 1..n`, normalized to sum to one.
pub fn diagonal_weights(g2: &nalgebra::DMatrix<f64>) -> Vec<f64> {
    let n = g2.nrows();
    let w: Vec<f64> = (1..n).map(|d| diagonal_weight(g2, d)).collect();
    let total: f64 = w.iter().sum();
    if total > 0.0 {
        w.iter().map(|x| x / total).collect()
    } else {
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_std_matches_hand_values() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_std(&[7.0]), (7.0, 0.0));
    }

    #[test]
    fn engine_round_trips_through_text() {
        for e in [Engine::Exact, Engine::Effective, Engine::Trajectory] {
            assert_eq!(e.to_string().parse::<Engine>().unwrap(), e);
        }
        assert!("dense".parse::<Engine>().is_err());
    }

    #[test]
    fn diagonal_weights_sum_to_one() {
        let mut g = nalgebra::DMatrix::zeros(4, 4);
        g[(0, 2)] = 0.5;
        g[(2, 0)] = 0.5;
        g[(1, 2)] = 0.25;
        g[(2, 1)] = 0.25;
        let w = diagonal_weights(&g);
        assert_eq!(w, vec![0.25 / 0.75, 0.5 / 0.75, 0.0]);
    }
}
