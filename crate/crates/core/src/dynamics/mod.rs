//! Time evolution: closed-system propagation, dense master equation,
//! quantum trajectories and the single-exciton dephasing model.

mod hrs;
mod krylov;
mod lindblad;
pub mod ode;
mod propagator;
mod trajectories;
mod unitary;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::basis::SubspaceBasis;
use crate::error::{Error, Result};
use crate::linalg::Operator;

pub use hrs::{evolve_hrs, hrs_msd_closed_form, HrsSeries, HrsSpec};
pub use krylov::expm_krylov;
pub use lindblad::{evolve_lindblad, liouvillian, DEFAULT_DENSE_CAP};
pub use trajectories::{evolve_trajectories, EnsembleSeries, JumpRecord};
pub use unitary::evolve_unitary;

/// A Hamiltonian that may depend on time, handed out as frozen operators.
pub trait Generator: Sync {
    fn basis(&self) -> &Arc<SubspaceBasis>;

    fn dim(&self) -> usize {
        self.basis().dim()
    }

    fn is_static(&self) -> bool;

    /// The operator at time `t`.
    fn at(&self, t: f64) -> Result<Arc<dyn Operator>>;

    /// `w1 H(t1) + w2 H(t2)`.
    fn blend(&self, t1: f64, w1: f64, t2: f64, w2: f64) -> Result<Arc<dyn Operator>>;
}

/// A fixed operator on a basis.
#[derive(Clone)]
pub struct StaticGenerator {
    basis: Arc<SubspaceBasis>,
    op: Arc<dyn Operator>,
}

impl StaticGenerator {
    pub fn new(basis: Arc<SubspaceBasis>, op: Arc<dyn Operator>) -> Result<Self> {
        if op.dim() != basis.dim() {
            return Err(Error::BasisMismatch(format!(
                "operator of dimension {} on a basis of dimension {}",
                op.dim(),
                basis.dim()
            )));
        }
        Ok(StaticGenerator { basis, op })
    }

    pub fn operator(&self) -> &Arc<dyn Operator> {
        &self.op
    }
}

impl Generator for StaticGenerator {
    fn basis(&self) -> &Arc<SubspaceBasis> {
        &self.basis
    }

    fn is_static(&self) -> bool {
        true
    }

    fn at(&self, _t: f64) -> Result<Arc<dyn Operator>> {
        Ok(Arc::clone(&self.op))
    }

    fn blend(&self, _t1: f64, w1: f64, _t2: f64, w2: f64) -> Result<Arc<dyn Operator>> {
        Ok(Arc::new(Scaled { inner: Arc::clone(&self.op), factor: w1 + w2 }))
    }
}

struct Scaled {
    inner: Arc<dyn Operator>,
    factor: f64,
}

impl Operator for Scaled {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn apply(&self, x: &[num_complex::Complex64], y: &mut [num_complex::Complex64]) {
        self.inner.apply(x, y);
        y.iter_mut().for_each(|v| *v *= self.factor);
    }

    fn is_hermitian(&self) -> bool {
        self.inner.is_hermitian()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    DenseExpm,
    AdaptiveRk,
    Krylov,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense-expm" => Ok(Method::DenseExpm),
            "adaptive-rk" => Ok(Method::AdaptiveRk),
            "krylov" => Ok(Method::Krylov),
            _ => Err(Error::Invalid(format!("unknown method '{s}' (dense-expm, adaptive-rk, krylov)"))),
        }
    }
}

/// Integration settings shared by every engine. Outputs are taken at
/// `samples + 1` equally spaced times from 0 to `t_final`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionConfig {
    pub t_final: f64,
    pub dt_max: f64,
    pub method: Method,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub trajectory_count: usize,
    pub seed: u64,
    pub samples: usize,
    /// Largest basis dimension the dense master equation accepts.
    pub dense_cap: usize,
}

impl EvolutionConfig {
    pub fn new(t_final: f64, samples: usize) -> Self {
        EvolutionConfig {
            t_final,
            dt_max: t_final / 200.0,
            method: Method::Krylov,
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            trajectory_count: 1,
            seed: 0,
            samples,
            dense_cap: DEFAULT_DENSE_CAP,
        }
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn with_dt_max(mut self, dt: f64) -> Self {
        self.dt_max = dt;
        self
    }

    pub fn with_tolerances(mut self, rel: f64, abs: f64) -> Self {
        self.rel_tol = rel;
        self.abs_tol = abs;
        self
    }

    pub fn with_trajectories(mut self, count: usize, seed: u64) -> Self {
        self.trajectory_count = count;
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_final > 0.0) || !self.t_final.is_finite() {
            return Err(Error::Invalid(format!("t_final must be positive, got {}", self.t_final)));
        }
        if !(self.dt_max > 0.0) {
            return Err(Error::Invalid(format!("dt_max must be positive, got {}", self.dt_max)));
        }
        for (name, v) in [("rel_tol", self.rel_tol), ("abs_tol", self.abs_tol)] {
            if !(v > 0.0 && v <= 1e-2) {
                return Err(Error::Invalid(format!("{name} must lie in (0, 1e-2], got {v}")));
            }
        }
        if self.samples == 0 {
            return Err(Error::Invalid("at least one output interval is required".into()));
        }
        Ok(())
    }

    pub fn output_times(&self) -> Vec<f64> {
        (0..=self.samples).map(|k| self.t_final * k as f64 / self.samples as f64).collect()
    }
}

/// Values sampled at increasing times.
#[derive(Debug, Clone)]
pub struct Series<T> {
    pub times: Vec<f64>,
    pub values: Vec<T>,
}

impl<T> Series<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&T> {
        self.values.last()
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Series<U> {
        Series { times: self.times.clone(), values: self.values.iter().map(f).collect() }
    }
}
