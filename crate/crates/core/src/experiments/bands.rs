//! Band topology of the modulated chain and a dump of effective couplings.

use serde::{Deserialize, Serialize};

use super::{series_from, ExperimentReport};
use crate::error::{Error, Result};
use crate::hamiltonian::{derive_effective, EffectiveOptions};
use crate::lattice::{mhz, ChainSpec, DressingProfile};
use crate::topology::{chern_numbers, BlochHamiltonian};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChernConfig {
    pub omega: f64,
    pub delta: f64,
    pub v_ratio: f64,
    /// Include the next-nearest-neighbour terms with `V(2d) = V(d) / 64`.
    pub nnn: bool,
    /// Square grid sizes to sample.
    pub grids: Vec<usize>,
    pub expected: Vec<i64>,
}

impl Default for ChernConfig {
    fn default() -> Self {
        ChernConfig { omega: mhz(5.0), delta: mhz(20.0), v_ratio: 3.0, nnn: false, grids: vec![32, 64, 128], expected: vec![1, -2, 1] }
    }
}

pub fn run_chern(cfg: &ChernConfig) -> Result<ExperimentReport> {
    if cfg.grids.is_empty() {
        return Err(Error::Invalid("at least one grid size is needed".into()));
    }
    let v = cfg.v_ratio * cfg.delta;
    let family = BlochHamiltonian::new(cfg.omega, cfg.delta, v, cfg.nnn.then_some(v / 64.0));
    let mut rep = ExperimentReport::new("chern");
    rep.param("omega", cfg.omega, "rad/us");
    rep.param("delta", cfg.delta, "rad/us");
    rep.param("v_ratio", cfg.v_ratio, "1");
    let mut grids = cfg.grids.clone();
    grids.sort_unstable();
    grids.dedup();
    let mut raw = Vec::new();
    for &g in &grids {
        let r = chern_numbers(&family, g, g)?;
        rep.check(
            &format!("chern_grid_{g}"),
            r.numbers == cfg.expected,
            format!("numbers {:?}, raw {:?}, smallest gaps {:?}", r.numbers, r.raw, &r.min_gaps[..r.min_gaps.len() - 1]),
        );
        let sum: i64 = r.numbers.iter().sum();
        rep.check(&format!("chern_sum_rule_{g}"), sum == 0, format!("sum {sum}"));
        raw.push(r.raw);
    }
    let times: Vec<f64> = grids.iter().map(|&g| g as f64).collect();
    let bands = raw[0].len();
    rep.series.push(series_from("chern_raw", "time column holds the grid size; plaquette flux per band over 2 pi", vec![bands], &times, raw)?);
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeriveConfig {
    pub n: usize,
    pub omega: f64,
    pub delta: f64,
    pub v_ratio: f64,
    pub spacing: f64,
    /// Pair cutoff in sites; `None` keeps every pair.
    pub range: Option<usize>,
}

impl Default for DeriveConfig {
    fn default() -> Self {
        DeriveConfig { n: 7, omega: mhz(5.0), delta: mhz(50.0), v_ratio: 3.0, spacing: 4.4, range: None }
    }
}

/// Effective-model coefficients for a homogeneous chain.
pub fn run_derive(cfg: &DeriveConfig) -> Result<ExperimentReport> {
    let chain = ChainSpec::with_nn_interaction(cfg.n, cfg.spacing, cfg.v_ratio * cfg.delta)?;
    let profile = DressingProfile::homogeneous(cfg.n, cfg.omega, cfg.delta);
    let m = derive_effective(&chain, &profile, 0.0, &EffectiveOptions::with_range(cfg.range))?;
    let mut rep = ExperimentReport::new("derive");
    rep.param("n", cfg.n as f64, "sites");
    rep.param("omega", cfg.omega, "rad/us");
    rep.param("delta", cfg.delta, "rad/us");
    rep.param("v_ratio", cfg.v_ratio, "1");
    let n = cfg.n;
    let flat = |a: &nalgebra::DMatrix<f64>| a.transpose().iter().copied().collect::<Vec<f64>>();
    rep.series.push(series_from("mu", "on-site potential (rad/us)", vec![n], &[0.0], vec![m.mu.clone()])?);
    rep.series.push(series_from("exchange", "J_ij (rad/us), row-major", vec![n, n], &[0.0], vec![flat(&m.exchange)])?);
    rep.series.push(series_from("ising", "I_ij (rad/us), row-major", vec![n, n], &[0.0], vec![flat(&m.ising)])?);
    rep.series.push(series_from("exciton_interaction", "U_ij (rad/us), row-major", vec![n, n], &[0.0], vec![flat(&m.exciton_interaction)])?);
    if n > 1 {
        rep.series.push(series_from("dimer_energy", "energy of dimer (i, i+1) (rad/us)", vec![n - 1], &[0.0], vec![m.dimer_energy.clone()])?);
    }
    if n > 2 {
        rep.series.push(series_from("dimer_exchange", "hop between dimers (i, i+1) and (i+1, i+2) (rad/us)", vec![n - 2], &[0.0], vec![m.dimer_exchange.clone()])?);
    }
    let asym = (&m.exchange - m.exchange.transpose()).amax();
    rep.check("exchange_symmetric", asym <= 1e-12 * m.exchange.amax().max(1e-300), format!("largest |J_ij - J_ji| = {asym:.2e}"));
    let detail = if m.warnings.is_empty() { "no guard warnings".to_string() } else { m.warnings.join("; ") };
    rep.check("guards_clear", m.warnings.is_empty(), detail);
    rep.notes.extend(m.warnings.iter().cloned());
    Ok(rep)
}
