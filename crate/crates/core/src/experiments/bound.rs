//! Correlated transport of two-exciton bound states: the nearest-neighbour
//! dimer and the next-nearest-neighbour pair.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{diagonal_weights, series_from, Engine, EnsembleStat, ExperimentReport};
use crate::basis::{build_basis, config, QuantumState, Sector};
use crate::dynamics::{evolve_trajectories, evolve_unitary, EvolutionConfig, Generator, Method};
use crate::error::{Error, Result};
use crate::hamiltonian::{EffectiveFamily, EffectiveOptions, ExactModel, Guards};
use crate::lattice::{mhz, ChainSpec, DressingProfile, NoiseSpec};
use crate::observables::{com_distribution, fit_com, g2_correlation, post_select, ComDistribution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundConfig {
    /// Rabi frequency shared by both runs (rad/us).
    pub omega: f64,
    pub spacing: f64,

    pub dimer_n: usize,
    pub dimer_delta: f64,
    /// `V(d) / dimer_delta`.
    pub dimer_v_ratio: f64,
    /// Left site of the initial dimer.
    pub dimer_site: usize,
    pub dimer_t_final: f64,
    /// Smallest admitted weight on `|i - j| = 1`.
    pub dimer_floor: f64,

    pub pair_n: usize,
    pub pair_delta: f64,
    pub pair_v_ratio: f64,
    /// Left site of the initial pair `(site, site + 2)`.
    pub pair_site: usize,
    /// Time at which the pair correlations are compared (us).
    pub pair_time: f64,
    /// Dephasing rate of the noisy pair runs.
    pub gamma: f64,
    /// Read `gamma` as `gamma / 2pi` in MHz and convert it to rad/us.
    pub gamma_times_two_pi: bool,

    pub samples: usize,
    pub trajectories: usize,
    pub seed: u64,
    /// Excitation cap of the exact engine's basis.
    pub max_excitations: usize,
    pub engines: Vec<Engine>,
}

impl Default for BoundConfig {
    fn default() -> Self {
        BoundConfig {
            omega: mhz(5.0),
            spacing: 4.4,
            dimer_n: 12,
            dimer_delta: mhz(-400.0),
            dimer_v_ratio: -1.1,
            dimer_site: 5,
            dimer_t_final: 15.0,
            dimer_floor: 0.9,
            pair_n: 13,
            pair_delta: mhz(30.0),
            pair_v_ratio: 3.0,
            pair_site: 5,
            pair_time: 9.0,
            gamma: 0.2,
            gamma_times_two_pi: false,
            samples: 36,
            trajectories: 1000,
            seed: 0,
            max_excitations: 4,
            engines: vec![Engine::Effective, Engine::Exact, Engine::Trajectory],
        }
    }
}

impl BoundConfig {
    pub fn fast() -> Self {
        BoundConfig { trajectories: 200, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimer_n < 3 || self.dimer_site + 1 >= self.dimer_n {
            return Err(Error::Invalid(format!("dimer at site {} does not fit a chain of {}", self.dimer_site, self.dimer_n)));
        }
        if self.pair_n < 4 || self.pair_site + 2 >= self.pair_n {
            return Err(Error::Invalid(format!("pair at site {} does not fit a chain of {}", self.pair_site, self.pair_n)));
        }
        if !(self.dimer_t_final > 0.0) || !(self.pair_time > 0.0) || self.samples == 0 {
            return Err(Error::Invalid("run times and sample count must be positive".into()));
        }
        if !(self.gamma >= 0.0) || self.trajectories == 0 {
            return Err(Error::Invalid("gamma must be non-negative and at least one trajectory is required".into()));
        }
        if self.max_excitations < 2 {
            return Err(Error::Invalid("the exact engine needs room for two excitations".into()));
        }
        Ok(())
    }

    /// Dephasing rate in rad/us.
    pub fn dephasing(&self) -> f64 {
        if self.gamma_times_two_pi {
            2.0 * PI * self.gamma
        } else {
            self.gamma
        }
    }
}

fn upper(g2: &DMatrix<f64>) -> Vec<f64> {
    let n = g2.nrows();
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            out.push(g2[(i, j)]);
        }
    }
    out
}

fn from_upper(n: usize, v: &[f64]) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in i + 1..n {
            g[(i, j)] = v[k];
            g[(j, i)] = v[k];
            k += 1;
        }
    }
    g
}

/// Post-selected `g2` maps, one per output time, with the two-exciton weight.
struct Maps {
    times: Vec<f64>,
    g2: Vec<DMatrix<f64>>,
    weights: Vec<f64>,
}

impl Maps {
    fn push_to(&self, rep: &mut ExperimentReport, name: &str) -> Result<Vec<Vec<f64>>> {
        let n = self.g2[0].nrows();
        rep.series.push(series_from(
            &format!("{name}_g2"),
            "two-exciton post-selected g2, row-major",
            vec![n, n],
            &self.times,
            self.g2.iter().map(|g| g.iter().copied().collect()).collect(),
        )?);
        let diag: Vec<Vec<f64>> = self.g2.iter().map(diagonal_weights).collect();
        let records = diag.iter().zip(&self.weights).map(|(d, w)| d.iter().copied().chain([*w]).collect()).collect();
        rep.series.push(series_from(
            &format!("{name}_diagonals"),
            "weight on |i - j| = 1..n-1, then the two-exciton weight",
            vec![n],
            &self.times,
            records,
        )?);
        Ok(diag)
    }
}

fn exact_maps(chain: &ChainSpec, profile: &DressingProfile, cap: usize, sites: [usize; 2], evo: &EvolutionConfig) -> Result<Maps> {
    let model = ExactModel::truncated(chain, profile, cap)?;
    let psi0 = QuantumState::basis_state(model.basis().clone(), config(&sites))?;
    let s = evolve_unitary(&model, &psi0, &evo.clone().with_method(Method::DenseExpm))?;
    let mut g2 = Vec::with_capacity(s.len());
    let mut weights = Vec::with_capacity(s.len());
    for psi in &s.values {
        let p = post_select(psi, 2)?;
        weights.push(p.weight);
        g2.push(p.g2());
    }
    Ok(Maps { times: s.times, g2, weights })
}

fn effective_family(chain: &ChainSpec, profile: &DressingProfile, sector: Sector) -> Result<EffectiveFamily> {
    let basis = build_basis(chain.n_sites, sector)?;
    // The dimer regime sits on the facilitation guard by construction.
    let opts = EffectiveOptions { guards: Guards::permissive(), range: None };
    EffectiveFamily::new(chain, profile, opts, basis)
}

fn effective_maps(fam: &EffectiveFamily, sites: [usize; 2], evo: &EvolutionConfig) -> Result<Maps> {
    let psi0 = QuantumState::basis_state(fam.basis().clone(), config(&sites))?;
    let s = evolve_unitary(fam, &psi0, evo)?;
    let g2 = s.values.iter().map(g2_correlation).collect::<Vec<_>>();
    Ok(Maps { weights: vec![1.0; g2.len()], times: s.times, g2 })
}

/// Dephased evolution unravelled into `sigma^z` kick trajectories on the
/// cached eigenbasis of `gen`. Each trajectory reports its two-exciton
/// weight p and p * g2, so the ensemble ratio is the post-selected g2 of the
/// averaged state.
fn trajectory_maps(gen: &dyn Generator, sites: [usize; 2], cfg: &BoundConfig, evo: &EvolutionConfig, name: &str) -> Result<(Maps, EnsembleStat)> {
    let psi0 = QuantumState::basis_state(gen.basis().clone(), config(&sites))?;
    let evo = evo.clone().with_method(Method::DenseExpm).with_trajectories(cfg.trajectories, cfg.seed);
    let ens = evolve_trajectories(gen, &NoiseSpec::dephasing(cfg.dephasing())?, &psi0, &evo, |_, psi, _| {
        let p = post_select(psi, 2).expect("state on the model basis");
        let g = p.g2();
        std::iter::once(p.weight).chain(upper(&g).into_iter().map(|x| p.weight * x)).collect()
    })?;
    let n = gen.basis().n_sites();
    let g2 = ens.mean.iter().map(|m| from_upper(n, &m[1..]) / m[0]).collect();
    let weights: Vec<f64> = ens.mean.iter().map(|m| m[0]).collect();
    let last = ens.mean.len() - 1;
    let stat = EnsembleStat {
        name: format!("{name}_two_exciton_weight"),
        mean: weights[last],
        std: ens.std_err[last][0] * (ens.trajectories as f64).sqrt(),
        count: ens.trajectories,
        seeds: vec![cfg.seed],
    };
    Ok((Maps { times: ens.times, g2, weights }, stat))
}

fn com_record(rep: &mut ExperimentReport, tag: &str, dist: &ComDistribution, center: f64, t: f64, coherent: bool) -> Result<()> {
    // A bound pair moves its centre by whole sites; half-integer points hold
    // only broken pairs of odd separation.
    let sub = dist.sublattice(center);
    let fit = fit_com(&sub, center);
    let mut s = series_from(&format!("pair_{tag}_com"), "centre-of-mass probability on the half-site grid", vec![dist.positions.len()], &[t], vec![dist.probability.clone()])?;
    s.note = format!(
        "{}; positions start at {} in steps of 0.5",
        s.note,
        dist.positions.first().copied().unwrap_or(0.0)
    );
    rep.series.push(s);
    let curve = |f: &Option<crate::observables::FitResult>, x: f64, bessel: bool| match f {
        Some(r) if bessel => r.params[0] * crate::observables::bessel_j((x - center).abs(), r.params[1]).powi(2),
        Some(r) => r.params[0] * (-(x - r.params[1]).powi(2) / (2.0 * r.params[2] * r.params[2])).exp(),
        None => f64::NAN,
    };
    let mut record = Vec::with_capacity(3 * sub.positions.len());
    for (&x, &p) in sub.positions.iter().zip(&sub.probability) {
        record.extend([x, p, curve(&fit.bessel, x, true), curve(&fit.gaussian, x, false)]);
    }
    rep.series.push(series_from(
        &format!("pair_{tag}_com_fit"),
        "rows: position, sublattice probability, Bessel fit, Gaussian fit",
        vec![sub.positions.len(), 4],
        &[t],
        vec![record],
    )?);
    let ssr = |f: &Option<crate::observables::FitResult>| f.as_ref().map_or(f64::NAN, |r| r.ssr);
    let (want, name) = if coherent { ("bessel", "prefers_bessel") } else { ("gaussian", "prefers_gaussian") };
    rep.check(
        &format!("pair_{tag}_com_{name}"),
        fit.preferred() == Some(want),
        format!(
            "residuals on the integer-offset sublattice: bessel {:.3e}, gaussian {:.3e}{}",
            ssr(&fit.bessel),
            ssr(&fit.gaussian),
            fit.notice.map(|n| format!(" ({n})")).unwrap_or_default()
        ),
    );
    Ok(())
}

fn pair_checks(rep: &mut ExperimentReport, tag: &str, diag: &[f64], t: f64) {
    let w2 = diag[1];
    let dominant = diag.iter().enumerate().all(|(k, &w)| k == 1 || w < w2);
    rep.check(
        &format!("pair_{tag}_next_nearest_dominant"),
        dominant,
        format!("at t = {t} us weights on |i-j| = 1, 2, 3: {:.4}, {:.4}, {:.4}", diag[0], diag[1], diag[2]),
    );
    rep.check(
        &format!("pair_{tag}_nearest_suppressed"),
        diag[0] < diag[1].min(diag[2]),
        format!("|i-j| = 1 weight {:.3e} against {:.3e}, {:.3e}", diag[0], diag[1], diag[2]),
    );
}

pub fn run_bound_state_transport(cfg: &BoundConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut rep = ExperimentReport::new("bound");
    rep.param("omega", cfg.omega, "rad/us");
    rep.param("dimer_n", cfg.dimer_n as f64, "sites");
    rep.param("dimer_delta", cfg.dimer_delta, "rad/us");
    rep.param("dimer_v_ratio", cfg.dimer_v_ratio, "1");
    rep.param("pair_n", cfg.pair_n as f64, "sites");
    rep.param("pair_delta", cfg.pair_delta, "rad/us");
    rep.param("pair_v_ratio", cfg.pair_v_ratio, "1");
    rep.param("pair_time", cfg.pair_time, "us");
    rep.param("gamma", cfg.dephasing(), "1/us");
    rep.param("trajectories", cfg.trajectories as f64, "1");
    rep.param("seed", cfg.seed as f64, "1");
    rep.param("max_excitations", cfg.max_excitations as f64, "1");
    let use_effective = cfg.engines.contains(&Engine::Effective);
    let use_exact = cfg.engines.contains(&Engine::Exact);

    // Dimer |i, i+1>.
    let chain = ChainSpec::with_nn_interaction(cfg.dimer_n, cfg.spacing, cfg.dimer_v_ratio * cfg.dimer_delta)?;
    let profile = DressingProfile::homogeneous(cfg.dimer_n, cfg.omega, cfg.dimer_delta);
    let sites = [cfg.dimer_site, cfg.dimer_site + 1];
    let evo = EvolutionConfig::new(cfg.dimer_t_final, cfg.samples);
    if use_effective {
        let fam = effective_family(&chain, &profile, Sector::Dimer)?;
        effective_maps(&fam, sites, &evo)?.push_to(&mut rep, "dimer_effective")?;
    }
    if use_exact {
        let maps = exact_maps(&chain, &profile, cfg.max_excitations, sites, &evo)?;
        let diag = maps.push_to(&mut rep, "dimer_exact")?;
        let (k, worst) = diag.iter().map(|d| d[0]).enumerate().fold((0, f64::INFINITY), |a, (k, w)| if w < a.1 { (k, w) } else { a });
        rep.check(
            "dimer_exact_stays_bound",
            worst >= cfg.dimer_floor,
            format!("smallest |i-j| = 1 weight {worst:.6} at t = {:.3} us (need >= {})", maps.times[k], cfg.dimer_floor),
        );
    }

    // Pair |i, i+2>.
    let chain = ChainSpec::with_nn_interaction(cfg.pair_n, cfg.spacing, cfg.pair_v_ratio * cfg.pair_delta)?;
    let profile = DressingProfile::homogeneous(cfg.pair_n, cfg.omega, cfg.pair_delta);
    let sites = [cfg.pair_site, cfg.pair_site + 2];
    let center = cfg.pair_site as f64 + 1.0;
    let evo = EvolutionConfig::new(cfg.pair_time, cfg.samples);
    let gamma = cfg.dephasing();
    let mut runs: Vec<(&str, Maps, bool)> = Vec::new();
    if use_effective {
        let fam = effective_family(&chain, &profile, Sector::Excitations(2))?;
        runs.push(("effective", effective_maps(&fam, sites, &evo)?, true));
        if gamma > 0.0 {
            let (maps, stat) = trajectory_maps(&fam, sites, cfg, &evo, "pair_effective_dephased")?;
            rep.ensembles.push(stat);
            runs.push(("effective_dephased", maps, false));
        }
    }
    if use_exact {
        runs.push(("exact", exact_maps(&chain, &profile, cfg.max_excitations, sites, &evo)?, true));
    }
    if cfg.engines.contains(&Engine::Trajectory) && gamma > 0.0 {
        let model = ExactModel::truncated(&chain, &profile, cfg.max_excitations)?;
        let (maps, stat) = trajectory_maps(&model, sites, cfg, &evo, "pair_trajectory")?;
        rep.ensembles.push(stat);
        runs.push(("trajectory", maps, false));
    }
    for (tag, maps, coherent) in &runs {
        let diag = maps.push_to(&mut rep, &format!("pair_{tag}"))?;
        let last = maps.g2.len() - 1;
        pair_checks(&mut rep, tag, &diag[last], maps.times[last]);
        com_record(&mut rep, tag, &com_distribution(&maps.g2[last]), center, maps.times[last], *coherent)?;
    }
    if gamma > 0.0 && gamma * cfg.pair_time <= 1.0 {
        rep.notes.push(format!("pair_time {} us does not exceed 1/gamma = {:.3} us", cfg.pair_time, 1.0 / gamma));
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn upper_triangle_round_trips() {
        let g = DMatrix::from_fn(4, 4, |i, j| if i == j { 0.0 } else { (i + j) as f64 });
        assert_eq!(from_upper(4, &upper(&g)), g);
    }

    #[test]
    fn rejects_pairs_off_the_chain() {
        let c = BoundConfig { pair_site: 11, ..Default::default() };
        assert!(c.validate().is_err());
        let c = BoundConfig { max_excitations: 1, ..Default::default() };
        assert!(c.validate().is_err());
        assert!(BoundConfig::default().validate().is_ok());
    }

    #[test]
    fn gamma_convention_flag() {
        let c = BoundConfig { gamma: 0.2, gamma_times_two_pi: true, ..Default::default() };
        assert!((c.dephasing() - 0.4 * PI).abs() < 1e-15);
        assert_eq!(BoundConfig::default().dephasing(), 0.2);
    }

    #[test]
    fn effective_pair_stays_on_its_diagonal() {
        let cfg = BoundConfig { engines: vec![Engine::Effective], samples: 18, ..Default::default() };
        let rep = run_bound_state_transport(&cfg).unwrap();
        for name in ["pair_effective_next_nearest_dominant", "pair_effective_nearest_suppressed", "pair_effective_dephased_nearest_suppressed"] {
            let c = rep.find_check(name).unwrap();
            assert!(c.pass, "{name}: {}", c.detail);
        }
        // The dimer sector holds nothing but nearest-neighbour pairs.
        let d = rep.series("dimer_effective_diagonals").unwrap();
        assert!(d.column(0).iter().all(|&w| (w - 1.0).abs() < 1e-12));
    }
}
