//! Dephasing-driven crossover from ballistic to diffusive single-exciton
//! spreading, and the decay factorization under post-selection.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{series_from, Engine, EnsembleStat, ExperimentReport};
use crate::basis::{build_basis, project_to_sector, QuantumState, Sector};
use crate::dynamics::{evolve_hrs, evolve_lindblad, evolve_trajectories, hrs_msd_closed_form, EvolutionConfig, HrsSpec, Method};
use crate::error::{Error, Result};
use crate::hamiltonian::{derive_from_dressing, EffectiveFamily, EffectiveOptions, ExactModel};
use crate::lattice::{mhz, ChainSpec, DressingProfile, NoiseSpec};
use crate::observables::post_select;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HrsConfig {
    pub omega: f64,
    pub delta: f64,
    pub v_ratio: f64,
    pub spacing: f64,
    /// Longest hopping kept in the analytic law.
    pub hopping_range: usize,
    /// Dephasing rates; the first one is compared against the exact model.
    pub gammas: Vec<f64>,
    pub gamma_times_two_pi: bool,

    /// Sites of the long chain used to test the integrator against the law.
    pub hrs_sites: usize,
    pub hrs_t_final: f64,

    pub exact_n: usize,
    pub exact_t_final: f64,
    pub samples: usize,
    pub trajectories: usize,
    pub seed: u64,
    pub max_excitations: usize,
    /// Relative distance between the finite- and infinite-chain laws beyond
    /// which the boundary counts as reached.
    pub boundary_tolerance: f64,
    /// Relative agreement required between the exact model and the law.
    pub law_tolerance: f64,
    /// Earliest time (us) at which relative errors are compared.
    pub compare_from: f64,

    pub decay_kappa: f64,
    pub decay_gamma: f64,
    /// `delta / omega` of the decay run.
    pub decay_detuning_ratio: f64,
    pub decay_n: usize,
    pub decay_t_final: f64,

    pub engines: Vec<Engine>,
}

impl Default for HrsConfig {
    fn default() -> Self {
        HrsConfig {
            omega: mhz(5.0),
            delta: mhz(50.0),
            v_ratio: 3.0,
            spacing: 4.4,
            hopping_range: 10,
            gammas: vec![0.8, 0.1, 1.0],
            gamma_times_two_pi: false,
            hrs_sites: 201,
            hrs_t_final: 10.0,
            exact_n: 11,
            exact_t_final: 8.0,
            samples: 32,
            trajectories: 2000,
            seed: 0,
            max_excitations: 3,
            boundary_tolerance: 0.01,
            law_tolerance: 0.05,
            compare_from: 0.5,
            decay_kappa: 0.05,
            decay_gamma: 0.1,
            decay_detuning_ratio: 10.0,
            decay_n: 7,
            decay_t_final: 20.0,
            engines: vec![Engine::Effective, Engine::Trajectory],
        }
    }
}

impl HrsConfig {
    pub fn fast() -> Self {
        HrsConfig { trajectories: 500, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.gammas.is_empty() || self.gammas.iter().any(|g| !(*g >= 0.0)) {
            return Err(Error::Invalid("at least one non-negative dephasing rate is required".into()));
        }
        if self.hopping_range == 0 {
            return Err(Error::Invalid("hopping_range must be at least 1".into()));
        }
        if self.exact_n < 3 || self.hrs_sites < 3 || self.decay_n < 3 {
            return Err(Error::Invalid("chains need at least three sites".into()));
        }
        if !(self.hrs_t_final > 0.0 && self.exact_t_final > 0.0 && self.decay_t_final > 0.0) || self.samples == 0 {
            return Err(Error::Invalid("run times and sample count must be positive".into()));
        }
        if self.trajectories == 0 || self.max_excitations == 0 {
            return Err(Error::Invalid("need at least one trajectory and one excitation".into()));
        }
        if !(self.decay_kappa >= 0.0 && self.decay_gamma >= 0.0 && self.decay_detuning_ratio > 0.0) {
            return Err(Error::Invalid("decay run needs non-negative rates and a positive detuning ratio".into()));
        }
        Ok(())
    }

    fn rate(&self, g: f64) -> f64 {
        if self.gamma_times_two_pi {
            2.0 * PI * g
        } else {
            g
        }
    }

    fn chain(&self, n: usize, delta: f64) -> Result<ChainSpec> {
        ChainSpec::with_nn_interaction(n, self.spacing, self.v_ratio * delta)
    }
}

/// Bulk hoppings `J_d`, `d = 1..=range`, of the single-exciton effective
/// model of a homogeneous chain.
pub fn bulk_hopping(chain_of: impl Fn(usize) -> Result<ChainSpec>, omega: f64, delta: f64, range: usize) -> Result<Vec<f64>> {
    let n = range + 1;
    let chain = chain_of(n)?;
    let m = derive_from_dressing(&chain, &DressingProfile::homogeneous(n, omega, delta).at(0.0)?, &EffectiveOptions::with_range(None))?;
    Ok((1..=range).map(|d| m.exchange[(0, d)]).collect())
}

fn times(t_final: f64, samples: usize) -> Vec<f64> {
    (0..=samples).map(|k| t_final * k as f64 / samples as f64).collect()
}

fn worst_relative(a: &[f64], b: &[f64], keep: impl Fn(usize) -> bool) -> f64 {
    a.iter()
        .zip(b)
        .enumerate()
        .filter(|(k, _)| keep(*k))
        .map(|(_, (x, y))| (x / y - 1.0).abs())
        .fold(0.0, f64::max)
}

/// Post-selected one-exciton `<x^2>` and site profile averaged over dephasing
/// trajectories of the truncated exact model.
struct ExactRun {
    times: Vec<f64>,
    msd: Vec<f64>,
    profiles: Vec<Vec<f64>>,
    stat: EnsembleStat,
}

fn exact_run(cfg: &HrsConfig, gamma: f64) -> Result<ExactRun> {
    let n = cfg.exact_n;
    let origin = n / 2;
    let chain = cfg.chain(n, cfg.delta)?;
    let model = ExactModel::truncated(&chain, &DressingProfile::homogeneous(n, cfg.omega, cfg.delta), cfg.max_excitations)?;
    let psi0 = QuantumState::basis_state(model.basis().clone(), 1 << origin)?;
    let evo = EvolutionConfig::new(cfg.exact_t_final, cfg.samples)
        .with_method(Method::DenseExpm)
        .with_trajectories(cfg.trajectories, cfg.seed);
    // Per trajectory: one-exciton weight p, then p <x^2>, then p n_i.
    let ens = evolve_trajectories(&model, &NoiseSpec::dephasing(gamma)?, &psi0, &evo, |_, psi, _| {
        let p = post_select(psi, 1).expect("state on the model basis");
        let prof = p.profile();
        let msd: f64 = prof.iter().enumerate().map(|(i, q)| (i as f64 - origin as f64).powi(2) * q).sum();
        std::iter::once(p.weight).chain(std::iter::once(p.weight * msd)).chain(prof.iter().map(|q| p.weight * q)).collect()
    })?;
    let msd = ens.ratio(1, 0);
    let profiles = ens.mean.iter().map(|m| m[2..].iter().map(|q| q / m[0]).collect()).collect();
    let last = ens.mean.len() - 1;
    // Spread of the weighted estimator across trajectories.
    let stat = EnsembleStat {
        name: format!("exact_weighted_msd_gamma_{gamma}"),
        mean: ens.mean[last][1],
        std: ens.std_err[last][1] * (ens.trajectories as f64).sqrt(),
        count: ens.trajectories,
        seeds: vec![cfg.seed],
    };
    Ok(ExactRun { times: ens.times, msd, profiles, stat })
}

/// Minimum-image displacement on a ring of `n` sites.
fn ring_offset(i: usize, origin: usize, n: usize) -> f64 {
    let d = (i as i64 - origin as i64).rem_euclid(n as i64);
    if d > n as i64 / 2 {
        (d - n as i64) as f64
    } else {
        d as f64
    }
}

fn decay_check(cfg: &HrsConfig, rep: &mut ExperimentReport) -> Result<()> {
    let n = cfg.decay_n;
    let origin = n / 2;
    let delta = cfg.decay_detuning_ratio * cfg.omega;
    let chain = cfg.chain(n, delta)?.with_periodic(true);
    let profile = DressingProfile::homogeneous(n, cfg.omega, delta);
    let opts = EffectiveOptions::with_range(None);
    let evo = EvolutionConfig::new(cfg.decay_t_final, cfg.samples).with_method(Method::DenseExpm);

    let with_vacuum = EffectiveFamily::new(&chain, &profile, opts, build_basis(n, Sector::AtMost(1))?)?;
    let single = EffectiveFamily::new(&chain, &profile, opts, build_basis(n, Sector::Excitations(1))?)?;
    let full = NoiseSpec::new(cfg.rate(cfg.decay_gamma), cfg.decay_kappa)?;
    let dephasing = NoiseSpec::dephasing(cfg.rate(cfg.decay_gamma))?;
    let a = evolve_lindblad(&with_vacuum, &full, &QuantumState::basis_state(with_vacuum.basis().clone(), 1 << origin)?.to_density(), &evo)?;
    let b = evolve_lindblad(&single, &dephasing, &QuantumState::basis_state(single.basis().clone(), 1 << origin)?.to_density(), &evo)?;

    let x2 = |rho: &DMatrix<C64>, masks: &[u64]| -> f64 {
        masks
            .iter()
            .enumerate()
            .filter(|(_, m)| m.count_ones() == 1)
            .map(|(k, m)| ring_offset(m.trailing_zeros() as usize, origin, n).powi(2) * rho[(k, k)].re)
            .sum()
    };
    let mut worst = 0.0f64;
    let mut worst_weight = 0.0f64;
    let mut records = Vec::with_capacity(a.len());
    for (k, (ra, rb)) in a.values.iter().zip(&b.values).enumerate() {
        let t = a.times[k];
        let (_, weight) = project_to_sector(ra, 1)?;
        // The renormalized one-exciton block, coherences included.
        let sel = ra.restricted_to(&rb.basis) / C64::from(weight);
        worst = worst.max((&sel - &rb.matrix).iter().map(|z| z.norm()).fold(0.0, f64::max));
        worst_weight = worst_weight.max((weight - (-cfg.decay_kappa * t).exp()).abs());
        records.push(vec![x2(&ra.matrix, ra.basis.states()), x2(&sel, rb.basis.states()), x2(&rb.matrix, rb.basis.states()), weight]);
    }
    rep.series.push(series_from(
        "decay_msd",
        "columns: <x^2> without post-selection, post-selected, dephasing only, one-exciton weight",
        vec![4],
        &a.times,
        records,
    )?);
    rep.check(
        "decay_factorizes",
        worst <= 1e-6,
        format!("largest entry difference between the renormalized one-exciton block and the dephasing-only state: {worst:.3e} (need <= 1e-6)"),
    );
    rep.check(
        "decay_weight_is_exponential",
        worst_weight <= 1e-6,
        format!("largest deviation of the one-exciton weight from exp(-kappa t): {worst_weight:.3e}"),
    );
    Ok(())
}

pub fn run_hrs_crossover(cfg: &HrsConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut rep = ExperimentReport::new("hrs");
    rep.param("omega", cfg.omega, "rad/us");
    rep.param("delta", cfg.delta, "rad/us");
    rep.param("v_ratio", cfg.v_ratio, "1");
    for (k, g) in cfg.gammas.iter().enumerate() {
        rep.param(&format!("gamma_{k}"), cfg.rate(*g), "1/us");
    }
    rep.param("exact_n", cfg.exact_n as f64, "sites");
    rep.param("trajectories", cfg.trajectories as f64, "1");
    rep.param("seed", cfg.seed as f64, "1");

    let hopping = bulk_hopping(|n| cfg.chain(n, cfg.delta), cfg.omega, cfg.delta, cfg.hopping_range)?;
    rep.notes.push(format!("bulk hoppings J_d (rad/us): {hopping:?}"));
    let sum_sq: f64 = hopping.iter().enumerate().map(|(k, j)| ((k + 1) as f64 * j).powi(2)).sum();
    rep.param("sum_d_dj_squared", sum_sq, "rad^2/us^2");

    // Integrator against the law on a long chain, including gamma = 0.
    let ts = times(cfg.hrs_t_final, cfg.samples);
    let mut worst = 0.0f64;
    let mut rates: Vec<f64> = cfg.gammas.iter().map(|g| cfg.rate(*g)).collect();
    rates.insert(0, 0.0);
    for &gamma in &rates {
        let spec = HrsSpec::new(hopping[..hopping.len().min(cfg.hrs_sites - 1)].to_vec(), gamma, cfg.hrs_sites, cfg.hrs_sites / 2);
        let run = evolve_hrs(&spec, &ts, 1e-11, 1e-14)?;
        let law: Vec<f64> = ts.iter().map(|&t| hrs_msd_closed_form(&hopping, gamma, t)).collect();
        worst = worst.max(worst_relative(&run.msd, &law, |k| ts[k] > 0.0));
        let records = (0..ts.len()).map(|k| vec![run.msd[k], law[k]]).collect();
        rep.series.push(series_from(&format!("hrs_msd_gamma_{gamma}"), "columns: integrated <x^2>, closed form", vec![2], &ts, records)?);
    }
    rep.check(
        "hrs_matches_closed_form",
        worst <= 1e-6,
        format!("largest relative deviation on {} sites: {worst:.3e} (need <= 1e-6)", cfg.hrs_sites),
    );
    let ballistic = ts.iter().skip(1).map(|&t| (hrs_msd_closed_form(&hopping, 0.0, t) / (2.0 * sum_sq * t * t) - 1.0).abs()).fold(0.0, f64::max);
    rep.check("ballistic_without_dephasing", ballistic <= 1e-12, format!("largest relative deviation from 2 S t^2: {ballistic:.3e}"));

    if cfg.engines.contains(&Engine::Trajectory) {
        for (k, g) in cfg.gammas.iter().enumerate() {
            let gamma = cfg.rate(*g);
            let run = exact_run(cfg, gamma)?;
            let law: Vec<f64> = run.times.iter().map(|&t| hrs_msd_closed_form(&hopping, gamma, t)).collect();
            // The boundary is reached once the same law on the finite chain
            // departs from the infinite-chain form.
            let reach = hopping.len().min(cfg.exact_n - 1);
            let finite = evolve_hrs(&HrsSpec::new(hopping[..reach].to_vec(), gamma, cfg.exact_n, cfg.exact_n / 2), &run.times, 1e-10, 1e-13)?;
            let horizon = run
                .times
                .iter()
                .zip(finite.msd.iter().zip(&law))
                .take_while(|(t, (f, l))| **t == 0.0 || (*f / *l - 1.0).abs() <= cfg.boundary_tolerance)
                .count();
            let records = (0..run.times.len()).map(|i| vec![run.msd[i], law[i], finite.msd[i]]).collect();
            rep.series.push(series_from(
                &format!("exact_msd_gamma_{g}"),
                "columns: post-selected exact <x^2>, closed form, finite-chain law",
                vec![3],
                &run.times,
                records,
            )?);
            rep.series.push(series_from(
                &format!("exact_density_gamma_{g}"),
                "post-selected one-exciton site occupations",
                vec![cfg.exact_n],
                &run.times,
                run.profiles.clone(),
            )?);
            rep.ensembles.push(run.stat);
            if k == 0 {
                let err = worst_relative(&run.msd, &law, |i| i < horizon && run.times[i] >= cfg.compare_from);
                let until = run.times[horizon.saturating_sub(1)];
                rep.check(
                    "exact_matches_law",
                    err <= cfg.law_tolerance && horizon > 1,
                    format!("gamma = {gamma}: largest relative deviation {err:.4} for {} <= t <= {until:.3} us (need <= {})", cfg.compare_from, cfg.law_tolerance),
                );
            }
        }
    }

    if cfg.engines.contains(&Engine::Effective) {
        decay_check(cfg, &mut rep)?;
    }
    Ok(rep)
}
