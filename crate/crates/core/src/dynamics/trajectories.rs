//! Quantum-trajectory unravelling of the master equation.
//!
//! Dephasing `sqrt(gamma) n_i` is unravelled exactly as random `sigma^z_i`
//! kicks at rate `gamma / 4` per site, which leave the norm untouched.
//! Decay `sqrt(kappa) sigma^-_i` uses the waiting-time method: the state
//! evolves under `H - i kappa/2 N` until its squared norm drops below a
//! uniform random threshold, then jumps.

use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;

use super::propagator::{norm2, Propagator};
use super::{EvolutionConfig, Generator};
use crate::basis::{check_same_basis, QuantumState, Sector};
use crate::error::{Error, Result};
use crate::lattice::NoiseSpec;

/// Jumps that happened along one trajectory so far.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct JumpRecord {
    pub decays: usize,
    pub kicks: usize,
}

/// Ensemble means and standard errors of the observed quantities.
#[derive(Debug, Clone)]
pub struct EnsembleSeries {
    pub times: Vec<f64>,
    /// `mean[t][k]` for observable component `k`.
    pub mean: Vec<Vec<f64>>,
    pub std_err: Vec<Vec<f64>>,
    pub trajectories: usize,
}

impl EnsembleSeries {
    /// Per-time ratio `mean[num] / mean[den]` for estimators of the form
    /// `E[p X] / E[p]`.
    pub fn ratio(&self, num: usize, den: usize) -> Vec<f64> {
        self.mean.iter().map(|m| m[num] / m[den]).collect()
    }
}

/// Runs `cfg.trajectory_count` trajectories and averages `observe` over them.
///
/// `observe` receives the normalized state. Trajectory `k` draws from the
/// ChaCha8 stream `k` of `cfg.seed`, and the ensemble is reduced in index
/// order, so results do not depend on the thread count.
pub fn evolve_trajectories<F>(
    gen: &dyn Generator,
    noise: &NoiseSpec,
    psi0: &QuantumState,
    cfg: &EvolutionConfig,
    observe: F,
) -> Result<EnsembleSeries>
where
    F: Fn(f64, &QuantumState, &JumpRecord) -> Vec<f64> + Sync,
{
    cfg.validate()?;
    check_same_basis(gen.basis(), &psi0.basis)?;
    if cfg.trajectory_count == 0 {
        return Err(Error::Invalid("trajectory_count must be at least 1".into()));
    }
    let basis = Arc::clone(&psi0.basis);
    if noise.decay_kappa > 0.0 && matches!(basis.sector(), Sector::Excitations(_) | Sector::Dimer) {
        return Err(Error::Invalid(format!(
            "decay leaves the {} basis; use the full or an at-most sector",
            basis.sector()
        )));
    }
    let times = cfg.output_times();
    let n_sites = basis.n_sites();
    let damping = (noise.decay_kappa > 0.0)
        .then(|| Arc::new(basis.states().iter().map(|m| 0.5 * noise.decay_kappa * m.count_ones() as f64).collect::<Vec<_>>()));
    // Index of the configuration with site k emptied, for every state.
    let lowered: Vec<Vec<Option<usize>>> = if noise.decay_kappa > 0.0 {
        basis
            .states()
            .iter()
            .map(|&m| (0..n_sites).map(|k| if m >> k & 1 == 1 { basis.index(m & !(1 << k)) } else { None }).collect())
            .collect()
    } else {
        Vec::new()
    };
    let kick_rate = 0.25 * noise.dephasing_gamma * n_sites as f64;

    // Dense decompositions are built once and shared by every trajectory.
    let shared = Propagator::new(gen, cfg, damping.clone())?;
    let run = |index: usize| -> Result<Vec<Vec<f64>>> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(index as u64);
        let kicks = (kick_rate > 0.0).then(|| Exp::new(kick_rate).expect("positive rate"));
        let mut next_kick = match &kicks {
            Some(d) => d.sample(&mut rng),
            None => f64::INFINITY,
        };
        let mut threshold = damping.as_ref().map(|_| rng.random::<f64>());
        let mut prop = shared.fork();
        let mut psi: Vec<C64> = psi0.amplitudes.iter().copied().collect();
        let mut record = JumpRecord::default();
        let mut out = Vec::with_capacity(times.len());
        let snapshot = |psi: &[C64]| {
            let n = norm2(psi).sqrt();
            QuantumState { basis: Arc::clone(&basis), amplitudes: DVector::from_iterator(psi.len(), psi.iter().map(|z| z / n)) }
        };
        out.push(observe(times[0], &snapshot(&psi), &record));
        for w in times.windows(2) {
            let mut t = w[0];
            while t < w[1] {
                let stop = next_kick.min(w[1]);
                if let Some(tj) = prop.advance_watch(&mut psi, t, stop, threshold)? {
                    decay_jump(&mut psi, &lowered, &mut rng)?;
                    record.decays += 1;
                    threshold = Some(rng.random::<f64>());
                    t = tj;
                    continue;
                }
                t = stop;
                if next_kick <= w[1] {
                    let site = rng.random_range(0..n_sites);
                    for (a, &m) in psi.iter_mut().zip(basis.states()) {
                        if m >> site & 1 == 1 {
                            *a = -*a;
                        }
                    }
                    record.kicks += 1;
                    next_kick += kicks.as_ref().map_or(f64::INFINITY, |d| d.sample(&mut rng));
                }
            }
            out.push(observe(w[1], &snapshot(&psi), &record));
        }
        Ok(out)
    };

    let runs: Vec<Vec<Vec<f64>>> = (0..cfg.trajectory_count).into_par_iter().map(run).collect::<Result<_>>()?;
    let count = runs.len() as f64;
    let mut mean = Vec::with_capacity(times.len());
    let mut std_err = Vec::with_capacity(times.len());
    for ti in 0..times.len() {
        let width = runs[0][ti].len();
        let mut m = vec![0.0; width];
        for r in &runs {
            if r[ti].len() != width {
                return Err(Error::Invalid("observable length changed between trajectories".into()));
            }
            for (acc, v) in m.iter_mut().zip(&r[ti]) {
                *acc += v;
            }
        }
        m.iter_mut().for_each(|v| *v /= count);
        let mut s = vec![0.0; width];
        if runs.len() > 1 {
            for r in &runs {
                for ((acc, v), mu) in s.iter_mut().zip(&r[ti]).zip(&m) {
                    *acc += (v - mu).powi(2);
                }
            }
            s.iter_mut().for_each(|v| *v = (*v / (count - 1.0) / count).sqrt());
        }
        mean.push(m);
        std_err.push(s);
    }
    Ok(EnsembleSeries { times, mean, std_err, trajectories: runs.len() })
}

fn decay_jump(psi: &mut [C64], lowered: &[Vec<Option<usize>>], rng: &mut ChaCha8Rng) -> Result<()> {
    let n_sites = lowered.first().map_or(0, |v| v.len());
    let mut weights = vec![0.0; n_sites];
    for (a, row) in psi.iter().zip(lowered) {
        for (k, l) in row.iter().enumerate() {
            if l.is_some() {
                weights[k] += a.norm_sqr();
            }
        }
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Invalid("decay jump from a state without excitations".into()));
    }
    let mut pick = rng.random::<f64>() * total;
    let mut site = n_sites - 1;
    for (k, w) in weights.iter().enumerate() {
        if pick < *w {
            site = k;
            break;
        }
        pick -= w;
    }
    let mut next = vec![C64::new(0.0, 0.0); psi.len()];
    for (a, row) in psi.iter().zip(lowered) {
        if let Some(l) = row[site] {
            next[l] = *a;
        }
    }
    let n = norm2(&next).sqrt();
    for (p, q) in psi.iter_mut().zip(next) {
        *p = q / n;
    }
    Ok(())
}
