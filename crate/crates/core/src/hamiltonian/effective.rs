use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::Guards;
use crate::basis::{Sector, SubspaceBasis};
use crate::dynamics::Generator;
use crate::error::{Error, Result};
use crate::lattice::{ChainSpec, Dressing, DressingProfile};
use crate::linalg::{DenseOperator, Operator};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct EffectiveOptions {
    pub guards: Guards,
    /// Keep only pairs at most this many sites apart. `None` keeps every pair.
    pub range: Option<usize>,
}

impl EffectiveOptions {
    pub fn with_range(range: Option<usize>) -> Self {
        EffectiveOptions { range, ..Default::default() }
    }
}

/// Coefficients of the tight-binding exciton model, evaluated at one time.
///
/// Energies follow the convention in which the ground configuration has zero
/// energy: the second-order constant `-sum_j Omega_j^2 / 4 Delta_j` is dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveModel {
    pub n_sites: usize,
    pub rabi: Vec<f64>,
    pub detuning: Vec<f64>,
    /// Pair interactions after the range cutoff.
    pub interaction: DMatrix<f64>,
    /// On-site potential `mu_i`.
    pub mu: Vec<f64>,
    /// Ising shift `I_ij`; not symmetric.
    pub ising: DMatrix<f64>,
    /// Exchange `J_ij`.
    pub exchange: DMatrix<f64>,
    /// `U_ij = V_ij - 2 (I_ij + I_ji)`.
    pub exciton_interaction: DMatrix<f64>,
    /// Three-body hop `J2_i` between the dimers `(i, i+1)` and `(i+1, i+2)`.
    pub dimer_exchange: Vec<f64>,
    /// Energy of dimer `(i, i+1)`.
    pub dimer_energy: Vec<f64>,
    pub warnings: Vec<String>,
}

pub fn derive_effective(
    chain: &ChainSpec,
    profile: &DressingProfile,
    t: f64,
    opts: &EffectiveOptions,
) -> Result<EffectiveModel> {
    profile.check_sites(chain)?;
    derive_from_dressing(chain, &profile.at(t)?, opts)
}

pub fn derive_from_dressing(chain: &ChainSpec, dressing: &Dressing, opts: &EffectiveOptions) -> Result<EffectiveModel> {
    chain.validate()?;
    let n = chain.n_sites;
    if dressing.rabi.len() != n || dressing.detuning.len() != n {
        return Err(Error::Invalid(format!("dressing covers {} sites, chain has {n}", dressing.rabi.len())));
    }
    let (w, del) = (&dressing.rabi, &dressing.detuning);
    let mut warnings = Vec::new();
    for i in 0..n {
        opts.guards.check_rabi(i, w[i], del[i], &mut warnings)?;
    }

    let mut v = chain.interaction_matrix();
    if let Some(r) = opts.range {
        for i in 0..n {
            for j in 0..n {
                if chain.site_separation(i, j) > r {
                    v[(i, j)] = 0.0;
                }
            }
        }
    }

    let mut ising = DMatrix::zeros(n, n);
    let mut exchange = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i == j || v[(i, j)] == 0.0 {
                continue;
            }
            let vij = v[(i, j)];
            opts.guards.check_gap((i, j), del[j], vij, &mut warnings)?;
            // Amplitude ratio V / [Delta_b (Delta_b + V)] for the flipped atom b.
            let f = |b: usize| vij / (del[b] * (del[b] + vij));
            ising[(i, j)] = w[j] * w[j] * f(j) / 4.0;
            exchange[(i, j)] = w[i] * w[j] * (f(i) + f(j)) / 8.0;
        }
    }

    let mu: Vec<f64> = (0..n)
        .map(|i| del[i] + w[i] * w[i] / (2.0 * del[i]) + ising.row(i).sum())
        .collect();
    let exciton_interaction = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            v[(i, j)] - 2.0 * (ising[(i, j)] + ising[(j, i)])
        }
    });

    let mut dimer_exchange = Vec::new();
    let mut dimer_energy = Vec::new();
    if n >= 2 {
        let constant: f64 = (0..n).map(|m| w[m] * w[m] / (4.0 * del[m])).sum();
        for i in 0..n - 1 {
            let j = i + 1;
            let vij = v[(i, j)];
            let mut e = del[i] + del[j] + vij + constant;
            e += w[i] * w[i] / (4.0 * (del[i] + vij)) + w[j] * w[j] / (4.0 * (del[j] + vij));
            for m in (0..n).filter(|&m| m != i && m != j) {
                if w[m] == 0.0 {
                    continue;
                }
                let shift = v[(i, m)] + v[(j, m)];
                opts.guards.check_gap((i, m), del[m], shift, &mut warnings)?;
                e -= w[m] * w[m] / (4.0 * (del[m] + shift));
            }
            dimer_energy.push(e);
        }
        for i in 0..n.saturating_sub(2) {
            let (a, b, c) = (i, i + 1, i + 2);
            let vac = v[(a, c)];
            let left = del[a] + v[(a, b)];
            let right = del[c] + v[(b, c)];
            let amp = w[a] * w[c] * vac / 8.0;
            if amp == 0.0 {
                dimer_exchange.push(0.0);
                continue;
            }
            dimer_exchange.push(amp / (left * (left + vac)) + amp / (right * (right + vac)));
        }
    }

    Ok(EffectiveModel {
        n_sites: n,
        rabi: w.clone(),
        detuning: del.clone(),
        interaction: v,
        mu,
        ising,
        exchange,
        exciton_interaction,
        dimer_exchange,
        dimer_energy,
        warnings,
    })
}

impl EffectiveModel {
    /// Leading-order single-term simplification of the dimer hop, keeping only
    /// the left intermediate path twice.
    pub fn dimer_exchange_simplified(&self) -> Vec<f64> {
        let (w, del, v) = (&self.rabi, &self.detuning, &self.interaction);
        (0..self.n_sites.saturating_sub(2))
            .map(|i| {
                let left = del[i] + v[(i, i + 1)];
                w[i] * w[i + 2] * v[(i, i + 2)] / (4.0 * left * (left + v[(i, i + 2)]))
            })
            .collect()
    }

    /// Diagonal energy of configuration `mask` under the pairwise model.
    pub fn configuration_energy(&self, mask: u64) -> f64 {
        let n = self.n_sites;
        let occ: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
        let mut e = 0.0;
        for &i in &occ {
            e += self.detuning[i] + self.rabi[i] * self.rabi[i] / (2.0 * self.detuning[i]);
            for j in 0..n {
                if mask >> j & 1 == 0 {
                    e += self.ising[(i, j)];
                }
            }
        }
        for (a, &i) in occ.iter().enumerate() {
            for &j in &occ[a + 1..] {
                e += self.interaction[(i, j)] - self.ising[(i, j)] - self.ising[(j, i)];
            }
        }
        e
    }

    /// Hamiltonian on a number-conserving basis: the pairwise hopping model on
    /// excitation sectors, the three-body dimer model on the dimer sector.
    pub fn matrix(&self, basis: &SubspaceBasis) -> Result<DMatrix<C64>> {
        if basis.n_sites() != self.n_sites {
            return Err(Error::BasisMismatch(format!(
                "model has {} sites, basis {}",
                self.n_sites,
                basis.n_sites()
            )));
        }
        let dim = basis.dim();
        let mut h = DMatrix::zeros(dim, dim);
        if basis.sector() == Sector::Dimer {
            for k in 0..dim {
                h[(k, k)] = C64::from(self.dimer_energy[k]);
            }
            for (k, &j2) in self.dimer_exchange.iter().enumerate() {
                h[(k, k + 1)] = C64::from(j2);
                h[(k + 1, k)] = C64::from(j2);
            }
            return Ok(h);
        }
        let n = self.n_sites;
        for (a, &s) in basis.states().iter().enumerate() {
            h[(a, a)] = C64::from(self.configuration_energy(s));
            for j in (0..n).filter(|&j| s >> j & 1 == 1) {
                for i in (0..n).filter(|&i| s >> i & 1 == 0) {
                    let jij = self.exchange[(i, j)];
                    if jij == 0.0 {
                        continue;
                    }
                    let t = s ^ (1 << j) ^ (1 << i);
                    let b = basis.index(t).ok_or_else(|| {
                        Error::BasisMismatch(format!("{} basis is not closed under hopping", basis.sector()))
                    })?;
                    h[(b, a)] += C64::from(jij);
                }
            }
        }
        Ok(h)
    }

    /// Single-exciton tight-binding matrix: `mu` on the diagonal, `J` off it.
    pub fn single_exciton_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_sites, self.n_sites, |i, j| if i == j { self.mu[i] } else { self.exchange[(i, j)] })
    }
}

/// Effective Hamiltonian on a fixed sector, re-derived whenever the dressing
/// changes.
#[derive(Debug, Clone)]
pub struct EffectiveFamily {
    chain: ChainSpec,
    profile: DressingProfile,
    opts: EffectiveOptions,
    basis: Arc<SubspaceBasis>,
    frozen: Option<Arc<DenseOperator>>,
}

impl EffectiveFamily {
    pub fn new(chain: &ChainSpec, profile: &DressingProfile, opts: EffectiveOptions, basis: Arc<SubspaceBasis>) -> Result<Self> {
        profile.check_sites(chain)?;
        let mut fam = EffectiveFamily {
            chain: chain.clone(),
            profile: profile.clone(),
            opts,
            basis,
            frozen: None,
        };
        // Validates the guards at t = 0 even for driven profiles.
        let h0 = fam.matrix(0.0)?;
        if profile.is_static() {
            fam.frozen = Some(Arc::new(DenseOperator::new(h0)));
        }
        Ok(fam)
    }

    pub fn basis(&self) -> &Arc<SubspaceBasis> {
        &self.basis
    }

    pub fn model(&self, t: f64) -> Result<EffectiveModel> {
        derive_effective(&self.chain, &self.profile, t, &self.opts)
    }

    pub fn matrix(&self, t: f64) -> Result<DMatrix<C64>> {
        self.model(t)?.matrix(&self.basis)
    }
}

impl Generator for EffectiveFamily {
    fn basis(&self) -> &Arc<SubspaceBasis> {
        &self.basis
    }

    fn is_static(&self) -> bool {
        self.frozen.is_some()
    }

    fn at(&self, t: f64) -> Result<Arc<dyn Operator>> {
        match &self.frozen {
            Some(h) => Ok(h.clone() as Arc<dyn Operator>),
            None => Ok(Arc::new(DenseOperator::new(self.matrix(t)?))),
        }
    }

    fn blend(&self, t1: f64, w1: f64, t2: f64, w2: f64) -> Result<Arc<dyn Operator>> {
        let m = self.matrix(t1)? * C64::from(w1) + self.matrix(t2)? * C64::from(w2);
        Ok(Arc::new(DenseOperator::new(m)))
    }
}
