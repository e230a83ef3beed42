use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::basis::{build_basis, Sector, SubspaceBasis};
use crate::dynamics::Generator;
use crate::error::{Error, Result};
use crate::lattice::{ChainSpec, Dressing, DressingProfile};
use crate::linalg::{Operator, ZERO};

/// The dressed-chain Hamiltonian on the full `2^N` basis, frozen at one time.
///
/// Stored matrix-free: a diagonal holding the detuning and interaction
/// energies of every configuration, and one half-Rabi amplitude per site for
/// the single-bit flips.
#[derive(Debug, Clone)]
pub struct ExactHamiltonian {
    basis: Arc<SubspaceBasis>,
    diagonal: Vec<f64>,
    half_rabi: Vec<f64>,
}

/// `sum_{i<j} V_ij n_i n_j` for every configuration.
fn interaction_diagonal(v: &DMatrix<f64>) -> Vec<f64> {
    let n = v.nrows();
    let mut out = vec![0.0; 1 << n];
    for s in 1usize..(1 << n) {
        let low = s.trailing_zeros() as usize;
        let rest = s & (s - 1);
        let mut e = out[rest];
        let mut r = rest;
        while r != 0 {
            let j = r.trailing_zeros() as usize;
            e += v[(low, j)];
            r &= r - 1;
        }
        out[s] = e;
    }
    out
}

impl ExactHamiltonian {
    pub fn build(chain: &ChainSpec, dressing: &DressingProfile, t: f64) -> Result<Self> {
        ExactModel::new(chain, dressing)?.hamiltonian(t)
    }

    pub fn from_dressing(chain: &ChainSpec, dressing: &Dressing) -> Result<Self> {
        let basis = build_basis(chain.n_sites, Sector::Full)?;
        let inter = interaction_diagonal(&chain.interaction_matrix());
        Self::assemble(basis, &inter, dressing)
    }

    /// Builds from an explicit interaction matrix; works for any `N >= 1`,
    /// including a lone atom where no chain can be specified.
    pub fn from_interaction(v: &DMatrix<f64>, dressing: &Dressing) -> Result<Self> {
        if v.nrows() != v.ncols() {
            return Err(Error::Invalid("interaction matrix must be square".into()));
        }
        let basis = build_basis(v.nrows(), Sector::Full)?;
        Self::assemble(basis, &interaction_diagonal(v), dressing)
    }

    fn assemble(basis: Arc<SubspaceBasis>, inter: &[f64], dressing: &Dressing) -> Result<Self> {
        let n = basis.n_sites();
        if dressing.rabi.len() != n {
            return Err(Error::Invalid(format!("dressing covers {} sites, chain has {n}", dressing.rabi.len())));
        }
        let mut diagonal = inter.to_vec();
        for (s, e) in diagonal.iter_mut().enumerate() {
            let mut r = s;
            while r != 0 {
                *e += dressing.detuning[r.trailing_zeros() as usize];
                r &= r - 1;
            }
        }
        Ok(ExactHamiltonian {
            basis,
            diagonal,
            half_rabi: dressing.rabi.iter().map(|w| 0.5 * w).collect(),
        })
    }

    pub fn basis(&self) -> &Arc<SubspaceBasis> {
        &self.basis
    }

    pub fn n_sites(&self) -> usize {
        self.basis.n_sites()
    }

    /// Bare energy of every configuration, indexed by mask.
    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    /// Off-diagonal amplitude `Omega_i / 2` of the flip on site `i`.
    pub fn half_rabi(&self) -> &[f64] {
        &self.half_rabi
    }

    /// `a * self + b * other`; both must live on the same chain.
    pub fn combine(&self, a: f64, other: &ExactHamiltonian, b: f64) -> Self {
        ExactHamiltonian {
            basis: Arc::clone(&self.basis),
            diagonal: self.diagonal.iter().zip(&other.diagonal).map(|(x, y)| a * x + b * y).collect(),
            half_rabi: self.half_rabi.iter().zip(&other.half_rabi).map(|(x, y)| a * x + b * y).collect(),
        }
    }

    /// Upper bound on the spectral radius.
    pub fn norm_bound(&self) -> f64 {
        let d = self.diagonal.iter().fold(0.0f64, |m, e| m.max(e.abs()));
        d + self.half_rabi.iter().map(|h| h.abs()).sum::<f64>()
    }
}

impl Operator for ExactHamiltonian {
    fn dim(&self) -> usize {
        self.diagonal.len()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        for ((yi, xi), d) in y.iter_mut().zip(x).zip(&self.diagonal) {
            *yi = xi * d;
        }
        for (i, &h) in self.half_rabi.iter().enumerate() {
            if h == 0.0 {
                continue;
            }
            let bit = 1usize << i;
            // Visit each (s, s ^ bit) pair once, in contiguous runs of length `bit`.
            for base in (0..x.len()).step_by(2 * bit) {
                let (lo, hi) = (base, base + bit);
                for k in 0..bit {
                    let a = x[lo + k];
                    let b = x[hi + k];
                    y[lo + k] += b * h;
                    y[hi + k] += a * h;
                }
            }
        }
    }

    fn is_hermitian(&self) -> bool {
        true
    }

    fn to_dense(&self) -> DMatrix<C64> {
        let dim = self.diagonal.len();
        let mut m = DMatrix::from_element(dim, dim, ZERO);
        for s in 0..dim {
            m[(s, s)] = C64::from(self.diagonal[s]);
            for (i, &h) in self.half_rabi.iter().enumerate() {
                m[(s ^ (1 << i), s)] += C64::from(h);
            }
        }
        m
    }
}

/// The exact Hamiltonian restricted to a subset of configurations; flips
/// that leave the subset are dropped.
#[derive(Debug, Clone)]
pub struct SectorHamiltonian {
    basis: Arc<SubspaceBasis>,
    diagonal: Vec<f64>,
    /// `(a, b, amplitude)` for every flip with both ends inside, `a < b`.
    flips: Vec<(usize, usize, f64)>,
}

impl SectorHamiltonian {
    pub fn restrict(full: &ExactHamiltonian, basis: Arc<SubspaceBasis>) -> Result<Self> {
        if basis.n_sites() != full.n_sites() {
            return Err(Error::BasisMismatch(format!("{} sites vs {}", basis.n_sites(), full.n_sites())));
        }
        let diagonal = basis.states().iter().map(|&m| full.diagonal[m as usize]).collect();
        let mut flips = Vec::new();
        for (a, &m) in basis.states().iter().enumerate() {
            for (i, &h) in full.half_rabi.iter().enumerate() {
                if h == 0.0 {
                    continue;
                }
                if let Some(b) = basis.index(m ^ (1 << i)) {
                    if a < b {
                        flips.push((a, b, h));
                    }
                }
            }
        }
        Ok(SectorHamiltonian { basis, diagonal, flips })
    }

    pub fn basis(&self) -> &Arc<SubspaceBasis> {
        &self.basis
    }
}

impl Operator for SectorHamiltonian {
    fn dim(&self) -> usize {
        self.diagonal.len()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        for ((yi, xi), d) in y.iter_mut().zip(x).zip(&self.diagonal) {
            *yi = xi * d;
        }
        for &(a, b, h) in &self.flips {
            y[a] += x[b] * h;
            y[b] += x[a] * h;
        }
    }

    fn is_hermitian(&self) -> bool {
        true
    }

    fn to_dense(&self) -> DMatrix<C64> {
        let dim = self.diagonal.len();
        let mut m = DMatrix::from_element(dim, dim, ZERO);
        for (k, &d) in self.diagonal.iter().enumerate() {
            m[(k, k)] = C64::from(d);
        }
        for &(a, b, h) in &self.flips {
            m[(a, b)] += C64::from(h);
            m[(b, a)] += C64::from(h);
        }
        m
    }
}

/// Time-dependent exact Hamiltonian: the chain interaction energies are
/// computed once and the dressing is re-evaluated on demand.
///
/// By default it acts on all `2^N` configurations; [`ExactModel::truncated`]
/// keeps only configurations with at most `k` excitations.
#[derive(Debug, Clone)]
pub struct ExactModel {
    basis: Arc<SubspaceBasis>,
    interaction: Arc<Vec<f64>>,
    profile: DressingProfile,
    frozen: Option<Arc<dyn Operator>>,
}

impl ExactModel {
    pub fn new(chain: &ChainSpec, profile: &DressingProfile) -> Result<Self> {
        Self::on_sector(chain, profile, Sector::Full)
    }

    pub fn truncated(chain: &ChainSpec, profile: &DressingProfile, max_excitations: usize) -> Result<Self> {
        if max_excitations >= chain.n_sites {
            return Self::new(chain, profile);
        }
        Self::on_sector(chain, profile, Sector::AtMost(max_excitations))
    }

    fn on_sector(chain: &ChainSpec, profile: &DressingProfile, sector: Sector) -> Result<Self> {
        chain.validate()?;
        profile.check_sites(chain)?;
        let basis = build_basis(chain.n_sites, sector)?;
        let interaction = Arc::new(interaction_diagonal(&chain.interaction_matrix()));
        let mut model = ExactModel { basis, interaction, profile: profile.clone(), frozen: None };
        if profile.is_static() {
            model.frozen = Some(model.operator(model.full_hamiltonian(0.0)?)?);
        }
        Ok(model)
    }

    pub fn basis(&self) -> &Arc<SubspaceBasis> {
        &self.basis
    }

    /// The Hamiltonian at `t` on the full configuration space.
    pub fn hamiltonian(&self, t: f64) -> Result<ExactHamiltonian> {
        self.full_hamiltonian(t)
    }

    fn full_hamiltonian(&self, t: f64) -> Result<ExactHamiltonian> {
        let full = build_basis(self.basis.n_sites(), Sector::Full)?;
        ExactHamiltonian::assemble(full, &self.interaction, &self.profile.at(t)?)
    }

    fn operator(&self, h: ExactHamiltonian) -> Result<Arc<dyn Operator>> {
        if self.basis.sector() == Sector::Full {
            Ok(Arc::new(h))
        } else {
            Ok(Arc::new(SectorHamiltonian::restrict(&h, Arc::clone(&self.basis))?))
        }
    }
}

impl Generator for ExactModel {
    fn basis(&self) -> &Arc<SubspaceBasis> {
        &self.basis
    }

    fn is_static(&self) -> bool {
        self.frozen.is_some()
    }

    fn at(&self, t: f64) -> Result<Arc<dyn Operator>> {
        match &self.frozen {
            Some(h) => Ok(Arc::clone(h)),
            None => self.operator(self.full_hamiltonian(t)?),
        }
    }

    fn blend(&self, t1: f64, w1: f64, t2: f64, w2: f64) -> Result<Arc<dyn Operator>> {
        let h1 = self.full_hamiltonian(t1)?;
        let h2 = self.full_hamiltonian(t2)?;
        self.operator(h1.combine(w1, &h2, w2))
    }
}
