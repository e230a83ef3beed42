//! Bitmask bases for the full Hilbert space and its excitation sectors, plus
//! the state and density-operator containers defined over them.
//!
//! Site `i` is bit `i` of a configuration mask; a set bit means the atom is in
//! the Rydberg state. States within a basis are ordered by ascending mask.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest chain the bitmask bases support.
pub const MAX_SITES: usize = 24;

/// Default floor on the post-selection probability.
pub const POST_SELECTION_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sector {
    /// All `2^N` configurations.
    Full,
    /// Configurations with exactly `n` excitations.
    Excitations(usize),
    /// Configurations with at most `n` excitations.
    AtMost(usize),
    /// Adjacent pairs `(i, i+1)` on the open chain.
    Dimer,
}

impl fmt::Display for Sector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sector::Full => write!(f, "full"),
            Sector::Excitations(n) => write!(f, "{n}-exciton"),
            Sector::AtMost(n) => write!(f, "at-most-{n}-exciton"),
            Sector::Dimer => write!(f, "dimer"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubspaceBasis {
    n_sites: usize,
    sector: Sector,
    states: Vec<u64>,
}

type BasisCache = Mutex<HashMap<(usize, Sector), Arc<SubspaceBasis>>>;

fn basis_cache() -> &'static BasisCache {
    static CACHE: OnceLock<BasisCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Shared basis for `(n_sites, sector)`, built once per process.
pub fn build_basis(n_sites: usize, sector: Sector) -> Result<Arc<SubspaceBasis>> {
    let key = (n_sites, sector);
    if let Some(b) = basis_cache().lock().unwrap().get(&key) {
        return Ok(Arc::clone(b));
    }
    let basis = Arc::new(SubspaceBasis::enumerate(n_sites, sector)?);
    basis_cache().lock().unwrap().insert(key, Arc::clone(&basis));
    Ok(basis)
}

impl SubspaceBasis {
    fn enumerate(n_sites: usize, sector: Sector) -> Result<Self> {
        if n_sites == 0 || n_sites > MAX_SITES {
            return Err(Error::Invalid(format!("unsupported chain length {n_sites}")));
        }
        let empty = || Error::EmptySector { sector: sector.to_string(), n_sites };
        let states: Vec<u64> = match sector {
            Sector::Full => (0..1u64 << n_sites).collect(),
            Sector::Excitations(n) => {
                if n > n_sites {
                    return Err(empty());
                }
                (0..1u64 << n_sites).filter(|s| s.count_ones() as usize == n).collect()
            }
            Sector::AtMost(n) => (0..1u64 << n_sites).filter(|s| s.count_ones() as usize <= n).collect(),
            Sector::Dimer => {
                if n_sites < 2 {
                    return Err(empty());
                }
                (0..n_sites - 1).map(|i| 0b11u64 << i).collect()
            }
        };
        Ok(SubspaceBasis { n_sites, sector, states })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn sector(&self) -> Sector {
        self.sector
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[u64] {
        &self.states
    }

    pub fn state(&self, k: usize) -> u64 {
        self.states[k]
    }

    /// Ordinal of configuration `mask`, if it belongs to the basis.
    pub fn index(&self, mask: u64) -> Option<usize> {
        match self.sector {
            Sector::Full => ((mask as usize) < self.states.len()).then_some(mask as usize),
            _ => self.states.binary_search(&mask).ok(),
        }
    }

    pub fn contains(&self, mask: u64) -> bool {
        self.index(mask).is_some()
    }

    /// Index of the single-excitation configuration on `site`.
    pub fn single(&self, site: usize) -> Option<usize> {
        self.index(1u64 << site)
    }
}

/// Mask with the listed sites excited.
pub fn config(sites: &[usize]) -> u64 {
    sites.iter().fold(0u64, |m, &s| m | (1u64 << s))
}

pub fn is_excited(mask: u64, site: usize) -> bool {
    mask >> site & 1 == 1
}

/// Pure state over a basis.
#[derive(Debug, Clone)]
pub struct QuantumState {
    pub basis: Arc<SubspaceBasis>,
    pub amplitudes: DVector<C64>,
}

impl QuantumState {
    /// Normalizes the supplied amplitudes.
    pub fn new(basis: Arc<SubspaceBasis>, amplitudes: DVector<C64>) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(Error::BasisMismatch(format!(
                "{} amplitudes for a basis of dimension {}",
                amplitudes.len(),
                basis.dim()
            )));
        }
        let norm = amplitudes.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Invalid("state has zero or non-finite norm".into()));
        }
        Ok(QuantumState { basis, amplitudes: amplitudes / C64::from(norm) })
    }

    /// Equal-weight superposition of the listed configurations with the given
    /// complex coefficients.
    pub fn superposition(basis: Arc<SubspaceBasis>, terms: &[(u64, C64)]) -> Result<Self> {
        let mut amps = DVector::zeros(basis.dim());
        for &(mask, c) in terms {
            let k = basis
                .index(mask)
                .ok_or_else(|| Error::BasisMismatch(format!("configuration {mask:#b} not in {} basis", basis.sector())))?;
            amps[k] += c;
        }
        Self::new(basis, amps)
    }

    pub fn basis_state(basis: Arc<SubspaceBasis>, mask: u64) -> Result<Self> {
        Self::superposition(basis, &[(mask, C64::new(1.0, 0.0))])
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn overlap(&self, other: &QuantumState) -> Result<C64> {
        check_same_basis(&self.basis, &other.basis)?;
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    pub fn to_density(&self) -> DensityOperator {
        DensityOperator {
            basis: Arc::clone(&self.basis),
            matrix: &self.amplitudes * self.amplitudes.adjoint(),
        }
    }

    /// Amplitudes re-expressed in `target`; components outside `target` are
    /// dropped and the result is not renormalized.
    pub fn amplitudes_in(&self, target: &SubspaceBasis) -> DVector<C64> {
        let mut out = DVector::zeros(target.dim());
        for (k, &mask) in self.basis.states().iter().enumerate() {
            if let Some(j) = target.index(mask) {
                out[j] = self.amplitudes[k];
            }
        }
        out
    }

    /// Populations of the `n`-exciton configurations after post-selection,
    /// with the post-selection probability.
    pub fn post_select(&self, n: usize) -> Result<(DVector<f64>, f64)> {
        let sector = build_basis(self.basis.n_sites(), Sector::Excitations(n))?;
        let amps = self.amplitudes_in(&sector);
        let pops = amps.map(|a| a.norm_sqr());
        let p = pops.sum();
        if p < POST_SELECTION_FLOOR {
            return Err(Error::EmptyPostSelection(p));
        }
        Ok((pops / p, p))
    }
}

/// Density matrix over a basis. The trace is not forced to one so that
/// non-trace-preserving intermediates can carry it explicitly.
#[derive(Debug, Clone)]
pub struct DensityOperator {
    pub basis: Arc<SubspaceBasis>,
    pub matrix: DMatrix<C64>,
}

impl DensityOperator {
    pub fn new(basis: Arc<SubspaceBasis>, matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != basis.dim() || matrix.ncols() != basis.dim() {
            return Err(Error::BasisMismatch(format!(
                "{}x{} matrix for a basis of dimension {}",
                matrix.nrows(),
                matrix.ncols(),
                basis.dim()
            )));
        }
        Ok(DensityOperator { basis, matrix })
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diagonal().iter().map(|z| z.re).sum()
    }

    /// Largest entry of `rho - rho^dagger`.
    pub fn hermiticity_error(&self) -> f64 {
        let m = &self.matrix;
        (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn populations(&self) -> DVector<f64> {
        self.matrix.diagonal().map(|z| z.re)
    }

    /// Block of the matrix over the configurations of `target`.
    pub fn restricted_to(&self, target: &Arc<SubspaceBasis>) -> DMatrix<C64> {
        let idx: Vec<Option<usize>> = target.states().iter().map(|&m| self.basis.index(m)).collect();
        DMatrix::from_fn(target.dim(), target.dim(), |a, b| match (idx[a], idx[b]) {
            (Some(i), Some(j)) => self.matrix[(i, j)],
            _ => C64::new(0.0, 0.0),
        })
    }

    /// Embeds the operator into a larger basis, padding with zeros.
    pub fn embedded_in(&self, target: &Arc<SubspaceBasis>) -> Result<DensityOperator> {
        let mut m = DMatrix::zeros(target.dim(), target.dim());
        let idx: Vec<usize> = self
            .basis
            .states()
            .iter()
            .map(|&mask| {
                target
                    .index(mask)
                    .ok_or_else(|| Error::BasisMismatch(format!("configuration {mask:#b} not in target basis")))
            })
            .collect::<Result<_>>()?;
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                m[(i, j)] = self.matrix[(a, b)];
            }
        }
        DensityOperator::new(Arc::clone(target), m)
    }
}

/// Post-selection onto the `n`-exciton sector.
///
/// Returns `rho_p = p^-1 sum_k p_k P_k` over the sector basis, where `P_k`
/// projects onto configuration `k` and `p_k = Tr(rho P_k)`, together with
/// `p = sum_k p_k`. The result is diagonal: it is meant for observables that
/// only read populations.
pub fn project_to_sector(rho: &DensityOperator, n: usize) -> Result<(DensityOperator, f64)> {
    project_to_sector_with_floor(rho, n, POST_SELECTION_FLOOR)
}

pub fn project_to_sector_with_floor(rho: &DensityOperator, n: usize, floor: f64) -> Result<(DensityOperator, f64)> {
    let sector = build_basis(rho.basis.n_sites(), Sector::Excitations(n))?;
    let pops: Vec<f64> = sector
        .states()
        .iter()
        .map(|&m| rho.basis.index(m).map_or(0.0, |i| rho.matrix[(i, i)].re))
        .collect();
    let p: f64 = pops.iter().sum();
    if !(p >= floor) || p == 0.0 {
        return Err(Error::EmptyPostSelection(p));
    }
    let diag = DVector::from_iterator(pops.len(), pops.iter().map(|&pk| C64::new(pk / p, 0.0)));
    Ok((DensityOperator::new(sector, DMatrix::from_diagonal(&diag))?, p))
}

pub(crate) fn check_same_basis(a: &SubspaceBasis, b: &SubspaceBasis) -> Result<()> {
    if a != b {
        return Err(Error::BasisMismatch(format!(
            "{} basis on {} sites vs {} basis on {} sites",
            a.sector(),
            a.n_sites(),
            b.sector(),
            b.n_sites()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_sites_single_excitation() {
        let b = build_basis(2, Sector::Excitations(1)).unwrap();
        assert_eq!(b.states(), &[0b01, 0b10]);
        assert_eq!(b.dim(), 2);
    }

    #[test]
    fn sector_dimensions() {
        assert_eq!(build_basis(6, Sector::Excitations(2)).unwrap().dim(), 15);
        assert_eq!(build_basis(13, Sector::Dimer).unwrap().dim(), 12);
        assert_eq!(build_basis(5, Sector::Full).unwrap().dim(), 32);
        assert_eq!(build_basis(5, Sector::AtMost(1)).unwrap().dim(), 6);
    }

    #[test]
    fn too_many_excitations_is_an_empty_sector() {
        assert!(matches!(
            build_basis(3, Sector::Excitations(4)),
            Err(Error::EmptySector { .. })
        ));
    }

    #[test]
    fn index_inverts_enumeration() {
        for sector in [Sector::Full, Sector::Excitations(3), Sector::Dimer, Sector::AtMost(2)] {
            let b = build_basis(7, sector).unwrap();
            for (k, &m) in b.states().iter().enumerate() {
                assert_eq!(b.index(m), Some(k));
            }
            assert!(b.states().windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn bases_are_cached() {
        let a = build_basis(8, Sector::Excitations(2)).unwrap();
        let b = build_basis(8, Sector::Excitations(2)).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
    }

    #[test]
    fn single_exciton_projection_is_exact() {
        let full = build_basis(4, Sector::Full).unwrap();
        let psi = QuantumState::basis_state(full, config(&[1])).unwrap();
        let (rho_p, p) = project_to_sector(&psi.to_density(), 1).unwrap();
        assert!((p - 1.0).abs() < 1e-15);
        let k = rho_p.basis.single(1).unwrap();
        assert!((rho_p.matrix[(k, k)].re - 1.0).abs() < 1e-15);
        assert!((rho_p.trace() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ground_state_has_empty_post_selection() {
        let full = build_basis(4, Sector::Full).unwrap();
        let g = QuantumState::basis_state(full, 0).unwrap();
        assert!(matches!(project_to_sector(&g.to_density(), 1), Err(Error::EmptyPostSelection(_))));
    }

    fn random_density(n_sites: usize, seed: &[f64]) -> DensityOperator {
        let full = build_basis(n_sites, Sector::Full).unwrap();
        let d = full.dim();
        let a = DMatrix::from_fn(d, d, |i, j| {
            let x = seed[(i * d + j) % seed.len()];
            C64::new(x.sin() * (i + 1) as f64, (x * 1.7 + j as f64).cos())
        });
        let m = &a * a.adjoint();
        let tr = m.trace();
        DensityOperator::new(full, m / tr).unwrap()
    }

    proptest! {
        #[test]
        fn sector_probabilities_sum_to_one(seed in proptest::collection::vec(-3.0f64..3.0, 7..40)) {
            let rho = random_density(4, &seed);
            let total: f64 = (0..=4).map(|n| project_to_sector(&rho, n).map_or(0.0, |(_, p)| p)).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }

        #[test]
        fn projection_is_idempotent(seed in proptest::collection::vec(-3.0f64..3.0, 7..40), n in 0usize..=4) {
            let rho = random_density(4, &seed);
            let (once, _) = project_to_sector(&rho, n).unwrap();
            let full = Arc::clone(&rho.basis);
            let (twice, p) = project_to_sector(&once.embedded_in(&full).unwrap(), n).unwrap();
            prop_assert!((p - 1.0).abs() < 1e-12);
            prop_assert!((&once.matrix - &twice.matrix).norm() < 1e-12);
        }
    }
}
