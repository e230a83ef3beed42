//! Populations, correlations, entanglement and displacement measures.

mod com;

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::basis::{build_basis, check_same_basis, DensityOperator, QuantumState, Sector, SubspaceBasis, POST_SELECTION_FLOOR};
use crate::error::{Error, Result};
use crate::linalg::{hermiticity_error, HermitianEigen, ZERO};

pub use com::{bessel_j, com_distribution, fit_com, ComDistribution, ComFit, FitResult};

/// Anything with configuration probabilities over a basis.
pub trait SiteResolved {
    fn basis(&self) -> &Arc<SubspaceBasis>;
    fn probabilities(&self) -> Vec<f64>;
}

impl SiteResolved for QuantumState {
    fn basis(&self) -> &Arc<SubspaceBasis> {
        &self.basis
    }

    fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }
}

impl SiteResolved for DensityOperator {
    fn basis(&self) -> &Arc<SubspaceBasis> {
        &self.basis
    }

    fn probabilities(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().map(|z| z.re).collect()
    }
}

fn profile_from(masks: &[u64], probs: &[f64], n_sites: usize) -> DVector<f64> {
    let mut out = DVector::zeros(n_sites);
    for (&m, &p) in masks.iter().zip(probs) {
        let mut r = m;
        while r != 0 {
            out[r.trailing_zeros() as usize] += p;
            r &= r - 1;
        }
    }
    out
}

fn g2_from(masks: &[u64], probs: &[f64], n_sites: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(n_sites, n_sites);
    for (&m, &p) in masks.iter().zip(probs) {
        if m.count_ones() < 2 || p == 0.0 {
            continue;
        }
        let sites: Vec<usize> = (0..n_sites).filter(|&k| m >> k & 1 == 1).collect();
        for (a, &i) in sites.iter().enumerate() {
            for &j in &sites[a + 1..] {
                out[(i, j)] += p;
                out[(j, i)] += p;
            }
        }
    }
    out
}

/// `<n_i>` for every site.
pub fn density_profile(state: &impl SiteResolved) -> DVector<f64> {
    let b = state.basis();
    profile_from(b.states(), &state.probabilities(), b.n_sites())
}

/// `g2_ij = <n_i n_j>` for `i != j`, zero on the diagonal.
pub fn g2_correlation(state: &impl SiteResolved) -> DMatrix<f64> {
    let b = state.basis();
    g2_from(b.states(), &state.probabilities(), b.n_sites())
}

/// `g2` divided by its largest entry; all zeros stay zero.
pub fn g2_normalized(g2: &DMatrix<f64>) -> DMatrix<f64> {
    let m = g2.max();
    if m > 0.0 {
        g2 / m
    } else {
        g2.clone()
    }
}

/// Configuration probabilities conditioned on exactly `n` excitations.
#[derive(Debug, Clone)]
pub struct PostSelected {
    pub basis: Arc<SubspaceBasis>,
    pub probabilities: Vec<f64>,
    /// Probability of the `n`-exciton sector before conditioning.
    pub weight: f64,
}

impl PostSelected {
    pub fn profile(&self) -> DVector<f64> {
        profile_from(self.basis.states(), &self.probabilities, self.basis.n_sites())
    }

    pub fn g2(&self) -> DMatrix<f64> {
        g2_from(self.basis.states(), &self.probabilities, self.basis.n_sites())
    }
}

pub fn post_select(state: &impl SiteResolved, n: usize) -> Result<PostSelected> {
    let src = state.basis();
    let target = build_basis(src.n_sites(), Sector::Excitations(n))?;
    let probs = state.probabilities();
    let mut out = vec![0.0; target.dim()];
    for (&m, p) in src.states().iter().zip(probs) {
        if let Some(k) = target.index(m) {
            out[k] = p;
        }
    }
    let weight: f64 = out.iter().sum();
    if weight < POST_SELECTION_FLOOR {
        return Err(Error::EmptyPostSelection(weight));
    }
    out.iter_mut().for_each(|p| *p /= weight);
    Ok(PostSelected { basis: target, probabilities: out, weight })
}

fn check_sites(n_sites: usize, keep: &[usize]) -> Result<()> {
    for (a, &k) in keep.iter().enumerate() {
        if k >= n_sites || keep[..a].contains(&k) {
            return Err(Error::Invalid(format!("invalid site list {keep:?} for {n_sites} sites")));
        }
    }
    Ok(())
}

/// Packs the kept sites of `mask` into a local index; `keep[0]` is bit 0.
fn local_index(mask: u64, keep: &[usize]) -> usize {
    keep.iter().enumerate().fold(0, |acc, (b, &k)| acc | (((mask >> k) & 1) as usize) << b)
}

fn environment(mask: u64, keep: &[usize]) -> u64 {
    keep.iter().fold(mask, |m, &k| m & !(1 << k))
}

/// Reduced density matrix on `keep`, ordered with `keep[0]` as the lowest bit.
pub fn partial_trace(rho: &DensityOperator, keep: &[usize]) -> Result<DMatrix<C64>> {
    let b = &rho.basis;
    check_sites(b.n_sites(), keep)?;
    let d = 1usize << keep.len();
    let mut out = DMatrix::from_element(d, d, ZERO);
    let states = b.states();
    let env: Vec<u64> = states.iter().map(|&m| environment(m, keep)).collect();
    let loc: Vec<usize> = states.iter().map(|&m| local_index(m, keep)).collect();
    for i in 0..states.len() {
        for j in 0..states.len() {
            if env[i] == env[j] {
                out[(loc[i], loc[j])] += rho.matrix[(i, j)];
            }
        }
    }
    Ok(out)
}

/// As [`partial_trace`] for a pure state, without forming the full matrix.
pub fn partial_trace_state(psi: &QuantumState, keep: &[usize]) -> Result<DMatrix<C64>> {
    let b = &psi.basis;
    check_sites(b.n_sites(), keep)?;
    let d = 1usize << keep.len();
    let mut groups: BTreeMap<u64, Vec<(usize, C64)>> = BTreeMap::new();
    for (&m, &a) in b.states().iter().zip(psi.amplitudes.iter()) {
        if a != ZERO {
            groups.entry(environment(m, keep)).or_default().push((local_index(m, keep), a));
        }
    }
    let mut out = DMatrix::from_element(d, d, ZERO);
    for g in groups.values() {
        for &(i, ai) in g {
            for &(j, aj) in g {
                out[(i, j)] += ai * aj.conj();
            }
        }
    }
    Ok(out)
}

/// Wootters concurrence of a two-qubit density matrix. The input is
/// normalized by its trace first, so post-selected blocks can be passed in.
pub fn concurrence(rho2: &DMatrix<C64>) -> Result<f64> {
    if rho2.nrows() != 4 || rho2.ncols() != 4 {
        return Err(Error::Invalid(format!("concurrence needs a 4x4 matrix, got {}x{}", rho2.nrows(), rho2.ncols())));
    }
    let tr: f64 = rho2.diagonal().iter().map(|z| z.re).sum();
    let scale = rho2.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    if hermiticity_error(rho2) > 1e-9 * scale.max(1.0) {
        return Err(Error::Invalid("two-site matrix is not Hermitian".into()));
    }
    if !(tr > 0.0) {
        return Err(Error::Invalid(format!("two-site matrix has non-positive trace {tr}")));
    }
    let rho = rho2 / C64::from(tr);
    let r = |x: f64| C64::from(x);
    let yy = DMatrix::from_row_slice(
        4,
        4,
        &[
            r(0.0), r(0.0), r(0.0), r(-1.0),
            r(0.0), r(0.0), r(1.0), r(0.0),
            r(0.0), r(1.0), r(0.0), r(0.0),
            r(-1.0), r(0.0), r(0.0), r(0.0),
        ],
    );
    let tilde = &yy * rho.map(|z| z.conj()) * &yy;
    let sqrt_rho = HermitianEigen::new(&rho).map(|e| e.max(0.0).sqrt());
    let m = &sqrt_rho * tilde * &sqrt_rho;
    let mut l: Vec<f64> = HermitianEigen::new(&m).values.iter().map(|&e| e.max(0.0).sqrt()).collect();
    l.sort_by(|a, b| b.total_cmp(a));
    Ok((l[0] - l[1] - l[2] - l[3]).max(0.0))
}

/// `|<target|psi>|^2`.
pub fn transfer_fidelity(psi: &QuantumState, target: &QuantumState) -> Result<f64> {
    Ok(target.overlap(psi)?.norm_sqr())
}

/// `<target|rho|target>`.
pub fn transfer_fidelity_mixed(rho: &DensityOperator, target: &QuantumState) -> Result<f64> {
    check_same_basis(&rho.basis, &target.basis)?;
    let v = &target.amplitudes;
    Ok((v.adjoint() * &rho.matrix * v)[(0, 0)].re)
}

/// First and second moments of each profile about `reference`, in units of
/// `unit` sites. Profiles are normalized by their own sum.
pub fn displacement_stats(profiles: &[DVector<f64>], reference: f64, unit: f64) -> (Vec<f64>, Vec<f64>) {
    let mut first = Vec::with_capacity(profiles.len());
    let mut second = Vec::with_capacity(profiles.len());
    for p in profiles {
        let total = p.sum();
        let (mut m1, mut m2) = (0.0, 0.0);
        if total > 0.0 {
            for (k, &w) in p.iter().enumerate() {
                let x = (k as f64 - reference) / unit;
                m1 += x * w;
                m2 += x * x * w;
            }
            m1 /= total;
            m2 /= total;
        }
        first.push(m1);
        second.push(m2);
    }
    (first, second)
}

/// One named quantity sampled in time; every record is flattened row-major
/// into `values[t]` with the common `shape`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableSeries {
    pub name: String,
    pub note: String,
    pub shape: Vec<usize>,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl ObservableSeries {
    pub fn new(name: &str, note: &str, shape: Vec<usize>) -> Self {
        ObservableSeries { name: name.into(), note: note.into(), shape, times: Vec::new(), values: Vec::new() }
    }

    pub fn push(&mut self, t: f64, record: Vec<f64>) -> Result<()> {
        let want: usize = self.shape.iter().product();
        if record.len() != want {
            return Err(Error::Invalid(format!("{}: record of length {} for shape {:?}", self.name, record.len(), self.shape)));
        }
        if self.times.last().is_some_and(|&last| t <= last) {
            return Err(Error::Invalid(format!("{}: times must increase strictly", self.name)));
        }
        self.times.push(t);
        self.values.push(record);
        Ok(())
    }

    pub fn scalar(&self, k: usize) -> f64 {
        self.values[k][0]
    }

    pub fn column(&self, idx: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[idx]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::config;
    use proptest::prelude::*;

    fn bell() -> DMatrix<C64> {
        let b = build_basis(2, Sector::Full).unwrap();
        let s = QuantumState::superposition(b, &[(0b01, C64::from(1.0)), (0b10, C64::from(1.0))]).unwrap();
        s.to_density().matrix
    }

    #[test]
    fn localized_and_uniform_profiles() {
        let b = build_basis(6, Sector::Excitations(1)).unwrap();
        let p = density_profile(&QuantumState::basis_state(Arc::clone(&b), config(&[3])).unwrap());
        assert_eq!(p.as_slice(), &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let uniform = QuantumState::new(Arc::clone(&b), DVector::from_element(6, C64::from(1.0))).unwrap();
        for v in density_profile(&uniform).iter() {
            assert!((v - 1.0 / 6.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pair_state_g2() {
        let b = build_basis(5, Sector::Excitations(2)).unwrap();
        let g = g2_correlation(&QuantumState::basis_state(b, config(&[2, 3])).unwrap());
        assert_eq!(g[(2, 3)], 1.0);
        assert_eq!(g[(3, 2)], 1.0);
        assert_eq!(g.sum(), 2.0);
    }

    #[test]
    fn dimer_superposition_support() {
        let b = build_basis(6, Sector::Dimer).unwrap();
        let amps = DVector::from_fn(b.dim(), |k, _| C64::new(1.0 + k as f64, 0.5));
        let g = g2_correlation(&QuantumState::new(b, amps).unwrap());
        for i in 0..6 {
            for j in 0..6 {
                if g[(i, j)] > 0.0 {
                    assert_eq!(i.abs_diff(j), 1);
                }
            }
        }
    }

    #[test]
    fn concurrence_reference_states() {
        assert!((concurrence(&bell()).unwrap() - 1.0).abs() < 1e-10);
        let mut gg = DMatrix::from_element(4, 4, ZERO);
        gg[(0, 0)] = C64::from(1.0);
        assert!(concurrence(&gg).unwrap().abs() < 1e-10);
        for p in [0.0, 0.2, 1.0 / 3.0, 0.5, 0.8, 1.0] {
            let w = bell() * C64::from(p) + DMatrix::identity(4, 4) * C64::from((1.0 - p) / 4.0);
            let want = ((3.0 * p - 1.0) / 2.0f64).max(0.0);
            assert!((concurrence(&w).unwrap() - want).abs() < 1e-7, "p={p}");
        }
        let mut bad = bell();
        bad[(0, 1)] = C64::from(0.3);
        assert!(concurrence(&bad).is_err());
        assert!(concurrence(&(bell() * C64::from(-1.0))).is_err());
    }

    #[test]
    fn partial_traces_agree() {
        let b = build_basis(4, Sector::Full).unwrap();
        let amps = DVector::from_fn(16, |k, _| C64::new((k as f64 * 0.7).sin(), (k as f64 * 0.3).cos()));
        let psi = QuantumState::new(b, amps).unwrap();
        for keep in [[0usize, 3], [2, 1]] {
            let a = partial_trace(&psi.to_density(), &keep).unwrap();
            let c = partial_trace_state(&psi, &keep).unwrap();
            assert!((&a - &c).norm() < 1e-12);
            let tr: C64 = a.diagonal().sum();
            assert!((tr.re - 1.0).abs() < 1e-12 && tr.im.abs() < 1e-12);
            assert!(hermiticity_error(&a) < 1e-12);
        }
    }

    #[test]
    fn fidelity_bounds() {
        let b = build_basis(3, Sector::Excitations(1)).unwrap();
        let a = QuantumState::basis_state(Arc::clone(&b), 0b001).unwrap();
        let c = QuantumState::basis_state(b, 0b010).unwrap();
        assert!((transfer_fidelity(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(transfer_fidelity(&a, &c).unwrap(), 0.0);
        assert!((transfer_fidelity_mixed(&a.to_density(), &a).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn static_exciton_has_no_displacement() {
        let mut p = DVector::zeros(5);
        p[2] = 1.0;
        let (m1, m2) = displacement_stats(&[p], 2.0, 1.0);
        assert_eq!((m1[0], m2[0]), (0.0, 0.0));
    }

    #[test]
    fn post_selection_renormalizes() {
        let b = build_basis(3, Sector::Full).unwrap();
        let s = QuantumState::superposition(b, &[(0, C64::from(1.0)), (0b010, C64::from(1.0))]).unwrap();
        let ps = post_select(&s, 1).unwrap();
        assert!((ps.weight - 0.5).abs() < 1e-12);
        assert!((ps.profile()[1] - 1.0).abs() < 1e-12);
        assert!(post_select(&s, 2).is_err());
    }

    #[test]
    fn series_rejects_bad_records() {
        let mut s = ObservableSeries::new("x", "", vec![2]);
        s.push(0.0, vec![1.0, 2.0]).unwrap();
        assert!(s.push(0.0, vec![1.0, 2.0]).is_err());
        assert!(s.push(1.0, vec![1.0]).is_err());
    }

    fn random_state(n: usize, seed: &[f64]) -> QuantumState {
        let b = build_basis(n, Sector::Full).unwrap();
        let amps = DVector::from_fn(b.dim(), |k, _| C64::new(seed[k % seed.len()] + 0.1 * k as f64, seed[(k + 1) % seed.len()]));
        QuantumState::new(b, amps).unwrap()
    }

    fn rotation(theta: f64, phi: f64) -> DMatrix<C64> {
        let (c, s) = (theta.cos(), theta.sin());
        DMatrix::from_row_slice(2, 2, &[C64::from(c), -C64::from_polar(s, -phi), C64::from_polar(s, phi), C64::from(c)])
    }

    proptest! {
        #[test]
        fn two_exciton_g2_sums_to_one(seed in proptest::collection::vec(-1.0f64..1.0, 4..12)) {
            let b = build_basis(7, Sector::Excitations(2)).unwrap();
            let amps = DVector::from_fn(b.dim(), |k, _| C64::new(seed[k % seed.len()], 0.3));
            let s = QuantumState::new(b, amps).unwrap();
            let g = g2_correlation(&s);
            let upper: f64 = (0..7).flat_map(|i| (i + 1..7).map(move |j| (i, j))).map(|(i, j)| g[(i, j)]).sum();
            prop_assert!((upper - 1.0).abs() < 1e-9);
            prop_assert!(g.iter().all(|&v| v >= 0.0));
            prop_assert!((0..7).all(|i| g[(i, i)] == 0.0));
            prop_assert!((&g - g.transpose()).norm() == 0.0);
        }

        #[test]
        fn concurrence_is_locally_invariant(seed in proptest::collection::vec(-1.0f64..1.0, 3..8), t1 in 0.0f64..3.0, p1 in 0.0f64..6.0, t2 in 0.0f64..3.0, p2 in 0.0f64..6.0) {
            let psi = random_state(3, &seed);
            let rho = partial_trace_state(&psi, &[0, 2]).unwrap();
            // keep[0] is the low bit, so the full local unitary is U_site2 (x) U_site0.
            let u = rotation(t2, p2).kronecker(&rotation(t1, p1));
            let rotated = &u * &rho * u.adjoint();
            let (a, b) = (concurrence(&rho).unwrap(), concurrence(&rotated).unwrap());
            prop_assert!((a - b).abs() < 1e-7);
        }
    }
}
