//! Dense master-equation integration with local dephasing and decay.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use super::ode::{DormandPrince, Tolerances};
use super::{EvolutionConfig, Generator, Method, Series};
use crate::basis::{check_same_basis, DensityOperator, SubspaceBasis};
use crate::error::{Error, Result};
use crate::lattice::NoiseSpec;
use crate::linalg::{HermitianEigen, Operator, ZERO};

/// Default largest basis dimension for dense density matrices.
pub const DEFAULT_DENSE_CAP: usize = 512;

/// Largest basis for which the full superoperator is exponentiated.
const SUPEROPERATOR_LIMIT: usize = 16;

/// Jump-operator bookkeeping in the configuration basis.
struct Dissipator {
    dim: usize,
    n_sites: usize,
    gamma: f64,
    kappa: f64,
    masks: Vec<u64>,
    /// `raised[a * n_sites + k]`: index of `mask_a | 1 << k` when site `k`
    /// is empty in `a` and the raised configuration is in the basis.
    raised: Vec<Option<usize>>,
}

impl Dissipator {
    fn new(basis: &SubspaceBasis, noise: &NoiseSpec) -> Self {
        let n_sites = basis.n_sites();
        let masks = basis.states().to_vec();
        let mut raised = vec![None; masks.len() * n_sites];
        if noise.decay_kappa > 0.0 {
            for (a, &m) in masks.iter().enumerate() {
                for k in 0..n_sites {
                    if m >> k & 1 == 0 {
                        raised[a * n_sites + k] = basis.index(m | 1 << k);
                    }
                }
            }
        }
        Dissipator {
            dim: masks.len(),
            n_sites,
            gamma: noise.dephasing_gamma,
            kappa: noise.decay_kappa,
            masks,
            raised,
        }
    }

    /// Adds the dissipator applied to `rho` into `out` (both column-major).
    fn apply(&self, rho: &[C64], out: &mut [C64]) {
        let n = self.dim;
        if self.gamma == 0.0 && self.kappa == 0.0 {
            return;
        }
        for j in 0..n {
            let mj = self.masks[j];
            for i in 0..n {
                let mi = self.masks[i];
                let mut rate = 0.5 * self.gamma * (mi ^ mj).count_ones() as f64;
                if self.kappa > 0.0 {
                    rate += 0.5 * self.kappa * (mi.count_ones() + mj.count_ones()) as f64;
                    let mut gain = ZERO;
                    for k in 0..self.n_sites {
                        if let (Some(a), Some(b)) = (self.raised[i * self.n_sites + k], self.raised[j * self.n_sites + k]) {
                            gain += rho[a + b * n];
                        }
                    }
                    out[i + j * n] += gain * self.kappa;
                }
                out[i + j * n] -= rho[i + j * n] * rate;
            }
        }
    }
}

/// `-i [H, rho]` into `out`. With `hermitian_rho` the product `rho H` is
/// taken as `(H rho)^dagger`.
fn commutator(op: &dyn Operator, rho: &[C64], out: &mut [C64], scratch: &mut Vec<C64>, hermitian_rho: bool) {
    let n = op.dim();
    scratch.resize(n * n, ZERO);
    for j in 0..n {
        op.apply(&rho[j * n..(j + 1) * n], &mut scratch[j * n..(j + 1) * n]);
    }
    if hermitian_rho {
        for j in 0..n {
            for i in 0..n {
                let hr = scratch[i + j * n];
                let rh = scratch[j + i * n].conj();
                out[i + j * n] = C64::new(0.0, -1.0) * (hr - rh);
            }
        }
        return;
    }
    // rho H = (H rho^dagger)^dagger for Hermitian H.
    let mut adj = vec![ZERO; n * n];
    for j in 0..n {
        for i in 0..n {
            adj[i + j * n] = rho[j + i * n].conj();
        }
    }
    let mut c = vec![ZERO; n * n];
    for j in 0..n {
        op.apply(&adj[j * n..(j + 1) * n], &mut c[j * n..(j + 1) * n]);
    }
    for j in 0..n {
        for i in 0..n {
            out[i + j * n] = C64::new(0.0, -1.0) * (scratch[i + j * n] - c[j + i * n].conj());
        }
    }
}

/// The Liouvillian as a matrix acting on column-major `vec(rho)`.
pub fn liouvillian(op: &dyn Operator, basis: &SubspaceBasis, noise: &NoiseSpec) -> Result<DMatrix<C64>> {
    let n = basis.dim();
    if op.dim() != n {
        return Err(Error::BasisMismatch("operator and basis dimensions differ".into()));
    }
    if !op.is_hermitian() {
        return Err(Error::Invalid("master equation needs a Hermitian Hamiltonian".into()));
    }
    let diss = Dissipator::new(basis, noise);
    let mut l = DMatrix::from_element(n * n, n * n, ZERO);
    let mut e = vec![ZERO; n * n];
    let mut col = vec![ZERO; n * n];
    let mut scratch = Vec::new();
    for k in 0..n * n {
        e[k] = C64::from(1.0);
        commutator(op, &e, &mut col, &mut scratch, false);
        diss.apply(&e, &mut col);
        l.set_column(k, &DVector::from_column_slice(&col));
        e[k] = ZERO;
    }
    Ok(l)
}

/// Integrates the master equation with jump operators `sqrt(gamma) n_i` and
/// `sqrt(kappa) sigma^-_i` on every site.
///
/// On a number-conserving sector basis, decay out of the sector is dropped:
/// the result is the sector block of the full solution.
pub fn evolve_lindblad(gen: &dyn Generator, noise: &NoiseSpec, rho0: &DensityOperator, cfg: &EvolutionConfig) -> Result<Series<DensityOperator>> {
    cfg.validate()?;
    check_same_basis(gen.basis(), &rho0.basis)?;
    let basis = Arc::clone(&rho0.basis);
    let n = basis.dim();
    if n > cfg.dense_cap {
        return Err(Error::DimensionCap { dim: n, cap: cfg.dense_cap });
    }
    let times = cfg.output_times();
    let wrap = |m: DMatrix<C64>| DensityOperator { basis: Arc::clone(&basis), matrix: m };
    let mut values = vec![rho0.clone()];

    if cfg.method == Method::DenseExpm && gen.is_static() {
        let op = gen.at(0.0)?;
        if noise.is_closed() {
            let eig = HermitianEigen::new(&op.to_dense());
            for &t in &times[1..] {
                values.push(wrap(eig.propagate_density(&rho0.matrix, t)));
            }
            return Ok(Series { times, values });
        }
        if n <= SUPEROPERATOR_LIMIT {
            let l = liouvillian(op.as_ref(), &basis, noise)?;
            let v0 = DVector::from_column_slice(rho0.matrix.as_slice());
            for &t in &times[1..] {
                let v = (&l * C64::from(t)).exp() * &v0;
                values.push(wrap(DMatrix::from_column_slice(n, n, v.as_slice())));
            }
            return Ok(Series { times, values });
        }
    }

    if !gen.at(0.0)?.is_hermitian() {
        return Err(Error::Invalid("master equation needs a Hermitian Hamiltonian".into()));
    }
    let diss = Dissipator::new(&basis, noise);
    let frozen = if gen.is_static() { Some(gen.at(0.0)?) } else { None };
    let tol = Tolerances { rel: cfg.rel_tol, abs: cfg.abs_tol, h_max: cfg.dt_max, per_unit_time: true };
    let mut dp = DormandPrince::new(n * n, tol);
    let mut y: Vec<C64> = rho0.matrix.as_slice().to_vec();
    let mut scratch = Vec::new();
    for w in times.windows(2) {
        dp.integrate(
            |t, rho, drho| {
                let op = match &frozen {
                    Some(op) => Arc::clone(op),
                    None => gen.at(t)?,
                };
                commutator(op.as_ref(), rho, drho, &mut scratch, true);
                diss.apply(rho, drho);
                Ok(())
            },
            w[0],
            w[1],
            &mut y,
        )?;
        values.push(wrap(DMatrix::from_column_slice(n, n, &y)));
    }
    Ok(Series { times, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{build_basis, QuantumState, Sector};
    use crate::dynamics::{evolve_unitary, StaticGenerator};
    use crate::hamiltonian::ExactHamiltonian;
    use crate::lattice::{ChainSpec, Dressing, DressingProfile};
    use crate::linalg::DenseOperator;

    fn single_atom(omega: f64, delta: f64) -> StaticGenerator {
        let h = ExactHamiltonian::from_interaction(&DMatrix::zeros(1, 1), &Dressing { rabi: vec![omega], detuning: vec![delta] }).unwrap();
        StaticGenerator::new(Arc::clone(h.basis()), Arc::new(h)).unwrap()
    }

    #[test]
    fn liouvillian_matches_integrator() {
        let g = single_atom(1.0, 0.5);
        let noise = NoiseSpec::new(0.3, 0.2).unwrap();
        let rho0 = QuantumState::basis_state(Arc::clone(g.basis()), 0).unwrap().to_density();
        let base = EvolutionConfig::new(3.0, 6).with_tolerances(1e-10, 1e-12).with_dt_max(0.05);
        let a = evolve_lindblad(&g, &noise, &rho0, &base.clone().with_method(Method::DenseExpm)).unwrap();
        let b = evolve_lindblad(&g, &noise, &rho0, &base.with_method(Method::AdaptiveRk)).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((&x.matrix - &y.matrix).norm() < 1e-8);
            assert!((x.trace() - 1.0).abs() < 1e-10);
            assert!(x.hermiticity_error() < 1e-10);
        }
    }

    #[test]
    fn closed_limit_matches_unitary() {
        let chain = ChainSpec::with_nn_interaction(3, 4.4, 20.0).unwrap();
        let h = ExactHamiltonian::build(&chain, &DressingProfile::homogeneous(3, 2.0, 5.0), 0.0).unwrap();
        let g = StaticGenerator::new(Arc::clone(h.basis()), Arc::new(h)).unwrap();
        let psi0 = QuantumState::basis_state(Arc::clone(g.basis()), 0b001).unwrap();
        let cfg = EvolutionConfig::new(2.0, 8).with_tolerances(1e-10, 1e-12).with_dt_max(0.02);
        let u = evolve_unitary(&g, &psi0, &cfg).unwrap();
        let l = evolve_lindblad(&g, &NoiseSpec::default(), &psi0.to_density(), &cfg.with_method(Method::AdaptiveRk)).unwrap();
        for (a, b) in u.values.iter().zip(&l.values) {
            assert!((a.to_density().matrix - &b.matrix).norm() < 1e-7);
        }
    }

    #[test]
    fn sector_decay_is_a_global_factor() {
        let b = build_basis(4, Sector::Excitations(1)).unwrap();
        let m = DMatrix::from_fn(4, 4, |i, j| C64::from(if i.abs_diff(j) == 1 { 1.0 } else if i == j { 0.2 * i as f64 } else { 0.0 }));
        let g = StaticGenerator::new(Arc::clone(&b), Arc::new(DenseOperator::new(m))).unwrap();
        let rho0 = QuantumState::basis_state(b, 0b0001).unwrap().to_density();
        let cfg = EvolutionConfig::new(3.0, 6).with_method(Method::AdaptiveRk).with_tolerances(1e-11, 1e-13).with_dt_max(0.05);
        let kappa = 0.4;
        let closed = evolve_lindblad(&g, &NoiseSpec::dephasing(0.3).unwrap(), &rho0, &cfg).unwrap();
        let open = evolve_lindblad(&g, &NoiseSpec::new(0.3, kappa).unwrap(), &rho0, &cfg).unwrap();
        for ((t, a), b) in closed.times.iter().zip(&closed.values).zip(&open.values) {
            let want = &a.matrix * C64::from((-kappa * t).exp());
            assert!((&b.matrix - want).norm() < 1e-8);
        }
    }

    #[test]
    fn over_cap_is_rejected() {
        let b = build_basis(3, Sector::Full).unwrap();
        let g = StaticGenerator::new(Arc::clone(&b), Arc::new(DenseOperator::new(DMatrix::identity(8, 8)))).unwrap();
        let rho0 = QuantumState::basis_state(b, 0).unwrap().to_density();
        let mut cfg = EvolutionConfig::new(1.0, 1);
        cfg.dense_cap = 4;
        assert!(matches!(evolve_lindblad(&g, &NoiseSpec::default(), &rho0, &cfg), Err(Error::DimensionCap { .. })));
    }
}
