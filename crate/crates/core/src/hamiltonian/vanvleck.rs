use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use super::ExactHamiltonian;
use crate::basis::{build_basis, Sector};
use crate::error::{Error, Result};

/// Largest chain the oracle accepts.
pub const ORACLE_MAX_SITES: usize = 8;

/// Second-order quasi-degenerate perturbation theory evaluated numerically on
/// the exact operator.
///
/// The drive is the perturbation and the bare configuration energies are the
/// unperturbed spectrum. Within `sector` the result is
/// `E_a delta_ab + 1/2 sum_c V_ac V_cb [1/(E_a - E_c) + 1/(E_b - E_c)]`, with
/// `c` running over configurations outside the sector, shifted by
/// `sum_j Omega_j^2 / 4 Delta_j` so that the ground configuration sits at zero.
pub fn van_vleck_oracle(exact: &ExactHamiltonian, sector: Sector) -> Result<DMatrix<C64>> {
    let n = exact.n_sites();
    if n > ORACLE_MAX_SITES {
        return Err(Error::Invalid(format!("oracle is limited to {ORACLE_MAX_SITES} sites, got {n}")));
    }
    if matches!(sector, Sector::Full | Sector::AtMost(_)) {
        return Err(Error::Invalid(format!("oracle needs a fixed-number sector, got {sector}")));
    }
    let basis = build_basis(n, sector)?;
    let e = exact.diagonal();
    let h = exact.half_rabi();
    let scale = e.iter().fold(1.0f64, |m, x| m.max(x.abs()));

    let mut out = DMatrix::from_element(basis.dim(), basis.dim(), C64::from(0.0));
    let constant: f64 = (0..n)
        .filter(|&j| h[j] != 0.0)
        .map(|j| h[j] * h[j] / e[1 << j])
        .sum();
    for (a, &sa) in basis.states().iter().enumerate() {
        let ea = e[sa as usize];
        out[(a, a)] += C64::from(ea + constant);
        for i in (0..n).filter(|&i| h[i] != 0.0) {
            let sc = sa ^ (1 << i);
            if basis.contains(sc) {
                continue;
            }
            let ec = e[sc as usize];
            let gap_a = ea - ec;
            if gap_a.abs() <= 1e-12 * scale {
                return Err(Error::SingularDenominator { a: sa, c: sc });
            }
            for k in (0..n).filter(|&k| h[k] != 0.0) {
                let sb = sc ^ (1 << k);
                let Some(b) = basis.index(sb) else { continue };
                let gap_b = e[sb as usize] - ec;
                if gap_b.abs() <= 1e-12 * scale {
                    return Err(Error::SingularDenominator { a: sb, c: sc });
                }
                out[(a, b)] += C64::from(0.5 * h[i] * h[k] * (1.0 / gap_a + 1.0 / gap_b));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{derive_effective, EffectiveOptions};
    use crate::lattice::{mhz, ChainSpec, DressingProfile};

    fn max_rel(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
        let scale = b.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        (a - b).iter().fold(0.0f64, |m, z| m.max(z.norm())) / scale
    }

    #[test]
    fn single_exciton_block_matches_closed_form() {
        let delta = mhz(50.0);
        let c = ChainSpec::with_nn_interaction(3, 4.4, 3.0 * delta).unwrap();
        let d = DressingProfile::homogeneous(3, mhz(5.0), delta);
        let oracle = van_vleck_oracle(&ExactHamiltonian::build(&c, &d, 0.0).unwrap(), Sector::Excitations(1)).unwrap();
        let m = derive_effective(&c, &d, 0.0, &EffectiveOptions::default()).unwrap();
        let closed = m.matrix(&build_basis(3, Sector::Excitations(1)).unwrap()).unwrap();
        assert!(max_rel(&oracle, &closed) < 1e-12);
    }

    #[test]
    fn dimer_block_matches_three_body_form() {
        let delta = mhz(-400.0);
        let c = ChainSpec::with_nn_interaction(3, 4.4, -1.1 * delta).unwrap();
        let d = DressingProfile::from_values(&[mhz(5.0), mhz(4.0), mhz(6.0)], &[delta, delta * 0.98, delta * 0.99]);
        let oracle = van_vleck_oracle(&ExactHamiltonian::build(&c, &d, 0.0).unwrap(), Sector::Dimer).unwrap();
        let m = derive_effective(&c, &d, 0.0, &EffectiveOptions::default()).unwrap();
        assert!(((oracle[(0, 1)].re - m.dimer_exchange[0]) / m.dimer_exchange[0]).abs() < 1e-12);
        let closed = m.matrix(&build_basis(3, Sector::Dimer).unwrap()).unwrap();
        assert!(max_rel(&oracle, &closed) < 1e-12);
    }

    #[test]
    fn separated_pair_energy_within_two_body_error() {
        let delta = mhz(50.0);
        let (w, v) = (mhz(5.0), 3.0 * delta);
        let c = ChainSpec::with_nn_interaction(4, 4.4, v).unwrap();
        let d = DressingProfile::homogeneous(4, w, delta);
        let oracle = van_vleck_oracle(&ExactHamiltonian::build(&c, &d, 0.0).unwrap(), Sector::Excitations(2)).unwrap();
        let m = derive_effective(&c, &d, 0.0, &EffectiveOptions::default()).unwrap();
        let b = build_basis(4, Sector::Excitations(2)).unwrap();
        let k = b.index(0b1010).unwrap();
        let want = m.mu[1] + m.mu[3] + m.exciton_interaction[(1, 3)];
        let bound = w * w * v * v / delta.powi(3);
        assert!((oracle[(k, k)].re - want).abs() < bound);
    }

    #[test]
    fn resonant_denominator_is_reported() {
        // Delta + V = 0 exactly for the nearest-neighbour pair.
        let c = ChainSpec::with_nn_interaction(2, 1.0, -10.0).unwrap();
        let d = DressingProfile::homogeneous(2, 1.0, 10.0);
        let err = van_vleck_oracle(&ExactHamiltonian::build(&c, &d, 0.0).unwrap(), Sector::Excitations(1)).unwrap_err();
        assert!(matches!(err, Error::SingularDenominator { .. }));
    }
}
