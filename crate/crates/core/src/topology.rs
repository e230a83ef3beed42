//! Three-site unit cell chain under sin^2 dressing modulation: Rice-Mele
//! coefficients, Bloch Hamiltonian on the `(k, phi)` torus, lattice Chern
//! numbers and the pump ramp.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{QuantumState, SubspaceBasis};
use crate::error::{Error, Result};
use crate::hamiltonian::Guards;
use crate::lattice::{DressingProfile, Schedule};
use crate::linalg::HermitianEigen;

/// Default steepness of the tanh ramp.
pub const PUMP_STEEPNESS: f64 = 5.6;

/// Phase offsets of the A, B, C sublattice dressings.
pub const SUBLATTICE_SHIFTS: [f64; 3] = [FRAC_PI_4, 0.0, -FRAC_PI_4];

/// Ramp `phi(t)` taking the modulation phase from 0 to pi over one period.
///
/// `phi/pi = 1/2 + tanh(s (t/T - 1/2)) / (2 tanh(s/2))`, continued past one
/// period by adding pi per cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpSchedule {
    pub period: f64,
    pub steepness: f64,
}

impl PumpSchedule {
    pub fn new(period: f64) -> Self {
        PumpSchedule { period, steepness: PUMP_STEEPNESS }
    }

    pub fn phi(&self, t: f64) -> f64 {
        let cycles = (t / self.period).floor();
        let x = t / self.period - cycles;
        let s = self.steepness;
        let base = 0.5 + (s * (x - 0.5)).tanh() / (2.0 * (0.5 * s).tanh());
        PI * (cycles + base)
    }

    /// `d phi / dt`.
    pub fn rate(&self, t: f64) -> f64 {
        let x = t / self.period - (t / self.period).floor();
        let s = self.steepness;
        let c = (s * (x - 0.5)).cosh();
        PI * s / (2.0 * (0.5 * s).tanh() * c * c * self.period)
    }
}

pub fn pump_schedule(period: f64) -> PumpSchedule {
    PumpSchedule::new(period)
}

/// Dressing of an `n_sites` chain for the pump: constant detuning and Rabi
/// frequencies `omega * sin^2(phi(t) + shift)` with the A, B, C shifts
/// repeating along the chain.
pub fn pump_dressing(n_sites: usize, omega: f64, delta: f64, ramp: PumpSchedule) -> DressingProfile {
    DressingProfile {
        rabi: (0..n_sites)
            .map(|i| Schedule::PumpedSin2 { amplitude: omega, shift: SUBLATTICE_SHIFTS[i % 3], ramp })
            .collect(),
        detuning: vec![Schedule::Constant(delta); n_sites],
    }
}

/// NNN hopping and on-site corrections.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NnnTerms {
    pub j_a: f64,
    pub j_b: f64,
    pub j_c: f64,
    pub dmu_a: f64,
    pub dmu_b: f64,
    pub dmu_c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiceMeleCoefficients {
    pub j_a: f64,
    pub j_b: f64,
    pub j_c: f64,
    pub mu_a: f64,
    pub mu_b: f64,
    pub mu_c: f64,
    pub nnn: Option<NnnTerms>,
    /// `E = Omega^2 / 2 Delta`.
    pub e: f64,
    /// `U = Omega^2 V(d) / 4 Delta (Delta + V(d))`.
    pub u: f64,
    /// The same with `V(2d)`.
    pub u_prime: Option<f64>,
}

fn exchange_scale(omega: f64, delta: f64, v: f64) -> f64 {
    omega * omega * v / (4.0 * delta * (delta + v))
}

/// Coefficients at modulation phase `phi`, on-site energies measured from the
/// bare detuning.
pub fn coefficients(
    omega: f64,
    delta: f64,
    v_nn: f64,
    v_nnn: Option<f64>,
    phi: f64,
    guards: &Guards,
) -> Result<RiceMeleCoefficients> {
    let mut warnings = Vec::new();
    guards.check_rabi(0, omega, delta, &mut warnings)?;
    guards.check_gap((0, 1), delta, v_nn, &mut warnings)?;
    if let Some(v2) = v_nnn {
        guards.check_gap((0, 2), delta, v2, &mut warnings)?;
    }
    let e = omega * omega / (2.0 * delta);
    let u = exchange_scale(omega, delta, v_nn);
    let [a, b, c] = SUBLATTICE_SHIFTS.map(|s| (phi + s).sin().powi(2));
    let u_prime = v_nnn.map(|v2| exchange_scale(omega, delta, v2));
    let nnn = u_prime.map(|up| NnnTerms {
        j_a: up * a * c,
        j_b: up * b * a,
        j_c: up * c * b,
        dmu_a: up * (c * c + b * b),
        dmu_b: up * (a * a + c * c),
        dmu_c: up * (a * a + b * b),
    });
    Ok(RiceMeleCoefficients {
        j_a: u * a * b,
        j_b: u * b * c,
        j_c: u * c * a,
        mu_a: e * a * a + u * (b * b + c * c),
        mu_b: e * b * b + u * (c * c + a * a),
        mu_c: e * c * c + u * (a * a + b * b),
        nnn,
        e,
        u,
        u_prime,
    })
}

impl RiceMeleCoefficients {
    /// Bloch matrix in the `(a_k, b_k, c_k)` basis at quasi-momentum `kl = k l`.
    pub fn bloch_matrix(&self, kl: f64) -> DMatrix<C64> {
        let ph = C64::from_polar(1.0, kl);
        let r = C64::from;
        let mut h = DMatrix::from_row_slice(
            3,
            3,
            &[
                r(self.mu_a), r(self.j_a), ph.conj() * self.j_c,
                r(self.j_a), r(self.mu_b), r(self.j_b),
                ph * self.j_c, r(self.j_b), r(self.mu_c),
            ],
        );
        if let Some(n) = self.nnn {
            let add = |h: &mut DMatrix<C64>, i: usize, j: usize, z: C64| {
                h[(i, j)] += z;
                h[(j, i)] += z.conj();
            };
            h[(0, 0)] += n.dmu_a;
            h[(1, 1)] += n.dmu_b;
            h[(2, 2)] += n.dmu_c;
            add(&mut h, 0, 2, r(n.j_a));
            add(&mut h, 1, 0, ph * n.j_b);
            add(&mut h, 2, 1, ph * n.j_c);
        }
        h
    }
}

/// A Hermitian matrix family on the `(k l, phi)` torus.
pub trait BlochFamily: Sync {
    fn bands(&self) -> usize;
    fn matrix(&self, kl: f64, phi: f64) -> Result<DMatrix<C64>>;
    /// Period of the family in `phi`.
    fn phi_period(&self) -> f64 {
        PI
    }
}

/// The modulated three-band chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochHamiltonian {
    pub omega: f64,
    pub delta: f64,
    pub v_nn: f64,
    pub v_nnn: Option<f64>,
    pub guards: Guards,
}

impl BlochHamiltonian {
    pub fn new(omega: f64, delta: f64, v_nn: f64, v_nnn: Option<f64>) -> Self {
        BlochHamiltonian { omega, delta, v_nn, v_nnn, guards: Guards::default() }
    }

    pub fn coefficients(&self, phi: f64) -> Result<RiceMeleCoefficients> {
        coefficients(self.omega, self.delta, self.v_nn, self.v_nnn, phi, &self.guards)
    }
}

impl BlochFamily for BlochHamiltonian {
    fn bands(&self) -> usize {
        3
    }

    fn matrix(&self, kl: f64, phi: f64) -> Result<DMatrix<C64>> {
        Ok(self.coefficients(phi)?.bloch_matrix(kl))
    }
}

/// Band energies in ascending order.
pub fn band_energies(family: &dyn BlochFamily, kl: f64, phi: f64) -> Result<Vec<f64>> {
    Ok(HermitianEigen::new(&family.matrix(kl, phi)?).values.iter().copied().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChernResult {
    /// Integer Chern number per band, lowest band first.
    pub numbers: Vec<i64>,
    /// Plaquette flux sums divided by 2 pi before rounding.
    pub raw: Vec<f64>,
    /// Smallest gap above each band (the last entry is infinite).
    pub min_gaps: Vec<f64>,
}

/// Lattice Chern numbers from gauge-invariant plaquette fluxes.
///
/// The torus is sampled at `kl in (-pi, pi]` and `phi` over one period
/// starting just above `-period/2`. Bands are labelled by energy order at each
/// grid point; any grid point where neighbouring bands come closer than
/// `1e-9` of the spectral scale is rejected.
pub fn chern_numbers(family: &dyn BlochFamily, n_k: usize, n_phi: usize) -> Result<ChernResult> {
    if n_k < 2 || n_phi < 2 {
        return Err(Error::Invalid(format!("grid must be at least 2x2, got {n_k}x{n_phi}")));
    }
    let nb = family.bands();
    let period = family.phi_period();
    let points: Vec<(usize, usize)> = (0..n_phi).flat_map(|b| (0..n_k).map(move |a| (a, b))).collect();
    let eigs: Vec<HermitianEigen> = points
        .par_iter()
        .map(|&(a, b)| {
            let kl = -PI + TAU * (a + 1) as f64 / n_k as f64;
            let phi = -0.5 * period + period * (b + 1) as f64 / n_phi as f64;
            Ok(HermitianEigen::new(&family.matrix(kl, phi)?))
        })
        .collect::<Result<_>>()?;
    let at = |a: usize, b: usize| &eigs[(b % n_phi) * n_k + (a % n_k)];

    let scale = eigs
        .iter()
        .flat_map(|e| e.values.iter())
        .fold(0.0f64, |m, x| m.max(x.abs()))
        .max(f64::MIN_POSITIVE);
    let mut min_gaps = vec![f64::INFINITY; nb];
    for (p, e) in eigs.iter().enumerate() {
        for n in 0..nb - 1 {
            let gap = e.values[n + 1] - e.values[n];
            min_gaps[n] = min_gaps[n].min(gap);
            if gap < 1e-9 * scale {
                return Err(Error::DegenerateBands { lower: n, upper: n + 1, k: p % n_k, phi: p / n_k, gap });
            }
        }
    }

    let link = |p: &HermitianEigen, q: &HermitianEigen, n: usize| -> C64 {
        let z = p.vectors.column(n).dotc(&q.vectors.column(n));
        z / z.norm()
    };
    let mut raw = vec![0.0; nb];
    for (n, r) in raw.iter_mut().enumerate() {
        let mut flux = 0.0;
        for b in 0..n_phi {
            for a in 0..n_k {
                let u1 = link(at(a, b), at(a + 1, b), n);
                let u2 = link(at(a + 1, b), at(a + 1, b + 1), n);
                let u3 = link(at(a, b + 1), at(a + 1, b + 1), n);
                let u4 = link(at(a, b), at(a, b + 1), n);
                flux += (u1 * u2 * u3.conj() * u4.conj()).arg();
            }
        }
        *r = flux / TAU;
    }
    Ok(ChernResult { numbers: raw.iter().map(|x| x.round() as i64).collect(), raw, min_gaps })
}

/// Site index of sublattice `s` (0 = A, 1 = B, 2 = C) in unit cell `j`.
pub fn site(cell: usize, s: usize) -> usize {
    3 * cell + s
}

/// `(c_j^dag + a_{j+1}^dag)|0> / sqrt 2`, the real-space form of a uniformly
/// populated upper band at `phi = 0`.
pub fn pump_initial_state(basis: Arc<SubspaceBasis>, cell: usize) -> Result<QuantumState> {
    let (c, a) = (site(cell, 2), site(cell + 1, 0));
    if a >= basis.n_sites() {
        return Err(Error::Invalid(format!("unit cell {cell} leaves no room for the next A site")));
    }
    let amp = C64::from(std::f64::consts::FRAC_1_SQRT_2);
    QuantumState::superposition(basis, &[(1 << c, amp), (1 << a, amp)])
}

/// Modulation phase range of the Bloch torus.
pub fn phi_window() -> (f64, f64) {
    (-FRAC_PI_2, FRAC_PI_2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{build_basis, Sector};
    use crate::hamiltonian::{derive_effective, EffectiveOptions};
    use crate::lattice::{mhz, ChainSpec};

    fn reference_family() -> BlochHamiltonian {
        let delta = mhz(20.0);
        BlochHamiltonian::new(mhz(5.0), delta, 3.0 * delta, None)
    }

    #[test]
    fn schedule_endpoints_and_midpoint() {
        let s = pump_schedule(27.7);
        assert_eq!(s.phi(0.0), 0.0);
        assert!((s.phi(27.7) - PI).abs() < 1e-15);
        assert!((s.phi(13.85) - FRAC_PI_2).abs() < 1e-15);
        assert!((s.phi(27.7 + 5.0) - PI - s.phi(5.0)).abs() < 1e-12);
        let mut last = -1.0;
        for k in 0..=100 {
            let p = s.phi(27.7 * k as f64 / 100.0 * 0.999_999);
            assert!(p > last);
            last = p;
        }
        assert!(s.rate(13.85) > s.rate(5.0) && s.rate(13.85) > s.rate(22.0));
        let h = 1e-6;
        assert!(((s.phi(7.0 + h) - s.phi(7.0 - h)) / (2.0 * h) - s.rate(7.0)).abs() < 1e-6);
    }

    #[test]
    fn coefficients_at_zero_phase() {
        let f = reference_family();
        let c = f.coefficients(0.0).unwrap();
        assert!(c.j_a.abs() < 1e-15 && c.j_b.abs() < 1e-15);
        assert!((c.j_c - c.u / 4.0).abs() < 1e-14);
        assert!((c.mu_b - c.u / 2.0).abs() < 1e-14);
        assert!((c.mu_a - (c.e / 4.0 + c.u / 4.0)).abs() < 1e-14);
        assert!((c.mu_c - c.mu_a).abs() < 1e-14);
    }

    #[test]
    fn upper_gap_at_zero_phase() {
        let f = reference_family();
        let c = f.coefficients(0.0).unwrap();
        for kl in [-2.0, 0.0, 1.0, PI] {
            let e = band_energies(&f, kl, 0.0).unwrap();
            assert!((e[2] - e[1] - c.u / 2.0).abs() < 1e-12);
        }
        let (w, d) = (mhz(5.0), mhz(20.0));
        let v = 3.0 * d;
        assert!((c.u / 2.0 - w * w * v / (8.0 * d * (d + v))).abs() < 1e-14);
    }

    #[test]
    fn nnn_scale_ratio() {
        let d = mhz(20.0);
        let c = coefficients(mhz(5.0), d, 3.0 * d, Some(3.0 * d / 64.0), 0.3, &Guards::default()).unwrap();
        assert!((c.u_prime.unwrap() / c.u - 0.06).abs() < 0.005);
    }

    #[test]
    fn bloch_matrix_hermitian_and_periodic() {
        let d = mhz(20.0);
        let f = BlochHamiltonian::new(mhz(5.0), d, 3.0 * d, Some(3.0 * d / 64.0));
        for &(kl, phi) in &[(0.3, 0.2), (-1.1, 1.4), (2.9, -0.7)] {
            let h = f.matrix(kl, phi).unwrap();
            assert!((&h - h.adjoint()).norm() < 1e-14);
            assert!((f.matrix(kl + TAU, phi).unwrap() - &h).norm() < 1e-12);
            assert!((f.matrix(kl, phi + PI).unwrap() - &h).norm() < 1e-12);
        }
    }

    #[test]
    fn bloch_matrix_matches_real_space_model() {
        // Nearest-neighbour ring of 4 cells: its spectrum is the union of the
        // Bloch spectra at the four allowed momenta.
        let d = mhz(20.0);
        let (w, phi) = (mhz(5.0), 0.37);
        let chain = ChainSpec::with_nn_interaction(12, 4.4, 3.0 * d).unwrap().with_periodic(true);
        let mut profile = pump_dressing(12, w, d, PumpSchedule::new(1.0));
        for (i, s) in profile.rabi.iter_mut().enumerate() {
            *s = Schedule::Constant(w * (phi + SUBLATTICE_SHIFTS[i % 3]).sin().powi(2));
        }
        let m = derive_effective(&chain, &profile, 0.0, &EffectiveOptions::with_range(Some(1))).unwrap();
        let real = HermitianEigen::new(&m.single_exciton_matrix().map(C64::from)).values;
        let f = reference_family();
        let mut bloch: Vec<f64> = (0..4)
            .flat_map(|q| band_energies(&f, TAU * q as f64 / 4.0, phi).unwrap())
            .map(|e| e + d)
            .collect();
        bloch.sort_by(f64::total_cmp);
        for (a, b) in real.iter().zip(&bloch) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn reference_chern_numbers() {
        let r = chern_numbers(&reference_family(), 32, 32).unwrap();
        assert_eq!(r.numbers, vec![1, -2, 1]);
        assert_eq!(r.numbers.iter().sum::<i64>(), 0);
    }

    struct Flat;
    impl BlochFamily for Flat {
        fn bands(&self) -> usize {
            2
        }
        fn matrix(&self, kl: f64, _phi: f64) -> Result<DMatrix<C64>> {
            Ok(DMatrix::from_row_slice(2, 2, &[C64::from(1.0), C64::from_polar(0.5, kl), C64::from_polar(0.5, -kl), C64::from(-1.0)]))
        }
    }

    #[test]
    fn phase_independent_family_is_trivial() {
        let r = chern_numbers(&Flat, 16, 16).unwrap();
        assert_eq!(r.numbers, vec![0, 0]);
    }

    struct Touching;
    impl BlochFamily for Touching {
        fn bands(&self) -> usize {
            2
        }
        fn matrix(&self, kl: f64, phi: f64) -> Result<DMatrix<C64>> {
            let (x, y) = (kl.sin(), (2.0 * phi).sin());
            let z = kl.cos() + (2.0 * phi).cos() - 2.0;
            Ok(DMatrix::from_row_slice(2, 2, &[C64::from(z), C64::new(x, -y), C64::new(x, y), C64::from(-z)]))
        }
    }

    #[test]
    fn band_touching_is_reported() {
        // Closes at kl = 0, phi = 0, a grid point for even sizes.
        assert!(matches!(chern_numbers(&Touching, 8, 8), Err(Error::DegenerateBands { .. })));
    }

    #[test]
    fn initial_state_lives_in_upper_band() {
        let f = reference_family();
        let n_cells = 6;
        let b = build_basis(3 * n_cells, Sector::Excitations(1)).unwrap();
        let psi = pump_initial_state(b, 2).unwrap();
        assert!((psi.norm() - 1.0).abs() < 1e-14);
        // Project each momentum component onto the Bloch bands at phi = 0.
        for q in 0..n_cells {
            let kl = TAU * q as f64 / n_cells as f64;
            let mut comp = nalgebra::DVector::from_element(3, C64::from(0.0));
            for j in 0..n_cells {
                for s in 0..3 {
                    let amp = psi.amplitudes[site(j, s)];
                    comp[s] += amp * C64::from_polar(1.0 / (n_cells as f64).sqrt(), -kl * j as f64);
                }
            }
            let e = HermitianEigen::new(&f.matrix(kl, 0.0).unwrap());
            for n in 0..2 {
                assert!(e.vectors.column(n).dotc(&comp).norm() < 1e-12);
            }
            let upper = nalgebra::DVector::from_vec(vec![
                C64::from_polar(std::f64::consts::FRAC_1_SQRT_2, -kl),
                C64::from(0.0),
                C64::from(std::f64::consts::FRAC_1_SQRT_2),
            ]);
            assert!((e.vectors.column(2).dotc(&upper).norm() - 1.0).abs() < 1e-12);
        }
    }
}
