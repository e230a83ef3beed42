//! Chain geometry, van der Waals interaction law, dressing schedules and
//! noise rates.
//!
//! All rates are angular frequencies in rad/us and all times are in us. A
//! frequency quoted as `X/2pi MHz` converts with [`mhz`].

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::PumpSchedule;

/// Angular frequency (rad/us) of a rate quoted as `f/2pi` in MHz.
pub fn mhz(f: f64) -> f64 {
    TAU * f
}

/// Attempts made by [`ChainSpec::sample_disorder`] before giving up.
pub const DISORDER_RETRIES: usize = 100;

/// Geometry of a one-dimensional atom chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub n_sites: usize,
    /// Lattice spacing `d` in um.
    pub spacing: f64,
    /// Interaction coefficient in rad/us * um^6.
    pub c6: f64,
    /// Site coordinates along the chain in um.
    pub positions: Vec<f64>,
    /// Standard deviation of the Gaussian positional noise in um.
    pub disorder_sigma: f64,
    /// Ring geometry: distances are measured the short way around a ring of
    /// circumference `n_sites * spacing`.
    pub periodic: bool,
}

impl ChainSpec {
    pub fn new(n_sites: usize, spacing: f64, c6: f64) -> Result<Self> {
        let positions = (0..n_sites).map(|i| i as f64 * spacing).collect();
        let spec = ChainSpec {
            n_sites,
            spacing,
            c6,
            positions,
            disorder_sigma: 0.0,
            periodic: false,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Chain whose nearest-neighbour interaction equals `v_nn` at spacing `d`.
    pub fn with_nn_interaction(n_sites: usize, spacing: f64, v_nn: f64) -> Result<Self> {
        Self::new(n_sites, spacing, v_nn * spacing.powi(6))
    }

    pub fn with_disorder(mut self, sigma: f64) -> Result<Self> {
        self.disorder_sigma = sigma;
        self.validate()?;
        Ok(self)
    }

    pub fn with_periodic(mut self, periodic: bool) -> Self {
        self.periodic = periodic;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites < 2 {
            return Err(Error::InvalidChain(format!(
                "need at least 2 sites, got {}",
                self.n_sites
            )));
        }
        if !(self.spacing > 0.0) {
            return Err(Error::InvalidChain(format!("spacing must be positive, got {}", self.spacing)));
        }
        if !(self.disorder_sigma >= 0.0) {
            return Err(Error::InvalidChain(format!(
                "disorder sigma must be non-negative, got {}",
                self.disorder_sigma
            )));
        }
        if self.positions.len() != self.n_sites {
            return Err(Error::InvalidChain(format!(
                "{} positions for {} sites",
                self.positions.len(),
                self.n_sites
            )));
        }
        if self.positions.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidChain("positions must be strictly increasing".into()));
        }
        Ok(())
    }

    /// Distance between sites `i` and `j` in um.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let r = (self.positions[i] - self.positions[j]).abs();
        if self.periodic {
            let ring = self.n_sites as f64 * self.spacing;
            r.min((ring - r).abs())
        } else {
            r
        }
    }

    /// Lattice separation `|i - j|` in sites, measured around the ring for
    /// periodic chains.
    pub fn site_separation(&self, i: usize, j: usize) -> usize {
        let s = i.abs_diff(j);
        if self.periodic {
            s.min(self.n_sites - s)
        } else {
            s
        }
    }

    /// `V(r_ij) = C6 / |r_i - r_j|^6` in rad/us.
    pub fn vdw_interaction(&self, i: usize, j: usize) -> Result<f64> {
        if i == j || i >= self.n_sites || j >= self.n_sites {
            return Err(Error::InvalidPair(i, j));
        }
        Ok(self.c6 / self.distance(i, j).powi(6))
    }

    /// Symmetric matrix of pair interactions with a zero diagonal.
    pub fn interaction_matrix(&self) -> DMatrix<f64> {
        let n = self.n_sites;
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                0.0
            } else {
                self.c6 / self.distance(i, j).powi(6)
            }
        })
    }

    /// Copy with every site displaced by independent Gaussian noise of width
    /// `disorder_sigma` along the chain. Deterministic in `seed`.
    pub fn sample_disorder(&self, seed: u64) -> Result<ChainSpec> {
        if self.disorder_sigma == 0.0 {
            return Ok(self.clone());
        }
        let normal = Normal::new(0.0, self.disorder_sigma)
            .map_err(|e| Error::InvalidChain(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..DISORDER_RETRIES {
            let positions: Vec<f64> = (0..self.n_sites)
                .map(|i| i as f64 * self.spacing + normal.sample(&mut rng))
                .collect();
            if positions.windows(2).all(|w| w[1] > w[0]) {
                return Ok(ChainSpec { positions, ..self.clone() });
            }
        }
        Err(Error::DisorderOrdering(DISORDER_RETRIES))
    }
}

/// A per-site control value that may depend on time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Schedule {
    Constant(f64),
    /// `amplitude * sin^2(phi(t) + shift)` with `phi(t)` the pump ramp.
    PumpedSin2 {
        amplitude: f64,
        shift: f64,
        ramp: PumpSchedule,
    },
}

impl Schedule {
    pub fn at(&self, t: f64) -> f64 {
        match self {
            Schedule::Constant(v) => *v,
            Schedule::PumpedSin2 { amplitude, shift, ramp } => {
                let s = (ramp.phi(t) + shift).sin();
                amplitude * s * s
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Schedule::Constant(_))
    }
}

/// Rabi frequencies and detunings of the dressing lasers, one schedule per
/// site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DressingProfile {
    pub rabi: Vec<Schedule>,
    pub detuning: Vec<Schedule>,
}

/// Dressing parameters frozen at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Dressing {
    pub rabi: Vec<f64>,
    pub detuning: Vec<f64>,
}

impl DressingProfile {
    pub fn homogeneous(n_sites: usize, rabi: f64, detuning: f64) -> Self {
        DressingProfile {
            rabi: vec![Schedule::Constant(rabi); n_sites],
            detuning: vec![Schedule::Constant(detuning); n_sites],
        }
    }

    pub fn from_values(rabi: &[f64], detuning: &[f64]) -> Self {
        DressingProfile {
            rabi: rabi.iter().map(|&v| Schedule::Constant(v)).collect(),
            detuning: detuning.iter().map(|&v| Schedule::Constant(v)).collect(),
        }
    }

    pub fn n_sites(&self) -> usize {
        self.rabi.len()
    }

    pub fn is_static(&self) -> bool {
        self.rabi.iter().chain(&self.detuning).all(Schedule::is_constant)
    }

    pub fn at(&self, t: f64) -> Result<Dressing> {
        if self.rabi.len() != self.detuning.len() {
            return Err(Error::Invalid(format!(
                "{} rabi schedules but {} detuning schedules",
                self.rabi.len(),
                self.detuning.len()
            )));
        }
        let rabi: Vec<f64> = self.rabi.iter().map(|s| s.at(t)).collect();
        if let Some(i) = rabi.iter().position(|&w| !(w >= 0.0)) {
            return Err(Error::Invalid(format!("negative rabi frequency {} at site {i}", rabi[i])));
        }
        let detuning = self.detuning.iter().map(|s| s.at(t)).collect();
        Ok(Dressing { rabi, detuning })
    }

    pub fn check_sites(&self, chain: &ChainSpec) -> Result<()> {
        if self.n_sites() != chain.n_sites {
            return Err(Error::Invalid(format!(
                "dressing covers {} sites but the chain has {}",
                self.n_sites(),
                chain.n_sites
            )));
        }
        Ok(())
    }
}

/// Local dephasing rate `gamma` and spontaneous decay rate `kappa`, both in
/// 1/us.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub dephasing_gamma: f64,
    pub decay_kappa: f64,
}

impl NoiseSpec {
    pub fn new(gamma: f64, kappa: f64) -> Result<Self> {
        if !(gamma >= 0.0) || !(kappa >= 0.0) {
            return Err(Error::Invalid(format!("noise rates must be non-negative: gamma {gamma}, kappa {kappa}")));
        }
        Ok(NoiseSpec { dephasing_gamma: gamma, decay_kappa: kappa })
    }

    pub fn dephasing(gamma: f64) -> Result<Self> {
        Self::new(gamma, 0.0)
    }

    pub fn is_closed(&self) -> bool {
        self.dephasing_gamma == 0.0 && self.decay_kappa == 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> ChainSpec {
        // V(d) = 3 * Delta with Delta/2pi = 50 MHz, d = 4.4 um.
        ChainSpec::with_nn_interaction(5, 4.4, 3.0 * mhz(50.0)).unwrap()
    }

    #[test]
    fn nearest_neighbour_interaction_matches_ratio() {
        let v = chain().vdw_interaction(0, 1).unwrap();
        assert!((v / mhz(1.0) - 150.0).abs() < 1e-9);
    }

    #[test]
    fn doubling_separation_scales_by_one_over_64() {
        let c = chain();
        let r = c.vdw_interaction(0, 2).unwrap() / c.vdw_interaction(0, 1).unwrap();
        assert!((r - 1.0 / 64.0).abs() < 1e-14);
    }

    #[test]
    fn same_site_pair_is_rejected() {
        assert!(matches!(chain().vdw_interaction(2, 2), Err(Error::InvalidPair(2, 2))));
        assert!(chain().vdw_interaction(0, 9).is_err());
    }

    #[test]
    fn small_relative_displacement_changes_v_sixfold() {
        let mut c = chain();
        let x = 1e-4;
        c.positions[1] = c.spacing * (1.0 + x);
        let v0 = chain().vdw_interaction(0, 1).unwrap();
        let v1 = c.vdw_interaction(0, 1).unwrap();
        let rel = (v0 - v1) / v0;
        assert!((rel / x - 6.0).abs() < 1e-2, "rel/x = {}", rel / x);
    }

    #[test]
    fn zero_sigma_keeps_positions() {
        let c = chain();
        assert_eq!(c.sample_disorder(7).unwrap().positions, c.positions);
    }

    #[test]
    fn disorder_is_deterministic_in_seed() {
        let c = chain().with_disorder(0.1).unwrap();
        let a = c.sample_disorder(11).unwrap();
        let b = c.sample_disorder(11).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.positions, c.sample_disorder(12).unwrap().positions);
        a.validate().unwrap();
    }

    #[test]
    fn pair_separation_statistics_follow_gaussian_differences() {
        // Monte-Carlo oracle: the difference of two independent N(0, s^2)
        // displacements has |.| mean s * sqrt(2) * sqrt(2/pi).
        let sigma = 0.1;
        let d = 4.4;
        let c = ChainSpec::new(2, d, 1.0).unwrap().with_disorder(sigma).unwrap();
        let draws = 10_000;
        let mean: f64 = (0..draws)
            .map(|s| {
                let p = c.sample_disorder(s).unwrap().positions;
                ((p[1] - p[0]) - d).abs() / d
            })
            .sum::<f64>()
            / draws as f64;
        let expected = sigma * (2.0 / std::f64::consts::PI).sqrt() * 2f64.sqrt() / d;
        assert!((mean - expected).abs() / expected < 0.03, "{mean} vs {expected}");
    }

    #[test]
    fn ring_distance_wraps() {
        let c = ChainSpec::new(6, 1.0, 1.0).unwrap().with_periodic(true);
        assert_eq!(c.distance(0, 5), 1.0);
        assert_eq!(c.site_separation(0, 4), 2);
        assert!((c.vdw_interaction(0, 5).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_chains_are_rejected() {
        assert!(ChainSpec::new(1, 1.0, 1.0).is_err());
        assert!(ChainSpec::new(3, 0.0, 1.0).is_err());
        assert!(ChainSpec::new(3, 1.0, 1.0).unwrap().with_disorder(-1.0).is_err());
    }

    #[test]
    fn constant_profile_evaluates() {
        let p = DressingProfile::homogeneous(3, 2.0, 20.0);
        let d = p.at(1.0).unwrap();
        assert_eq!(d.rabi, vec![2.0; 3]);
        assert!(p.is_static());
    }
}
