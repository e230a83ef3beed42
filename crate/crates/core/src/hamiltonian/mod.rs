//! Exact dressed-chain Hamiltonian, the derived spin-exchange model and a
//! numerical second-order perturbation oracle.

mod effective;
mod exact;
mod vanvleck;

pub use effective::{derive_effective, derive_from_dressing, EffectiveFamily, EffectiveModel, EffectiveOptions};
pub use exact::{ExactHamiltonian, ExactModel, SectorHamiltonian};
pub use vanvleck::{van_vleck_oracle, ORACLE_MAX_SITES};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack applied when comparing against guard thresholds, so that
/// parameter points sitting exactly on a threshold are admitted.
const GUARD_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GuardPolicy {
    Error,
    Warn,
}

/// Validity thresholds of the large-detuning expansion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Guards {
    /// Largest admitted `rabi / |detuning|`.
    pub max_rabi_ratio: f64,
    /// Smallest admitted `|detuning + V| / |detuning|`.
    pub min_facilitation_gap: f64,
    pub policy: GuardPolicy,
}

impl Default for Guards {
    fn default() -> Self {
        Guards {
            max_rabi_ratio: 0.25,
            min_facilitation_gap: 0.1,
            policy: GuardPolicy::Error,
        }
    }
}

impl Guards {
    pub fn permissive() -> Self {
        Guards { policy: GuardPolicy::Warn, ..Guards::default() }
    }

    fn report(&self, err: Error, warnings: &mut Vec<String>) -> Result<()> {
        match self.policy {
            GuardPolicy::Error => Err(err),
            GuardPolicy::Warn => {
                warnings.push(err.to_string());
                Ok(())
            }
        }
    }

    pub(crate) fn check_rabi(&self, site: usize, rabi: f64, detuning: f64, warnings: &mut Vec<String>) -> Result<()> {
        if detuning == 0.0 {
            return Err(Error::WeakDetuning { site, ratio: f64::INFINITY });
        }
        let ratio = rabi / detuning.abs();
        if ratio > self.max_rabi_ratio * (1.0 + GUARD_SLACK) {
            self.report(Error::WeakDetuning { site, ratio }, warnings)?;
        }
        Ok(())
    }

    /// `|detuning + shift| >= eps_f |detuning|`, where `shift` is the
    /// interaction energy picked up by the flipped atom.
    pub(crate) fn check_gap(
        &self,
        pair: (usize, usize),
        detuning: f64,
        shift: f64,
        warnings: &mut Vec<String>,
    ) -> Result<()> {
        let gap = (detuning + shift).abs();
        if gap == 0.0 {
            return Err(Error::FacilitationResonance { i: pair.0, j: pair.1, gap });
        }
        if gap < self.min_facilitation_gap * detuning.abs() * (1.0 - GUARD_SLACK) {
            self.report(Error::FacilitationResonance { i: pair.0, j: pair.1, gap }, warnings)?;
        }
        Ok(())
    }
}
