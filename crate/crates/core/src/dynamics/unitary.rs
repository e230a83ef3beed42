use std::sync::Arc;

use nalgebra::DVector;

use super::propagator::Propagator;
use super::{EvolutionConfig, Generator, Series};
use crate::basis::{check_same_basis, QuantumState};
use crate::error::Result;

/// Closed-system evolution sampled at `cfg.output_times()`.
pub fn evolve_unitary(gen: &dyn Generator, psi0: &QuantumState, cfg: &EvolutionConfig) -> Result<Series<QuantumState>> {
    cfg.validate()?;
    check_same_basis(gen.basis(), &psi0.basis)?;
    let times = cfg.output_times();
    let mut prop = Propagator::new(gen, cfg, None)?;
    let mut psi: Vec<_> = psi0.amplitudes.iter().copied().collect();
    let mut values = Vec::with_capacity(times.len());
    values.push(psi0.clone());
    for w in times.windows(2) {
        prop.advance(&mut psi, w[0], w[1])?;
        values.push(QuantumState {
            basis: Arc::clone(&psi0.basis),
            amplitudes: DVector::from_column_slice(&psi),
        });
    }
    Ok(Series { times, values })
}
