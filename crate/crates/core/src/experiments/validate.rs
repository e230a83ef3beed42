//! Structural invariants checked on small instances of every model.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use super::{clean_peak_fidelities, ExperimentReport, TransferConfig};
use crate::basis::{build_basis, project_to_sector, QuantumState, Sector};
use crate::dynamics::{evolve_lindblad, evolve_unitary, EvolutionConfig, Generator, Method};
use crate::error::Result;
use crate::hamiltonian::{EffectiveFamily, EffectiveOptions, ExactModel};
use crate::lattice::{mhz, ChainSpec, DressingProfile, NoiseSpec};
use crate::linalg::{hermiticity_error, max_abs};
use crate::observables::{density_profile, g2_correlation, partial_trace};
use crate::topology::{chern_numbers, pump_dressing, BlochFamily, BlochHamiltonian, PumpSchedule};

const TOL: f64 = 1e-9;

fn relative_hermiticity(m: &DMatrix<C64>) -> f64 {
    hermiticity_error(m) / max_abs(m).max(1e-300)
}

fn small_chain(n: usize, delta: f64) -> Result<ChainSpec> {
    ChainSpec::with_nn_interaction(n, 4.4, 3.0 * delta)
}

/// Runs every invariant and records one check each.
pub fn run_invariant_suite() -> Result<ExperimentReport> {
    let mut rep = ExperimentReport::new("validate");
    let (omega, delta) = (mhz(5.0), mhz(50.0));
    let n = 6;
    rep.param("n", n as f64, "sites");
    rep.param("omega", omega, "rad/us");
    rep.param("delta", delta, "rad/us");

    let chain = small_chain(n, delta)?;
    let profile = DressingProfile::homogeneous(n, omega, delta);
    let exact = ExactModel::new(&chain, &profile)?;
    let h = exact.at(0.0)?.to_dense();
    let err = relative_hermiticity(&h);
    rep.check("exact_hermitian", err < TOL, format!("relative |H - H^+| = {err:.2e}"));

    let two = build_basis(n, Sector::AtMost(2))?;
    let eff = EffectiveFamily::new(&chain, &profile, EffectiveOptions::default(), two.clone())?;
    let he = eff.matrix(0.0)?;
    let err = relative_hermiticity(&he);
    rep.check("effective_hermitian", err < TOL, format!("relative |H - H^+| = {err:.2e}"));

    let mut cross = 0.0f64;
    for (i, &a) in two.states().iter().enumerate() {
        for (j, &b) in two.states().iter().enumerate() {
            if a.count_ones() != b.count_ones() {
                cross = cross.max(he[(i, j)].norm());
            }
        }
    }
    rep.check("effective_conserves_number", cross == 0.0, format!("largest cross-sector element {cross:.2e}"));

    let bloch = BlochHamiltonian::new(omega, delta, 3.0 * delta, Some(3.0 * delta / 64.0));
    let mut worst = 0.0f64;
    for &(k, phi) in &[(0.3, 0.1), (-1.2, 0.9), (2.5, 2.2)] {
        worst = worst.max(relative_hermiticity(&bloch.matrix(k, phi)?));
    }
    rep.check("bloch_hermitian", worst < TOL, format!("relative |H - H^+| = {worst:.2e}"));

    let psi0 = QuantumState::basis_state(exact.basis().clone(), 0b11)?;
    let evo = EvolutionConfig::new(2.0, 20).with_tolerances(1e-10, 1e-12);
    let s = evolve_unitary(&exact, &psi0, &evo)?;
    let drift = s.values.iter().map(|p| (p.norm() - 1.0).abs()).fold(0.0, f64::max);
    rep.check("unitary_preserves_norm", drift < 1e-8, format!("largest |<psi|psi> - 1| = {drift:.2e}"));

    let pair = build_basis(n, Sector::Excitations(2))?;
    let effp = EffectiveFamily::new(&chain, &profile, EffectiveOptions::default(), pair.clone())?;
    let start = QuantumState::basis_state(pair.clone(), 0b1001)?;
    let s = evolve_unitary(&effp, &start, &evo)?;
    let count = s.values.iter().map(|p| (density_profile(p).sum() - 2.0).abs()).fold(0.0, f64::max);
    rep.check("excitation_number_conserved", count < 1e-8, format!("largest |sum_i <n_i> - 2| = {count:.2e}"));

    let g2 = g2_correlation(s.last().expect("non-empty"));
    let total: f64 = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| g2[(i, j)]).sum();
    rep.check("g2_normalized", (total - 1.0).abs() < 1e-10, format!("sum over i < j = {total:.12}"));

    // Open dynamics on a short chain.
    let m = 4;
    let lchain = small_chain(m, delta)?;
    let lprof = DressingProfile::homogeneous(m, omega, delta);
    let lmodel = ExactModel::new(&lchain, &lprof)?;
    let rho0 = QuantumState::basis_state(lmodel.basis().clone(), 0b0101)?.to_density();
    let noise = NoiseSpec::new(0.5, 0.1)?;
    let levo = EvolutionConfig::new(1.0, 10).with_method(Method::DenseExpm);
    let rs = evolve_lindblad(&lmodel, &noise, &rho0, &levo)?;
    let tr = rs.values.iter().map(|r| (r.trace() - 1.0).abs()).fold(0.0, f64::max);
    let herm = rs.values.iter().map(|r| r.hermiticity_error()).fold(0.0, f64::max);
    rep.check("lindblad_preserves_trace", tr < 1e-9, format!("largest |Tr rho - 1| = {tr:.2e}"));
    rep.check("lindblad_preserves_hermiticity", herm < 1e-9, format!("largest |rho - rho^+| = {herm:.2e}"));

    let last = rs.last().expect("non-empty");
    let (p2, w) = project_to_sector(last, 2)?;
    let back = p2.embedded_in(&last.basis)?;
    let (again, w2) = project_to_sector(&back, 2)?;
    let idem = max_abs(&(&again.matrix - &p2.matrix));
    rep.check(
        "projection_idempotent",
        idem < 1e-12 && (w2 - 1.0).abs() < 1e-12,
        format!("|P(P rho) - P rho| = {idem:.2e}, reprojected weight {w2:.12} (first weight {w:.6})"),
    );

    let red = partial_trace(last, &[1, 2])?;
    let rtr: f64 = red.diagonal().iter().map(|z| z.re).sum();
    let rherm = hermiticity_error(&red);
    rep.check(
        "partial_trace_consistent",
        (rtr - last.trace()).abs() < 1e-10 && rherm < 1e-10,
        format!("Tr = {rtr:.12}, |rho_A - rho_A^+| = {rherm:.2e}"),
    );

    let chern = chern_numbers(&bloch, 32, 32)?;
    let sum: i64 = chern.numbers.iter().sum();
    rep.check("chern_sum_rule", sum == 0, format!("band Chern numbers {:?}", chern.numbers));

    let period = 10.0;
    let sched = PumpSchedule::new(period);
    let (p0, p1) = (sched.phi(0.0), sched.phi(period));
    let dress = pump_dressing(6, omega, delta, sched);
    let (d0, d1) = (dress.at(0.0)?, dress.at(period)?);
    let rabi_gap = d0.rabi.iter().zip(&d1.rabi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    rep.check(
        "pump_schedule_endpoints",
        p0.abs() < 1e-12 && (p1 - PI).abs() < 1e-12 && rabi_gap < 1e-9 * omega,
        format!("phi(0) = {p0:.3e}, phi(T) - pi = {:.3e}, largest Rabi mismatch {rabi_gap:.3e}", p1 - PI),
    );

    let loose = TransferConfig::default();
    let tight = TransferConfig { omega: loose.omega / 2.0, ..TransferConfig::default() };
    let (e10, x10) = clean_peak_fidelities(&loose)?;
    let (e20, x20) = clean_peak_fidelities(&tight)?;
    let (gap10, gap20) = ((e10 - x10).abs(), (e20 - x20).abs());
    rep.check(
        "perturbative_consistency",
        gap20 < gap10,
        format!("|F_eff - F_exact| = {gap10:.4} at delta/omega = 10, {gap20:.4} at 20"),
    );
    Ok(rep)
}
