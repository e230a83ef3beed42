//! Single-exciton hopping with on-site dephasing and uniform decay.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::ode::{DormandPrince, Tolerances};
use crate::error::{Error, Result};

/// Hopping amplitudes `hopping[d - 1] = J_d` on an open chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HrsSpec {
    pub hopping: Vec<f64>,
    pub gamma: f64,
    pub kappa: f64,
    pub n_sites: usize,
    pub origin: usize,
}

impl HrsSpec {
    pub fn new(hopping: Vec<f64>, gamma: f64, n_sites: usize, origin: usize) -> Self {
        HrsSpec { hopping, gamma, kappa: 0.0, n_sites, origin }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0) || !(self.kappa >= 0.0) {
            return Err(Error::Invalid("rates must be non-negative".into()));
        }
        if self.origin >= self.n_sites {
            return Err(Error::Invalid(format!("origin {} outside a chain of {}", self.origin, self.n_sites)));
        }
        if self.hopping.is_empty() || self.hopping.len() >= self.n_sites {
            return Err(Error::Invalid("hopping range must lie between 1 and N - 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct HrsSeries {
    pub times: Vec<f64>,
    pub states: Vec<DMatrix<C64>>,
    /// `<x^2>` relative to the origin, in lattice units.
    pub msd: Vec<f64>,
    /// `<x>` relative to the origin.
    pub mean: Vec<f64>,
}

/// `(4 S / gamma^2)(gamma t + exp(-gamma t) - 1)` with `S = sum_d (d J_d)^2`,
/// reducing to `2 S t^2` at `gamma = 0`.
pub fn hrs_msd_closed_form(hopping: &[f64], gamma: f64, t: f64) -> f64 {
    let s: f64 = hopping.iter().enumerate().map(|(k, j)| ((k + 1) as f64 * j).powi(2)).sum();
    let x = gamma * t;
    if x < 1e-4 {
        // Series of gamma t + e^-gamma t - 1 = x^2/2 - x^3/6 + x^4/24.
        return 4.0 * s * t * t * (0.5 - x / 6.0 + x * x / 24.0);
    }
    4.0 * s / (gamma * gamma) * (x + (-x).exp() - 1.0)
}

/// Integrates the single-exciton density matrix from `|origin><origin|`
/// and reports it at `t_points` (non-decreasing, starting at or after 0).
pub fn evolve_hrs(spec: &HrsSpec, t_points: &[f64], rel_tol: f64, abs_tol: f64) -> Result<HrsSeries> {
    spec.validate()?;
    if t_points.windows(2).any(|w| w[1] < w[0]) || t_points.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::Invalid("output times must be non-negative and non-decreasing".into()));
    }
    let n = spec.n_sites;
    let jmax = spec.hopping.iter().fold(0.0f64, |m, j| m.max(j.abs()));
    let h_max = if jmax > 0.0 { 0.5 / jmax } else { f64::INFINITY };
    let tol = Tolerances { rel: rel_tol, abs: abs_tol, h_max, per_unit_time: false };
    let mut dp = DormandPrince::new(n * n, tol);
    let mut y = vec![C64::new(0.0, 0.0); n * n];
    y[spec.origin + spec.origin * n] = C64::new(1.0, 0.0);
    let hop = &spec.hopping;
    let (gamma, kappa) = (spec.gamma, spec.kappa);
    let rhs = |_t: f64, r: &[C64], dr: &mut [C64]| -> Result<()> {
        for col in 0..n {
            for row in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for (k, &j) in hop.iter().enumerate() {
                    let d = k + 1;
                    let mut s = C64::new(0.0, 0.0);
                    if row + d < n {
                        s += r[row + d + col * n];
                    }
                    if row >= d {
                        s += r[row - d + col * n];
                    }
                    if col >= d {
                        s -= r[row + (col - d) * n];
                    }
                    if col + d < n {
                        s -= r[row + (col + d) * n];
                    }
                    acc += s * j;
                }
                let mut v = C64::new(0.0, -1.0) * acc - r[row + col * n] * kappa;
                if row != col {
                    v -= r[row + col * n] * gamma;
                }
                dr[row + col * n] = v;
            }
        }
        Ok(())
    };
    let mut t = 0.0;
    let mut out = HrsSeries { times: Vec::new(), states: Vec::new(), msd: Vec::new(), mean: Vec::new() };
    for &tp in t_points {
        dp.integrate(rhs, t, tp, &mut y)?;
        t = tp;
        let (mut m1, mut m2) = (0.0, 0.0);
        for k in 0..n {
            let x = k as f64 - spec.origin as f64;
            let p = y[k + k * n].re;
            m1 += x * p;
            m2 += x * x * p;
        }
        out.times.push(tp);
        out.states.push(DMatrix::from_column_slice(n, n, &y));
        out.msd.push(m2);
        out.mean.push(m1);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_limits() {
        let j = [1.0, 0.1];
        let s = 1.0 + 0.04;
        assert!((hrs_msd_closed_form(&j, 0.0, 2.0) - 2.0 * s * 4.0).abs() < 1e-12);
        // Long times: 4 S t / gamma.
        let g = 2.0;
        let t = 1e4;
        assert!((hrs_msd_closed_form(&j, g, t) / (4.0 * s * t / g) - 1.0).abs() < 1e-3);
        // Continuity across the series switch.
        let a = hrs_msd_closed_form(&j, 1.0, 0.99e-4);
        let b = hrs_msd_closed_form(&j, 1.0, 1.01e-4);
        assert!((b / a - (1.01f64 / 0.99).powi(2)).abs() < 1e-6);
    }

    #[test]
    fn dephased_spread_matches_closed_form() {
        let spec = HrsSpec::new(vec![1.0, 0.2], 0.8, 121, 60);
        let ts: Vec<f64> = (1..=10).map(|k| k as f64 * 0.8).collect();
        let r = evolve_hrs(&spec, &ts, 1e-11, 1e-13).unwrap();
        for (t, m) in ts.iter().zip(&r.msd) {
            let want = hrs_msd_closed_form(&spec.hopping, spec.gamma, *t);
            assert!((m / want - 1.0).abs() < 1e-6, "t={t}: {m} vs {want}");
        }
    }

    #[test]
    fn ballistic_without_dephasing() {
        let spec = HrsSpec::new(vec![0.5], 0.0, 101, 50);
        let r = evolve_hrs(&spec, &[1.0, 3.0], 1e-11, 1e-13).unwrap();
        for (t, m) in r.times.iter().zip(&r.msd) {
            assert!((m - 2.0 * 0.25 * t * t).abs() < 1e-7);
        }
    }

    #[test]
    fn decay_scales_trace() {
        let mut spec = HrsSpec::new(vec![1.0], 0.5, 21, 10);
        spec.kappa = 0.3;
        let r = evolve_hrs(&spec, &[2.0], 1e-11, 1e-13).unwrap();
        let tr: f64 = r.states[0].diagonal().iter().map(|z| z.re).sum();
        assert!((tr - (-0.6f64).exp()).abs() < 1e-9);
    }
}
