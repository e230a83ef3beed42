//! Embedded Dormand-Prince 5(4) integrator for complex vector ODEs.
//!
//! The error is measured in the max norm, component-wise scaled by
//! `abs + rel * |y|`.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rel: f64,
    pub abs: f64,
    /// Largest step in us.
    pub h_max: f64,
    /// Control the local error per unit time instead of per step, so the
    /// global error stays below the tolerance times the elapsed time.
    pub per_unit_time: bool,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// Fifth-order weights minus the embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Adaptive integrator state; keeps the last accepted step size between calls.
pub struct DormandPrince {
    tol: Tolerances,
    h: f64,
    k: Vec<Vec<C64>>,
    tmp: Vec<C64>,
    fsal_valid: bool,
    pub steps: usize,
    pub rejected: usize,
}

impl DormandPrince {
    pub fn new(dim: usize, tol: Tolerances) -> Self {
        DormandPrince {
            tol,
            h: 0.0,
            k: vec![vec![C64::new(0.0, 0.0); dim]; 7],
            tmp: vec![C64::new(0.0, 0.0); dim],
            fsal_valid: false,
            steps: 0,
            rejected: 0,
        }
    }

    /// Integrates `y' = f(t, y)` from `t0` to `t1` in place.
    pub fn integrate<F>(&mut self, mut f: F, t0: f64, t1: f64, y: &mut [C64]) -> Result<()>
    where
        F: FnMut(f64, &[C64], &mut [C64]) -> Result<()>,
    {
        if t1 <= t0 {
            return Ok(());
        }
        let n = y.len();
        let mut t = t0;
        if !self.fsal_valid {
            f(t, y, &mut self.k[0])?;
            self.fsal_valid = true;
        }
        if self.h <= 0.0 {
            self.h = self.initial_step(y, t1 - t0);
        }
        while t < t1 {
            let mut h = self.h.min(self.tol.h_max).min(t1 - t);
            // Avoid a sliver of a final step.
            if t1 - (t + h) < 1e-3 * h {
                h = t1 - t;
            }
            if h <= 1e-14 * t.abs().max(1.0) {
                return Err(Error::Stiffness(t));
            }
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = y[i];
                    for (j, a) in A[s].iter().take(s).enumerate() {
                        if *a != 0.0 {
                            acc += self.k[j][i] * (h * a);
                        }
                    }
                    self.tmp[i] = acc;
                }
                f(t + C[s] * h, &self.tmp, &mut self.k[s])?;
            }
            // tmp now holds the fifth-order solution (stage 7 argument).
            let mut err = 0.0;
            for i in 0..n {
                let mut e = C64::new(0.0, 0.0);
                for (j, w) in E.iter().enumerate() {
                    if *w != 0.0 {
                        e += self.k[j][i] * w;
                    }
                }
                let sc = self.tol.abs + self.tol.rel * y[i].norm().max(self.tmp[i].norm());
                err = f64::max(err, e.norm() * h / sc);
            }
            let order = if self.tol.per_unit_time {
                err /= h;
                0.25
            } else {
                0.2
            };
            if err <= 1.0 {
                t += h;
                y.copy_from_slice(&self.tmp);
                self.k.swap(0, 6);
                self.steps += 1;
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-order)).clamp(0.2, 5.0) };
                // Do not let a truncated final step shrink the remembered size.
                if h >= self.h * 0.999 || fac < 1.0 {
                    self.h = h * fac;
                }
            } else {
                self.rejected += 1;
                let fac = if err.is_finite() { (0.9 * err.powf(-order)).clamp(0.1, 0.9) } else { 0.1 };
                self.h = h * fac;
            }
        }
        Ok(())
    }

    fn initial_step(&self, y: &[C64], span: f64) -> f64 {
        let ny = y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(1e-10);
        let nf = self.k[0].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let h = if nf > 0.0 { 0.01 * ny / nf } else { span };
        h.min(span).min(self.tol.h_max).max(1e-12)
    }

    /// Forgets the cached derivative; call after modifying the state between
    /// `integrate` calls.
    pub fn reset(&mut self) {
        self.fsal_valid = false;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_phase() {
        // y' = -i w y  =>  y(t) = exp(-i w t)
        let w = 3.0;
        let mut y = vec![C64::new(1.0, 0.0)];
        let mut dp = DormandPrince::new(1, Tolerances { rel: 1e-10, abs: 1e-12, h_max: 1.0, per_unit_time: false });
        dp.integrate(|_, y, dy| { dy[0] = C64::new(0.0, -w) * y[0]; Ok(()) }, 0.0, 2.0, &mut y).unwrap();
        let want = C64::from_polar(1.0, -w * 2.0);
        assert!((y[0] - want).norm() < 1e-8);
    }

    #[test]
    fn time_dependent_rhs_and_restart() {
        // y' = t y, y(0) = 1 => exp(t^2/2)
        let mut y = vec![C64::new(1.0, 0.0)];
        let mut dp = DormandPrince::new(1, Tolerances { rel: 1e-11, abs: 1e-13, h_max: 0.1, per_unit_time: false });
        for k in 0..10 {
            let (a, b) = (k as f64 * 0.1, (k + 1) as f64 * 0.1);
            dp.integrate(|t, y, dy| { dy[0] = y[0] * t; Ok(()) }, a, b, &mut y).unwrap();
        }
        assert!((y[0].re - 0.5f64.exp()).abs() < 1e-9);
    }

    #[test]
    fn per_unit_time_control_bounds_drift() {
        let w = 20.0;
        let mut y = vec![C64::new(1.0, 0.0)];
        let tol = Tolerances { rel: 1e-8, abs: 1e-12, h_max: 1.0, per_unit_time: true };
        let mut dp = DormandPrince::new(1, tol);
        dp.integrate(|_, y, dy| { dy[0] = C64::new(0.0, -w) * y[0]; Ok(()) }, 0.0, 10.0, &mut y).unwrap();
        assert!((y[0] - C64::from_polar(1.0, -w * 10.0)).norm() < 1e-8 * 10.0);
    }
}
