//! Pure-state stepping shared by the unitary and trajectory engines.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use super::krylov::KrylovStepper;
use super::ode::{DormandPrince, Tolerances};
use super::{EvolutionConfig, Generator, Method};
use crate::error::{Error, Result};
use crate::linalg::{HermitianEigen, Operator, I};

/// Fourth-order commutator-free Magnus weights.
const CF4_A1: f64 = (3.0 - 2.0 * 1.732_050_807_568_877_2) / 12.0;
const CF4_A2: f64 = (3.0 + 2.0 * 1.732_050_807_568_877_2) / 12.0;
const GAUSS_OFFSET: f64 = 0.288_675_134_594_812_9; // sqrt(3)/6

/// `H - i diag(rates)`.
pub(crate) struct Damped {
    pub inner: Arc<dyn Operator>,
    pub rates: Arc<Vec<f64>>,
}

impl Operator for Damped {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        self.inner.apply(x, y);
        for ((yi, xi), r) in y.iter_mut().zip(x).zip(self.rates.iter()) {
            *yi -= I * xi * r;
        }
    }
}

#[derive(Clone)]
enum Cache {
    None,
    Eigen(Arc<HermitianEigen>),
    Dense(Arc<DMatrix<C64>>),
}

pub(crate) struct Propagator<'a> {
    gen: &'a dyn Generator,
    method: Method,
    dt_max: f64,
    tol: Tolerances,
    damping: Option<Arc<Vec<f64>>>,
    krylov: KrylovStepper,
    cache: Cache,
}

impl<'a> Propagator<'a> {
    /// `damping[k]` adds `-i damping[k]` to the diagonal of the generator.
    pub(crate) fn new(gen: &'a dyn Generator, cfg: &EvolutionConfig, damping: Option<Arc<Vec<f64>>>) -> Result<Self> {
        let damping = damping.filter(|d| d.iter().any(|&r| r != 0.0));
        if let Some(d) = &damping {
            if d.len() != gen.dim() {
                return Err(Error::BasisMismatch("damping vector does not match the basis".into()));
            }
        }
        let mut p = Propagator {
            gen,
            method: cfg.method,
            dt_max: cfg.dt_max,
            tol: Tolerances { rel: cfg.rel_tol, abs: cfg.abs_tol, h_max: cfg.dt_max, per_unit_time: true },
            damping,
            krylov: KrylovStepper::new(cfg.rel_tol),
            cache: Cache::None,
        };
        if gen.is_static() && p.method == Method::DenseExpm {
            let m = gen.at(0.0)?.to_dense();
            p.cache = match &p.damping {
                None => Cache::Eigen(Arc::new(HermitianEigen::new(&m))),
                Some(d) => Cache::Dense(Arc::new(with_damping(m, d))),
            };
        }
        Ok(p)
    }

    /// A fresh propagator sharing this one's precomputed decomposition.
    pub(crate) fn fork(&self) -> Self {
        Propagator {
            gen: self.gen,
            method: self.method,
            dt_max: self.dt_max,
            tol: self.tol,
            damping: self.damping.clone(),
            krylov: KrylovStepper::new(self.krylov.tol),
            cache: self.cache.clone(),
        }
    }

    fn wrap(&self, op: Arc<dyn Operator>, weight: f64) -> Arc<dyn Operator> {
        match &self.damping {
            None => op,
            Some(d) => Arc::new(Damped {
                inner: op,
                rates: Arc::new(d.iter().map(|r| r * weight).collect()),
            }),
        }
    }

    /// Advances `psi` from `t0` to `t1`.
    pub(crate) fn advance(&mut self, psi: &mut [C64], t0: f64, t1: f64) -> Result<()> {
        self.advance_watch(psi, t0, t1, None).map(|_| ())
    }

    /// Advances `psi` from `t0` to `t1`, stopping early at the first time the
    /// squared norm falls below `threshold`. Returns that time if it occurred.
    pub(crate) fn advance_watch(&mut self, psi: &mut [C64], t0: f64, t1: f64, threshold: Option<f64>) -> Result<Option<f64>> {
        if t1 <= t0 {
            return Ok(None);
        }
        if self.gen.is_static() {
            return self.advance_static(psi, t0, t1, threshold);
        }
        match self.method {
            Method::AdaptiveRk => self.watched(psi, t0, t1, threshold, |p, psi, a, b| p.rk(psi, a, b)),
            Method::DenseExpm | Method::Krylov => {
                let steps = ((t1 - t0) / self.dt_max).ceil().max(1.0) as usize;
                let h = (t1 - t0) / steps as f64;
                for k in 0..steps {
                    let a = t0 + k as f64 * h;
                    let b = if k + 1 == steps { t1 } else { a + h };
                    if let Some(tj) = self.watched(psi, a, b, threshold, |p, psi, a, b| p.magnus_step(psi, a, b - a))? {
                        return Ok(Some(tj));
                    }
                }
                Ok(None)
            }
        }
    }

    fn advance_static(&mut self, psi: &mut [C64], t0: f64, t1: f64, threshold: Option<f64>) -> Result<Option<f64>> {
        match self.method {
            Method::Krylov => {
                let op = self.wrap(self.gen.at(t0)?, 1.0);
                Ok(self.krylov.advance_watch(op.as_ref(), psi, t1 - t0, threshold)?.map(|dt| t0 + dt))
            }
            Method::DenseExpm => self.watched(psi, t0, t1, threshold, |p, psi, a, b| {
                let v = DVector::from_column_slice(psi);
                let out = match &p.cache {
                    Cache::Eigen(e) => e.propagate(&v, b - a),
                    Cache::Dense(m) => (m.as_ref() * C64::new(0.0, -(b - a))).exp() * v,
                    Cache::None => unreachable!("dense cache is built for static generators"),
                };
                psi.copy_from_slice(out.as_slice());
                Ok(())
            }),
            Method::AdaptiveRk => self.watched(psi, t0, t1, threshold, |p, psi, a, b| p.rk(psi, a, b)),
        }
    }

    /// Runs `step` over `[t0, t1]`; with a threshold, locates the crossing by
    /// bisection on re-propagation from the start of the interval.
    fn watched<F>(&mut self, psi: &mut [C64], t0: f64, t1: f64, threshold: Option<f64>, mut step: F) -> Result<Option<f64>>
    where
        F: FnMut(&mut Self, &mut [C64], f64, f64) -> Result<()>,
    {
        let Some(th) = threshold else {
            step(self, psi, t0, t1)?;
            return Ok(None);
        };
        let start = psi.to_vec();
        step(self, psi, t0, t1)?;
        if norm2(psi) >= th {
            return Ok(None);
        }
        let (mut lo, mut hi) = (t0, t1);
        let mut trial = start.clone();
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            trial.copy_from_slice(&start);
            step(self, &mut trial, t0, mid)?;
            if norm2(&trial) < th {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-10 * (t1 - t0) {
                break;
            }
        }
        psi.copy_from_slice(&start);
        step(self, psi, t0, hi)?;
        Ok(Some(hi))
    }

    /// One commutator-free fourth-order Magnus step of length `h`.
    fn magnus_step(&mut self, psi: &mut [C64], t: f64, h: f64) -> Result<()> {
        let (ta, tb) = (t + (0.5 - GAUSS_OFFSET) * h, t + (0.5 + GAUSS_OFFSET) * h);
        let first = self.wrap(self.gen.blend(ta, CF4_A2, tb, CF4_A1)?, CF4_A1 + CF4_A2);
        let second = self.wrap(self.gen.blend(ta, CF4_A1, tb, CF4_A2)?, CF4_A1 + CF4_A2);
        for op in [first, second] {
            self.exp_apply(op.as_ref(), psi, h)?;
        }
        Ok(())
    }

    fn exp_apply(&mut self, op: &dyn Operator, psi: &mut [C64], h: f64) -> Result<()> {
        match self.method {
            Method::Krylov => self.krylov.advance(op, psi, h),
            _ => {
                let m = op.to_dense();
                let v = DVector::from_column_slice(psi);
                let out = if op.is_hermitian() {
                    HermitianEigen::new(&m).propagate(&v, h)
                } else {
                    (m * C64::new(0.0, -h)).exp() * v
                };
                psi.copy_from_slice(out.as_slice());
                Ok(())
            }
        }
    }

    fn rk(&mut self, psi: &mut [C64], t0: f64, t1: f64) -> Result<()> {
        let gen = self.gen;
        let damping = self.damping.clone();
        let frozen = if gen.is_static() { Some(gen.at(t0)?) } else { None };
        let mut dp = DormandPrince::new(psi.len(), self.tol);
        dp.integrate(
            |t, y, dy| {
                let op = match &frozen {
                    Some(op) => Arc::clone(op),
                    None => gen.at(t)?,
                };
                op.apply(y, dy);
                for (k, d) in dy.iter_mut().enumerate() {
                    *d *= -I;
                    if let Some(r) = &damping {
                        *d -= y[k] * r[k];
                    }
                }
                Ok(())
            },
            t0,
            t1,
            psi,
        )
    }
}

fn with_damping(mut m: DMatrix<C64>, d: &[f64]) -> DMatrix<C64> {
    for (k, r) in d.iter().enumerate() {
        m[(k, k)] -= I * r;
    }
    m
}

pub(crate) fn norm2(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}
