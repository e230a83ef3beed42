//! Krylov-subspace action of `exp(-i A t)` on a vector.
//!
//! Hermitian operators use Lanczos with full reorthogonalization, everything
//! else Arnoldi. The step is chosen adaptively from the usual a-posteriori
//! estimate `h_{m+1,m} |[exp(-i tau H_m) e_1]_m|`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{axpy, vdot, vnorm, HermitianEigen, Operator, ZERO};

pub(crate) const DEFAULT_KRYLOV_DIM: usize = 30;

pub(crate) struct KrylovSpace {
    vectors: Vec<Vec<C64>>,
    projected: DMatrix<C64>,
    residual: f64,
    norm0: f64,
    eigen: Option<HermitianEigen>,
}

impl KrylovSpace {
    pub(crate) fn build(op: &dyn Operator, v: &[C64], m_max: usize) -> Self {
        let n = v.len();
        let norm0 = vnorm(v);
        let m_max = m_max.min(n).max(1);
        let hermitian = op.is_hermitian();
        let mut vectors: Vec<Vec<C64>> = Vec::with_capacity(m_max);
        let mut h = DMatrix::from_element(m_max, m_max, ZERO);
        let mut residual = 0.0;
        let mut q: Vec<C64> = v.iter().map(|z| z / norm0).collect();
        let mut w = vec![ZERO; n];
        let mut scale = 0.0f64;
        let mut m = 0;
        while m < m_max {
            op.apply(&q, &mut w);
            vectors.push(std::mem::take(&mut q));
            let j = m;
            m += 1;
            if hermitian {
                let a = vdot(&vectors[j], &w).re;
                h[(j, j)] = C64::from(a);
                axpy(C64::from(-a), &vectors[j], &mut w);
                if j > 0 {
                    let b = h[(j - 1, j)];
                    axpy(-b, &vectors[j - 1], &mut w);
                }
            }
            // Modified Gram-Schmidt against the whole basis, twice.
            for _ in 0..2 {
                for (i, vi) in vectors.iter().enumerate() {
                    let c = vdot(vi, &w);
                    if !hermitian {
                        h[(i, j)] += c;
                    }
                    axpy(-c, vi, &mut w);
                }
            }
            let beta = vnorm(&w);
            scale = scale.max(h.column(j).iter().map(|z| z.norm()).fold(0.0, f64::max)).max(beta);
            if beta <= 1e-12 * scale.max(1e-300) || m == m_max {
                residual = if m == m_max { beta } else { 0.0 };
                break;
            }
            if m < m_max {
                if hermitian {
                    h[(j, j + 1)] = C64::from(beta);
                }
                h[(j + 1, j)] = C64::from(beta);
            }
            q = w.iter().map(|z| z / beta).collect();
        }
        let projected = h.view((0, 0), (m, m)).into_owned();
        let eigen = hermitian.then(|| HermitianEigen::new(&projected));
        KrylovSpace { vectors, projected, residual, norm0, eigen }
    }

    pub(crate) fn dim(&self) -> usize {
        self.vectors.len()
    }

    /// Small-space coefficients of `exp(-i H t) v`.
    pub(crate) fn coefficients(&self, t: f64) -> DVector<C64> {
        let m = self.dim();
        let mut e1 = DVector::from_element(m, ZERO);
        e1[0] = C64::from(self.norm0);
        match &self.eigen {
            Some(eig) => eig.propagate(&e1, t),
            None => (&self.projected * C64::new(0.0, -t)).exp() * e1,
        }
    }

    pub(crate) fn error(&self, coeffs: &DVector<C64>) -> f64 {
        self.residual * coeffs[coeffs.len() - 1].norm()
    }

    pub(crate) fn lift(&self, coeffs: &DVector<C64>, out: &mut [C64]) {
        out.iter_mut().for_each(|z| *z = ZERO);
        for (c, v) in coeffs.iter().zip(&self.vectors) {
            axpy(*c, v, out);
        }
    }
}

/// Adaptive Krylov propagation with a remembered step size.
pub(crate) struct KrylovStepper {
    pub tol: f64,
    pub m_max: usize,
    tau: f64,
}

impl KrylovStepper {
    pub(crate) fn new(tol: f64) -> Self {
        KrylovStepper { tol, m_max: DEFAULT_KRYLOV_DIM, tau: 0.0 }
    }

    /// Replaces `v` with `exp(-i A t) v`. The local error per unit time is
    /// kept below `tol` times the norm of `v`.
    pub(crate) fn advance(&mut self, op: &dyn Operator, v: &mut [C64], t: f64) -> Result<()> {
        self.advance_watch(op, v, t, None).map(|_| ())
    }

    /// As [`advance`](Self::advance), but stops early when the squared norm
    /// drops below `threshold`, returning the elapsed time at which it did.
    pub(crate) fn advance_watch(&mut self, op: &dyn Operator, v: &mut [C64], t: f64, threshold: Option<f64>) -> Result<Option<f64>> {
        let mut done = 0.0;
        let mut guard = 0usize;
        while done < t {
            let remaining = t - done;
            let space = KrylovSpace::build(op, v, self.m_max);
            let norm = space.norm0;
            if norm == 0.0 {
                return Ok(None);
            }
            let mut tau = if self.tau > 0.0 { (self.tau * 1.5).min(remaining) } else { remaining };
            let mut coeffs = space.coefficients(tau);
            // Below this the estimate is dominated by roundoff in the small
            // exponential and carries no information.
            let floor = 100.0 * f64::EPSILON * space.residual * norm;
            while space.error(&coeffs) > (self.tol * tau * norm).max(floor) {
                tau *= 0.5;
                if tau <= 1e-13 * t.max(1e-300) {
                    return Err(Error::Stiffness(done));
                }
                coeffs = space.coefficients(tau);
            }
            if remaining - tau < 1e-12 * t {
                tau = remaining;
            }
            if tau < remaining || self.tau == 0.0 {
                self.tau = tau;
            }
            if let Some(th) = threshold {
                if coeffs.norm_squared() < th {
                    // Bisect on the small space for the crossing time.
                    let (mut lo, mut hi) = (0.0, tau);
                    for _ in 0..60 {
                        let mid = 0.5 * (lo + hi);
                        if space.coefficients(mid).norm_squared() < th {
                            hi = mid;
                        } else {
                            lo = mid;
                        }
                        if hi - lo <= 1e-12 * tau {
                            break;
                        }
                    }
                    space.lift(&space.coefficients(hi), v);
                    return Ok(Some(done + hi));
                }
            }
            space.lift(&coeffs, v);
            done += tau;
            guard += 1;
            if guard > 10_000_000 {
                return Err(Error::Stiffness(done));
            }
        }
        Ok(None)
    }
}

/// `exp(-i A t) v` by adaptive Krylov steps.
pub fn expm_krylov(op: &dyn Operator, v: &[C64], t: f64, tol: f64) -> Result<Vec<C64>> {
    let mut out = v.to_vec();
    KrylovStepper::new(tol).advance(op, &mut out, t)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseOperator;

    fn random_matrix(n: usize, hermitian: bool, seed: u64) -> DMatrix<C64> {
        let mut x = seed;
        let mut next = || {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((x >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let m = DMatrix::from_fn(n, n, |_, _| C64::new(next(), next()));
        if hermitian {
            (&m + m.adjoint()) * C64::from(0.5)
        } else {
            m
        }
    }

    #[test]
    fn hermitian_matches_dense_exponential() {
        let n = 60;
        let m = random_matrix(n, true, 3) * C64::from(5.0);
        let op = DenseOperator::new(m.clone());
        assert!(op.is_hermitian());
        let v: Vec<C64> = (0..n).map(|k| C64::new(1.0 / (1.0 + k as f64), 0.0)).collect();
        let got = expm_krylov(&op, &v, 2.0, 1e-10).unwrap();
        let want = (m * C64::new(0.0, -2.0)).exp() * DVector::from_column_slice(&v);
        let err = (DVector::from_column_slice(&got) - want).norm();
        assert!(err < 1e-7, "{err}");
    }

    #[test]
    fn non_hermitian_matches_dense_exponential() {
        let n = 40;
        let m = random_matrix(n, false, 9) * C64::from(2.0);
        let op = DenseOperator::new(m.clone());
        let v: Vec<C64> = (0..n).map(|k| C64::new((k as f64).cos(), 0.2)).collect();
        let got = expm_krylov(&op, &v, 1.5, 1e-10).unwrap();
        let want = (m * C64::new(0.0, -1.5)).exp() * DVector::from_column_slice(&v);
        let err = (DVector::from_column_slice(&got) - &want).norm() / want.norm();
        assert!(err < 1e-7, "{err}");
    }

    #[test]
    fn invariant_subspace_terminates() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![C64::from(1.0), C64::from(2.0), C64::from(3.0)]));
        let op = DenseOperator::new(m);
        let v = vec![C64::from(1.0), ZERO, ZERO];
        let got = expm_krylov(&op, &v, 0.7, 1e-12).unwrap();
        assert!((got[0] - C64::from_polar(1.0, -0.7)).norm() < 1e-13);
    }

    #[test]
    fn norm_threshold_crossing() {
        // Pure decay exp(-t/2) in amplitude: norm^2 = exp(-t) crosses 0.5 at ln 2.
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![C64::new(0.0, -0.5), C64::new(0.0, -0.5)]));
        let op = DenseOperator::new(m);
        let mut v = vec![C64::from(1.0), ZERO];
        let hit = KrylovStepper::new(1e-10).advance_watch(&op, &mut v, 5.0, Some(0.5)).unwrap().unwrap();
        assert!((hit - 2f64.ln()).abs() < 1e-9);
    }
}
