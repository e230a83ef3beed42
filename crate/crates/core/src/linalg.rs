//! Operator abstraction and small dense helpers shared by the engines.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// A linear operator acting on complex vectors of fixed dimension.
pub trait Operator: Send + Sync {
    fn dim(&self) -> usize;

    /// `y = A x`.
    fn apply(&self, x: &[C64], y: &mut [C64]);

    /// True when the operator is known to be Hermitian, which lets the Krylov
    /// propagator use the three-term Lanczos recurrence.
    fn is_hermitian(&self) -> bool {
        false
    }

    fn to_dense(&self) -> DMatrix<C64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        let mut e = vec![ZERO; n];
        let mut col = vec![ZERO; n];
        for j in 0..n {
            e[j] = ONE;
            self.apply(&e, &mut col);
            for i in 0..n {
                m[(i, j)] = col[i];
            }
            e[j] = ZERO;
        }
        m
    }
}

impl std::fmt::Debug for dyn Operator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Operator(dim = {})", self.dim())
    }
}

/// Dense matrix wrapped as an [`Operator`].
#[derive(Debug, Clone)]
pub struct DenseOperator {
    pub matrix: DMatrix<C64>,
    hermitian: bool,
}

impl DenseOperator {
    pub fn new(matrix: DMatrix<C64>) -> Self {
        let hermitian = hermiticity_error(&matrix) <= 1e-12 * (1.0 + max_abs(&matrix));
        DenseOperator { matrix, hermitian }
    }
}

impl Operator for DenseOperator {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        let n = self.matrix.nrows();
        y.iter_mut().for_each(|v| *v = ZERO);
        // Column-major traversal.
        for (j, &xj) in x.iter().enumerate() {
            if xj == ZERO {
                continue;
            }
            let col = self.matrix.column(j);
            for i in 0..n {
                y[i] += col[i] * xj;
            }
        }
    }

    fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    fn to_dense(&self) -> DMatrix<C64> {
        self.matrix.clone()
    }
}

/// Sum `w1 A + w2 B` of two operators, applied term by term.
pub struct Combination<'a> {
    pub a: &'a dyn Operator,
    pub wa: f64,
    pub b: &'a dyn Operator,
    pub wb: f64,
}

impl Operator for Combination<'_> {
    fn dim(&self) -> usize {
        self.a.dim()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        let mut tmp = vec![ZERO; x.len()];
        self.a.apply(x, y);
        self.b.apply(x, &mut tmp);
        for (yi, ti) in y.iter_mut().zip(&tmp) {
            *yi = *yi * self.wa + *ti * self.wb;
        }
    }

    fn is_hermitian(&self) -> bool {
        self.a.is_hermitian() && self.b.is_hermitian()
    }
}

pub fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest entry of `M - M^dagger`.
pub fn hermiticity_error(m: &DMatrix<C64>) -> f64 {
    if m.nrows() != m.ncols() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    let mut err: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            err = err.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    err
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues in ascending
/// order and eigenvectors as the matching columns.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<C64>,
}

impl HermitianEigen {
    pub fn new(m: &DMatrix<C64>) -> Self {
        let n = m.nrows();
        // Real symmetric input takes the (much cheaper) real solver.
        let (raw_values, raw_vectors) = if m.iter().all(|z| z.im == 0.0) {
            let re = m.map(|z| z.re);
            let eig = ((&re + re.transpose()) * 0.5).symmetric_eigen();
            (eig.eigenvalues, eig.eigenvectors.map(C64::from))
        } else {
            // Symmetrize against round-off before handing to the solver.
            let eig = ((m + m.adjoint()) * C64::new(0.5, 0.0)).symmetric_eigen();
            (eig.eigenvalues, eig.eigenvectors)
        };
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| raw_values[a].total_cmp(&raw_values[b]));
        let values = DVector::from_iterator(n, order.iter().map(|&k| raw_values[k]));
        let mut vectors = DMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            vectors.set_column(dst, &raw_vectors.column(src));
        }
        HermitianEigen { values, vectors }
    }

    /// `exp(-i H t) v`.
    pub fn propagate(&self, v: &DVector<C64>, t: f64) -> DVector<C64> {
        let mut c = self.vectors.ad_mul(v);
        for (ck, &e) in c.iter_mut().zip(self.values.iter()) {
            *ck *= C64::from_polar(1.0, -e * t);
        }
        &self.vectors * c
    }

    /// `exp(-i H t) rho exp(i H t)`.
    pub fn propagate_density(&self, rho: &DMatrix<C64>, t: f64) -> DMatrix<C64> {
        let mut r = self.vectors.ad_mul(rho) * &self.vectors;
        let n = self.values.len();
        for i in 0..n {
            for j in 0..n {
                r[(i, j)] *= C64::from_polar(1.0, -(self.values[i] - self.values[j]) * t);
            }
        }
        &self.vectors * r * self.vectors.adjoint()
    }

    /// Real symmetric part `f(H)` for a real function of the eigenvalues.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> DMatrix<C64> {
        let d = DVector::from_iterator(self.values.len(), self.values.iter().map(|&e| C64::new(f(e), 0.0)));
        &self.vectors * DMatrix::from_diagonal(&d) * self.vectors.adjoint()
    }
}

pub fn vdot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn vnorm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `y += alpha x`.
pub fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(alpha: C64, x: &mut [C64]) {
    x.iter_mut().for_each(|v| *v *= alpha);
}
