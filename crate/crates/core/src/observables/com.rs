//! Centre-of-mass distribution of two-exciton states and its line-shape fits.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Probability of the COM coordinate `(i + j) / 2` on a half-site grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComDistribution {
    pub positions: Vec<f64>,
    pub probability: Vec<f64>,
}

impl ComDistribution {
    pub fn mean(&self) -> f64 {
        self.positions.iter().zip(&self.probability).map(|(x, p)| x * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.positions.iter().zip(&self.probability).map(|(x, p)| (x - m).powi(2) * p).sum()
    }

    /// Points a whole number of sites away from `origin`, renormalized.
    pub fn sublattice(&self, origin: f64) -> ComDistribution {
        let keep: Vec<usize> = (0..self.positions.len())
            .filter(|&k| {
                let x = self.positions[k] - origin;
                (x - x.round()).abs() < 1e-9
            })
            .collect();
        let total: f64 = keep.iter().map(|&k| self.probability[k]).sum();
        let scale = if total > 0.0 { 1.0 / total } else { 0.0 };
        ComDistribution {
            positions: keep.iter().map(|&k| self.positions[k]).collect(),
            probability: keep.iter().map(|&k| self.probability[k] * scale).collect(),
        }
    }

    /// Number of grid points carrying more than `floor` probability.
    pub fn support(&self, floor: f64) -> usize {
        self.probability.iter().filter(|&&p| p > floor).count()
    }
}

/// Marginal of `g2` (upper triangle) over `(i + j) / 2`, normalized to one.
pub fn com_distribution(g2: &DMatrix<f64>) -> ComDistribution {
    let n = g2.nrows();
    let slots = if n >= 2 { 2 * n - 3 } else { 0 };
    let positions: Vec<f64> = (0..slots).map(|k| 0.5 + 0.5 * k as f64).collect();
    let mut probability = vec![0.0; slots];
    for i in 0..n {
        for j in i + 1..n {
            probability[i + j - 1] += g2[(i, j)];
        }
    }
    let total: f64 = probability.iter().sum();
    if total > 0.0 {
        probability.iter_mut().for_each(|p| *p /= total);
    }
    ComDistribution { positions, probability }
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Bessel function of the first kind `J_nu(x)` for real `nu >= 0`, `x >= 0`,
/// from its integral representation.
pub fn bessel_j(nu: f64, x: f64) -> f64 {
    if x == 0.0 {
        return if nu == 0.0 { 1.0 } else { 0.0 };
    }
    let n = 64 * (1 + (x + nu).ceil() as usize);
    let mut v = simpson(|th| (nu * th - x * th.sin()).cos(), 0.0, std::f64::consts::PI, n) / std::f64::consts::PI;
    let s = (nu * std::f64::consts::PI).sin();
    if s.abs() > 1e-15 {
        let mut end = (40.0 / x).asinh();
        if nu > 0.0 {
            end = end.min(40.0 / nu);
        }
        let tail = simpson(|t| (-x * t.sinh() - nu * t).exp(), 0.0, end, 2000);
        v -= s / std::f64::consts::PI * tail;
    }
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Bessel: `[amplitude, argument]`; Gaussian: `[amplitude, mean, sigma]`.
    pub params: Vec<f64>,
    /// Sum of squared residuals.
    pub ssr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComFit {
    pub bessel: Option<FitResult>,
    pub gaussian: Option<FitResult>,
    pub notice: Option<String>,
}

impl ComFit {
    /// `"bessel"` or `"gaussian"`, whichever leaves the smaller residual.
    pub fn preferred(&self) -> Option<&'static str> {
        match (&self.bessel, &self.gaussian) {
            (Some(b), Some(g)) => Some(if b.ssr <= g.ssr { "bessel" } else { "gaussian" }),
            _ => None,
        }
    }
}

/// Best amplitude for a fixed shape and the resulting residual.
fn linear_amplitude(data: &[f64], shape: &[f64]) -> (f64, f64) {
    let num: f64 = data.iter().zip(shape).map(|(d, s)| d * s).sum();
    let den: f64 = shape.iter().map(|s| s * s).sum();
    let a = if den > 0.0 { num / den } else { 0.0 };
    let ssr = data.iter().zip(shape).map(|(d, s)| (d - a * s).powi(2)).sum();
    (a, ssr)
}

fn golden(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Least-squares fits of `a J_{|c - center|}(x)^2` and
/// `a exp(-(c - mu)^2 / 2 sigma^2)` to the distribution.
pub fn fit_com(dist: &ComDistribution, center: f64) -> ComFit {
    if dist.support(1e-12) <= 1 {
        return ComFit { bessel: None, gaussian: None, notice: Some("distribution is concentrated on one point; fits skipped".into()) };
    }
    let xs = &dist.positions;
    let data = &dist.probability;
    let span = xs.last().copied().unwrap_or(0.0) - xs.first().copied().unwrap_or(0.0);

    let bessel_ssr = |arg: f64| {
        let shape: Vec<f64> = xs.iter().map(|c| bessel_j((c - center).abs(), arg).powi(2)).collect();
        linear_amplitude(data, &shape)
    };
    let x_max = 2.0 * span + 2.0;
    let grid = 240;
    let mut best = (0.0, f64::INFINITY);
    for k in 0..=grid {
        let arg = x_max * k as f64 / grid as f64;
        let (_, s) = bessel_ssr(arg);
        if s < best.1 {
            best = (arg, s);
        }
    }
    let step = x_max / grid as f64;
    let arg = golden(|a| bessel_ssr(a).1, (best.0 - step).max(0.0), best.0 + step);
    let (amp, ssr) = bessel_ssr(arg);
    let bessel = Some(FitResult { params: vec![amp, arg], ssr });

    let gauss_ssr = |mu: f64, sigma: f64| {
        let shape: Vec<f64> = xs.iter().map(|c| (-(c - mu).powi(2) / (2.0 * sigma * sigma)).exp()).collect();
        linear_amplitude(data, &shape)
    };
    let mean = dist.mean();
    let sd = dist.variance().sqrt().max(0.25);
    let mut g_best = (mean, sd, f64::INFINITY);
    for i in 0..=20 {
        let mu = mean - 2.0 + 0.2 * i as f64;
        for j in 0..=30 {
            let sigma = 0.15 * (span.max(1.0) / 0.15).powf(j as f64 / 30.0);
            let (_, s) = gauss_ssr(mu, sigma);
            if s < g_best.2 {
                g_best = (mu, sigma, s);
            }
        }
    }
    // Pattern search from the best start.
    let (mut mu, mut sigma, mut s) = g_best;
    let (mut dm, mut ds) = (0.1, 0.1 * sigma);
    for _ in 0..400 {
        let mut improved = false;
        for (cm, cs) in [(mu + dm, sigma), (mu - dm, sigma), (mu, sigma + ds), (mu, (sigma - ds).max(1e-3))] {
            let (_, t) = gauss_ssr(cm, cs);
            if t < s {
                (mu, sigma, s) = (cm, cs, t);
                improved = true;
            }
        }
        if !improved {
            dm *= 0.5;
            ds *= 0.5;
            if dm < 1e-9 {
                break;
            }
        }
    }
    let (amp, ssr) = gauss_ssr(mu, sigma);
    let gaussian = Some(FitResult { params: vec![amp, mu, sigma], ssr });
    ComFit { bessel, gaussian, notice: None }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{build_basis, config, QuantumState, Sector};
    use crate::observables::g2_correlation;

    #[test]
    fn sublattice_keeps_whole_site_offsets() {
        let d = ComDistribution { positions: vec![0.5, 1.0, 1.5, 2.0, 2.5], probability: vec![0.1, 0.2, 0.1, 0.4, 0.2] };
        let s = d.sublattice(2.0);
        assert_eq!(s.positions, vec![1.0, 2.0]);
        assert!((s.probability[0] - 1.0 / 3.0).abs() < 1e-15 && (s.probability[1] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(d.sublattice(0.5).positions, vec![0.5, 1.5, 2.5]);
    }

    #[test]
    fn bessel_reference_values() {
        assert!((bessel_j(0.0, 1.0) - 0.765_197_686_557_966_6).abs() < 1e-9);
        assert!((bessel_j(1.0, 2.0) - 0.576_724_807_756_873_4).abs() < 1e-9);
        assert!((bessel_j(3.0, 7.5) - (-0.258_060_913_193_460_3)).abs() < 1e-9);
        assert!((bessel_j(2.5, 3.3) - 0.444_490_971_425_711_5).abs() < 1e-8);
        for x in [0.3, 1.0, 4.0, 12.0] {
            let half = (2.0 / (std::f64::consts::PI * x)).sqrt() * x.sin();
            assert!((bessel_j(0.5, x) - half).abs() < 1e-8, "x={x}");
        }
    }

    #[test]
    fn separated_pair_gives_a_delta() {
        let b = build_basis(8, Sector::Excitations(2)).unwrap();
        let s = QuantumState::basis_state(b, config(&[3, 5])).unwrap();
        let d = com_distribution(&g2_correlation(&s));
        let k = d.positions.iter().position(|&x| x == 4.0).unwrap();
        assert_eq!(d.probability[k], 1.0);
        let f = fit_com(&d, 4.0);
        assert!(f.bessel.is_none() && f.notice.is_some());
    }

    #[test]
    fn fits_recover_their_own_families() {
        let positions: Vec<f64> = (0..41).map(|k| k as f64 * 0.5).collect();
        let center = 10.0;
        let walk: Vec<f64> = positions.iter().map(|c| bessel_j((c - center).abs(), 3.0).powi(2)).collect();
        let total: f64 = walk.iter().sum();
        let d = ComDistribution { positions: positions.clone(), probability: walk.iter().map(|p| p / total).collect() };
        let f = fit_com(&d, center);
        assert!((f.bessel.as_ref().unwrap().params[1] - 3.0).abs() < 1e-4);
        assert_eq!(f.preferred(), Some("bessel"));

        let gauss: Vec<f64> = positions.iter().map(|c| (-(c - 9.5f64).powi(2) / 8.0).exp()).collect();
        let total: f64 = gauss.iter().sum();
        let d = ComDistribution { positions, probability: gauss.iter().map(|p| p / total).collect() };
        let f = fit_com(&d, center);
        let g = f.gaussian.as_ref().unwrap();
        assert!((g.params[1] - 9.5).abs() < 1e-4 && (g.params[2] - 2.0).abs() < 1e-4);
        assert_eq!(f.preferred(), Some("gaussian"));
    }
}
