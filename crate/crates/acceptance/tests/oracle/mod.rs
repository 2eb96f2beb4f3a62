//! Reference computations written independently of the library.

use activesearch_core::kernels::KernelFamily;
use activesearch_core::Point2;
use nalgebra::{DMatrix, DVector};

/// `K_ν(z) = ∫₀^∞ exp(−z cosh t) cosh(νt) dt`, by the trapezoidal rule.
pub fn bessel_k(nu: f64, z: f64) -> f64 {
    let h = 0.01f64;
    let mut sum = 0.5 * (-z).exp();
    let mut t: f64 = h;
    loop {
        let term = (-z * t.cosh()).exp() * (nu * t).cosh();
        sum += term;
        if term < 1e-18 * sum || t > 60.0 {
            break;
        }
        t += h;
    }
    sum * h
}

fn gamma_half_integer(nu: f64) -> f64 {
    // Γ(ν) for ν ∈ {1/2, 3/2, 5/2} from Γ(1/2) = √π.
    let mut g = std::f64::consts::PI.sqrt();
    let mut a = 0.5;
    while a < nu - 1e-12 {
        g *= a;
        a += 1.0;
    }
    g
}

/// The general Matérn form `2^{1−ν}/Γ(ν) · (√(2ν) r/ℓ)^ν · K_ν(√(2ν) r/ℓ)`.
pub fn matern(nu: f64, r: f64, l: f64) -> f64 {
    if r == 0.0 {
        return 1.0;
    }
    let z = (2.0 * nu).sqrt() * r / l;
    2f64.powf(1.0 - nu) / gamma_half_integer(nu) * z.powf(nu) * bessel_k(nu, z)
}

pub fn kernel(family: KernelFamily, l: f64, a: &Point2, b: &Point2) -> f64 {
    let r = ((a.x1 - b.x1).powi(2) + (a.x2 - b.x2).powi(2)).sqrt();
    match family {
        KernelFamily::SquaredExponential => (-(r * r) / (2.0 * l * l)).exp(),
        KernelFamily::Exponential => (-r / l).exp(),
        KernelFamily::PowerExponential => (-(r / l).powf(1.5)).exp(),
        KernelFamily::Matern32 => matern(1.5, r, l),
        KernelFamily::Matern52 => matern(2.5, r, l),
    }
}

/// GP posterior by explicit matrix inversion on targets standardized with
/// the population standard deviation. Returns standardized mean and
/// variance at each query.
pub struct GpOracle {
    xs: Vec<Point2>,
    family: KernelFamily,
    l: f64,
    k_inv: DMatrix<f64>,
    y_std: DVector<f64>,
}

impl GpOracle {
    pub fn new(xs: &[Point2], ys: &[f64], family: KernelFamily, l: f64, diag: f64) -> Option<Self> {
        let n = xs.len();
        let mean = ys.iter().sum::<f64>() / n as f64;
        let sd = (ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        let scale = if sd > 1e-12 * mean.abs().max(1.0) { sd } else { 1.0 };
        let y_std = DVector::from_iterator(n, ys.iter().map(|y| (y - mean) / scale));
        let k = DMatrix::from_fn(n, n, |i, j| {
            kernel(family, l, &xs[i], &xs[j]) + if i == j { diag } else { 0.0 }
        });
        Some(Self {
            xs: xs.to_vec(),
            family,
            l,
            k_inv: k.try_inverse()?,
            y_std,
        })
    }

    pub fn predict(&self, x: &Point2) -> (f64, f64) {
        let kx = DVector::from_iterator(
            self.xs.len(),
            self.xs.iter().map(|xi| kernel(self.family, self.l, x, xi)),
        );
        let w = &self.k_inv * &kx;
        (w.dot(&self.y_std), 1.0 - w.dot(&kx))
    }
}
