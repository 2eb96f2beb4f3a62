//! Gaussian-process regression with a zero prior mean on standardized
//! targets.
//!
//! Targets are shifted to zero mean and scaled to unit (population)
//! standard deviation before fitting. Posterior means are returned in score
//! units, posterior variances in standardized units, where the prior
//! variance is 1.

use nalgebra::{Cholesky, DMatrix};

use crate::kernels::{gram, KernelFamily, KernelSpec, DEFAULT_POWER};
use crate::{Error, Point2, Result};

/// Observation noise λ² in standardized units used by every surrogate fit.
pub const DEFAULT_NOISE: f64 = 1e-6;

/// Lengthscale used when there are too few points for likelihood fitting.
pub const DEFAULT_LENGTHSCALE: f64 = 0.2;

/// Extra diagonal tried, in order, when the factorization fails.
const JITTER_LADDER: [f64; 5] = [1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// A fitted GP. Immutable; safe to query from many threads.
#[derive(Debug, Clone)]
pub struct GpModel {
    xs: Vec<Point2>,
    ys: Vec<f64>,
    y_mean: f64,
    y_scale: f64,
    kernel: KernelSpec,
    noise: f64,
    jitter: f64,
    /// Row-major lower Cholesky factor of `K + (λ² + jitter)·I`.
    chol: Vec<f64>,
    alpha: Vec<f64>,
    log_likelihood: f64,
}

impl GpModel {
    pub fn fit(xs: &[Point2], ys: &[f64], kernel: KernelSpec, noise: f64) -> Result<Self> {
        kernel.validate()?;
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(Error::Usage(format!(
                "GP fit needs matching non-empty inputs, got {} points and {} targets",
                xs.len(),
                ys.len()
            )));
        }
        if !(noise >= 0.0) {
            return Err(Error::Config(format!("noise must be nonnegative, got {noise}")));
        }
        if noise == 0.0 {
            for i in 0..xs.len() {
                if xs[..i].contains(&xs[i]) {
                    return Err(Error::Numerical(format!(
                        "duplicate training point {:?} with zero noise",
                        xs[i]
                    )));
                }
            }
        }

        let n = xs.len();
        let y_mean = ys.iter().sum::<f64>() / n as f64;
        let var = ys.iter().map(|y| (y - y_mean).powi(2)).sum::<f64>() / n as f64;
        let sd = var.sqrt();
        let y_scale = if sd > 1e-12 * y_mean.abs().max(1.0) { sd } else { 1.0 };
        let y_std: Vec<f64> = ys.iter().map(|y| (y - y_mean) / y_scale).collect();

        let base = gram(&kernel, xs, noise);
        let (factor, jitter) = factorize(base)?;
        let l = factor.l();

        let mut chol = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                chol[i * n + j] = l[(i, j)];
            }
        }
        let z = forward_solve(&chol, n, &y_std);
        let alpha = backward_solve(&chol, n, &z);

        let log_det_half: f64 = (0..n).map(|i| chol[i * n + i].ln()).sum();
        let fit_term: f64 = z.iter().map(|v| v * v).sum();
        let log_likelihood = -0.5 * fit_term - log_det_half - 0.5 * n as f64 * LN_2PI;

        Ok(Self {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            y_mean,
            y_scale,
            kernel,
            noise,
            jitter,
            chol,
            alpha,
            log_likelihood,
        })
    }

    /// Posterior mean in score units and variance in standardized units.
    pub fn predict(&self, x: &Point2) -> (f64, f64) {
        let (m, v) = self.predict_standardized(x);
        (self.y_mean + self.y_scale * m, v)
    }

    /// Posterior mean and variance, both in standardized units.
    pub fn predict_standardized(&self, x: &Point2) -> (f64, f64) {
        let n = self.xs.len();
        let kx: Vec<f64> = self.xs.iter().map(|xi| self.kernel.eval(x, xi)).collect();
        let mean = kx.iter().zip(&self.alpha).map(|(k, a)| k * a).sum();
        let v = forward_solve(&self.chol, n, &kx);
        let var = 1.0 - v.iter().map(|t| t * t).sum::<f64>();
        (mean, var.max(0.0))
    }

    /// Maps a score onto the standardized scale of this model.
    pub fn standardize(&self, y: f64) -> f64 {
        (y - self.y_mean) / self.y_scale
    }

    /// Log marginal likelihood of the standardized targets.
    pub fn log_likelihood(&self) -> f64 {
        self.log_likelihood
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    /// Diagonal added on top of the noise to make the factorization succeed.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn points(&self) -> &[Point2] {
        &self.xs
    }

    pub fn targets(&self) -> &[f64] {
        &self.ys
    }

    pub fn target_mean(&self) -> f64 {
        self.y_mean
    }

    pub fn target_scale(&self) -> f64 {
        self.y_scale
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// Lower Cholesky factor as a dense matrix.
    pub fn cholesky_factor(&self) -> DMatrix<f64> {
        let n = self.xs.len();
        DMatrix::from_fn(n, n, |i, j| if j <= i { self.chol[i * n + j] } else { 0.0 })
    }
}

fn factorize(base: DMatrix<f64>) -> Result<(Cholesky<f64, nalgebra::Dyn>, f64)> {
    if let Some(c) = Cholesky::new(base.clone()) {
        return Ok((c, 0.0));
    }
    for jitter in JITTER_LADDER {
        let mut m = base.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(m) {
            return Ok((c, jitter));
        }
    }
    Err(Error::Numerical(format!(
        "Cholesky factorization failed with jitter up to {:e}",
        JITTER_LADDER[JITTER_LADDER.len() - 1]
    )))
}

fn forward_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; n];
    for i in 0..n {
        let row = &l[i * n..i * n + i];
        let s: f64 = row.iter().zip(&x[..i]).map(|(a, b)| a * b).sum();
        x[i] = (b[i] - s) / l[i * n + i];
    }
    x
}

fn backward_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = b[i];
        for j in i + 1..n {
            s -= l[j * n + i] * x[j];
        }
        x[i] = s / l[i * n + i];
    }
    x
}

/// The lengthscales searched by [`fit_mle`]: `0.01 · 10^(k/8)` for
/// `k = 0..=24`, i.e. 0.01 to 10.
pub fn lengthscale_grid() -> Vec<f64> {
    (0..=24).map(|k| 0.01 * 10f64.powf(k as f64 / 8.0)).collect()
}

/// Fits one GP per grid lengthscale and keeps the one with the highest log
/// marginal likelihood; ties go to the smaller lengthscale. The
/// power-exponential exponent stays at [`DEFAULT_POWER`].
///
/// Constant targets say nothing about the lengthscale (only the
/// log-determinant would vary), so they get the smallest grid value that
/// factorizes.
pub fn fit_mle(xs: &[Point2], ys: &[f64], family: KernelFamily, noise: f64) -> Result<GpModel> {
    fit_mle_with_power(xs, ys, family, DEFAULT_POWER, noise)
}

pub fn fit_mle_with_power(
    xs: &[Point2],
    ys: &[f64],
    family: KernelFamily,
    power: f64,
    noise: f64,
) -> Result<GpModel> {
    if xs.len() < 2 {
        return Err(Error::Usage(format!(
            "likelihood fitting needs at least 2 points, got {}",
            xs.len()
        )));
    }
    let constant = ys.iter().all(|&y| y == ys[0]);
    let mut best: Option<GpModel> = None;
    let mut last_err = None;
    for l in lengthscale_grid() {
        let kernel = KernelSpec::with_power(family, l, power)?;
        match GpModel::fit(xs, ys, kernel, noise) {
            Ok(m) if constant => return Ok(m),
            Ok(m) => {
                if best
                    .as_ref()
                    .is_none_or(|b| m.log_likelihood() > b.log_likelihood())
                {
                    best = Some(m);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| {
        last_err.unwrap_or_else(|| Error::Numerical("no lengthscale could be fitted".into()))
    })
}
