//! Common interface over the GP and RF surrogates.
//!
//! A fitted [`Surrogate`] reports posteriors and its incumbent in its own
//! units: standardized units for the GP, raw scores for the forest. The
//! incumbent always goes through the same map as the posterior mean, so
//! acquisition argmaxes do not depend on the convention.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::acquisition::{AcquisitionSpec, Posterior};
use crate::gp::{self, GpModel, DEFAULT_LENGTHSCALE, DEFAULT_NOISE};
use crate::kernels::{KernelFamily, KernelSpec, DEFAULT_POWER};
use crate::rf::{RfModel, RfParams};
use crate::{Error, Point2, Result};

/// Smallest data set on which GP lengthscales are fitted by likelihood.
pub const MLE_MIN_POINTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SurrogateSpec {
    Gp { family: KernelFamily, power: f64 },
    Rf(RfParams),
}

impl SurrogateSpec {
    pub fn gp(family: KernelFamily) -> Self {
        SurrogateSpec::Gp {
            family,
            power: DEFAULT_POWER,
        }
    }

    pub fn rf() -> Self {
        SurrogateSpec::Rf(RfParams::default())
    }

    /// `gp-<kernel>` or `rf`.
    pub fn label(&self) -> String {
        match self {
            SurrogateSpec::Gp { family, .. } => format!("gp-{family}"),
            SurrogateSpec::Rf(_) => "rf".to_string(),
        }
    }

    pub fn kernel_family(&self) -> Option<KernelFamily> {
        match self {
            SurrogateSpec::Gp { family, .. } => Some(*family),
            SurrogateSpec::Rf(_) => None,
        }
    }

    /// Fits the surrogate on `xs`, `ys`.
    ///
    /// GPs use the likelihood-selected lengthscale once there are at least
    /// [`MLE_MIN_POINTS`] observations and [`DEFAULT_LENGTHSCALE`] before.
    /// Forests use `rf_seed` in place of the configured seed.
    pub fn fit(&self, xs: &[Point2], ys: &[f64], rf_seed: u64) -> Result<Surrogate> {
        match *self {
            SurrogateSpec::Gp { family, power } => {
                let model = if xs.len() >= MLE_MIN_POINTS {
                    gp::fit_mle_with_power(xs, ys, family, power, DEFAULT_NOISE)?
                } else {
                    let k = KernelSpec::with_power(family, DEFAULT_LENGTHSCALE, power)?;
                    GpModel::fit(xs, ys, k, DEFAULT_NOISE)?
                };
                Ok(Surrogate::Gp(model))
            }
            SurrogateSpec::Rf(params) => {
                let params = RfParams {
                    seed: rf_seed,
                    ..params
                };
                Ok(Surrogate::Rf(RfModel::fit(xs, ys, params)?))
            }
        }
    }
}

impl fmt::Display for SurrogateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for SurrogateSpec {
    type Err = Error;

    /// Accepts `rf`, `gp-<kernel>` and `gp:<kernel>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("rf") {
            return Ok(SurrogateSpec::rf());
        }
        let kernel = s
            .strip_prefix("gp-")
            .or_else(|| s.strip_prefix("gp:"))
            .ok_or_else(|| Error::Config(format!("unknown surrogate `{s}`")))?;
        Ok(SurrogateSpec::gp(kernel.parse()?))
    }
}

/// A fitted surrogate.
#[derive(Debug, Clone)]
pub enum Surrogate {
    Gp(GpModel),
    Rf(RfModel),
}

impl Surrogate {
    pub fn posterior(&self, x: &Point2) -> Posterior {
        match self {
            Surrogate::Gp(m) => {
                let (mean, var) = m.predict_standardized(x);
                Posterior::from_variance(mean, var)
            }
            Surrogate::Rf(m) => {
                let (mean, var) = m.predict(x);
                Posterior::from_variance(mean, var)
            }
        }
    }

    /// Maps a score into the units of [`Surrogate::posterior`].
    pub fn to_model_units(&self, y: f64) -> f64 {
        match self {
            Surrogate::Gp(m) => m.standardize(y),
            Surrogate::Rf(_) => y,
        }
    }

    /// Acquisition surface for `acq` with incumbent `y_plus` (a score).
    pub fn acquisition<'a>(
        &'a self,
        acq: &'a AcquisitionSpec,
        y_plus: f64,
    ) -> impl Fn(&Point2) -> f64 + Sync + 'a {
        let y_plus = self.to_model_units(y_plus);
        move |x: &Point2| acq.value(self.posterior(x), y_plus)
    }

    /// Short description for reports, e.g. `gp se:0.1778 n=12`.
    pub fn summary(&self) -> String {
        match self {
            Surrogate::Gp(m) => format!("gp {} n={}", m.kernel(), m.len()),
            Surrogate::Rf(m) => format!("rf trees={}", m.trees().len()),
        }
    }
}
