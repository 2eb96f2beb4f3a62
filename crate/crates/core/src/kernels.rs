//! Stationary correlation functions on the unit square.
//!
//! Every kernel has unit variance (`k(x, x) = 1`) and depends only on the
//! Euclidean distance `r = ‖x − x′‖` and one isotropic lengthscale `ℓ`:
//!
//! | family            | `k(r)`                                          |
//! |-------------------|-------------------------------------------------|
//! | squared exp.      | `exp(−r² / 2ℓ²)`                                |
//! | exponential       | `exp(−r / ℓ)`                                   |
//! | power exponential | `exp(−(r / ℓ)^p)`, `0 < p ≤ 2`                  |
//! | Matérn ν = 3/2    | `(1 + √3 r/ℓ) exp(−√3 r/ℓ)`                      |
//! | Matérn ν = 5/2    | `(1 + √5 r/ℓ + 5r²/3ℓ²) exp(−√5 r/ℓ)`            |

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Error, Point2, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum KernelFamily {
    SquaredExponential,
    Exponential,
    PowerExponential,
    Matern32,
    Matern52,
}

impl KernelFamily {
    pub const ALL: [KernelFamily; 5] = [
        KernelFamily::SquaredExponential,
        KernelFamily::Exponential,
        KernelFamily::PowerExponential,
        KernelFamily::Matern32,
        KernelFamily::Matern52,
    ];

    /// Short name used in configs, trace ids and reports.
    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::SquaredExponential => "se",
            KernelFamily::Exponential => "exp",
            KernelFamily::PowerExponential => "powexp",
            KernelFamily::Matern32 => "matern32",
            KernelFamily::Matern52 => "matern52",
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "se" | "sqexp" | "squared_exponential" => Ok(KernelFamily::SquaredExponential),
            "exp" | "exponential" => Ok(KernelFamily::Exponential),
            "powexp" | "power_exponential" => Ok(KernelFamily::PowerExponential),
            "matern32" | "matern3/2" => Ok(KernelFamily::Matern32),
            "matern52" | "matern5/2" => Ok(KernelFamily::Matern52),
            other => Err(Error::Config(format!("unknown kernel `{other}`"))),
        }
    }
}

/// A kernel family with its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub lengthscale: f64,
    /// Exponent of the power-exponential family; ignored by the others.
    pub power: f64,
}

pub const DEFAULT_POWER: f64 = 1.5;

impl KernelSpec {
    pub fn new(family: KernelFamily, lengthscale: f64) -> Result<Self> {
        Self::with_power(family, lengthscale, DEFAULT_POWER)
    }

    pub fn with_power(family: KernelFamily, lengthscale: f64, power: f64) -> Result<Self> {
        let spec = Self {
            family,
            lengthscale,
            power,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lengthscale > 0.0 && self.lengthscale.is_finite()) {
            return Err(Error::Config(format!(
                "lengthscale must be positive, got {}",
                self.lengthscale
            )));
        }
        if !(self.power > 0.0 && self.power <= 2.0) {
            return Err(Error::Config(format!(
                "power must lie in (0, 2], got {}",
                self.power
            )));
        }
        Ok(())
    }

    /// Correlation as a function of distance.
    #[inline]
    pub fn of_distance(&self, r: f64) -> f64 {
        let l = self.lengthscale;
        match self.family {
            KernelFamily::SquaredExponential => (-(r * r) / (2.0 * l * l)).exp(),
            KernelFamily::Exponential => (-r / l).exp(),
            KernelFamily::PowerExponential => (-(r / l).powf(self.power)).exp(),
            KernelFamily::Matern32 => {
                let a = 3f64.sqrt() * r / l;
                (1.0 + a) * (-a).exp()
            }
            KernelFamily::Matern52 => {
                let a = 5f64.sqrt() * r / l;
                (1.0 + a + a * a / 3.0) * (-a).exp()
            }
        }
    }

    #[inline]
    pub fn eval(&self, x: &Point2, x2: &Point2) -> f64 {
        match self.family {
            // Avoid the square root for the only family that does not need it.
            KernelFamily::SquaredExponential => {
                let l = self.lengthscale;
                (-x.squared_distance(x2) / (2.0 * l * l)).exp()
            }
            _ => self.of_distance(x.distance(x2)),
        }
    }
}

/// Text record `family:lengthscale[:power]`, e.g. `powexp:0.2:1.5`.
impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            KernelFamily::PowerExponential => {
                write!(f, "{}:{}:{}", self.family, self.lengthscale, self.power)
            }
            _ => write!(f, "{}:{}", self.family, self.lengthscale),
        }
    }
}

impl FromStr for KernelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split(':');
        let family: KernelFamily = parts.next().unwrap_or_default().parse()?;
        let num = |p: Option<&str>, what: &str| -> Result<Option<f64>> {
            p.map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad {what} `{v}` in kernel `{s}`")))
            })
            .transpose()
        };
        let lengthscale = num(parts.next(), "lengthscale")?.unwrap_or(0.2);
        let power = num(parts.next(), "power")?.unwrap_or(DEFAULT_POWER);
        if parts.next().is_some() {
            return Err(Error::Config(format!("too many fields in kernel `{s}`")));
        }
        KernelSpec::with_power(family, lengthscale, power)
    }
}

/// `K + jitter·I` for the points `xs`.
pub fn gram(k: &KernelSpec, xs: &[Point2], jitter: f64) -> DMatrix<f64> {
    let n = xs.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = 1.0 + jitter;
        for j in 0..i {
            let v = k.eval(&xs[i], &xs[j]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}
