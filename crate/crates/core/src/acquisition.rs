//! Probability of improvement, expected improvement and confidence bounds.
//!
//! All three work on a Gaussian posterior `N(μ, σ²)` and the incumbent `y⁺`
//! expressed in the same units:
//!
//! * `PI  = Φ(z)`
//! * `EI  = (μ − y⁺ − ξ)·Φ(z) + σ·φ(z)`
//! * `UCB = μ + β·σ`
//!
//! with `z = (μ − y⁺ − ξ) / σ`. At `σ = 0`, PI is 1 when `μ > y⁺ + ξ` and 0
//! otherwise, and EI is `max(μ − y⁺ − ξ, 0)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AcquisitionKind {
    Pi,
    Ei,
    Ucb,
}

impl AcquisitionKind {
    pub fn name(self) -> &'static str {
        match self {
            AcquisitionKind::Pi => "PI",
            AcquisitionKind::Ei => "EI",
            AcquisitionKind::Ucb => "UCB",
        }
    }

    /// Tie-break rank when two acquisitions propose equally close points;
    /// lower wins.
    pub fn priority(self) -> u8 {
        match self {
            AcquisitionKind::Ei => 0,
            AcquisitionKind::Pi => 1,
            AcquisitionKind::Ucb => 2,
        }
    }
}

impl fmt::Display for AcquisitionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionSpec {
    pub kind: AcquisitionKind,
    /// Improvement margin of PI and EI.
    pub xi: f64,
    /// Exploration weight of UCB.
    pub beta: f64,
}

impl AcquisitionSpec {
    pub fn pi() -> Self {
        Self {
            kind: AcquisitionKind::Pi,
            xi: 0.0,
            beta: 0.0,
        }
    }

    pub fn ei() -> Self {
        Self {
            kind: AcquisitionKind::Ei,
            xi: 0.0,
            beta: 0.0,
        }
    }

    pub fn ucb(beta: f64) -> Self {
        Self {
            kind: AcquisitionKind::Ucb,
            xi: 0.0,
            beta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.xi >= 0.0) || !(self.beta >= 0.0) {
            return Err(Error::Config(format!(
                "acquisition parameters must be nonnegative: {self}"
            )));
        }
        Ok(())
    }

    /// Desirability of a point with posterior `post` given incumbent `y_plus`.
    pub fn value(&self, post: Posterior, y_plus: f64) -> f64 {
        let Posterior { mean, sigma } = post;
        match self.kind {
            AcquisitionKind::Ucb => mean + self.beta * sigma,
            AcquisitionKind::Pi => {
                let gap = mean - y_plus - self.xi;
                if sigma > 0.0 {
                    std_normal().cdf(gap / sigma)
                } else if gap > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            AcquisitionKind::Ei => {
                let gap = mean - y_plus - self.xi;
                if sigma > 0.0 {
                    let z = gap / sigma;
                    let n = std_normal();
                    (gap * n.cdf(z) + sigma * n.pdf(z)).max(0.0)
                } else {
                    gap.max(0.0)
                }
            }
        }
    }
}

/// Text form used in configs and reports: `PI`, `EI`, `UCB(beta=0.5)`;
/// a nonzero margin is written as `EI(xi=0.01)`.
impl fmt::Display for AcquisitionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            AcquisitionKind::Ucb => write!(f, "UCB(beta={})", self.beta),
            k if self.xi != 0.0 => write!(f, "{k}(xi={})", self.xi),
            k => write!(f, "{k}"),
        }
    }
}

impl FromStr for AcquisitionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, args) = match s.find('(') {
            Some(i) if s.ends_with(')') => (&s[..i], Some(&s[i + 1..s.len() - 1])),
            Some(_) => return Err(Error::Config(format!("malformed acquisition `{s}`"))),
            None => (s, None),
        };
        let mut spec = match head.to_ascii_uppercase().as_str() {
            "PI" => Self::pi(),
            "EI" => Self::ei(),
            "UCB" => Self::ucb(1.0),
            _ => return Err(Error::Config(format!("unknown acquisition `{s}`"))),
        };
        if let Some(args) = args {
            let (key, value) = args
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("malformed acquisition `{s}`")))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad number in acquisition `{s}`")))?;
            match (spec.kind, key.trim()) {
                (AcquisitionKind::Ucb, "beta") => spec.beta = value,
                (AcquisitionKind::Pi | AcquisitionKind::Ei, "xi") => spec.xi = value,
                _ => return Err(Error::Config(format!("unknown parameter in `{s}`"))),
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Gaussian predictive distribution at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Posterior {
    pub mean: f64,
    pub sigma: f64,
}

impl Posterior {
    pub fn new(mean: f64, sigma: f64) -> Self {
        debug_assert!(sigma >= 0.0);
        Self { mean, sigma }
    }

    pub fn from_variance(mean: f64, variance: f64) -> Self {
        Self {
            mean,
            sigma: variance.max(0.0).sqrt(),
        }
    }
}

/// `UCB(μ, σ, β)`.
pub fn ucb_value(post: Posterior, beta: f64) -> f64 {
    post.mean + beta * post.sigma
}

/// `LCB(μ, σ, ξ) = μ − ξσ`, the minimization counterpart of UCB.
pub fn lcb_value(post: Posterior, xi: f64) -> f64 {
    post.mean - xi * post.sigma
}

fn std_normal() -> Normal {
    Normal::standard()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn greedy_ucb_is_the_mean() {
        let v = AcquisitionSpec::ucb(0.0).value(Posterior::new(0.4, 0.2), 10.0);
        assert_eq!(v, 0.4);
    }

    #[test]
    fn pi_at_the_incumbent_is_one_half() {
        let v = AcquisitionSpec::pi().value(Posterior::new(1.3, 0.7), 1.3);
        assert!((v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ei_at_the_incumbent() {
        let v = AcquisitionSpec::ei().value(Posterior::new(2.0, 0.2), 2.0);
        let phi0 = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        assert!((v - 0.2 * phi0).abs() < 1e-15);
        assert!((v - 0.079788).abs() < 1e-6);
    }

    #[test]
    fn zero_sigma_conventions() {
        let ei = AcquisitionSpec::ei();
        let pi = AcquisitionSpec::pi();
        assert_eq!(ei.value(Posterior::new(3.0, 0.0), 1.0), 2.0);
        assert_eq!(ei.value(Posterior::new(0.0, 0.0), 1.0), 0.0);
        assert_eq!(pi.value(Posterior::new(3.0, 0.0), 1.0), 1.0);
        assert_eq!(pi.value(Posterior::new(1.0, 0.0), 1.0), 0.0);
        // Continuity towards the limit.
        let tiny = 1e-12;
        assert!((ei.value(Posterior::new(3.0, tiny), 1.0) - 2.0).abs() < 1e-9);
        assert!(ei.value(Posterior::new(0.0, tiny), 1.0).abs() < 1e-9);
        assert!((pi.value(Posterior::new(3.0, tiny), 1.0) - 1.0).abs() < 1e-9);
        assert!(pi.value(Posterior::new(0.0, tiny), 1.0).abs() < 1e-9);
    }

    #[test]
    fn lcb_examples() {
        let p = Posterior::new(0.4, 0.2);
        assert_eq!(lcb_value(p, 0.0), 0.4);
        assert!((lcb_value(p, 1.0) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn text_round_trip() {
        for s in ["PI", "EI", "UCB(beta=1)", "UCB(beta=0.5)", "UCB(beta=0)", "EI(xi=0.01)"] {
            let a: AcquisitionSpec = s.parse().unwrap();
            assert_eq!(a.to_string(), s);
        }
        assert!("UCB(beta=-1)".parse::<AcquisitionSpec>().is_err());
        assert!("KG".parse::<AcquisitionSpec>().is_err());
        assert!("UCB(xi=1)".parse::<AcquisitionSpec>().is_err());
    }

    fn post() -> impl Strategy<Value = Posterior> {
        (-5.0..5.0f64, 0.0..3.0f64).prop_map(|(m, s)| Posterior::new(m, s))
    }

    proptest! {
        #[test]
        fn ranges(p in post(), y in -5.0..5.0f64, xi in 0.0..1.0f64) {
            let ei = AcquisitionSpec { xi, ..AcquisitionSpec::ei() }.value(p, y);
            let pi = AcquisitionSpec { xi, ..AcquisitionSpec::pi() }.value(p, y);
            prop_assert!(ei >= 0.0);
            prop_assert!((0.0..=1.0).contains(&pi));
        }

        #[test]
        fn lcb_mirrors_ucb(p in post(), xi in 0.0..3.0f64) {
            let mirrored = Posterior::new(-p.mean, p.sigma);
            prop_assert!((lcb_value(p, xi) + ucb_value(mirrored, xi)).abs() < 1e-12);
        }

        #[test]
        fn ucb_monotone_in_sigma(m in -5.0..5.0f64, s in 0.0..3.0f64, ds in 1e-6..1.0f64, beta in 1e-3..3.0f64) {
            let a = AcquisitionSpec::ucb(beta);
            prop_assert!(a.value(Posterior::new(m, s + ds), 0.0) > a.value(Posterior::new(m, s), 0.0));
            let g = AcquisitionSpec::ucb(0.0);
            prop_assert_eq!(g.value(Posterior::new(m, s + ds), 0.0), g.value(Posterior::new(m, s), 0.0));
        }

        #[test]
        fn improvement_monotone_in_mean(m in -5.0..5.0f64, dm in 0.0..2.0f64, s in 0.0..3.0f64, y in -5.0..5.0f64) {
            for a in [AcquisitionSpec::ei(), AcquisitionSpec::pi()] {
                prop_assert!(a.value(Posterior::new(m + dm, s), y) >= a.value(Posterior::new(m, s), y));
            }
        }
    }
}
