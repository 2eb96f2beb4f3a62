//! The fifteen 2D benchmark functions used as game stimuli.
//!
//! Each function is a standard minimization benchmark on its usual native
//! box. Evaluation maps a point of `[0, 1]²` onto that box, negates the
//! native value and rescales it affinely so that the global optimum scores
//! exactly 100 and the worst value found on a 501×501 lattice of the box
//! scores 0. Points that fall below the lattice worst are clamped to 0.
//!
//! | id | name            | x1 range        | x2 range        | native optimum | lattice worst        |
//! |----|-----------------|-----------------|-----------------|----------------|----------------------|
//! | 0  | branin          | [-5, 10]        | [0, 15]         | 0.397887       | 308.129096011607     |
//! | 1  | rosenbrock      | [-2, 2]         | [-1, 3]         | 0              | 2509                 |
//! | 2  | ackley          | [-5, 5]         | [-5, 5]         | 0              | 14.3026054275607     |
//! | 3  | rastrigin       | [-5.12, 5.12]   | [-5.12, 5.12]   | 0              | 80.7028817169323     |
//! | 4  | himmelblau      | [-5, 5]         | [-5, 5]         | 0              | 890                  |
//! | 5  | six_hump_camel  | [-3, 3]         | [-2, 2]         | -1.031628      | 162.9                |
//! | 6  | goldstein_price | [-2, 2]         | [-2, 2]         | 3              | 1015688.76971346     |
//! | 7  | levy            | [-10, 10]       | [-10, 10]       | 0              | 95.3828089518461     |
//! | 8  | schwefel        | [-500, 500]     | [-500, 500]     | 0              | 1675.69480976458     |
//! | 9  | griewank        | [-10, 10]       | [-10, 10]       | 0              | 2.04186783663987     |
//! | 10 | beale           | [-4.5, 4.5]     | [-4.5, 4.5]     | 0              | 181853.61328125      |
//! | 11 | booth           | [-10, 10]       | [-10, 10]       | 0              | 2594                 |
//! | 12 | matyas          | [-10, 10]       | [-10, 10]       | 0              | 100                  |
//! | 13 | styblinski_tang | [-5, 5]         | [-5, 5]         | -78.332331     | 250                  |
//! | 14 | easom           | [-10, 10]       | [-10, 10]       | -1             | 0.00898384452558509  |
//!
//! The score is `100 · (worst − f(x)) / (worst − f(x*))` where `f(x*)` is
//! evaluated at the stored optimum, so `evaluate(id, argmax) == 100`.

use std::f64::consts::{E, PI};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Point2, Result};

/// Index of a benchmark function, `0..15`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FunctionId(u8);

pub const FUNCTION_COUNT: usize = 15;

/// Highest normalized score of every function.
pub const MAX_SCORE: f64 = 100.0;

impl FunctionId {
    pub fn new(id: usize) -> Result<Self> {
        if id < FUNCTION_COUNT {
            Ok(Self(id as u8))
        } else {
            Err(Error::Usage(format!(
                "function id {id} out of range 0..{FUNCTION_COUNT}"
            )))
        }
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn name(self) -> &'static str {
        CATALOG[self.index()].name
    }

    pub fn from_name(name: &str) -> Result<Self> {
        CATALOG
            .iter()
            .position(|f| f.name == name)
            .map(|i| Self(i as u8))
            .ok_or_else(|| Error::Usage(format!("unknown function `{name}`")))
    }

    pub fn spec(self) -> &'static TestFunction {
        &CATALOG[self.index()]
    }
}

impl fmt::Display for FunctionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A benchmark in its native (minimization) form plus normalization data.
pub struct TestFunction {
    pub name: &'static str,
    pub domain: [(f64, f64); 2],
    /// A global minimizer in native coordinates.
    pub native_argmin: (f64, f64),
    /// Native value mapped to score 0.
    pub native_worst: f64,
    native: fn(f64, f64) -> f64,
}

impl TestFunction {
    pub fn native_value(&self, x: f64, y: f64) -> f64 {
        (self.native)(x, y)
    }

    pub fn to_native(&self, p: Point2) -> (f64, f64) {
        let [(a0, a1), (b0, b1)] = self.domain;
        (a0 + p.x1 * (a1 - a0), b0 + p.x2 * (b1 - b0))
    }

    pub fn known_argmax(&self) -> Point2 {
        let [(a0, a1), (b0, b1)] = self.domain;
        let (x, y) = self.native_argmin;
        Point2::new((x - a0) / (a1 - a0), (y - b0) / (b1 - b0))
    }

    fn native_best(&self) -> f64 {
        let (x, y) = self.to_native(self.known_argmax());
        self.native_value(x, y)
    }

    fn score(&self, p: Point2) -> f64 {
        let (x, y) = self.to_native(p);
        let v = self.native_value(x, y);
        let s = MAX_SCORE * ((self.native_worst - v) / (self.native_worst - self.native_best()));
        s.clamp(0.0, MAX_SCORE)
    }
}

/// All functions in id order.
pub fn list_functions() -> Vec<FunctionId> {
    (0..FUNCTION_COUNT).map(|i| FunctionId(i as u8)).collect()
}

/// Normalized score of `f` at `p`; `p` must lie in `[0, 1]²`.
pub fn evaluate(f: FunctionId, p: Point2) -> Result<f64> {
    if !p.in_unit_square() {
        return Err(Error::Domain { x1: p.x1, x2: p.x2 });
    }
    Ok(f.spec().score(p))
}

/// The known maximizer and its score.
pub fn optimum(f: FunctionId) -> (Point2, f64) {
    let spec = f.spec();
    let p = spec.known_argmax();
    (p, spec.score(p))
}

fn branin(x: f64, y: f64) -> f64 {
    let b = 5.1 / (4.0 * PI * PI);
    let c = 5.0 / PI;
    let t = 1.0 / (8.0 * PI);
    (y - b * x * x + c * x - 6.0).powi(2) + 10.0 * (1.0 - t) * x.cos() + 10.0
}

fn rosenbrock(x: f64, y: f64) -> f64 {
    (1.0 - x).powi(2) + 100.0 * (y - x * x).powi(2)
}

fn ackley(x: f64, y: f64) -> f64 {
    -20.0 * (-0.2 * (0.5 * (x * x + y * y)).sqrt()).exp()
        - (0.5 * ((2.0 * PI * x).cos() + (2.0 * PI * y).cos())).exp()
        + E
        + 20.0
}

fn rastrigin(x: f64, y: f64) -> f64 {
    20.0 + x * x - 10.0 * (2.0 * PI * x).cos() + y * y - 10.0 * (2.0 * PI * y).cos()
}

fn himmelblau(x: f64, y: f64) -> f64 {
    (x * x + y - 11.0).powi(2) + (x + y * y - 7.0).powi(2)
}

fn six_hump_camel(x: f64, y: f64) -> f64 {
    let x2 = x * x;
    let y2 = y * y;
    (4.0 - 2.1 * x2 + x2 * x2 / 3.0) * x2 + x * y + (-4.0 + 4.0 * y2) * y2
}

fn goldstein_price(x: f64, y: f64) -> f64 {
    let a = 1.0
        + (x + y + 1.0).powi(2)
            * (19.0 - 14.0 * x + 3.0 * x * x - 14.0 * y + 6.0 * x * y + 3.0 * y * y);
    let b = 30.0
        + (2.0 * x - 3.0 * y).powi(2)
            * (18.0 - 32.0 * x + 12.0 * x * x + 48.0 * y - 36.0 * x * y + 27.0 * y * y);
    a * b
}

fn levy(x: f64, y: f64) -> f64 {
    let w1 = 1.0 + (x - 1.0) / 4.0;
    let w2 = 1.0 + (y - 1.0) / 4.0;
    (PI * w1).sin().powi(2)
        + (w1 - 1.0).powi(2) * (1.0 + 10.0 * (PI * w1 + 1.0).sin().powi(2))
        + (w2 - 1.0).powi(2) * (1.0 + (2.0 * PI * w2).sin().powi(2))
}

// x* sin(sqrt(x*)) at the one-dimensional minimizer, so the optimum is 0.
const SCHWEFEL_OFFSET: f64 = 418.982_887_272_433_7;

fn schwefel(x: f64, y: f64) -> f64 {
    2.0 * SCHWEFEL_OFFSET - x * x.abs().sqrt().sin() - y * y.abs().sqrt().sin()
}

fn griewank(x: f64, y: f64) -> f64 {
    1.0 + (x * x + y * y) / 4000.0 - x.cos() * (y / 2f64.sqrt()).cos()
}

fn beale(x: f64, y: f64) -> f64 {
    (1.5 - x + x * y).powi(2) + (2.25 - x + x * y * y).powi(2) + (2.625 - x + x * y.powi(3)).powi(2)
}

fn booth(x: f64, y: f64) -> f64 {
    (x + 2.0 * y - 7.0).powi(2) + (2.0 * x + y - 5.0).powi(2)
}

fn matyas(x: f64, y: f64) -> f64 {
    0.26 * (x * x + y * y) - 0.48 * x * y
}

fn styblinski_tang(x: f64, y: f64) -> f64 {
    0.5 * (x.powi(4) - 16.0 * x * x + 5.0 * x + y.powi(4) - 16.0 * y * y + 5.0 * y)
}

fn easom(x: f64, y: f64) -> f64 {
    -x.cos() * y.cos() * (-((x - PI).powi(2) + (y - PI).powi(2))).exp()
}

const STYBLINSKI_ARGMIN: f64 = -2.903_534_027_771_177;

static CATALOG: [TestFunction; FUNCTION_COUNT] = [
    TestFunction {
        name: "branin",
        domain: [(-5.0, 10.0), (0.0, 15.0)],
        native_argmin: (PI, 2.275),
        native_worst: 308.129_096_011_606_63,
        native: branin,
    },
    TestFunction {
        name: "rosenbrock",
        domain: [(-2.0, 2.0), (-1.0, 3.0)],
        native_argmin: (1.0, 1.0),
        native_worst: 2509.0,
        native: rosenbrock,
    },
    TestFunction {
        name: "ackley",
        domain: [(-5.0, 5.0), (-5.0, 5.0)],
        native_argmin: (0.0, 0.0),
        native_worst: 14.302_605_427_560_742,
        native: ackley,
    },
    TestFunction {
        name: "rastrigin",
        domain: [(-5.12, 5.12), (-5.12, 5.12)],
        native_argmin: (0.0, 0.0),
        native_worst: 80.702_881_716_932_3,
        native: rastrigin,
    },
    TestFunction {
        name: "himmelblau",
        domain: [(-5.0, 5.0), (-5.0, 5.0)],
        native_argmin: (3.0, 2.0),
        native_worst: 890.0,
        native: himmelblau,
    },
    TestFunction {
        name: "six_hump_camel",
        domain: [(-3.0, 3.0), (-2.0, 2.0)],
        native_argmin: (0.089_842_013_100_318_06, -0.712_656_403_020_739_6),
        native_worst: 162.899_999_999_999_98,
        native: six_hump_camel,
    },
    TestFunction {
        name: "goldstein_price",
        domain: [(-2.0, 2.0), (-2.0, 2.0)],
        native_argmin: (0.0, -1.0),
        native_worst: 1_015_688.769_713_463_7,
        native: goldstein_price,
    },
    TestFunction {
        name: "levy",
        domain: [(-10.0, 10.0), (-10.0, 10.0)],
        native_argmin: (1.0, 1.0),
        native_worst: 95.382_808_951_846_09,
        native: levy,
    },
    TestFunction {
        name: "schwefel",
        domain: [(-500.0, 500.0), (-500.0, 500.0)],
        native_argmin: (420.968_746_359_982, 420.968_746_359_982),
        native_worst: 1675.694_809_764_575_7,
        native: schwefel,
    },
    TestFunction {
        name: "griewank",
        domain: [(-10.0, 10.0), (-10.0, 10.0)],
        native_argmin: (0.0, 0.0),
        native_worst: 2.041_867_836_639_865_7,
        native: griewank,
    },
    TestFunction {
        name: "beale",
        domain: [(-4.5, 4.5), (-4.5, 4.5)],
        native_argmin: (3.0, 0.5),
        native_worst: 181_853.613_281_25,
        native: beale,
    },
    TestFunction {
        name: "booth",
        domain: [(-10.0, 10.0), (-10.0, 10.0)],
        native_argmin: (1.0, 3.0),
        native_worst: 2594.0,
        native: booth,
    },
    TestFunction {
        name: "matyas",
        domain: [(-10.0, 10.0), (-10.0, 10.0)],
        native_argmin: (0.0, 0.0),
        native_worst: 100.0,
        native: matyas,
    },
    TestFunction {
        name: "styblinski_tang",
        domain: [(-5.0, 5.0), (-5.0, 5.0)],
        native_argmin: (STYBLINSKI_ARGMIN, STYBLINSKI_ARGMIN),
        native_worst: 250.0,
        native: styblinski_tang,
    },
    TestFunction {
        name: "easom",
        domain: [(-10.0, 10.0), (-10.0, 10.0)],
        native_argmin: (PI, PI),
        native_worst: 0.008_983_844_525_585_092,
        native: easom,
    },
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_is_dense_and_stable() {
        let a = list_functions();
        let b = list_functions();
        assert_eq!(a.len(), 15);
        assert_eq!(a, b);
        let ids: Vec<usize> = a.iter().map(|f| f.index()).collect();
        assert_eq!(ids, (0..15).collect::<Vec<_>>());
        let mut names: Vec<&str> = a.iter().map(|f| f.name()).collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), 15);
    }

    #[test]
    fn optimum_scores_one_hundred() {
        for f in list_functions() {
            let (p, v) = optimum(f);
            assert!(p.in_unit_square(), "{f}: argmax {p:?}");
            assert_eq!(v, MAX_SCORE, "{f}");
            assert!((evaluate(f, p).unwrap() - v).abs() < 1e-6);
            assert_eq!(optimum(f).0, p);
        }
    }

    #[test]
    fn out_of_domain_is_rejected() {
        let f = FunctionId::new(0).unwrap();
        assert!(matches!(
            evaluate(f, Point2::new(-0.1, 0.5)),
            Err(Error::Domain { .. })
        ));
        assert!(evaluate(f, Point2::new(0.5, 1.0 + 1e-12)).is_err());
        assert!(evaluate(f, Point2::new(f64::NAN, 0.5)).is_err());
    }

    #[test]
    fn evaluation_is_deterministic() {
        let p = Point2::new(0.123, 0.987);
        for f in list_functions() {
            assert_eq!(evaluate(f, p).unwrap(), evaluate(f, p).unwrap());
        }
    }

    #[test]
    fn names_round_trip() {
        for f in list_functions() {
            assert_eq!(FunctionId::from_name(f.name()).unwrap(), f);
        }
        assert!(FunctionId::from_name("sphere").is_err());
        assert!(FunctionId::new(15).is_err());
    }
}
