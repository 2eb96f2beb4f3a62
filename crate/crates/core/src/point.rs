use serde::{Deserialize, Serialize};

/// A location in the normalized search space `[0, 1]²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x1: f64,
    pub x2: f64,
}

impl Point2 {
    pub const fn new(x1: f64, x2: f64) -> Self {
        Self { x1, x2 }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x1 - other.x1).hypot(self.x2 - other.x2)
    }

    pub fn squared_distance(&self, other: &Point2) -> f64 {
        let d1 = self.x1 - other.x1;
        let d2 = self.x2 - other.x2;
        d1 * d1 + d2 * d2
    }

    /// True when both coordinates are finite and inside `[0, 1]`.
    pub fn in_unit_square(&self) -> bool {
        (0.0..=1.0).contains(&self.x1) && (0.0..=1.0).contains(&self.x2)
    }

    pub fn coord(&self, axis: usize) -> f64 {
        match axis {
            0 => self.x1,
            1 => self.x2,
            _ => panic!("axis {axis} out of range for a 2D point"),
        }
    }
}

impl From<(f64, f64)> for Point2 {
    fn from((x1, x2): (f64, f64)) -> Self {
        Self { x1, x2 }
    }
}
