//! Acquisition maximization by focus search, and Latin-hypercube designs.
//!
//! Focus search samples `n_points` uniform candidates in a box (initially
//! `[0, 1]²`), keeps the best point seen so far, halves the box side around
//! it (clipped to the unit square) and samples again, `n_shrinks` times.
//! Independent restarts repeat this from the full square; the best point
//! over all restarts and stages wins, ties going to the earlier restart and
//! the earlier sample.

use rand::seq::SliceRandom;
use rand::RngExt;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::seed::SeedStream;
use crate::{Error, Point2, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FocusSearchParams {
    pub n_points: usize,
    pub n_shrinks: usize,
    pub n_restarts: usize,
    pub shrink_factor: f64,
    pub seed: u64,
    /// Polish the winner with a compass search. Off by default.
    pub local_refine: bool,
}

impl Default for FocusSearchParams {
    fn default() -> Self {
        Self {
            n_points: 1000,
            n_shrinks: 5,
            n_restarts: 3,
            shrink_factor: 0.5,
            seed: 0,
            local_refine: false,
        }
    }
}

impl FocusSearchParams {
    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_points == 0 || self.n_restarts == 0 {
            return Err(Error::Config(
                "focus search needs at least one point and one restart".into(),
            ));
        }
        if !(self.shrink_factor > 0.0 && self.shrink_factor < 1.0) {
            return Err(Error::Config(format!(
                "shrink_factor must lie in (0, 1), got {}",
                self.shrink_factor
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub point: Point2,
    pub value: f64,
}

/// Per-restart bookkeeping returned by [`focus_search_traced`].
#[derive(Debug, Clone, PartialEq)]
pub struct RestartTrace {
    /// Best candidate after each stage (stage 0 is the full-square sample).
    pub stage_best: Vec<Candidate>,
    /// Largest value among the stage-0 samples alone.
    pub first_stage_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FocusTrace {
    pub best: Candidate,
    pub restarts: Vec<RestartTrace>,
}

/// Returns the best point found for `acq` on `[0, 1]²`.
pub fn focus_search<F>(acq: F, params: &FocusSearchParams) -> Candidate
where
    F: Fn(&Point2) -> f64 + Sync,
{
    focus_search_traced(acq, params).best
}

pub fn focus_search_traced<F>(acq: F, params: &FocusSearchParams) -> FocusTrace
where
    F: Fn(&Point2) -> f64 + Sync,
{
    let restarts: Vec<RestartTrace> = (0..params.n_restarts)
        .into_par_iter()
        .map(|r| run_restart(&acq, params, r))
        .collect();

    let mut best = restarts[0].stage_best.last().copied().unwrap();
    for r in &restarts[1..] {
        let c = *r.stage_best.last().unwrap();
        if better(c.value, best.value) {
            best = c;
        }
    }
    if params.local_refine {
        best = compass_refine(&acq, best);
    }
    FocusTrace { best, restarts }
}

/// Strictly better; NaN never wins.
fn better(candidate: f64, incumbent: f64) -> bool {
    candidate > incumbent || (incumbent.is_nan() && !candidate.is_nan())
}

fn run_restart<F>(acq: &F, params: &FocusSearchParams, restart: usize) -> RestartTrace
where
    F: Fn(&Point2) -> f64,
{
    let mut rng = SeedStream::new(params.seed)
        .with_str("focus-restart")
        .with_u64(restart as u64)
        .rng();
    let mut lo = [0.0f64; 2];
    let mut hi = [1.0f64; 2];
    let mut side = 1.0;
    let mut best: Option<Candidate> = None;
    let mut stage_best = Vec::with_capacity(params.n_shrinks + 1);
    let mut first_stage_max = f64::NEG_INFINITY;

    for stage in 0..=params.n_shrinks {
        if let Some(b) = best {
            side *= params.shrink_factor;
            let half = 0.5 * side;
            for axis in 0..2 {
                let c = b.point.coord(axis);
                lo[axis] = (c - half).max(0.0);
                hi[axis] = (c + half).min(1.0);
            }
        }
        for _ in 0..params.n_points {
            let p = Point2::new(
                lo[0] + (hi[0] - lo[0]) * rng.random::<f64>(),
                lo[1] + (hi[1] - lo[1]) * rng.random::<f64>(),
            );
            let v = acq(&p);
            if stage == 0 && v > first_stage_max {
                first_stage_max = v;
            }
            if best.is_none_or(|b| better(v, b.value)) {
                best = Some(Candidate { point: p, value: v });
            }
        }
        stage_best.push(best.unwrap());
    }
    RestartTrace {
        stage_best,
        first_stage_max,
    }
}

fn compass_refine<F>(acq: &F, start: Candidate) -> Candidate
where
    F: Fn(&Point2) -> f64,
{
    const DIRS: [(f64, f64); 4] = [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)];
    let mut best = start;
    let mut step = 1.0 / 64.0;
    let mut evals = 0;
    while step > 1e-7 && evals < 400 {
        let mut moved = false;
        for (d1, d2) in DIRS {
            let p = Point2::new(
                (best.point.x1 + d1 * step).clamp(0.0, 1.0),
                (best.point.x2 + d2 * step).clamp(0.0, 1.0),
            );
            let v = acq(&p);
            evals += 1;
            if v > best.value {
                best = Candidate { point: p, value: v };
                moved = true;
                break;
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    best
}

/// A set of points in `[0, 1]²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub points: Vec<Point2>,
}

/// `m` points such that each axis has exactly one coordinate in every bin
/// `[(i − 1)/m, i/m)`.
pub fn latin_hypercube(m: usize, seed: u64) -> Result<Design> {
    if m == 0 {
        return Err(Error::Usage("a Latin hypercube needs at least one point".into()));
    }
    let mut rng = SeedStream::new(seed).with_str("lhs").rng();
    let mut axes = [Vec::with_capacity(m), Vec::with_capacity(m)];
    for coords in axes.iter_mut() {
        let mut bins: Vec<usize> = (0..m).collect();
        bins.shuffle(&mut rng);
        for b in bins {
            let u: f64 = rng.random();
            // Stay strictly inside the bin even when rounding pushes to its edge.
            let v = (b as f64 + u) / m as f64;
            let upper = (b + 1) as f64 / m as f64;
            coords.push(if v >= upper { b as f64 / m as f64 } else { v });
        }
    }
    let points = axes[0]
        .iter()
        .zip(&axes[1])
        .map(|(&a, &b)| Point2::new(a, b))
        .collect();
    Ok(Design { points })
}
