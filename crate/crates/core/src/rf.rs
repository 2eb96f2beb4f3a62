//! Random-forest regression surrogate.
//!
//! Each tree is a CART regression tree grown on a bootstrap resample of the
//! data (size n, with replacement). Splits minimize the summed squared
//! deviation of the two children; ties go to the lower feature index and
//! then the lower threshold. A node becomes a leaf when its targets are all
//! equal or it cannot be split into two children of at least `min_leaf`
//! samples. The forest's posterior is the mean and the population variance
//! of the individual tree outputs.
//!
//! Tree `i` draws its randomness from `seed + i`, so trees can be grown in
//! parallel and still match a serial fit bit for bit.

use rand::seq::SliceRandom;
use rand::RngExt;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::seed::rng_from_seed;
use crate::{Error, Point2, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RfParams {
    pub n_trees: usize,
    pub min_leaf: usize,
    /// Candidate split features per node; `None` means both axes.
    pub feature_subset: Option<usize>,
    pub seed: u64,
}

impl Default for RfParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            min_leaf: 2,
            feature_subset: None,
            seed: 0,
        }
    }
}

impl RfParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::Config("n_trees must be at least 1".into()));
        }
        if self.min_leaf == 0 {
            return Err(Error::Config("min_leaf must be at least 1".into()));
        }
        if let Some(k) = self.feature_subset {
            if !(1..=2).contains(&k) {
                return Err(Error::Config(format!("feature_subset must be 1 or 2, got {k}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(f64),
    Split {
        axis: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// A fitted regression tree. Points with `x[axis] <= threshold` go left.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn predict(&self, x: &Point2) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf(v) => return v,
                Node::Split {
                    axis,
                    threshold,
                    left,
                    right,
                } => i = if x.coord(axis) <= threshold { left } else { right },
            }
        }
    }

    /// Index of the leaf containing `x`; two points share a leaf cell iff
    /// they get the same index.
    pub fn leaf_index(&self, x: &Point2) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf(_) => return i,
                Node::Split {
                    axis,
                    threshold,
                    left,
                    right,
                } => i = if x.coord(axis) <= threshold { left } else { right },
            }
        }
    }

    pub fn is_stump(&self) -> bool {
        self.nodes.len() == 1
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf(_))).count()
    }

    fn fit(xs: &[Point2], ys: &[f64], params: &RfParams, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let n = xs.len();
        let sample: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let mut builder = TreeBuilder {
            xs,
            ys,
            params,
            rng,
            nodes: Vec::new(),
        };
        builder.grow(sample);
        Self {
            nodes: builder.nodes,
        }
    }
}

struct TreeBuilder<'a> {
    xs: &'a [Point2],
    ys: &'a [f64],
    params: &'a RfParams,
    rng: rand_chacha::ChaCha8Rng,
    nodes: Vec<Node>,
}

struct Cut {
    axis: usize,
    threshold: f64,
    sse: f64,
}

impl TreeBuilder<'_> {
    fn grow(&mut self, idx: Vec<usize>) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf(0.0));

        let (lo, hi) = idx.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &i| {
            (a.min(self.ys[i]), b.max(self.ys[i]))
        });
        if lo == hi {
            self.nodes[id] = Node::Leaf(lo);
            return id;
        }
        let mean = (idx.iter().map(|&i| self.ys[i]).sum::<f64>() / idx.len() as f64).clamp(lo, hi);

        let cut = if idx.len() >= 2 * self.params.min_leaf {
            self.best_cut(&idx)
        } else {
            None
        };
        let Some(cut) = cut else {
            self.nodes[id] = Node::Leaf(mean);
            return id;
        };

        let (l, r): (Vec<usize>, Vec<usize>) = idx
            .into_iter()
            .partition(|&i| self.xs[i].coord(cut.axis) <= cut.threshold);
        let left = self.grow(l);
        let right = self.grow(r);
        self.nodes[id] = Node::Split {
            axis: cut.axis,
            threshold: cut.threshold,
            left,
            right,
        };
        id
    }

    fn best_cut(&mut self, idx: &[usize]) -> Option<Cut> {
        let mut axes = vec![0usize, 1];
        if let Some(k) = self.params.feature_subset {
            if k < 2 {
                axes.shuffle(&mut self.rng);
                axes.truncate(k);
                axes.sort_unstable();
            }
        }
        let min_leaf = self.params.min_leaf;
        let n = idx.len();
        let mut best: Option<Cut> = None;
        for axis in axes {
            let mut order: Vec<(f64, f64)> = idx
                .iter()
                .map(|&i| (self.xs[i].coord(axis), self.ys[i]))
                .collect();
            order.sort_by(|a, b| a.0.total_cmp(&b.0));
            let total: f64 = order.iter().map(|p| p.1).sum();
            let total_sq: f64 = order.iter().map(|p| p.1 * p.1).sum();
            let (mut s, mut sq) = (0.0, 0.0);
            for k in 0..n - 1 {
                s += order[k].1;
                sq += order[k].1 * order[k].1;
                let nl = k + 1;
                let nr = n - nl;
                if nl < min_leaf || nr < min_leaf || order[k].0 == order[k + 1].0 {
                    continue;
                }
                let sse_l = sq - s * s / nl as f64;
                let sr = total - s;
                let sse_r = (total_sq - sq) - sr * sr / nr as f64;
                let sse = sse_l.max(0.0) + sse_r.max(0.0);
                if best.as_ref().is_none_or(|b| sse < b.sse) {
                    let mut threshold = 0.5 * (order[k].0 + order[k + 1].0);
                    // Midpoint of adjacent floats can round up to the right value.
                    if threshold >= order[k + 1].0 {
                        threshold = order[k].0;
                    }
                    best = Some(Cut {
                        axis,
                        threshold,
                        sse,
                    });
                }
            }
        }
        best
    }
}

/// A fitted forest.
#[derive(Debug, Clone, PartialEq)]
pub struct RfModel {
    trees: Vec<RegressionTree>,
    params: RfParams,
    y_min: f64,
    y_max: f64,
}

impl RfModel {
    pub fn fit(xs: &[Point2], ys: &[f64], params: RfParams) -> Result<Self> {
        params.validate()?;
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(Error::Usage(format!(
                "forest fit needs matching non-empty inputs, got {} points and {} targets",
                xs.len(),
                ys.len()
            )));
        }
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|i| RegressionTree::fit(xs, ys, &params, params.seed.wrapping_add(i as u64)))
            .collect();
        let y_min = ys.iter().copied().fold(f64::INFINITY, f64::min);
        let y_max = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            trees,
            params,
            y_min,
            y_max,
        })
    }

    /// Mean and population variance of the tree outputs at `x`.
    pub fn predict(&self, x: &Point2) -> (f64, f64) {
        let outputs: Vec<f64> = self.trees.iter().map(|t| t.predict(x)).collect();
        let n = outputs.len() as f64;
        let (lo, hi) = outputs
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        // The true mean lies in [lo, hi]; clamping only removes rounding.
        let mean = (outputs.iter().sum::<f64>() / n).clamp(lo, hi);
        let var = outputs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        (mean, var)
    }

    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn params(&self) -> &RfParams {
        &self.params
    }

    /// Range of the training targets.
    pub fn target_range(&self) -> (f64, f64) {
        (self.y_min, self.y_max)
    }
}
