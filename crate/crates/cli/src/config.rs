//! Run grids from a TOML file plus command-line overrides.
//!
//! Every key is optional; flags of the same name win over the file.
//!
//! ```toml
//! functions = ["branin", "ackley"]      # names or ids; default: all 15
//! surrogates = ["gp-se", "rf"]          # gp-<se|exp|powexp|matern32|matern52> or rf
//! acquisitions = ["EI", "PI", "UCB(beta=1)"]
//! seeds = [0, 1, 2]                     # or a range string: "0..10"
//! init = 5                              # Latin-hypercube points
//! budget = 20                           # acquisition-driven evaluations
//! thresholds = [0.10, 0.15]             # analyze only
//! betas = [1.0, 0.5, 0.0]               # analyze only: UCB weights compared
//! min_fit_size = 3                      # analyze only
//! jobs = 4                              # parallel grid cells
//!
//! [focus]                               # inner optimizer
//! n_points = 1000
//! n_shrinks = 5
//! n_restarts = 3
//! shrink_factor = 0.5
//! seed = 0
//!
//! [rf]
//! n_trees = 100
//! min_leaf = 2
//! ```

use std::path::Path;

use activesearch_core::acqopt::FocusSearchParams;
use activesearch_core::acquisition::AcquisitionSpec;
use activesearch_core::kernels::KernelFamily;
use activesearch_core::rf::RfParams;
use activesearch_core::surrogate::SurrogateSpec;
use activesearch_core::testfns::{list_functions, FunctionId};
use clap::Args;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub functions: Option<Vec<NameOrId>>,
    pub surrogates: Option<Vec<String>>,
    pub acquisitions: Option<Vec<String>>,
    pub seeds: Option<Seeds>,
    pub init: Option<usize>,
    pub budget: Option<usize>,
    pub thresholds: Option<Vec<f64>>,
    pub betas: Option<Vec<f64>>,
    pub min_fit_size: Option<usize>,
    pub jobs: Option<usize>,
    pub focus: Option<FocusConfig>,
    pub rf: Option<RfConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum NameOrId {
    Id(usize),
    Name(String),
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    List(Vec<u64>),
    Range(String),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FocusConfig {
    pub n_points: Option<usize>,
    pub n_shrinks: Option<usize>,
    pub n_restarts: Option<usize>,
    pub shrink_factor: Option<f64>,
    pub seed: Option<u64>,
    pub local_refine: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RfConfig {
    pub n_trees: Option<usize>,
    pub min_leaf: Option<usize>,
}

/// Grid flags shared by `bench`, `simulate` and `analyze`.
#[derive(Debug, Default, Args)]
pub struct GridArgs {
    /// TOML file with any of the grid keys.
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
    /// Comma-separated function names or ids, or `all`.
    #[arg(long)]
    pub functions: Option<String>,
    /// Comma-separated surrogates, e.g. `gp-se,rf`.
    #[arg(long)]
    pub surrogates: Option<String>,
    /// Semicolon- or comma-separated acquisitions, e.g. `EI,PI,UCB(beta=1)`.
    #[arg(long)]
    pub acquisitions: Option<String>,
    /// Seed list `0,1,2` or half-open range `0..10`.
    #[arg(long)]
    pub seeds: Option<String>,
    #[arg(long)]
    pub init: Option<usize>,
    #[arg(long)]
    pub budget: Option<usize>,
    /// Comma-separated compliance thresholds.
    #[arg(long)]
    pub thresholds: Option<String>,
    /// Comma-separated UCB weights for compliance.
    #[arg(long)]
    pub betas: Option<String>,
    #[arg(long)]
    pub min_fit_size: Option<usize>,
    /// Grid cells run in parallel; defaults to the number of CPUs.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Base seed of the inner optimizer.
    #[arg(long)]
    pub focus_seed: Option<u64>,
}

/// Fully resolved grid.
#[derive(Debug, Clone)]
pub struct Grid {
    pub functions: Vec<FunctionId>,
    pub surrogates: Vec<SurrogateSpec>,
    pub acquisitions: Vec<AcquisitionSpec>,
    pub seeds: Vec<u64>,
    pub init: usize,
    pub budget: usize,
    pub thresholds: Vec<f64>,
    pub betas: Vec<f64>,
    pub min_fit_size: usize,
    pub jobs: usize,
    pub focus: FocusSearchParams,
}

fn usage(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("{key}: {msg}"))
}

pub fn read_file_config(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn split_list(s: &str) -> Vec<String> {
    // Acquisitions may contain commas only inside parentheses.
    let mut out = Vec::new();
    let mut depth = 0;
    let mut cur = String::new();
    for c in s.chars() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' | ';' if depth == 0 => {
                out.push(std::mem::take(&mut cur));
                continue;
            }
            _ => {}
        }
        cur.push(c);
    }
    out.push(cur);
    out.into_iter()
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

fn parse_function(key: &str, v: &NameOrId) -> Result<Vec<FunctionId>, CliError> {
    match v {
        NameOrId::Id(i) => Ok(vec![FunctionId::new(*i).map_err(|e| usage(key, e))?]),
        NameOrId::Name(n) if n == "all" => Ok(list_functions()),
        NameOrId::Name(n) => match n.parse::<usize>() {
            Ok(i) => Ok(vec![FunctionId::new(i).map_err(|e| usage(key, e))?]),
            Err(_) => Ok(vec![FunctionId::from_name(n).map_err(|e| usage(key, e))?]),
        },
    }
}

fn parse_seeds(key: &str, s: &Seeds) -> Result<Vec<u64>, CliError> {
    match s {
        Seeds::List(v) => Ok(v.clone()),
        Seeds::Range(r) => {
            if let Some((a, b)) = r.split_once("..") {
                let a: u64 = a.trim().parse().map_err(|_| usage(key, format!("bad range `{r}`")))?;
                let b: u64 = b.trim().parse().map_err(|_| usage(key, format!("bad range `{r}`")))?;
                Ok((a..b).collect())
            } else {
                split_list(r)
                    .iter()
                    .map(|x| x.parse().map_err(|_| usage(key, format!("bad seed `{x}`"))))
                    .collect()
            }
        }
    }
}

fn parse_floats(key: &str, s: &str) -> Result<Vec<f64>, CliError> {
    split_list(s)
        .iter()
        .map(|x| x.parse().map_err(|_| usage(key, format!("bad number `{x}`"))))
        .collect()
}

/// Which command a grid is resolved for; only the defaults differ.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Run,
    Analyze,
}

impl GridArgs {
    pub fn resolve(&self, purpose: Purpose) -> Result<Grid, CliError> {
        let file = match &self.config {
            Some(p) => read_file_config(p)?,
            None => FileConfig::default(),
        };

        let functions = match (&self.functions, &file.functions) {
            (Some(s), _) => split_list(s)
                .into_iter()
                .map(|n| parse_function("functions", &NameOrId::Name(n)))
                .collect::<Result<Vec<_>, _>>()?
                .concat(),
            (None, Some(v)) => v
                .iter()
                .map(|n| parse_function("functions", n))
                .collect::<Result<Vec<_>, _>>()?
                .concat(),
            (None, None) => list_functions(),
        };

        let rf_cfg = file.rf.unwrap_or_default();
        let rf = RfParams {
            n_trees: rf_cfg.n_trees.unwrap_or(RfParams::default().n_trees),
            min_leaf: rf_cfg.min_leaf.unwrap_or(RfParams::default().min_leaf),
            ..RfParams::default()
        };
        rf.validate().map_err(|e| usage("rf", e))?;
        let surrogate_names = match (&self.surrogates, &file.surrogates) {
            (Some(s), _) => split_list(s),
            (None, Some(v)) => v.clone(),
            (None, None) => match purpose {
                Purpose::Run => vec!["gp-se".into()],
                Purpose::Analyze => KernelFamily::ALL
                    .iter()
                    .map(|k| format!("gp-{k}"))
                    .chain(["rf".to_string()])
                    .collect(),
            },
        };
        let surrogates = surrogate_names
            .iter()
            .map(|s| {
                s.parse::<SurrogateSpec>()
                    .map(|spec| match spec {
                        SurrogateSpec::Rf(_) => SurrogateSpec::Rf(rf),
                        gp => gp,
                    })
                    .map_err(|e| usage("surrogates", e))
            })
            .collect::<Result<Vec<_>, _>>()?;

        let acq_names = match (&self.acquisitions, &file.acquisitions) {
            (Some(s), _) => split_list(s),
            (None, Some(v)) => v.clone(),
            (None, None) => vec!["EI".into()],
        };
        let acquisitions = acq_names
            .iter()
            .map(|s| {
                s.parse::<AcquisitionSpec>()
                    .and_then(|a| a.validate().map(|_| a))
                    .map_err(|e| usage("acquisitions", e))
            })
            .collect::<Result<Vec<_>, _>>()?;

        let seeds = match (&self.seeds, &file.seeds) {
            (Some(s), _) => parse_seeds("seeds", &Seeds::Range(s.clone()))?,
            (None, Some(s)) => parse_seeds("seeds", s)?,
            (None, None) => vec![0],
        };

        let thresholds = match (&self.thresholds, &file.thresholds) {
            (Some(s), _) => parse_floats("thresholds", s)?,
            (None, Some(v)) => v.clone(),
            (None, None) => vec![0.10, 0.15],
        };
        if let Some(t) = thresholds.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
            return Err(usage("thresholds", format!("must be positive, got {t}")));
        }
        let betas = match (&self.betas, &file.betas) {
            (Some(s), _) => parse_floats("betas", s)?,
            (None, Some(v)) => v.clone(),
            (None, None) => vec![1.0, 0.5, 0.0],
        };
        if let Some(b) = betas.iter().find(|b| !(**b >= 0.0 && b.is_finite())) {
            return Err(usage("betas", format!("must be nonnegative, got {b}")));
        }

        let focus_cfg = file.focus.unwrap_or_default();
        let d = FocusSearchParams::default();
        let focus = FocusSearchParams {
            n_points: focus_cfg.n_points.unwrap_or(d.n_points),
            n_shrinks: focus_cfg.n_shrinks.unwrap_or(d.n_shrinks),
            n_restarts: focus_cfg.n_restarts.unwrap_or(d.n_restarts),
            shrink_factor: focus_cfg.shrink_factor.unwrap_or(d.shrink_factor),
            seed: self.focus_seed.or(focus_cfg.seed).unwrap_or(d.seed),
            local_refine: focus_cfg.local_refine.unwrap_or(d.local_refine),
        };
        focus.validate().map_err(|e| usage("focus", e))?;

        let init = self.init.or(file.init).unwrap_or(5);
        if init == 0 {
            return Err(usage("init", "must be at least 1"));
        }
        let min_fit_size = self.min_fit_size.or(file.min_fit_size).unwrap_or(3);
        if min_fit_size == 0 {
            return Err(usage("min_fit_size", "must be at least 1"));
        }
        let jobs = self
            .jobs
            .or(file.jobs)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        if jobs == 0 {
            return Err(usage("jobs", "must be at least 1"));
        }
        for (key, empty) in [
            ("functions", functions.is_empty()),
            ("surrogates", surrogates.is_empty()),
            ("acquisitions", acquisitions.is_empty()),
            ("seeds", seeds.is_empty()),
            ("thresholds", thresholds.is_empty()),
            ("betas", betas.is_empty()),
        ] {
            if empty {
                return Err(usage(key, "empty list"));
            }
        }

        Ok(Grid {
            functions,
            surrogates,
            acquisitions,
            seeds,
            init,
            budget: self.budget.or(file.budget).unwrap_or(20),
            thresholds,
            betas,
            min_fit_size,
            jobs,
            focus,
        })
    }
}
