//! The Bayesian-optimization loop, random-search baseline and regret
//! metrics.
//!
//! A run evaluates a Latin-hypercube design of `init` points and then, for
//! `budget` iterations, fits the surrogate on everything observed so far,
//! maximizes the acquisition with focus search and evaluates the proposal.
//! Runs produce [`Trace`]s with the same shape as recorded human games.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::acqopt::{focus_search, latin_hypercube, FocusSearchParams};
use crate::acquisition::AcquisitionSpec;
use crate::seed::SeedStream;
use crate::surrogate::SurrogateSpec;
use crate::testfns::{evaluate, FunctionId};
use crate::{Error, Point2, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub x: Point2,
    pub y: f64,
    /// 1-based position in the trace.
    pub index: usize,
}

/// Game modality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum GameMode {
    /// Find the maximum without knowing its value.
    SimpleRegret = 1,
    /// Find the maximum knowing its value.
    KnownMaximum = 2,
    /// Maximize the total score.
    CumulativeRegret = 3,
}

impl TryFrom<u8> for GameMode {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(GameMode::SimpleRegret),
            2 => Ok(GameMode::KnownMaximum),
            3 => Ok(GameMode::CumulativeRegret),
            _ => Err(Error::Validation(format!("game mode must be 1, 2 or 3, got {v}"))),
        }
    }
}

impl From<GameMode> for u8 {
    fn from(m: GameMode) -> u8 {
        m as u8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Human,
    Machine,
}

/// Where a trace came from. Machine traces carry the generating surrogate
/// and acquisition labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub source: Source,
    pub user_id: String,
    pub function: FunctionId,
    pub mode: GameMode,
    pub game_end_timestamp: i64,
    pub budget: usize,
    pub surrogate: Option<String>,
    pub acquisition: Option<String>,
    pub seed: Option<u64>,
}

impl TraceMeta {
    /// Stable identifier, `<user_id>@<game_end_timestamp>`.
    pub fn id(&self) -> String {
        format!("{}@{}", self.user_id, self.game_end_timestamp)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub meta: TraceMeta,
    pub observations: Vec<Observation>,
}

impl Trace {
    pub fn new(meta: TraceMeta) -> Self {
        Self {
            meta,
            observations: Vec::new(),
        }
    }

    pub fn id(&self) -> String {
        self.meta.id()
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn push(&mut self, x: Point2, y: f64) {
        let index = self.observations.len() + 1;
        self.observations.push(Observation { x, y, index });
    }

    pub fn points(&self) -> Vec<Point2> {
        self.observations.iter().map(|o| o.x).collect()
    }

    pub fn scores(&self) -> Vec<f64> {
        self.observations.iter().map(|o| o.y).collect()
    }

    pub fn best_score(&self) -> Option<f64> {
        self.observations.iter().map(|o| o.y).reduce(f64::max)
    }

    /// `y⁺ₙ = max_{i ≤ n} yᵢ` for every prefix.
    pub fn best_so_far(&self) -> Vec<f64> {
        self.observations
            .iter()
            .scan(f64::NEG_INFINITY, |best, o| {
                *best = best.max(o.y);
                Some(*best)
            })
            .collect()
    }

    /// The first `n` observations with the same metadata.
    pub fn prefix(&self, n: usize) -> Trace {
        Trace {
            meta: self.meta.clone(),
            observations: self.observations[..n.min(self.len())].to_vec(),
        }
    }
}

/// `f* − max yᵢ`, never negative.
pub fn simple_regret(t: &Trace, f_star: f64) -> Result<f64> {
    let best = t
        .best_score()
        .ok_or_else(|| Error::Usage("simple regret of an empty trace".into()))?;
    Ok((f_star - best).max(0.0))
}

/// `Σᵢ (f* − yᵢ)`.
pub fn cumulative_regret(t: &Trace, f_star: f64) -> Result<f64> {
    if t.is_empty() {
        return Err(Error::Usage("cumulative regret of an empty trace".into()));
    }
    Ok(t.observations.iter().map(|o| f_star - o.y).sum())
}

/// Seed of the inner optimizer when proposing point `n + 1` of the trace
/// `trace_key` under `acq`. Shared with the compliance analyzer so a
/// reanalysis replays the proposals of the run that produced the trace.
pub fn proposal_seed(base: u64, trace_key: &str, n: usize, acq: &AcquisitionSpec) -> u64 {
    SeedStream::new(base)
        .with_str(trace_key)
        .with_u64(n as u64)
        .with_str(&acq.to_string())
        .seed()
}

/// Seed of a forest fitted on the first `n` points of `trace_key`.
pub fn surrogate_seed(base: u64, trace_key: &str, n: usize) -> u64 {
    SeedStream::new(base)
        .with_str(trace_key)
        .with_u64(n as u64)
        .with_str("surrogate")
        .seed()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoConfig {
    pub surrogate: SurrogateSpec,
    pub acquisition: AcquisitionSpec,
    /// Size `m` of the initial Latin-hypercube design.
    pub init: usize,
    /// Number `N` of acquisition-driven evaluations after the design.
    pub budget: usize,
    pub seed: u64,
    /// Inner-optimizer settings; its `seed` is the base of the
    /// per-iteration derivation.
    pub focus: FocusSearchParams,
}

impl BoConfig {
    pub fn new(surrogate: SurrogateSpec, acquisition: AcquisitionSpec, seed: u64) -> Self {
        Self {
            surrogate,
            acquisition,
            init: 5,
            budget: 20,
            seed,
            focus: FocusSearchParams::default(),
        }
    }

    /// `machine:<surrogate>:<acquisition>:<seed>`.
    pub fn user_id(&self) -> String {
        format!(
            "machine:{}:{}:{}",
            self.surrogate.label(),
            self.acquisition,
            self.seed
        )
    }
}

/// A run that stopped early. The trace holds every completed evaluation.
#[derive(Debug)]
pub struct RunError {
    pub trace: Trace,
    pub source: Error,
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "run {} stopped after {} evaluations: {}",
            self.trace.id(),
            self.trace.len(),
            self.source
        )
    }
}

impl std::error::Error for RunError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

/// Machine traces use the function index as their synthetic game id, so
/// the same generator and seed on different functions give distinct games.
fn machine_meta(f: FunctionId, user_id: String, budget: usize, seed: u64) -> TraceMeta {
    TraceMeta {
        source: Source::Machine,
        user_id,
        function: f,
        mode: GameMode::SimpleRegret,
        game_end_timestamp: f.index() as i64,
        budget,
        surrogate: None,
        acquisition: None,
        seed: Some(seed),
    }
}

pub fn run_bo(f: FunctionId, cfg: &BoConfig) -> std::result::Result<Trace, RunError> {
    let mut meta = machine_meta(f, cfg.user_id(), cfg.init + cfg.budget, cfg.seed);
    meta.surrogate = Some(cfg.surrogate.label());
    meta.acquisition = Some(cfg.acquisition.to_string());
    let mut trace = Trace::new(meta);

    let checks = cfg
        .acquisition
        .validate()
        .and_then(|_| cfg.focus.validate())
        .and_then(|_| latin_hypercube(cfg.init, cfg.seed));
    let design = match checks {
        Ok(d) => d,
        Err(source) => return Err(RunError { trace, source }),
    };
    for p in design.points {
        match evaluate(f, p) {
            Ok(y) => trace.push(p, y),
            Err(source) => return Err(RunError { trace, source }),
        }
    }

    let key = trace.id();
    for _ in 0..cfg.budget {
        let n = trace.len();
        let (xs, ys) = (trace.points(), trace.scores());
        let model = match cfg
            .surrogate
            .fit(&xs, &ys, surrogate_seed(cfg.focus.seed, &key, n))
        {
            Ok(m) => m,
            Err(source) => return Err(RunError { trace, source }),
        };
        let y_plus = trace.best_score().unwrap_or(f64::NEG_INFINITY);
        let params = cfg
            .focus
            .with_seed(proposal_seed(cfg.focus.seed, &key, n, &cfg.acquisition));
        let next = focus_search(model.acquisition(&cfg.acquisition, y_plus), &params).point;
        match evaluate(f, next) {
            Ok(y) => trace.push(next, y),
            Err(source) => return Err(RunError { trace, source }),
        }
    }
    Ok(trace)
}

/// `evaluations` uniform random points, labelled `machine:random:-:<seed>`.
pub fn run_random(f: FunctionId, evaluations: usize, seed: u64) -> Trace {
    use rand::RngExt;
    let mut trace = Trace::new(TraceMeta {
        surrogate: Some("random".into()),
        acquisition: Some("-".into()),
        ..machine_meta(f, format!("machine:random:-:{seed}"), evaluations, seed)
    });
    let mut rng = SeedStream::new(seed).with_str("random-search").rng();
    for _ in 0..evaluations {
        let p = Point2::new(rng.random(), rng.random());
        let y = evaluate(f, p).expect("uniform samples lie in the unit square");
        trace.push(p, y);
    }
    trace
}

/// One row per trace prefix in benchmark output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub function: String,
    pub surrogate: String,
    pub kernel: String,
    pub acquisition: String,
    pub beta: String,
    pub seed: u64,
    pub n: usize,
    pub best_y: f64,
    pub simple_regret: f64,
    pub cumulative_regret: f64,
}

pub fn bench_rows(trace: &Trace, cfg: &BoConfig, f_star: f64) -> Vec<BenchRow> {
    let surrogate = match cfg.surrogate {
        SurrogateSpec::Gp { .. } => "gp",
        SurrogateSpec::Rf(_) => "rf",
    };
    let kernel = cfg
        .surrogate
        .kernel_family()
        .map(|k| k.name().to_string())
        .unwrap_or_default();
    let beta = match cfg.acquisition.kind {
        crate::acquisition::AcquisitionKind::Ucb => cfg.acquisition.beta.to_string(),
        _ => String::new(),
    };
    let mut cumulative = 0.0;
    trace
        .observations
        .iter()
        .zip(trace.best_so_far())
        .map(|(o, best)| {
            cumulative += f_star - o.y;
            BenchRow {
                function: trace.meta.function.name().to_string(),
                surrogate: surrogate.to_string(),
                kernel: kernel.clone(),
                acquisition: cfg.acquisition.kind.name().to_string(),
                beta: beta.clone(),
                seed: cfg.seed,
                n: o.index,
                best_y: best,
                simple_regret: (f_star - best).max(0.0),
                cumulative_regret: cumulative,
            }
        })
        .collect()
}
