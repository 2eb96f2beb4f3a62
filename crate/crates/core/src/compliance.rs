//! Classifies a search trace by the acquisition function it follows.
//!
//! For every prefix of `n ≥ min_fit_size` observations the analyzer refits
//! the surrogate, asks each candidate acquisition for its next point and
//! measures the Euclidean distance to the point the trace actually visited
//! next. An iteration is compliant with the closest acquisition when that
//! distance is at most the threshold; equal distances are resolved as
//! EI, then PI, then UCB. The trace strategy is the most frequent label,
//! ties going to the label with the smaller mean distance.
//!
//! Proposals do not depend on the threshold, so they are computed once into
//! a [`ProposalTable`] and classified for as many thresholds and acquisition
//! sets as needed.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acqopt::{focus_search, FocusSearchParams};
use crate::acquisition::{AcquisitionKind, AcquisitionSpec};
use crate::boloop::{proposal_seed, surrogate_seed, Trace};
use crate::surrogate::SurrogateSpec;
use crate::{Error, Point2, Result};

/// Prefix length at which proposals start being scored.
pub const DEFAULT_MIN_FIT_SIZE: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplianceConfig {
    pub threshold: f64,
    pub acquisitions: Vec<AcquisitionSpec>,
    /// A GP with its kernel family, or a forest.
    pub surrogate: SurrogateSpec,
    pub min_fit_size: usize,
    /// Inner-optimizer settings; `focus.seed` is the base of the
    /// per-iteration seed derivation.
    pub focus: FocusSearchParams,
}

impl ComplianceConfig {
    /// PI, EI and UCB(β) at the given threshold.
    pub fn new(surrogate: SurrogateSpec, threshold: f64, beta: f64) -> Self {
        Self {
            threshold,
            acquisitions: vec![
                AcquisitionSpec::pi(),
                AcquisitionSpec::ei(),
                AcquisitionSpec::ucb(beta),
            ],
            surrogate,
            min_fit_size: DEFAULT_MIN_FIT_SIZE,
            focus: FocusSearchParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return Err(Error::Config(format!(
                "threshold must be positive, got {}",
                self.threshold
            )));
        }
        validate_acquisitions(&self.acquisitions)?;
        if self.min_fit_size == 0 {
            return Err(Error::Config("min_fit_size must be at least 1".into()));
        }
        self.focus.validate()
    }
}

/// Labels must identify acquisitions, so each kind may appear once.
fn validate_acquisitions(acqs: &[AcquisitionSpec]) -> Result<()> {
    if acqs.is_empty() {
        return Err(Error::Config("no acquisition functions to compare".into()));
    }
    for (i, a) in acqs.iter().enumerate() {
        a.validate()?;
        if acqs[..i].iter().any(|b| b.kind == a.kind) {
            return Err(Error::Config(format!(
                "acquisition kind {} listed twice",
                a.kind
            )));
        }
    }
    Ok(())
}

/// Trace-level verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "PI")]
    Pi,
    #[serde(rename = "EI")]
    Ei,
    #[serde(rename = "UCB")]
    Ucb,
    #[serde(rename = "NON_COMPLIANT")]
    NonCompliant,
}

impl Strategy {
    /// Column order of count tables.
    pub const ALL: [Strategy; 4] = [
        Strategy::Pi,
        Strategy::Ei,
        Strategy::Ucb,
        Strategy::NonCompliant,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Pi => "PI",
            Strategy::Ei => "EI",
            Strategy::Ucb => "UCB",
            Strategy::NonCompliant => "NON_COMPLIANT",
        }
    }

    /// Position in [`Strategy::ALL`] and in [`CountTable`] rows.
    pub fn column(self) -> usize {
        self as usize
    }
}

impl From<AcquisitionKind> for Strategy {
    fn from(k: AcquisitionKind) -> Self {
        match k {
            AcquisitionKind::Pi => Strategy::Pi,
            AcquisitionKind::Ei => Strategy::Ei,
            AcquisitionKind::Ucb => Strategy::Ucb,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown strategy `{s}`")))
    }
}

/// Proposals of every acquisition after the first `n` observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalRow {
    pub n: usize,
    /// Observation `n + 1` of the trace.
    pub next: Point2,
    pub proposals: Vec<(AcquisitionSpec, Point2)>,
    /// Set when the surrogate could not be fitted; `proposals` is then empty.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalTable {
    pub trace_id: String,
    pub surrogate: SurrogateSpec,
    pub rows: Vec<ProposalRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationVerdict {
    pub n: usize,
    /// Distance from each acquisition's proposal to the next point, in the
    /// order of the acquisition set. Empty when the fit failed.
    pub distances: Vec<(AcquisitionSpec, f64)>,
    /// `None` when no proposal lies within the threshold.
    pub label: Option<AcquisitionKind>,
    pub failure: Option<String>,
}

impl IterationVerdict {
    pub fn min_distance(&self) -> Option<f64> {
        self.distances.iter().map(|d| d.1).reduce(f64::min)
    }

    pub fn distance_of(&self, kind: AcquisitionKind) -> Option<f64> {
        self.distances.iter().find(|d| d.0.kind == kind).map(|d| d.1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplianceRecord {
    pub trace_id: String,
    /// Surrogate label: `gp-<kernel>` or `rf`.
    pub surrogate: String,
    pub threshold: f64,
    pub verdicts: Vec<IterationVerdict>,
    pub strategy: Strategy,
    /// Share of scored iterations with a label.
    pub compliant_fraction: f64,
}

impl ComplianceRecord {
    pub fn compliant_iterations(&self) -> Vec<usize> {
        self.verdicts
            .iter()
            .filter(|v| v.label.is_some())
            .map(|v| v.n)
            .collect()
    }
}

/// Computes the proposal of every acquisition at every scored iteration.
/// The set may hold several UCB weights; each classification then picks
/// one of them.
///
/// The surrogate fitted on the first `n` points and the inner optimizer for
/// acquisition `α` are seeded from `(trace id, n)` and `(trace id, n, α)`,
/// the same derivation [`crate::boloop::run_bo`] uses, so a machine trace
/// reanalyzed with its generating settings reproduces its own proposals.
pub fn propose(
    trace: &Trace,
    surrogate: &SurrogateSpec,
    acquisitions: &[AcquisitionSpec],
    min_fit_size: usize,
    focus: &FocusSearchParams,
) -> Result<ProposalTable> {
    if acquisitions.is_empty() {
        return Err(Error::Config("no acquisition functions to compare".into()));
    }
    for (i, a) in acquisitions.iter().enumerate() {
        a.validate()?;
        if acquisitions[..i].contains(a) {
            return Err(Error::Config(format!("acquisition {a} listed twice")));
        }
    }
    focus.validate()?;
    if min_fit_size == 0 {
        return Err(Error::Config("min_fit_size must be at least 1".into()));
    }
    if trace.len() < min_fit_size + 1 {
        return Err(Error::Usage(format!(
            "trace {} has {} observations; compliance needs at least {}",
            trace.id(),
            trace.len(),
            min_fit_size + 1
        )));
    }
    let key = trace.id();
    let xs = trace.points();
    let ys = trace.scores();
    let rows = (min_fit_size..trace.len())
        .into_par_iter()
        .map(|n| {
            let next = xs[n];
            let model = match surrogate.fit(&xs[..n], &ys[..n], surrogate_seed(focus.seed, &key, n)) {
                Ok(m) => m,
                Err(e) => {
                    return ProposalRow {
                        n,
                        next,
                        proposals: Vec::new(),
                        failure: Some(e.to_string()),
                    }
                }
            };
            let y_plus = ys[..n].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let proposals = acquisitions
                .iter()
                .map(|acq| {
                    let params = focus.with_seed(proposal_seed(focus.seed, &key, n, acq));
                    let p = focus_search(model.acquisition(acq, y_plus), &params).point;
                    (*acq, p)
                })
                .collect();
            ProposalRow {
                n,
                next,
                proposals,
                failure: None,
            }
        })
        .collect();
    Ok(ProposalTable {
        trace_id: key,
        surrogate: *surrogate,
        rows,
    })
}

impl ProposalTable {
    /// Labels every iteration against `acquisitions`, which must all be
    /// present in the table.
    pub fn classify(&self, acquisitions: &[AcquisitionSpec], threshold: f64) -> Result<ComplianceRecord> {
        validate_acquisitions(acquisitions)?;
        if !(threshold > 0.0 && threshold.is_finite()) {
            return Err(Error::Config(format!("threshold must be positive, got {threshold}")));
        }
        let mut verdicts = Vec::with_capacity(self.rows.len());
        for row in &self.rows {
            if let Some(f) = &row.failure {
                verdicts.push(IterationVerdict {
                    n: row.n,
                    distances: Vec::new(),
                    label: None,
                    failure: Some(f.clone()),
                });
                continue;
            }
            let mut distances = Vec::with_capacity(acquisitions.len());
            for acq in acquisitions {
                let p = row
                    .proposals
                    .iter()
                    .find(|(a, _)| a == acq)
                    .map(|(_, p)| *p)
                    .ok_or_else(|| {
                        Error::Usage(format!("no proposals for {acq} in table of {}", self.trace_id))
                    })?;
                distances.push((*acq, p.distance(&row.next)));
            }
            let label = label_of(&distances, threshold);
            verdicts.push(IterationVerdict {
                n: row.n,
                distances,
                label,
                failure: None,
            });
        }
        Ok(record_from_verdicts(
            self.trace_id.clone(),
            self.surrogate.label(),
            threshold,
            verdicts,
        ))
    }
}

/// Closest acquisition within `threshold`, by priority on equal distance.
pub fn label_of(distances: &[(AcquisitionSpec, f64)], threshold: f64) -> Option<AcquisitionKind> {
    let mut best: Option<(AcquisitionKind, f64)> = None;
    for &(acq, d) in distances {
        let wins = match best {
            None => true,
            Some((k, bd)) => d < bd || (d == bd && acq.kind.priority() < k.priority()),
        };
        if wins {
            best = Some((acq.kind, d));
        }
    }
    best.filter(|&(_, d)| d <= threshold).map(|(k, _)| k)
}

/// Most frequent label; equal counts go to the label whose proposals were
/// closer on average over all fitted iterations, then to acquisition
/// priority.
pub fn strategy_of(verdicts: &[IterationVerdict]) -> Strategy {
    let mut counts: BTreeMap<AcquisitionKind, usize> = BTreeMap::new();
    for v in verdicts {
        if let Some(k) = v.label {
            *counts.entry(k).or_default() += 1;
        }
    }
    let mean_distance = |k: AcquisitionKind| {
        let ds: Vec<f64> = verdicts.iter().filter_map(|v| v.distance_of(k)).collect();
        if ds.is_empty() {
            f64::INFINITY
        } else {
            ds.iter().sum::<f64>() / ds.len() as f64
        }
    };
    counts
        .into_iter()
        .map(|(k, c)| (k, c, mean_distance(k)))
        .min_by(|a, b| {
            b.1.cmp(&a.1)
                .then(a.2.total_cmp(&b.2))
                .then(a.0.priority().cmp(&b.0.priority()))
        })
        .map(|(k, _, _)| Strategy::from(k))
        .unwrap_or(Strategy::NonCompliant)
}

/// Builds a record, deriving strategy and compliant fraction from
/// `verdicts`.
pub fn record_from_verdicts(
    trace_id: String,
    surrogate: String,
    threshold: f64,
    verdicts: Vec<IterationVerdict>,
) -> ComplianceRecord {
    let compliant = verdicts.iter().filter(|v| v.label.is_some()).count();
    let compliant_fraction = if verdicts.is_empty() {
        0.0
    } else {
        compliant as f64 / verdicts.len() as f64
    };
    ComplianceRecord {
        trace_id,
        surrogate,
        threshold,
        strategy: strategy_of(&verdicts),
        verdicts,
        compliant_fraction,
    }
}

fn analyze(t: &Trace, cfg: &ComplianceConfig) -> Result<ComplianceRecord> {
    cfg.validate()?;
    propose(t, &cfg.surrogate, &cfg.acquisitions, cfg.min_fit_size, &cfg.focus)?
        .classify(&cfg.acquisitions, cfg.threshold)
}

/// Compliance against GP-based optimization with the configured kernel.
pub fn analyze_trace_gp(t: &Trace, cfg: &ComplianceConfig) -> Result<ComplianceRecord> {
    if cfg.surrogate.kernel_family().is_none() {
        return Err(Error::Config("GP analysis needs a kernel family".into()));
    }
    analyze(t, cfg)
}

/// Compliance against forest-based optimization.
pub fn analyze_trace_rf(t: &Trace, cfg: &ComplianceConfig) -> Result<ComplianceRecord> {
    if !matches!(cfg.surrogate, SurrogateSpec::Rf(_)) {
        return Err(Error::Config("RF analysis needs a forest surrogate".into()));
    }
    analyze(t, cfg)
}

/// Strategy counts per surrogate row.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountTable {
    /// Row label to counts in [`Strategy::ALL`] order.
    pub rows: BTreeMap<String, [usize; 4]>,
}

impl CountTable {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn count(&self, row: &str, s: Strategy) -> usize {
        self.rows.get(row).map_or(0, |r| r[s.column()])
    }

    pub fn row_total(&self, row: &str) -> usize {
        self.rows.get(row).map_or(0, |r| r.iter().sum())
    }

    pub fn total(&self) -> usize {
        self.rows.values().flatten().sum()
    }
}

/// Fixed-width text rendering with a header line.
impl fmt::Display for CountTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:<14}", "surrogate")?;
        for s in Strategy::ALL {
            write!(f, " {:>13}", s.name())?;
        }
        writeln!(f)?;
        for (row, counts) in &self.rows {
            write!(f, "{row:<14}")?;
            for c in counts {
                write!(f, " {c:>13}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Counts trace strategies per surrogate.
pub fn aggregate<'a, I>(records: I) -> CountTable
where
    I: IntoIterator<Item = &'a ComplianceRecord>,
{
    let mut table = CountTable::default();
    for r in records {
        table.rows.entry(r.surrogate.clone()).or_default()[r.strategy.column()] += 1;
    }
    table
}
