//! Append-only storage of game and machine traces.
//!
//! Every click is one [`GameRecord`]. The interchange format is one JSON
//! object per line, UTF-8 with LF endings and no header line, fields in the
//! order
//!
//! ```text
//! {"user_id":"ana","function_id":4,"mode":1,"game_end_timestamp":1700000000000,"click_index":1,"x1":0.25,"x2":0.75,"score":41.0327539}
//! ```
//!
//! Coordinates and scores are rounded to 9 significant digits when a record
//! is built, so a stored value always prints and parses back to itself.
//! Exports list games ordered by `(user_id, game_end_timestamp)` and clicks
//! by `click_index`, independent of the order in which games were appended.
//!
//! Machine traces use `user_id = "machine:<surrogate>:<acquisition>:<seed>"`;
//! loading such a game restores those labels in the trace metadata.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::boloop::{GameMode, Source, Trace, TraceMeta};
use crate::testfns::{FunctionId, FUNCTION_COUNT, MAX_SCORE};
use crate::{Error, Point2, Result};

/// Conventional extension of trace files.
pub const TRACE_FILE_EXTENSION: &str = "jsonl";

const MACHINE_PREFIX: &str = "machine:";

/// One click of one game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameRecord {
    pub user_id: String,
    pub function_id: usize,
    pub mode: u8,
    /// UTC milliseconds; identifies the game together with `user_id`.
    pub game_end_timestamp: i64,
    /// 1-based and dense within a game.
    pub click_index: usize,
    pub x1: f64,
    pub x2: f64,
    pub score: f64,
}

/// Rounds to 9 significant digits.
pub fn quantize(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    format!("{v:.8e}").parse().expect("formatted float parses")
}

/// Key of a game: `(user_id, game_end_timestamp)`.
pub type GameKey = (String, i64);

impl GameRecord {
    /// A record with quantized coordinates and score.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        user_id: impl Into<String>,
        function: FunctionId,
        mode: GameMode,
        game_end_timestamp: i64,
        click_index: usize,
        x: Point2,
        score: f64,
    ) -> Self {
        Self {
            user_id: user_id.into(),
            function_id: function.index(),
            mode: mode.into(),
            game_end_timestamp,
            click_index,
            x1: quantize(x.x1),
            x2: quantize(x.x2),
            score: quantize(score),
        }
    }

    pub fn key(&self) -> GameKey {
        (self.user_id.clone(), self.game_end_timestamp)
    }

    pub fn point(&self) -> Point2 {
        Point2::new(self.x1, self.x2)
    }

    /// Field-range checks that need no other records.
    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(Error::Validation(what));
        if self.user_id.is_empty() {
            return bad("empty user_id".into());
        }
        if self.function_id >= FUNCTION_COUNT {
            return bad(format!("function_id {} out of range", self.function_id));
        }
        GameMode::try_from(self.mode)?;
        if self.click_index == 0 {
            return bad("click_index is 1-based".into());
        }
        if !self.point().in_unit_square() {
            return bad(format!("coordinates ({}, {}) outside [0, 1]", self.x1, self.x2));
        }
        if !(0.0..=MAX_SCORE).contains(&self.score) {
            return bad(format!("score {} outside [0, {MAX_SCORE}]", self.score));
        }
        Ok(())
    }

    /// Canonical line, without the trailing newline.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("records always serialize")
    }

    /// Parses one line; `line` is its 1-based number for error messages.
    pub fn parse_line(text: &str, line: usize) -> Result<Self> {
        let mut r: GameRecord = serde_json::from_str(text).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        r.x1 = quantize(r.x1);
        r.x2 = quantize(r.x2);
        r.score = quantize(r.score);
        Ok(r)
    }
}

/// Records of a trace, numbered by observation index.
pub fn records_of(trace: &Trace) -> Vec<GameRecord> {
    let m = &trace.meta;
    trace
        .observations
        .iter()
        .map(|o| {
            GameRecord::new(
                m.user_id.clone(),
                m.function,
                m.mode,
                m.game_end_timestamp,
                o.index,
                o.x,
                o.y,
            )
        })
        .collect()
}

/// Builds a trace from the records of one game, sorted by click index.
pub fn trace_of(records: &[GameRecord]) -> Result<Trace> {
    let first = records
        .first()
        .ok_or_else(|| Error::Usage("a trace needs at least one record".into()))?;
    let mut sorted: Vec<&GameRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.click_index);
    let (source, surrogate, acquisition, seed) = parse_user_id(&first.user_id);
    let mut trace = Trace::new(TraceMeta {
        source,
        user_id: first.user_id.clone(),
        function: FunctionId::new(first.function_id)
            .map_err(|e| Error::Validation(e.to_string()))?,
        mode: GameMode::try_from(first.mode)?,
        game_end_timestamp: first.game_end_timestamp,
        budget: records.len(),
        surrogate,
        acquisition,
        seed,
    });
    for (i, r) in sorted.iter().enumerate() {
        if r.key() != first.key() {
            return Err(Error::Validation("records belong to different games".into()));
        }
        if r.click_index != i + 1 {
            return Err(Error::Validation(format!(
                "game {}@{} is missing click {}",
                r.user_id,
                r.game_end_timestamp,
                i + 1
            )));
        }
        trace.push(r.point(), r.score);
    }
    Ok(trace)
}

type MachineLabels = (Source, Option<String>, Option<String>, Option<u64>);

fn parse_user_id(user_id: &str) -> MachineLabels {
    let Some(rest) = user_id.strip_prefix(MACHINE_PREFIX) else {
        return (Source::Human, None, None, None);
    };
    let mut parts = rest.splitn(2, ':');
    let surrogate = parts.next().map(str::to_string);
    let (acquisition, seed) = match parts.next().and_then(|r| r.rsplit_once(':')) {
        Some((acq, seed)) => (Some(acq.to_string()), seed.parse().ok()),
        None => (None, None),
    };
    (Source::Machine, surrogate, acquisition, seed)
}

/// In-memory index of records, optionally mirrored to an append-only file.
#[derive(Debug, Default)]
pub struct GameStore {
    games: BTreeMap<GameKey, Vec<GameRecord>>,
    file: Option<BufWriter<File>>,
    path: Option<PathBuf>,
}

impl GameStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Opens (or creates) a store backed by `path`, loading existing
    /// records.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut store = Self::new();
        if path.exists() {
            store.import_all(BufReader::new(File::open(path)?))?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        store.file = Some(BufWriter::new(file));
        store.path = Some(path.to_path_buf());
        Ok(store)
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn append_record(&mut self, r: GameRecord) -> Result<()> {
        self.append_many(vec![r]).map_err(|(_, e)| e)
    }

    /// Validates every record against the store and the earlier records of
    /// the batch, then appends all of them. On failure nothing is appended
    /// and the index of the offending record is returned.
    fn append_many(&mut self, records: Vec<GameRecord>) -> std::result::Result<(), (usize, Error)> {
        let mut added: BTreeMap<GameKey, Vec<&GameRecord>> = BTreeMap::new();
        for (i, r) in records.iter().enumerate() {
            r.validate().map_err(|e| (i, e))?;
            let key = r.key();
            let existing = self.games.get(&key).map_or(&[][..], Vec::as_slice);
            let pending = added.entry(key).or_default();
            let count = existing.len() + pending.len();
            if r.click_index <= count {
                return Err((
                    i,
                    Error::Conflict(format!(
                        "click {} of game {}@{} already stored",
                        r.click_index, r.user_id, r.game_end_timestamp
                    )),
                ));
            }
            if r.click_index != count + 1 {
                return Err((
                    i,
                    Error::Validation(format!(
                        "click {} of game {}@{} skips click {}",
                        r.click_index,
                        r.user_id,
                        r.game_end_timestamp,
                        count + 1
                    )),
                ));
            }
            if let Some(head) = existing.first().or(pending.first().copied()) {
                if head.function_id != r.function_id || head.mode != r.mode {
                    return Err((
                        i,
                        Error::Validation(format!(
                            "game {}@{} changes function or mode",
                            r.user_id, r.game_end_timestamp
                        )),
                    ));
                }
            }
            pending.push(r);
        }
        if let Some(w) = self.file.as_mut() {
            let write = |w: &mut BufWriter<File>| -> std::io::Result<()> {
                for r in &records {
                    writeln!(w, "{}", r.to_line())?;
                }
                w.flush()?;
                w.get_ref().sync_data()
            };
            write(w).map_err(|e| (0, e.into()))?;
        }
        for r in records {
            self.games.entry(r.key()).or_default().push(r);
        }
        Ok(())
    }

    /// Appends every record of `trace`.
    pub fn append_trace(&mut self, trace: &Trace) -> Result<()> {
        self.append_many(records_of(trace)).map_err(|(_, e)| e)
    }

    pub fn load_trace(&self, user_id: &str, game_end_timestamp: i64) -> Result<Trace> {
        let records = self
            .games
            .get(&(user_id.to_string(), game_end_timestamp))
            .ok_or_else(|| Error::NotFound(format!("game {user_id}@{game_end_timestamp}")))?;
        trace_of(records)
    }

    /// Every stored game, in export order.
    pub fn traces(&self) -> Result<Vec<Trace>> {
        self.games.values().map(|r| trace_of(r)).collect()
    }

    pub fn games(&self) -> impl Iterator<Item = &GameKey> {
        self.games.keys()
    }

    pub fn record_count(&self) -> usize {
        self.games.values().map(Vec::len).sum()
    }

    pub fn export_all<W: Write>(&self, mut out: W) -> Result<()> {
        for r in self.games.values().flatten() {
            writeln!(out, "{}", r.to_line())?;
        }
        out.flush()?;
        Ok(())
    }

    /// Parses and appends every line of `input`; blank lines are skipped.
    /// Either all records are appended or none. Returns the record count.
    pub fn import_all<R: BufRead>(&mut self, input: R) -> Result<usize> {
        let mut records = Vec::new();
        let mut lines = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(GameRecord::parse_line(&line, i + 1)?);
            lines.push(i + 1);
        }
        let n = records.len();
        self.append_many(records).map_err(|(i, e)| Error::Parse {
            line: lines.get(i).copied().unwrap_or(0),
            message: e.to_string(),
        })?;
        Ok(n)
    }
}

/// Writes `traces` to `path` in the line format.
pub fn write_traces(path: impl AsRef<Path>, traces: &[Trace]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for t in traces {
        for r in records_of(t) {
            writeln!(out, "{}", r.to_line())?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads every game in a trace file.
pub fn read_traces(path: impl AsRef<Path>) -> Result<Vec<Trace>> {
    let mut store = GameStore::new();
    store.import_all(BufReader::new(File::open(path)?))?;
    store.traces()
}
