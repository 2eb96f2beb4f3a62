//! Session state machine, independent of the transport.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use activesearch_core::boloop::{cumulative_regret, simple_regret, GameMode, Source, Trace, TraceMeta};
use activesearch_core::gamestore::{quantize, GameStore};
use activesearch_core::seed::rng_from_seed;
use activesearch_core::testfns::{evaluate, optimum, FunctionId, FUNCTION_COUNT, MAX_SCORE};
use activesearch_core::Point2;
use rand::RngExt;
use serde::Serialize;

use crate::error::ServiceError;

pub const DEFAULT_BUDGET: usize = 20;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30 * 60);

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Clicks per game.
    pub budget: usize,
    /// Inactivity after which a session finishes on its own.
    pub session_timeout: Duration,
    /// Append-only trace file; `None` keeps games in memory only.
    pub store_path: Option<PathBuf>,
    /// Seed of the function draw; `None` draws from the OS.
    pub seed: Option<u64>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            budget: DEFAULT_BUDGET,
            session_timeout: DEFAULT_TIMEOUT,
            store_path: None,
            seed: None,
        }
    }
}

/// Milliseconds since the Unix epoch.
pub trait Clock: Send + Sync {
    fn now_ms(&self) -> i64;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> i64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as i64)
            .unwrap_or(0)
    }
}

/// A clock that only moves when told to.
#[derive(Debug, Default)]
pub struct ManualClock(AtomicI64);

impl ManualClock {
    pub fn new(start_ms: i64) -> Self {
        Self(AtomicI64::new(start_ms))
    }

    pub fn advance(&self, d: Duration) {
        self.0.fetch_add(d.as_millis() as i64, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now_ms(&self) -> i64 {
        self.0.load(Ordering::SeqCst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionState {
    Active,
    Finished,
}

/// One scored click as shown to the player.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Click {
    pub click_index: usize,
    pub x1: f64,
    pub x2: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionDescriptor {
    pub session_id: String,
    pub user_id: String,
    pub mode: u8,
    pub budget: usize,
    pub clicks_remaining: usize,
    /// The best reachable score; only in mode 2.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClickResponse {
    pub click_index: usize,
    pub x1: f64,
    pub x2: f64,
    pub score: f64,
    pub clicks_remaining: usize,
    pub history: Vec<Click>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub session_id: String,
    pub user_id: String,
    pub mode: u8,
    pub function_id: usize,
    pub function: String,
    pub game_end_timestamp: i64,
    pub clicks: usize,
    pub best_score: f64,
    pub simple_regret: f64,
    pub cumulative_regret: f64,
}

/// Full session view. `summary` (and with it the function) appears only
/// once the game is finished.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionView {
    pub session_id: String,
    pub user_id: String,
    pub mode: u8,
    pub budget: usize,
    pub clicks_remaining: usize,
    pub state: SessionState,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_value: Option<f64>,
    pub history: Vec<Click>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<Summary>,
}

struct Session {
    id: String,
    user_id: String,
    function: FunctionId,
    mode: GameMode,
    budget: usize,
    clicks: Vec<Click>,
    last_activity_ms: i64,
    /// Set once finished. A session that expires without clicks finishes
    /// with no summary.
    finished: Option<Option<Summary>>,
}

impl Session {
    fn remaining(&self) -> usize {
        self.budget - self.clicks.len()
    }

    fn target_value(&self) -> Option<f64> {
        (self.mode == GameMode::KnownMaximum).then_some(MAX_SCORE)
    }

    fn descriptor(&self) -> SessionDescriptor {
        SessionDescriptor {
            session_id: self.id.clone(),
            user_id: self.user_id.clone(),
            mode: self.mode.into(),
            budget: self.budget,
            clicks_remaining: self.remaining(),
            target_value: self.target_value(),
        }
    }

    fn view(&self) -> SessionView {
        SessionView {
            session_id: self.id.clone(),
            user_id: self.user_id.clone(),
            mode: self.mode.into(),
            budget: self.budget,
            clicks_remaining: self.remaining(),
            state: if self.finished.is_some() {
                SessionState::Finished
            } else {
                SessionState::Active
            },
            target_value: self.target_value(),
            history: self.clicks.clone(),
            summary: self.finished.clone().flatten(),
        }
    }

    fn trace(&self, game_end_timestamp: i64) -> Trace {
        let mut t = Trace::new(TraceMeta {
            source: Source::Human,
            user_id: self.user_id.clone(),
            function: self.function,
            mode: self.mode,
            game_end_timestamp,
            budget: self.budget,
            surrogate: None,
            acquisition: None,
            seed: None,
        });
        for c in &self.clicks {
            t.push(Point2::new(c.x1, c.x2), c.score);
        }
        t
    }
}

/// All live sessions plus the store finished games go to.
pub struct GameService {
    config: ServiceConfig,
    clock: Arc<dyn Clock>,
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
    store: Mutex<GameStore>,
    rng: Mutex<rand_chacha::ChaCha8Rng>,
}

type SessionRef = Arc<Mutex<Session>>;

impl GameService {
    pub fn new(config: ServiceConfig) -> Result<Self, ServiceError> {
        Self::with_clock(config, Arc::new(SystemClock))
    }

    pub fn with_clock(config: ServiceConfig, clock: Arc<dyn Clock>) -> Result<Self, ServiceError> {
        if config.budget == 0 {
            return Err(ServiceError::Validation("budget must be at least 1".into()));
        }
        let store = match &config.store_path {
            Some(p) => GameStore::open(p)?,
            None => GameStore::new(),
        };
        let seed = config.seed.unwrap_or_else(rand::random);
        Ok(Self {
            config,
            clock,
            sessions: Mutex::new(HashMap::new()),
            store: Mutex::new(store),
            rng: Mutex::new(rng_from_seed(seed)),
        })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn create_session(&self, user_id: &str, mode: u8) -> Result<SessionDescriptor, ServiceError> {
        let mode = GameMode::try_from(mode).map_err(|e| ServiceError::Validation(e.to_string()))?;
        let user_id = user_id.trim();
        if user_id.is_empty() {
            return Err(ServiceError::Validation("user_id must not be empty".into()));
        }
        if user_id.starts_with("machine:") {
            return Err(ServiceError::Validation("user ids starting with `machine:` are reserved".into()));
        }
        let f = {
            let mut rng = self.rng.lock().unwrap();
            FunctionId::new(rng.random_range(0..FUNCTION_COUNT)).expect("index in range")
        };
        let session = Session {
            id: uuid::Uuid::new_v4().simple().to_string(),
            user_id: user_id.to_string(),
            function: f,
            mode,
            budget: self.config.budget,
            clicks: Vec::new(),
            last_activity_ms: self.clock.now_ms(),
            finished: None,
        };
        let descriptor = session.descriptor();
        self.sessions
            .lock()
            .unwrap()
            .insert(session.id.clone(), Arc::new(Mutex::new(session)));
        Ok(descriptor)
    }

    fn session(&self, id: &str) -> Result<SessionRef, ServiceError> {
        self.sessions
            .lock()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("session {id}")))
    }

    pub fn click(&self, id: &str, x1: f64, x2: f64) -> Result<ClickResponse, ServiceError> {
        let session = self.session(id)?;
        let mut s = session.lock().unwrap();
        self.expire_if_idle(&mut s)?;
        if s.finished.is_some() {
            return Err(ServiceError::State("session is finished".into()));
        }
        if s.remaining() == 0 {
            return Err(ServiceError::State("click budget exhausted".into()));
        }
        let p = Point2::new(quantize(x1), quantize(x2));
        let score = evaluate(s.function, p).map_err(|e| ServiceError::Validation(e.to_string()))?;
        let click = Click {
            click_index: s.clicks.len() + 1,
            x1: p.x1,
            x2: p.x2,
            score: quantize(score),
        };
        s.clicks.push(click.clone());
        s.last_activity_ms = self.clock.now_ms();
        Ok(ClickResponse {
            click_index: click.click_index,
            x1: click.x1,
            x2: click.x2,
            score: click.score,
            clicks_remaining: s.remaining(),
            history: s.clicks.clone(),
        })
    }

    pub fn state(&self, id: &str) -> Result<SessionView, ServiceError> {
        let session = self.session(id)?;
        let mut s = session.lock().unwrap();
        self.expire_if_idle(&mut s)?;
        Ok(s.view())
    }

    /// Finishes the game and persists it. Repeated calls return the same
    /// summary.
    pub fn finish(&self, id: &str) -> Result<Summary, ServiceError> {
        let session = self.session(id)?;
        let mut s = session.lock().unwrap();
        self.expire_if_idle(&mut s)?;
        match &s.finished {
            Some(Some(summary)) => return Ok(summary.clone()),
            Some(None) => return Err(ServiceError::State("session expired without clicks".into())),
            None => {}
        }
        if s.clicks.is_empty() {
            return Err(ServiceError::State("cannot finish a game with no clicks".into()));
        }
        let summary = self.persist(&mut s, self.clock.now_ms())?;
        Ok(summary)
    }

    fn persist(&self, s: &mut Session, now_ms: i64) -> Result<Summary, ServiceError> {
        let mut store = self.store.lock().unwrap();
        // Game ids must be unique per user; two games finishing in the same
        // millisecond take consecutive stamps.
        let mut ts = now_ms;
        while store.load_trace(&s.user_id, ts).is_ok() {
            ts += 1;
        }
        let trace = s.trace(ts);
        store.append_trace(&trace)?;
        drop(store);
        let f_star = optimum(s.function).1;
        let summary = Summary {
            session_id: s.id.clone(),
            user_id: s.user_id.clone(),
            mode: s.mode.into(),
            function_id: s.function.index(),
            function: s.function.name().to_string(),
            game_end_timestamp: ts,
            clicks: trace.len(),
            best_score: trace.best_score().expect("non-empty"),
            simple_regret: simple_regret(&trace, f_star)?,
            cumulative_regret: cumulative_regret(&trace, f_star)?,
        };
        s.finished = Some(Some(summary.clone()));
        Ok(summary)
    }

    fn expire_if_idle(&self, s: &mut Session) -> Result<(), ServiceError> {
        if s.finished.is_some() {
            return Ok(());
        }
        let idle = self.clock.now_ms() - s.last_activity_ms;
        if idle < self.config.session_timeout.as_millis() as i64 {
            return Ok(());
        }
        if s.clicks.is_empty() {
            s.finished = Some(None);
        } else {
            self.persist(s, self.clock.now_ms())?;
        }
        Ok(())
    }

    /// Finishes idle sessions and forgets finished ones that have been idle
    /// for another timeout period. Returns the number of sessions expired.
    pub fn sweep(&self) -> usize {
        let sessions: Vec<(String, SessionRef)> = self
            .sessions
            .lock()
            .unwrap()
            .iter()
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        let now = self.clock.now_ms();
        let timeout = self.config.session_timeout.as_millis() as i64;
        let mut expired = 0;
        let mut forget = Vec::new();
        for (id, session) in sessions {
            let mut s = session.lock().unwrap();
            let was_active = s.finished.is_none();
            if self.expire_if_idle(&mut s).is_ok() && was_active && s.finished.is_some() {
                expired += 1;
            }
            if s.finished.is_some() && now - s.last_activity_ms >= 2 * timeout {
                forget.push(id);
            }
        }
        let mut map = self.sessions.lock().unwrap();
        for id in forget {
            map.remove(&id);
        }
        expired
    }

    /// The persisted trace of a finished game.
    pub fn stored_trace(&self, user_id: &str, game_end_timestamp: i64) -> Result<Trace, ServiceError> {
        Ok(self.store.lock().unwrap().load_trace(user_id, game_end_timestamp)?)
    }

    /// Writes every stored record in the line format.
    pub fn export<W: std::io::Write>(&self, out: W) -> Result<(), ServiceError> {
        Ok(self.store.lock().unwrap().export_all(out)?)
    }
}
