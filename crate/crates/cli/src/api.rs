//! In-memory session store behind the HTTP API, plus the JSON views and the
//! error mapping it returns. Everything here is synchronous so it can be
//! exercised without a server.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use cascade_core::driver::TraceEvent;
use cascade_core::io::{FaceReport, FinalReport, ProblemFile, VertexReport};
use cascade_core::{DmSlacks, Error, Phase, RGeometry, RProblem, RSession, RVector, Rational, SessionConfig, SortingChoice};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use uuid::Uuid;

/// HTTP-agnostic API failure.
#[derive(Clone, Debug, PartialEq)]
pub struct ApiError {
    pub status: u16,
    pub kind: String,
    pub message: String,
    pub detail: Option<Value>,
}

impl ApiError {
    pub fn not_found(id: &str) -> Self {
        Self { status: 404, kind: "NotFound".into(), message: format!("no session `{id}`"), detail: None }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self { status: 400, kind: "ParseError".into(), message: message.into(), detail: None }
    }

    pub fn body(&self) -> Value {
        let mut body = json!({ "error": self.kind, "message": self.message });
        if let Some(detail) = &self.detail {
            body["detail"] = detail.clone();
        }
        body
    }
}

impl From<Error> for ApiError {
    fn from(err: Error) -> Self {
        let root = err.root();
        let status = match root {
            Error::WrongPhase { .. } => 409,
            Error::Parse(_) | Error::Numeric(cascade_core::NumericError::Parse(_)) => 400,
            _ => 422,
        };
        let detail = match root {
            Error::DmBoundsViolation { variable, side, value, limit, excess } => Some(json!({
                "variable": format!("x{}", variable + 1),
                "index": variable + 1,
                "side": side,
                "value": value,
                "limit": limit,
                "excess": excess,
            })),
            Error::NonPositiveSlack { side, component, value } => Some(json!({
                "side": side,
                "component": component + 1,
                "value": value,
            })),
            Error::WrongPhase { expected, found, .. } => Some(json!({ "expected": expected, "found": found })),
            _ => None,
        };
        Self { status, kind: root.kind().into(), message: err.to_string(), detail }
    }
}

pub type ApiResult<T> = std::result::Result<T, ApiError>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxView {
    pub l: RVector,
    pub u: RVector,
}

/// Everything the console needs to render one session.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub phase: Phase,
    pub num_levels: usize,
    /// 1-based; the level awaiting a solve or slacks.
    pub current_level: usize,
    /// Variable counts per level, in ownership order.
    pub num_vars: Vec<usize>,
    pub vertices: Vec<VertexReport<Rational>>,
    pub efficient: Vec<Vec<RVector>>,
    pub n_hat_dex: Vec<RVector>,
    pub sorting_candidates: Vec<FaceReport<Rational>>,
    pub sorting_set: Option<usize>,
    pub initial_bounds: Option<BoxView>,
    pub bounds: Option<BoxView>,
    pub compromises: Vec<RVector>,
    pub trace: Vec<TraceEvent<Rational>>,
    #[serde(rename = "final")]
    pub final_compromise: Option<FinalReport<Rational>>,
}

impl SessionView {
    pub fn of(id: &str, s: &RSession) -> Self {
        let g = s.geometry();
        let phase1 = cascade_core::io::Phase1Report::from(g);
        let to_box = |(l, u): (&RVector, &RVector)| BoxView { l: l.clone(), u: u.clone() };
        Self {
            id: id.into(),
            phase: s.phase(),
            num_levels: s.problem().num_levels(),
            current_level: s.current_level() + 1,
            num_vars: s.problem().levels().iter().map(|l| l.num_vars).collect(),
            vertices: phase1.vertices,
            efficient: phase1.efficient,
            n_hat_dex: phase1.n_hat_dex,
            sorting_candidates: phase1.maximal_faces,
            sorting_set: s.sorting_set().map(|sel| sel.index + 1),
            initial_bounds: s.initial_bounds().map(to_box),
            bounds: s.current_bounds().map(to_box),
            compromises: s.compromises().to_vec(),
            trace: s.trace().to_vec(),
            final_compromise: s.final_compromise().map(|f| FinalReport { x: f.x, objectives: f.objectives }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SortingRequest {
    /// 1-based.
    pub index: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveRequest {
    #[serde(default)]
    pub init: Option<RVector>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveResponse {
    /// 1-based level just solved.
    pub level: usize,
    pub compromise: RVector,
    pub session: SessionView,
}

struct Entry {
    session: RSession,
    last_used: Instant,
}

const GEOMETRY_CACHE_LIMIT: usize = 32;

type Phase1Artifacts = (Arc<RProblem>, Arc<RGeometry>);

/// Sessions keyed by id. The map lock is held only for lookups; each session
/// has its own lock, so calls on one session are serialized while distinct
/// sessions proceed independently.
pub struct SessionStore {
    sessions: Mutex<HashMap<String, Arc<Mutex<Entry>>>>,
    /// Phase-1 artifacts per problem document, shared across sessions.
    geometry_cache: Mutex<HashMap<String, Phase1Artifacts>>,
    idle: Option<Duration>,
}

impl Default for SessionStore {
    fn default() -> Self {
        Self::new(None)
    }
}

impl SessionStore {
    /// `idle`: sessions untouched for this long are dropped.
    pub fn new(idle: Option<Duration>) -> Self {
        Self { sessions: Mutex::new(HashMap::new()), geometry_cache: Mutex::new(HashMap::new()), idle }
    }

    pub fn idle_timeout(&self) -> Option<Duration> {
        self.idle
    }

    pub fn len(&self) -> usize {
        self.sessions.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn phase1(&self, file: &ProblemFile<Rational>) -> ApiResult<Phase1Artifacts> {
        let key = serde_json::to_string(&ProblemFile { config: Default::default(), ..file.clone() }).expect("problem serializes");
        if let Some(hit) = self.geometry_cache.lock().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let problem = Arc::new(file.to_problem()?);
        let geometry = Arc::new(problem.geometry()?);
        let mut cache = self.geometry_cache.lock().unwrap();
        if cache.len() >= GEOMETRY_CACHE_LIMIT {
            cache.clear();
        }
        cache.insert(key, (problem.clone(), geometry.clone()));
        Ok((problem, geometry))
    }

    /// Parses the problem, runs Phase 1, and opens a session awaiting the
    /// sorting-set choice.
    pub fn create(&self, file: &ProblemFile<Rational>) -> ApiResult<SessionView> {
        let (problem, geometry) = self.phase1(file)?;
        let mut config = SessionConfig::default();
        if let Some(m) = &file.config.big_m {
            config.big_m = m.clone();
        }
        config.strict_sp = file.config.strict_sp.unwrap_or(false);
        let session = RSession::new(problem, geometry, config);
        let id = Uuid::new_v4().to_string();
        let view = SessionView::of(&id, &session);
        let entry = Arc::new(Mutex::new(Entry { session, last_used: Instant::now() }));
        self.sessions.lock().unwrap().insert(id, entry);
        Ok(view)
    }

    pub fn create_from_json(&self, body: &str) -> ApiResult<SessionView> {
        let file: ProblemFile<Rational> = cascade_core::io::from_json(body)?;
        self.create(&file)
    }

    fn entry(&self, id: &str) -> ApiResult<Arc<Mutex<Entry>>> {
        let mut map = self.sessions.lock().unwrap();
        let entry = map.get(id).cloned().ok_or_else(|| ApiError::not_found(id))?;
        if let Some(idle) = self.idle {
            let expired = entry.lock().unwrap().last_used.elapsed() > idle;
            if expired {
                map.remove(id);
                return Err(ApiError::not_found(id));
            }
        }
        Ok(entry)
    }

    fn with_session<R>(&self, id: &str, f: impl FnOnce(&mut RSession) -> ApiResult<R>) -> ApiResult<R> {
        let entry = self.entry(id)?;
        let mut guard = entry.lock().unwrap();
        guard.last_used = Instant::now();
        f(&mut guard.session)
    }

    pub fn get(&self, id: &str) -> ApiResult<SessionView> {
        self.with_session(id, |s| Ok(SessionView::of(id, s)))
    }

    pub fn choose_sorting_set(&self, id: &str, req: &SortingRequest) -> ApiResult<SessionView> {
        self.with_session(id, |s| {
            s.expect_phase("choose sorting set", Phase::AwaitSortingSet)?;
            let index = req.index.checked_sub(1).ok_or(Error::InvalidSortingIndex {
                index: 0,
                available: s.geometry().compromise.maximal_faces.len(),
            })?;
            s.choose_sorting_set(SortingChoice::Index(index))?;
            Ok(SessionView::of(id, s))
        })
    }

    pub fn solve(&self, id: &str, req: &SolveRequest) -> ApiResult<SolveResponse> {
        self.with_session(id, |s| {
            let level = s.current_level() + 1;
            let compromise = s.solve_current_level(req.init.as_ref())?.clone();
            Ok(SolveResponse { level, compromise, session: SessionView::of(id, s) })
        })
    }

    pub fn apply_slacks(&self, id: &str, slacks: &DmSlacks<Rational>) -> ApiResult<SessionView> {
        self.with_session(id, |s| {
            s.apply_dm_slacks(slacks)?;
            Ok(SessionView::of(id, s))
        })
    }

    pub fn delete(&self, id: &str) -> ApiResult<()> {
        self.sessions.lock().unwrap().remove(id).map(|_| ()).ok_or_else(|| ApiError::not_found(id))
    }

    /// Drops idle sessions; returns how many were removed.
    pub fn purge_expired(&self) -> usize {
        let Some(idle) = self.idle else { return 0 };
        let mut map = self.sessions.lock().unwrap();
        let before = map.len();
        map.retain(|_, e| e.lock().map(|e| e.last_used.elapsed() <= idle).unwrap_or(false));
        before - map.len()
    }
}
