//! Session-multiplexing environment behind a JSON request/reply interface.
//!
//! [`Environment::handle_line`] is the single entry point used by both the
//! TCP server and the C ABI.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde_json::{json, Value};

pub mod protocol;
pub mod server;

pub use protocol::{
    ErrorCode, Reply, Request, ServiceError, StepResult, PROTOCOL_SCHEMA, PROTOCOL_VERSION,
};
pub use server::serve;

use crate::config::{ConfigError, RunConfig};
use crate::db::DatabaseRegistry;
use crate::episode::{Episode, EpisodeConfig, EpisodeError};
use crate::reward::{score_trajectory, GoldReference, RewardWeights};
use crate::task::DialogueTask;
use protocol::{CloseReply, ResetReply};

struct Session {
    episode: Option<Episode>,
    gold: Arc<GoldReference>,
    touched: Instant,
}

pub struct Environment {
    registry: DatabaseRegistry,
    tasks: HashMap<String, DialogueTask>,
    weights: RewardWeights,
    episode: EpisodeConfig,
    ttl: Duration,
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
    golds: Mutex<HashMap<String, Arc<GoldReference>>>,
    counter: AtomicU64,
}

impl std::fmt::Debug for Environment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Environment")
            .field("tasks", &self.tasks.len())
            .field("ttl", &self.ttl)
            .finish()
    }
}

fn episode_error(e: EpisodeError) -> ServiceError {
    let code = match &e {
        EpisodeError::IllegalTransition { .. } => ErrorCode::IllegalTransition,
        EpisodeError::InteractionBudgetExceeded(_) => ErrorCode::BudgetExceeded,
        EpisodeError::AlreadyTerminal => ErrorCode::UnknownSession,
        _ => ErrorCode::Runtime,
    };
    ServiceError::new(code, e.to_string())
}

impl Environment {
    pub fn new(
        registry: DatabaseRegistry,
        tasks: Vec<DialogueTask>,
        weights: RewardWeights,
        episode: EpisodeConfig,
        ttl: Duration,
    ) -> Self {
        Self {
            registry,
            tasks: tasks.into_iter().map(|t| (t.id(), t)).collect(),
            weights,
            episode,
            ttl,
            sessions: Mutex::new(HashMap::new()),
            golds: Mutex::new(HashMap::new()),
            counter: AtomicU64::new(0),
        }
    }

    pub fn from_config(cfg: &RunConfig) -> Result<Self, ConfigError> {
        Ok(Self::new(
            cfg.registry()?,
            cfg.load_tasks()?,
            cfg.rewards,
            cfg.episode,
            Duration::from_secs(cfg.service.session_ttl_secs),
        ))
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().expect("sessions lock").len()
    }

    /// Drops sessions idle for longer than the ttl.
    pub fn expire_idle(&self) -> usize {
        let now = Instant::now();
        let mut sessions = self.sessions.lock().expect("sessions lock");
        let before = sessions.len();
        sessions.retain(|_, s| {
            s.try_lock()
                .map_or(true, |s| now.duration_since(s.touched) <= self.ttl)
        });
        before - sessions.len()
    }

    /// Answers one request line with one reply line. Never panics on input.
    pub fn handle_line(&self, line: &str) -> String {
        let reply = match serde_json::from_str::<Value>(line) {
            Ok(v) => self.handle_value(v),
            Err(e) => error_value(
                None,
                &ServiceError::new(ErrorCode::ParseError, e.to_string()),
            ),
        };
        serde_json::to_string(&reply).expect("reply serializes")
    }

    pub fn handle_value(&self, mut value: Value) -> Value {
        let id = value.as_object_mut().and_then(|o| o.remove("id"));
        match self.parse_envelope(value).and_then(|r| self.handle(r)) {
            Ok(reply) => {
                let mut out = serde_json::to_value(reply).expect("reply serializes");
                let obj = out.as_object_mut().expect("reply is an object");
                obj.insert("v".into(), json!(PROTOCOL_VERSION));
                obj.insert("ok".into(), json!(true));
                if let Some(id) = id {
                    obj.insert("id".into(), id);
                }
                out
            }
            Err(e) => error_value(id, &e),
        }
    }

    fn parse_envelope(&self, mut value: Value) -> Result<Request, ServiceError> {
        let obj = value.as_object_mut().ok_or_else(|| {
            ServiceError::new(ErrorCode::BadRequest, "request must be a JSON object")
        })?;
        match obj.remove("v") {
            Some(Value::Number(n)) if n.as_u64() == Some(PROTOCOL_VERSION as u64) => {}
            Some(other) => {
                return Err(ServiceError::new(
                    ErrorCode::UnsupportedVersion,
                    format!("unsupported version {other}"),
                ))
            }
            None => {
                return Err(ServiceError::new(
                    ErrorCode::BadRequest,
                    "missing field `v`",
                ))
            }
        }
        serde_json::from_value(value)
            .map_err(|e| ServiceError::new(ErrorCode::BadRequest, e.to_string()))
    }

    pub fn handle(&self, request: Request) -> Result<Reply, ServiceError> {
        self.expire_idle();
        match request {
            Request::Reset { task_id, sample } => self.reset(&task_id, sample).map(Reply::Reset),
            Request::Step {
                session,
                model_text,
            } => self.with_session(&session, |ep| {
                ep.step(&model_text).map(|r| (r.observation, r.violations))
            }),
            Request::Action { session, action } => self.with_session(&session, |ep| {
                let before = ep.violations().len();
                let obs = ep.apply_action(action)?;
                Ok((obs, ep.violations().split_off(before)))
            }),
            Request::Close { session } => {
                let removed = self
                    .sessions
                    .lock()
                    .expect("sessions lock")
                    .remove(&session);
                match removed {
                    Some(_) => Ok(Reply::Close(CloseReply {
                        session,
                        closed: true,
                    })),
                    None => Err(unknown_session(&session)),
                }
            }
        }
    }

    fn gold(&self, task: &DialogueTask) -> Result<Arc<GoldReference>, ServiceError> {
        let id = task.id();
        if let Some(g) = self.golds.lock().expect("golds lock").get(&id) {
            return Ok(g.clone());
        }
        let gold = GoldReference::compute(task, &self.registry, self.episode.exec)
            .map_err(|e| ServiceError::new(ErrorCode::Runtime, e.to_string()))?;
        let gold = Arc::new(gold);
        self.golds
            .lock()
            .expect("golds lock")
            .insert(id, gold.clone());
        Ok(gold)
    }

    fn reset(&self, task_id: &str, sample: u32) -> Result<ResetReply, ServiceError> {
        let task = self.tasks.get(task_id).ok_or_else(|| {
            ServiceError::new(ErrorCode::UnknownTask, format!("unknown task {task_id}"))
        })?;
        let gold = self.gold(task)?;
        let episode =
            Episode::new(task, &self.registry, self.episode, sample).map_err(episode_error)?;
        let observation = episode.prompt().to_string();
        let n = self.counter.fetch_add(1, Ordering::Relaxed);
        let session = format!("s{n:08x}");
        let state = Session {
            episode: Some(episode),
            gold,
            touched: Instant::now(),
        };
        self.sessions
            .lock()
            .expect("sessions lock")
            .insert(session.clone(), Arc::new(Mutex::new(state)));
        Ok(ResetReply {
            session,
            task_id: task_id.to_string(),
            observation,
        })
    }

    fn with_session<F>(&self, id: &str, f: F) -> Result<Reply, ServiceError>
    where
        F: FnOnce(
            &mut Episode,
        )
            -> Result<(Option<String>, Vec<crate::episode::Violation>), EpisodeError>,
    {
        let handle = self
            .sessions
            .lock()
            .expect("sessions lock")
            .get(id)
            .cloned()
            .ok_or_else(|| unknown_session(id))?;
        let mut session = handle.lock().expect("session lock");
        session.touched = Instant::now();
        let episode = session
            .episode
            .as_mut()
            .ok_or_else(|| unknown_session(id))?;
        let (observation, violations) = f(episode).map_err(episode_error)?;
        let mut result = StepResult {
            session: id.to_string(),
            observation,
            terminal: episode.is_terminal(),
            termination: episode.termination(),
            violations,
            reward_breakdown: None,
            trajectory_id: None,
            trajectory: None,
        };
        if result.terminal {
            let traj = session
                .episode
                .take()
                .expect("episode present")
                .into_trajectory();
            result.reward_breakdown = Some(score_trajectory(&traj, &session.gold, &self.weights));
            result.trajectory_id = Some(traj.id.clone());
            result.trajectory = Some(traj);
            drop(session);
            self.sessions.lock().expect("sessions lock").remove(id);
        }
        Ok(Reply::Step(Box::new(result)))
    }
}

fn unknown_session(id: &str) -> ServiceError {
    ServiceError::new(
        ErrorCode::UnknownSession,
        format!("unknown or finished session {id}"),
    )
}

fn error_value(id: Option<Value>, e: &ServiceError) -> Value {
    let mut out = json!({ "v": PROTOCOL_VERSION, "ok": false, "error": e });
    if let Some(id) = id {
        out["id"] = id;
    }
    out
}
