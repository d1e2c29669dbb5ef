//! TOML run configuration shared by the CLI, the service and the FFI.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::db::DatabaseRegistry;
use crate::episode::EpisodeConfig;
use crate::pipeline::PipelineConfig;
use crate::policy::remote::{RemoteConfig, RemotePolicy};
use crate::policy::scripted::{ScriptedMode, ScriptedPolicy};
use crate::policy::Policy;
use crate::reward::RewardWeights;
use crate::task::{load_tasks, DialogueTask};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {reason}")]
    Read { path: PathBuf, reason: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("{0}")]
    Load(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Directory holding `manifest.json` and the database files.
    pub registry: PathBuf,
    /// Task JSONL files, concatenated in order.
    #[serde(default)]
    pub tasks: Vec<PathBuf>,
    /// Journal root for collection runs.
    #[serde(default = "default_journal")]
    pub journal: PathBuf,
    #[serde(default)]
    pub rewards: RewardWeights,
    #[serde(default)]
    pub episode: EpisodeConfig,
    #[serde(default)]
    pub pipeline: PipelineConfig,
    #[serde(default)]
    pub policy: PolicyConfig,
    #[serde(default)]
    pub service: ServiceConfig,
}

fn default_journal() -> PathBuf {
    PathBuf::from("journal")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicyConfig {
    Scripted {
        /// JSONL of `{key, continuations}`.
        fixtures: PathBuf,
        /// Continuation for unknown conversations; unknown keys fail without it.
        #[serde(default)]
        fallback: Option<String>,
    },
    Remote(RemoteConfig),
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig::Remote(RemoteConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServiceConfig {
    pub addr: String,
    /// Idle seconds before a session is dropped.
    pub session_ttl_secs: u64,
    /// Connections served concurrently.
    pub workers: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            addr: "127.0.0.1:7878".into(),
            session_ttl_secs: 600,
            workers: 8,
        }
    }
}

impl RunConfig {
    pub fn new(registry: impl Into<PathBuf>) -> Self {
        Self {
            registry: registry.into(),
            tasks: Vec::new(),
            journal: default_journal(),
            rewards: RewardWeights::default(),
            episode: EpisodeConfig::default(),
            pipeline: PipelineConfig::default(),
            policy: PolicyConfig::default(),
            service: ServiceConfig::default(),
        }
    }

    /// Parses and validates; relative paths resolve against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut cfg: RunConfig =
            toml::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        cfg.rebase(base);
        cfg.pipeline.collect.episode = cfg.episode;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    fn rebase(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.registry);
        join(&mut self.journal);
        self.tasks.iter_mut().for_each(join);
        if let PolicyConfig::Scripted { fixtures, .. } = &mut self.policy {
            join(fixtures);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if !self.rewards.is_valid() {
            return bad("reward weights must be finite and non-negative");
        }
        let ep = &self.episode;
        if ep.max_turns == 0
            || ep.max_response_units == 0
            || ep.exec.max_rows == 0
            || ep.exec.timeout_ms == 0
        {
            return bad("episode limits must be positive");
        }
        let p = &self.pipeline;
        if p.bin_size == 0 || p.collect.rollouts == 0 || p.collect.workers == 0 {
            return bad("bin_size, rollouts and workers must be positive");
        }
        if !(p.collect.temperature.is_finite() && p.collect.temperature >= 0.0) {
            return bad("temperature must be finite and non-negative");
        }
        if self.service.workers == 0 || self.service.session_ttl_secs == 0 {
            return bad("service workers and session ttl must be positive");
        }
        Ok(())
    }

    pub fn registry(&self) -> Result<DatabaseRegistry, ConfigError> {
        DatabaseRegistry::load(&self.registry).map_err(|e| ConfigError::Load(e.to_string()))
    }

    pub fn load_tasks(&self) -> Result<Vec<DialogueTask>, ConfigError> {
        let mut out = Vec::new();
        for path in &self.tasks {
            out.extend(load_tasks(path).map_err(|e| ConfigError::Load(e.to_string()))?);
        }
        Ok(out)
    }

    /// Remote endpoints pick up `POLICY_URL` and `POLICY_TOKEN` from the environment.
    pub fn policy(&self) -> Result<Arc<dyn Policy>, ConfigError> {
        let load = |e: crate::policy::PolicyError| ConfigError::Load(e.to_string());
        Ok(match &self.policy {
            PolicyConfig::Scripted { fixtures, fallback } => {
                let mode = fallback
                    .clone()
                    .map_or(ScriptedMode::Strict, ScriptedMode::Fallback);
                Arc::new(ScriptedPolicy::load(fixtures, mode).map_err(load)?)
            }
            PolicyConfig::Remote(remote) => {
                let remote = remote.clone().from_env();
                if remote.url.is_empty() {
                    return Err(ConfigError::Invalid(
                        "remote policy needs a url or POLICY_URL".into(),
                    ));
                }
                Arc::new(RemotePolicy::new(remote).map_err(load)?)
            }
        })
    }
}
