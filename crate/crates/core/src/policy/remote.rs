use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{
    apply_stop, truncate_units, usage_units, FinishReason, GenerationRequest, GenerationResponse,
    Policy, PolicyError, Usage,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RemoteConfig {
    /// Endpoint accepting a JSON generation request by POST.
    pub url: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub token: Option<String>,
    pub timeout_ms: u64,
    pub max_inflight: usize,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            url: String::new(),
            token: None,
            timeout_ms: 120_000,
            max_inflight: 8,
        }
    }
}

impl RemoteConfig {
    /// Reads `POLICY_URL` and `POLICY_TOKEN`, keeping other fields.
    pub fn from_env(self) -> Self {
        Self {
            url: std::env::var("POLICY_URL").unwrap_or(self.url),
            token: std::env::var("POLICY_TOKEN").ok().or(self.token),
            ..self
        }
    }
}

/// Reply body: `{text}` or a chat-completions `choices` list.
#[derive(Debug, Deserialize)]
struct WireResponse {
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    choices: Vec<WireChoice>,
}

#[derive(Debug, Deserialize)]
struct WireChoice {
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    message: Option<WireMessage>,
}

#[derive(Debug, Deserialize)]
struct WireMessage {
    content: String,
}

impl WireResponse {
    fn into_text(self) -> Option<String> {
        self.text.or_else(|| {
            let c = self.choices.into_iter().next()?;
            c.text.or(c.message.map(|m| m.content))
        })
    }
}

fn request_body(req: &GenerationRequest) -> serde_json::Value {
    serde_json::json!({
        "messages": req.messages,
        "temperature": req.temperature,
        "max_tokens": req.max_new_units,
        "seed": req.seed,
        "stop": req.stop,
    })
}

/// HTTP policy server client with bounded concurrency and one retry.
#[derive(Debug)]
pub struct RemotePolicy {
    config: RemoteConfig,
    agent: ureq::Agent,
    inflight: Mutex<usize>,
    freed: Condvar,
}

impl RemotePolicy {
    pub fn new(config: RemoteConfig) -> Result<Self, PolicyError> {
        if config.url.is_empty() {
            return Err(PolicyError::Unavailable(
                "no policy URL configured (set POLICY_URL)".into(),
            ));
        }
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build();
        Ok(Self {
            config,
            agent,
            inflight: Mutex::new(0),
            freed: Condvar::new(),
        })
    }

    fn post(&self, req: &GenerationRequest) -> Result<String, String> {
        let mut call = self.agent.post(&self.config.url);
        if let Some(t) = &self.config.token {
            call = call.set("Authorization", &format!("Bearer {t}"));
        }
        let resp = call
            .send_json(request_body(req))
            .map_err(|e| e.to_string())?;
        let wire: WireResponse = resp
            .into_json()
            .map_err(|e| format!("malformed response: {e}"))?;
        wire.into_text()
            .ok_or_else(|| "malformed response: no text".to_string())
    }
}

impl Policy for RemotePolicy {
    fn generate(&self, req: &GenerationRequest) -> Result<GenerationResponse, PolicyError> {
        {
            let mut n = self.inflight.lock().expect("inflight lock");
            while *n >= self.config.max_inflight.max(1) {
                n = self.freed.wait(n).expect("inflight lock");
            }
            *n += 1;
        }
        let result = self.post(req).or_else(|first| {
            log::warn!("policy request failed, retrying once: {first}");
            self.post(req)
        });
        *self.inflight.lock().expect("inflight lock") -= 1;
        self.freed.notify_one();

        let raw = result.map_err(PolicyError::Unavailable)?;
        let (text, stopped) = apply_stop(&raw, &req.stop);
        let cut = truncate_units(text, req.max_new_units);
        let finish = if cut.len() < text.len() {
            FinishReason::Length
        } else if stopped {
            FinishReason::Stop
        } else {
            FinishReason::End
        };
        let usage = Usage {
            prompt_units: req.messages.iter().map(|m| usage_units(&m.content)).sum(),
            completion_units: usage_units(cut),
        };
        Ok(GenerationResponse {
            text: cut.to_string(),
            finish,
            usage,
        })
    }
}
