//! Blocking chat-completion client.
//!
//! Requests are `POST {"model", "messages", "temperature"}` with a bearer token
//! read from the environment variable named in [`GatewayConfig::api_key_env`].
//! The reply text is read from `choices[0].message.content`.

use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

pub const MAX_RETRIES_LIMIT: u32 = 5;
pub const BACKOFF_BASE: Duration = Duration::from_millis(500);
pub const BACKOFF_CAP: Duration = Duration::from_secs(8);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GatewayError {
    #[error("gateway config error: {0}")]
    Config(String),
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("no balanced JSON object in reply")]
    Extraction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GatewayConfig {
    pub endpoint_url: String,
    pub model_name: String,
    /// Name of the environment variable holding the API key. The key itself
    /// is never stored.
    pub api_key_env: String,
    pub timeout_secs: f64,
    pub max_retries: u32,
    pub temperature: f64,
    pub max_in_flight: usize,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            endpoint_url: "http://127.0.0.1:8000/v1/chat/completions".into(),
            model_name: "gpt-4o-mini".into(),
            api_key_env: "RELMAZE_API_KEY".into(),
            timeout_secs: 60.0,
            max_retries: 3,
            temperature: 0.0,
            max_in_flight: 4,
        }
    }
}

impl GatewayConfig {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.max_retries > MAX_RETRIES_LIMIT {
            return Err(GatewayError::Config(format!(
                "max_retries must be at most {MAX_RETRIES_LIMIT}, got {}",
                self.max_retries
            )));
        }
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            return Err(GatewayError::Config("timeout_secs must be positive".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(GatewayError::Config("temperature must lie in [0, 2]".into()));
        }
        if self.max_in_flight == 0 {
            return Err(GatewayError::Config("max_in_flight must be positive".into()));
        }
        if self.api_key_env.is_empty() {
            return Err(GatewayError::Config("api_key_env must name a variable".into()));
        }
        Ok(())
    }

    /// Fails with a config error naming the variable when it is unset or empty.
    pub fn read_credential(&self) -> Result<String, GatewayError> {
        match std::env::var(&self.api_key_env) {
            Ok(v) if !v.is_empty() => Ok(v),
            _ => Err(GatewayError::Config(format!(
                "credential environment variable {} is not set",
                self.api_key_env
            ))),
        }
    }
}

/// Delay before retry number `retry` (0-based): 0.5 s doubling, capped at 8 s.
pub fn backoff_delay(retry: u32) -> Duration {
    let factor = 1u32.checked_shl(retry).unwrap_or(u32::MAX);
    BACKOFF_BASE.saturating_mul(factor).min(BACKOFF_CAP)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UsageLedger {
    pub requests: u64,
    pub failures: u64,
    pub total_latency: Duration,
}

/// Anything that can answer a system + user prompt pair.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, system: &str, user: &str) -> Result<String, GatewayError>;
}

struct InFlight {
    count: Mutex<usize>,
    freed: Condvar,
    cap: usize,
}

impl InFlight {
    fn acquire(&self) -> InFlightGuard<'_> {
        let mut n = self.count.lock().unwrap_or_else(|e| e.into_inner());
        while *n >= self.cap {
            n = self.freed.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n += 1;
        InFlightGuard(self)
    }
}

struct InFlightGuard<'a>(&'a InFlight);

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        let mut n = self.0.count.lock().unwrap_or_else(|e| e.into_inner());
        *n -= 1;
        self.0.freed.notify_one();
    }
}

pub struct Gateway {
    cfg: GatewayConfig,
    agent: ureq::Agent,
    ledger: Mutex<UsageLedger>,
    in_flight: InFlight,
    events: Mutex<Vec<String>>,
}

impl Gateway {
    pub fn new(cfg: GatewayConfig) -> Result<Self, GatewayError> {
        cfg.validate()?;
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs_f64(cfg.timeout_secs))
            .build();
        let cap = cfg.max_in_flight;
        Ok(Gateway {
            cfg,
            agent,
            ledger: Mutex::new(UsageLedger::default()),
            in_flight: InFlight {
                count: Mutex::new(0),
                freed: Condvar::new(),
                cap,
            },
            events: Mutex::new(Vec::new()),
        })
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.cfg
    }

    pub fn ledger(&self) -> UsageLedger {
        self.ledger.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    /// Diagnostic lines emitted so far, already scrubbed of the credential.
    pub fn events(&self) -> Vec<String> {
        self.events.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    fn note(&self, secret: &str, line: String) {
        let line = scrub(&line, secret);
        log::debug!("{line}");
        self.events.lock().unwrap_or_else(|e| e.into_inner()).push(line);
    }

    fn account(&self, started: Instant, failed: bool) {
        let mut l = self.ledger.lock().unwrap_or_else(|e| e.into_inner());
        l.requests += 1;
        if failed {
            l.failures += 1;
        }
        l.total_latency += started.elapsed();
    }

    /// Sends one chat request, retrying transport failures, 429 and 5xx.
    pub fn complete(&self, system: &str, user: &str) -> Result<String, GatewayError> {
        let key = self.cfg.read_credential()?;
        let body = json!({
            "model": self.cfg.model_name,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
            "temperature": self.cfg.temperature,
        });
        let _slot = self.in_flight.acquire();
        let attempts = self.cfg.max_retries + 1;
        let mut last_error = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(backoff_delay(attempt - 1));
            }
            let started = Instant::now();
            let result = self
                .agent
                .post(&self.cfg.endpoint_url)
                .set("Authorization", &format!("Bearer {key}"))
                .set("Content-Type", "application/json")
                .send_json(body.clone());
            match result {
                Ok(resp) => {
                    self.account(started, false);
                    self.note(&key, format!("POST {} -> {}", self.cfg.endpoint_url, resp.status()));
                    let text = resp
                        .into_string()
                        .map_err(|e| GatewayError::Protocol(scrub(&e.to_string(), &key)))?;
                    return extract_content(&text).map_err(|e| match e {
                        GatewayError::Protocol(m) => GatewayError::Protocol(scrub(&m, &key)),
                        other => other,
                    });
                }
                Err(ureq::Error::Status(code, resp)) => {
                    self.account(started, true);
                    let detail = resp.into_string().unwrap_or_default();
                    last_error = scrub(&format!("HTTP {code}: {}", truncate(&detail, 200)), &key);
                    self.note(&key, format!("POST {} attempt {} failed: {last_error}", self.cfg.endpoint_url, attempt + 1));
                    if !(code == 429 || code >= 500) {
                        return Err(GatewayError::Transport {
                            attempts: attempt + 1,
                            message: last_error,
                        });
                    }
                }
                Err(e) => {
                    self.account(started, true);
                    last_error = scrub(&e.to_string(), &key);
                    self.note(&key, format!("POST {} attempt {} failed: {last_error}", self.cfg.endpoint_url, attempt + 1));
                }
            }
        }
        Err(GatewayError::Transport {
            attempts,
            message: last_error,
        })
    }
}

impl ChatBackend for Gateway {
    fn complete(&self, system: &str, user: &str) -> Result<String, GatewayError> {
        Gateway::complete(self, system, user)
    }
}

fn truncate(s: &str, max: usize) -> &str {
    match s.char_indices().nth(max) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

fn scrub(text: &str, secret: &str) -> String {
    if secret.is_empty() {
        text.to_string()
    } else {
        text.replace(secret, "***")
    }
}

fn extract_content(body: &str) -> Result<String, GatewayError> {
    let v: Value = serde_json::from_str(body)
        .map_err(|e| GatewayError::Protocol(format!("response is not JSON: {e}")))?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| GatewayError::Protocol("missing choices[0].message.content".into()))
}

/// Returns the first balanced top-level `{...}` block. Braces inside JSON
/// string literals are ignored.
pub fn extract_json_block(reply: &str) -> Result<&str, GatewayError> {
    let bytes = reply.as_bytes();
    let mut begin = None;
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate() {
        if begin.is_none() {
            if b == b'{' {
                begin = Some(i);
                depth = 1;
            }
            continue;
        }
        if in_string {
            match (escaped, b) {
                (true, _) => escaped = false,
                (false, b'\\') => escaped = true,
                (false, b'"') => in_string = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Ok(&reply[begin.unwrap_or(0)..=i]);
                }
            }
            _ => {}
        }
    }
    Err(GatewayError::Extraction)
}
