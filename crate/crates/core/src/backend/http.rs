//! OpenAI-compatible chat-completions client.

use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{BackendError, ChatRequest, CompletionBackend, CompletionResult};

pub const API_KEY_ENV: &str = "DPX_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpConfig {
    pub base_url: String,
    pub model: String,
    pub timeout_secs: f64,
    pub max_in_flight: usize,
    /// Extra attempts after a transient failure.
    pub max_retries: u32,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            base_url: String::new(),
            model: String::new(),
            timeout_secs: 60.0,
            max_in_flight: 4,
            max_retries: 2,
        }
    }
}

/// Counting semaphore bounding concurrent requests.
struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

struct SlotGuard<'a>(&'a Slots);

impl Slots {
    fn acquire(&self) -> SlotGuard<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        SlotGuard(self)
    }
}

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

pub struct HttpBackend {
    cfg: HttpConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
    slots: Slots,
    id: String,
}

impl HttpBackend {
    /// Reads the API key from `DPX_API_KEY` when set.
    pub fn new(cfg: HttpConfig) -> Result<HttpBackend, BackendError> {
        let key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        HttpBackend::with_key(cfg, key)
    }

    pub fn with_key(cfg: HttpConfig, api_key: Option<String>) -> Result<HttpBackend, BackendError> {
        if cfg.base_url.trim().is_empty() {
            return Err(BackendError::Config("http backend needs base_url".into()));
        }
        if cfg.model.trim().is_empty() {
            return Err(BackendError::Config("http backend needs a model name".into()));
        }
        if !(cfg.timeout_secs > 0.0) {
            return Err(BackendError::Config("timeout_secs must be positive".into()));
        }
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(cfg.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .new_agent();
        Ok(HttpBackend {
            id: format!("http:{}", cfg.model),
            slots: Slots {
                free: Mutex::new(cfg.max_in_flight.max(1)),
                cv: Condvar::new(),
            },
            agent,
            api_key,
            cfg,
        })
    }

    fn endpoint(&self) -> String {
        format!("{}/v1/chat/completions", self.cfg.base_url.trim_end_matches('/'))
    }

    fn body(&self, req: &ChatRequest) -> String {
        json!({
            "model": self.cfg.model,
            "messages": [
                {"role": "system", "content": req.system_prompt},
                {"role": "user", "content": req.user_prompt},
            ],
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        })
        .to_string()
    }

    fn attempt(&self, body: &str) -> Result<String, BackendError> {
        let _slot = self.slots.acquire();
        let mut call = self.agent.post(&self.endpoint()).header("Content-Type", "application/json");
        if let Some(k) = &self.api_key {
            call = call.header("Authorization", &format!("Bearer {k}"));
        }
        let mut resp = call.send(body).map_err(map_transport)?;
        let status = resp.status().as_u16();
        if status == 429 {
            let retry_after = resp
                .headers()
                .get("retry-after")
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.trim().parse::<f64>().ok())
                .map(Duration::from_secs_f64);
            return Err(BackendError::RateLimited { retry_after });
        }
        let text = resp.body_mut().read_to_string().map_err(map_transport)?;
        if !(200..300).contains(&status) {
            return Err(BackendError::Transport(format!("http status {status}: {}", truncate(&text, 200))));
        }
        let v: Value = serde_json::from_str(&text)
            .map_err(|e| BackendError::Transport(format!("invalid response json: {e}")))?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| BackendError::Transport("response has no choices[0].message.content".into()))
    }
}

fn truncate(s: &str, n: usize) -> &str {
    match s.char_indices().nth(n) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

fn map_transport(e: ureq::Error) -> BackendError {
    match e {
        ureq::Error::Timeout(_) => BackendError::Timeout,
        other => BackendError::Transport(other.to_string()),
    }
}

impl CompletionBackend for HttpBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, req: &ChatRequest) -> Result<CompletionResult, BackendError> {
        let body = self.body(req);
        let start = Instant::now();
        let mut attempt = 0;
        loop {
            match self.attempt(&body) {
                Ok(text) => {
                    return Ok(CompletionResult {
                        text,
                        latency_ms: start.elapsed().as_secs_f64() * 1000.0,
                        backend_id: self.id.clone(),
                    })
                }
                Err(e) if e.is_transient() && attempt < self.cfg.max_retries => {
                    let wait = match &e {
                        BackendError::RateLimited { retry_after: Some(d) } => *d,
                        _ => Duration::from_millis(200 << attempt),
                    };
                    std::thread::sleep(wait.min(Duration::from_secs(30)));
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}
