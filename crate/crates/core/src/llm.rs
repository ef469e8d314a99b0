//! Text-completion access with record/replay caching.
//!
//! Responses are cached as one JSON file per request digest. Replay mode
//! never touches the network.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Condvar, Mutex};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const DEFAULT_MODEL: &str = "text-davinci-003";
pub const GENERATION_TEMPERATURE: f64 = 0.7;
pub const PERTURBATION_TEMPERATURE: f64 = 0.2;
pub const MAX_ATTEMPTS: usize = 3;

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("prompt is empty")]
    EmptyPrompt,
    #[error("temperature {0} is outside [0, 2]")]
    Temperature(f64),
    #[error("no endpoint configured for {0} mode")]
    NotConfigured(Mode),
    #[error("endpoint rejected the credential (HTTP {0})")]
    Auth(u16),
    #[error("request failed after {attempts} attempts: {message}")]
    Transport { attempts: usize, message: String },
    #[error("malformed provider response: {0}")]
    Response(String),
    #[error("replay cache has no entry for request digest {digest}")]
    CacheMiss { digest: String },
    #[error("cache i/o error at {path}: {message}")]
    Cache { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Live,
    Record,
    Replay,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Live => "live",
            Mode::Record => "record",
            Mode::Replay => "replay",
        })
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "live" => Ok(Mode::Live),
            "record" => Ok(Mode::Record),
            "replay" => Ok(Mode::Replay),
            other => Err(format!("unknown mode `{other}` (expected live, record or replay)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub max_tokens: u32,
    pub temperature: f64,
    pub model: String,
}

impl CompletionRequest {
    pub fn new(prompt: impl Into<String>, temperature: f64) -> Self {
        CompletionRequest {
            prompt: prompt.into(),
            max_tokens: 1024,
            temperature,
            model: DEFAULT_MODEL.to_string(),
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.prompt.is_empty() {
            return Err(LlmError::EmptyPrompt);
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(LlmError::Temperature(self.temperature));
        }
        Ok(())
    }

    /// SHA-256 over the canonical form: trimmed model, fixed-precision
    /// temperature, and the prompt bytes verbatim.
    pub fn digest(&self) -> String {
        let canonical = format!(
            "model={}\nmax_tokens={}\ntemperature={:.4}\nprompt={}",
            self.model.trim(),
            self.max_tokens,
            self.temperature,
            self.prompt
        );
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub response: String,
    pub timestamp: u64,
    pub request: CompletionRequest,
}

/// Anything that turns a request into completion text.
pub trait Completer: Send + Sync {
    fn complete(&self, req: &CompletionRequest) -> Result<String, LlmError>;
}

impl<F> Completer for F
where
    F: Fn(&CompletionRequest) -> Result<String, LlmError> + Send + Sync,
{
    fn complete(&self, req: &CompletionRequest) -> Result<String, LlmError> {
        self(req)
    }
}

/// Completions-style HTTP transport: POSTs `{model, prompt, max_tokens,
/// temperature}` and reads `choices[0].text`.
pub struct HttpTransport {
    endpoint: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(true)
            .build()
            .into();
        HttpTransport { endpoint: endpoint.into(), api_key, agent }
    }

    /// Outer error: transport failure. Inner error: a response without text.
    fn attempt(&self, req: &CompletionRequest) -> Result<Result<String, String>, ureq::Error> {
        let body = serde_json::json!({
            "model": req.model.trim(),
            "prompt": req.prompt,
            "max_tokens": req.max_tokens,
            "temperature": req.temperature,
        });
        let mut call = self.agent.post(&self.endpoint);
        if let Some(k) = &self.api_key {
            call = call.header("Authorization", &format!("Bearer {k}"));
        }
        let mut resp = call.send_json(&body)?;
        let v: serde_json::Value = resp.body_mut().read_json()?;
        Ok(v.pointer("/choices/0/text").and_then(|t| t.as_str()).map(str::to_string).ok_or_else(|| v.to_string()))
    }
}

impl Completer for HttpTransport {
    fn complete(&self, req: &CompletionRequest) -> Result<String, LlmError> {
        let mut last = String::new();
        for attempt in 0..MAX_ATTEMPTS {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(250 << attempt));
            }
            match self.attempt(req) {
                Ok(Ok(text)) => return Ok(text),
                Ok(Err(body)) => return Err(LlmError::Response(format!("no choices[0].text in {body}"))),
                Err(ureq::Error::StatusCode(code @ (401 | 403))) => return Err(LlmError::Auth(code)),
                Err(e) => {
                    log::warn!("completion attempt {} failed: {e}", attempt + 1);
                    last = e.to_string();
                }
            }
        }
        Err(LlmError::Transport { attempts: MAX_ATTEMPTS, message: last })
    }
}

#[derive(Debug, Clone)]
pub struct GatewayConfig {
    pub endpoint: Option<String>,
    pub api_key: Option<String>,
    pub model: String,
    pub mode: Mode,
    pub cache_dir: PathBuf,
    pub max_inflight: usize,
    pub timeout: Duration,
}

impl GatewayConfig {
    pub fn new(mode: Mode, cache_dir: impl Into<PathBuf>) -> Self {
        GatewayConfig {
            endpoint: None,
            api_key: None,
            model: DEFAULT_MODEL.to_string(),
            mode,
            cache_dir: cache_dir.into(),
            max_inflight: 4,
            timeout: Duration::from_secs(120),
        }
    }
}

struct Inflight {
    count: Mutex<usize>,
    freed: Condvar,
    limit: usize,
}

impl Inflight {
    fn acquire(&self) -> InflightGuard<'_> {
        let mut n = self.count.lock().expect("inflight lock");
        while *n >= self.limit {
            n = self.freed.wait(n).expect("inflight lock");
        }
        *n += 1;
        InflightGuard(self)
    }
}

struct InflightGuard<'a>(&'a Inflight);

impl Drop for InflightGuard<'_> {
    fn drop(&mut self) {
        let mut n = self.0.count.lock().expect("inflight lock");
        *n -= 1;
        self.0.freed.notify_one();
    }
}

/// Mode-aware front end over a transport. Shareable across threads.
pub struct Gateway {
    mode: Mode,
    model: String,
    cache_dir: PathBuf,
    transport: Option<Box<dyn Completer>>,
    inflight: Inflight,
}

impl Gateway {
    /// Builds a gateway with the HTTP transport when an endpoint is set.
    pub fn new(cfg: GatewayConfig) -> Result<Self, LlmError> {
        let transport: Option<Box<dyn Completer>> = cfg
            .endpoint
            .as_ref()
            .map(|e| Box::new(HttpTransport::new(e.clone(), cfg.api_key.clone(), cfg.timeout)) as Box<dyn Completer>);
        if transport.is_none() && cfg.mode != Mode::Replay {
            return Err(LlmError::NotConfigured(cfg.mode));
        }
        Ok(Self::assemble(cfg, transport))
    }

    /// Builds a gateway over an arbitrary transport.
    pub fn with_transport(cfg: GatewayConfig, transport: Box<dyn Completer>) -> Self {
        Self::assemble(cfg, Some(transport))
    }

    fn assemble(cfg: GatewayConfig, transport: Option<Box<dyn Completer>>) -> Self {
        Gateway {
            mode: cfg.mode,
            model: cfg.model,
            cache_dir: cfg.cache_dir,
            transport,
            inflight: Inflight { count: Mutex::new(0), freed: Condvar::new(), limit: cfg.max_inflight.max(1) },
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn cache_dir(&self) -> &Path {
        &self.cache_dir
    }

    /// A request for this gateway's model.
    pub fn request(&self, prompt: impl Into<String>, temperature: f64) -> CompletionRequest {
        CompletionRequest { model: self.model.clone(), ..CompletionRequest::new(prompt, temperature) }
    }

    fn entry_path(&self, digest: &str) -> PathBuf {
        self.cache_dir.join(format!("{digest}.json"))
    }

    pub fn lookup(&self, req: &CompletionRequest) -> Result<Option<CacheEntry>, LlmError> {
        let path = self.entry_path(&req.digest());
        match std::fs::read(&path) {
            Ok(bytes) => serde_json::from_slice(&bytes)
                .map(Some)
                .map_err(|e| LlmError::Cache { path: path.display().to_string(), message: e.to_string() }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(LlmError::Cache { path: path.display().to_string(), message: e.to_string() }),
        }
    }

    /// Writes an entry atomically (temp file then rename).
    pub fn store(&self, req: &CompletionRequest, response: &str) -> Result<(), LlmError> {
        let key = req.digest();
        let path = self.entry_path(&key);
        let err = |m: String| LlmError::Cache { path: path.display().to_string(), message: m };
        std::fs::create_dir_all(&self.cache_dir).map_err(|e| err(e.to_string()))?;
        let entry = CacheEntry {
            key,
            response: response.to_string(),
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            request: req.clone(),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(&self.cache_dir).map_err(|e| err(e.to_string()))?;
        serde_json::to_writer_pretty(&mut tmp, &entry).map_err(|e| err(e.to_string()))?;
        tmp.write_all(b"\n").map_err(|e| err(e.to_string()))?;
        tmp.persist(&path).map_err(|e| err(e.to_string()))?;
        Ok(())
    }

    fn call(&self, req: &CompletionRequest) -> Result<String, LlmError> {
        let t = self.transport.as_ref().ok_or(LlmError::NotConfigured(self.mode))?;
        let _slot = self.inflight.acquire();
        t.complete(req)
    }
}

impl Completer for Gateway {
    /// The configured model replaces the request's model.
    fn complete(&self, req: &CompletionRequest) -> Result<String, LlmError> {
        req.validate()?;
        let req = &CompletionRequest { model: self.model.clone(), ..req.clone() };
        match self.mode {
            Mode::Live => self.call(req),
            Mode::Record => {
                let text = self.call(req)?;
                self.store(req, &text)?;
                Ok(text)
            }
            Mode::Replay => match self.lookup(req)? {
                Some(e) => Ok(e.response),
                None => Err(LlmError::CacheMiss { digest: req.digest() }),
            },
        }
    }
}
