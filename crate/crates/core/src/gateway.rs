//! LLM gateway: chat backends (HTTP or replayable mock), request
//! fingerprinting, and extraction of C candidates from raw responses.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::prompt::PromptPair;

/// Sampling configuration for one generation request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub max_tokens: u32,
    pub temperature: f64,
    pub presence_penalty: f64,
    pub frequency_penalty: f64,
    pub top_p: f64,
    pub model_id: String,
    /// Number of samples to draw (k for pass@k).
    pub samples: u32,
}

impl GenerationParams {
    /// Defaults: max_tokens 4096, temperature 0.8, presence_penalty 0.5,
    /// frequency_penalty 1, top_p 1, one sample.
    pub fn new(model_id: impl Into<String>) -> Self {
        GenerationParams {
            max_tokens: 4096,
            temperature: 0.8,
            presence_penalty: 0.5,
            frequency_penalty: 1.0,
            top_p: 1.0,
            model_id: model_id.into(),
            samples: 1,
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(GatewayError::InvalidParams(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(GatewayError::InvalidParams(format!(
                "top_p {} outside (0, 1]",
                self.top_p
            )));
        }
        if self.samples < 1 {
            return Err(GatewayError::InvalidParams("samples must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::System,
            content: content.into(),
        }
    }
    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::User,
            content: content.into(),
        }
    }
    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

/// One raw model response with provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawResponse {
    pub text: String,
    pub model_id: String,
    /// Hash of prompts + params; deterministic for identical inputs.
    pub request_fingerprint: String,
    /// Wall-clock measurement; excluded from serialized artifacts so replayed
    /// runs produce byte-identical results files.
    #[serde(skip)]
    pub latency: Duration,
    /// Set when the backend stopped on the token limit.
    pub truncated: bool,
}

/// One extracted C candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedCandidate {
    pub source: String,
    pub origin: RawResponse,
    pub sample_index: u32,
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("invalid generation parameters: {0}")]
    InvalidParams(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("backend returned status {status}: {body}")]
    HttpStatus { status: u16, body: String },
    #[error("credential missing: set {0}")]
    CredentialMissing(String),
    #[error("mock scenario has no rule matching the request (fingerprint {fingerprint})")]
    NoScenarioMatch { fingerprint: String },
    #[error("mock scenario error: {0}")]
    Scenario(String),
    #[error("no code region containing function '{function}' found in response")]
    Extraction { function: String },
}

impl GatewayError {
    /// Transport-level failures are worth one retry; content-level are not.
    pub fn is_retriable(&self) -> bool {
        match self {
            GatewayError::HttpStatus { status, .. } => *status >= 500 || *status == 429,
            GatewayError::Transport(_) => true,
            _ => false,
        }
    }
}

pub struct BackendReply {
    pub text: String,
    pub truncated: bool,
}

/// A chat-completion backend. Implementations must be deterministic per
/// request for the mock case; the HTTP case is inherently not.
pub trait Backend: Send + Sync {
    fn complete(
        &self,
        messages: &[ChatMessage],
        params: &GenerationParams,
        sample_index: u32,
    ) -> Result<BackendReply, GatewayError>;

    fn name(&self) -> &str;
}

/// Stable hash of the full request: messages, sampling fields, sample index.
pub fn request_fingerprint(messages: &[ChatMessage], params: &GenerationParams) -> String {
    let mut hasher = Sha256::new();
    for m in messages {
        hasher.update(match m.role {
            Role::System => b"S\x00",
            Role::User => b"U\x00",
            Role::Assistant => b"A\x00",
        });
        hasher.update(m.content.as_bytes());
        hasher.update([0u8]);
    }
    hasher.update(
        format!(
            "{}|{}|{}|{}|{}|{}",
            params.model_id,
            params.max_tokens,
            params.temperature,
            params.presence_penalty,
            params.frequency_penalty,
            params.top_p
        )
        .as_bytes(),
    );
    hex::encode(&hasher.finalize()[..16])
}

/// Gateway over a backend: sampling loop, fingerprinting, one retry with
/// backoff on transport errors, request accounting.
pub struct Gateway {
    backend: Box<dyn Backend>,
    requests_issued: AtomicU64,
    /// Backoff before the single retry; zeroed in tests.
    pub retry_backoff: Duration,
}

impl Gateway {
    pub fn new(backend: Box<dyn Backend>) -> Self {
        Gateway {
            backend,
            requests_issued: AtomicU64::new(0),
            retry_backoff: Duration::from_millis(500),
        }
    }

    pub fn backend_name(&self) -> &str {
        self.backend.name()
    }

    /// Total completion requests issued (including retries).
    pub fn requests_issued(&self) -> u64 {
        self.requests_issued.load(Ordering::SeqCst)
    }

    /// Draw `params.samples` responses for an initial prompt pair.
    pub fn generate(
        &self,
        prompts: &PromptPair,
        params: &GenerationParams,
    ) -> Result<Vec<RawResponse>, GatewayError> {
        let messages = [
            ChatMessage::system(&prompts.system_text),
            ChatMessage::user(&prompts.user_text),
        ];
        self.generate_chat(&messages, params)
    }

    /// Draw `params.samples` responses for an arbitrary conversation
    /// (used for backprompt turns).
    pub fn generate_chat(
        &self,
        messages: &[ChatMessage],
        params: &GenerationParams,
    ) -> Result<Vec<RawResponse>, GatewayError> {
        params.validate()?;
        let fingerprint = request_fingerprint(messages, params);
        let mut out = Vec::with_capacity(params.samples as usize);
        for sample_index in 0..params.samples {
            let started = Instant::now();
            self.requests_issued.fetch_add(1, Ordering::SeqCst);
            let reply = match self.backend.complete(messages, params, sample_index) {
                Ok(reply) => reply,
                Err(err) if err.is_retriable() => {
                    std::thread::sleep(self.retry_backoff);
                    self.requests_issued.fetch_add(1, Ordering::SeqCst);
                    self.backend.complete(messages, params, sample_index)?
                }
                Err(err) => return Err(err),
            };
            out.push(RawResponse {
                text: reply.text,
                model_id: params.model_id.clone(),
                request_fingerprint: fingerprint.clone(),
                latency: started.elapsed(),
                truncated: reply.truncated,
            });
        }
        Ok(out)
    }
}

/// Pull the C candidate out of a raw response.
///
/// Fenced code blocks take priority: the first block whose body contains
/// `function_name` wins, bytes unaltered. A fence-free response is scanned
/// for the definition region from its return-type line to the balanced
/// closing brace.
pub fn extract_code(
    response: &RawResponse,
    function_name: &str,
    sample_index: u32,
) -> Result<GeneratedCandidate, GatewayError> {
    let blocks = fenced_blocks(&response.text);
    let source = if blocks.is_empty() {
        bare_function_region(&response.text, function_name).ok_or_else(|| {
            GatewayError::Extraction {
                function: function_name.to_string(),
            }
        })?
    } else {
        blocks
            .into_iter()
            .find(|b| contains_identifier(b, function_name))
            .ok_or_else(|| GatewayError::Extraction {
                function: function_name.to_string(),
            })?
    };
    Ok(GeneratedCandidate {
        source,
        origin: response.clone(),
        sample_index,
    })
}

fn contains_identifier(haystack: &str, ident: &str) -> bool {
    haystack.match_indices(ident).any(|(i, _)| {
        let before_ok = i == 0
            || !haystack[..i]
                .chars()
                .next_back()
                .is_some_and(|c| c.is_alphanumeric() || c == '_');
        let after = i + ident.len();
        let after_ok = after >= haystack.len()
            || !haystack[after..]
                .chars()
                .next()
                .is_some_and(|c| c.is_alphanumeric() || c == '_');
        before_ok && after_ok
    })
}

/// Bodies of all ``` fenced blocks, in order; language tags discarded.
fn fenced_blocks(text: &str) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut body: Option<String> = None;
    for line in text.lines() {
        if line.trim_start().starts_with("```") {
            match body.take() {
                Some(b) => blocks.push(b),
                None => body = Some(String::new()),
            }
        } else if let Some(b) = body.as_mut() {
            b.push_str(line);
            b.push('\n');
        }
    }
    blocks
}

/// The region from the start of the line where the definition's return type
/// begins through the matching closing brace of the body.
fn bare_function_region(text: &str, function_name: &str) -> Option<String> {
    // Find `name (`-ish occurrence that is followed (eventually) by '{'
    // rather than ';' (a definition, not a prototype).
    let mut search_from = 0;
    while let Some(rel) = text[search_from..].find(function_name) {
        let at = search_from + rel;
        search_from = at + function_name.len();
        if !contains_identifier(&text[at..at + function_name.len()], function_name) {
            continue;
        }
        let after = &text[at + function_name.len()..];
        let Some(open_paren) = after.find(|c: char| !c.is_whitespace()) else {
            continue;
        };
        if !after[open_paren..].starts_with('(') {
            continue;
        }
        // Skip to matching ')'.
        let mut depth = 0i32;
        let mut body_start = None;
        for (i, c) in after.char_indices().skip(open_paren) {
            match c {
                '(' => depth += 1,
                ')' => {
                    depth -= 1;
                    if depth == 0 {
                        // Next non-whitespace decides definition vs prototype.
                        let rest = &after[i + 1..];
                        let next = rest.trim_start().chars().next();
                        if next == Some('{') {
                            let brace_rel = rest.find('{').expect("seen above");
                            body_start = Some(at + function_name.len() + i + 1 + brace_rel);
                        }
                        break;
                    }
                }
                _ => {}
            }
        }
        let Some(body_start) = body_start else {
            continue;
        };
        // Walk braces to the balanced end.
        let mut depth = 0i32;
        let mut end = None;
        for (i, c) in text[body_start..].char_indices() {
            match c {
                '{' => depth += 1,
                '}' => {
                    depth -= 1;
                    if depth == 0 {
                        end = Some(body_start + i + 1);
                        break;
                    }
                }
                _ => {}
            }
        }
        let end = end?;
        // Back up to the start of the return-type line.
        let line_start = text[..at].rfind('\n').map(|i| i + 1).unwrap_or(0);
        return Some(text[line_start..end].to_string());
    }
    None
}

// ---------------------------------------------------------------------------
// Mock backend

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(rename = "rule", default)]
    rules: Vec<ScenarioRule>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioRule {
    /// Substring matched against the concatenated message contents.
    #[serde(default)]
    contains: Option<String>,
    /// Exact request fingerprint match.
    #[serde(default)]
    fingerprint: Option<String>,
    /// How many times this rule may fire; unlimited when absent.
    #[serde(default)]
    times: Option<u32>,
    #[serde(default)]
    response_file: Option<String>,
    #[serde(default)]
    response_text: Option<String>,
    #[serde(default)]
    truncated: bool,
}

struct LoadedRule {
    contains: Option<String>,
    fingerprint: Option<String>,
    remaining: Option<u32>,
    text: String,
    truncated: bool,
}

/// Replayable backend: a scenario file maps match rules to canned response
/// text. First rule with remaining uses whose criteria all hold wins.
pub struct MockBackend {
    rules: Mutex<Vec<LoadedRule>>,
    path: PathBuf,
}

impl MockBackend {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, GatewayError> {
        let path = path.as_ref().to_path_buf();
        let raw = std::fs::read_to_string(&path)
            .map_err(|e| GatewayError::Scenario(format!("{}: {e}", path.display())))?;
        let scenario: ScenarioFile =
            toml::from_str(&raw).map_err(|e| GatewayError::Scenario(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut rules = Vec::with_capacity(scenario.rules.len());
        for (i, rule) in scenario.rules.into_iter().enumerate() {
            let text = match (&rule.response_text, &rule.response_file) {
                (Some(text), None) => text.clone(),
                (None, Some(rel)) => {
                    let p = base.join(rel);
                    std::fs::read_to_string(&p)
                        .map_err(|e| GatewayError::Scenario(format!("{}: {e}", p.display())))?
                }
                _ => {
                    return Err(GatewayError::Scenario(format!(
                        "rule {i}: exactly one of response_text/response_file required"
                    )))
                }
            };
            rules.push(LoadedRule {
                contains: rule.contains,
                fingerprint: rule.fingerprint,
                remaining: rule.times,
                text,
                truncated: rule.truncated,
            });
        }
        Ok(MockBackend {
            rules: Mutex::new(rules),
            path,
        })
    }

    /// Single canned response for every request. Handy in unit tests.
    pub fn always(text: impl Into<String>) -> Self {
        MockBackend {
            rules: Mutex::new(vec![LoadedRule {
                contains: None,
                fingerprint: None,
                remaining: None,
                text: text.into(),
                truncated: false,
            }]),
            path: PathBuf::from("<inline>"),
        }
    }

    /// Ordered one-shot responses, consumed front to back.
    pub fn sequence<I, S>(texts: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        MockBackend {
            rules: Mutex::new(
                texts
                    .into_iter()
                    .map(|t| LoadedRule {
                        contains: None,
                        fingerprint: None,
                        remaining: Some(1),
                        text: t.into(),
                        truncated: false,
                    })
                    .collect(),
            ),
            path: PathBuf::from("<inline>"),
        }
    }
}

impl Backend for MockBackend {
    fn complete(
        &self,
        messages: &[ChatMessage],
        params: &GenerationParams,
        _sample_index: u32,
    ) -> Result<BackendReply, GatewayError> {
        let fingerprint = request_fingerprint(messages, params);
        let haystack: String = messages
            .iter()
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n");
        let mut rules = self.rules.lock().expect("mock rules lock");
        for rule in rules.iter_mut() {
            if rule.remaining == Some(0) {
                continue;
            }
            if let Some(needle) = &rule.contains {
                if !haystack.contains(needle.as_str()) {
                    continue;
                }
            }
            if let Some(fp) = &rule.fingerprint {
                if *fp != fingerprint {
                    continue;
                }
            }
            if let Some(n) = rule.remaining.as_mut() {
                *n -= 1;
            }
            return Ok(BackendReply {
                text: rule.text.clone(),
                truncated: rule.truncated,
            });
        }
        Err(GatewayError::NoScenarioMatch { fingerprint })
    }

    fn name(&self) -> &str {
        self.path.to_str().unwrap_or("mock")
    }
}

// ---------------------------------------------------------------------------
// HTTP backend (OpenAI-compatible chat completions)

/// Env var consulted for the API credential; never read from flags or config.
pub const API_KEY_ENV: &str = "SPECGEN_API_KEY";

/// The JSON body for a chat-completion request. Exposed so the wire format
/// can be asserted without a network.
pub fn build_request_body(
    messages: &[ChatMessage],
    params: &GenerationParams,
) -> serde_json::Value {
    serde_json::json!({
        "model": params.model_id,
        "messages": messages
            .iter()
            .map(|m| {
                serde_json::json!({
                    "role": match m.role {
                        Role::System => "system",
                        Role::User => "user",
                        Role::Assistant => "assistant",
                    },
                    "content": m.content,
                })
            })
            .collect::<Vec<_>>(),
        "max_tokens": params.max_tokens,
        "temperature": params.temperature,
        "presence_penalty": params.presence_penalty,
        "frequency_penalty": params.frequency_penalty,
        "top_p": params.top_p,
        "n": 1,
    })
}

#[cfg(feature = "http")]
pub use http_backend::HttpBackend;

#[cfg(feature = "http")]
mod http_backend {
    use super::*;

    pub struct HttpBackend {
        endpoint: String,
        api_key: String,
        client: reqwest::blocking::Client,
    }

    impl HttpBackend {
        /// `endpoint` is the full chat-completions URL. The credential is
        /// taken from [`API_KEY_ENV`].
        pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Result<Self, GatewayError> {
            let api_key = std::env::var(API_KEY_ENV)
                .map_err(|_| GatewayError::CredentialMissing(API_KEY_ENV.to_string()))?;
            let client = reqwest::blocking::Client::builder()
                .timeout(timeout)
                .build()
                .map_err(|e| GatewayError::Transport(e.to_string()))?;
            Ok(HttpBackend {
                endpoint: endpoint.into(),
                api_key,
                client,
            })
        }
    }

    #[derive(Deserialize)]
    struct ChatCompletion {
        choices: Vec<Choice>,
    }

    #[derive(Deserialize)]
    struct Choice {
        message: ChoiceMessage,
        #[serde(default)]
        finish_reason: Option<String>,
    }

    #[derive(Deserialize)]
    struct ChoiceMessage {
        content: String,
    }

    impl Backend for HttpBackend {
        fn complete(
            &self,
            messages: &[ChatMessage],
            params: &GenerationParams,
            _sample_index: u32,
        ) -> Result<BackendReply, GatewayError> {
            let body = build_request_body(messages, params);
            let response = self
                .client
                .post(&self.endpoint)
                .bearer_auth(&self.api_key)
                .json(&body)
                .send()
                .map_err(|e| GatewayError::Transport(e.to_string()))?;
            let status = response.status();
            let text = response
                .text()
                .map_err(|e| GatewayError::Transport(e.to_string()))?;
            if !status.is_success() {
                return Err(GatewayError::HttpStatus {
                    status: status.as_u16(),
                    body: text,
                });
            }
            let parsed: ChatCompletion = serde_json::from_str(&text)
                .map_err(|e| GatewayError::Transport(format!("malformed response: {e}")))?;
            let choice = parsed
                .choices
                .into_iter()
                .next()
                .ok_or_else(|| GatewayError::Transport("response carried no choices".into()))?;
            Ok(BackendReply {
                truncated: choice.finish_reason.as_deref() == Some("length"),
                text: choice.message.content,
            })
        }

        fn name(&self) -> &str {
            &self.endpoint
        }
    }
}
