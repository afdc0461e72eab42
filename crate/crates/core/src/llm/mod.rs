//! Chat-completion gateway: content-addressed disk cache, single-flight
//! de-duplication, bounded concurrency, retries with exponential backoff, and
//! per-task provider routing.

mod cache;
mod gateway;
mod remote;
mod simulated;

pub use cache::DiskCache;
pub use gateway::{Gateway, GatewayStats, RetryPolicy};
pub use remote::{RemoteConfig, RemoteProvider};
pub use simulated::SimulatedProvider;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// What a request is for; selects the provider route. Not part of the cache key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Summarize,
    Imagine,
    Classify,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub task: Task,
    pub system_prompt: String,
    pub user_prompt: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    /// Distinguishes the n-th sample of otherwise identical prompts.
    pub seed_tag: String,
}

impl CompletionRequest {
    pub fn new(task: Task, system_prompt: impl Into<String>, user_prompt: impl Into<String>) -> Self {
        Self {
            task,
            system_prompt: system_prompt.into(),
            user_prompt: user_prompt.into(),
            temperature: 0.0,
            max_output_tokens: 2048,
            seed_tag: String::new(),
        }
    }

    pub fn temperature(mut self, t: f64) -> Self {
        self.temperature = t;
        self
    }

    pub fn max_output_tokens(mut self, n: u32) -> Self {
        self.max_output_tokens = n;
        self
    }

    pub fn seed_tag(mut self, tag: impl Into<String>) -> Self {
        self.seed_tag = tag.into();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub text: String,
    pub provider_name: String,
    pub cached: bool,
}

/// SHA-256 over the request identity, hex encoded (256 bits).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CacheKey(String);

impl CacheKey {
    pub fn new(provider_name: &str, req: &CompletionRequest) -> Self {
        let mut h = Sha256::new();
        // Length-prefix every field so concatenations cannot collide.
        for field in [
            provider_name.as_bytes(),
            req.system_prompt.as_bytes(),
            req.user_prompt.as_bytes(),
            &req.temperature.to_bits().to_le_bytes(),
            req.seed_tag.as_bytes(),
        ] {
            h.update((field.len() as u64).to_le_bytes());
            h.update(field);
        }
        CacheKey(hex::encode(h.finalize()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn to_bytes(&self) -> [u8; 32] {
        let mut out = [0u8; 32];
        hex::decode_to_slice(&self.0, &mut out).expect("cache key is 64 hex chars");
        out
    }
}

impl std::fmt::Display for CacheKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Failure reported by a single provider call.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProviderError {
    /// Worth retrying: timeouts, 429, 5xx.
    #[error("transient provider failure: {0}")]
    Transient(String),
    /// Content-policy refusal.
    #[error("content policy refusal: {0}")]
    Policy(String),
    #[error("provider error: {0}")]
    Fatal(String),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GatewayError {
    #[error("transport failure after {attempts} attempts: {last}")]
    Transport { attempts: u32, last: String },
    #[error("content policy refusal: {0}")]
    Policy(String),
    #[error("provider error: {0}")]
    Provider(String),
    #[error("cache error: {0}")]
    Cache(String),
    #[error("no provider routed for task {0:?}")]
    NoRoute(Task),
}

pub trait Provider: Send + Sync {
    /// Stable name; part of every cache key.
    fn name(&self) -> &str;
    fn generate(&self, req: &CompletionRequest) -> Result<String, ProviderError>;
}
