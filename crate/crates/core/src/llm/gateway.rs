use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex, OnceLock};
use std::time::Duration;

use super::{
    CacheKey, CompletionRequest, CompletionResponse, DiskCache, GatewayError, Provider,
    ProviderError, Task,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    /// Total attempts including the first.
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    pub fn no_delay(max_attempts: u32) -> Self {
        Self {
            max_attempts,
            base_delay: Duration::ZERO,
            max_delay: Duration::ZERO,
        }
    }

    fn delay(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt.saturating_sub(1)).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GatewayStats {
    pub provider_calls: u64,
    pub cache_hits: u64,
}

struct Semaphore {
    permits: Mutex<usize>,
    cv: Condvar,
}

impl Semaphore {
    fn new(n: usize) -> Self {
        Self {
            permits: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut p = self.permits.lock().unwrap();
        while *p == 0 {
            p = self.cv.wait(p).unwrap();
        }
        *p -= 1;
        Permit(self)
    }
}

struct Permit<'a>(&'a Semaphore);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.permits.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

type Slot = Arc<OnceLock<Result<String, GatewayError>>>;

/// Shareable across threads. Identical concurrent requests result in at most
/// one provider call; completed responses are memoized in memory and, when a
/// cache directory is configured, on disk.
pub struct Gateway {
    default: Option<Arc<dyn Provider>>,
    routes: HashMap<Task, Arc<dyn Provider>>,
    cache: Option<DiskCache>,
    retry: RetryPolicy,
    limiter: Semaphore,
    inflight: Mutex<HashMap<CacheKey, Slot>>,
    provider_calls: AtomicU64,
    cache_hits: AtomicU64,
}

impl Gateway {
    pub fn new(default: Arc<dyn Provider>) -> Self {
        Self {
            default: Some(default),
            routes: HashMap::new(),
            cache: None,
            retry: RetryPolicy::default(),
            limiter: Semaphore::new(4),
            inflight: Mutex::new(HashMap::new()),
            provider_calls: AtomicU64::new(0),
            cache_hits: AtomicU64::new(0),
        }
    }

    /// Gateway with no default route; every task must be routed explicitly.
    pub fn unrouted() -> Self {
        let mut g = Self::new(Arc::new(NullProvider));
        g.default = None;
        g
    }

    pub fn route(mut self, task: Task, provider: Arc<dyn Provider>) -> Self {
        self.routes.insert(task, provider);
        self
    }

    pub fn with_cache(mut self, cache: DiskCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_max_concurrency(mut self, n: usize) -> Self {
        self.limiter = Semaphore::new(n);
        self
    }

    pub fn stats(&self) -> GatewayStats {
        GatewayStats {
            provider_calls: self.provider_calls.load(Ordering::SeqCst),
            cache_hits: self.cache_hits.load(Ordering::SeqCst),
        }
    }

    pub fn provider_for(&self, task: Task) -> Result<&Arc<dyn Provider>, GatewayError> {
        self.routes
            .get(&task)
            .or(self.default.as_ref())
            .ok_or(GatewayError::NoRoute(task))
    }

    pub fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, GatewayError> {
        let provider = self.provider_for(req.task)?;
        let name = provider.name().to_string();
        let key = CacheKey::new(&name, req);

        if let Some(text) = self.cache.as_ref().and_then(|c| c.get(&key)) {
            self.cache_hits.fetch_add(1, Ordering::SeqCst);
            return Ok(CompletionResponse {
                text,
                provider_name: name,
                cached: true,
            });
        }

        let slot: Slot = self
            .inflight
            .lock()
            .unwrap()
            .entry(key.clone())
            .or_default()
            .clone();
        let mut ran = false;
        let result = slot
            .get_or_init(|| {
                ran = true;
                self.call_with_retries(provider.as_ref(), req).and_then(|text| {
                    if let Some(cache) = &self.cache {
                        cache.put(&key, &name, req, &text)?;
                    }
                    Ok(text)
                })
            })
            .clone();
        if result.is_err() && ran {
            // Failures are not memoized; a later call may succeed.
            let mut map = self.inflight.lock().unwrap();
            if map.get(&key).is_some_and(|s| Arc::ptr_eq(s, &slot)) {
                map.remove(&key);
            }
        }
        if !ran && result.is_ok() {
            self.cache_hits.fetch_add(1, Ordering::SeqCst);
        }
        result.map(|text| CompletionResponse {
            text,
            provider_name: name,
            cached: !ran,
        })
    }

    fn call_with_retries(
        &self,
        provider: &dyn Provider,
        req: &CompletionRequest,
    ) -> Result<String, GatewayError> {
        let mut attempt = 0;
        loop {
            attempt += 1;
            let outcome = {
                let _permit = self.limiter.acquire();
                self.provider_calls.fetch_add(1, Ordering::SeqCst);
                provider.generate(req)
            };
            match outcome {
                Ok(text) if !text.trim().is_empty() => return Ok(text),
                Ok(_) => {
                    if attempt >= self.retry.max_attempts {
                        return Err(GatewayError::Transport {
                            attempts: attempt,
                            last: "empty response".into(),
                        });
                    }
                }
                Err(ProviderError::Transient(msg)) => {
                    if attempt >= self.retry.max_attempts {
                        return Err(GatewayError::Transport {
                            attempts: attempt,
                            last: msg,
                        });
                    }
                    log::warn!("provider {} attempt {attempt} failed: {msg}", provider.name());
                }
                Err(ProviderError::Policy(msg)) => return Err(GatewayError::Policy(msg)),
                Err(ProviderError::Fatal(msg)) => return Err(GatewayError::Provider(msg)),
            }
            std::thread::sleep(self.retry.delay(attempt));
        }
    }
}

struct NullProvider;

impl Provider for NullProvider {
    fn name(&self) -> &str {
        "null"
    }

    fn generate(&self, _req: &CompletionRequest) -> Result<String, ProviderError> {
        Err(ProviderError::Fatal("no provider configured".into()))
    }
}
