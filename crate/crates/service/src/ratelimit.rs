//! Token-bucket rate limiting with integer nano-token accounting, so that
//! refill arithmetic is exact under an injected clock.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::UNIX_EPOCH;

use ans_core::clock::Clock;
use serde::{Deserialize, Serialize};

const NANO: u128 = 1_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct RateLimitConfig {
    pub burst_capacity: u64,
    /// Tokens added per second.
    pub refill_rate: u64,
    /// Keep a separate bucket per (client, capability) instead of per client.
    pub per_capability: bool,
}

impl Default for RateLimitConfig {
    fn default() -> Self {
        RateLimitConfig {
            burst_capacity: 500,
            refill_rate: 100,
            per_capability: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TokenBucket {
    capacity: u128,
    refill_rate: u128,
    /// Current level in billionths of a token.
    level: u128,
    /// Nanoseconds since the epoch at the last refill.
    last: u128,
}

impl TokenBucket {
    /// A full bucket as of `now_nanos`.
    pub fn new(capacity: u64, refill_rate: u64, now_nanos: u128) -> Self {
        TokenBucket {
            capacity: u128::from(capacity) * NANO,
            refill_rate: u128::from(refill_rate),
            level: u128::from(capacity) * NANO,
            last: now_nanos,
        }
    }

    fn refill(&mut self, now_nanos: u128) {
        let elapsed = now_nanos.saturating_sub(self.last);
        // rate tokens/s * elapsed ns = nano-tokens
        self.level = (self.level + elapsed * self.refill_rate).min(self.capacity);
        self.last = self.last.max(now_nanos);
    }

    /// Takes one token if available.
    pub fn try_acquire(&mut self, now_nanos: u128) -> bool {
        self.refill(now_nanos);
        if self.level >= NANO {
            self.level -= NANO;
            true
        } else {
            false
        }
    }

    /// Level in whole tokens after refilling to `now_nanos`.
    pub fn level(&mut self, now_nanos: u128) -> f64 {
        self.refill(now_nanos);
        self.level as f64 / NANO as f64
    }

    fn is_full(&self) -> bool {
        self.level >= self.capacity
    }
}

/// Buckets keyed by client identity (and capability, when enabled).
pub struct RateLimiter {
    config: RateLimitConfig,
    clock: Arc<dyn Clock>,
    buckets: Mutex<HashMap<String, TokenBucket>>,
}

impl std::fmt::Debug for RateLimiter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RateLimiter")
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

const PRUNE_AT: usize = 10_000;

impl RateLimiter {
    pub fn new(config: RateLimitConfig, clock: Arc<dyn Clock>) -> Self {
        RateLimiter {
            config,
            clock,
            buckets: Mutex::new(HashMap::new()),
        }
    }

    pub fn config(&self) -> &RateLimitConfig {
        &self.config
    }

    fn now_nanos(&self) -> u128 {
        self.clock
            .now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_nanos())
            .unwrap_or(0)
    }

    fn scope(&self, client: &str, capability: Option<&str>) -> String {
        match capability {
            Some(cap) if self.config.per_capability => format!("{client}\u{0}{cap}"),
            _ => client.to_string(),
        }
    }

    /// Consumes a token for the caller's scope; `false` means reject.
    pub fn check(&self, client: &str, capability: Option<&str>) -> bool {
        let now = self.now_nanos();
        let scope = self.scope(client, capability);
        let mut buckets = self.buckets.lock().expect("bucket lock");
        if buckets.len() >= PRUNE_AT {
            buckets.retain(|_, b| {
                b.refill(now);
                !b.is_full()
            });
        }
        buckets
            .entry(scope)
            .or_insert_with(|| TokenBucket::new(self.config.burst_capacity, self.config.refill_rate, now))
            .try_acquire(now)
    }

    /// Current level for a scope, or the capacity if it has no bucket yet.
    pub fn level(&self, client: &str, capability: Option<&str>) -> f64 {
        let now = self.now_nanos();
        let scope = self.scope(client, capability);
        match self.buckets.lock().expect("bucket lock").get_mut(&scope) {
            Some(b) => b.level(now),
            None => self.config.burst_capacity as f64,
        }
    }
}
