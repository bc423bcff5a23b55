//! Token buckets under a manual clock: a burst of 500, then 100 per second.
//!
//! ```text
//! cargo run -p ans-service --example rate_limit
//! ```

use std::sync::Arc;
use std::time::Duration;

use ans_core::clock::ManualClock;
use ans_service::{RateLimitConfig, RateLimiter};

fn main() {
    let clock = Arc::new(ManualClock::at_unix(1_760_000_000));
    let limiter = RateLimiter::new(RateLimitConfig::default(), clock.clone());
    println!("config: {:?}", limiter.config());

    let burst = (0..600).filter(|_| limiter.check("10.0.0.7", None)).count();
    println!("600 requests at once: {burst} admitted");

    for ms in [10, 250, 1000] {
        clock.advance(Duration::from_millis(ms));
        println!("+{ms:>4} ms: level {:.2}", limiter.level("10.0.0.7", None));
    }
    let refill = (0..200).filter(|_| limiter.check("10.0.0.7", None)).count();
    println!("200 more: {refill} admitted");
    println!("another client is unaffected: {}", limiter.check("10.0.0.8", None));
}
