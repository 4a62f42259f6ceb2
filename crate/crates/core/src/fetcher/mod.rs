//! Rate-limited background timeline fetching.
//!
//! The request budget admits bursts of 895 requests followed by a 300 s
//! pause, which keeps clear of the API limit of 900 requests per 15 minutes.
//! [`simulate_throughput`] runs the same budget on a virtual clock; the live
//! [`Fetcher`] runs it on the wall clock against a [`TimelineSource`].
//!
//! Service times are per-request durations. The measured download times of
//! 1.27 s per 200-tweet timeline and 15 s per full timeline are averages that
//! already include the pauses, so [`FetchPolicy::from_profile_time`] derives
//! the per-request service time that reproduces them:
//! `service = profile_time / requests_per_profile - pause / burst_size`.

mod budget;
mod queue;
mod source;
mod throughput;
mod worker;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

pub use budget::{Admission, BurstBudget};
pub use queue::{Enqueued, FetchQueue, QueueFull};
pub use source::{
    fetch_timeline, HttpTimelineSource, ReplaySource, SourceError, TimelineSource, Transport,
};
pub use throughput::{
    max_admissions_in_window, simulate_throughput, write_event_log, EventKind, ThroughputEvent, ThroughputReport,
};
pub use worker::{FetchStats, Fetcher, ProfileBuilder};

pub const BURST_SIZE: u32 = 895;
pub const PAUSE_SECS: f64 = 300.0;
/// Tweets returned per timeline request.
pub const PAGE_SIZE: usize = 200;
/// The hard API limit the policy stays under.
pub const API_LIMIT: u32 = 900;
pub const API_WINDOW_SECS: f64 = 900.0;

/// Seconds per profile including pauses, 200-tweet mode.
pub const RECENT_PROFILE_SECS: f64 = 1.27;
/// Seconds per profile including pauses, full-timeline mode.
pub const FULL_PROFILE_SECS: f64 = 15.0;
/// Pages needed for a full timeline (3,200 tweets).
pub const FULL_TIMELINE_PAGES: u32 = 16;

pub const MICROS: f64 = 1e6;

/// Seconds to virtual-clock microseconds, rounded.
pub fn to_micros(secs: f64) -> u64 {
    (secs * MICROS).round().max(0.0) as u64
}

/// Per-request service time model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ServiceTime {
    Fixed { secs: f64 },
    Uniform { min: f64, max: f64 },
    Exponential { mean: f64 },
}

impl ServiceTime {
    pub fn mean(&self) -> f64 {
        match *self {
            ServiceTime::Fixed { secs } => secs,
            ServiceTime::Uniform { min, max } => (min + max) / 2.0,
            ServiceTime::Exponential { mean } => mean,
        }
    }

    /// One draw, in microseconds.
    pub fn sample_micros<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let secs = match *self {
            ServiceTime::Fixed { secs } => secs,
            ServiceTime::Uniform { min, max } if max > min => rng.random_range(min..max),
            ServiceTime::Uniform { min, .. } => min,
            ServiceTime::Exponential { mean } => match Exp::new(1.0 / mean) {
                Ok(d) => d.sample(rng),
                Err(_) => 0.0,
            },
        };
        to_micros(secs)
    }

    fn validate(&self) -> Result<(), String> {
        let ok = match *self {
            ServiceTime::Fixed { secs } => secs >= 0.0,
            ServiceTime::Uniform { min, max } => min >= 0.0 && max >= min,
            ServiceTime::Exponential { mean } => mean > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(format!("invalid service time {self:?}"))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FetchPolicy {
    pub burst_size: u32,
    pub pause_secs: f64,
    pub requests_per_profile: u32,
    pub service: ServiceTime,
    /// Concurrent requests; admission stays serialized.
    pub parallelism: usize,
    /// Extra attempts per request after a transient failure.
    pub max_retries: u32,
    pub page_size: usize,
}

impl FetchPolicy {
    /// Policy whose average time per completed profile, pauses included, is `profile_secs`.
    pub fn from_profile_time(requests_per_profile: u32, profile_secs: f64) -> Self {
        let service = profile_secs / requests_per_profile as f64 - PAUSE_SECS / BURST_SIZE as f64;
        FetchPolicy {
            burst_size: BURST_SIZE,
            pause_secs: PAUSE_SECS,
            requests_per_profile,
            service: ServiceTime::Fixed { secs: service.max(0.0) },
            parallelism: 1,
            max_retries: 3,
            page_size: PAGE_SIZE,
        }
    }

    /// One request per profile, 1.27 s per profile on average.
    pub fn recent_timeline() -> Self {
        Self::from_profile_time(1, RECENT_PROFILE_SECS)
    }

    /// Sixteen requests per profile, 15 s per profile on average.
    pub fn full_timeline() -> Self {
        Self::from_profile_time(FULL_TIMELINE_PAGES, FULL_PROFILE_SECS)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.burst_size == 0 {
            return Err("burst_size must be at least 1".into());
        }
        if !(self.pause_secs >= 0.0) {
            return Err("pause must be non-negative".into());
        }
        if self.requests_per_profile == 0 {
            return Err("requests_per_profile must be at least 1".into());
        }
        if self.parallelism == 0 {
            return Err("parallelism must be at least 1".into());
        }
        if self.page_size == 0 || self.page_size > PAGE_SIZE {
            return Err(format!("page_size must be in 1..={PAGE_SIZE}"));
        }
        self.service.validate()
    }

    pub fn pause_micros(&self) -> u64 {
        to_micros(self.pause_secs)
    }

    /// Length of one full burst at the mean service time, serial execution.
    pub fn burst_secs(&self) -> f64 {
        self.burst_size as f64 * self.service.mean() / self.parallelism as f64
    }

    pub fn budget(&self) -> BurstBudget {
        BurstBudget::new(self.burst_size, self.pause_micros())
    }
}

impl Default for FetchPolicy {
    fn default() -> Self {
        Self::recent_timeline()
    }
}
