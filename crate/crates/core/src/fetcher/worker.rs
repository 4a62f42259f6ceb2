use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use parking_lot::{Condvar, Mutex};

use super::{Admission, BurstBudget, FetchPolicy, FetchQueue, SourceError, TimelineSource};
use crate::features::{ChiSquaredInput, SourceTaxonomy};
use crate::profiles::{build_profile, ProfileError, ProfileStore, UserProfile};
use crate::tweetio::{Tweet, UserId};

/// What the installer needs to turn a timeline into a profile.
#[derive(Clone, Debug)]
pub struct ProfileBuilder {
    pub taxonomy: Arc<SourceTaxonomy>,
    pub chi_input: ChiSquaredInput,
}

impl ProfileBuilder {
    pub fn new(taxonomy: SourceTaxonomy, chi_input: ChiSquaredInput) -> Self {
        ProfileBuilder { taxonomy: Arc::new(taxonomy), chi_input }
    }

    pub fn build(&self, user: UserId, rats: &[Tweet], now: DateTime<Utc>) -> Result<UserProfile, ProfileError> {
        build_profile(user, rats, now, &self.taxonomy, self.chi_input)
    }
}

impl Default for ProfileBuilder {
    fn default() -> Self {
        Self::new(SourceTaxonomy::builtin(), ChiSquaredInput::default())
    }
}

#[derive(Debug, Default)]
pub struct FetchStats {
    pub requests: AtomicU64,
    pub failed_requests: AtomicU64,
    pub profiles: AtomicU64,
    pub dropped_users: AtomicU64,
}

impl FetchStats {
    pub fn profiles(&self) -> u64 {
        self.profiles.load(Ordering::Relaxed)
    }
    pub fn requests(&self) -> u64 {
        self.requests.load(Ordering::Relaxed)
    }
    pub fn dropped(&self) -> u64 {
        self.dropped_users.load(Ordering::Relaxed)
    }
}

struct WallBudget {
    start: Instant,
    budget: Mutex<BurstBudget>,
    changed: Condvar,
}

impl WallBudget {
    fn now(&self) -> u64 {
        self.start.elapsed().as_micros() as u64
    }

    /// Blocks until a request may start. False if stopping.
    fn acquire(&self, stop: &AtomicBool) -> bool {
        let mut b = self.budget.lock();
        loop {
            if stop.load(Ordering::Relaxed) {
                return false;
            }
            let now = self.now();
            let wait = match b.try_admit(now) {
                Admission::Granted => return true,
                Admission::RetryAt(t) => Duration::from_micros(t - now).min(Duration::from_millis(200)),
                Admission::AwaitCompletions => Duration::from_millis(200),
            };
            self.changed.wait_for(&mut b, wait);
        }
    }

    fn release(&self) {
        self.budget.lock().complete(self.now());
        self.changed.notify_all();
    }
}

struct Shared {
    policy: FetchPolicy,
    queue: Arc<FetchQueue>,
    source: Arc<dyn TimelineSource>,
    store: Arc<ProfileStore>,
    builder: ProfileBuilder,
    budget: WallBudget,
    stats: Arc<FetchStats>,
    stop: AtomicBool,
}

impl Shared {
    fn request(&self, user: UserId, max_id: Option<u64>) -> Option<Result<Vec<Tweet>, SourceError>> {
        let mut attempt = 0;
        loop {
            if !self.budget.acquire(&self.stop) {
                return None;
            }
            let res = self.source.fetch_page(user, self.policy.page_size, max_id);
            self.budget.release();
            self.stats.requests.fetch_add(1, Ordering::Relaxed);
            match res {
                Err(e) if e.is_transient() && attempt < self.policy.max_retries => {
                    self.stats.failed_requests.fetch_add(1, Ordering::Relaxed);
                    attempt += 1;
                }
                other => return Some(other),
            }
        }
    }

    fn fetch(&self, user: UserId) -> Option<Result<Vec<Tweet>, SourceError>> {
        let mut out: Vec<Tweet> = Vec::new();
        for _ in 0..self.policy.requests_per_profile {
            let page = match self.request(user, out.last().map(|t| t.id))? {
                Ok(p) => p,
                Err(e) => return Some(Err(e)),
            };
            let short = page.len() < self.policy.page_size;
            out.extend(page);
            if short {
                break;
            }
        }
        Some(Ok(out))
    }

    fn run(&self) {
        while let Some((user, _)) = self.queue.pop() {
            if self.stop.load(Ordering::Relaxed) {
                break;
            }
            let outcome = match self.fetch(user) {
                None => break,
                Some(Ok(rats)) => self.builder.build(user, &rats, Utc::now()).map_err(|e| e.to_string()),
                Some(Err(e)) => Err(e.to_string()),
            };
            match outcome {
                Ok(p) => {
                    self.store.install(p);
                    self.stats.profiles.fetch_add(1, Ordering::Relaxed);
                }
                Err(e) => {
                    log::warn!("dropping fetch for user {user}: {e}");
                    self.store.abort_fetch(user);
                    self.stats.dropped_users.fetch_add(1, Ordering::Relaxed);
                }
            }
        }
    }
}

/// Background fetch workers installing profiles into a store.
pub struct Fetcher {
    shared: Arc<Shared>,
    handles: Vec<JoinHandle<()>>,
}

impl Fetcher {
    pub fn spawn(
        policy: FetchPolicy,
        queue: Arc<FetchQueue>,
        source: Arc<dyn TimelineSource>,
        store: Arc<ProfileStore>,
        builder: ProfileBuilder,
    ) -> Fetcher {
        let budget = WallBudget { start: Instant::now(), budget: Mutex::new(policy.budget()), changed: Condvar::new() };
        let workers = policy.parallelism.max(1);
        let shared = Arc::new(Shared {
            policy,
            queue,
            source,
            store,
            builder,
            budget,
            stats: Arc::new(FetchStats::default()),
            stop: AtomicBool::new(false),
        });
        let handles = (0..workers)
            .map(|i| {
                let s = shared.clone();
                thread::Builder::new()
                    .name(format!("fetch-{i}"))
                    .spawn(move || s.run())
                    .expect("spawn fetch worker")
            })
            .collect();
        Fetcher { shared, handles }
    }

    pub fn stats(&self) -> Arc<FetchStats> {
        self.shared.stats.clone()
    }

    /// Waits until the queue is empty and no fetch is pending, or the timeout passes.
    pub fn wait_idle(&self, timeout: Duration) -> bool {
        let deadline = Instant::now() + timeout;
        while Instant::now() < deadline {
            if self.shared.queue.is_empty() && self.shared.store.pending_count() == 0 {
                return true;
            }
            thread::sleep(Duration::from_millis(2));
        }
        false
    }

    fn signal_stop(&self) {
        self.shared.stop.store(true, Ordering::Relaxed);
        self.shared.queue.close();
        self.shared.budget.changed.notify_all();
    }

    /// Stops the workers and joins them. Blocks while a source call is in progress.
    pub fn shutdown(mut self) {
        self.signal_stop();
        for h in self.handles.drain(..) {
            let _ = h.join();
        }
    }
}

impl Drop for Fetcher {
    fn drop(&mut self) {
        // workers stuck in a source call are left detached
        self.signal_stop();
    }
}
