use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::world::{PostRef, SyntheticWorld};
use super::SimError;
use crate::fetcher::{to_micros, Admission, BurstBudget, FetchPolicy, FetchQueue};
use crate::tweetio::{fmt_time, Tweet, UserId};

const DAY: i64 = 86_400;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SimEvent {
    /// Seconds since the Unix epoch.
    pub at: i64,
    pub user: UserId,
}

pub fn events_from_tweets<'a>(tweets: impl IntoIterator<Item = &'a Tweet>) -> Vec<SimEvent> {
    tweets.into_iter().map(|t| SimEvent { at: t.timestamp(), user: t.user_id }).collect()
}

pub fn events_from_posts(posts: &[PostRef]) -> Vec<SimEvent> {
    posts.iter().map(|p| SimEvent { at: p.at, user: p.user }).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FetchMode {
    /// A profile exists right after the tweet that triggered its fetch.
    Instantaneous,
    RateLimited(FetchPolicy),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub thresholds: Vec<u32>,
    pub fetch: FetchMode,
    /// Only tweets in the first `horizon_days` UTC days are replayed.
    pub horizon_days: Option<u32>,
    /// Seed for sampled service times.
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { thresholds: vec![1, 3], fetch: FetchMode::Instantaneous, horizon_days: None, seed: crate::DEFAULT_SEED }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.thresholds.is_empty() {
            return Err(SimError::Config("at least one threshold is needed".into()));
        }
        if self.thresholds.contains(&0) {
            return Err(SimError::Config("thresholds must be at least 1".into()));
        }
        if self.horizon_days == Some(0) {
            return Err(SimError::Config("horizon_days must be at least 1".into()));
        }
        if let FetchMode::RateLimited(p) = &self.fetch {
            p.validate().map_err(SimError::Config)?;
        }
        Ok(())
    }
}

/// Counters for one UTC day under one threshold.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct DayRow {
    pub day: u32,
    pub date: String,
    pub threshold: u32,
    pub tweets: u64,
    /// Users whose N-th tweet fell on this day; each issues one fetch.
    pub new_users: u64,
    pub profiles_completed: u64,
    pub profile_tweets: u64,
    /// Users queued or being fetched at the end of the day.
    pub backlog: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThresholdSummary {
    pub threshold: u32,
    pub fetches: u64,
    pub profiles_completed: u64,
    pub profile_tweets: u64,
    pub no_profile_tweets: u64,
    /// Percentage of tweets routed to the profile classifier.
    pub coverage: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimReport {
    pub total_tweets: u64,
    pub total_users: u64,
    pub days: u32,
    /// Ordered by threshold then day.
    pub rows: Vec<DayRow>,
    pub summaries: Vec<ThresholdSummary>,
}

impl SimReport {
    pub fn summary(&self, threshold: u32) -> Option<&ThresholdSummary> {
        self.summaries.iter().find(|s| s.threshold == threshold)
    }

    pub fn days_for(&self, threshold: u32) -> impl Iterator<Item = &DayRow> {
        self.rows.iter().filter(move |r| r.threshold == threshold)
    }

    /// One row per day per threshold.
    pub fn write_csv<W: Write>(&self, w: W) -> io::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.rows {
            out.serialize(r)?;
        }
        out.flush()
    }

    pub fn write_summary<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{} tweets from {} users over {} days", self.total_tweets, self.total_users, self.days)?;
        for s in &self.summaries {
            writeln!(
                w,
                "N={}: {} fetches, {} profiles, {:.2}% of tweets on the profile path",
                s.threshold, s.fetches, s.profiles_completed, s.coverage
            )?;
        }
        Ok(())
    }
}

pub(crate) fn coverage_pct(profile_tweets: u64, total: u64) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * profile_tweets as f64 / total as f64
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Status {
    Counting,
    Pending,
    Profiled,
}

struct UserState {
    count: u32,
    status: Status,
}

/// Replays `events` once per threshold.
pub fn simulate(events: &[SimEvent], cfg: &SimConfig) -> Result<SimReport, SimError> {
    cfg.validate()?;
    if events.is_empty() {
        return Err(SimError::EmptyStream);
    }
    let mut events = events.to_vec();
    if !events.windows(2).all(|w| w[0].at <= w[1].at) {
        events.sort();
    }
    let start = events[0].at.div_euclid(DAY) * DAY;
    if let Some(h) = cfg.horizon_days {
        let end = start + h as i64 * DAY;
        events.retain(|e| e.at < end);
    }
    let days = ((events.last().unwrap().at - start) / DAY + 1) as u32;
    let users: HashSet<UserId> = events.iter().map(|e| e.user).collect();

    let mut thresholds = cfg.thresholds.clone();
    thresholds.sort_unstable();
    thresholds.dedup();
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for &n in &thresholds {
        let (day_rows, summary) = replay_one(&events, n, &cfg.fetch, cfg.seed, start, days);
        rows.extend(day_rows);
        summaries.push(summary);
    }
    Ok(SimReport { total_tweets: events.len() as u64, total_users: users.len() as u64, days, rows, summaries })
}

fn replay_one(
    events: &[SimEvent],
    n: u32,
    fetch: &FetchMode,
    seed: u64,
    start: i64,
    days: u32,
) -> (Vec<DayRow>, ThresholdSummary) {
    let mut rows: Vec<DayRow> = (0..days)
        .map(|d| DayRow {
            day: d,
            date: fmt_time(&chrono::DateTime::from_timestamp(start + d as i64 * DAY, 0).unwrap())[..10].to_owned(),
            threshold: n,
            ..Default::default()
        })
        .collect();
    let mut state: HashMap<UserId, UserState> = HashMap::new();
    let mut fetcher = match fetch {
        FetchMode::RateLimited(p) => Some(VirtualFetcher::new(p.clone(), seed)),
        FetchMode::Instantaneous => None,
    };
    let day_us = to_micros(DAY as f64);
    let mut profile_tweets = 0u64;
    let mut fetches = 0u64;
    let mut day_closed = 0usize;
    let run_fetcher = |f: &mut VirtualFetcher, until: u64, state: &mut HashMap<UserId, UserState>, rows: &mut [DayRow]| {
        f.advance(until, |user, at| {
            if let Some(s) = state.get_mut(&user) {
                s.status = Status::Profiled;
            }
            let d = ((at / day_us) as usize).min(rows.len() - 1);
            rows[d].profiles_completed += 1;
        });
    };
    for e in events {
        let d = ((e.at - start) / DAY) as usize;
        if let Some(f) = fetcher.as_mut() {
            // close the days before this tweet, then catch up to it
            while day_closed < d {
                run_fetcher(f, (day_closed as u64 + 1) * day_us - 1, &mut state, &mut rows);
                rows[day_closed].backlog = f.backlog();
                day_closed += 1;
            }
            run_fetcher(f, to_micros((e.at - start) as f64), &mut state, &mut rows);
        }
        let row = &mut rows[d];
        row.tweets += 1;
        let s = state.entry(e.user).or_insert(UserState { count: 0, status: Status::Counting });
        match s.status {
            Status::Profiled => {
                profile_tweets += 1;
                row.profile_tweets += 1;
            }
            Status::Pending => {
                s.count += 1;
                if let Some(f) = fetcher.as_mut() {
                    f.queue.raise(e.user, s.count);
                }
            }
            Status::Counting => {
                s.count += 1;
                if s.count == n {
                    fetches += 1;
                    row.new_users += 1;
                    match fetcher.as_mut() {
                        None => {
                            s.status = Status::Profiled;
                            row.profiles_completed += 1;
                        }
                        Some(f) => {
                            s.status = Status::Pending;
                            f.submit(e.user, s.count);
                        }
                    }
                }
            }
        }
    }
    if let Some(f) = fetcher.as_mut() {
        while day_closed < days as usize {
            run_fetcher(f, (day_closed as u64 + 1) * day_us - 1, &mut state, &mut rows);
            rows[day_closed].backlog = f.backlog();
            day_closed += 1;
        }
    }
    let completed = rows.iter().map(|r| r.profiles_completed).sum::<u64>();
    let total = events.len() as u64;
    let summary = ThresholdSummary {
        threshold: n,
        fetches,
        profiles_completed: completed,
        profile_tweets,
        no_profile_tweets: total - profile_tweets,
        coverage: coverage_pct(profile_tweets, total),
    };
    (rows, summary)
}

#[derive(Clone, Copy)]
struct Slot {
    user: Option<UserId>,
    pages_done: u32,
}

/// Rate-limited fetcher on a virtual microsecond clock measured from the replay start.
struct VirtualFetcher {
    policy: FetchPolicy,
    budget: BurstBudget,
    rng: ChaCha8Rng,
    queue: FetchQueue,
    slots: Vec<Slot>,
    idle: Vec<usize>,
    running: BinaryHeap<Reverse<(u64, usize)>>,
    wake: Option<u64>,
    now: u64,
}

impl VirtualFetcher {
    fn new(policy: FetchPolicy, seed: u64) -> Self {
        let k = policy.parallelism.max(1);
        VirtualFetcher {
            budget: policy.budget(),
            policy,
            rng: ChaCha8Rng::seed_from_u64(seed),
            queue: FetchQueue::unbounded(),
            slots: vec![Slot { user: None, pages_done: 0 }; k],
            idle: (0..k).rev().collect(),
            running: BinaryHeap::new(),
            wake: None,
            now: 0,
        }
    }

    fn submit(&mut self, user: UserId, priority: u32) {
        let _ = self.queue.enqueue(user, priority);
    }

    fn backlog(&self) -> u64 {
        (self.queue.len() + self.slots.iter().filter(|s| s.user.is_some()).count()) as u64
    }

    /// Index into `idle` of a slot that can start a request now.
    fn ready_slot(&self) -> Option<usize> {
        let busy = self.idle.iter().rposition(|&w| self.slots[w].user.is_some());
        busy.or_else(|| (!self.idle.is_empty() && !self.queue.is_empty()).then(|| self.idle.len() - 1))
    }

    fn admit(&mut self) {
        while let Some(i) = self.ready_slot() {
            match self.budget.try_admit(self.now) {
                Admission::Granted => {
                    let w = self.idle.remove(i);
                    if self.slots[w].user.is_none() {
                        let (user, _) = self.queue.try_pop().expect("queue checked non-empty");
                        self.slots[w] = Slot { user: Some(user), pages_done: 0 };
                    }
                    let done = self.now + self.policy.service.sample_micros(&mut self.rng);
                    self.running.push(Reverse((done, w)));
                }
                Admission::RetryAt(t) => {
                    self.wake = Some(t);
                    return;
                }
                Admission::AwaitCompletions => return,
            }
        }
    }

    /// Processes everything up to and including `until`; `on_profile(user, at)` fires per finished profile.
    fn advance(&mut self, until: u64, mut on_profile: impl FnMut(UserId, u64)) {
        loop {
            self.admit();
            let next_done = self.running.peek().map(|r| r.0 .0);
            let wake = self.wake.filter(|_| self.ready_slot().is_some());
            let next = match (next_done, wake) {
                (Some(d), Some(t)) => d.min(t),
                (Some(d), None) => d,
                (None, Some(t)) => t,
                (None, None) => break,
            };
            if next > until {
                break;
            }
            self.now = next;
            if self.wake.is_some_and(|t| t <= self.now) {
                self.wake = None;
            }
            if next_done == Some(self.now) {
                let Reverse((_, w)) = self.running.pop().unwrap();
                let slot = &mut self.slots[w];
                slot.pages_done += 1;
                if slot.pages_done == self.policy.requests_per_profile {
                    on_profile(slot.user.take().expect("running slot has a user"), self.now);
                    slot.pages_done = 0;
                }
                self.idle.push(w);
                self.budget.complete(self.now);
            }
        }
        self.now = self.now.max(until);
    }
}

/// Replays the whole window of a synthetic world.
pub fn simulate_world(world: &SyntheticWorld, cfg: &SimConfig) -> Result<SimReport, SimError> {
    simulate(&events_from_posts(&world.posts()), cfg)
}
