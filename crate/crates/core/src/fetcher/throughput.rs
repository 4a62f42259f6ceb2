use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{to_micros, Admission, FetchPolicy, MICROS};
use crate::tweetio::UserId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Admit,
    Complete,
    Profile,
    Pause,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Admit => "admit",
            EventKind::Complete => "complete",
            EventKind::Profile => "profile",
            EventKind::Pause => "pause",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ThroughputEvent {
    /// Virtual microseconds since the start.
    pub at: u64,
    pub kind: EventKind,
    pub user: UserId,
}

#[derive(Clone, Debug, Default)]
pub struct ThroughputReport {
    pub horizon_secs: f64,
    pub requests_admitted: u64,
    pub requests_completed: u64,
    pub profiles_completed: u64,
    pub pauses: u64,
    pub events: Vec<ThroughputEvent>,
}

impl ThroughputReport {
    pub fn admissions(&self) -> impl Iterator<Item = u64> + '_ {
        self.events.iter().filter(|e| e.kind == EventKind::Admit).map(|e| e.at)
    }

    /// Duration of each completed burst: first admission to the completion that starts the pause.
    pub fn burst_spans(&self) -> Vec<u64> {
        let mut spans = Vec::new();
        let mut start = None;
        for e in &self.events {
            match e.kind {
                EventKind::Admit => {
                    start.get_or_insert(e.at);
                }
                EventKind::Pause => {
                    if let Some(s) = start.take() {
                        spans.push(e.at - s);
                    }
                }
                _ => {}
            }
        }
        spans
    }
}

#[derive(Clone, Copy)]
struct Worker {
    user: Option<UserId>,
    pages_done: u32,
}

/// Exact discrete-event run of the request budget against an unlimited supply
/// of users. Requests are admitted in `[0, horizon)`; completions count up to
/// and including `horizon`. A user's pages run sequentially on one worker.
pub fn simulate_throughput(policy: &FetchPolicy, horizon_secs: f64, seed: u64, record: bool) -> ThroughputReport {
    let horizon = to_micros(horizon_secs);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut budget = policy.budget();
    let mut workers = vec![Worker { user: None, pages_done: 0 }; policy.parallelism.max(1)];
    let mut idle: Vec<usize> = (0..workers.len()).rev().collect();
    // (completion time, worker)
    let mut running: BinaryHeap<Reverse<(u64, usize)>> = BinaryHeap::new();
    let mut next_user: UserId = 0;
    let mut report = ThroughputReport { horizon_secs, ..Default::default() };
    let log = |report: &mut ThroughputReport, at, kind, user| {
        if record {
            report.events.push(ThroughputEvent { at, kind, user });
        }
    };
    let mut now = 0u64;
    loop {
        let mut wake = None;
        while now < horizon {
            let Some(&w) = idle.last() else { break };
            match budget.try_admit(now) {
                Admission::Granted => {
                    idle.pop();
                    let user = *workers[w].user.get_or_insert_with(|| {
                        next_user += 1;
                        next_user
                    });
                    report.requests_admitted += 1;
                    log(&mut report, now, EventKind::Admit, user);
                    running.push(Reverse((now + policy.service.sample_micros(&mut rng), w)));
                }
                Admission::RetryAt(t) => {
                    wake = Some(t);
                    break;
                }
                Admission::AwaitCompletions => break,
            }
        }
        let next_done = running.peek().map(|r| r.0 .0);
        let next = match (next_done, wake) {
            (Some(d), Some(t)) => d.min(t),
            (Some(d), None) => d,
            (None, Some(t)) => t,
            (None, None) => break,
        };
        if next > horizon || (next_done.is_none() && next >= horizon) {
            break;
        }
        now = next;
        if next_done == Some(now) {
            let Reverse((_, w)) = running.pop().unwrap();
            let user = workers[w].user.expect("running worker has a user");
            report.requests_completed += 1;
            log(&mut report, now, EventKind::Complete, user);
            workers[w].pages_done += 1;
            if workers[w].pages_done == policy.requests_per_profile {
                report.profiles_completed += 1;
                log(&mut report, now, EventKind::Profile, user);
                workers[w] = Worker { user: None, pages_done: 0 };
            }
            idle.push(w);
            if budget.complete(now).is_some() {
                report.pauses += 1;
                log(&mut report, now, EventKind::Pause, 0);
            }
        }
    }
    report
}

/// Largest number of admissions inside any half-open window `[t, t + window)`.
pub fn max_admissions_in_window(admissions: &[u64], window_micros: u64) -> usize {
    let w = window_micros;
    let mut best = 0;
    let mut lo = 0;
    for hi in 0..admissions.len() {
        while admissions[hi] - admissions[lo] >= w {
            lo += 1;
        }
        best = best.max(hi - lo + 1);
    }
    best
}

/// CSV event log: `timestamp,event,user_id` with timestamps in seconds.
pub fn write_event_log<W: Write>(mut w: W, events: &[ThroughputEvent]) -> io::Result<()> {
    writeln!(w, "timestamp,event,user_id")?;
    for e in events {
        writeln!(w, "{:.6},{},{}", e.at as f64 / MICROS, e.kind.as_str(), e.user)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fetcher::ServiceTime;

    fn unlimited(secs: f64) -> FetchPolicy {
        FetchPolicy {
            burst_size: u32::MAX,
            pause_secs: 0.0,
            service: ServiceTime::Fixed { secs },
            ..FetchPolicy::recent_timeline()
        }
    }

    #[test]
    fn unlimited_budget_is_arithmetic() {
        let r = simulate_throughput(&unlimited(1.0), 3600.0, 0, false);
        assert_eq!(r.requests_admitted, 3600);
        assert_eq!(r.requests_completed, 3600);
        assert_eq!(r.profiles_completed, 3600);
    }

    #[test]
    fn parallel_workers_multiply() {
        let p = FetchPolicy { parallelism: 4, ..unlimited(2.0) };
        let r = simulate_throughput(&p, 100.0, 0, false);
        assert_eq!(r.requests_completed, 200);
    }

    #[test]
    fn small_burst_schedule() {
        let p = FetchPolicy {
            burst_size: 3,
            pause_secs: 10.0,
            service: ServiceTime::Fixed { secs: 1.0 },
            ..FetchPolicy::recent_timeline()
        };
        // cycle: 3 s of requests + 10 s pause
        let r = simulate_throughput(&p, 26.0, 0, true);
        assert_eq!(r.requests_completed, 6);
        assert_eq!(r.pauses, 2);
        let adm: Vec<u64> = r.admissions().collect();
        assert_eq!(adm, vec![0, 1_000_000, 2_000_000, 13_000_000, 14_000_000, 15_000_000]);
        assert_eq!(max_admissions_in_window(&adm, 13_000_000), 3);
        assert_eq!(max_admissions_in_window(&adm, 13_000_001), 4);
        assert_eq!(r.burst_spans(), vec![3_000_000, 3_000_000]);
    }

    #[test]
    fn multi_page_profiles() {
        let p = FetchPolicy { requests_per_profile: 4, ..unlimited(1.0) };
        let r = simulate_throughput(&p, 40.0, 0, false);
        assert_eq!(r.profiles_completed, 10);
    }

    #[test]
    fn event_log_csv() {
        let mut buf = Vec::new();
        write_event_log(&mut buf, &[ThroughputEvent { at: 1_500_000, kind: EventKind::Admit, user: 7 }]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "timestamp,event,user_id\n1.500000,admit,7\n");
    }
}
