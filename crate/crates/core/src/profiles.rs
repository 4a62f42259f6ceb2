//! User profiles and the concurrent profile store.
//!
//! The store has one writer (the fetch installer) and any number of readers.
//! Per-profile classification counters are atomics updated under the read
//! lock, so the classification path never takes the write lock.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::num::NonZeroUsize;
use std::path::Path;
use std::sync::atomic::{AtomicU32, Ordering};

use chrono::{DateTime, Duration, Utc};
use lru::LruCache;
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{timeline_properties, ChiSquaredInput, FeatureError, SourceTaxonomy, TimelineProperties};
use crate::tweetio::{Tweet, UserId};

/// Most recent tweets a profile is built from; also one timeline page.
pub const RAT_LIMIT: usize = 200;
/// Classifications after which a profile counts as old.
pub const DEFAULT_STALE_AFTER: u32 = 200;
pub const DEFAULT_SEEN_CAP: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("cannot build a profile from an empty timeline")]
    EmptyTimeline,
    #[error("timeline of user {expected} contains a tweet by user {found}")]
    ForeignTweet { expected: UserId, found: UserId },
    #[error("no profile for user {0}")]
    Absent(UserId),
    #[error("profile snapshot: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: UserId,
    pub props: TimelineProperties,
    pub rat_count: u32,
    #[serde(with = "crate::tweetio::time_serde")]
    pub fetched_at: DateTime<Utc>,
    #[serde(default)]
    pub classified_since_fetch: u32,
}

/// Builds a profile from a user's timeline. Only the 200 most recent tweets are used.
pub fn build_profile(
    user_id: UserId,
    rats: &[Tweet],
    now: DateTime<Utc>,
    tax: &SourceTaxonomy,
    chi: ChiSquaredInput,
) -> Result<UserProfile, ProfileError> {
    if rats.is_empty() {
        return Err(ProfileError::EmptyTimeline);
    }
    if let Some(t) = rats.iter().find(|t| t.user_id != user_id) {
        return Err(ProfileError::ForeignTweet { expected: user_id, found: t.user_id });
    }
    let props = if rats.len() > RAT_LIMIT {
        let mut sorted: Vec<&Tweet> = rats.iter().collect();
        sorted.sort_by_key(|t| (t.created_at, t.id));
        let recent: Vec<Tweet> = sorted[sorted.len() - RAT_LIMIT..].iter().map(|t| (*t).clone()).collect();
        timeline_properties(&recent, tax, chi)?
    } else {
        timeline_properties(rats, tax, chi)?
    };
    Ok(UserProfile {
        user_id,
        props,
        rat_count: rats.len().min(RAT_LIMIT) as u32,
        fetched_at: now,
        classified_since_fetch: 0,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoreConfig {
    pub stale_after: u32,
    /// Secondary staleness by profile age; off by default.
    #[serde(default)]
    pub max_age_secs: Option<i64>,
    pub seen_cap: usize,
}

impl Default for StoreConfig {
    fn default() -> Self {
        StoreConfig { stale_after: DEFAULT_STALE_AFTER, max_age_secs: None, seen_cap: DEFAULT_SEEN_CAP }
    }
}

struct Slot {
    profile: UserProfile,
    classified: AtomicU32,
}

struct Unprofiled {
    seen: LruCache<UserId, u32>,
    pending: HashSet<UserId>,
}

/// Result of observing a tweet from a user without a profile.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Sighting {
    /// Tweets seen from this user without a profile, this one included.
    pub seen: u32,
    /// True when the caller should enqueue a fetch; the user is now pending.
    pub should_fetch: bool,
}

pub struct ProfileStore {
    cfg: StoreConfig,
    profiles: RwLock<HashMap<UserId, Slot>>,
    unprofiled: Mutex<Unprofiled>,
}

const SNAPSHOT_FORMAT: &str = "agt-profiles";
const SNAPSHOT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct SnapshotHeader {
    format: String,
    version: u32,
    count: usize,
}

impl ProfileStore {
    pub fn new(cfg: StoreConfig) -> Self {
        let cap = NonZeroUsize::new(cfg.seen_cap.max(1)).unwrap();
        ProfileStore {
            cfg,
            profiles: RwLock::new(HashMap::new()),
            unprofiled: Mutex::new(Unprofiled { seen: LruCache::new(cap), pending: HashSet::new() }),
        }
    }

    pub fn config(&self) -> &StoreConfig {
        &self.cfg
    }

    pub fn len(&self) -> usize {
        self.profiles.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, user: UserId) -> bool {
        self.profiles.read().contains_key(&user)
    }

    /// Copy of the profile with its current classification counter.
    pub fn get(&self, user: UserId) -> Option<UserProfile> {
        self.profiles.read().get(&user).map(|s| {
            let mut p = s.profile.clone();
            p.classified_since_fetch = s.classified.load(Ordering::Relaxed);
            p
        })
    }

    /// Counts one classification; returns true once the profile is old.
    pub fn note_classified(&self, user: UserId, now: DateTime<Utc>) -> Result<bool, ProfileError> {
        let map = self.profiles.read();
        let slot = map.get(&user).ok_or(ProfileError::Absent(user))?;
        let count = slot.classified.fetch_add(1, Ordering::Relaxed).saturating_add(1);
        let aged = self.cfg.max_age_secs.is_some_and(|s| now - slot.profile.fetched_at >= Duration::seconds(s));
        Ok(count >= self.cfg.stale_after || aged)
    }

    /// Counts a tweet from a user without a profile and decides whether to fetch.
    pub fn note_unprofiled_tweet(&self, user: UserId, threshold: u32) -> Sighting {
        let mut u = self.unprofiled.lock();
        let seen = {
            let c = u.seen.get_or_insert_mut(user, || 0);
            *c = c.saturating_add(1);
            *c
        };
        let should_fetch = seen >= threshold && u.pending.insert(user);
        Sighting { seen, should_fetch }
    }

    /// Marks a profiled user as pending refresh. False if a fetch is already in flight.
    pub fn begin_refresh(&self, user: UserId) -> bool {
        self.unprofiled.lock().pending.insert(user)
    }

    pub fn is_pending(&self, user: UserId) -> bool {
        self.unprofiled.lock().pending.contains(&user)
    }

    pub fn pending_count(&self) -> usize {
        self.unprofiled.lock().pending.len()
    }

    /// Tweets seen without a profile for this user, if still tracked.
    pub fn seen_count(&self, user: UserId) -> Option<u32> {
        self.unprofiled.lock().seen.peek(&user).copied()
    }

    /// Installs a freshly built profile, resetting its counter and clearing the pending flag.
    pub fn install(&self, mut profile: UserProfile) {
        let user = profile.user_id;
        profile.classified_since_fetch = 0;
        self.profiles.write().insert(user, Slot { profile, classified: AtomicU32::new(0) });
        let mut u = self.unprofiled.lock();
        u.pending.remove(&user);
        u.seen.pop(&user);
    }

    /// Gives up on an in-flight fetch; the user becomes fetchable on the next sighting.
    pub fn abort_fetch(&self, user: UserId) {
        self.unprofiled.lock().pending.remove(&user);
    }

    pub fn user_ids(&self) -> Vec<UserId> {
        let mut ids: Vec<UserId> = self.profiles.read().keys().copied().collect();
        ids.sort_unstable();
        ids
    }

    /// Header line, then one profile per line in user-id order.
    pub fn write_snapshot<W: Write>(&self, w: W) -> io::Result<()> {
        let mut w = BufWriter::new(w);
        let ids = self.user_ids();
        let header = SnapshotHeader { format: SNAPSHOT_FORMAT.into(), version: SNAPSHOT_VERSION, count: ids.len() };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        for id in ids {
            if let Some(p) = self.get(id) {
                serde_json::to_writer(&mut w, &p)?;
                w.write_all(b"\n")?;
            }
        }
        w.flush()
    }

    pub fn save_snapshot(&self, path: impl AsRef<Path>) -> Result<(), ProfileError> {
        self.write_snapshot(fs::File::create(path)?)?;
        Ok(())
    }

    pub fn read_snapshot<R: io::Read>(r: R, cfg: StoreConfig) -> Result<Self, ProfileError> {
        let mut lines = BufReader::new(r).lines();
        let header: SnapshotHeader = match lines.next() {
            Some(line) => serde_json::from_str(&line?).map_err(|e| ProfileError::Snapshot(format!("header: {e}")))?,
            None => return Err(ProfileError::Snapshot("empty file".into())),
        };
        if header.format != SNAPSHOT_FORMAT || header.version != SNAPSHOT_VERSION {
            return Err(ProfileError::Snapshot(format!(
                "unsupported snapshot {} v{}",
                header.format, header.version
            )));
        }
        let store = ProfileStore::new(cfg);
        let mut n = 0;
        {
            let mut map = store.profiles.write();
            for (i, line) in lines.enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let p: UserProfile = serde_json::from_str(&line)
                    .map_err(|e| ProfileError::Snapshot(format!("line {}: {e}", i + 2)))?;
                let c = AtomicU32::new(p.classified_since_fetch);
                map.insert(p.user_id, Slot { profile: p, classified: c });
                n += 1;
            }
        }
        if n != header.count {
            return Err(ProfileError::Snapshot(format!("header says {} profiles, found {n}", header.count)));
        }
        Ok(store)
    }

    pub fn load_snapshot(path: impl AsRef<Path>, cfg: StoreConfig) -> Result<Self, ProfileError> {
        Self::read_snapshot(fs::File::open(path)?, cfg)
    }
}

impl Default for ProfileStore {
    fn default() -> Self {
        ProfileStore::new(StoreConfig::default())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{max_entropy, DeviceType};
    use crate::tweetio::Entities;
    use chrono::TimeZone;

    fn tweet(user: UserId, ts: i64, source: &str) -> Tweet {
        Tweet {
            id: ts as u64,
            user_id: user,
            created_at: Utc.timestamp_opt(ts, 0).unwrap(),
            text: "hello there".into(),
            entities: Entities::default(),
            number_count: 0,
            source: source.into(),
            in_reply_to_status_id: None,
            is_retweet: false,
            followers: 0,
            friends: 0,
            statuses_count: 1,
            favourites_count: 0,
            account_created_at: DateTime::UNIX_EPOCH,
        }
    }

    fn profile(user: UserId) -> UserProfile {
        build_profile(
            user,
            &[tweet(user, 100, "web")],
            Utc.timestamp_opt(1000, 0).unwrap(),
            &SourceTaxonomy::builtin(),
            ChiSquaredInput::PostingTime,
        )
        .unwrap()
    }

    fn now() -> DateTime<Utc> {
        Utc.timestamp_opt(2000, 0).unwrap()
    }

    #[test]
    fn periodic_bot_profile() {
        let rats: Vec<Tweet> = (0..200).map(|i| tweet(7, 1_000_000 + i * 3600, "Trendsmap Alerting")).collect();
        let p = build_profile(7, &rats, now(), &SourceTaxonomy::builtin(), ChiSquaredInput::PostingTime).unwrap();
        assert_eq!(p.props.entropy_sec, 0.0);
        assert_eq!(p.rat_count, 200);
        assert_eq!(p.classified_since_fetch, 0);
    }

    #[test]
    fn one_tweet_fallback_and_mobile_ratio() {
        let p = profile(1);
        assert_eq!(p.props.entropy_min, max_entropy());
        assert_eq!(p.props.chi_squared_sec, 1.0);
        let rats: Vec<Tweet> = (0..200)
            .map(|i| tweet(2, 10_000 + i * 77, if i < 120 { "Twitter for iPhone" } else { "Instagram" }))
            .collect();
        let p = build_profile(2, &rats, now(), &SourceTaxonomy::builtin(), ChiSquaredInput::PostingTime).unwrap();
        assert!((p.props.source_ratio(DeviceType::Mobile) - 0.6).abs() < 1e-12);
    }

    #[test]
    fn build_errors_and_cap() {
        let tax = SourceTaxonomy::builtin();
        assert!(matches!(
            build_profile(1, &[], now(), &tax, ChiSquaredInput::PostingTime),
            Err(ProfileError::EmptyTimeline)
        ));
        assert!(matches!(
            build_profile(1, &[tweet(2, 5, "x")], now(), &tax, ChiSquaredInput::PostingTime),
            Err(ProfileError::ForeignTweet { expected: 1, found: 2 })
        ));
        let rats: Vec<Tweet> = (0..250).map(|i| tweet(3, 1000 + i * 60, "web")).collect();
        let p = build_profile(3, &rats, now(), &tax, ChiSquaredInput::PostingTime).unwrap();
        assert_eq!(p.rat_count, 200);
    }

    #[test]
    fn staleness_counter() {
        let store = ProfileStore::default();
        assert!(matches!(store.note_classified(9, now()), Err(ProfileError::Absent(9))));
        store.install(profile(9));
        assert!(!store.note_classified(9, now()).unwrap());
        for _ in 1..199 {
            assert!(!store.note_classified(9, now()).unwrap());
        }
        assert_eq!(store.get(9).unwrap().classified_since_fetch, 199);
        assert!(store.note_classified(9, now()).unwrap());
        store.install(profile(9));
        assert_eq!(store.get(9).unwrap().classified_since_fetch, 0);
        assert!(!store.note_classified(9, now()).unwrap());
    }

    #[test]
    fn max_age_when_enabled() {
        let store = ProfileStore::new(StoreConfig { max_age_secs: Some(60), ..Default::default() });
        store.install(profile(4));
        assert!(!store.note_classified(4, Utc.timestamp_opt(1059, 0).unwrap()).unwrap());
        assert!(store.note_classified(4, Utc.timestamp_opt(1060, 0).unwrap()).unwrap());
    }

    #[test]
    fn fetch_threshold() {
        let store = ProfileStore::default();
        assert!(store.note_unprofiled_tweet(1, 1).should_fetch);
        assert!(!store.note_unprofiled_tweet(1, 1).should_fetch, "already pending");
        assert!(!store.note_unprofiled_tweet(2, 3).should_fetch);
        assert!(!store.note_unprofiled_tweet(2, 3).should_fetch);
        let s = store.note_unprofiled_tweet(2, 3);
        assert_eq!(s, Sighting { seen: 3, should_fetch: true });
        store.abort_fetch(2);
        assert!(store.note_unprofiled_tweet(2, 3).should_fetch, "fetchable again after abort");
        store.install(profile(2));
        assert!(!store.is_pending(2));
        assert_eq!(store.seen_count(2), None);
    }

    #[test]
    fn refresh_is_single_flight() {
        let store = ProfileStore::default();
        store.install(profile(5));
        assert!(store.begin_refresh(5));
        assert!(!store.begin_refresh(5));
        store.install(profile(5));
        assert!(store.begin_refresh(5));
    }

    #[test]
    fn seen_counts_are_capped() {
        let store = ProfileStore::new(StoreConfig { seen_cap: 2, ..Default::default() });
        store.note_unprofiled_tweet(1, 5);
        store.note_unprofiled_tweet(2, 5);
        store.note_unprofiled_tweet(3, 5);
        assert_eq!(store.seen_count(1), None);
        assert_eq!(store.seen_count(3), Some(1));
    }

    #[test]
    fn snapshot_round_trip() {
        let store = ProfileStore::default();
        store.install(profile(11));
        store.install(profile(3));
        store.note_classified(3, now()).unwrap();
        let mut buf = Vec::new();
        store.write_snapshot(&mut buf).unwrap();
        let back = ProfileStore::read_snapshot(&buf[..], StoreConfig::default()).unwrap();
        assert_eq!(back.user_ids(), vec![3, 11]);
        assert_eq!(back.get(3), store.get(3));
        assert_eq!(back.get(3).unwrap().classified_since_fetch, 1);
        assert!(ProfileStore::read_snapshot(&b"{\"format\":\"x\",\"version\":1,\"count\":0}\n"[..], StoreConfig::default())
            .is_err());
    }
}
