//! Deterministic synthetic tweet world.
//!
//! Every account has a fixed behaviour drawn from the world seed. Posting
//! times for one `(user, day)` are drawn from a generator seeded by that pair,
//! and tweet content from a generator seeded by `(user, time, index)`, so the
//! observed stream and any user timeline can be produced independently and
//! always agree.
//!
//! Account kinds:
//! - humans: Poisson daily counts, diurnal hours, uniform minutes and seconds,
//!   human text; some also use posting apps whose check-in, workout or photo
//!   messages are autogenerated;
//! - periodic bots: exact-period schedules (multiples of 60 s) with fixed templates;
//! - news feeds: RSS-style headline reposts at irregular times (autogenerated);
//! - schedulers: human-written promotional posts queued in an SMM tool
//!   and released on quarter-hour slots.

use std::sync::Arc;

use chrono::{DateTime, TimeZone, Utc};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Poisson};
use serde::{Deserialize, Serialize};

use super::text::*;
use super::SimError;
use crate::fetcher::{SourceError, TimelineSource};
use crate::tweetio::{Label, LabeledTweet, Tweet, TweetId, UserId};

const DAY: i64 = 86_400;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    pub seed: u64,
    /// First day of the observed window (UTC midnight).
    pub start: String,
    pub days: u32,
    /// Accounts active from the first day (or from a later join day, see `late_join_fraction`).
    pub users: u32,
    /// Share of accounts that are periodic bots.
    pub bot_fraction: f64,
    /// Share of accounts that repost news headlines automatically.
    pub news_fraction: f64,
    /// Share of accounts posting human-written content through a scheduler.
    pub scheduler_fraction: f64,
    /// Share of human accounts that also post through apps.
    pub app_user_fraction: f64,
    /// Per-tweet probability that an app user's tweet is an app message.
    pub app_agt_rate: f64,
    /// Per-tweet probability that an app user's tweet is a hand-written caption from the app.
    pub app_caption_rate: f64,
    /// Median human tweets per day (log-normal across accounts).
    pub human_rate_median: f64,
    pub human_rate_sigma: f64,
    pub retweet_rate: f64,
    pub reply_rate: f64,
    /// Share of accounts that first appear on a uniformly random later day.
    pub late_join_fraction: f64,
    /// Extra accounts that post exactly once in the window.
    pub one_time_users: u32,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            seed: crate::DEFAULT_SEED,
            start: "2017-01-01T00:00:00Z".into(),
            days: 12,
            users: 2000,
            bot_fraction: 0.015,
            news_fraction: 0.02,
            scheduler_fraction: 0.02,
            app_user_fraction: 0.35,
            app_agt_rate: 0.3,
            app_caption_rate: 0.1,
            human_rate_median: 3.0,
            human_rate_sigma: 1.0,
            retweet_rate: 0.15,
            reply_rate: 0.2,
            late_join_fraction: 0.0,
            one_time_users: 0,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(SimError::Config(format!("{name} must be in [0, 1], got {v}")))
            }
        };
        unit("bot_fraction", self.bot_fraction)?;
        unit("news_fraction", self.news_fraction)?;
        unit("scheduler_fraction", self.scheduler_fraction)?;
        unit("app_user_fraction", self.app_user_fraction)?;
        unit("app_agt_rate", self.app_agt_rate)?;
        unit("app_caption_rate", self.app_caption_rate)?;
        unit("retweet_rate", self.retweet_rate)?;
        unit("reply_rate", self.reply_rate)?;
        unit("late_join_fraction", self.late_join_fraction)?;
        if self.bot_fraction + self.news_fraction + self.scheduler_fraction > 1.0 {
            return Err(SimError::Config("bot, news and scheduler fractions exceed 1".into()));
        }
        if self.app_agt_rate + self.app_caption_rate > 1.0 {
            return Err(SimError::Config("app_agt_rate + app_caption_rate exceeds 1".into()));
        }
        if self.days == 0 {
            return Err(SimError::Config("days must be at least 1".into()));
        }
        if self.users == 0 && self.one_time_users == 0 {
            return Err(SimError::Config("the world needs at least one user".into()));
        }
        if !(self.human_rate_median > 0.0) || !(self.human_rate_sigma >= 0.0) {
            return Err(SimError::Config("human rate parameters must be positive".into()));
        }
        self.start_ts()?;
        Ok(())
    }

    pub fn start_ts(&self) -> Result<i64, SimError> {
        let t = crate::tweetio::parse_time(&self.start)
            .ok_or_else(|| SimError::Config(format!("bad start timestamp {:?}", self.start)))?;
        Ok(t.timestamp().div_euclid(DAY) * DAY)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum App {
    Swarm,
    Endomondo,
    Runkeeper,
    Instagram,
    Untappd,
    YouTube,
    SoundCloud,
    Facebook,
}

impl App {
    const ALL: [App; 8] = [
        App::Swarm,
        App::Endomondo,
        App::Runkeeper,
        App::Instagram,
        App::Untappd,
        App::YouTube,
        App::SoundCloud,
        App::Facebook,
    ];

    fn source(self) -> &'static str {
        match self {
            App::Swarm => "Foursquare",
            App::Endomondo => "Endomondo",
            App::Runkeeper => "Runkeeper",
            App::Instagram => "Instagram",
            App::Untappd => "Untappd",
            App::YouTube => "Google",
            App::SoundCloud => "SoundCloud",
            App::Facebook => "Facebook",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BotFamily {
    Weather,
    Trending,
    Jobs,
    NowPlaying,
    Traffic,
    Quotes,
}

impl BotFamily {
    const ALL: [BotFamily; 6] = [
        BotFamily::Weather,
        BotFamily::Trending,
        BotFamily::Jobs,
        BotFamily::NowPlaying,
        BotFamily::Traffic,
        BotFamily::Quotes,
    ];

    fn source(self) -> &'static str {
        match self {
            BotFamily::Weather => "WeatherLink Station",
            BotFamily::Trending => "Trendsmap Alerting",
            BotFamily::Jobs => "dlvr.it",
            BotFamily::NowPlaying => "SpotifyNowPlaying",
            BotFamily::Traffic => "LiikenneBot",
            BotFamily::Quotes => "twittbot.net",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum UserKind {
    Human { rate: f64, source: &'static str, alt_source: &'static str, app: Option<App> },
    Bot { period: i64, phase: i64, jitter: i64, family: BotFamily, city: &'static str },
    News { rate: f64, source: &'static str },
    Scheduler { rate: f64, source: &'static str },
}

impl UserKind {
    fn daily_rate(&self) -> f64 {
        match *self {
            UserKind::Human { rate, .. } | UserKind::News { rate, .. } | UserKind::Scheduler { rate, .. } => rate,
            UserKind::Bot { period, .. } => DAY as f64 / period as f64,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UserSpec {
    pub id: UserId,
    pub kind: UserKind,
    pub created_at: i64,
    /// First second at which the account posts in the observed window.
    pub active_from: i64,
    /// Set for accounts with exactly one tweet.
    pub single_post: Option<i64>,
    pub followers: u64,
    pub friends: u64,
    pub statuses_base: u64,
    pub favourites_per_day: f64,
}

/// One post in the stream, identified by its author, time and index within the day.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PostRef {
    pub at: i64,
    pub user: UserId,
    pub idx: u32,
}

impl PostRef {
    pub fn id(&self) -> TweetId {
        ((self.at as u64) << 32) | ((self.user & 0xF_FFFF) << 12) | (self.idx as u64 & 0xFFF)
    }
}

fn mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn rng_for(parts: &[u64]) -> ChaCha8Rng {
    let mut h = 0u64;
    for &p in parts {
        h = mix(h ^ p);
    }
    ChaCha8Rng::seed_from_u64(h)
}

const TAG_USER: u64 = 1;
const TAG_DAY: u64 = 2;
const TAG_TEXT: u64 = 3;
const TAG_SAMPLE: u64 = 4;

/// UTC hour weights: quiet at night in the Nordic time zones.
const DIURNAL: [f64; 24] =
    [3.0, 2.0, 1.0, 1.0, 1.0, 2.0, 4.0, 6.0, 7.0, 7.0, 7.0, 7.0, 7.0, 7.0, 7.0, 7.0, 8.0, 8.0, 8.0, 8.0, 7.0, 6.0, 5.0, 4.0];

const HUMAN_SOURCES: &[(&str, f64)] = &[
    ("Twitter for iPhone", 0.44),
    ("Twitter for Android", 0.34),
    ("Twitter Web Client", 0.12),
    ("Twitter for iPad", 0.04),
    ("TweetDeck", 0.03),
    ("Tweetbot for iOS", 0.03),
];

fn weighted<'a, R: Rng + ?Sized>(rng: &mut R, items: &'a [(&'a str, f64)]) -> &'a str {
    let total: f64 = items.iter().map(|i| i.1).sum();
    let mut x = rng.random::<f64>() * total;
    for &(s, w) in items {
        if x < w {
            return s;
        }
        x -= w;
    }
    items.last().unwrap().0
}

fn diurnal_hour<R: Rng + ?Sized>(rng: &mut R) -> i64 {
    let total: f64 = DIURNAL.iter().sum();
    let mut x = rng.random::<f64>() * total;
    for (h, &w) in DIURNAL.iter().enumerate() {
        if x < w {
            return h as i64;
        }
        x -= w;
    }
    23
}

fn lognormal<R: Rng + ?Sized>(rng: &mut R, median: f64, sigma: f64) -> f64 {
    LogNormal::new(median.ln(), sigma).map(|d| d.sample(rng)).unwrap_or(median)
}

fn poisson<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> u32 {
    if rate <= 0.0 {
        return 0;
    }
    Poisson::new(rate).map(|d| d.sample(rng) as u32).unwrap_or(0)
}

pub struct SyntheticWorld {
    cfg: WorldConfig,
    start: i64,
    users: Vec<UserSpec>,
    vocab: Vocab,
}

impl SyntheticWorld {
    pub fn new(cfg: WorldConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let start = cfg.start_ts()?;
        let end = start + cfg.days as i64 * DAY;
        // account kinds come in exact proportions, assigned to ids by a seeded permutation
        let mut ranks: Vec<u32> = (0..cfg.users).collect();
        ranks.shuffle(&mut rng_for(&[cfg.seed, TAG_USER, 0]));
        let mut users = Vec::with_capacity((cfg.users + cfg.one_time_users) as usize);
        for i in 0..cfg.users + cfg.one_time_users {
            let id = i as UserId + 1;
            let mut rng = rng_for(&[cfg.seed, TAG_USER, id]);
            let rank = ranks.get(i as usize).copied();
            users.push(Self::draw_user(&cfg, id, rank, start, end, &mut rng));
        }
        Ok(SyntheticWorld { cfg, start, users, vocab: Vocab::new() })
    }

    fn draw_user(cfg: &WorldConfig, id: UserId, rank: Option<u32>, start: i64, end: i64, rng: &mut ChaCha8Rng) -> UserSpec {
        const PERIODS: [i64; 7] = [3600, 900, 7200, 1800, 21600, 3600, 10800];
        let count = |f: f64| (f * cfg.users as f64).round() as u32;
        let (bots, news, sched) = (
            count(cfg.bot_fraction),
            count(cfg.bot_fraction + cfg.news_fraction),
            count(cfg.bot_fraction + cfg.news_fraction + cfg.scheduler_fraction),
        );
        let one_time = rank.is_none();
        let rank = rank.unwrap_or(u32::MAX);
        let kind = if one_time {
            None
        } else if rank < bots {
            let period = PERIODS[rank as usize % PERIODS.len()];
            let family = *BotFamily::ALL.choose(rng).unwrap();
            // a third of the bots run a few seconds late on every post
            let jitter = if rng.random_bool(1.0 / 3.0) { rng.random_range(1..=8) } else { 0 };
            Some(UserKind::Bot {
                period,
                phase: 60 * rng.random_range(0..period / 60),
                jitter,
                family,
                city: pick(rng, CITIES),
            })
        } else if rank < news {
            Some(UserKind::News {
                rate: lognormal(rng, 12.0, 0.5),
                source: *["dlvr.it", "IFTTT", "Hootsuite", "Buffer"].choose(rng).unwrap(),
            })
        } else if rank < sched {
            Some(UserKind::Scheduler {
                rate: lognormal(rng, 4.0, 0.4),
                source: *["Hootsuite", "Buffer", "Falcon Social Media Management", "Sprout Social"]
                    .choose(rng)
                    .unwrap(),
            })
        } else {
            None
        };
        let kind = kind.unwrap_or_else(|| {
            let app = rng.random_bool(cfg.app_user_fraction).then(|| *App::ALL.choose(rng).unwrap());
            UserKind::Human {
                rate: lognormal(rng, cfg.human_rate_median, cfg.human_rate_sigma).clamp(0.05, 60.0),
                source: weighted(rng, HUMAN_SOURCES),
                alt_source: weighted(rng, HUMAN_SOURCES),
                app,
            }
        });
        let late = !one_time && rng.random_bool(cfg.late_join_fraction);
        let (created_at, active_from, single_post) = if one_time {
            let at = rng.random_range(start..end);
            (start - rng.random_range(30..3000) * DAY, at, Some(at))
        } else if late {
            let join = rng.random_range(start..end);
            (join, join, None)
        } else {
            let created = start - rng.random_range(20..3000) * DAY - rng.random_range(0..DAY);
            (created, created, None)
        };
        let (followers, friends, fav) = match kind {
            UserKind::Bot { .. } => (lognormal(rng, 60.0, 1.5), lognormal(rng, 8.0, 1.2), 0.01),
            UserKind::News { .. } => (lognormal(rng, 2500.0, 1.0), lognormal(rng, 150.0, 1.0), 0.05),
            UserKind::Scheduler { .. } => (lognormal(rng, 900.0, 1.0), lognormal(rng, 600.0, 0.8), 0.8),
            UserKind::Human { .. } => (lognormal(rng, 180.0, 1.3), lognormal(rng, 220.0, 1.0), lognormal(rng, 2.0, 1.2)),
        };
        UserSpec {
            id,
            kind,
            created_at,
            active_from,
            single_post,
            followers: followers.round() as u64,
            friends: friends.round() as u64,
            statuses_base: rng.random_range(0..200),
            favourites_per_day: fav,
        }
    }

    pub fn config(&self) -> &WorldConfig {
        &self.cfg
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    pub fn end(&self) -> i64 {
        self.start + self.cfg.days as i64 * DAY
    }

    pub fn users(&self) -> &[UserSpec] {
        &self.users
    }

    pub fn user(&self, id: UserId) -> Option<&UserSpec> {
        id.checked_sub(1).and_then(|i| self.users.get(i as usize))
    }

    /// Posting times of `user` on the UTC day starting at `day_start`, ascending.
    pub fn day_posts(&self, u: &UserSpec, day_start: i64) -> Vec<PostRef> {
        let day_end = day_start + DAY;
        if let Some(at) = u.single_post {
            return if (day_start..day_end).contains(&at) { vec![PostRef { at, user: u.id, idx: 0 }] } else { vec![] };
        }
        if day_end <= u.active_from {
            return vec![];
        }
        let mut rng = rng_for(&[self.cfg.seed, TAG_DAY, u.id, day_start as u64]);
        let mut times: Vec<i64> = Vec::new();
        match u.kind {
            UserKind::Human { rate, .. } => {
                let n = poisson(&mut rng, rate);
                for k in 0..n {
                    let t = match times.last() {
                        // replies and conversations come in bursts
                        Some(&prev) if k > 0 && rng.random_bool(0.25) => prev + rng.random_range(20..900),
                        _ => day_start + diurnal_hour(&mut rng) * 3600 + rng.random_range(0..3600),
                    };
                    times.push(t.min(day_end - 1));
                }
            }
            UserKind::Bot { period, phase, jitter, .. } => {
                let mut t = day_start + phase % period;
                while t < day_end {
                    // rare outages skip a post but keep the schedule
                    if !rng.random_bool(0.02) {
                        let j = if jitter > 0 { rng.random_range(0..=jitter) } else { 0 };
                        times.push(t + j);
                    }
                    t += period;
                }
            }
            UserKind::News { rate, .. } => {
                for _ in 0..poisson(&mut rng, rate) {
                    times.push(day_start + rng.random_range(5..22) * 3600 + rng.random_range(0..3600));
                }
            }
            UserKind::Scheduler { rate, .. } => {
                for _ in 0..poisson(&mut rng, rate) {
                    times.push(day_start + rng.random_range(6..18) * 3600 + 900 * rng.random_range(0..4));
                }
            }
        }
        times.sort_unstable();
        times
            .into_iter()
            .enumerate()
            .filter(|&(_, t)| t >= u.active_from && t < day_end)
            .map(|(i, at)| PostRef { at, user: u.id, idx: i as u32 })
            .collect()
    }

    /// All posts of the observed window, in time order.
    pub fn posts(&self) -> Vec<PostRef> {
        let mut out = Vec::new();
        for u in &self.users {
            for d in 0..self.cfg.days as i64 {
                out.extend(self.day_posts(u, self.start + d * DAY));
            }
        }
        out.sort_unstable();
        out
    }

    /// The full tweet behind a post.
    pub fn materialize(&self, p: &PostRef) -> LabeledTweet {
        let u = self.user(p.user).expect("post of a known user");
        let mut rng = rng_for(&[self.cfg.seed, TAG_TEXT, p.user, p.at as u64, p.idx as u64]);
        let mut b = TextBuilder::default();
        let mut reply_to = None;
        let mut is_retweet = false;
        let (label, source) = match u.kind {
            UserKind::Human { source, alt_source, app, .. } => {
                let r: f64 = rng.random();
                let src = if rng.random_bool(0.1) { alt_source } else { source };
                match app {
                    Some(a) if r < self.cfg.app_agt_rate => {
                        app_message(&mut b, a, &mut rng, &self.vocab);
                        (Label::Agt, a.source())
                    }
                    Some(a) if r < self.cfg.app_agt_rate + self.cfg.app_caption_rate => {
                        human_text(&mut b, &mut rng, &self.vocab);
                        b.url(&mut rng);
                        (Label::Hgt, a.source())
                    }
                    _ => {
                        let s: f64 = rng.random();
                        if s < self.cfg.retweet_rate {
                            is_retweet = true;
                            b.word("RT");
                            b.mention(pick(&mut rng, NAMES));
                            b.glue(":");
                            human_text(&mut b, &mut rng, &self.vocab);
                        } else {
                            if s < self.cfg.retweet_rate + self.cfg.reply_rate {
                                reply_to = Some(p.id().wrapping_sub(rng.random_range(1..1_000_000_000)));
                                b.mention(pick(&mut rng, NAMES));
                            }
                            human_text(&mut b, &mut rng, &self.vocab);
                        }
                        (Label::Hgt, src)
                    }
                }
            }
            UserKind::Bot { family, city, .. } => {
                bot_message(&mut b, family, city, &mut rng);
                (Label::Agt, family.source())
            }
            UserKind::News { source, .. } => {
                let n = rng.random_range(5..11);
                for i in 0..n {
                    let w = pick(&mut rng, HEADLINE_WORDS);
                    if i == 0 {
                        b.word(w);
                    } else {
                        b.word(&w.to_lowercase());
                    }
                }
                if rng.random_bool(0.3) {
                    b.glue(":");
                    b.word(pick(&mut rng, CITIES));
                }
                b.url(&mut rng);
                (Label::Agt, source)
            }
            UserKind::Scheduler { source, .. } => {
                let n = rng.random_range(6..16);
                for _ in 0..n {
                    b.word(pick(&mut rng, PROMO_WORDS));
                }
                b.glue(pick(&mut rng, PUNCT));
                if rng.random_bool(0.6) {
                    b.hashtag(pick(&mut rng, TAGS));
                }
                if rng.random_bool(0.7) {
                    b.url(&mut rng);
                }
                (Label::Hgt, source)
            }
        };
        if b.is_empty() {
            b.word(self.vocab.word(&mut rng));
        }
        let (text, entities) = b.finish();
        let age_days = ((p.at - u.created_at).max(0) as f64) / DAY as f64;
        let tweet = Tweet {
            id: p.id(),
            user_id: u.id,
            created_at: ts(p.at),
            text,
            entities,
            number_count: 0,
            source: source.to_owned(),
            in_reply_to_status_id: reply_to,
            is_retweet,
            followers: u.followers,
            friends: u.friends,
            statuses_count: u.statuses_base + (u.kind.daily_rate() * age_days) as u64 + 1,
            favourites_count: (u.favourites_per_day * age_days) as u64,
            account_created_at: ts(u.created_at),
        };
        let tweet = tweet.validated().expect("generated tweets are valid");
        LabeledTweet { tweet, label }
    }

    /// Every post of the window, materialized, in time order.
    pub fn stream(&self) -> Vec<LabeledTweet> {
        self.posts().iter().map(|p| self.materialize(p)).collect()
    }

    /// A uniform random sample of `n` posts of the window, in time order.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<LabeledTweet> {
        let posts = self.posts();
        let mut rng = rng_for(&[seed, TAG_SAMPLE]);
        let mut picked: Vec<PostRef> = posts.choose_multiple(&mut rng, n.min(posts.len())).copied().collect();
        picked.sort_unstable();
        picked.iter().map(|p| self.materialize(p)).collect()
    }

    /// Up to `count` tweets of `user` posted at or before `as_of`, newest first, ids below `max_id`.
    pub fn timeline(&self, user: UserId, as_of: i64, count: usize, max_id: Option<TweetId>) -> Vec<Tweet> {
        let Some(u) = self.user(user) else { return vec![] };
        let mut out = Vec::new();
        let first = u.single_post.unwrap_or(u.active_from).div_euclid(DAY) * DAY;
        let mut day = as_of.div_euclid(DAY) * DAY;
        while day >= first && out.len() < count {
            for p in self.day_posts(u, day).iter().rev() {
                if p.at <= as_of && max_id.is_none_or(|m| p.id() < m) {
                    out.push(self.materialize(p).tweet);
                    if out.len() == count {
                        break;
                    }
                }
            }
            day -= DAY;
        }
        out
    }
}

fn ts(secs: i64) -> DateTime<Utc> {
    Utc.timestamp_opt(secs, 0).single().expect("timestamp in range")
}

fn human_text<R: Rng + ?Sized>(b: &mut TextBuilder, rng: &mut R, vocab: &Vocab) {
    let n = rng.random_range(3..16);
    for _ in 0..n {
        b.word(vocab.word(rng));
    }
    if rng.random_bool(0.1) {
        b.word(&number(rng, 1.0, 100.0, 0));
    }
    if rng.random_bool(0.5) {
        b.glue(pick(rng, PUNCT));
    }
    if rng.random_bool(0.2) {
        b.word(pick(rng, EMOJI));
    }
    if rng.random_bool(0.15) {
        b.hashtag(pick(rng, TAGS));
    }
    if rng.random_bool(0.08) {
        b.mention(pick(rng, NAMES));
    }
    if rng.random_bool(0.12) {
        b.url(rng);
    }
    if rng.random_bool(0.05) {
        b.media(rng);
    }
}

fn app_message<R: Rng + ?Sized>(b: &mut TextBuilder, app: App, rng: &mut R, vocab: &Vocab) {
    match app {
        App::Swarm => {
            if rng.random_bool(0.3) {
                // a short human comment in front of the check-in
                for _ in 0..rng.random_range(1..4) {
                    b.word(vocab.word(rng));
                }
                b.glue(pick(rng, &["!", ".", ""]));
                b.word("(@");
            } else {
                b.words("I'm at");
            }
            b.words(pick(rng, VENUES));
            b.word("in");
            b.word(pick(rng, CITIES));
            b.glue(",");
            b.word(pick(rng, REGIONS));
            if rng.random_bool(0.2) {
                b.word("w/");
                b.mention(pick(rng, NAMES));
            }
            b.url(rng);
        }
        App::Endomondo => {
            b.words("I just finished");
            b.word(pick(rng, ACTIVITIES));
            b.word(&number(rng, 1.0, 40.0, 2));
            b.words("km in");
            b.word(&format!("{}m:{:02}s", rng.random_range(5..200), rng.random_range(0..60)));
            b.word("with");
            b.hashtag("Endomondo");
            b.hashtag("endorphins");
            b.url(rng);
        }
        App::Runkeeper => {
            b.words("Just completed a");
            b.word(&number(rng, 1.0, 30.0, 2));
            b.word("km");
            b.word(pick(rng, &["run", "walk", "bike ride"]));
            b.word("with");
            b.mention("Runkeeper");
            b.glue(".");
            b.words("Check it out!");
            b.url(rng);
            b.hashtag("Runkeeper");
        }
        App::Instagram => {
            b.words("Just posted a");
            b.word(pick(rng, &["photo", "video"]));
            if rng.random_bool(0.7) {
                b.word("@");
                b.words(pick(rng, VENUES));
            }
            b.url(rng);
        }
        App::Untappd => {
            b.words("Drinking a");
            b.words(pick(rng, BEERS));
            b.word("by");
            b.words(pick(rng, BREWERIES));
            if rng.random_bool(0.5) {
                b.word("at");
                b.words(pick(rng, VENUES));
            }
            b.url(rng);
            if rng.random_bool(0.3) {
                b.hashtag("photo");
            }
        }
        App::YouTube => {
            b.words(pick(rng, &["I liked a", "I added a", "I added a"]));
            b.mention("YouTube");
            b.word("video");
            b.url(rng);
            for _ in 0..rng.random_range(2..6) {
                b.word(pick(rng, HEADLINE_WORDS));
            }
        }
        App::SoundCloud => {
            b.words("Listen to");
            b.words(pick(rng, SONGS));
            b.word("by");
            b.words(pick(rng, ARTISTS));
            b.hashtag("np");
            b.word("on");
            b.hashtag("SoundCloud");
            b.url(rng);
        }
        App::Facebook => {
            if rng.random_bool(0.5) {
                b.words("I posted a new photo to Facebook");
            } else {
                b.words("I posted");
                b.word(&rng.random_range(2..30).to_string());
                b.words("photos on Facebook in the album");
                b.words(pick(rng, &["Summer", "Holiday", "Mobile Uploads", "Party", "Trip"]));
            }
            b.url(rng);
        }
    }
}

fn bot_message<R: Rng + ?Sized>(b: &mut TextBuilder, family: BotFamily, city: &str, rng: &mut R) {
    match family {
        BotFamily::Weather => {
            b.word("Temp");
            b.word(&format!("{}C,", number(rng, -25.0, 25.0, 1)));
            b.word("Hum");
            b.word(&format!("{}%,", rng.random_range(20..100)));
            b.word("Wind");
            b.word(&number(rng, 0.0, 20.0, 1));
            b.word("m/s,");
            b.word("Baro");
            b.word(&number(rng, 960.0, 1040.0, 1));
            b.word("hPa");
            b.hashtag("weather");
            b.hashtag(&city.to_lowercase());
        }
        BotFamily::Trending => {
            b.words("Trending in");
            b.word(city);
            b.glue(":");
            for _ in 0..rng.random_range(2..4) {
                b.hashtag(pick(rng, TAGS));
            }
            b.url(rng);
        }
        BotFamily::Jobs => {
            b.word(pick(rng, COMPANIES));
            b.words("is hiring:");
            b.words(pick(rng, JOB_TITLES));
            b.word("in");
            b.word(city);
            b.url(rng);
            b.hashtag("job");
            b.hashtag("hiring");
        }
        BotFamily::NowPlaying => {
            b.hashtag("NowPlaying");
            b.words(pick(rng, SONGS));
            b.word("by");
            b.words(pick(rng, ARTISTS));
            b.url(rng);
        }
        BotFamily::Traffic => {
            b.words("Traffic update");
            b.word(city);
            b.glue(":");
            b.word(&format!("road {}", rng.random_range(1..30)));
            b.words(pick(rng, &["congested", "clear", "roadworks ahead", "accident reported"]));
            b.hashtag("traffic");
        }
        BotFamily::Quotes => {
            b.words("Quote of the hour:");
            for _ in 0..rng.random_range(6..12) {
                b.word(pick(rng, PROMO_WORDS));
            }
            b.hashtag("quote");
        }
    }
}

/// Timelines served straight from a synthetic world, as of a fixed time.
#[derive(Clone)]
pub struct WorldSource {
    pub world: Arc<SyntheticWorld>,
    pub as_of: i64,
}

impl WorldSource {
    /// Timelines as fetched right after the observed window ends.
    pub fn at_end(world: Arc<SyntheticWorld>) -> Self {
        let as_of = world.end() - 1;
        WorldSource { world, as_of }
    }
}

impl TimelineSource for WorldSource {
    fn fetch_page(&self, user: UserId, count: usize, max_id: Option<TweetId>) -> Result<Vec<Tweet>, SourceError> {
        if self.world.user(user).is_none() {
            return Err(SourceError::NotFound(user));
        }
        Ok(self.world.timeline(user, self.as_of, count, max_id))
    }
}
