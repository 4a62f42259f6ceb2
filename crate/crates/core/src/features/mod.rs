//! Property extraction for the decision makers.
//!
//! [`tweet_properties`] uses only the metadata shipped with a tweet.
//! [`timeline_properties`] summarises a user's recent timeline: entity and
//! retweet/reply ratios, the source-category mix, and periodicity statistics.
//!
//! Periodicity binning:
//! - entropies use inter-arrival deltas `d` (seconds) decomposed into an hour
//!   component `min(d / 3600, 14)`, minute component `(d / 60) mod 60` and
//!   second component `d mod 60`;
//! - chi-squared p-values use minute-of-hour and second-of-minute of the
//!   absolute posting times (or the delta components, see
//!   [`ChiSquaredInput`]), 15 bins of width 4, 14 degrees of freedom.
//!
//! Timelines with fewer than two tweets get the uninformative fallback:
//! entropies are `log2(15)` and p-values are 1.

pub mod stats;
mod taxonomy;

use chrono::Timelike;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use taxonomy::{DeviceType, SourceTaxonomy};

use crate::learners::Attribute;
use crate::textprep;
use crate::tweetio::Tweet;
use stats::{chi_squared, entropy, BINS, HOURS, SIXTY};

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    /// The statistic has no value for this input; callers substitute a fallback.
    #[error("undefined feature: {0}")]
    Undefined(&'static str),
    #[error("empty timeline")]
    EmptyTimeline,
    #[error("taxonomy error: {0}")]
    Taxonomy(String),
    #[error("unknown timeline attribute {0:?}")]
    UnknownAttribute(String),
}

/// `log2(15)`, the largest attainable entropy with 15 bins.
pub fn max_entropy() -> f64 {
    (BINS as f64).log2()
}

/// The nine per-tweet properties.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TweetProperties {
    pub is_reply: bool,
    pub is_retweet: bool,
    pub hashtag_density: f64,
    pub url_density: f64,
    pub mention_density: f64,
    pub account_reputation: f64,
    pub tweets_per_day: f64,
    pub favorites_per_day: f64,
    pub device_type: DeviceType,
}

impl TweetProperties {
    pub const NAMES: [&'static str; 9] = [
        "isReply",
        "isRetweet",
        "hashtagDensity",
        "urlDensity",
        "mentionDensity",
        "accountReputation",
        "tweetsPerDay",
        "favoritesPerDay",
        "deviceType",
    ];

    pub fn attributes() -> Vec<Attribute> {
        vec![
            Attribute::binary("isReply"),
            Attribute::binary("isRetweet"),
            Attribute::numeric("hashtagDensity"),
            Attribute::numeric("urlDensity"),
            Attribute::numeric("mentionDensity"),
            Attribute::numeric("accountReputation"),
            Attribute::numeric("tweetsPerDay"),
            Attribute::numeric("favoritesPerDay"),
            Attribute::nominal("deviceType", &DeviceType::level_names()),
        ]
    }

    pub fn values(&self) -> [f64; 9] {
        [
            self.is_reply as u8 as f64,
            self.is_retweet as u8 as f64,
            self.hashtag_density,
            self.url_density,
            self.mention_density,
            self.account_reputation,
            self.tweets_per_day,
            self.favorites_per_day,
            self.device_type.index() as f64,
        ]
    }
}

/// Whole days between account creation and the tweet, at least 1.
pub fn account_age_days(t: &Tweet) -> i64 {
    ((t.created_at - t.account_created_at).num_seconds() / 86_400).max(1)
}

/// `followers / (followers + friends)`, with 0/0 taken as 0.
pub fn account_reputation(followers: u64, friends: u64) -> f64 {
    let total = followers + friends;
    if total == 0 {
        0.0
    } else {
        followers as f64 / total as f64
    }
}

pub fn tweet_properties(t: &Tweet, tax: &SourceTaxonomy) -> TweetProperties {
    let words = textprep::tokens(&t.text, &t.entities).len().max(1) as f64;
    let age = account_age_days(t) as f64;
    TweetProperties {
        is_reply: t.is_reply(),
        is_retweet: t.is_retweet,
        hashtag_density: t.hashtag_count() as f64 / words,
        url_density: t.url_count() as f64 / words,
        mention_density: t.mention_count() as f64 / words,
        account_reputation: account_reputation(t.followers, t.friends),
        tweets_per_day: t.statuses_count as f64 / age,
        favorites_per_day: t.favourites_count as f64 / age,
        device_type: tax.lookup(&t.source),
    }
}

/// One of the sixteen timeline attributes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum TimelineAttr {
    HashtagRatio,
    UrlRatio,
    MentionRatio,
    RetweetRatio,
    ReplyRatio,
    MobileSourceRatio,
    WebSourceRatio,
    AppSourceRatio,
    SmmSourceRatio,
    BotSourceRatio,
    OtherSourceRatio,
    EntropyHour,
    EntropyMin,
    EntropySec,
    ChiSquaredMin,
    ChiSquaredSec,
}

impl TimelineAttr {
    pub const ALL: [TimelineAttr; 16] = [
        TimelineAttr::HashtagRatio,
        TimelineAttr::UrlRatio,
        TimelineAttr::MentionRatio,
        TimelineAttr::RetweetRatio,
        TimelineAttr::ReplyRatio,
        TimelineAttr::MobileSourceRatio,
        TimelineAttr::WebSourceRatio,
        TimelineAttr::AppSourceRatio,
        TimelineAttr::SmmSourceRatio,
        TimelineAttr::BotSourceRatio,
        TimelineAttr::OtherSourceRatio,
        TimelineAttr::EntropyHour,
        TimelineAttr::EntropyMin,
        TimelineAttr::EntropySec,
        TimelineAttr::ChiSquaredMin,
        TimelineAttr::ChiSquaredSec,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TimelineAttr::HashtagRatio => "hashtagRatio",
            TimelineAttr::UrlRatio => "urlRatio",
            TimelineAttr::MentionRatio => "mentionRatio",
            TimelineAttr::RetweetRatio => "retweetRatio",
            TimelineAttr::ReplyRatio => "replyRatio",
            TimelineAttr::MobileSourceRatio => "mobileSourceRatio",
            TimelineAttr::WebSourceRatio => "webSourceRatio",
            TimelineAttr::AppSourceRatio => "appSourceRatio",
            TimelineAttr::SmmSourceRatio => "smmSourceRatio",
            TimelineAttr::BotSourceRatio => "botSourceRatio",
            TimelineAttr::OtherSourceRatio => "otherSourceRatio",
            TimelineAttr::EntropyHour => "entropyHour",
            TimelineAttr::EntropyMin => "entropyMin",
            TimelineAttr::EntropySec => "entropySec",
            TimelineAttr::ChiSquaredMin => "chiSquaredMin",
            TimelineAttr::ChiSquaredSec => "chiSquaredSec",
        }
    }

    pub fn parse(name: &str) -> Result<TimelineAttr, FeatureError> {
        TimelineAttr::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(name.trim()))
            .ok_or_else(|| FeatureError::UnknownAttribute(name.to_owned()))
    }
}

/// Which timestamps feed the chi-squared uniformity test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChiSquaredInput {
    /// Minute-of-hour and second-of-minute of each posting time.
    #[default]
    PostingTime,
    /// Minute and second components of consecutive inter-arrival deltas.
    InterArrival,
}

/// Which timeline attributes the profile decision model sees.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub timeline_attrs: Vec<TimelineAttr>,
    pub chi_squared_input: ChiSquaredInput,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            timeline_attrs: TimelineAttr::ALL.to_vec(),
            chi_squared_input: ChiSquaredInput::PostingTime,
        }
    }
}

impl FeatureConfig {
    /// Keeps every attribute except the named ones, preserving canonical order.
    pub fn without(mut self, drop: &[TimelineAttr]) -> Self {
        self.timeline_attrs.retain(|a| !drop.contains(a));
        self
    }
}

/// The sixteen timeline properties.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimelineProperties {
    pub hashtag_ratio: f64,
    pub url_ratio: f64,
    pub mention_ratio: f64,
    pub retweet_ratio: f64,
    pub reply_ratio: f64,
    /// Indexed by [`DeviceType::index`].
    pub source_ratios: [f64; 6],
    pub entropy_hour: f64,
    pub entropy_min: f64,
    pub entropy_sec: f64,
    pub chi_squared_min: f64,
    pub chi_squared_sec: f64,
}

impl TimelineProperties {
    pub fn source_ratio(&self, d: DeviceType) -> f64 {
        self.source_ratios[d.index()]
    }

    pub fn get(&self, attr: TimelineAttr) -> f64 {
        use TimelineAttr::*;
        match attr {
            HashtagRatio => self.hashtag_ratio,
            UrlRatio => self.url_ratio,
            MentionRatio => self.mention_ratio,
            RetweetRatio => self.retweet_ratio,
            ReplyRatio => self.reply_ratio,
            MobileSourceRatio => self.source_ratio(DeviceType::Mobile),
            WebSourceRatio => self.source_ratio(DeviceType::Web),
            AppSourceRatio => self.source_ratio(DeviceType::App),
            SmmSourceRatio => self.source_ratio(DeviceType::Smm),
            BotSourceRatio => self.source_ratio(DeviceType::Bot),
            OtherSourceRatio => self.source_ratio(DeviceType::Other),
            EntropyHour => self.entropy_hour,
            EntropyMin => self.entropy_min,
            EntropySec => self.entropy_sec,
            ChiSquaredMin => self.chi_squared_min,
            ChiSquaredSec => self.chi_squared_sec,
        }
    }
}

/// Hour, minute and second components of an inter-arrival delta.
pub fn delta_components(delta_secs: i64) -> (u32, u32, u32) {
    let d = delta_secs.max(0);
    (
        ((d / 3600).min(14)) as u32,
        ((d / 60) % 60) as u32,
        (d % 60) as u32,
    )
}

/// Timeline summary. `rats` need not be sorted; it is ordered by time here.
pub fn timeline_properties(
    rats: &[Tweet],
    tax: &SourceTaxonomy,
    chi_input: ChiSquaredInput,
) -> Result<TimelineProperties, FeatureError> {
    if rats.is_empty() {
        return Err(FeatureError::EmptyTimeline);
    }
    let n = rats.len() as f64;
    let mut times: Vec<i64> = rats.iter().map(Tweet::timestamp).collect();
    times.sort_unstable();

    let mut sources = [0u32; 6];
    for t in rats {
        sources[tax.lookup(&t.source).index()] += 1;
    }
    let sum = |f: fn(&Tweet) -> u32| rats.iter().map(f).sum::<u32>() as f64 / n;

    let mut props = TimelineProperties {
        hashtag_ratio: sum(Tweet::hashtag_count),
        url_ratio: sum(Tweet::url_count),
        mention_ratio: sum(Tweet::mention_count),
        retweet_ratio: sum(|t| t.is_retweet as u32),
        reply_ratio: sum(|t| t.is_reply() as u32),
        source_ratios: sources.map(|c| c as f64 / n),
        entropy_hour: max_entropy(),
        entropy_min: max_entropy(),
        entropy_sec: max_entropy(),
        chi_squared_min: 1.0,
        chi_squared_sec: 1.0,
    };
    if rats.len() < 2 {
        return Ok(props);
    }

    let deltas: Vec<(u32, u32, u32)> = times
        .windows(2)
        .map(|w| delta_components(w[1] - w[0]))
        .collect();
    let hours: Vec<u32> = deltas.iter().map(|d| d.0).collect();
    let mins: Vec<u32> = deltas.iter().map(|d| d.1).collect();
    let secs: Vec<u32> = deltas.iter().map(|d| d.2).collect();
    props.entropy_hour = entropy(&hours, HOURS)?;
    props.entropy_min = entropy(&mins, SIXTY)?;
    props.entropy_sec = entropy(&secs, SIXTY)?;

    let (chi_min, chi_sec) = match chi_input {
        ChiSquaredInput::PostingTime => {
            let m: Vec<u32> = rats.iter().map(|t| t.created_at.minute()).collect();
            let s: Vec<u32> = rats.iter().map(|t| t.created_at.second()).collect();
            (m, s)
        }
        ChiSquaredInput::InterArrival => (mins, secs),
    };
    props.chi_squared_min = chi_squared(&chi_min, SIXTY)?.p_value;
    props.chi_squared_sec = chi_squared(&chi_sec, SIXTY)?.p_value;
    Ok(props)
}
