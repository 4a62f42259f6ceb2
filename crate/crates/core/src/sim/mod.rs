//! Synthetic corpus generation and the download-requirement replay.

mod replay;
mod text;
mod world;

use thiserror::Error;

pub use replay::{
    events_from_posts, events_from_tweets, simulate, simulate_world, DayRow, FetchMode, SimConfig, SimEvent, SimReport,
    ThresholdSummary,
};
pub use world::{App, BotFamily, PostRef, SyntheticWorld, UserKind, UserSpec, WorldConfig, WorldSource};

use crate::tweetio::LabeledTweet;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("the stream is empty")]
    EmptyStream,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Every tweet of the configured window, labeled, in time order.
pub fn generate_synthetic_stream(cfg: &WorldConfig) -> Result<Vec<LabeledTweet>, SimError> {
    Ok(SyntheticWorld::new(cfg.clone())?.stream())
}

/// A uniform sample of `n` tweets of the window, in time order.
pub fn sample_corpus(cfg: &WorldConfig, n: usize) -> Result<Vec<LabeledTweet>, SimError> {
    Ok(SyntheticWorld::new(cfg.clone())?.sample(n, cfg.seed))
}

/// World shaped like a large regional stream: 59 days, a stable core of
/// daily posters, steady arrival of new accounts and a long tail of
/// accounts seen once.
pub fn nts_like_world(seed: u64) -> WorldConfig {
    WorldConfig {
        seed,
        days: 59,
        users: 21_000,
        late_join_fraction: 0.2,
        one_time_users: 38_000,
        human_rate_median: 0.5,
        bot_fraction: 0.01,
        news_fraction: 0.01,
        ..WorldConfig::default()
    }
}
