#![allow(dead_code)]

use std::path::PathBuf;

use agt_core::sim::WorldConfig;
use agt_core::tweetio::{Entities, Tweet};
use chrono::{DateTime, TimeZone, Utc};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn fixture_world() -> WorldConfig {
    let text = std::fs::read_to_string(fixtures().join("world.toml")).expect("fixture world config");
    toml::from_str(&text).expect("valid world config")
}

pub fn tweet(user: u64, ts: i64, source: &str, text: &str) -> Tweet {
    Tweet {
        id: ((ts as u64) << 20) | (user & 0xFFFFF),
        user_id: user,
        created_at: Utc.timestamp_opt(ts, 0).unwrap(),
        text: text.into(),
        entities: Entities::default(),
        number_count: 0,
        source: source.into(),
        in_reply_to_status_id: None,
        is_retweet: false,
        followers: 10,
        friends: 10,
        statuses_count: 100,
        favourites_count: 5,
        account_created_at: DateTime::UNIX_EPOCH,
    }
    .validated()
    .expect("valid test tweet")
}
