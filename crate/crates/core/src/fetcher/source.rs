use std::collections::HashMap;
use std::path::Path;

use thiserror::Error;

use super::FetchPolicy;
use crate::tweetio::{parse_record, read_tweets, Strictness, Tweet, TweetError, TweetId, UserId};

#[derive(Debug, Error)]
pub enum SourceError {
    #[error("user {0} not found")]
    NotFound(UserId),
    #[error("transient failure: {0}")]
    Transient(String),
    #[error("bad response: {0}")]
    BadResponse(String),
}

impl SourceError {
    pub fn is_transient(&self) -> bool {
        matches!(self, SourceError::Transient(_))
    }
}

/// Paged access to user timelines.
pub trait TimelineSource: Send + Sync {
    /// At most `count` tweets of `user`, newest first, all with id below `max_id` when given.
    fn fetch_page(&self, user: UserId, count: usize, max_id: Option<TweetId>) -> Result<Vec<Tweet>, SourceError>;
}

/// Collects up to `requests_per_profile` pages, newest first, stopping at a short page.
pub fn fetch_timeline(
    source: &dyn TimelineSource,
    user: UserId,
    policy: &FetchPolicy,
) -> Result<Vec<Tweet>, SourceError> {
    let mut out: Vec<Tweet> = Vec::new();
    for _ in 0..policy.requests_per_profile {
        let max_id = out.last().map(|t| t.id);
        let page = source.fetch_page(user, policy.page_size, max_id)?;
        let short = page.len() < policy.page_size;
        out.extend(page);
        if short {
            break;
        }
    }
    Ok(out)
}

/// Serves timelines from memory, typically loaded from a fixture file.
#[derive(Clone, Debug, Default)]
pub struct ReplaySource {
    // newest first
    timelines: HashMap<UserId, Vec<Tweet>>,
}

impl ReplaySource {
    pub fn new(tweets: impl IntoIterator<Item = Tweet>) -> Self {
        let mut timelines: HashMap<UserId, Vec<Tweet>> = HashMap::new();
        for t in tweets {
            timelines.entry(t.user_id).or_default().push(t);
        }
        for tl in timelines.values_mut() {
            tl.sort_by(|a, b| (b.created_at, b.id).cmp(&(a.created_at, a.id)));
            tl.dedup_by_key(|t| t.id);
        }
        ReplaySource { timelines }
    }

    /// Timeline fixture: line-delimited tweet records grouped by user.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, TweetError> {
        Ok(Self::new(read_tweets(path, Strictness::Strict)?))
    }

    pub fn users(&self) -> usize {
        self.timelines.len()
    }

    pub fn has_user(&self, user: UserId) -> bool {
        self.timelines.contains_key(&user)
    }

    /// Newest first.
    pub fn timeline(&self, user: UserId) -> Option<&[Tweet]> {
        self.timelines.get(&user).map(Vec::as_slice)
    }
}

impl TimelineSource for ReplaySource {
    fn fetch_page(&self, user: UserId, count: usize, max_id: Option<TweetId>) -> Result<Vec<Tweet>, SourceError> {
        let tl = self.timelines.get(&user).ok_or(SourceError::NotFound(user))?;
        let start = match max_id {
            Some(m) => tl.iter().position(|t| t.id < m).unwrap_or(tl.len()),
            None => 0,
        };
        Ok(tl[start..].iter().take(count).cloned().collect())
    }
}

/// Transport used by [`HttpTimelineSource`]. Returns the body of a GET.
pub trait Transport: Send + Sync {
    fn get(&self, url: &str) -> Result<(u16, String), SourceError>;
}

/// Timeline client for an HTTP endpoint that answers with a JSON array of
/// tweet records. Authentication is out of scope; the transport is pluggable.
pub struct HttpTimelineSource<T> {
    endpoint: String,
    transport: T,
}

impl<T: Transport> HttpTimelineSource<T> {
    pub fn new(endpoint: impl Into<String>, transport: T) -> Self {
        HttpTimelineSource { endpoint: endpoint.into(), transport }
    }

    pub fn url(&self, user: UserId, count: usize, max_id: Option<TweetId>) -> String {
        let mut u = format!("{}?user_id={user}&count={count}", self.endpoint);
        if let Some(m) = max_id {
            // the API's max_id is inclusive
            u.push_str(&format!("&max_id={}", m.saturating_sub(1)));
        }
        u
    }
}

impl<T: Transport> TimelineSource for HttpTimelineSource<T> {
    fn fetch_page(&self, user: UserId, count: usize, max_id: Option<TweetId>) -> Result<Vec<Tweet>, SourceError> {
        let (status, body) = self.transport.get(&self.url(user, count, max_id))?;
        match status {
            200 => {}
            404 => return Err(SourceError::NotFound(user)),
            429 | 500..=599 => return Err(SourceError::Transient(format!("HTTP {status}"))),
            s => return Err(SourceError::BadResponse(format!("HTTP {s}"))),
        }
        let items: Vec<serde_json::Value> =
            serde_json::from_str(&body).map_err(|e| SourceError::BadResponse(e.to_string()))?;
        let mut page = Vec::with_capacity(items.len());
        for item in items {
            let t = parse_record(&item.to_string()).map_err(|e| SourceError::BadResponse(e.to_string()))?;
            if t.user_id == user {
                page.push(t);
            }
        }
        page.truncate(count);
        Ok(page)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tweetio::Entities;
    use chrono::{DateTime, TimeZone, Utc};
    use std::sync::Mutex;

    fn tweet(user: UserId, id: u64) -> Tweet {
        Tweet {
            id,
            user_id: user,
            created_at: Utc.timestamp_opt(id as i64 * 10, 0).unwrap(),
            text: "x".into(),
            entities: Entities::default(),
            number_count: 0,
            source: "web".into(),
            in_reply_to_status_id: None,
            is_retweet: false,
            followers: 0,
            friends: 0,
            statuses_count: 0,
            favourites_count: 0,
            account_created_at: DateTime::UNIX_EPOCH,
        }
    }

    #[test]
    fn replay_pages_newest_first() {
        let src = ReplaySource::new((1..=450).map(|i| tweet(1, i)));
        let p1 = src.fetch_page(1, 200, None).unwrap();
        assert_eq!(p1.len(), 200);
        assert_eq!(p1[0].id, 450);
        let p3 = src.fetch_page(1, 200, Some(51)).unwrap();
        assert_eq!(p3.len(), 50);
        assert!(matches!(src.fetch_page(2, 200, None), Err(SourceError::NotFound(2))));
    }

    #[test]
    fn timeline_modes() {
        let src = ReplaySource::new((1..=5000).map(|i| tweet(1, i)));
        let one = fetch_timeline(&src, 1, &FetchPolicy::recent_timeline()).unwrap();
        assert_eq!(one.len(), 200);
        let full = fetch_timeline(&src, 1, &FetchPolicy::full_timeline()).unwrap();
        assert_eq!(full.len(), 3200);
        assert_eq!(full.last().unwrap().id, 5000 - 3199);
        let short = ReplaySource::new((1..=30).map(|i| tweet(1, i)));
        assert_eq!(fetch_timeline(&short, 1, &FetchPolicy::full_timeline()).unwrap().len(), 30);
    }

    struct Canned(Mutex<Vec<String>>, u16, String);
    impl Transport for Canned {
        fn get(&self, url: &str) -> Result<(u16, String), SourceError> {
            self.0.lock().unwrap().push(url.to_owned());
            Ok((self.1, self.2.clone()))
        }
    }

    #[test]
    fn http_source_parses_and_maps_status() {
        let body = format!("[{}]", tweet(3, 9).to_record(None));
        let src = HttpTimelineSource::new("http://host/timeline", Canned(Mutex::new(vec![]), 200, body));
        let page = src.fetch_page(3, 200, Some(10)).unwrap();
        assert_eq!(page.len(), 1);
        assert_eq!(src.transport.0.lock().unwrap()[0], "http://host/timeline?user_id=3&count=200&max_id=9");
        let busy = HttpTimelineSource::new("h", Canned(Mutex::new(vec![]), 429, String::new()));
        assert!(busy.fetch_page(3, 200, None).unwrap_err().is_transient());
    }
}
