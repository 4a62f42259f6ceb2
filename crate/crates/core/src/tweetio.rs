//! Tweet data model and the line-delimited JSON ingestion format.
//!
//! One record per line. Field order on output is fixed (see
//! `fixtures/golden_tweets.jsonl` for the canonical byte layout):
//!
//! ```text
//! {"id":1,"user_id":7,"created_at":"2017-01-01T08:00:00Z","text":"...",
//!  "entities":{"hashtags":[[0,4]],"urls":[],"mentions":[],"media":[]},
//!  "source":"Twitter for iPhone","in_reply_to_status_id":null,
//!  "retweeted_status":null,"followers":10,"friends":20,
//!  "statuses_count":100,"favourites_count":5,
//!  "account_created_at":"2015-06-01T00:00:00Z","label":"AGT"}
//! ```
//!
//! Entity spans are `[start, end)` offsets in Unicode scalar values. The
//! `entities` object and each of its lists are optional; `label`,
//! `in_reply_to_status_id` and `retweeted_status` are optional. The numeric
//! literal count is derived from the text and never read from the record.

use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read};
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Timelike, Utc};
use serde::ser::SerializeSeq;
use serde::{Deserialize, Serialize, Serializer};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::textprep;

pub type UserId = u64;
pub type TweetId = u64;

/// Class of a tweet. AGT is the positive class everywhere.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "AGT")]
    Agt,
    #[serde(rename = "HGT")]
    Hgt,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Agt, Label::Hgt];

    /// Dense class index: AGT = 0, HGT = 1.
    pub fn index(self) -> usize {
        match self {
            Label::Agt => 0,
            Label::Hgt => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Agt => "AGT",
            Label::Hgt => "HGT",
        }
    }

    pub fn parse(s: &str) -> Option<Label> {
        match s {
            "AGT" => Some(Label::Agt),
            "HGT" => Some(Label::Hgt),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Half-open character range `[start, end)` of an entity inside the text.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }
}

impl Serialize for Span {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(2))?;
        seq.serialize_element(&self.start)?;
        seq.serialize_element(&self.end)?;
        seq.end()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EntityKind {
    Hashtag,
    Url,
    Mention,
    Media,
}

/// Structured entity lists as delivered with the tweet.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Entities {
    pub hashtags: Vec<Span>,
    pub urls: Vec<Span>,
    pub mentions: Vec<Span>,
    pub media: Vec<Span>,
}

impl Entities {
    /// All spans tagged with their kind, sorted by start offset.
    pub fn spans(&self) -> Vec<(Span, EntityKind)> {
        let mut all: Vec<(Span, EntityKind)> = self
            .hashtags
            .iter()
            .map(|s| (*s, EntityKind::Hashtag))
            .chain(self.urls.iter().map(|s| (*s, EntityKind::Url)))
            .chain(self.mentions.iter().map(|s| (*s, EntityKind::Mention)))
            .chain(self.media.iter().map(|s| (*s, EntityKind::Media)))
            .collect();
        all.sort_by_key(|(s, _)| (s.start, s.end));
        all
    }

    pub fn is_empty(&self) -> bool {
        self.hashtags.is_empty()
            && self.urls.is_empty()
            && self.mentions.is_empty()
            && self.media.is_empty()
    }
}

/// One ingested tweet. Immutable after parsing.
#[derive(Clone, Debug, PartialEq)]
pub struct Tweet {
    pub id: TweetId,
    pub user_id: UserId,
    pub created_at: DateTime<Utc>,
    pub text: String,
    pub entities: Entities,
    /// Numeric literals found in the non-entity text.
    pub number_count: u32,
    pub source: String,
    pub in_reply_to_status_id: Option<TweetId>,
    pub is_retweet: bool,
    pub followers: u64,
    pub friends: u64,
    pub statuses_count: u64,
    pub favourites_count: u64,
    pub account_created_at: DateTime<Utc>,
}

impl Tweet {
    pub fn hashtag_count(&self) -> u32 {
        self.entities.hashtags.len() as u32
    }
    pub fn url_count(&self) -> u32 {
        self.entities.urls.len() as u32
    }
    pub fn mention_count(&self) -> u32 {
        self.entities.mentions.len() as u32
    }
    pub fn media_count(&self) -> u32 {
        self.entities.media.len() as u32
    }
    pub fn is_reply(&self) -> bool {
        self.in_reply_to_status_id.is_some()
    }

    /// Seconds since the Unix epoch.
    pub fn timestamp(&self) -> i64 {
        self.created_at.timestamp()
    }

    /// Checks the record invariants and recomputes `number_count`.
    pub fn validated(mut self) -> Result<Tweet, RecordError> {
        if self.text.trim().is_empty() {
            return Err(RecordError::Invalid("text is empty".into()));
        }
        if self.created_at < self.account_created_at {
            return Err(RecordError::Invalid(format!(
                "created_at {} precedes account_created_at {}",
                fmt_time(&self.created_at),
                fmt_time(&self.account_created_at)
            )));
        }
        let len = self.text.chars().count();
        let spans = self.entities.spans();
        let mut last_end = 0;
        for (span, _) in &spans {
            if span.start >= span.end || span.end > len {
                return Err(RecordError::Schema {
                    field: "entities",
                    problem: format!(
                        "span [{}, {}) outside text of {} chars",
                        span.start, span.end, len
                    ),
                });
            }
            if span.start < last_end {
                return Err(RecordError::Schema {
                    field: "entities",
                    problem: format!(
                        "span [{}, {}) overlaps a previous entity",
                        span.start, span.end
                    ),
                });
            }
            last_end = span.end;
        }
        self.number_count = textprep::count_numbers(&self.text, &self.entities);
        Ok(self)
    }

    /// Canonical single-line JSON record.
    pub fn to_record(&self, label: Option<Label>) -> String {
        let out = RecordOut {
            id: self.id,
            user_id: self.user_id,
            created_at: fmt_time(&self.created_at),
            text: &self.text,
            entities: &self.entities,
            source: &self.source,
            in_reply_to_status_id: self.in_reply_to_status_id,
            retweeted_status: self.is_retweet.then_some(EmptyObject {}),
            followers: self.followers,
            friends: self.friends,
            statuses_count: self.statuses_count,
            favourites_count: self.favourites_count,
            account_created_at: fmt_time(&self.account_created_at),
            label,
        };
        serde_json::to_string(&out).expect("record serialization is infallible")
    }
}

/// A tweet with its ground-truth class.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledTweet {
    pub tweet: Tweet,
    pub label: Label,
}

impl LabeledTweet {
    pub fn to_record(&self) -> String {
        self.tweet.to_record(Some(self.label))
    }
}

#[derive(Serialize)]
struct EmptyObject {}

#[derive(Serialize)]
struct RecordOut<'a> {
    id: TweetId,
    user_id: UserId,
    created_at: String,
    text: &'a str,
    entities: &'a Entities,
    source: &'a str,
    in_reply_to_status_id: Option<TweetId>,
    retweeted_status: Option<EmptyObject>,
    followers: u64,
    friends: u64,
    statuses_count: u64,
    favourites_count: u64,
    account_created_at: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<Label>,
}

/// Formats a timestamp as ISO-8601 UTC with second resolution.
pub fn fmt_time(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Secs, true)
}

/// Parses an ISO-8601 timestamp, truncating to whole seconds.
pub fn parse_time(s: &str) -> Option<DateTime<Utc>> {
    let t = DateTime::parse_from_rfc3339(s).ok()?.with_timezone(&Utc);
    t.with_nanosecond(0)
}

/// Serde adapter for timestamps in the ingestion format.
pub mod time_serde {
    use chrono::{DateTime, Utc};
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::fmt_time(t))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let s = String::deserialize(d)?;
        super::parse_time(&s).ok_or_else(|| D::Error::custom(format!("bad timestamp {s:?}")))
    }
}

/// Problem with a single record, independent of its position in a stream.
#[derive(Debug, Error, PartialEq)]
pub enum RecordError {
    #[error("malformed record: {0}")]
    Malformed(String),
    #[error("schema error in field \"{field}\": {problem}")]
    Schema {
        field: &'static str,
        problem: String,
    },
    #[error("invalid record: {0}")]
    Invalid(String),
}

impl RecordError {
    /// Name of the offending field for schema errors.
    pub fn field(&self) -> Option<&'static str> {
        match self {
            RecordError::Schema { field, .. } => Some(field),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum TweetError {
    #[error("line {line}: {source}")]
    Record { line: usize, source: RecordError },
    #[error("stream error: {0}")]
    Io(#[from] io::Error),
}

fn missing(field: &'static str) -> RecordError {
    RecordError::Schema {
        field,
        problem: "missing required field".into(),
    }
}

fn wrong_type(field: &'static str, expected: &str) -> RecordError {
    RecordError::Schema {
        field,
        problem: format!("expected {expected}"),
    }
}

fn req<'a>(obj: &'a Map<String, Value>, field: &'static str) -> Result<&'a Value, RecordError> {
    match obj.get(field) {
        None | Some(Value::Null) => Err(missing(field)),
        Some(v) => Ok(v),
    }
}

fn req_u64(obj: &Map<String, Value>, field: &'static str) -> Result<u64, RecordError> {
    req(obj, field)?
        .as_u64()
        .ok_or_else(|| wrong_type(field, "non-negative integer"))
}

fn req_str<'a>(obj: &'a Map<String, Value>, field: &'static str) -> Result<&'a str, RecordError> {
    req(obj, field)?
        .as_str()
        .ok_or_else(|| wrong_type(field, "string"))
}

fn req_time(obj: &Map<String, Value>, field: &'static str) -> Result<DateTime<Utc>, RecordError> {
    let s = req_str(obj, field)?;
    parse_time(s).ok_or_else(|| wrong_type(field, "ISO-8601 UTC timestamp"))
}

fn span_list(ents: &Map<String, Value>, key: &'static str) -> Result<Vec<Span>, RecordError> {
    let Some(v) = ents.get(key) else {
        return Ok(Vec::new());
    };
    if v.is_null() {
        return Ok(Vec::new());
    }
    let arr = v
        .as_array()
        .ok_or_else(|| wrong_type("entities", "arrays of [start, end] spans"))?;
    arr.iter()
        .map(|item| {
            let pair = item.as_array().filter(|a| a.len() == 2);
            let start = pair.and_then(|a| a[0].as_u64());
            let end = pair.and_then(|a| a[1].as_u64());
            match (start, end) {
                (Some(s), Some(e)) => Ok(Span::new(s as usize, e as usize)),
                _ => Err(wrong_type("entities", "[start, end] integer pairs")),
            }
        })
        .collect()
}

fn parse_object(obj: &Map<String, Value>) -> Result<(Tweet, Option<Label>), RecordError> {
    let id = req_u64(obj, "id")?;
    let user_id = req_u64(obj, "user_id")?;
    let created_at = req_time(obj, "created_at")?;
    let text = req_str(obj, "text")?.to_owned();
    let entities = match obj.get("entities") {
        None | Some(Value::Null) => Entities::default(),
        Some(Value::Object(ents)) => Entities {
            hashtags: span_list(ents, "hashtags")?,
            urls: span_list(ents, "urls")?,
            mentions: span_list(ents, "mentions")?,
            media: span_list(ents, "media")?,
        },
        Some(_) => return Err(wrong_type("entities", "object")),
    };
    let source = req_str(obj, "source")?.to_owned();
    let in_reply_to_status_id = match obj.get("in_reply_to_status_id") {
        None | Some(Value::Null) => None,
        Some(v) => Some(
            v.as_u64()
                .ok_or_else(|| wrong_type("in_reply_to_status_id", "integer or null"))?,
        ),
    };
    let is_retweet = match obj.get("retweeted_status") {
        None | Some(Value::Null) => false,
        Some(Value::Object(_)) => true,
        Some(_) => return Err(wrong_type("retweeted_status", "object or null")),
    };
    let label = match obj.get("label") {
        None | Some(Value::Null) => None,
        Some(v) => Some(
            v.as_str()
                .and_then(Label::parse)
                .ok_or_else(|| wrong_type("label", "\"AGT\" or \"HGT\""))?,
        ),
    };
    let tweet = Tweet {
        id,
        user_id,
        created_at,
        text,
        entities,
        number_count: 0,
        source,
        in_reply_to_status_id,
        is_retweet,
        followers: req_u64(obj, "followers")?,
        friends: req_u64(obj, "friends")?,
        statuses_count: req_u64(obj, "statuses_count")?,
        favourites_count: req_u64(obj, "favourites_count")?,
        account_created_at: req_time(obj, "account_created_at")?,
    }
    .validated()?;
    Ok((tweet, label))
}

/// Parses one record, returning the tweet and its optional label.
pub fn parse_labeled_record(line: &str) -> Result<(Tweet, Option<Label>), RecordError> {
    let value: Value =
        serde_json::from_str(line).map_err(|e| RecordError::Malformed(e.to_string()))?;
    match value {
        Value::Object(obj) => parse_object(&obj),
        _ => Err(RecordError::Malformed("record is not a JSON object".into())),
    }
}

/// Parses one record; any label is ignored.
pub fn parse_record(line: &str) -> Result<Tweet, RecordError> {
    parse_labeled_record(line).map(|(t, _)| t)
}

/// What to do with a record that fails to parse.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Strictness {
    /// Stop at the first bad line.
    #[default]
    Strict,
    /// Log a warning and continue.
    Lenient,
}

/// Iterator over records of a line-delimited stream, in file order.
pub struct TweetReader<R> {
    lines: io::Lines<R>,
    line_no: usize,
    strictness: Strictness,
    skipped: usize,
    failed: bool,
}

impl<R: BufRead> TweetReader<R> {
    pub fn new(reader: R, strictness: Strictness) -> Self {
        TweetReader {
            lines: reader.lines(),
            line_no: 0,
            strictness,
            skipped: 0,
            failed: false,
        }
    }

    /// Bad lines skipped so far in lenient mode.
    pub fn skipped(&self) -> usize {
        self.skipped
    }
}

impl TweetReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>, strictness: Strictness) -> io::Result<Self> {
        Ok(Self::new(BufReader::new(File::open(path)?), strictness))
    }
}

impl<R: BufRead> Iterator for TweetReader<R> {
    type Item = Result<(Tweet, Option<Label>), TweetError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => {
                    self.failed = true;
                    return Some(Err(TweetError::Io(e)));
                }
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            match parse_labeled_record(&line) {
                Ok(rec) => return Some(Ok(rec)),
                Err(source) => match self.strictness {
                    Strictness::Strict => {
                        self.failed = true;
                        return Some(Err(TweetError::Record {
                            line: self.line_no,
                            source,
                        }));
                    }
                    Strictness::Lenient => {
                        log::warn!("skipping line {}: {}", self.line_no, source);
                        self.skipped += 1;
                    }
                },
            }
        }
    }
}

/// Reads all tweets from a line-delimited stream in file order.
pub fn read_stream<R: Read>(reader: R, strictness: Strictness) -> Result<Vec<Tweet>, TweetError> {
    TweetReader::new(BufReader::new(reader), strictness)
        .map(|r| r.map(|(t, _)| t))
        .collect()
}

/// Reads all tweets from a file.
pub fn read_tweets(
    path: impl AsRef<Path>,
    strictness: Strictness,
) -> Result<Vec<Tweet>, TweetError> {
    read_stream(File::open(path)?, strictness)
}

/// Reads labeled tweets; a record without a label is a schema error.
pub fn read_labeled<R: Read>(
    reader: R,
    strictness: Strictness,
) -> Result<Vec<LabeledTweet>, TweetError> {
    let mut out = Vec::new();
    let mut reader = TweetReader::new(BufReader::new(reader), strictness);
    while let Some(rec) = reader.next() {
        let (tweet, label) = rec?;
        match label {
            Some(label) => out.push(LabeledTweet { tweet, label }),
            None => {
                let source = RecordError::Schema {
                    field: "label",
                    problem: "missing required field".into(),
                };
                match strictness {
                    Strictness::Strict => {
                        return Err(TweetError::Record {
                            line: reader.line_no,
                            source,
                        })
                    }
                    Strictness::Lenient => {
                        log::warn!("skipping line {}: {}", reader.line_no, source);
                        reader.skipped += 1;
                    }
                }
            }
        }
    }
    Ok(out)
}

pub fn read_labeled_file(
    path: impl AsRef<Path>,
    strictness: Strictness,
) -> Result<Vec<LabeledTweet>, TweetError> {
    read_labeled(File::open(path)?, strictness)
}

/// Writes tweets as line-delimited records.
pub fn write_tweets<'a, W: io::Write>(
    mut w: W,
    tweets: impl IntoIterator<Item = &'a Tweet>,
) -> io::Result<()> {
    for t in tweets {
        writeln!(w, "{}", t.to_record(None))?;
    }
    Ok(())
}

pub fn write_labeled<'a, W: io::Write>(
    mut w: W,
    tweets: impl IntoIterator<Item = &'a LabeledTweet>,
) -> io::Result<()> {
    for t in tweets {
        writeln!(w, "{}", t.to_record())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> Map<String, Value> {
        let v = serde_json::json!({
            "id": 11, "user_id": 7, "created_at": "2017-01-02T10:00:00Z",
            "text": "#tag #more see https://t.co/x",
            "entities": {"hashtags": [[0, 4], [5, 10]], "urls": [[15, 29]]},
            "source": "Twitter for Android",
            "followers": 300, "friends": 100, "statuses_count": 500, "favourites_count": 40,
            "account_created_at": "2016-01-02T10:00:00Z"
        });
        v.as_object().unwrap().clone()
    }

    fn line(m: &Map<String, Value>) -> String {
        serde_json::to_string(m).unwrap()
    }

    #[test]
    fn entity_counts_come_from_lists() {
        let t = parse_record(&line(&base())).unwrap();
        assert_eq!(t.hashtag_count(), 2);
        assert_eq!(t.url_count(), 1);
        assert_eq!(t.mention_count(), 0);
        assert!(!t.is_retweet);
        assert!(!t.is_reply());
    }

    #[test]
    fn retweeted_status_presence_sets_flag() {
        let mut m = base();
        m.insert("retweeted_status".into(), serde_json::json!({"id": 3}));
        m.insert("in_reply_to_status_id".into(), serde_json::json!(99));
        let t = parse_record(&line(&m)).unwrap();
        assert!(t.is_retweet);
        assert_eq!(t.in_reply_to_status_id, Some(99));
    }

    #[test]
    fn missing_user_id_names_field() {
        let mut m = base();
        m.remove("user_id");
        let err = parse_record(&line(&m)).unwrap_err();
        assert_eq!(err.field(), Some("user_id"));
    }

    #[test]
    fn rejects_empty_text() {
        let mut m = base();
        m.insert("text".into(), "   ".into());
        m.remove("entities");
        assert!(matches!(
            parse_record(&line(&m)),
            Err(RecordError::Invalid(_))
        ));
    }

    #[test]
    fn rejects_tweet_before_account() {
        let mut m = base();
        m.insert("account_created_at".into(), "2018-01-01T00:00:00Z".into());
        assert!(matches!(
            parse_record(&line(&m)),
            Err(RecordError::Invalid(_))
        ));
    }

    #[test]
    fn rejects_out_of_range_span() {
        let mut m = base();
        m.insert("entities".into(), serde_json::json!({"urls": [[15, 400]]}));
        assert_eq!(
            parse_record(&line(&m)).unwrap_err().field(),
            Some("entities")
        );
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let good = line(&base());
        let input = format!("{good}\n{{not json\n{good}\n");
        let err = read_stream(input.as_bytes(), Strictness::Strict).unwrap_err();
        match err {
            TweetError::Record {
                line,
                source: RecordError::Malformed(_),
            } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn lenient_mode_skips_bad_lines() {
        let good = line(&base());
        let input = format!("{good}\n[1,2]\n\n{good}\n");
        let mut reader = TweetReader::new(input.as_bytes(), Strictness::Lenient);
        let n = reader.by_ref().filter(|r| r.is_ok()).count();
        assert_eq!(n, 2);
        assert_eq!(reader.skipped(), 1);
    }

    #[test]
    fn labeled_read_requires_label() {
        let good = line(&base());
        let err = read_labeled(good.as_bytes(), Strictness::Strict).unwrap_err();
        assert!(matches!(
            err,
            TweetError::Record {
                source: RecordError::Schema { field: "label", .. },
                ..
            }
        ));
    }

    #[test]
    fn fractional_seconds_are_truncated() {
        let mut m = base();
        m.insert("created_at".into(), "2017-01-02T10:00:00.750Z".into());
        let t = parse_record(&line(&m)).unwrap();
        assert_eq!(fmt_time(&t.created_at), "2017-01-02T10:00:00Z");
    }

    #[test]
    fn numbers_are_counted_outside_entities() {
        let mut m = base();
        m.insert("text".into(), "walking 8.02 km in 45 minutes".into());
        m.remove("entities");
        assert_eq!(parse_record(&line(&m)).unwrap().number_count, 2);
    }
}
