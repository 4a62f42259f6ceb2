//! Word lists and message templates for the synthetic world.

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, Zipf};

use crate::tweetio::{Entities, Span};

/// Accumulates text while recording entity spans in characters.
#[derive(Default)]
pub(crate) struct TextBuilder {
    text: String,
    len: usize,
    entities: Entities,
}

impl TextBuilder {
    fn sep(&mut self) {
        if !self.text.is_empty() {
            self.text.push(' ');
            self.len += 1;
        }
    }

    fn push_raw(&mut self, s: &str) -> Span {
        let start = self.len;
        self.text.push_str(s);
        self.len += s.chars().count();
        Span::new(start, self.len)
    }

    pub fn word(&mut self, w: &str) -> &mut Self {
        self.sep();
        self.push_raw(w);
        self
    }

    pub fn words(&mut self, ws: &str) -> &mut Self {
        for w in ws.split_whitespace() {
            self.word(w);
        }
        self
    }

    /// Appends without a separating space.
    pub fn glue(&mut self, s: &str) -> &mut Self {
        self.push_raw(s);
        self
    }

    pub fn hashtag(&mut self, tag: &str) -> &mut Self {
        self.sep();
        let s = self.push_raw(&format!("#{tag}"));
        self.entities.hashtags.push(s);
        self
    }

    pub fn mention(&mut self, name: &str) -> &mut Self {
        self.sep();
        let s = self.push_raw(&format!("@{name}"));
        self.entities.mentions.push(s);
        self
    }

    pub fn url<R: Rng + ?Sized>(&mut self, rng: &mut R) -> &mut Self {
        self.sep();
        let s = self.push_raw(&short_url(rng));
        self.entities.urls.push(s);
        self
    }

    pub fn media<R: Rng + ?Sized>(&mut self, rng: &mut R) -> &mut Self {
        self.sep();
        let s = self.push_raw(&short_url(rng));
        self.entities.media.push(s);
        self
    }

    pub fn is_empty(&self) -> bool {
        self.text.trim().is_empty()
    }

    pub fn finish(self) -> (String, Entities) {
        (self.text, self.entities)
    }
}

fn short_url<R: Rng + ?Sized>(rng: &mut R) -> String {
    const ALNUM: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";
    let code: String = (0..10).map(|_| *ALNUM.choose(rng).unwrap() as char).collect();
    format!("https://t.co/{code}")
}

pub(crate) fn pick<'a, R: Rng + ?Sized>(rng: &mut R, items: &'a [&'a str]) -> &'a str {
    items.choose(rng).copied().unwrap_or("")
}

pub(crate) const HUMAN_WORDS: &[&str] = &[
    "the", "i", "to", "a", "and", "is", "in", "it", "you", "of", "for", "on", "my", "that", "me", "so", "this",
    "be", "have", "with", "just", "not", "but", "was", "are", "at", "all", "we", "like", "what", "your", "do",
    "get", "love", "now", "good", "day", "can", "when", "one", "today", "out", "know", "up", "no", "time", "how",
    "people", "go", "new", "really", "see", "great", "want", "got", "back", "think", "night", "still",
    "going", "much", "tonight", "been", "would", "need", "last", "first", "happy", "thanks", "feel", "best",
    "work", "tomorrow", "week", "never", "life", "here", "make", "right", "sleep", "home", "morning", "some",
    "way", "why", "said", "always", "friends", "lol", "could", "again", "should", "finally", "school", "game",
    "amazing", "weekend", "well", "thing", "nice", "better", "hope", "sure", "coffee", "watching", "early",
    "tired", "weather", "snow", "cold", "winter", "summer", "beautiful", "looking", "team", "win", "song",
    "music", "show", "movie", "book", "reading", "dinner", "lunch", "breakfast", "pizza", "sauna", "lake",
    "forest", "helsinki", "stockholm", "oslo", "tampere", "kuopio", "turku", "city", "train", "bus", "late",
    "wait", "waiting", "miss", "talk", "call", "someone", "everyone", "anything", "nothing", "maybe", "funny",
    "crazy", "omg", "wow", "yes", "yeah", "haha", "seriously", "literally", "honestly", "actually", "though",
    "because", "about", "after", "before", "over", "again", "into", "only", "very", "too", "more", "most",
    "other", "every", "little", "big", "long", "old", "young", "hard", "easy", "fun", "bad", "sad", "cool",
    "hot", "ready", "done", "start", "stop", "play", "playing", "eat", "eating", "drink", "beer", "wine",
    "party", "birthday", "family", "mom", "dad", "sister", "brother", "dog", "cat", "baby", "kids", "class",
    "exam", "study", "office", "meeting", "boss", "job", "money", "pay", "buy", "shopping", "car", "road",
    "run", "gym", "hockey", "football", "match", "goal", "season", "fans", "vote", "news", "world", "country",
    "finland", "sweden", "norway", "europe", "trip", "travel", "flight", "holiday", "vacation", "beach", "sun",
    "rain", "dark", "light", "sky", "photo", "picture", "video", "phone", "internet", "twitter", "tweet",
    "follow", "post", "read", "write", "wrote", "story", "remember", "forget", "believe", "mean", "worst",
    "perfect", "totally", "pretty", "kind", "sorry", "please", "thank", "welcome", "congrats", "proud",
    "excited", "bored", "hungry", "sick", "cant", "dont", "wont", "im", "ive", "youre", "thats", "its",
    "kiitos", "moi", "hei", "tack", "hej", "ja", "och", "joo", "kiva", "ihana",
];

pub(crate) const PUNCT: &[&str] = &["!", "?", ".", "!!", "...", "?!"];
pub(crate) const EMOJI: &[&str] = &["😂", "❤", "😍", "😊", "🙏", "👍", "😭", "🔥", "☀", "❄", "🎉", "😎"];
pub(crate) const CITIES: &[&str] = &[
    "Helsinki", "Espoo", "Tampere", "Turku", "Oulu", "Kuopio", "Jyväskylä", "Lahti", "Stockholm", "Göteborg",
    "Malmö", "Uppsala", "Oslo", "Bergen", "Trondheim", "Copenhagen", "Aarhus", "Reykjavik", "Tallinn", "Umeå",
];
pub(crate) const REGIONS: &[&str] = &["Finland", "Sweden", "Norway", "Denmark", "Uusimaa", "Pirkanmaa", "Skåne"];
pub(crate) const VENUES: &[&str] = &[
    "Starbucks", "Kamppi", "Stockmann", "Airport", "Central Station", "Prisma", "K-Citymarket", "Hesburger",
    "Arlanda", "Vantaa Airport", "Espresso House", "Clarion Hotel", "Scandic", "IKEA", "Sokos Hotel",
    "Sello", "Forum", "Itis", "Jumbo", "Ideapark", "Hartwall Arena", "Olympic Stadium", "Linnanmäki",
    "Kauppatori", "University Library", "City Hall", "Gym", "S-Market", "Lidl", "Fazer Cafe",
];
pub(crate) const ACTIVITIES: &[&str] = &["running", "cycling", "walking", "skiing", "rowing", "hiking"];
pub(crate) const BEERS: &[&str] = &["Lapin Kulta", "Karhu", "Koff", "Pale Ale", "IPA", "Porter", "Stout", "Lager"];
pub(crate) const BREWERIES: &[&str] = &["Sinebrychoff", "Hartwall", "Olvi", "Mikkeller", "Pyynikin", "Nokian"];
pub(crate) const TAGS: &[&str] = &[
    "helsinki", "finland", "sweden", "stockholm", "hockey", "leijonat", "music", "love", "travel", "photo",
    "winter", "snow", "nature", "food", "coffee", "friday", "monday", "tbt", "fitness", "news", "sports",
    "movies", "gaming", "art", "design", "startup", "tech", "nordic", "sauna", "summer",
];
pub(crate) const NAMES: &[&str] = &[
    "mikko", "anna_k", "jussi88", "emmi", "villeh", "sanna_m", "oskar", "elina", "teemu", "laura_s", "nina",
    "johan", "erik", "sofia", "maria", "petri", "kaisa", "henrik", "ida", "matti", "YLEnews", "HSfi",
    "yle", "SVT", "nrk", "Spotify", "YouTube", "runkeeper",
];
pub(crate) const HEADLINE_WORDS: &[&str] = &[
    "Government", "Minister", "Police", "City", "Council", "Storm", "Election", "Budget", "Company", "Report",
    "Study", "Court", "Market", "Prices", "Strike", "School", "Hospital", "Airport", "Weather", "Traffic",
    "announces", "warns", "plans", "rejects", "approves", "reports", "cuts", "raises", "opens", "closes",
    "new", "record", "major", "local", "national", "first", "after", "over", "against", "amid", "talks",
    "deal", "crisis", "growth", "jobs", "tax", "reform", "investigation", "accident", "fire", "victory",
];
pub(crate) const JOB_TITLES: &[&str] = &[
    "Software Engineer", "Sales Manager", "Nurse", "Project Manager", "Accountant", "Warehouse Worker",
    "Customer Service Agent", "Data Analyst", "Teacher", "Chef", "Electrician", "Designer",
];
pub(crate) const COMPANIES: &[&str] = &["Nokia", "Kone", "Wärtsilä", "Fortum", "UPM", "Valio", "Posti", "Elisa"];
pub(crate) const SONGS: &[&str] = &["Midnight", "Northern Lights", "Summer Rain", "Ghosts", "Hold On", "Relax"];
pub(crate) const ARTISTS: &[&str] = &["Robin", "Haloo Helsinki", "Alma", "Avicii", "Sanni", "Nightwish", "Robyn"];
pub(crate) const PROMO_WORDS: &[&str] = &[
    "discover", "our", "new", "collection", "today", "join", "us", "event", "free", "tickets", "offer",
    "limited", "time", "visit", "store", "weekend", "sale", "check", "out", "latest", "blog", "post", "tips",
    "team", "customers", "thank", "you", "for", "an", "amazing", "year", "learn", "more", "about", "how",
    "we", "help", "your", "business", "grow", "read", "the", "story", "behind", "see", "what", "is", "coming",
];

/// Zipf-distributed pick from the human vocabulary.
pub(crate) struct Vocab {
    zipf: Zipf<f64>,
}

impl Vocab {
    pub fn new() -> Self {
        Vocab { zipf: Zipf::new(HUMAN_WORDS.len() as f64, 0.9).expect("valid zipf") }
    }

    pub fn word<R: Rng + ?Sized>(&self, rng: &mut R) -> &'static str {
        let r = self.zipf.sample(rng) as usize;
        HUMAN_WORDS[(r - 1).min(HUMAN_WORDS.len() - 1)]
    }
}

pub(crate) fn number<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64, decimals: usize) -> String {
    format!("{:.*}", decimals, rng.random_range(lo..hi))
}
