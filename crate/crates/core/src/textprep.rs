//! Tweet text to word-set conversion for the text classifier.
//!
//! Processing order:
//!
//! 1. Entity spans are replaced by placeholders: hashtags `xhashtagx`, URLs
//!    `xurlx`, mentions `xuserx`, media `xmediax`.
//! 2. The remaining text is lowercased and scanned:
//!    - whitespace separates tokens;
//!    - a run matching `[0-9]+([.,][0-9]+)*` that starts a token is a numeric
//!      literal and becomes `xnumberx`;
//!    - an emoji (ranges in [`is_emoji`]) is a token on its own;
//!    - apostrophes (`'`, `’`, `ʼ`) are deleted without splitting (`i'm` -> `im`);
//!    - variation selectors, ZWJ, skin-tone modifiers and the keycap mark
//!      are dropped;
//!    - every other non-alphanumeric character is punctuation and separates
//!      tokens.
//! 3. Purely alphabetic tokens are stemmed with the Snowball English stemmer.
//!
//! A word that collides with a placeholder spelling is dropped so every
//! placeholder in the output corresponds to an entity or numeric literal.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::sync::LazyLock;

use rust_stemmers::{Algorithm, Stemmer};
use thiserror::Error;

use crate::tweetio::{Entities, EntityKind};

pub const HASHTAG: &str = "xhashtagx";
pub const URL: &str = "xurlx";
pub const USER: &str = "xuserx";
pub const MEDIA: &str = "xmediax";
pub const NUMBER: &str = "xnumberx";

pub const PLACEHOLDERS: [&str; 5] = [HASHTAG, URL, USER, MEDIA, NUMBER];

static STEMMER: LazyLock<Stemmer> = LazyLock::new(|| Stemmer::create(Algorithm::English));

/// Stems one lowercase alphabetic word.
pub fn stem(word: &str) -> String {
    STEMMER.stem(word).into_owned()
}

/// Emoji code point ranges kept as single tokens.
pub fn is_emoji(c: char) -> bool {
    matches!(c as u32,
        0x1F000..=0x1F3FA
        | 0x1F400..=0x1FAFF
        | 0x2600..=0x27BF
        | 0x2B00..=0x2BFF
        | 0x2300..=0x23FF
        | 0x3030 | 0x303D | 0x3297 | 0x3299)
}

fn is_ignorable(c: char) -> bool {
    matches!(
        c as u32,
        0xFE0E | 0xFE0F | 0x200D | 0x20E3 | 0x1F3FB..=0x1F3FF
    )
}

fn is_apostrophe(c: char) -> bool {
    matches!(c, '\'' | '\u{2019}' | '\u{02BC}')
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Piece {
    Word(String),
    Number,
    Emoji(char),
}

fn scan_segment(chars: &[char], out: &mut Vec<Piece>) {
    let mut word = String::new();
    let flush = |word: &mut String, out: &mut Vec<Piece>| {
        if !word.is_empty() {
            out.push(Piece::Word(std::mem::take(word)));
        }
    };
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            flush(&mut word, out);
        } else if is_ignorable(c) || is_apostrophe(c) {
            // dropped in place
        } else if is_emoji(c) {
            flush(&mut word, out);
            out.push(Piece::Emoji(c));
        } else if c.is_ascii_digit() && word.is_empty() {
            let mut j = i;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            while j + 1 < chars.len()
                && matches!(chars[j], '.' | ',')
                && chars[j + 1].is_ascii_digit()
            {
                j += 1;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
            }
            out.push(Piece::Number);
            i = j;
            continue;
        } else if c.is_alphanumeric() {
            word.extend(c.to_lowercase());
        } else {
            flush(&mut word, out);
        }
        i += 1;
    }
    flush(&mut word, out);
}

fn placeholder(kind: EntityKind) -> &'static str {
    match kind {
        EntityKind::Hashtag => HASHTAG,
        EntityKind::Url => URL,
        EntityKind::Mention => USER,
        EntityKind::Media => MEDIA,
    }
}

enum Chunk<'a> {
    Text(&'a [char]),
    Entity(EntityKind),
}

/// Visits every non-entity segment and every entity in text order.
fn walk(text: &str, entities: &Entities, mut visit: impl FnMut(Chunk<'_>)) {
    let chars: Vec<char> = text.chars().collect();
    let mut pos = 0;
    for (span, kind) in entities.spans() {
        let start = span.start.min(chars.len()).max(pos);
        let end = span.end.min(chars.len());
        if start > pos {
            visit(Chunk::Text(&chars[pos..start]));
        }
        if end > start {
            visit(Chunk::Entity(kind));
            pos = end;
        }
    }
    if pos < chars.len() {
        visit(Chunk::Text(&chars[pos..]));
    }
}

/// Number of numeric literals in the text outside entity spans.
pub fn count_numbers(text: &str, entities: &Entities) -> u32 {
    let mut pieces = Vec::new();
    walk(text, entities, |c| {
        if let Chunk::Text(seg) = c {
            scan_segment(seg, &mut pieces)
        }
    });
    pieces.iter().filter(|p| matches!(p, Piece::Number)).count() as u32
}

/// Normalized tokens in text order, before duplicates collapse.
pub fn tokens(text: &str, entities: &Entities) -> Vec<String> {
    let mut out = Vec::new();
    let mut pieces = Vec::new();
    walk(text, entities, |chunk| {
        let seg = match chunk {
            Chunk::Entity(kind) => return out.push(placeholder(kind).to_owned()),
            Chunk::Text(seg) => seg,
        };
        pieces.clear();
        scan_segment(seg, &mut pieces);
        for p in pieces.drain(..) {
            match p {
                Piece::Number => out.push(NUMBER.to_owned()),
                Piece::Emoji(c) => out.push(c.to_string()),
                Piece::Word(w) => {
                    if PLACEHOLDERS.contains(&w.as_str()) {
                        continue;
                    }
                    if w.chars().all(char::is_alphabetic) {
                        out.push(stem(&w));
                    } else {
                        out.push(w);
                    }
                }
            }
        }
    });
    out
}

/// Set of normalized tokens of one tweet.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WordSet {
    pub words: BTreeSet<String>,
}

impl WordSet {
    pub fn len(&self) -> usize {
        self.words.len()
    }
    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
    pub fn contains(&self, w: &str) -> bool {
        self.words.contains(w)
    }
}

impl<S: Into<String>> FromIterator<S> for WordSet {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        WordSet {
            words: iter.into_iter().map(Into::into).collect(),
        }
    }
}

pub fn normalize(text: &str, entities: &Entities) -> WordSet {
    tokens(text, entities).into_iter().collect()
}

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("vocabulary configuration error: {0}")]
    Config(String),
    #[error("vocabulary file error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub const DEFAULT_MAX_SIZE: usize = 2000;
pub const DEFAULT_MIN_FREQ: usize = 2;

/// Ordered token list: document frequency descending, ties lexicographic.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    max_size: usize,
    min_freq: usize,
}

const VOCAB_MAGIC: &str = "agt-vocabulary";
const VOCAB_VERSION: u32 = 1;

impl Vocabulary {
    pub fn build<'a>(
        corpus: impl IntoIterator<Item = &'a WordSet>,
        max_size: usize,
        min_freq: usize,
    ) -> Result<Vocabulary, VocabError> {
        if max_size == 0 || min_freq == 0 {
            return Err(VocabError::Config(
                "max_size and min_freq must be positive".into(),
            ));
        }
        let mut freq: HashMap<&str, usize> = HashMap::new();
        let mut docs = 0usize;
        for ws in corpus {
            docs += 1;
            for w in &ws.words {
                *freq.entry(w.as_str()).or_default() += 1;
            }
        }
        if docs == 0 {
            return Err(VocabError::Config("empty corpus".into()));
        }
        let mut ranked: Vec<(&str, usize)> =
            freq.into_iter().filter(|&(_, f)| f >= min_freq).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        ranked.truncate(max_size);
        if ranked.is_empty() {
            return Err(VocabError::Config(format!(
                "no token reaches min_freq={min_freq}"
            )));
        }
        Ok(Self::from_parts(
            ranked.into_iter().map(|(w, _)| w.to_owned()).collect(),
            max_size,
            min_freq,
        ))
    }

    fn from_parts(tokens: Vec<String>, max_size: usize, min_freq: usize) -> Vocabulary {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary {
            tokens,
            index,
            max_size,
            min_freq,
        }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
    pub fn size(&self) -> usize {
        self.tokens.len()
    }
    pub fn position(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }
    pub fn max_size(&self) -> usize {
        self.max_size
    }
    pub fn min_freq(&self) -> usize {
        self.min_freq
    }

    /// Binary indicator vector aligned with `tokens()`.
    pub fn encode(&self, ws: &WordSet) -> Vec<f64> {
        let mut v = vec![0.0; self.tokens.len()];
        for w in &ws.words {
            if let Some(i) = self.position(w) {
                v[i] = 1.0;
            }
        }
        v
    }

    /// Header line then one token per line.
    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(
            w,
            "{VOCAB_MAGIC} v{VOCAB_VERSION} size={} max_size={} min_freq={}",
            self.tokens.len(),
            self.max_size,
            self.min_freq
        )?;
        for t in &self.tokens {
            writeln!(w, "{t}")?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), VocabError> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        fs::write(path, buf)?;
        Ok(())
    }

    pub fn parse(content: &str) -> Result<Vocabulary, VocabError> {
        let mut lines = content.lines();
        let header = lines
            .next()
            .ok_or_else(|| VocabError::Format("empty file".into()))?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some(VOCAB_MAGIC) {
            return Err(VocabError::Format("not a vocabulary file".into()));
        }
        if parts.next() != Some("v1") {
            return Err(VocabError::Format(format!(
                "unsupported version in header {header:?}"
            )));
        }
        let mut size = None;
        let mut max_size = None;
        let mut min_freq = None;
        for kv in parts {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| VocabError::Format(format!("bad header field {kv:?}")))?;
            let n: usize = v
                .parse()
                .map_err(|_| VocabError::Format(format!("bad number in {kv:?}")))?;
            match k {
                "size" => size = Some(n),
                "max_size" => max_size = Some(n),
                "min_freq" => min_freq = Some(n),
                _ => return Err(VocabError::Format(format!("unknown header field {k:?}"))),
            }
        }
        let (Some(size), Some(max_size), Some(min_freq)) = (size, max_size, min_freq) else {
            return Err(VocabError::Format(
                "header lacks size, max_size or min_freq".into(),
            ));
        };
        let tokens: Vec<String> = lines.map(str::to_owned).collect();
        if tokens.len() != size {
            return Err(VocabError::Format(format!(
                "header says {size} tokens, found {}",
                tokens.len()
            )));
        }
        let vocab = Self::from_parts(tokens, max_size, min_freq);
        if vocab.index.len() != vocab.tokens.len() {
            return Err(VocabError::Format("duplicate tokens".into()));
        }
        Ok(vocab)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Vocabulary, VocabError> {
        Self::parse(&fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tweetio::Span;

    fn ws(words: &[&str]) -> WordSet {
        words.iter().copied().collect()
    }

    #[test]
    fn paper_example_sentence() {
        let text = "You will be greatly missed @POTUS !! https://t.co/BBpHaCvoV7";
        let ents = Entities {
            mentions: vec![Span::new(27, 33)],
            urls: vec![Span::new(37, 60)],
            ..Default::default()
        };
        assert_eq!(
            normalize(text, &ents),
            ws(&["you", "will", "be", "great", "miss", "xuserx", "xurlx"])
        );
    }

    #[test]
    fn case_fold_and_collapse() {
        assert_eq!(
            normalize("hello hello HELLO", &Entities::default()),
            ws(&["hello"])
        );
    }

    #[test]
    fn numbers_and_hashtags() {
        let ents = Entities {
            hashtags: vec![Span::new(16, 20)],
            ..Default::default()
        };
        let set = normalize("walking 8.02 km #fit", &ents);
        assert_eq!(set, ws(&[&stem("walking"), NUMBER, HASHTAG, "km"]));
        assert!(set.contains("walk"));
    }

    #[test]
    fn emoji_kept_and_punctuation_removed() {
        let toks = tokens(
            "Sunny!!! \u{2600}\u{FE0F}\u{1F60A}\u{1F60A} it's \"great\"",
            &Entities::default(),
        );
        assert_eq!(
            toks,
            vec!["sunni", "\u{2600}", "\u{1F60A}", "\u{1F60A}", "it", "great"]
        );
    }

    #[test]
    fn placeholder_spelling_in_text_is_dropped() {
        assert_eq!(normalize("xurlx hi", &Entities::default()), ws(&["hi"]));
    }

    #[test]
    fn mixed_alnum_not_stemmed() {
        assert_eq!(
            tokens("mp3s 4u", &Entities::default()),
            vec!["mp3s", NUMBER, "u"]
        );
    }

    #[test]
    fn vocabulary_tie_rule() {
        let corpus = [ws(&["a", "b"]), ws(&["a"]), ws(&["a", "c"])];
        let v = Vocabulary::build(&corpus, 2, 1).unwrap();
        assert_eq!(v.tokens(), ["a", "b"]);
        let v = Vocabulary::build(&corpus, 1, 1).unwrap();
        assert_eq!(v.tokens(), ["a"]);
        let v = Vocabulary::build(&corpus, 10, 2).unwrap();
        assert_eq!(v.tokens(), ["a"]);
    }

    #[test]
    fn empty_corpus_is_config_error() {
        let corpus: Vec<WordSet> = Vec::new();
        assert!(matches!(
            Vocabulary::build(&corpus, 5, 1),
            Err(VocabError::Config(_))
        ));
    }

    #[test]
    fn encode_ignores_oov() {
        let corpus = [ws(&["a", "b"]), ws(&["a", "b"])];
        let v = Vocabulary::build(&corpus, 2, 1).unwrap();
        assert_eq!(v.encode(&ws(&["a"])), vec![1.0, 0.0]);
        assert_eq!(v.encode(&ws(&["z"])), vec![0.0, 0.0]);
    }

    #[test]
    fn vocabulary_file_round_trip() {
        let corpus = [ws(&["a", "b", "xurlx"]), ws(&["a", "\u{1F60A}"])];
        let v = Vocabulary::build(&corpus, 10, 1).unwrap();
        let mut buf = Vec::new();
        v.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("agt-vocabulary v1 size=4 max_size=10 min_freq=1\n"));
        assert_eq!(Vocabulary::parse(&text).unwrap(), v);
        assert!(Vocabulary::parse("agt-vocabulary v2 size=0 max_size=1 min_freq=1\n").is_err());
    }
}
