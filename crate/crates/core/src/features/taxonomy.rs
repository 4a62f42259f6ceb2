use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::FeatureError;

/// Six-way posting-source category.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DeviceType {
    #[serde(rename = "mobile")]
    Mobile,
    #[serde(rename = "web")]
    Web,
    #[serde(rename = "app")]
    App,
    #[serde(rename = "SMM")]
    Smm,
    #[serde(rename = "bot")]
    Bot,
    #[serde(rename = "other")]
    Other,
}

impl DeviceType {
    pub const ALL: [DeviceType; 6] = [
        DeviceType::Mobile,
        DeviceType::Web,
        DeviceType::App,
        DeviceType::Smm,
        DeviceType::Bot,
        DeviceType::Other,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            DeviceType::Mobile => "mobile",
            DeviceType::Web => "web",
            DeviceType::App => "app",
            DeviceType::Smm => "SMM",
            DeviceType::Bot => "bot",
            DeviceType::Other => "other",
        }
    }

    pub fn parse(s: &str) -> Option<DeviceType> {
        DeviceType::ALL
            .into_iter()
            .find(|d| d.name().eq_ignore_ascii_case(s.trim()))
    }

    pub fn level_names() -> [&'static str; 6] {
        DeviceType::ALL.map(DeviceType::name)
    }
}

impl fmt::Display for DeviceType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

const BUILTIN: &str = include_str!("../../data/source_taxonomy.tsv");

/// Source string to device category. Lookup is total: unknown sources are `Other`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SourceTaxonomy {
    map: HashMap<String, DeviceType>,
    entries: Vec<(String, DeviceType)>,
}

fn key(source: &str) -> String {
    let s = source.trim();
    // raw API sources arrive as `<a href="...">Name</a>`
    let inner = match (s.starts_with('<'), s.find('>'), s.rfind("</")) {
        (true, Some(open), Some(close)) if close > open => &s[open + 1..close],
        _ => s,
    };
    inner.trim().to_lowercase()
}

impl SourceTaxonomy {
    /// The mapping shipped with the crate.
    pub fn builtin() -> Self {
        Self::parse(BUILTIN).expect("built-in taxonomy parses")
    }

    pub fn empty() -> Self {
        SourceTaxonomy {
            map: HashMap::new(),
            entries: Vec::new(),
        }
    }

    /// Tab-separated `source<TAB>category` lines; `#` starts a comment line.
    pub fn parse(content: &str) -> Result<Self, FeatureError> {
        let mut tax = Self::empty();
        for (no, line) in content.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (src, cat) = line.split_once('\t').ok_or_else(|| {
                FeatureError::Taxonomy(format!(
                    "line {}: expected two tab-separated columns",
                    no + 1
                ))
            })?;
            let cat = DeviceType::parse(cat)
                .filter(|d| *d != DeviceType::Other)
                .ok_or_else(|| {
                    FeatureError::Taxonomy(format!("line {}: unknown category {:?}", no + 1, cat))
                })?;
            tax.insert(src, cat);
        }
        Ok(tax)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, FeatureError> {
        let content = fs::read_to_string(path.as_ref())
            .map_err(|e| FeatureError::Taxonomy(format!("{}: {e}", path.as_ref().display())))?;
        Self::parse(&content)
    }

    pub fn insert(&mut self, source: &str, category: DeviceType) {
        let k = key(source);
        if self.map.insert(k.clone(), category).is_some() {
            self.entries.retain(|(s, _)| key(s) != k);
        }
        self.entries.push((source.trim().to_owned(), category));
    }

    pub fn lookup(&self, source: &str) -> DeviceType {
        self.map
            .get(&key(source))
            .copied()
            .unwrap_or(DeviceType::Other)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Serializes back to the TSV format.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("# source\tcategory\n");
        for (s, c) in &self.entries {
            out.push_str(s);
            out.push('\t');
            out.push_str(c.name());
            out.push('\n');
        }
        out
    }
}

impl Default for SourceTaxonomy {
    fn default() -> Self {
        Self::builtin()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_exemplars() {
        let t = SourceTaxonomy::builtin();
        assert_eq!(t.lookup("Twitter for iPhone"), DeviceType::Mobile);
        assert_eq!(t.lookup("twitter for android"), DeviceType::Mobile);
        assert_eq!(t.lookup("Twitter Web Client"), DeviceType::Web);
        assert_eq!(t.lookup("Instagram"), DeviceType::App);
        assert_eq!(t.lookup("Tumblr"), DeviceType::App);
        assert_eq!(t.lookup("Falcon Social Media Management"), DeviceType::Smm);
        assert_eq!(t.lookup("TweetDeck"), DeviceType::Smm);
        assert_eq!(t.lookup("Trendsmap Alerting"), DeviceType::Bot);
        assert_eq!(t.lookup("Some Brand New App"), DeviceType::Other);
    }

    #[test]
    fn html_anchor_sources() {
        let t = SourceTaxonomy::builtin();
        let raw =
            r#"<a href="http://twitter.com/download/iphone" rel="nofollow">Twitter for iPhone</a>"#;
        assert_eq!(t.lookup(raw), DeviceType::Mobile);
    }

    #[test]
    fn parse_errors_and_round_trip() {
        assert!(SourceTaxonomy::parse("Foo\tspaceship\n").is_err());
        assert!(SourceTaxonomy::parse("no tab here\n").is_err());
        assert!(SourceTaxonomy::parse("Foo\tother\n").is_err());
        let t = SourceTaxonomy::parse("# c\n\nFoo\tbot\nBar\tSMM\nfoo\tapp\n").unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.lookup("FOO"), DeviceType::App);
        assert_eq!(SourceTaxonomy::parse(&t.to_tsv()).unwrap(), t);
    }
}
