//! Per-tweet routing between the no-profile and profile classifiers.
//!
//! Decision-model feature order:
//! - no-profile: `[textProbability, <9 tweet properties>]`
//! - profile: `[textProbability, <9 tweet properties>, <selected timeline attributes>]`
//!
//! A bundle is stored as four files in one directory: `vocabulary.txt`,
//! `text_model.json`, `no_profile_model.json` and `profile_model.json`. The
//! source taxonomy and timeline feature settings travel in the metadata of the
//! decision models.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{self, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{
    timeline_properties, ChiSquaredInput, FeatureConfig, SourceTaxonomy, TimelineAttr, TimelineProperties,
    TweetProperties,
};
use crate::fetcher::{fetch_timeline, FetchPolicy, FetchQueue, SourceError, TimelineSource};
use crate::learners::{
    fit, label_for, Attribute, Dataset, FeatureSchema, ForestConfig, LearnError, LearnerKind, NbConfig, TrainedModel,
    DEFAULT_THRESHOLD,
};
use crate::profiles::{ProfileError, ProfileStore, RAT_LIMIT};
use crate::textprep::{normalize, VocabError, Vocabulary, DEFAULT_MAX_SIZE, DEFAULT_MIN_FREQ};
use crate::tweetio::{Label, LabeledTweet, Tweet, TweetId, UserId};

pub const TEXT_PROBABILITY: &str = "textProbability";
pub const VOCABULARY_FILE: &str = "vocabulary.txt";
pub const TEXT_MODEL_FILE: &str = "text_model.json";
pub const NO_PROFILE_MODEL_FILE: &str = "no_profile_model.json";
pub const PROFILE_MODEL_FILE: &str = "profile_model.json";
pub const BUNDLE_FILES: [&str; 4] = [VOCABULARY_FILE, TEXT_MODEL_FILE, NO_PROFILE_MODEL_FILE, PROFILE_MODEL_FILE];

const META_ROLE: &str = "role";
const META_TAXONOMY: &str = "taxonomy";
const META_TIMELINE_ATTRS: &str = "timeline_attrs";
const META_CHI_INPUT: &str = "chi_squared_input";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Vocab(#[from] VocabError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error("timeline source: {0}")]
    Source(#[from] SourceError),
    #[error("training data: {0}")]
    Training(String),
    #[error("bundle: {0}")]
    Bundle(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierPath {
    NoProfile,
    Profile,
}

impl ClassifierPath {
    pub fn as_str(self) -> &'static str {
        match self {
            ClassifierPath::NoProfile => "no_profile",
            ClassifierPath::Profile => "profile",
        }
    }
}

impl fmt::Display for ClassifierPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub id: TweetId,
    pub label: Label,
    pub probability: f64,
    pub path: ClassifierPath,
    pub text_probability: f64,
}

impl Verdict {
    pub const CSV_HEADER: &'static str = "id,label,probability,path,text_probability";

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("verdict serializes")
    }

    pub fn to_csv(&self) -> String {
        format!("{},{},{},{},{}", self.id, self.label, self.probability, self.path, self.text_probability)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerdictFormat {
    #[default]
    Json,
    Csv,
}

pub fn write_verdicts<'a, W: Write>(
    mut w: W,
    format: VerdictFormat,
    verdicts: impl IntoIterator<Item = &'a Verdict>,
) -> io::Result<()> {
    if format == VerdictFormat::Csv {
        writeln!(w, "{}", Verdict::CSV_HEADER)?;
    }
    for v in verdicts {
        match format {
            VerdictFormat::Json => writeln!(w, "{}", v.to_json())?,
            VerdictFormat::Csv => writeln!(w, "{}", v.to_csv())?,
        }
    }
    Ok(())
}

pub fn no_profile_schema() -> FeatureSchema {
    let mut attrs = vec![Attribute::numeric(TEXT_PROBABILITY)];
    attrs.extend(TweetProperties::attributes());
    FeatureSchema::new(attrs).expect("static schema")
}

pub fn profile_schema(features: &FeatureConfig) -> FeatureSchema {
    let mut attrs = no_profile_schema().attributes;
    attrs.extend(features.timeline_attrs.iter().map(|a| Attribute::numeric(a.name())));
    FeatureSchema::new(attrs).expect("timeline attributes are distinct")
}

pub fn no_profile_vector(text_probability: f64, props: &TweetProperties) -> Vec<f64> {
    let mut v = Vec::with_capacity(10);
    v.push(text_probability);
    v.extend(props.values());
    v
}

pub fn profile_vector(
    text_probability: f64,
    props: &TweetProperties,
    timeline: &TimelineProperties,
    attrs: &[TimelineAttr],
) -> Vec<f64> {
    let mut v = no_profile_vector(text_probability, props);
    v.extend(attrs.iter().map(|&a| timeline.get(a)));
    v
}

/// The three trained models plus what is needed to feed them.
#[derive(Clone, Debug)]
pub struct ClassifierBundle {
    pub vocabulary: Vocabulary,
    pub text_model: TrainedModel,
    pub no_profile_model: TrainedModel,
    pub profile_model: TrainedModel,
    pub taxonomy: SourceTaxonomy,
    pub features: FeatureConfig,
}

impl ClassifierBundle {
    pub fn text_probability(&self, t: &Tweet) -> f64 {
        let x = self.vocabulary.encode(&normalize(&t.text, &t.entities));
        self.text_model.predict_unchecked(&x)
    }

    pub fn tweet_properties(&self, t: &Tweet) -> TweetProperties {
        crate::features::tweet_properties(t, &self.taxonomy)
    }

    pub fn classify_without_profile(&self, t: &Tweet) -> Verdict {
        let tp = self.text_probability(t);
        let p = self.no_profile_model.predict_unchecked(&no_profile_vector(tp, &self.tweet_properties(t)));
        verdict(t.id, p, ClassifierPath::NoProfile, tp)
    }

    pub fn classify_with_profile(&self, t: &Tweet, timeline: &TimelineProperties) -> Verdict {
        let tp = self.text_probability(t);
        let x = profile_vector(tp, &self.tweet_properties(t), timeline, &self.features.timeline_attrs);
        let p = self.profile_model.predict_unchecked(&x);
        verdict(t.id, p, ClassifierPath::Profile, tp)
    }

    fn check(&self) -> Result<(), PipelineError> {
        if self.text_model.schema.len() != self.vocabulary.size() {
            return Err(PipelineError::Bundle(format!(
                "text model expects {} attributes but the vocabulary has {} tokens",
                self.text_model.schema.len(),
                self.vocabulary.size()
            )));
        }
        if self.no_profile_model.schema != no_profile_schema() {
            return Err(PipelineError::Bundle("no-profile model schema does not match the tweet properties".into()));
        }
        if self.profile_model.schema != profile_schema(&self.features) {
            return Err(PipelineError::Bundle("profile model schema does not match its timeline attributes".into()));
        }
        Ok(())
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<(), PipelineError> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        self.vocabulary.save(dir.join(VOCABULARY_FILE))?;
        self.text_model.save(dir.join(TEXT_MODEL_FILE))?;
        self.no_profile_model.save(dir.join(NO_PROFILE_MODEL_FILE))?;
        self.profile_model.save(dir.join(PROFILE_MODEL_FILE))?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let dir = dir.as_ref();
        for f in BUNDLE_FILES {
            if !dir.join(f).is_file() {
                return Err(PipelineError::Bundle(format!("missing {}", dir.join(f).display())));
            }
        }
        let vocabulary = Vocabulary::load(dir.join(VOCABULARY_FILE))?;
        let text_model = TrainedModel::load(dir.join(TEXT_MODEL_FILE))?;
        let no_profile_model = TrainedModel::load(dir.join(NO_PROFILE_MODEL_FILE))?;
        let profile_model = TrainedModel::load(dir.join(PROFILE_MODEL_FILE))?;
        let meta = |m: &TrainedModel, k: &str| {
            m.metadata.get(k).cloned().ok_or_else(|| PipelineError::Bundle(format!("model metadata lacks {k:?}")))
        };
        let taxonomy = SourceTaxonomy::parse(&meta(&no_profile_model, META_TAXONOMY)?)
            .map_err(|e| PipelineError::Bundle(e.to_string()))?;
        let attrs = meta(&profile_model, META_TIMELINE_ATTRS)?;
        let timeline_attrs = attrs
            .split(',')
            .filter(|s| !s.is_empty())
            .map(TimelineAttr::parse)
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| PipelineError::Bundle(e.to_string()))?;
        let chi_squared_input: ChiSquaredInput = serde_json::from_str(&meta(&profile_model, META_CHI_INPUT)?)
            .map_err(|e| PipelineError::Bundle(format!("chi_squared_input: {e}")))?;
        let bundle = ClassifierBundle {
            vocabulary,
            text_model,
            no_profile_model,
            profile_model,
            taxonomy,
            features: FeatureConfig { timeline_attrs, chi_squared_input },
        };
        bundle.check()?;
        Ok(bundle)
    }
}

fn verdict(id: TweetId, probability: f64, path: ClassifierPath, text_probability: f64) -> Verdict {
    Verdict { id, label: label_for(probability, DEFAULT_THRESHOLD), probability, path, text_probability }
}

/// Classifies one tweet and schedules fetches. Never blocks on fetching.
pub fn classify_tweet(
    bundle: &ClassifierBundle,
    store: &ProfileStore,
    queue: &FetchQueue,
    t: &Tweet,
    fetch_threshold: u32,
) -> Verdict {
    match store.get(t.user_id) {
        None => {
            let s = store.note_unprofiled_tweet(t.user_id, fetch_threshold);
            if s.should_fetch {
                if queue.enqueue(t.user_id, s.seen).is_err() {
                    store.abort_fetch(t.user_id);
                }
            } else if s.seen > fetch_threshold {
                queue.raise(t.user_id, s.seen);
            }
            bundle.classify_without_profile(t)
        }
        Some(profile) => {
            // an absent profile here means it was replaced concurrently; the counter restarts anyway
            let old = store.note_classified(t.user_id, t.created_at).unwrap_or(false);
            if old && store.begin_refresh(t.user_id) && queue.enqueue(t.user_id, 0).is_err() {
                store.abort_fetch(t.user_id);
            }
            bundle.classify_with_profile(t, &profile.props)
        }
    }
}

#[derive(Debug, Default)]
pub struct PathCounts {
    pub no_profile: AtomicU64,
    pub profile: AtomicU64,
}

impl PathCounts {
    pub fn get(&self) -> (u64, u64) {
        (self.no_profile.load(Ordering::Relaxed), self.profile.load(Ordering::Relaxed))
    }
}

/// Shared bundle, store and queue with path counters.
pub struct Pipeline {
    pub bundle: Arc<ClassifierBundle>,
    pub store: Arc<ProfileStore>,
    pub queue: Arc<FetchQueue>,
    pub fetch_threshold: u32,
    pub counts: PathCounts,
}

impl Pipeline {
    pub fn new(bundle: Arc<ClassifierBundle>, store: Arc<ProfileStore>, queue: Arc<FetchQueue>, n: u32) -> Self {
        Pipeline { bundle, store, queue, fetch_threshold: n.max(1), counts: PathCounts::default() }
    }

    pub fn classify(&self, t: &Tweet) -> Verdict {
        let v = classify_tweet(&self.bundle, &self.store, &self.queue, t, self.fetch_threshold);
        match v.path {
            ClassifierPath::NoProfile => self.counts.no_profile.fetch_add(1, Ordering::Relaxed),
            ClassifierPath::Profile => self.counts.profile.fetch_add(1, Ordering::Relaxed),
        };
        v
    }
}

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub learner: LearnerKind,
    pub nb: NbConfig,
    pub forest: ForestConfig,
    pub vocab_max_size: usize,
    pub vocab_min_freq: usize,
    pub features: FeatureConfig,
    pub taxonomy: SourceTaxonomy,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learner: LearnerKind::Rf,
            nb: NbConfig::default(),
            forest: ForestConfig::default(),
            vocab_max_size: DEFAULT_MAX_SIZE,
            vocab_min_freq: DEFAULT_MIN_FREQ,
            features: FeatureConfig::default(),
            taxonomy: SourceTaxonomy::builtin(),
            seed: crate::DEFAULT_SEED,
        }
    }
}

/// User-disjoint halves: users are shuffled with `seed` and moved into half A
/// until it holds at least half of the tweets. Returns tweet indices.
pub fn split_halves(labeled: &[LabeledTweet], seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut users: Vec<UserId> = labeled.iter().map(|l| l.tweet.user_id).collect::<HashSet<_>>().into_iter().collect();
    users.sort_unstable();
    users.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut per_user: HashMap<UserId, usize> = HashMap::new();
    for l in labeled {
        *per_user.entry(l.tweet.user_id).or_default() += 1;
    }
    let mut in_a = HashSet::new();
    let mut count = 0;
    for u in users {
        if 2 * count >= labeled.len() {
            break;
        }
        count += per_user[&u];
        in_a.insert(u);
    }
    (0..labeled.len()).partition(|&i| in_a.contains(&labeled[i].tweet.user_id))
}

/// Timeline properties per user from the fixtures; users without a timeline
/// get the properties of a one-tweet timeline made of their tweet.
pub fn timeline_features(
    users: impl IntoIterator<Item = (UserId, Tweet)>,
    timelines: &dyn TimelineSource,
    taxonomy: &SourceTaxonomy,
    chi: ChiSquaredInput,
) -> Result<HashMap<UserId, TimelineProperties>, PipelineError> {
    let policy = FetchPolicy::recent_timeline();
    let mut out = HashMap::new();
    for (u, fallback) in users {
        if out.contains_key(&u) {
            continue;
        }
        let rats = match fetch_timeline(timelines, u, &policy) {
            Ok(r) if !r.is_empty() => r,
            Ok(_) | Err(SourceError::NotFound(_)) => vec![fallback],
            Err(e) => return Err(e.into()),
        };
        let n = rats.len().min(RAT_LIMIT);
        out.insert(u, timeline_properties(&rats[..n], taxonomy, chi).map_err(ProfileError::from)?);
    }
    Ok(out)
}

fn require_both(labels: impl Iterator<Item = Label>, what: &str) -> Result<(), PipelineError> {
    let mut c = [0usize; 2];
    for l in labels {
        c[l.index()] += 1;
    }
    if c[0] == 0 || c[1] == 0 {
        return Err(PipelineError::Training(format!("{what} lacks a class (AGT={}, HGT={})", c[0], c[1])));
    }
    Ok(())
}

/// Trains the text model on half A and both decision models on half B.
pub fn train_bundle(
    labeled: &[LabeledTweet],
    timelines: &dyn TimelineSource,
    cfg: &TrainConfig,
) -> Result<ClassifierBundle, PipelineError> {
    require_both(labeled.iter().map(|l| l.label), "labeled set")?;
    let (a, b) = split_halves(labeled, cfg.seed);
    require_both(a.iter().map(|&i| labeled[i].label), "text-classifier half")?;
    require_both(b.iter().map(|&i| labeled[i].label), "decision-maker half")?;

    let sets: Vec<_> = a.iter().map(|&i| normalize(&labeled[i].tweet.text, &labeled[i].tweet.entities)).collect();
    let vocabulary = Vocabulary::build(&sets, cfg.vocab_max_size, cfg.vocab_min_freq)?;
    let schema = FeatureSchema::new(vocabulary.tokens().iter().map(|t| Attribute::binary(format!("w:{t}"))).collect())?;
    let mut text_data = Dataset::new(schema);
    for (ws, &i) in sets.iter().zip(&a) {
        text_data.push(vocabulary.encode(ws), labeled[i].label)?;
    }
    let mut text_model = fit(cfg.learner, &text_data, &cfg.nb, &cfg.forest)?;
    text_model.metadata.insert(META_ROLE.into(), "text".into());

    let chi = cfg.features.chi_squared_input;
    let users = b.iter().map(|&i| (labeled[i].tweet.user_id, labeled[i].tweet.clone()));
    let timeline = timeline_features(users, timelines, &cfg.taxonomy, chi)?;

    let mut np_data = Dataset::new(no_profile_schema());
    let mut p_data = Dataset::new(profile_schema(&cfg.features));
    for &i in &b {
        let t = &labeled[i].tweet;
        let x = vocabulary.encode(&normalize(&t.text, &t.entities));
        let tp = text_model.predict_unchecked(&x);
        let props = crate::features::tweet_properties(t, &cfg.taxonomy);
        np_data.push(no_profile_vector(tp, &props), labeled[i].label)?;
        let tl = &timeline[&t.user_id];
        p_data.push(profile_vector(tp, &props, tl, &cfg.features.timeline_attrs), labeled[i].label)?;
    }
    let mut no_profile_model = fit(cfg.learner, &np_data, &cfg.nb, &cfg.forest)?;
    let mut profile_model = fit(cfg.learner, &p_data, &cfg.nb, &cfg.forest)?;
    let tsv = cfg.taxonomy.to_tsv();
    no_profile_model.metadata.insert(META_ROLE.into(), "no_profile".into());
    no_profile_model.metadata.insert(META_TAXONOMY.into(), tsv.clone());
    profile_model.metadata.insert(META_ROLE.into(), "profile".into());
    profile_model.metadata.insert(META_TAXONOMY.into(), tsv);
    let names: Vec<&str> = cfg.features.timeline_attrs.iter().map(|a| a.name()).collect();
    profile_model.metadata.insert(META_TIMELINE_ATTRS.into(), names.join(","));
    profile_model.metadata.insert(META_CHI_INPUT.into(), serde_json::to_string(&chi).expect("enum serializes"));

    let bundle = ClassifierBundle {
        vocabulary,
        text_model,
        no_profile_model,
        profile_model,
        taxonomy: cfg.taxonomy.clone(),
        features: cfg.features.clone(),
    };
    bundle.check()?;
    Ok(bundle)
}

/// Cross-validation adapter: trains a full bundle per fold and scores both paths.
pub struct BundleTrainer {
    pub timelines: Arc<dyn TimelineSource>,
    pub config: TrainConfig,
}

pub const HEAD_NO_PROFILE: usize = 0;
pub const HEAD_PROFILE: usize = 1;

pub struct BundleModel {
    pub bundle: ClassifierBundle,
    timelines: Arc<dyn TimelineSource>,
    cache: parking_lot::Mutex<HashMap<UserId, TimelineProperties>>,
}

impl BundleModel {
    pub fn new(bundle: ClassifierBundle, timelines: Arc<dyn TimelineSource>) -> Self {
        BundleModel { bundle, timelines, cache: Default::default() }
    }

    fn timeline_of(&self, t: &Tweet) -> TimelineProperties {
        if let Some(p) = self.cache.lock().get(&t.user_id) {
            return p.clone();
        }
        let chi = self.bundle.features.chi_squared_input;
        let users = std::iter::once((t.user_id, t.clone()));
        let props = timeline_features(users, self.timelines.as_ref(), &self.bundle.taxonomy, chi)
            .ok()
            .and_then(|mut m| m.remove(&t.user_id))
            .unwrap_or_else(|| {
                timeline_properties(std::slice::from_ref(t), &self.bundle.taxonomy, chi)
                    .expect("a one-tweet timeline has properties")
            });
        self.cache.lock().insert(t.user_id, props.clone());
        props
    }
}

impl crate::eval::Classifier for BundleModel {
    fn heads(&self) -> usize {
        2
    }

    fn predict(&self, t: &Tweet, head: usize) -> Label {
        if head == HEAD_PROFILE {
            self.bundle.classify_with_profile(t, &self.timeline_of(t)).label
        } else {
            self.bundle.classify_without_profile(t).label
        }
    }
}

impl crate::eval::Trainer for BundleTrainer {
    type Model = BundleModel;

    fn head_names(&self) -> Vec<String> {
        vec!["no_profile".into(), "profile".into()]
    }

    fn train(&self, train: &[LabeledTweet]) -> Result<BundleModel, String> {
        let bundle = train_bundle(train, self.timelines.as_ref(), &self.config).map_err(|e| e.to_string())?;
        Ok(BundleModel::new(bundle, self.timelines.clone()))
    }
}

/// Fetches and installs profiles for `users` synchronously, ignoring the rate
/// budget. Returns how many profiles were installed.
pub fn prefetch_profiles(
    store: &ProfileStore,
    source: &dyn TimelineSource,
    builder: &crate::fetcher::ProfileBuilder,
    policy: &FetchPolicy,
    users: impl IntoIterator<Item = UserId>,
    now: chrono::DateTime<chrono::Utc>,
) -> Result<usize, PipelineError> {
    let mut installed = 0;
    for u in users {
        if store.contains(u) {
            continue;
        }
        let rats = match fetch_timeline(source, u, policy) {
            Ok(r) if !r.is_empty() => r,
            Ok(_) | Err(SourceError::NotFound(_)) => continue,
            Err(e) => return Err(e.into()),
        };
        store.install(builder.build(u, &rats, now)?);
        installed += 1;
    }
    Ok(installed)
}

/// Profile-model rows for `labeled` over the given timeline attributes, using
/// the bundle's text model. Used for attribute selection.
pub fn profile_dataset(
    bundle: &ClassifierBundle,
    labeled: &[LabeledTweet],
    timelines: &dyn TimelineSource,
    attrs: &[TimelineAttr],
) -> Result<Dataset, PipelineError> {
    let features = FeatureConfig { timeline_attrs: attrs.to_vec(), chi_squared_input: bundle.features.chi_squared_input };
    let users = labeled.iter().map(|l| (l.tweet.user_id, l.tweet.clone()));
    let timeline = timeline_features(users, timelines, &bundle.taxonomy, features.chi_squared_input)?;
    let mut data = Dataset::new(profile_schema(&features));
    for l in labeled {
        let t = &l.tweet;
        let row = profile_vector(bundle.text_probability(t), &bundle.tweet_properties(t), &timeline[&t.user_id], attrs);
        data.push(row, l.label)?;
    }
    Ok(data)
}
