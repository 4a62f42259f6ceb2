//! On-the-fly detection of autogenerated tweets (AGTs).
//!
//! Every incoming tweet is routed to one of two classifiers. Users without a
//! cached timeline profile are handled by the metadata-only *no-profile*
//! classifier; users with a profile go to the *profile* classifier, which adds
//! timeline statistics (source mix, periodicity entropy and chi-squared
//! p-values). A rate-limited background fetcher downloads timelines on demand
//! so the classification path never waits on the network.
//!
//! Module map:
//!
//! - [`tweetio`]: tweet data model and line-delimited JSON ingestion
//! - [`textprep`]: placeholder substitution, stemming, vocabulary, encoding
//! - [`learners`]: Naive Bayes and Random Forest over mixed feature vectors
//! - [`features`]: tweet and timeline properties, entropy and chi-squared
//! - [`profiles`]: per-user profiles and the concurrent profile store
//! - [`fetcher`]: fetch queue, burst/pause rate budget, timeline sources
//! - [`pipeline`]: classifier bundle training and per-tweet routing
//! - [`eval`]: metrics, subject-wise cross-validation, CFS attribute selection
//! - [`sim`]: synthetic corpus generator and download-requirement replay

pub mod eval;
pub mod features;
pub mod fetcher;
pub mod learners;
pub mod pipeline;
pub mod profiles;
pub mod sim;
pub mod textprep;
pub mod tweetio;

pub use tweetio::{Label, LabeledTweet, Tweet, UserId};

/// Seed used whenever a caller does not supply one.
pub const DEFAULT_SEED: u64 = 20_170_101;
