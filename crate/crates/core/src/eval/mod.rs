//! Metrics, subject-wise cross-validation and attribute selection.
//!
//! AGT is the positive class throughout.

mod cfs;

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::io::{self, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cfs::{cfs_select, discretize, merit, symmetric_uncertainty, CfsConfig, CfsResult, Correlations};

use crate::tweetio::{Label, LabeledTweet, Tweet, UserId};

pub const DEFAULT_FOLDS: usize = 10;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("undefined metric: {0}")]
    Undefined(&'static str),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("training failed on fold {fold}: {message}")]
    Training { fold: usize, message: String },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub fp: u64,
    pub tn: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fn_: u64, fp: u64, tn: u64) -> Self {
        ConfusionMatrix { tp, fn_, fp, tn }
    }

    pub fn record(&mut self, truth: Label, predicted: Label) {
        match (truth, predicted) {
            (Label::Agt, Label::Agt) => self.tp += 1,
            (Label::Agt, Label::Hgt) => self.fn_ += 1,
            (Label::Hgt, Label::Agt) => self.fp += 1,
            (Label::Hgt, Label::Hgt) => self.tn += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fn_ + self.fp + self.tn
    }

    pub fn add(&mut self, o: &ConfusionMatrix) {
        self.tp += o.tp;
        self.fn_ += o.fn_;
        self.fp += o.fp;
        self.tn += o.tn;
    }

    pub fn precision(&self) -> Option<f64> {
        (self.tp + self.fp > 0).then(|| self.tp as f64 / (self.tp + self.fp) as f64)
    }

    pub fn recall(&self) -> Option<f64> {
        (self.tp + self.fn_ > 0).then(|| self.tp as f64 / (self.tp + self.fn_) as f64)
    }

    pub fn accuracy(&self) -> Option<f64> {
        (self.total() > 0).then(|| (self.tp + self.tn) as f64 / self.total() as f64)
    }
}

/// Precision, recall and their harmonic mean. Zero denominators are errors, not 0.
pub fn metrics(m: &ConfusionMatrix) -> Result<Metrics, EvalError> {
    let precision = m.precision().ok_or(EvalError::Undefined("precision: no positive predictions"))?;
    let recall = m.recall().ok_or(EvalError::Undefined("recall: no positive instances"))?;
    if precision + recall == 0.0 {
        return Err(EvalError::Undefined("f-measure: precision and recall are both 0"));
    }
    Ok(Metrics { precision, recall, f_measure: 2.0 * precision * recall / (precision + recall) })
}

/// User folds and the fold of each user.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldPlan {
    pub folds: Vec<BTreeSet<UserId>>,
    user_fold: HashMap<UserId, usize>,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.folds.len()
    }

    pub fn fold_of(&self, user: UserId) -> Option<usize> {
        self.user_fold.get(&user).copied()
    }

    /// Fold index of each tweet.
    pub fn tweet_folds(&self, tweets: &[LabeledTweet]) -> Vec<Option<usize>> {
        tweets.iter().map(|l| self.fold_of(l.tweet.user_id)).collect()
    }
}

/// Shuffles the distinct users with `seed` and deals them round-robin into `k` folds.
pub fn make_fold_plan(tweets: &[LabeledTweet], k: usize, seed: u64) -> Result<FoldPlan, EvalError> {
    if k < 2 {
        return Err(EvalError::Config(format!("need at least 2 folds, got {k}")));
    }
    let mut users: Vec<UserId> = tweets.iter().map(|l| l.tweet.user_id).collect::<BTreeSet<_>>().into_iter().collect();
    if users.len() < k {
        return Err(EvalError::Config(format!("{} distinct users is fewer than {k} folds", users.len())));
    }
    users.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![BTreeSet::new(); k];
    let mut user_fold = HashMap::with_capacity(users.len());
    for (i, u) in users.into_iter().enumerate() {
        folds[i % k].insert(u);
        user_fold.insert(u, i % k);
    }
    Ok(FoldPlan { folds, user_fold })
}

/// A fitted model usable by [`cross_validate`]. A model may expose several
/// prediction heads (e.g. the no-profile and profile paths of one bundle).
pub trait Classifier {
    fn heads(&self) -> usize {
        1
    }
    fn predict(&self, t: &Tweet, head: usize) -> Label;
}

pub trait Trainer: Sync {
    type Model: Classifier;
    fn head_names(&self) -> Vec<String> {
        vec!["model".into()]
    }
    fn train(&self, train: &[LabeledTweet]) -> Result<Self::Model, String>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct FoldResult {
    pub fold: usize,
    pub train_size: usize,
    /// One matrix per head.
    pub matrices: Vec<ConfusionMatrix>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SkippedFold {
    pub fold: usize,
    pub test_size: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvReport {
    pub heads: Vec<String>,
    pub folds: Vec<FoldResult>,
    pub skipped: Vec<SkippedFold>,
}

impl CvReport {
    pub fn pooled(&self, head: usize) -> ConfusionMatrix {
        let mut m = ConfusionMatrix::default();
        for f in &self.folds {
            m.add(&f.matrices[head]);
        }
        m
    }

    pub fn metrics(&self, head: usize) -> Result<Metrics, EvalError> {
        metrics(&self.pooled(head))
    }

    /// Per-fold rows, pooled rows and skipped folds.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "fold,head,instances,tp,fn,fp,tn,precision,recall,f_measure,note")?;
        let opt = |x: Option<f64>| x.map(|v| format!("{v:.6}")).unwrap_or_default();
        let row = |w: &mut W, fold: &str, head: &str, m: &ConfusionMatrix| {
            let f = metrics(m).ok().map(|x| x.f_measure);
            writeln!(
                w,
                "{fold},{head},{},{},{},{},{},{},{},{},",
                m.total(),
                m.tp,
                m.fn_,
                m.fp,
                m.tn,
                opt(m.precision()),
                opt(m.recall()),
                opt(f)
            )
        };
        for f in &self.folds {
            for (h, m) in f.matrices.iter().enumerate() {
                row(&mut w, &f.fold.to_string(), &self.heads[h], m)?;
            }
        }
        for h in 0..self.heads.len() {
            row(&mut w, "pooled", &self.heads[h], &self.pooled(h))?;
        }
        for s in &self.skipped {
            writeln!(w, "{},,{},,,,,,,,skipped: {}", s.fold, s.test_size, s.reason.replace(',', ";"))?;
        }
        Ok(())
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} folds evaluated, {} skipped", self.folds.len(), self.skipped.len());
        for sk in &self.skipped {
            let _ = writeln!(s, "  fold {} skipped ({} test tweets): {}", sk.fold, sk.test_size, sk.reason);
        }
        for (h, name) in self.heads.iter().enumerate() {
            let m = self.pooled(h);
            let _ = writeln!(s, "\n[{name}] pooled over {} tweets", m.total());
            let _ = writeln!(s, "              predicted AGT  predicted HGT");
            let _ = writeln!(s, "  actual AGT  {:>13}  {:>13}", m.tp, m.fn_);
            let _ = writeln!(s, "  actual HGT  {:>13}  {:>13}", m.fp, m.tn);
            match metrics(&m) {
                Ok(x) => {
                    let _ = writeln!(
                        s,
                        "  precision {:.3}  recall {:.3}  F {:.3}",
                        x.precision, x.recall, x.f_measure
                    );
                }
                Err(e) => {
                    let _ = writeln!(s, "  {e}");
                }
            }
        }
        s
    }
}

/// Trains on all folds but one and tests on the held-out fold, for every fold.
/// A fold whose training part lacks a class is skipped and reported.
pub fn cross_validate<T: Trainer>(
    tweets: &[LabeledTweet],
    plan: &FoldPlan,
    trainer: &T,
) -> Result<CvReport, EvalError> {
    let assignment = plan.tweet_folds(tweets);
    if assignment.iter().any(Option::is_none) {
        return Err(EvalError::Config("fold plan does not cover every user".into()));
    }
    let heads = trainer.head_names();
    let outcomes: Vec<Result<Result<FoldResult, SkippedFold>, EvalError>> = (0..plan.k())
        .into_par_iter()
        .map(|fold| {
            let (mut train, mut test) = (Vec::new(), Vec::new());
            for (l, f) in tweets.iter().zip(&assignment) {
                if *f == Some(fold) {
                    test.push(l.clone());
                } else {
                    train.push(l.clone());
                }
            }
            let has = |c: Label| train.iter().any(|l| l.label == c);
            if !has(Label::Agt) || !has(Label::Hgt) {
                return Ok(Err(SkippedFold {
                    fold,
                    test_size: test.len(),
                    reason: "training folds lack a class".into(),
                }));
            }
            let model = trainer.train(&train).map_err(|message| EvalError::Training { fold, message })?;
            let n_heads = model.heads().min(heads.len()).max(1);
            let mut matrices = vec![ConfusionMatrix::default(); n_heads];
            for l in &test {
                for (h, m) in matrices.iter_mut().enumerate() {
                    m.record(l.label, model.predict(&l.tweet, h));
                }
            }
            Ok(Ok(FoldResult { fold, train_size: train.len(), matrices }))
        })
        .collect();
    let mut report = CvReport { heads, folds: Vec::new(), skipped: Vec::new() };
    for o in outcomes {
        match o? {
            Ok(f) => report.folds.push(f),
            Err(s) => report.skipped.push(s),
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tweetio::Entities;
    use chrono::{DateTime, TimeZone, Utc};

    #[test]
    fn reference_matrix() {
        let m = metrics(&ConfusionMatrix::new(1089, 42, 9, 3859)).unwrap();
        assert!((m.precision - 0.992).abs() < 5e-4);
        assert!((m.recall - 0.963).abs() < 5e-4);
        assert!((m.f_measure - 0.977).abs() < 5e-4);
    }

    #[test]
    fn trivial_matrices() {
        let m = metrics(&ConfusionMatrix::new(10, 0, 0, 5)).unwrap();
        assert_eq!((m.precision, m.recall, m.f_measure), (1.0, 1.0, 1.0));
        let m = metrics(&ConfusionMatrix::new(1, 1, 1, 0)).unwrap();
        assert_eq!((m.precision, m.recall, m.f_measure), (0.5, 0.5, 0.5));
        assert!(matches!(metrics(&ConfusionMatrix::new(0, 3, 0, 4)), Err(EvalError::Undefined(_))));
        assert!(matches!(metrics(&ConfusionMatrix::new(0, 0, 2, 4)), Err(EvalError::Undefined(_))));
        assert!(matches!(metrics(&ConfusionMatrix::new(0, 1, 1, 4)), Err(EvalError::Undefined(_))));
    }

    pub(crate) fn labeled(user: UserId, id: u64, label: Label) -> LabeledTweet {
        LabeledTweet {
            tweet: Tweet {
                id,
                user_id: user,
                created_at: Utc.timestamp_opt(1_000_000, 0).unwrap(),
                text: "t".into(),
                entities: Entities::default(),
                number_count: 0,
                source: String::new(),
                in_reply_to_status_id: None,
                is_retweet: false,
                followers: 0,
                friends: 0,
                statuses_count: 0,
                favourites_count: 0,
                account_created_at: DateTime::UNIX_EPOCH,
            },
            label,
        }
    }

    #[test]
    fn fold_plan_sizes() {
        let tweets: Vec<LabeledTweet> = (0..1750).map(|u| labeled(u, u, Label::Hgt)).collect();
        let plan = make_fold_plan(&tweets, 10, 1).unwrap();
        assert!(plan.folds.iter().all(|f| f.len() == 175));
        assert!(make_fold_plan(&tweets[..5], 10, 1).is_err());
    }

    struct Constant(Label);
    impl Classifier for Constant {
        fn predict(&self, _: &Tweet, _: usize) -> Label {
            self.0
        }
    }
    struct ConstTrainer(Label);
    impl Trainer for ConstTrainer {
        type Model = Constant;
        fn train(&self, _: &[LabeledTweet]) -> Result<Constant, String> {
            Ok(Constant(self.0))
        }
    }

    #[test]
    fn constant_trainer_recall() {
        let tweets: Vec<LabeledTweet> = (0..100)
            .map(|i| labeled(i % 30, i, if i % 3 == 0 { Label::Agt } else { Label::Hgt }))
            .collect();
        let plan = make_fold_plan(&tweets, 10, 4).unwrap();
        for (c, want) in [(Label::Agt, 1.0), (Label::Hgt, 0.0)] {
            let r = cross_validate(&tweets, &plan, &ConstTrainer(c)).unwrap();
            assert_eq!(r.pooled(0).total(), 100);
            assert_eq!(r.pooled(0).recall(), Some(want));
        }
    }

    #[test]
    fn skipped_fold_is_reported() {
        // the only AGT user is alone in its fold; training on the others has no AGT
        let mut tweets: Vec<LabeledTweet> = (1..=3).map(|u| labeled(u, u, Label::Hgt)).collect();
        tweets.push(labeled(99, 99, Label::Agt));
        let plan = make_fold_plan(&tweets, 4, 0).unwrap();
        let r = cross_validate(&tweets, &plan, &ConstTrainer(Label::Hgt)).unwrap();
        assert_eq!(r.skipped.len(), 1);
        assert_eq!(r.pooled(0).total(), 3);
        let mut csv = Vec::new();
        r.write_csv(&mut csv).unwrap();
        assert!(String::from_utf8(csv).unwrap().contains("skipped"));
        assert!(r.summary().contains("1 skipped"));
    }
}
