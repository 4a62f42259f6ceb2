//! CART trees with Gini impurity and bagged, feature-subsampled forests.
//!
//! Before bagging, training rows are put in a canonical order (lexicographic
//! by value, then label). Bootstrap draws index into that order, so a forest
//! depends only on the multiset of training rows and the seed, never on the
//! order rows were supplied in.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{AttributeKind, Dataset, LearnError, Learner, TrainedModel};
use crate::DEFAULT_SEED;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    /// `ceil(sqrt(d))`.
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, d: usize) -> usize {
        let k = match self {
            MaxFeatures::Sqrt => (d as f64).sqrt().ceil() as usize,
            MaxFeatures::All => d,
            MaxFeatures::Count(k) => k,
        };
        k.clamp(1, d.max(1))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_features: MaxFeatures,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_features: MaxFeatures::Sqrt,
            min_leaf: 1,
            max_depth: None,
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTest {
    /// Left iff `x <= threshold`.
    Le(f64),
    /// Left iff `x == level` (one-vs-rest).
    Eq(u32),
}

impl SplitTest {
    #[inline]
    pub fn goes_left(self, x: f64) -> bool {
        match self {
            SplitTest::Le(t) => x <= t,
            SplitTest::Eq(l) => x == l as f64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "n", rename_all = "lowercase")]
pub enum Node {
    Leaf {
        agt: u32,
        hgt: u32,
    },
    Split {
        attr: u32,
        test: SplitTest,
        left: u32,
        right: u32,
    },
}

/// Flat node array; the root is node 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    /// Class counts of the leaf reached by `x`.
    pub fn leaf(&self, x: &[f64]) -> (u32, u32) {
        let mut i = 0usize;
        loop {
            match &self.nodes[i] {
                Node::Leaf { agt, hgt } => return (*agt, *hgt),
                Node::Split {
                    attr,
                    test,
                    left,
                    right,
                } => {
                    i = if test.goes_left(x[*attr as usize]) {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }

    /// Laplace-smoothed AGT frequency at the leaf.
    pub fn proba_agt(&self, x: &[f64]) -> f64 {
        let (a, h) = self.leaf(x);
        (a as f64 + 1.0) / ((a + h) as f64 + 2.0)
    }

    pub fn root_split(&self) -> Option<(usize, SplitTest)> {
        match self.nodes.first()? {
            Node::Split { attr, test, .. } => Some((*attr as usize, *test)),
            Node::Leaf { .. } => None,
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &DecisionTree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => {
                    1 + go(t, *left as usize).max(go(t, *right as usize))
                }
            }
        }
        go(self, 0)
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
    pub config: ForestConfig,
}

impl RandomForest {
    pub fn proba_agt(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.proba_agt(x)).sum::<f64>() / self.trees.len() as f64
    }

    /// Canonical positions drawn for tree `tree` out of `n` rows.
    pub fn bootstrap_indices(seed: u64, tree: usize, n: usize) -> Vec<usize> {
        let mut rng = tree_rng(seed, tree);
        (0..n).map(|_| rng.random_range(0..n)).collect()
    }
}

fn tree_rng(seed: u64, tree: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tree as u64);
    rng
}

/// Row order used for bagging: lexicographic by value, then by label.
pub fn canonical_order(data: &Dataset) -> Vec<usize> {
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (&data.rows[a].0, &data.rows[b].0);
        ra.iter()
            .zip(rb)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
            .then(data.labels[a].cmp(&data.labels[b]))
    });
    order
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    Numeric,
    Binary,
    Nominal(usize),
}

/// Column-major training matrix in canonical row order.
struct Columns {
    cols: Vec<Vec<f64>>,
    classes: Vec<u8>,
    kinds: Vec<Kind>,
}

impl Columns {
    fn new(data: &Dataset, order: &[usize]) -> Self {
        let d = data.schema.len();
        let mut cols = vec![Vec::with_capacity(order.len()); d];
        for &r in order {
            for (j, col) in cols.iter_mut().enumerate() {
                col.push(data.rows[r].0[j]);
            }
        }
        let classes = order
            .iter()
            .map(|&r| data.labels[r].index() as u8)
            .collect();
        let kinds = data
            .schema
            .attributes
            .iter()
            .map(|a| match &a.kind {
                AttributeKind::Numeric => Kind::Numeric,
                AttributeKind::Binary => Kind::Binary,
                AttributeKind::Nominal { levels } => Kind::Nominal(levels.len()),
            })
            .collect();
        Columns {
            cols,
            classes,
            kinds,
        }
    }
}

#[derive(Clone, Copy)]
struct Candidate {
    score: f64,
    attr: usize,
    test: SplitTest,
}

fn purity_score(counts: [usize; 2]) -> f64 {
    let n = counts[0] + counts[1];
    if n == 0 {
        return 0.0;
    }
    ((counts[0] * counts[0] + counts[1] * counts[1]) as f64) / n as f64
}

/// Sum over children of `sum_c n_c^2 / n_child`; larger means lower weighted Gini.
fn split_score(left: [usize; 2], total: [usize; 2]) -> f64 {
    let right = [total[0] - left[0], total[1] - left[1]];
    purity_score(left) + purity_score(right)
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m < b {
        m
    } else {
        a
    }
}

fn eval_attr(
    cols: &Columns,
    attr: usize,
    idx: &[usize],
    total: [usize; 2],
    min_leaf: usize,
) -> Option<(f64, SplitTest)> {
    let col = &cols.cols[attr];
    let n = idx.len();
    match cols.kinds[attr] {
        Kind::Binary => {
            let mut left = [0usize; 2];
            for &i in idx {
                if col[i] <= 0.5 {
                    left[cols.classes[i] as usize] += 1;
                }
            }
            let nl = left[0] + left[1];
            (nl >= min_leaf && n - nl >= min_leaf)
                .then(|| (split_score(left, total), SplitTest::Le(0.5)))
        }
        Kind::Nominal(card) => {
            let mut per = vec![[0usize; 2]; card];
            for &i in idx {
                per[col[i] as usize][cols.classes[i] as usize] += 1;
            }
            let mut best: Option<(f64, SplitTest)> = None;
            for (level, left) in per.iter().enumerate() {
                let nl = left[0] + left[1];
                if nl < min_leaf || n - nl < min_leaf {
                    continue;
                }
                let s = split_score(*left, total);
                if best.is_none_or(|(b, _)| s > b) {
                    best = Some((s, SplitTest::Eq(level as u32)));
                }
            }
            best
        }
        Kind::Numeric => {
            let mut pairs: Vec<(f64, u8)> =
                idx.iter().map(|&i| (col[i], cols.classes[i])).collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left = [0usize; 2];
            let mut best: Option<(f64, SplitTest)> = None;
            for k in 0..n - 1 {
                left[pairs[k].1 as usize] += 1;
                let nl = k + 1;
                if pairs[k].0 < pairs[k + 1].0 && nl >= min_leaf && n - nl >= min_leaf {
                    let s = split_score(left, total);
                    if best.is_none_or(|(b, _)| s > b) {
                        best = Some((s, SplitTest::Le(midpoint(pairs[k].0, pairs[k + 1].0))));
                    }
                }
            }
            best
        }
    }
}

struct Work {
    node: usize,
    start: usize,
    end: usize,
    depth: usize,
}

fn grow(
    cols: &Columns,
    mut samples: Vec<usize>,
    cfg: &ForestConfig,
    max_features: usize,
    rng: &mut ChaCha8Rng,
) -> DecisionTree {
    let d = cols.kinds.len();
    let mut nodes = vec![Node::Leaf { agt: 0, hgt: 0 }];
    let mut stack = vec![Work {
        node: 0,
        start: 0,
        end: samples.len(),
        depth: 0,
    }];
    let mut order: Vec<usize> = (0..d).collect();
    let min_leaf = cfg.min_leaf.max(1);
    while let Some(w) = stack.pop() {
        let idx = &mut samples[w.start..w.end];
        let mut counts = [0usize; 2];
        for &i in idx.iter() {
            counts[cols.classes[i] as usize] += 1;
        }
        let leaf = Node::Leaf {
            agt: counts[0] as u32,
            hgt: counts[1] as u32,
        };
        let depth_capped = cfg.max_depth.is_some_and(|m| w.depth >= m);
        if counts[0] == 0 || counts[1] == 0 || idx.len() < 2 * min_leaf || depth_capped {
            nodes[w.node] = leaf;
            continue;
        }
        order.shuffle(rng);
        let mut best: Option<Candidate> = None;
        for (visited, &attr) in order.iter().enumerate() {
            if visited >= max_features && best.is_some() {
                break;
            }
            if let Some((score, test)) = eval_attr(cols, attr, idx, counts, min_leaf) {
                if best.is_none_or(|b| score > b.score) {
                    best = Some(Candidate { score, attr, test });
                }
            }
        }
        let Some(best) = best else {
            nodes[w.node] = leaf;
            continue;
        };
        let col = &cols.cols[best.attr];
        let mut split = 0;
        for k in 0..idx.len() {
            if best.test.goes_left(col[idx[k]]) {
                idx.swap(k, split);
                split += 1;
            }
        }
        let left = nodes.len();
        nodes.push(Node::Leaf { agt: 0, hgt: 0 });
        nodes.push(Node::Leaf { agt: 0, hgt: 0 });
        nodes[w.node] = Node::Split {
            attr: best.attr as u32,
            test: best.test,
            left: left as u32,
            right: left as u32 + 1,
        };
        let mid = w.start + split;
        stack.push(Work {
            node: left + 1,
            start: mid,
            end: w.end,
            depth: w.depth + 1,
        });
        stack.push(Work {
            node: left,
            start: w.start,
            end: mid,
            depth: w.depth + 1,
        });
    }
    DecisionTree { nodes }
}

fn check_trainable(data: &Dataset) -> Result<(), LearnError> {
    let c = data.class_counts();
    if data.len() < 2 || c[0] == 0 || c[1] == 0 {
        return Err(LearnError::Training(format!(
            "random forest needs at least two rows and both classes (AGT={}, HGT={})",
            c[0], c[1]
        )));
    }
    if data.schema.is_empty() {
        return Err(LearnError::Training("schema has no attributes".into()));
    }
    Ok(())
}

/// Grows one unbagged tree on all rows.
pub fn grow_tree(data: &Dataset, cfg: &ForestConfig) -> Result<DecisionTree, LearnError> {
    check_trainable(data)?;
    let order = canonical_order(data);
    let cols = Columns::new(data, &order);
    let mut rng = tree_rng(cfg.seed, 0);
    let k = cfg.max_features.resolve(data.schema.len());
    Ok(grow(&cols, (0..data.len()).collect(), cfg, k, &mut rng))
}

pub fn fit_rf(data: &Dataset, cfg: &ForestConfig) -> Result<TrainedModel, LearnError> {
    check_trainable(data)?;
    if cfg.n_trees == 0 {
        return Err(LearnError::Training("n_trees must be positive".into()));
    }
    let order = canonical_order(data);
    let cols = Columns::new(data, &order);
    let n = data.len();
    let k = cfg.max_features.resolve(data.schema.len());
    let trees: Vec<DecisionTree> = (0..cfg.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = tree_rng(cfg.seed, t);
            let samples: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            grow(&cols, samples, cfg, k, &mut rng)
        })
        .collect();
    let forest = RandomForest {
        trees,
        config: cfg.clone(),
    };
    Ok(TrainedModel::wrap(
        data.schema.clone(),
        Some(cfg.seed),
        Learner::Rf(forest),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{Attribute, FeatureSchema};
    use crate::tweetio::Label;

    fn forest_of(m: &TrainedModel) -> &RandomForest {
        match &m.model {
            Learner::Rf(rf) => rf,
            _ => unreachable!(),
        }
    }

    fn separable() -> Dataset {
        let mut d = Dataset::new(
            FeatureSchema::new(vec![Attribute::numeric("x"), Attribute::numeric("y")]).unwrap(),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let x: f64 = rng.random_range(-1.0..1.0);
            let y: f64 = rng.random_range(-1.0..1.0);
            let label = if x + 0.5 * y > 0.1 {
                Label::Agt
            } else {
                Label::Hgt
            };
            d.push(vec![x, y], label).unwrap();
        }
        d
    }

    #[test]
    fn separable_training_accuracy_is_one() {
        let d = separable();
        let m = fit_rf(&d, &ForestConfig::default()).unwrap();
        for (r, l) in d.rows.iter().zip(&d.labels) {
            assert_eq!(m.classify(&r.0, 0.5).unwrap(), *l);
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let d = separable();
        let cfg = ForestConfig {
            n_trees: 20,
            ..Default::default()
        };
        let a = fit_rf(&d, &cfg).unwrap();
        let b = fit_rf(&d, &cfg).unwrap();
        assert_eq!(forest_of(&a).trees, forest_of(&b).trees);
        for r in &d.rows {
            assert_eq!(
                a.predict_proba(&r.0).unwrap().to_bits(),
                b.predict_proba(&r.0).unwrap().to_bits()
            );
        }
    }

    #[test]
    fn identical_rows_give_single_leaf() {
        let mut d = Dataset::new(FeatureSchema::new(vec![Attribute::numeric("x")]).unwrap());
        for i in 0..6 {
            d.push(vec![1.0], if i % 2 == 0 { Label::Agt } else { Label::Hgt })
                .unwrap();
        }
        let m = fit_rf(
            &d,
            &ForestConfig {
                n_trees: 4,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(forest_of(&m).trees.iter().all(|t| t.nodes.len() == 1));
    }

    #[test]
    fn pure_leaves_bound() {
        let mut d = Dataset::new(FeatureSchema::new(vec![Attribute::binary("b")]).unwrap());
        for _ in 0..10 {
            d.push(vec![1.0], Label::Agt).unwrap();
            d.push(vec![0.0], Label::Hgt).unwrap();
        }
        let m = fit_rf(
            &d,
            &ForestConfig {
                n_trees: 10,
                ..Default::default()
            },
        )
        .unwrap();
        let p = m.predict_proba(&[1.0]).unwrap();
        // every reached leaf is pure AGT with at least one row
        let min_leaf_rows = forest_of(&m)
            .trees
            .iter()
            .map(|t| t.leaf(&[1.0]).0)
            .min()
            .unwrap() as f64;
        assert!(p >= 1.0 - 1.0 / (min_leaf_rows + 2.0));
        assert!(p < 1.0);
    }

    #[test]
    fn nominal_one_vs_rest() {
        let mut d = Dataset::new(
            FeatureSchema::new(vec![Attribute::nominal("dev", &["a", "b", "c"])]).unwrap(),
        );
        for _ in 0..5 {
            d.push(vec![0.0], Label::Hgt).unwrap();
            d.push(vec![1.0], Label::Agt).unwrap();
            d.push(vec![2.0], Label::Hgt).unwrap();
        }
        let t = grow_tree(&d, &ForestConfig::default()).unwrap();
        assert_eq!(t.root_split(), Some((0, SplitTest::Eq(1))));
        assert_eq!(t.leaf_count(), 2);
    }

    #[test]
    fn xor_is_shattered_by_single_tree() {
        let mut d = Dataset::new(
            FeatureSchema::new(vec![Attribute::binary("a"), Attribute::binary("b")]).unwrap(),
        );
        for (a, b) in [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)] {
            let l = if (a == 1.0) != (b == 1.0) {
                Label::Agt
            } else {
                Label::Hgt
            };
            d.push(vec![a, b], l).unwrap();
        }
        let t = grow_tree(
            &d,
            &ForestConfig {
                max_features: MaxFeatures::All,
                ..Default::default()
            },
        )
        .unwrap();
        for (r, l) in d.rows.iter().zip(&d.labels) {
            let (a, h) = t.leaf(&r.0);
            assert_eq!(if a > h { Label::Agt } else { Label::Hgt }, *l);
        }
    }

    #[test]
    fn depth_limit_respected() {
        let d = separable();
        let t = grow_tree(
            &d,
            &ForestConfig {
                max_depth: Some(2),
                ..Default::default()
            },
        )
        .unwrap();
        assert!(t.depth() <= 2);
    }

    #[test]
    fn max_features_resolution() {
        assert_eq!(MaxFeatures::Sqrt.resolve(10), 4);
        assert_eq!(MaxFeatures::Sqrt.resolve(26), 6);
        assert_eq!(MaxFeatures::Count(50).resolve(3), 3);
        assert_eq!(MaxFeatures::All.resolve(7), 7);
    }
}
