//! Correlation-based feature subset selection.
//!
//! Correlation is symmetric uncertainty `2 I(X;Y) / (H(X) + H(Y))` on
//! discretized values: numeric attributes go into equal-frequency bins,
//! binary and nominal attributes use their levels. A subset `S` of size `k`
//! scores `k * mean(r_cf) / sqrt(k + k(k-1) * mean(r_ff))`.

use std::collections::{HashMap, HashSet};

use super::EvalError;
use crate::learners::{AttributeKind, Dataset};

#[derive(Clone, Debug, PartialEq)]
pub struct CfsConfig {
    /// Equal-frequency bins for numeric attributes.
    pub bins: usize,
    /// Consecutive non-improving expansions before the search stops.
    pub max_stale: usize,
}

impl Default for CfsConfig {
    fn default() -> Self {
        CfsConfig { bins: 10, max_stale: 5 }
    }
}

/// Discrete codes for one attribute column.
pub fn discretize(data: &Dataset, attr: usize, bins: usize) -> Vec<u32> {
    let col: Vec<f64> = data.rows.iter().map(|r| r.0[attr]).collect();
    match data.schema.attributes[attr].kind {
        AttributeKind::Numeric => {
            let n = col.len();
            let mut sorted = col.clone();
            sorted.sort_by(f64::total_cmp);
            // bin of v = floor(bins * #{x < v} / n); ties share a bin
            col.iter()
                .map(|v| {
                    let below = sorted.partition_point(|x| x.total_cmp(v).is_lt());
                    ((below * bins) / n.max(1)) as u32
                })
                .collect()
        }
        _ => col.iter().map(|&v| v as u32).collect(),
    }
}

fn entropy_of<K: std::hash::Hash + Eq>(items: impl Iterator<Item = K>) -> f64 {
    let mut counts: HashMap<K, usize> = HashMap::new();
    let mut n = 0usize;
    for k in items {
        *counts.entry(k).or_default() += 1;
        n += 1;
    }
    counts
        .values()
        .map(|&c| {
            let p = c as f64 / n as f64;
            -p * p.log2()
        })
        .sum()
}

/// Symmetric uncertainty in [0, 1]; 0 when both variables are constant.
pub fn symmetric_uncertainty(x: &[u32], y: &[u32]) -> f64 {
    let hx = entropy_of(x.iter());
    let hy = entropy_of(y.iter());
    if hx + hy <= 0.0 {
        return 0.0;
    }
    let hxy = entropy_of(x.iter().zip(y));
    (2.0 * (hx + hy - hxy) / (hx + hy)).clamp(0.0, 1.0)
}

/// Attribute-class and attribute-attribute correlations.
#[derive(Clone, Debug, PartialEq)]
pub struct Correlations {
    pub class: Vec<f64>,
    pub pairwise: Vec<Vec<f64>>,
}

impl Correlations {
    pub fn compute(data: &Dataset, bins: usize) -> Self {
        let d = data.schema.len();
        let codes: Vec<Vec<u32>> = (0..d).map(|j| discretize(data, j, bins)).collect();
        let labels: Vec<u32> = data.labels.iter().map(|l| l.index() as u32).collect();
        let class = codes.iter().map(|c| symmetric_uncertainty(c, &labels)).collect();
        let mut pairwise = vec![vec![1.0; d]; d];
        for i in 0..d {
            for j in i + 1..d {
                let r = symmetric_uncertainty(&codes[i], &codes[j]);
                pairwise[i][j] = r;
                pairwise[j][i] = r;
            }
        }
        Correlations { class, pairwise }
    }
}

pub fn merit(subset: &[usize], c: &Correlations) -> f64 {
    let k = subset.len() as f64;
    if subset.is_empty() {
        return 0.0;
    }
    let rcf: f64 = subset.iter().map(|&i| c.class[i]).sum();
    let mut rff = 0.0;
    for (a, &i) in subset.iter().enumerate() {
        for &j in &subset[a + 1..] {
            rff += c.pairwise[i][j];
        }
    }
    // k * mean(r_cf) = sum r_cf; k(k-1) * mean(r_ff) = 2 * sum over pairs
    let denom = (k + 2.0 * rff).sqrt();
    if denom > 0.0 {
        rcf / denom
    } else {
        0.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CfsResult {
    /// Selected attribute positions, ascending.
    pub selected: Vec<usize>,
    pub names: Vec<String>,
    pub merit: f64,
    pub expansions: usize,
}

const IMPROVEMENT: f64 = 1e-12;

/// Best-first forward search from the empty set.
pub fn cfs_select(data: &Dataset, cfg: &CfsConfig) -> Result<CfsResult, EvalError> {
    let d = data.schema.len();
    if d < 2 {
        return Err(EvalError::Config(format!("attribute selection needs at least 2 attributes, got {d}")));
    }
    if data.is_empty() {
        return Err(EvalError::Config("attribute selection needs data".into()));
    }
    let corr = Correlations::compute(data, cfg.bins.max(1));
    let mut open: Vec<(f64, Vec<usize>)> = vec![(0.0, Vec::new())];
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    seen.insert(Vec::new());
    let (mut best_merit, mut best) = (0.0, Vec::new());
    let mut stale = 0;
    let mut expansions = 0;
    while !open.is_empty() {
        // highest merit first; ties go to smaller, then lexicographically smaller subsets
        let pick = (0..open.len())
            .max_by(|&a, &b| {
                let (ma, sa) = &open[a];
                let (mb, sb) = &open[b];
                ma.total_cmp(mb).then_with(|| sb.len().cmp(&sa.len())).then_with(|| sb.cmp(sa))
            })
            .unwrap();
        let (_, node) = open.swap_remove(pick);
        expansions += 1;
        let mut improved = false;
        for a in 0..d {
            if node.contains(&a) {
                continue;
            }
            let mut child = node.clone();
            child.push(a);
            child.sort_unstable();
            if !seen.insert(child.clone()) {
                continue;
            }
            let m = merit(&child, &corr);
            if m > best_merit + IMPROVEMENT {
                best_merit = m;
                best = child.clone();
                improved = true;
            }
            open.push((m, child));
        }
        if improved {
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.max_stale {
                break;
            }
        }
    }
    let names = best.iter().map(|&i| data.schema.attributes[i].name.clone()).collect();
    Ok(CfsResult { selected: best, names, merit: best_merit, expansions })
}
