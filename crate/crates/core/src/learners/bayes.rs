use serde::{Deserialize, Serialize};

use super::{AttributeKind, Dataset, LearnError, Learner, TrainedModel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NbConfig {
    /// Laplace pseudo-count for binary and nominal likelihoods.
    pub alpha: f64,
    /// Lower bound on Gaussian variances.
    pub var_floor: f64,
}

impl Default for NbConfig {
    fn default() -> Self {
        NbConfig {
            alpha: 1.0,
            var_floor: 1e-9,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Likelihood {
    /// Per-class mean and (MLE) variance.
    Gaussian { mean: [f64; 2], var: [f64; 2] },
    /// Per-class log-probability of each level.
    Categorical { log_p: [Vec<f64>; 2] },
}

/// Class priors (log) and per-attribute class-conditional likelihoods.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NaiveBayes {
    pub log_prior: [f64; 2],
    pub likelihoods: Vec<Likelihood>,
}

const LN_2PI: f64 = 1.837_877_066_409_345_5;

impl NaiveBayes {
    /// Unnormalized log joint for each class.
    pub fn log_joint(&self, x: &[f64]) -> [f64; 2] {
        let mut lj = self.log_prior;
        for (lik, &v) in self.likelihoods.iter().zip(x) {
            match lik {
                Likelihood::Gaussian { mean, var } => {
                    for c in 0..2 {
                        let d = v - mean[c];
                        lj[c] += -0.5 * (LN_2PI + var[c].ln()) - d * d / (2.0 * var[c]);
                    }
                }
                Likelihood::Categorical { log_p } => {
                    let level = v as usize;
                    for c in 0..2 {
                        lj[c] += log_p[c][level];
                    }
                }
            }
        }
        lj
    }

    pub fn proba_agt(&self, x: &[f64]) -> f64 {
        let [a, h] = self.log_joint(x);
        // logistic of the log-odds; stable in both tails
        let d = h - a;
        if d >= 0.0 {
            let e = (-d).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + d.exp())
        }
    }
}

/// Fits Naive Bayes. Both classes must be present.
pub fn fit_nb(data: &Dataset, cfg: &NbConfig) -> Result<TrainedModel, LearnError> {
    let counts = data.class_counts();
    if counts[0] == 0 || counts[1] == 0 {
        return Err(LearnError::Training(format!(
            "Naive Bayes needs both classes (AGT={}, HGT={})",
            counts[0], counts[1]
        )));
    }
    if !(cfg.alpha > 0.0) {
        return Err(LearnError::Training("alpha must be positive".into()));
    }
    let n = data.len() as f64;
    let log_prior = [(counts[0] as f64 / n).ln(), (counts[1] as f64 / n).ln()];
    let mut likelihoods = Vec::with_capacity(data.schema.len());
    for (j, attr) in data.schema.attributes.iter().enumerate() {
        let lik = match &attr.kind {
            AttributeKind::Numeric => {
                let mut sum = [0.0; 2];
                for (row, l) in data.rows.iter().zip(&data.labels) {
                    sum[l.index()] += row.0[j];
                }
                let mean = [sum[0] / counts[0] as f64, sum[1] / counts[1] as f64];
                let mut ss = [0.0; 2];
                for (row, l) in data.rows.iter().zip(&data.labels) {
                    let d = row.0[j] - mean[l.index()];
                    ss[l.index()] += d * d;
                }
                let var = [
                    (ss[0] / counts[0] as f64).max(cfg.var_floor),
                    (ss[1] / counts[1] as f64).max(cfg.var_floor),
                ];
                Likelihood::Gaussian { mean, var }
            }
            AttributeKind::Binary | AttributeKind::Nominal { .. } => {
                let card = attr.cardinality().expect("discrete attribute");
                let mut lc = [vec![0usize; card], vec![0usize; card]];
                for (row, l) in data.rows.iter().zip(&data.labels) {
                    lc[l.index()][row.0[j] as usize] += 1;
                }
                let lp = |c: usize| -> Vec<f64> {
                    let denom = counts[c] as f64 + cfg.alpha * card as f64;
                    lc[c]
                        .iter()
                        .map(|&k| ((k as f64 + cfg.alpha) / denom).ln())
                        .collect()
                };
                Likelihood::Categorical {
                    log_p: [lp(0), lp(1)],
                }
            }
        };
        likelihoods.push(lik);
    }
    Ok(TrainedModel::wrap(
        data.schema.clone(),
        None,
        Learner::Nb(NaiveBayes {
            log_prior,
            likelihoods,
        }),
    ))
}
