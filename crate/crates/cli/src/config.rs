use std::path::{Path, PathBuf};

use agt_core::features::{ChiSquaredInput, FeatureConfig, SourceTaxonomy, TimelineAttr};
use agt_core::fetcher::FetchPolicy;
use agt_core::learners::{ForestConfig, LearnerKind, NbConfig};
use agt_core::pipeline::TrainConfig;
use agt_core::sim::WorldConfig;
use anyhow::{bail, Context, Result};
use serde::Deserialize;

/// Values read from `--config`. Command-line flags win over these, and these
/// win over the built-in defaults.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub learner: Option<LearnerKind>,
    pub fetch_threshold: Option<u32>,
    /// Source taxonomy TSV replacing the built-in one.
    pub taxonomy: Option<PathBuf>,
    pub vocab_max_size: Option<usize>,
    pub vocab_min_freq: Option<usize>,
    pub folds: Option<usize>,
    pub timeline_attrs: Option<Vec<TimelineAttr>>,
    pub chi_squared_input: Option<ChiSquaredInput>,
    pub forest: Option<ForestConfig>,
    pub nb: Option<NbConfig>,
    /// Background fetcher policy; also used by `simulate` with `fetch = "policy"`.
    pub fetch: Option<FetchPolicy>,
    /// Synthetic world for `generate` and for world-backed timelines.
    pub world: Option<WorldConfig>,
    pub simulate: SimSection,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FetchChoice {
    /// Profiles exist right after the triggering tweet.
    Instantaneous,
    /// Rate-limited, one 200-tweet page per profile.
    Recent,
    /// Rate-limited, sixteen pages per profile.
    Full,
    /// Rate-limited with the `[fetch]` table of the config file.
    Policy,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub thresholds: Option<Vec<u32>>,
    pub horizon_days: Option<u32>,
    pub fetch: Option<FetchChoice>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<RunConfig> {
        let Some(path) = path else { return Ok(RunConfig::default()) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn seed(&self, flag: Option<u64>) -> u64 {
        flag.or(self.seed).unwrap_or(agt_core::DEFAULT_SEED)
    }

    pub fn taxonomy(&self) -> Result<SourceTaxonomy> {
        match &self.taxonomy {
            Some(p) => SourceTaxonomy::load(p).with_context(|| format!("loading taxonomy {}", p.display())),
            None => Ok(SourceTaxonomy::builtin()),
        }
    }

    pub fn fetch_policy(&self) -> Result<FetchPolicy> {
        let p = self.fetch.clone().unwrap_or_default();
        if let Err(e) = p.validate() {
            bail!("invalid [fetch] policy: {e}");
        }
        Ok(p)
    }

    pub fn train_config(&self, learner: Option<LearnerKind>, seed: Option<u64>) -> Result<TrainConfig> {
        let d = TrainConfig::default();
        let mut features = FeatureConfig::default();
        if let Some(a) = &self.timeline_attrs {
            if a.is_empty() {
                bail!("timeline_attrs must not be empty");
            }
            features.timeline_attrs = TimelineAttr::ALL.iter().copied().filter(|x| a.contains(x)).collect();
        }
        if let Some(c) = self.chi_squared_input {
            features.chi_squared_input = c;
        }
        let seed = self.seed(seed);
        let mut forest = self.forest.clone().unwrap_or_default();
        if self.forest.is_none() {
            forest.seed = seed;
        }
        Ok(TrainConfig {
            learner: learner.or(self.learner).unwrap_or(d.learner),
            nb: self.nb.clone().unwrap_or(d.nb),
            forest,
            vocab_max_size: self.vocab_max_size.unwrap_or(d.vocab_max_size),
            vocab_min_freq: self.vocab_min_freq.unwrap_or(d.vocab_min_freq),
            features,
            taxonomy: self.taxonomy()?,
            seed,
        })
    }
}

pub fn load_world(path: &Path) -> Result<WorldConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading world config {}", path.display()))?;
    let cfg: WorldConfig = toml::from_str(&text).with_context(|| format!("parsing world config {}", path.display()))?;
    Ok(cfg)
}

pub fn require_file(path: &Path, what: &str) -> Result<()> {
    if !path.is_file() {
        bail!("{what} {} does not exist or is not a file", path.display());
    }
    Ok(())
}

pub fn require_dir(path: &Path, what: &str) -> Result<()> {
    if !path.is_dir() {
        bail!("{what} {} does not exist or is not a directory", path.display());
    }
    Ok(())
}

/// The parent directory of an output file must exist.
pub fn require_output(path: &Path) -> Result<()> {
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    require_dir(parent, "output directory")
}
