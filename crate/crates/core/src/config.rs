//! TOML configuration shared by the CLI and the coaching service.
//!
//! ```toml
//! [rewards]
//! hp = 5.0
//! mp = 2.0
//! mn = -2.0
//! ln = -5.0
//!
//! [model]
//! alpha = 0.0
//!
//! [recommend]
//! k = 2
//!
//! [simulate]
//! depth = 3
//! steps = 20
//! opponent_policy = "best-own-utility"
//! live_update = false
//!
//! [soft_rules]
//! drop_to_smash = true
//!
//! [taxonomy]
//! path = "shots.csv"
//! ```
//!
//! Every section and key is optional.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::recommend::DEFAULT_K;
use crate::reward::RewardConfig;
use crate::shot::{Category, LegalityMatrix, Taxonomy};
use crate::simulate::SimConfig;

pub const DEFAULT_ALPHA: f64 = 0.0;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub rewards: RewardConfig,
    pub model: ModelSection,
    pub recommend: RecommendSection,
    pub simulate: SimulateSection,
    pub soft_rules: SoftRules,
    pub taxonomy: TaxonomySection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub alpha: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { alpha: DEFAULT_ALPHA }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RecommendSection {
    pub k: usize,
}

impl Default for RecommendSection {
    fn default() -> Self {
        Self { k: DEFAULT_K }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    pub depth: usize,
    pub steps: usize,
    pub opponent_policy: String,
    pub live_update: bool,
}

impl Default for SimulateSection {
    fn default() -> Self {
        let d = SimConfig::default();
        Self { depth: d.depth, steps: d.step_limit, opponent_policy: d.opponent_policy, live_update: d.live_update }
    }
}

impl SimulateSection {
    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            depth: self.depth,
            step_limit: self.steps,
            opponent_policy: self.opponent_policy.clone(),
            live_update: self.live_update,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SoftRules {
    pub drop_to_smash: bool,
}

impl Default for SoftRules {
    fn default() -> Self {
        Self { drop_to_smash: true }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaxonomySection {
    /// Shot taxonomy CSV; the bundled table when absent.
    pub path: Option<PathBuf>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file. Relative taxonomy paths resolve against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        let mut cfg = Self::parse(&text)?;
        if let (Some(p), Some(dir)) = (cfg.taxonomy.path.as_mut(), path.parent()) {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.rewards.validated().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(self.model.alpha.is_finite() && self.model.alpha >= 0.0) {
            return Err(ConfigError::Invalid(format!("model.alpha must be finite and >= 0, got {}", self.model.alpha)));
        }
        if self.recommend.k == 0 {
            return Err(ConfigError::Invalid("recommend.k must be at least 1".into()));
        }
        self.simulate.sim_config().validate().map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn taxonomy(&self) -> Result<Arc<Taxonomy>, ConfigError> {
        match &self.taxonomy.path {
            None => Ok(Taxonomy::standard()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|source| ConfigError::Io { path: p.display().to_string(), source })?;
                Taxonomy::from_csv(&text).map(Arc::new).map_err(|e| ConfigError::Invalid(e.to_string()))
            }
        }
    }

    pub fn legality(&self) -> Result<LegalityMatrix, ConfigError> {
        Ok(LegalityMatrix::new(self.taxonomy()?).with_soft_rule(
            Category::Drop,
            Category::Smash,
            self.soft_rules.drop_to_smash,
        ))
    }
}
