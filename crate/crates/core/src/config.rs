//! Pipeline settings read from a TOML file.
//!
//! Every section is optional and falls back to its defaults:
//!
//! ```toml
//! text_source = "title_abstract"
//! embed_dim = 256
//!
//! [train]
//! learning_rate = 0.01
//! scope = "all_pairs"
//! [train.encoder]
//! hidden = 64
//!
//! [cluster]
//! scope = "all_pairs"
//!
//! [verbalize]
//! budget = 6000
//!
//! [http]
//! endpoint = "http://localhost:8080/generate"
//!
//! [synth]
//! branching = [2, 2]
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::SynthConfig;
use crate::graph::TextSource;
use crate::hiclust::HierarchyConfig;
use crate::train::TrainConfig;
use crate::verbalize::{HttpConfig, VerbalizeConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub text_source: TextSource,
    /// Width of the offline hashed embedding.
    pub embed_dim: usize,
    pub train: TrainConfig,
    pub cluster: HierarchyConfig,
    pub verbalize: VerbalizeConfig,
    pub http: HttpConfig,
    pub synth: SynthConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            text_source: TextSource::default(),
            embed_dim: 256,
            train: TrainConfig::default(),
            cluster: HierarchyConfig::default(),
            verbalize: VerbalizeConfig::default(),
            http: HttpConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.embed_dim < 2 {
            return Err(Error::Config("embed_dim must be at least 2".into()));
        }
        self.train.validate()?;
        self.train.encoder.shape(self.embed_dim).validate()?;
        self.cluster.validate()?;
        self.synth.validate()
    }
}
