//! Run configuration: a TOML file with `[train]`, `[paths]`, and `[lm]`
//! sections. Every training hyperparameter has a baked-in default, so a
//! minimal config only supplies file paths.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::scorers::{load_resources, ScoreError, ScorerWeights, ScoringContext};
use crate::trainloop::{TrainConfig, TrainError};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse {path}: {msg}")]
    Parse { path: PathBuf, msg: String },
    #[error("missing required path `{key}`")]
    MissingPath { key: &'static str },
    #[error("{key} does not exist: {path}")]
    PathNotFound { key: &'static str, path: PathBuf },
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Score(#[from] ScoreError),
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    pub corpus: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    /// ARPA language model.
    pub lm: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LmConfig {
    pub order: usize,
}

impl Default for LmConfig {
    fn default() -> Self {
        LmConfig { order: 4 }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub paths: PathsConfig,
    pub lm: LmConfig,
    /// Maximum sentence length accepted at ingestion.
    pub max_len: usize,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| ConfigError::Parse { path: path.to_path_buf(), msg: e.to_string() })?;
        cfg.train.validate()?;
        Ok(cfg)
    }

    pub fn max_len(&self) -> usize {
        if self.max_len == 0 {
            crate::textcore::MAX_LEN_DEFAULT
        } else {
            self.max_len
        }
    }

    fn required(
        key: &'static str,
        value: &Option<PathBuf>,
    ) -> Result<PathBuf, ConfigError> {
        let p = value.clone().ok_or(ConfigError::MissingPath { key })?;
        if !p.exists() {
            return Err(ConfigError::PathNotFound { key, path: p });
        }
        Ok(p)
    }

    pub fn corpus_path(&self) -> Result<PathBuf, ConfigError> {
        Self::required("paths.corpus", &self.paths.corpus)
    }

    pub fn lexicon_path(&self) -> Result<PathBuf, ConfigError> {
        Self::required("paths.lexicon", &self.paths.lexicon)
    }

    /// Build the scoring context from the configured resource files.
    pub fn scoring_context(&self) -> Result<ScoringContext, ConfigError> {
        let lm = Self::required("paths.lm", &self.paths.lm)?;
        let emb = Self::required("paths.embeddings", &self.paths.embeddings)?;
        let stop = match &self.paths.stopwords {
            Some(p) => {
                if !p.exists() {
                    return Err(ConfigError::PathNotFound {
                        key: "paths.stopwords",
                        path: p.clone(),
                    });
                }
                Some(p.as_path())
            }
            None => None,
        };
        let (lm, emb, stop) = load_resources(&lm, &emb, stop)?;
        Ok(ScoringContext::new(self.train.weights, lm, emb, stop)?)
    }

    pub fn weights(&self) -> ScorerWeights {
        self.train.weights
    }
}
