//! Run configuration shared by the command-line subcommands.
//!
//! A run is described by one TOML file:
//!
//! ```toml
//! output_dir = "out"
//!
//! [input]
//! path = "reviews.tsv"
//! format = "tsv"
//!
//! [corpus]
//! min_word_len = 3
//! min_freq = 5
//! test_fraction = 0.2
//! seed = 1
//!
//! [model]
//! stencils = 2
//! text_stencils = 1
//! burn_in = 100
//! samples = 100
//!
//! [train]
//! threads = 4
//! checkpoint_interval = 10
//! ```
//!
//! Relative paths inside the file are resolved against the file's directory.

use std::collections::HashSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{default_stopwords, InputFormat, VocabOptions};
use crate::error::{Error, Result};
use crate::model::Hyperparameters;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    pub path: PathBuf,
    pub format: InputFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub min_word_len: usize,
    pub min_freq: usize,
    /// One stopword per line; the built-in English list when absent.
    pub stopwords: Option<PathBuf>,
    pub test_fraction: f64,
    pub seed: u64,
    /// Multiplier applied to centred ratings during training.
    pub rating_scale: f64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            min_word_len: 3,
            min_freq: 5,
            stopwords: None,
            test_fraction: 0.2,
            seed: 1,
            rating_scale: 1.0,
        }
    }
}

/// Which `(user, item)` pairs the posterior summary covers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeSource {
    /// Every pair of the held-out set, tracking the words of its review.
    Test,
    /// `user<TAB>item` lines; full rate vectors are kept.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub threads: usize,
    pub checkpoint_interval: usize,
    /// Write a metric-log row every this many iterations.
    pub log_every: usize,
    pub probe: ProbeSource,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            threads: 1,
            checkpoint_interval: 10,
            log_every: 1,
            probe: ProbeSource::Test,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    pub input: Option<InputConfig>,
    #[serde(default)]
    pub corpus: CorpusConfig,
    #[serde(default)]
    pub model: Hyperparameters,
    #[serde(default)]
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn new(output_dir: impl Into<PathBuf>) -> Self {
        RunConfig {
            output_dir: output_dir.into(),
            input: None,
            corpus: CorpusConfig::default(),
            model: Hyperparameters::default(),
            train: TrainConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Parses a config file and resolves its relative paths against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.output_dir);
        if let Some(input) = &mut cfg.input {
            resolve(&mut input.path);
        }
        if let Some(sw) = &mut cfg.corpus.stopwords {
            resolve(sw);
        }
        if let ProbeSource::File(p) = &mut cfg.train.probe {
            resolve(p);
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.corpus;
        if c.min_word_len == 0 || c.min_freq == 0 {
            return Err(Error::Config("min_word_len and min_freq must be at least 1".into()));
        }
        if !(c.test_fraction > 0.0 && c.test_fraction < 1.0) {
            return Err(Error::Config(format!(
                "test_fraction must lie in (0, 1), got {}",
                c.test_fraction
            )));
        }
        if !(c.rating_scale.is_finite() && c.rating_scale > 0.0) {
            return Err(Error::Config("rating_scale must be positive".into()));
        }
        if self.train.threads == 0 {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        if self.train.log_every == 0 {
            return Err(Error::Config("log_every must be at least 1".into()));
        }
        self.model.validate()
    }

    pub fn vocab_options(&self) -> Result<VocabOptions> {
        let stopwords = match &self.corpus.stopwords {
            None => default_stopwords(),
            Some(p) => read_word_list(p)?,
        };
        Ok(VocabOptions {
            min_word_len: self.corpus.min_word_len,
            min_freq: self.corpus.min_freq,
            stopwords,
        })
    }

    /// Digest of every setting that changes what a training run computes.
    /// Thread count, checkpoint cadence and output location are excluded.
    pub fn training_hash(&self) -> String {
        #[derive(Serialize)]
        struct Relevant<'a> {
            corpus: &'a CorpusConfig,
            model: &'a Hyperparameters,
            probe: &'a ProbeSource,
        }
        let json = serde_json::to_vec(&Relevant {
            corpus: &self.corpus,
            model: &self.model,
            probe: &self.train.probe,
        })
        .expect("config serialises");
        hex::encode(Sha256::digest(json))
    }
}

pub fn read_word_list(path: &Path) -> Result<HashSet<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect())
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(match path.extension() {
        Some(ext) => format!("{}.tmp", ext.to_string_lossy()),
        None => "tmp".to_string(),
    });
    {
        let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = RunConfig::from_toml("output_dir = \"out\"\n").unwrap();
        assert_eq!(cfg.corpus, CorpusConfig::default());
        assert_eq!(cfg.model, Hyperparameters::default());
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn full_config_parses() {
        let cfg = RunConfig::from_toml(
            r#"
output_dir = "o"
[input]
path = "x.jsonl"
format = "jsonl"
[corpus]
min_freq = 2
[model]
stencils = 3
text_stencils = 2
priors.block = { shape = 2.0, rate = 5.0 }
[train]
threads = 4
probe = { file = "pairs.tsv" }
"#,
        )
        .unwrap();
        assert_eq!(cfg.model.stencils, 3);
        assert_eq!(cfg.model.priors.block.rate, 5.0);
        assert_eq!(cfg.train.probe, ProbeSource::File("pairs.tsv".into()));
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_toml("output_dir = \"o\"\n[model]\nstencil = 2\n").is_err());
    }

    #[test]
    fn invalid_values_fail_validation() {
        let mut cfg = RunConfig::new("o");
        cfg.corpus.test_fraction = 1.5;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::new("o");
        cfg.model.text_stencils = 5;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn hash_ignores_threads_but_not_seed() {
        let a = RunConfig::new("o");
        let mut b = a.clone();
        b.train.threads = 8;
        b.output_dir = "elsewhere".into();
        assert_eq!(a.training_hash(), b.training_hash());
        b.model.seed = 3;
        assert_ne!(a.training_hash(), b.training_hash());
    }
}
