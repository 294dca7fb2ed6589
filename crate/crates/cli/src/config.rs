//! Run configuration: a JSON file whose keys match the command-line flags,
//! with every flag taking precedence over the file.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{Context, Result};
use clap::Args;
use convonet_core::eval::Averaging;
use convonet_core::{OptimizerKind, TrainConfig};
use serde::{Deserialize, Deserializer};

use crate::UsageError;

/// Environment variable consulted when no seed is given.
pub const SEED_ENV: &str = "CONVONET_SEED";
pub const DEFAULT_OUT_DIR: &str = "convonet-out";
pub const DEFAULT_MODEL: &str = "TextConvoNet_6";

/// Early-stopping patience; `none` disables early stopping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Patience(pub Option<usize>);

impl FromStr for Patience {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" | "off" => Ok(Self(None)),
            v => v.parse().map(|p| Self(Some(p))).map_err(|_| format!("patience must be a count or \"none\", got {s:?}")),
        }
    }
}

impl fmt::Display for Patience {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(p) => write!(f, "{p}"),
            None => f.write_str("none"),
        }
    }
}

impl<'de> Deserialize<'de> for Patience {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(usize),
            Text(String),
            Null(()),
        }
        match Raw::deserialize(d)? {
            Raw::Count(c) => Ok(Self(Some(c))),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Raw::Null(()) => Ok(Self(None)),
        }
    }
}

/// Options shared by every subcommand. Each is also a JSON key of the same
/// name in the `--config` file.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct RunConfig {
    /// JSON file with default values for any of these options.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Training CSV with `text` and `label` columns.
    #[arg(long)]
    pub train_csv: Option<PathBuf>,
    /// Test CSV with `text` and `label` columns.
    #[arg(long)]
    pub test_csv: Option<PathBuf>,
    /// Whitespace-separated word vectors, one word per line.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Catalog model name (comma-separated list for fewshot and mstudy).
    #[arg(long)]
    pub model: Option<String>,
    /// Seed for initialization, shuffling, and dropout [env: CONVONET_SEED].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Learning rate.
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Maximum training epochs.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Early-stopping patience in epochs, or `none`.
    #[arg(long)]
    pub patience: Option<Patience>,
    /// Share of the training set held out for early stopping.
    #[arg(long)]
    pub validation_fraction: Option<f64>,
    /// Override the architecture's optimizer (adam or rmsprop).
    #[arg(long)]
    pub optimizer: Option<OptimizerKind>,
    /// Sentences per document (inferred from the training set by default).
    #[arg(long)]
    pub m: Option<usize>,
    /// Tokens per sentence (inferred from the training set by default).
    #[arg(long)]
    pub n: Option<usize>,
    /// Comma-separated fractions in (0, 1].
    #[arg(long, value_delimiter = ',')]
    pub fractions: Option<Vec<f64>>,
    /// Significance level.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Multiclass averaging: macro or micro.
    #[arg(long)]
    pub averaging: Option<Averaging>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Checkpoint to evaluate.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Ablation version filter, e.g. `V1.*` or `V2.3,V4.*`.
    #[arg(long)]
    pub versions: Option<String>,
    /// Dataset name written to result rows (default: test CSV file stem).
    #[arg(long)]
    pub dataset: Option<String>,
}

macro_rules! merge_fields {
    ($flags:ident, $file:ident; $($field:ident),*) => {
        RunConfig { config: $flags.config, $($field: $flags.$field.or($file.$field)),* }
    };
}

impl RunConfig {
    /// Fills unset flags from the `--config` file, if one was given.
    pub fn resolve(self) -> Result<RunConfig> {
        let Some(path) = self.config.clone() else { return Ok(self) };
        let text = std::fs::read_to_string(&path).with_context(|| format!("cannot read config {}", path.display()))
            .map_err(|e| UsageError(format!("{e:#}")))?;
        let file: RunConfig = serde_json::from_str(&text)
            .map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
        let flags = self;
        Ok(merge_fields!(flags, file; train_csv, test_csv, embeddings, model, seed, lr, batch_size, epochs,
            patience, validation_fraction, optimizer, m, n, fractions, alpha, averaging, out_dir, checkpoint,
            versions, dataset))
    }

    /// An existing file given by option `flag`.
    pub fn require_file<'a>(&self, value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
        let path = value.as_deref().ok_or_else(|| UsageError(format!("missing required option --{flag}")))?;
        if !path.is_file() {
            return Err(UsageError(format!("--{flag}: file not found: {}", path.display())).into());
        }
        Ok(path)
    }

    /// Flag or config value, then `CONVONET_SEED`, then 0.
    pub fn seed(&self) -> Result<u64> {
        if let Some(s) = self.seed {
            return Ok(s);
        }
        match std::env::var(SEED_ENV) {
            Ok(v) => v.trim().parse().map_err(|_| UsageError(format!("{SEED_ENV}={v:?} is not an unsigned integer")).into()),
            Err(_) => Ok(0),
        }
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let d = TrainConfig::default();
        let cfg = TrainConfig {
            learning_rate: self.lr.unwrap_or(d.learning_rate),
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            max_epochs: self.epochs.unwrap_or(d.max_epochs),
            patience: self.patience.map_or(d.patience, |p| p.0),
            validation_fraction: self.validation_fraction.unwrap_or(d.validation_fraction),
            seed: self.seed()?,
            optimizer: self.optimizer,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn model_names(&self) -> Vec<String> {
        self.model
            .as_deref()
            .unwrap_or(DEFAULT_MODEL)
            .split(',')
            .map(|s| s.trim().to_owned())
            .filter(|s| !s.is_empty())
            .collect()
    }

    pub fn averaging(&self) -> Averaging {
        self.averaging.unwrap_or_default()
    }

    /// Output directory, created if absent.
    pub fn out_dir(&self) -> Result<PathBuf> {
        let dir = self.out_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
        std::fs::create_dir_all(&dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
        Ok(dir)
    }

    pub fn fractions(&self, default: &[f64]) -> Result<Vec<f64>> {
        let fractions = self.fractions.clone().unwrap_or_else(|| default.to_vec());
        if fractions.is_empty() {
            return Err(UsageError("--fractions is empty".into()).into());
        }
        if let Some(f) = fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
            return Err(UsageError(format!("fraction {f} outside (0, 1]")).into());
        }
        Ok(fractions)
    }

    /// Name used in result rows for the test set.
    pub fn dataset_name(&self) -> String {
        self.dataset.clone().unwrap_or_else(|| {
            self.test_csv
                .as_deref()
                .and_then(Path::file_stem)
                .map_or_else(|| "dataset".to_owned(), |s| s.to_string_lossy().into_owned())
        })
    }
}
