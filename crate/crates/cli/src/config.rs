//! One TOML file drives every subcommand.
//!
//! Only `data_path` is mandatory; everything else has the documented
//! default, so a two-line config already runs end to end. Section structs
//! come straight from the library so the file schema and the code never
//! drift apart.

use std::fs;
use std::path::{Path, PathBuf};

use alphadesk::boost::BoostConfig;
use alphadesk::env::EnvConfig;
use alphadesk::frame::RiskConfig;
use alphadesk::ppo::PpoConfig;
use alphadesk::selection::SelectionMethod;
use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

/// Which alphas enter training. `all` skips selection entirely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum SelectionSpec {
    All,
    LowCorrelation { threshold: f64 },
    HighContribution { k: usize },
    Random { k: usize, seed: u64 },
}

impl Default for SelectionSpec {
    fn default() -> Self {
        SelectionSpec::All
    }
}

impl SelectionSpec {
    pub fn method(&self) -> Option<SelectionMethod> {
        match *self {
            SelectionSpec::All => None,
            SelectionSpec::LowCorrelation { threshold } => {
                Some(SelectionMethod::LowCorrelation { threshold })
            }
            SelectionSpec::HighContribution { k } => {
                Some(SelectionMethod::HighContribution { k })
            }
            SelectionSpec::Random { k, seed } => Some(SelectionMethod::Random { k, seed }),
        }
    }

    /// High-contribution selection ranks by boosted gain, which means the
    /// scoring pass has to run first.
    pub fn needs_gain(&self) -> bool {
        matches!(self, SelectionSpec::HighContribution { .. })
    }
}

pub const BUILTIN_CORPUS: &str = "builtin";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Daily bars CSV: date, open, high, low, close, volume, plus any extra
    /// feature columns the formulas reference.
    pub data_path: PathBuf,
    /// `"builtin"` for the embedded corpus, or a path to a formula file.
    pub alpha_file: String,
    /// Chronological split; the first fraction is the training span.
    pub train_fraction: f64,
    pub output_dir: PathBuf,
    /// Stochastic evaluation repetitions in `backtest`.
    pub eval_runs: usize,
    /// Equal-frequency bins for the mutual-information estimate.
    pub mi_bins: usize,
    /// Seed for the gain-importance boosting fit.
    pub boost_seed: u64,
    /// Optional benchmark bars; its buy-and-hold return over the test
    /// window lands in the backtest summary.
    pub benchmark_path: Option<PathBuf>,
    pub selection: SelectionSpec,
    pub risk: RiskConfig,
    pub env: EnvConfig,
    pub ppo: PpoConfig,
    pub boost: BoostConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data_path: PathBuf::new(),
            alpha_file: BUILTIN_CORPUS.to_string(),
            train_fraction: 0.8,
            output_dir: PathBuf::from("out"),
            eval_runs: 10,
            mi_bins: 16,
            boost_seed: 0,
            benchmark_path: None,
            selection: SelectionSpec::default(),
            risk: RiskConfig::default(),
            env: EnvConfig::default(),
            ppo: PpoConfig::default(),
            boost: BoostConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: RunConfig = toml::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.data_path.as_os_str().is_empty() {
            bail!("config is missing data_path");
        }
        if !self.data_path.exists() {
            bail!("data_path {} does not exist", self.data_path.display());
        }
        if self.alpha_file != BUILTIN_CORPUS && !Path::new(&self.alpha_file).exists() {
            bail!("alpha_file {} does not exist", self.alpha_file);
        }
        if let Some(b) = &self.benchmark_path {
            if !b.exists() {
                bail!("benchmark_path {} does not exist", b.display());
            }
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            bail!("train_fraction must be in (0, 1), got {}", self.train_fraction);
        }
        if self.eval_runs == 0 {
            bail!("eval_runs must be at least 1");
        }
        if self.mi_bins < 2 {
            bail!("mi_bins must be at least 2");
        }
        match self.selection {
            SelectionSpec::LowCorrelation { threshold } => {
                if !(0.0..=1.0).contains(&threshold) {
                    bail!("selection threshold must be in [0, 1], got {threshold}");
                }
            }
            SelectionSpec::HighContribution { k } | SelectionSpec::Random { k, .. } => {
                if k == 0 {
                    bail!("selection k must be at least 1");
                }
            }
            SelectionSpec::All => {}
        }
        self.risk.validate()?;
        self.env.validate()?;
        self.ppo.validate()?;
        self.boost.validate()?;
        Ok(())
    }

    /// Per-run seeds for stochastic evaluation, derived from the training
    /// seed so one config value pins the whole run.
    pub fn eval_seeds(&self) -> Vec<u64> {
        (0..self.eval_runs as u64)
            .map(|i| self.ppo.seed.wrapping_add(1000 + i))
            .collect()
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.output_dir.join("checkpoint.json")
    }
}
