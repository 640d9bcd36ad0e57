//! Experiment configuration: a plain `key = value` file, `#` comments,
//! with every key overridable from the command line.
//!
//! Keys: `dataset`, `out`, `strategy` (comma list), `seed_fraction`,
//! `budget`, `rounds`, `mc_passes`, `superpixels`, `superpixel_iterations`,
//! `seeds` (comma list), `learning_rate`, `weight_decay`, `epochs`,
//! `batch_size`, `dropout`.

use std::fs;
use std::path::{Path, PathBuf};

use edgeal_core::baselines::Strategy;
use edgeal_core::learner::TrainConfig;
use edgeal_core::superpixel::{DEFAULT_ITERATIONS, DEFAULT_REGION_COUNT};

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: PathBuf,
    pub out: Option<PathBuf>,
    pub strategies: Vec<Strategy>,
    pub seed_fraction: f64,
    /// Pixels revealed per round, as a fraction of all training pixels.
    pub budget: f64,
    pub rounds: usize,
    pub mc_passes: usize,
    pub superpixels: usize,
    pub superpixel_iterations: usize,
    pub seeds: Vec<u64>,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: PathBuf::from("data"),
            out: None,
            strategies: vec![Strategy::EdgeAl],
            seed_fraction: 0.02,
            budget: 0.10,
            rounds: 4,
            mc_passes: 8,
            superpixels: DEFAULT_REGION_COUNT,
            superpixel_iterations: DEFAULT_ITERATIONS,
            seeds: vec![1, 2, 3, 4, 5],
            train: TrainConfig::default(),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value for {key}: {value:?}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

impl ExperimentConfig {
    /// Applies one setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim().replace('-', "_").as_str() {
            "dataset" => self.dataset = PathBuf::from(value),
            "out" => self.out = Some(PathBuf::from(value)),
            "strategy" | "strategies" => {
                self.strategies = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::parse)
                    .collect::<std::result::Result<_, _>>()?;
            }
            "seed_fraction" => self.seed_fraction = parse(key, value)?,
            "budget" => self.budget = parse(key, value)?,
            "rounds" => self.rounds = parse(key, value)?,
            "mc_passes" => self.mc_passes = parse(key, value)?,
            "superpixels" => self.superpixels = parse(key, value)?,
            "superpixel_iterations" => self.superpixel_iterations = parse(key, value)?,
            "seeds" => self.seeds = parse_list(key, value)?,
            "learning_rate" => self.train.learning_rate = parse(key, value)?,
            "weight_decay" => self.train.weight_decay = parse(key, value)?,
            "epochs" => self.train.epochs = parse(key, value)?,
            "batch_size" => self.train.batch_size = parse(key, value)?,
            "dropout" => self.train.dropout = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            cfg.set(key, value)?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse_str(&text)?;
        // A relative dataset path is taken relative to the config file.
        if cfg.dataset.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.dataset = dir.join(&cfg.dataset);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let frac = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be in (0, 1), got {v}")))
            }
        };
        frac("seed_fraction", self.seed_fraction)?;
        frac("budget", self.budget)?;
        if !(0.0..1.0).contains(&self.train.dropout) {
            return Err(Error::Config(format!("dropout must be in [0, 1), got {}", self.train.dropout)));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        if self.strategies.is_empty() {
            return Err(Error::Config("no strategy given".into()));
        }
        if self.mc_passes == 0 || self.superpixels == 0 || self.train.epochs == 0 {
            return Err(Error::Config(
                "mc_passes, superpixels and epochs must be positive".into(),
            ));
        }
        Ok(())
    }
}
