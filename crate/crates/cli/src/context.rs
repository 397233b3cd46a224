use std::path::{Path, PathBuf};

use anyhow::Context as _;
use neutral_core::data::{LoadedDataset, Registry, TwoGaussians};
use neutral_core::train::TrainConfig;
use neutral_core::Error;
use serde::{Deserialize, Serialize};

use crate::{Cli, TrainOverrides};

pub const REGISTRY_ENV: &str = "NEUTRAL_AD_REGISTRY";
const DEFAULT_REGISTRY: &str = "datasets.toml";
/// Built-in two-cluster benchmark, available without registration.
pub const SYNTHETIC: &str = "synthetic";

/// Contents of the `--config` file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    /// Registry path, relative to the config file.
    pub registry: Option<PathBuf>,
    pub train: TrainConfig,
}

impl CliConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: CliConfig = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(r) = &cfg.registry {
            if r.is_relative() {
                cfg.registry = Some(path.parent().unwrap_or(Path::new("")).join(r));
            }
        }
        Ok(cfg)
    }
}

/// Settings shared by every command.
pub struct Context {
    pub seed: u64,
    pub out: PathBuf,
    pub registry_path: PathBuf,
    pub train: TrainConfig,
}

impl Context {
    pub fn new(cli: &Cli) -> anyhow::Result<Self> {
        let cfg = match &cli.config {
            Some(p) => CliConfig::load(p)?,
            None => CliConfig::default(),
        };
        let registry_path = cli
            .registry
            .clone()
            .or(cfg.registry)
            .or_else(|| std::env::var_os(REGISTRY_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_REGISTRY));
        Ok(Self {
            seed: cli.seed,
            out: cli.out.clone(),
            registry_path,
            train: TrainConfig {
                seed: cli.seed,
                ..cfg.train
            },
        })
    }

    pub fn registry(&self) -> anyhow::Result<Registry> {
        Ok(Registry::open(&self.registry_path)?)
    }

    /// A registered dataset, or the built-in synthetic benchmark.
    pub fn load_dataset(&self, name: &str, seed: u64) -> anyhow::Result<LoadedDataset> {
        let reg = self.registry()?;
        if name.eq_ignore_ascii_case(SYNTHETIC) && reg.get(name).is_err() {
            return Ok(LoadedDataset::Table(TwoGaussians::default().dataset(seed)?));
        }
        reg.load(name, seed)
            .with_context(|| format!("loading dataset {name:?} (registry {})", self.registry_path.display()))
    }

    /// The config-file settings with command-line overrides applied. The
    /// synthetic benchmark is never standardized: its clusters differ only
    /// in direction from the origin.
    pub fn train_config(&self, dataset: &str, o: &TrainOverrides) -> TrainConfig {
        let mut c = self.train.clone();
        if o.k.is_some() {
            c.k = o.k;
        }
        if let Some(m) = o.mode {
            c.mode = m;
        }
        if let Some(v) = o.epochs {
            c.epochs = v;
        }
        if let Some(v) = o.batch_size {
            c.batch_size = v;
        }
        if let Some(v) = o.learning_rate {
            c.learning_rate = v;
        }
        if let Some(v) = o.temperature {
            c.temperature = v;
        }
        if let Some(v) = o.patience {
            c.patience = v;
        }
        if let Some(v) = o.objective {
            c.objective = v;
        }
        if o.no_standardize || dataset.eq_ignore_ascii_case(SYNTHETIC) {
            c.standardize = false;
        }
        c
    }

    pub fn out_dir(&self) -> anyhow::Result<&Path> {
        std::fs::create_dir_all(&self.out)
            .with_context(|| format!("creating {}", self.out.display()))?;
        Ok(&self.out)
    }

    /// `seeds` if given, else `count` consecutive seeds from `--seed`.
    pub fn seeds(&self, seeds: &[u64], count: u64) -> Vec<u64> {
        if seeds.is_empty() {
            (self.seed..self.seed + count).collect()
        } else {
            seeds.to_vec()
        }
    }
}
