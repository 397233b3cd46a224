use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{load_tabular, TabularDataset, TabularKind, TimeSeriesDataset};
use crate::nn::SampleShape;
use crate::{Error, Result};

/// Where one dataset lives on disk.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetEntry {
    /// Archive time series with separate train/test `.ts` files.
    Uea { train: PathBuf, test: PathBuf },
    Tabular { format: TabularKind, path: PathBuf },
}

/// Dataset names mapped to files, persisted as TOML. Relative paths are
/// resolved against the registry file's directory.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Registry {
    #[serde(default)]
    pub datasets: BTreeMap<String, DatasetEntry>,
    #[serde(skip)]
    base: PathBuf,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LoadedDataset {
    Series(TimeSeriesDataset),
    Table(TabularDataset),
}

impl LoadedDataset {
    pub fn shape(&self) -> SampleShape {
        match self {
            LoadedDataset::Series(d) => d.shape(),
            LoadedDataset::Table(d) => d.shape(),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            LoadedDataset::Series(d) => &d.name,
            LoadedDataset::Table(d) => &d.name,
        }
    }
}

impl Registry {
    /// Reads a registry; a missing file is an empty registry.
    pub fn open(path: &Path) -> Result<Self> {
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        if !path.exists() {
            return Ok(Self {
                base,
                ..Self::default()
            });
        }
        let text = std::fs::read_to_string(path)?;
        let mut reg: Registry = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        reg.base = base;
        Ok(reg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("cannot serialize registry: {e}")))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn register(&mut self, name: &str, entry: DatasetEntry) {
        self.datasets.insert(name.to_ascii_lowercase(), entry);
    }

    pub fn get(&self, name: &str) -> Result<&DatasetEntry> {
        self.datasets.get(&name.to_ascii_lowercase()).ok_or_else(|| {
            let known: Vec<&str> = self.datasets.keys().map(String::as_str).collect();
            Error::Config(format!(
                "dataset {name:?} is not registered (registered: {})",
                if known.is_empty() { "none".to_string() } else { known.join(", ") }
            ))
        })
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    /// Loads a registered dataset; `seed` only matters for formats with
    /// random subsampling.
    pub fn load(&self, name: &str, seed: u64) -> Result<LoadedDataset> {
        match self.get(name)? {
            DatasetEntry::Uea { train, test } => Ok(LoadedDataset::Series(
                TimeSeriesDataset::load(name, &self.resolve(train), &self.resolve(test))?,
            )),
            DatasetEntry::Tabular { format, path } => {
                let mut ds = load_tabular(&self.resolve(path), *format, seed)?;
                ds.name = name.to_ascii_lowercase();
                Ok(LoadedDataset::Table(ds))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn save_open_round_trip_and_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let reg_path = dir.path().join("datasets.toml");
        std::fs::write(dir.path().join("t.csv"), "1,2,0\n3,4,1\n").unwrap();
        let mut reg = Registry::open(&reg_path).unwrap();
        assert!(reg.datasets.is_empty());
        reg.register(
            "Toy",
            DatasetEntry::Tabular {
                format: TabularKind::Csv,
                path: "t.csv".into(),
            },
        );
        reg.save(&reg_path).unwrap();
        let again = Registry::open(&reg_path).unwrap();
        assert_eq!(again.datasets, reg.datasets);
        let LoadedDataset::Table(ds) = again.load("toy", 0).unwrap() else {
            panic!("expected a table")
        };
        assert_eq!((ds.features(), ds.n_anomalies()), (2, 1));
        assert!(matches!(again.load("missing", 0), Err(Error::Config(_))));
    }
}
