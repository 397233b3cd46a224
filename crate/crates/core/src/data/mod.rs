//! Dataset ingestion, per-dataset preprocessing and evaluation protocols.

mod registry;
mod series;
mod split;
mod tabular;
pub mod ts;

pub use registry::{DatasetEntry, LoadedDataset, Registry};
pub use series::{apply_rule, dataset_rule, load_uea_ts, LengthRule, TimeSeriesDataset};
pub use split::{
    n_vs_rest_classes, split_dataset, split_n_vs_rest, split_one_vs_rest, split_tabular, standardize,
    DatasetSplit, Protocol, ProtocolDescriptor, Standardization, TwoGaussians,
};
pub use tabular::{load_tabular, parse_kdd, parse_tabular, KddVocabulary, TabularDataset, TabularKind};
