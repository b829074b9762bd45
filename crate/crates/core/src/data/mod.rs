//! Dataset ingestion: schema-driven CSV loading, seeded train/test
//! splitting, demographic group construction, and feature encoding.

pub mod dataset;
pub mod encode;
pub mod groups;
pub mod schema;
pub mod split;
pub mod synth;

pub use dataset::{load_dataset, load_dataset_from_reader, ColumnData, Dataset};
pub use encode::{FeatureEncoder, FeatureMatrix};
pub use groups::{assign_groups, GroupAssignment, GroupInfo};
pub use schema::{DatasetSchema, FeatureColumn, FeatureKind, SensitiveAttribute};
pub use split::{split_dataset, split_train_indices, SplitConfig};
pub use synth::{generate_csv, write_bundle, Recipe};
