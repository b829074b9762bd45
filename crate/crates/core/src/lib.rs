//! fairaudit: a toolkit for auditing group fairness of binary classifiers
//! and measuring what bias-mitigation methods actually do to each
//! demographic group.
//!
//! The pieces, bottom to top:
//!
//! - [`data`]: schema-driven CSV ingestion, seeded splits, demographic
//!   group construction, train-fitted feature encoding, bundled recipes.
//! - [`model`]: a deterministic weighted logistic-regression learner.
//! - [`metrics`]: group-disaggregated selection/TPR/FPR rates, the derived
//!   fairness gaps (SPD/EOD/AOD), and standard performance scores.
//! - [`stats`]: the nonparametric layer (Mann-Whitney U, Cliff's delta,
//!   Spearman rank correlation) and the verdict rules built on it.
//! - [`mitigation`]: pre-, in-, and post-processing interventions plus
//!   selective per-group application.
//! - [`harness`]: the seeded multi-run experiment protocol, aggregation
//!   tables, external score-file auditing, and report emission.

pub mod data;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod mitigation;
pub mod model;
pub mod seeding;
pub mod stats;

pub use error::{Error, Result};
