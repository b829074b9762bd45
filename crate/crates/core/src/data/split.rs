use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SplitConfig {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            train_fraction: 0.7,
            seed: 42,
        }
    }
}

/// Seeded random partition into train and test. The train side holds
/// `round(train_fraction * N)` rows; both sides keep the original row order.
/// Identical inputs produce the identical partition on every platform.
pub fn split_dataset(d: &Dataset, cfg: &SplitConfig) -> Result<(Dataset, Dataset)> {
    let n = d.len();
    if n < 2 {
        return Err(Error::BadSplit(format!(
            "need at least 2 rows to split, got {n}"
        )));
    }
    if !(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0) {
        return Err(Error::BadSplit(format!(
            "train_fraction must lie strictly between 0 and 1, got {}",
            cfg.train_fraction
        )));
    }
    let train_size = (cfg.train_fraction * n as f64).round() as usize;
    if train_size == 0 || train_size == n {
        return Err(Error::BadSplit(format!(
            "fraction {} of {} rows leaves one side empty",
            cfg.train_fraction, n
        )));
    }

    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    indices.shuffle(&mut rng);
    let mut train_idx: Vec<usize> = indices[..train_size].to_vec();
    let mut test_idx: Vec<usize> = indices[train_size..].to_vec();
    train_idx.sort_unstable();
    test_idx.sort_unstable();

    Ok((d.select(&train_idx), d.select(&test_idx)))
}

/// The indices a split would assign to the train side; exposed so callers
/// can fingerprint a partition without holding both halves.
pub fn split_train_indices(n: usize, cfg: &SplitConfig) -> Result<Vec<usize>> {
    if n < 2 {
        return Err(Error::BadSplit(format!(
            "need at least 2 rows to split, got {n}"
        )));
    }
    let train_size = (cfg.train_fraction * n as f64).round() as usize;
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    indices.shuffle(&mut rng);
    let mut train_idx: Vec<usize> = indices[..train_size].to_vec();
    train_idx.sort_unstable();
    Ok(train_idx)
}
