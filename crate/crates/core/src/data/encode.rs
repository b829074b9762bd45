use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::dataset::{ColumnData, Dataset};
use crate::error::{Error, Result};

/// Dense row-major design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl FeatureMatrix {
    pub fn new(data: Vec<f64>, rows: usize, cols: usize) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix shape mismatch");
        FeatureMatrix { data, rows, cols }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
enum ColumnEncoding {
    /// Standardize by training mean and population standard deviation.
    Standardize { name: String, mean: f64, std: f64 },
    /// Dropped at fit time (zero training variance).
    Dropped { name: String },
    /// One indicator per level observed in training, in sorted order.
    OneHot { name: String, levels: Vec<String> },
}

/// A feature dictionary fitted on training data and applied unchanged to any
/// later dataset: numeric columns are standardized by training statistics,
/// categorical columns are one-hot encoded over training levels, and test
/// levels never seen in training encode as all zeros.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureEncoder {
    columns: Vec<ColumnEncoding>,
    width: usize,
    pub flags: Vec<String>,
}

impl FeatureEncoder {
    pub fn fit(train: &Dataset) -> Result<FeatureEncoder> {
        if train.is_empty() {
            return Err(Error::EmptyInput("cannot fit encoder on empty data".into()));
        }
        let mut columns = Vec::new();
        let mut flags = Vec::new();
        let mut width = 0usize;
        for (decl, col) in train.schema.features.iter().zip(&train.features) {
            match col {
                ColumnData::Numeric(values) => {
                    let n = values.len() as f64;
                    let mean = values.iter().sum::<f64>() / n;
                    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                    let std = var.sqrt();
                    if std == 0.0 {
                        flags.push(format!(
                            "numeric column `{}` has zero training variance; dropped",
                            decl.name
                        ));
                        columns.push(ColumnEncoding::Dropped {
                            name: decl.name.clone(),
                        });
                    } else {
                        columns.push(ColumnEncoding::Standardize {
                            name: decl.name.clone(),
                            mean,
                            std,
                        });
                        width += 1;
                    }
                }
                ColumnData::Categorical(values) => {
                    let mut levels: Vec<String> = values.to_vec();
                    levels.sort();
                    levels.dedup();
                    width += levels.len();
                    columns.push(ColumnEncoding::OneHot {
                        name: decl.name.clone(),
                        levels,
                    });
                }
            }
        }
        Ok(FeatureEncoder {
            columns,
            width,
            flags,
        })
    }

    /// Encoded width (number of model features).
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn encode(&self, d: &Dataset) -> Result<FeatureMatrix> {
        if d.features.len() != self.columns.len() {
            return Err(Error::DimensionMismatch {
                expected: self.columns.len(),
                got: d.features.len(),
            });
        }
        let rows = d.len();
        let mut data = vec![0.0f64; rows * self.width];
        let mut offset = 0usize;
        for (enc, col) in self.columns.iter().zip(&d.features) {
            match (enc, col) {
                (ColumnEncoding::Standardize { name, mean, std }, ColumnData::Numeric(v)) => {
                    debug_assert_eq!(v.len(), rows, "column {name} length");
                    for (r, value) in v.iter().enumerate() {
                        data[r * self.width + offset] = (value - mean) / std;
                    }
                    offset += 1;
                }
                (ColumnEncoding::Dropped { .. }, ColumnData::Numeric(_)) => {}
                (ColumnEncoding::OneHot { name, levels }, ColumnData::Categorical(v)) => {
                    debug_assert_eq!(v.len(), rows, "column {name} length");
                    for (r, value) in v.iter().enumerate() {
                        if let Ok(pos) = levels.binary_search(value) {
                            data[r * self.width + offset + pos] = 1.0;
                        }
                        // Levels unseen in training stay all-zero.
                    }
                    offset += levels.len();
                }
                (enc, _) => {
                    let name = match enc {
                        ColumnEncoding::Standardize { name, .. } => name,
                        ColumnEncoding::Dropped { name } => name,
                        ColumnEncoding::OneHot { name, .. } => name,
                    };
                    return Err(Error::Misaligned(format!(
                        "column `{name}` changed kind between fit and encode"
                    )));
                }
            }
        }
        Ok(FeatureMatrix::new(data, rows, self.width))
    }

    /// Stable hex digest of the fitted dictionary, recorded alongside
    /// exported models so a mismatched encoder is detectable.
    pub fn fingerprint(&self) -> String {
        let canonical =
            serde_json::to_vec(&self.columns).expect("encoder serialization cannot fail");
        let mut hasher = Sha256::new();
        hasher.update(&canonical);
        let digest = hasher.finalize();
        digest.iter().take(16).map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::dataset::load_dataset_from_reader;
    use crate::data::schema::{DatasetSchema, FeatureColumn, FeatureKind, SensitiveAttribute};

    fn schema(features: &[(&str, FeatureKind)]) -> DatasetSchema {
        DatasetSchema {
            label: "y".into(),
            favorable: "1".into(),
            features: features
                .iter()
                .map(|(name, kind)| FeatureColumn {
                    name: (*name).into(),
                    kind: *kind,
                })
                .collect(),
            sensitive: vec![SensitiveAttribute {
                name: "g".into(),
                privileged: "a".into(),
            }],
        }
    }

    #[test]
    fn standardizes_with_population_std() {
        let s = schema(&[("x", FeatureKind::Numeric)]);
        let d =
            load_dataset_from_reader("x,g,y\n1,a,1\n2,a,0\n3,a,1\n".as_bytes(), &s).unwrap();
        let enc = FeatureEncoder::fit(&d).unwrap();
        let m = enc.encode(&d).unwrap();
        // Population std of {1,2,3} is sqrt(2/3); (1-2)/sqrt(2/3) = -1.2247...
        assert!((m.row(0)[0] + 1.224744871391589).abs() < 1e-12);
        assert!(m.row(1)[0].abs() < 1e-12);
        assert!((m.row(2)[0] - 1.224744871391589).abs() < 1e-12);
    }

    #[test]
    fn zero_variance_column_dropped_and_flagged() {
        let s = schema(&[("x", FeatureKind::Numeric), ("z", FeatureKind::Numeric)]);
        let d = load_dataset_from_reader(
            "x,z,g,y\n1,5,a,1\n2,5,a,0\n3,5,a,1\n".as_bytes(),
            &s,
        )
        .unwrap();
        let enc = FeatureEncoder::fit(&d).unwrap();
        assert_eq!(enc.width(), 1);
        assert_eq!(enc.flags.len(), 1);
        assert!(enc.flags[0].contains("`z`"));
        let m = enc.encode(&d).unwrap();
        assert_eq!(m.cols(), 1);
    }

    #[test]
    fn one_hot_uses_sorted_training_levels() {
        let s = schema(&[("c", FeatureKind::Categorical)]);
        let d = load_dataset_from_reader(
            "c,g,y\nred,a,1\nblue,a,0\ngreen,a,1\nred,a,0\n".as_bytes(),
            &s,
        )
        .unwrap();
        let enc = FeatureEncoder::fit(&d).unwrap();
        assert_eq!(enc.width(), 3); // blue, green, red
        let m = enc.encode(&d).unwrap();
        assert_eq!(m.row(0), [0.0, 0.0, 1.0]); // red
        assert_eq!(m.row(1), [1.0, 0.0, 0.0]); // blue
        assert_eq!(m.row(2), [0.0, 1.0, 0.0]); // green
    }

    #[test]
    fn unseen_test_level_encodes_to_zeros() {
        let s = schema(&[("c", FeatureKind::Categorical)]);
        let train =
            load_dataset_from_reader("c,g,y\nred,a,1\nblue,a,0\n".as_bytes(), &s).unwrap();
        let test = load_dataset_from_reader("c,g,y\npurple,a,1\n".as_bytes(), &s).unwrap();
        let enc = FeatureEncoder::fit(&train).unwrap();
        let m = enc.encode(&test).unwrap();
        assert_eq!(m.row(0), [0.0, 0.0]);
    }

    #[test]
    fn encoding_is_a_pure_function_of_the_dictionary() {
        let s = schema(&[("x", FeatureKind::Numeric), ("c", FeatureKind::Categorical)]);
        let train = load_dataset_from_reader(
            "x,c,g,y\n1,red,a,1\n4,blue,a,0\n2,red,a,1\n".as_bytes(),
            &s,
        )
        .unwrap();
        let enc = FeatureEncoder::fit(&train).unwrap();
        let a = enc.encode(&train).unwrap();
        let b = enc.encode(&train).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fingerprint_tracks_dictionary_not_data() {
        let s = schema(&[("x", FeatureKind::Numeric)]);
        let d1 =
            load_dataset_from_reader("x,g,y\n1,a,1\n2,a,0\n3,a,1\n".as_bytes(), &s).unwrap();
        let d2 =
            load_dataset_from_reader("x,g,y\n1,a,1\n2,a,0\n4,a,1\n".as_bytes(), &s).unwrap();
        let e1 = FeatureEncoder::fit(&d1).unwrap();
        let e1_again = FeatureEncoder::fit(&d1).unwrap();
        let e2 = FeatureEncoder::fit(&d2).unwrap();
        assert_eq!(e1.fingerprint(), e1_again.fingerprint());
        assert_ne!(e1.fingerprint(), e2.fingerprint());
    }
}
