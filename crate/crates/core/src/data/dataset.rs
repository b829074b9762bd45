use std::collections::HashSet;
use std::path::Path;

use crate::data::schema::{DatasetSchema, FeatureKind};
use crate::error::{Error, Result};

/// One feature column, parsed according to its declared kind.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Numeric(Vec<f64>),
    Categorical(Vec<String>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn take(&self, indices: &[usize]) -> ColumnData {
        match self {
            ColumnData::Numeric(v) => {
                ColumnData::Numeric(indices.iter().map(|&i| v[i]).collect())
            }
            ColumnData::Categorical(v) => {
                ColumnData::Categorical(indices.iter().map(|&i| v[i].clone()).collect())
            }
        }
    }
}

/// An in-memory classification dataset: parsed feature columns, raw values
/// of each sensitive attribute, and the binarized label vector. Row order is
/// exactly the order of the source file and is preserved by every operation
/// that derives a new `Dataset`.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub schema: DatasetSchema,
    /// Aligned with `schema.features`.
    pub features: Vec<ColumnData>,
    /// Aligned with `schema.sensitive`; raw string values per row.
    pub sensitive: Vec<Vec<String>>,
    /// 1 where the raw label equals the favorable value, else 0.
    pub labels: Vec<u8>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// New dataset containing the given rows (in the given order).
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            features: self.features.iter().map(|c| c.take(indices)).collect(),
            sensitive: self
                .sensitive
                .iter()
                .map(|col| indices.iter().map(|&i| col[i].clone()).collect())
                .collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Reinterprets the dataset under a schema restricted to a subset of its
    /// sensitive attributes (the task view of a multi-attribute dataset).
    pub fn with_sensitive_subset(&self, names: &[String]) -> Result<Dataset> {
        let schema = self.schema.with_sensitive_subset(names)?;
        let sensitive = schema
            .sensitive
            .iter()
            .map(|attr| {
                let idx = self
                    .schema
                    .sensitive
                    .iter()
                    .position(|a| a.name == attr.name)
                    .expect("subset attribute came from this schema");
                self.sensitive[idx].clone()
            })
            .collect();
        Ok(Dataset {
            schema,
            features: self.features.clone(),
            sensitive,
            labels: self.labels.clone(),
        })
    }
}

/// Loads a comma-separated UTF-8 file with a header row, keeping only the
/// columns the schema declares. The label column must carry at most two
/// distinct raw values; rows whose label equals `schema.favorable` become 1.
pub fn load_dataset(path: &Path, schema: &DatasetSchema) -> Result<Dataset> {
    schema.validate()?;
    let file = std::fs::File::open(path)?;
    load_dataset_from_reader(file, schema)
}

pub fn load_dataset_from_reader<R: std::io::Read>(
    reader: R,
    schema: &DatasetSchema,
) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let position_of = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };

    let label_idx = position_of(&schema.label)?;
    let feature_idx: Vec<usize> = schema
        .features
        .iter()
        .map(|f| position_of(&f.name))
        .collect::<Result<_>>()?;
    let sensitive_idx: Vec<usize> = schema
        .sensitive
        .iter()
        .map(|s| position_of(&s.name))
        .collect::<Result<_>>()?;

    let mut features: Vec<ColumnData> = schema
        .features
        .iter()
        .map(|f| match f.kind {
            FeatureKind::Numeric => ColumnData::Numeric(Vec::new()),
            FeatureKind::Categorical => ColumnData::Categorical(Vec::new()),
        })
        .collect();
    let mut sensitive: Vec<Vec<String>> = vec![Vec::new(); schema.sensitive.len()];
    let mut labels: Vec<u8> = Vec::new();
    let mut label_values: HashSet<String> = HashSet::new();

    for (row_no, record) in rdr.records().enumerate() {
        let record = record?;
        let raw_label = record.get(label_idx).unwrap_or("").trim().to_string();
        label_values.insert(raw_label.clone());
        labels.push(u8::from(raw_label == schema.favorable));

        for (slot, (&col, decl)) in feature_idx.iter().zip(&schema.features).enumerate() {
            let cell = record.get(col).unwrap_or("").trim();
            match &mut features[slot] {
                ColumnData::Numeric(v) => {
                    let parsed: f64 = cell.parse().map_err(|_| Error::BadNumeric {
                        column: decl.name.clone(),
                        row: row_no + 2, // 1-based, counting the header line
                        value: cell.to_string(),
                    })?;
                    v.push(parsed);
                }
                ColumnData::Categorical(v) => v.push(cell.to_string()),
            }
        }
        for (slot, &col) in sensitive_idx.iter().enumerate() {
            sensitive[slot].push(record.get(col).unwrap_or("").trim().to_string());
        }
    }

    if labels.is_empty() {
        return Err(Error::EmptyInput("file has a header but no data rows".into()));
    }
    if label_values.len() > 2 {
        return Err(Error::NonBinaryLabel {
            column: schema.label.clone(),
            found: label_values.len(),
        });
    }

    Ok(Dataset {
        schema: schema.clone(),
        features,
        sensitive,
        labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::schema::{FeatureColumn, SensitiveAttribute};

    fn schema() -> DatasetSchema {
        DatasetSchema {
            label: "outcome".into(),
            favorable: "yes".into(),
            features: vec![
                FeatureColumn {
                    name: "score".into(),
                    kind: FeatureKind::Numeric,
                },
                FeatureColumn {
                    name: "group".into(),
                    kind: FeatureKind::Categorical,
                },
            ],
            sensitive: vec![SensitiveAttribute {
                name: "group".into(),
                privileged: "a".into(),
            }],
        }
    }

    fn load(text: &str) -> Result<Dataset> {
        load_dataset_from_reader(text.as_bytes(), &schema())
    }

    #[test]
    fn loads_and_binarizes_labels() {
        let d = load("score,group,outcome\n1.5,a,yes\n2.0,b,no\n0.5,a,no\n").unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.labels, vec![1, 0, 0]);
        assert_eq!(d.sensitive[0], vec!["a", "b", "a"]);
        match &d.features[0] {
            ColumnData::Numeric(v) => assert_eq!(v, &vec![1.5, 2.0, 0.5]),
            other => panic!("expected numeric column, got {other:?}"),
        }
    }

    #[test]
    fn single_row_favorable_label() {
        let d = load("score,group,outcome\n1.0,a,yes\n").unwrap();
        assert_eq!(d.labels, vec![1]);
    }

    #[test]
    fn missing_column_is_reported() {
        let err = load_dataset_from_reader("score,outcome\n1.0,yes\n".as_bytes(), &schema())
            .unwrap_err();
        assert!(matches!(err, Error::MissingColumn(c) if c == "group"));
    }

    #[test]
    fn unparseable_numeric_is_reported_with_position() {
        let err = load("score,group,outcome\n1.0,a,yes\noops,b,no\n").unwrap_err();
        match err {
            Error::BadNumeric { column, row, value } => {
                assert_eq!(column, "score");
                assert_eq!(row, 3);
                assert_eq!(value, "oops");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn three_label_values_rejected() {
        let err = load("score,group,outcome\n1,a,yes\n2,b,no\n3,a,maybe\n").unwrap_err();
        assert!(matches!(err, Error::NonBinaryLabel { found: 3, .. }));
    }

    #[test]
    fn empty_file_rejected() {
        let err = load("score,group,outcome\n").unwrap_err();
        assert!(matches!(err, Error::EmptyInput(_)));
    }

    #[test]
    fn select_preserves_order() {
        let d = load("score,group,outcome\n1,a,yes\n2,b,no\n3,a,yes\n4,b,no\n").unwrap();
        let s = d.select(&[2, 0]);
        assert_eq!(s.labels, vec![1, 1]);
        assert_eq!(s.sensitive[0], vec!["a", "a"]);
        match &s.features[0] {
            ColumnData::Numeric(v) => assert_eq!(v, &vec![3.0, 1.0]),
            other => panic!("expected numeric column, got {other:?}"),
        }
    }
}
