use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::path::Path;

use crate::error::{Error, Result};

/// How a feature column is interpreted during encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureColumn {
    pub name: String,
    pub kind: FeatureKind,
}

/// A protected attribute together with the value designating its
/// privileged side; every other observed value counts as unprivileged.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensitiveAttribute {
    pub name: String,
    pub privileged: String,
}

/// Declares how a raw CSV maps onto a classification task: which column is
/// the label (and which raw value is the favorable outcome), which columns
/// feed the model, and which columns are protected attributes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub label: String,
    pub favorable: String,
    pub features: Vec<FeatureColumn>,
    pub sensitive: Vec<SensitiveAttribute>,
}

impl DatasetSchema {
    pub fn from_json(text: &str) -> Result<Self> {
        let schema: DatasetSchema = serde_json::from_str(text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    /// Checks the structural rules: at least one sensitive attribute, no
    /// duplicate declarations, and the label column disjoint from both
    /// feature and sensitive columns.
    pub fn validate(&self) -> Result<()> {
        if self.sensitive.is_empty() {
            return Err(Error::Schema(
                "at least one sensitive attribute is required".into(),
            ));
        }
        let mut feature_names = HashSet::new();
        for f in &self.features {
            if !feature_names.insert(f.name.as_str()) {
                return Err(Error::Schema(format!(
                    "feature column `{}` declared twice",
                    f.name
                )));
            }
        }
        let mut sensitive_names = HashSet::new();
        for s in &self.sensitive {
            if !sensitive_names.insert(s.name.as_str()) {
                return Err(Error::Schema(format!(
                    "sensitive attribute `{}` declared twice",
                    s.name
                )));
            }
        }
        if feature_names.contains(self.label.as_str())
            || sensitive_names.contains(self.label.as_str())
        {
            return Err(Error::Schema(format!(
                "label column `{}` may not double as a feature or sensitive attribute",
                self.label
            )));
        }
        Ok(())
    }

    /// Restricts the schema to a subset of its sensitive attributes,
    /// keeping declaration order. Used to carve one task (e.g. sex-only)
    /// out of a schema that declares several protected attributes.
    pub fn with_sensitive_subset(&self, names: &[String]) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::Config(
                "task must name at least one sensitive attribute".into(),
            ));
        }
        let mut subset = Vec::new();
        for s in &self.sensitive {
            if names.iter().any(|n| n == &s.name) {
                subset.push(s.clone());
            }
        }
        for n in names {
            if !self.sensitive.iter().any(|s| &s.name == n) {
                return Err(Error::Config(format!(
                    "task names unknown sensitive attribute `{n}`"
                )));
            }
        }
        Ok(DatasetSchema {
            label: self.label.clone(),
            favorable: self.favorable.clone(),
            features: self.features.clone(),
            sensitive: subset,
        })
    }

    /// Every column the loader must find in the CSV header.
    pub fn required_columns(&self) -> Vec<&str> {
        let mut cols: Vec<&str> = vec![self.label.as_str()];
        cols.extend(self.features.iter().map(|f| f.name.as_str()));
        for s in &self.sensitive {
            if !cols.contains(&s.name.as_str()) {
                cols.push(s.name.as_str());
            }
        }
        cols
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn adult_like() -> DatasetSchema {
        DatasetSchema {
            label: "income".into(),
            favorable: ">50K".into(),
            features: vec![
                FeatureColumn {
                    name: "age".into(),
                    kind: FeatureKind::Numeric,
                },
                FeatureColumn {
                    name: "sex".into(),
                    kind: FeatureKind::Categorical,
                },
            ],
            sensitive: vec![SensitiveAttribute {
                name: "sex".into(),
                privileged: "Male".into(),
            }],
        }
    }

    #[test]
    fn valid_schema_passes() {
        adult_like().validate().unwrap();
    }

    #[test]
    fn rejects_label_as_feature() {
        let mut s = adult_like();
        s.features.push(FeatureColumn {
            name: "income".into(),
            kind: FeatureKind::Categorical,
        });
        assert!(matches!(s.validate(), Err(Error::Schema(_))));
    }

    #[test]
    fn rejects_no_sensitive() {
        let mut s = adult_like();
        s.sensitive.clear();
        assert!(matches!(s.validate(), Err(Error::Schema(_))));
    }

    #[test]
    fn subset_keeps_declaration_order() {
        let mut s = adult_like();
        s.sensitive.push(SensitiveAttribute {
            name: "race".into(),
            privileged: "White".into(),
        });
        let sub = s
            .with_sensitive_subset(&["race".into(), "sex".into()])
            .unwrap();
        let names: Vec<_> = sub.sensitive.iter().map(|a| a.name.as_str()).collect();
        assert_eq!(names, ["sex", "race"]);
    }

    #[test]
    fn subset_rejects_unknown_attribute() {
        let s = adult_like();
        assert!(s.with_sensitive_subset(&["ethnicity".into()]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let s = adult_like();
        let text = serde_json::to_string(&s).unwrap();
        let back = DatasetSchema::from_json(&text).unwrap();
        assert_eq!(s, back);
    }
}
