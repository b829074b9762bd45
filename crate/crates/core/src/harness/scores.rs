//! Score-file adapter: methods implemented elsewhere enter the audit as CSV
//! files of per-run predictions. Columns: `run_id`, `y_true`, `y_pred`,
//! `y_prob`, plus one column per sensitive attribute (raw values, same
//! conventions as the dataset CSV).

use std::io::Read;
use std::path::Path;

use crate::data::dataset::Dataset;
use crate::data::groups::{assign_groups, GroupAssignment};
use crate::data::schema::DatasetSchema;
use crate::error::{Error, Result};
use crate::metrics::PredictionSet;

/// One run's worth of externally produced predictions, still carrying the
/// raw sensitive values so groups can be assigned under any convention.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSet {
    pub run_id: usize,
    pub y_true: Vec<u8>,
    pub y_pred: Vec<u8>,
    pub y_prob: Vec<f64>,
    /// Aligned with the schema's sensitive attributes.
    pub sensitive: Vec<Vec<String>>,
}

impl ScoreSet {
    pub fn len(&self) -> usize {
        self.y_true.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y_true.is_empty()
    }
}

fn parse_binary(cell: &str, column: &str, row: usize) -> Result<u8> {
    match cell {
        "0" => Ok(0),
        "1" => Ok(1),
        other => Err(Error::ScoreFile(format!(
            "column {column:?} row {row}: expected 0 or 1, got {other:?}"
        ))),
    }
}

/// Reads a score CSV, grouping rows into one `ScoreSet` per `run_id`
/// (ascending). Labels and predictions must be 0/1, probabilities must lie
/// in [0, 1], and every run needs at least two rows.
pub fn load_scores_from_reader<R: Read>(
    reader: R,
    schema: &DatasetSchema,
) -> Result<Vec<ScoreSet>> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let position_of = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let run_col = position_of("run_id")?;
    let true_col = position_of("y_true")?;
    let pred_col = position_of("y_pred")?;
    let prob_col = position_of("y_prob")?;
    let sens_cols: Vec<usize> = schema
        .sensitive
        .iter()
        .map(|s| position_of(&s.name))
        .collect::<Result<_>>()?;

    let mut by_run: std::collections::BTreeMap<usize, ScoreSet> = std::collections::BTreeMap::new();
    let mut row = 1usize; // 1-based data row, header excluded
    for record in rdr.records() {
        let record = record?;
        let cell = |col: usize| record.get(col).unwrap_or("").trim().to_string();
        let run_id: usize = cell(run_col).parse().map_err(|_| {
            Error::ScoreFile(format!(
                "column \"run_id\" row {row}: expected a non-negative integer, got {:?}",
                cell(run_col)
            ))
        })?;
        let y_true = parse_binary(&cell(true_col), "y_true", row)?;
        let y_pred = parse_binary(&cell(pred_col), "y_pred", row)?;
        let y_prob: f64 = cell(prob_col).parse().map_err(|_| {
            Error::ScoreFile(format!(
                "column \"y_prob\" row {row}: expected a number, got {:?}",
                cell(prob_col)
            ))
        })?;
        if !(0.0..=1.0).contains(&y_prob) {
            return Err(Error::ScoreFile(format!(
                "column \"y_prob\" row {row}: probability {y_prob} outside [0, 1]"
            )));
        }
        let set = by_run.entry(run_id).or_insert_with(|| ScoreSet {
            run_id,
            y_true: Vec::new(),
            y_pred: Vec::new(),
            y_prob: Vec::new(),
            sensitive: vec![Vec::new(); sens_cols.len()],
        });
        set.y_true.push(y_true);
        set.y_pred.push(y_pred);
        set.y_prob.push(y_prob);
        for (a, &col) in sens_cols.iter().enumerate() {
            set.sensitive[a].push(cell(col));
        }
        row += 1;
    }
    if by_run.is_empty() {
        return Err(Error::EmptyInput("score file has no data rows".into()));
    }
    for set in by_run.values() {
        if set.len() < 2 {
            return Err(Error::ScoreFile(format!(
                "run {} has only {} row(s); at least 2 are required",
                set.run_id,
                set.len()
            )));
        }
    }
    Ok(by_run.into_values().collect())
}

pub fn load_scores(path: &Path, schema: &DatasetSchema) -> Result<Vec<ScoreSet>> {
    let file = std::fs::File::open(path)?;
    load_scores_from_reader(file, schema)
}

/// Writes score sets back to CSV in the `load_scores` column layout.
pub fn write_scores(path: &Path, sets: &[ScoreSet], schema: &DatasetSchema) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    let mut header = vec![
        "run_id".to_string(),
        "y_true".to_string(),
        "y_pred".to_string(),
        "y_prob".to_string(),
    ];
    header.extend(schema.sensitive.iter().map(|s| s.name.clone()));
    wtr.write_record(&header)?;
    for set in sets {
        for i in 0..set.len() {
            let mut record = vec![
                set.run_id.to_string(),
                set.y_true[i].to_string(),
                set.y_pred[i].to_string(),
                format!("{}", set.y_prob[i]),
            ];
            for col in &set.sensitive {
                record.push(col[i].clone());
            }
            wtr.write_record(&record)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// A featureless dataset carrying only sensitive columns and true labels,
/// so the group-assignment machinery can run on score rows.
fn sensitive_only_dataset(
    schema: &DatasetSchema,
    sensitive: Vec<Vec<String>>,
    labels: Vec<u8>,
) -> Dataset {
    Dataset {
        schema: DatasetSchema {
            label: schema.label.clone(),
            favorable: schema.favorable.clone(),
            features: Vec::new(),
            sensitive: schema.sensitive.clone(),
        },
        features: Vec::new(),
        sensitive,
        labels,
    }
}

/// Builds one group assignment over all score rows (pooled across runs,
/// favored rates from the pooled true labels) and converts each run into a
/// `PredictionSet` under it.
pub fn to_prediction_sets(
    sets: &[ScoreSet],
    schema: &DatasetSchema,
) -> Result<(GroupAssignment, Vec<PredictionSet>)> {
    if sets.is_empty() {
        return Err(Error::EmptyInput("no score sets".into()));
    }
    let n_attrs = schema.sensitive.len();
    let mut pooled_sensitive = vec![Vec::new(); n_attrs];
    let mut pooled_labels = Vec::new();
    for set in sets {
        for a in 0..n_attrs {
            pooled_sensitive[a].extend(set.sensitive[a].iter().cloned());
        }
        pooled_labels.extend(set.y_true.iter().copied());
    }
    let pooled = sensitive_only_dataset(schema, pooled_sensitive, pooled_labels);
    let groups = assign_groups(&pooled, &pooled)?;

    let mut out = Vec::with_capacity(sets.len());
    for set in sets {
        let d = sensitive_only_dataset(schema, set.sensitive.clone(), set.y_true.clone());
        let ids = groups.ids_for(&d)?;
        out.push(PredictionSet::new(
            set.y_true.clone(),
            set.y_pred.clone(),
            set.y_prob.clone(),
            ids,
            set.run_id,
        )?);
    }
    Ok((groups, out))
}

/// Converts one run's scores into a `PredictionSet` under an existing group
/// assignment (the experiment's), so external methods line up with the
/// built-in columns.
pub fn score_set_under(
    set: &ScoreSet,
    schema: &DatasetSchema,
    groups: &GroupAssignment,
) -> Result<PredictionSet> {
    let d = sensitive_only_dataset(schema, set.sensitive.clone(), set.y_true.clone());
    let ids = groups.ids_for(&d)?;
    PredictionSet::new(
        set.y_true.clone(),
        set.y_pred.clone(),
        set.y_prob.clone(),
        ids,
        set.run_id,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::schema::SensitiveAttribute;

    fn schema() -> DatasetSchema {
        DatasetSchema {
            label: "y".into(),
            favorable: "1".into(),
            features: Vec::new(),
            sensitive: vec![SensitiveAttribute {
                name: "sex".into(),
                privileged: "m".into(),
            }],
        }
    }

    const GOOD: &str = "run_id,y_true,y_pred,y_prob,sex\n\
                        0,1,1,0.9,m\n0,0,0,0.2,f\n0,1,0,0.4,f\n\
                        1,1,1,0.8,m\n1,0,1,0.6,f\n";

    #[test]
    fn rows_group_into_runs_in_ascending_order() {
        let sets = load_scores_from_reader(GOOD.as_bytes(), &schema()).unwrap();
        assert_eq!(sets.len(), 2);
        assert_eq!(sets[0].run_id, 0);
        assert_eq!(sets[0].len(), 3);
        assert_eq!(sets[1].run_id, 1);
        assert_eq!(sets[1].len(), 2);
        assert_eq!(sets[0].y_prob, vec![0.9, 0.2, 0.4]);
        assert_eq!(sets[0].sensitive[0], vec!["m", "f", "f"]);
    }

    #[test]
    fn out_of_range_probability_names_the_row() {
        let bad = "run_id,y_true,y_pred,y_prob,sex\n0,1,1,0.9,m\n0,0,0,1.2,f\n";
        let err = load_scores_from_reader(bad.as_bytes(), &schema()).unwrap_err();
        assert!(err.to_string().contains("row 2"), "{err}");
    }

    #[test]
    fn missing_column_and_tiny_run_rejected() {
        let missing = "run_id,y_true,y_pred,sex\n0,1,1,m\n0,0,0,f\n";
        assert!(matches!(
            load_scores_from_reader(missing.as_bytes(), &schema()),
            Err(Error::MissingColumn(_))
        ));
        let tiny = "run_id,y_true,y_pred,y_prob,sex\n0,1,1,0.9,m\n0,0,0,0.2,f\n1,1,1,0.8,m\n";
        let err = load_scores_from_reader(tiny.as_bytes(), &schema()).unwrap_err();
        assert!(err.to_string().contains("run 1"), "{err}");
    }

    #[test]
    fn non_binary_label_rejected() {
        let bad = "run_id,y_true,y_pred,y_prob,sex\n0,2,1,0.9,m\n0,0,0,0.2,f\n";
        assert!(load_scores_from_reader(bad.as_bytes(), &schema()).is_err());
    }

    #[test]
    fn scores_round_trip_through_csv() {
        let sets = load_scores_from_reader(GOOD.as_bytes(), &schema()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scores.csv");
        write_scores(&path, &sets, &schema()).unwrap();
        let back = load_scores(&path, &schema()).unwrap();
        assert_eq!(sets, back);
    }

    #[test]
    fn prediction_sets_carry_rank_order_groups() {
        let sets = load_scores_from_reader(GOOD.as_bytes(), &schema()).unwrap();
        let (groups, preds) = to_prediction_sets(&sets, &schema()).unwrap();
        assert_eq!(groups.report_labels(), vec!["p", "u"]);
        // Privileged value "m" is group 0 regardless of favored rates.
        assert_eq!(preds[0].group_of, vec![0, 1, 1]);
        assert_eq!(preds[1].group_of, vec![0, 1]);
        assert_eq!(preds[0].run_id, 0);
    }
}
