//! Bundled dataset recipes. Each recipe pairs a schema file with a seeded
//! generator that produces a desk-scale census- or credit-shaped CSV with
//! the group structure the toolkit is usually exercised on: a favorable
//! outcome that is rarer for the unprivileged side of each sensitive
//! attribute, plus enough feature signal for a linear model to learn.

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::schema::DatasetSchema;
use crate::error::{Error, Result};

pub const ADULT_SCHEMA_JSON: &str = include_str!("../../recipes/adult.schema.json");
pub const GERMAN_SCHEMA_JSON: &str = include_str!("../../recipes/german.schema.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recipe {
    Adult,
    German,
}

impl Recipe {
    pub fn parse(name: &str) -> Result<Recipe> {
        match name.to_ascii_lowercase().as_str() {
            "adult" => Ok(Recipe::Adult),
            "german" => Ok(Recipe::German),
            other => Err(Error::Config(format!(
                "unknown recipe `{other}` (available: adult, german)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Recipe::Adult => "adult",
            Recipe::German => "german",
        }
    }

    pub fn schema_json(&self) -> &'static str {
        match self {
            Recipe::Adult => ADULT_SCHEMA_JSON,
            Recipe::German => GERMAN_SCHEMA_JSON,
        }
    }

    pub fn schema(&self) -> DatasetSchema {
        DatasetSchema::from_json(self.schema_json()).expect("bundled schema is valid")
    }

    /// Row count mirroring the source data at desk scale.
    pub fn default_rows(&self) -> usize {
        match self {
            Recipe::Adult => 4000,
            Recipe::German => 1000,
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Categorical draw from (value, weight) pairs; weights need not sum to 1.
fn pick<'a, R: Rng>(rng: &mut R, table: &[(&'a str, f64)]) -> &'a str {
    let total: f64 = table.iter().map(|(_, w)| w).sum();
    let mut x = rng.gen::<f64>() * total;
    for (value, w) in table {
        if x < *w {
            return value;
        }
        x -= w;
    }
    table.last().expect("non-empty table").0
}

/// Standard normal via Box-Muller; two uniforms per draw keeps the stream
/// layout independent of any library's rejection sampling.
fn normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen::<f64>().max(1e-12);
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn clamp_round(x: f64, lo: f64, hi: f64) -> i64 {
    x.max(lo).min(hi).round() as i64
}

pub fn generate_csv<W: Write>(recipe: Recipe, rows: usize, seed: u64, out: W) -> Result<()> {
    if rows == 0 {
        return Err(Error::Config("cannot generate 0 rows".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = csv::Writer::from_writer(out);
    match recipe {
        Recipe::Adult => {
            w.write_record([
                "age",
                "workclass",
                "education-num",
                "marital-status",
                "occupation",
                "relationship",
                "race",
                "sex",
                "capital-gain",
                "capital-loss",
                "hours-per-week",
                "native-country",
                "income",
            ])?;
            for _ in 0..rows {
                write_adult_row(&mut rng, &mut w)?;
            }
        }
        Recipe::German => {
            w.write_record([
                "duration",
                "credit_amount",
                "employment",
                "housing",
                "purpose",
                "sex",
                "age",
                "credit",
            ])?;
            for _ in 0..rows {
                write_german_row(&mut rng, &mut w)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn write_adult_row<W: Write>(rng: &mut ChaCha8Rng, w: &mut csv::Writer<W>) -> Result<()> {
    let male = rng.gen::<f64>() < 0.67;
    let sex = if male { "Male" } else { "Female" };
    let race = pick(
        rng,
        &[
            ("White", 0.855),
            ("Black", 0.09),
            ("Asian-Pac-Islander", 0.035),
            ("Amer-Indian-Eskimo", 0.02),
        ],
    );
    let age = clamp_round(38.5 + 13.0 * normal(rng), 17.0, 90.0);
    let edu = clamp_round(10.1 + 2.6 * normal(rng), 1.0, 16.0);
    let marital = if male {
        pick(
            rng,
            &[
                ("Married-civ-spouse", 0.61),
                ("Never-married", 0.26),
                ("Divorced", 0.10),
                ("Widowed", 0.03),
            ],
        )
    } else {
        pick(
            rng,
            &[
                ("Married-civ-spouse", 0.15),
                ("Never-married", 0.44),
                ("Divorced", 0.28),
                ("Widowed", 0.13),
            ],
        )
    };
    let married = marital == "Married-civ-spouse";
    let occupation = pick(
        rng,
        &[
            ("Exec-managerial", 0.13),
            ("Prof-specialty", 0.13),
            ("Craft-repair", 0.13),
            ("Adm-clerical", 0.12),
            ("Sales", 0.11),
            ("Other-service", 0.10),
            ("Machine-op-inspct", 0.07),
            ("Transport-moving", 0.05),
            ("Handlers-cleaners", 0.05),
            ("Tech-support", 0.03),
            ("Farming-fishing", 0.03),
            ("Protective-serv", 0.02),
            ("Priv-house-serv", 0.02),
            ("Armed-Forces", 0.01),
        ],
    );
    let relationship = if married {
        if male {
            "Husband"
        } else {
            "Wife"
        }
    } else {
        pick(
            rng,
            &[
                ("Not-in-family", 0.60),
                ("Own-child", 0.25),
                ("Unmarried", 0.15),
            ],
        )
    };
    let workclass = pick(
        rng,
        &[
            ("Private", 0.70),
            ("Self-emp-not-inc", 0.08),
            ("Self-emp-inc", 0.04),
            ("Local-gov", 0.07),
            ("State-gov", 0.05),
            ("Federal-gov", 0.04),
            ("Without-pay", 0.02),
        ],
    );
    let hours = clamp_round(
        40.0 + 11.0 * normal(rng) + if married { 2.0 } else { 0.0 },
        1.0,
        99.0,
    );
    let capital_gain = if rng.gen::<f64>() < 0.92 {
        0
    } else {
        clamp_round((7.5 + 1.1 * normal(rng)).exp(), 100.0, 99999.0)
    };
    let capital_loss = if rng.gen::<f64>() < 0.95 {
        0
    } else {
        clamp_round((7.0 + 0.4 * normal(rng)).exp(), 50.0, 4356.0)
    };
    let country = pick(
        rng,
        &[
            ("United-States", 0.90),
            ("Mexico", 0.04),
            ("Philippines", 0.015),
            ("Germany", 0.01),
            ("Canada", 0.01),
            ("India", 0.01),
            ("Other", 0.015),
        ],
    );

    let exec_or_prof = occupation == "Exec-managerial" || occupation == "Prof-specialty";
    let mut z = -3.15;
    z += 0.030 * (age as f64 - 38.0) - 0.0008 * (age as f64 - 38.0).powi(2);
    z += 0.32 * (edu as f64 - 10.0);
    z += 0.022 * (hours as f64 - 40.0);
    if married {
        z += 1.20;
    }
    if exec_or_prof {
        z += 0.55;
    }
    if occupation == "Tech-support" || occupation == "Protective-serv" {
        z += 0.25;
    }
    if capital_gain > 5000 {
        z += 1.10;
    } else if capital_gain > 0 {
        z += 0.30;
    }
    if workclass == "Self-emp-inc" {
        z += 0.15;
    }
    if male {
        z += 0.50;
    }
    if race == "White" {
        z += 0.40;
    }
    let income = if rng.gen::<f64>() < sigmoid(z) {
        ">50K"
    } else {
        "<=50K"
    };

    w.write_record([
        age.to_string().as_str(),
        workclass,
        edu.to_string().as_str(),
        marital,
        occupation,
        relationship,
        race,
        sex,
        capital_gain.to_string().as_str(),
        capital_loss.to_string().as_str(),
        hours.to_string().as_str(),
        country,
        income,
    ])?;
    Ok(())
}

fn write_german_row<W: Write>(rng: &mut ChaCha8Rng, w: &mut csv::Writer<W>) -> Result<()> {
    let male = rng.gen::<f64>() < 0.69;
    let sex = if male { "male" } else { "female" };
    let aged = rng.gen::<f64>() < 0.81;
    let age = if aged { "aged" } else { "young" };
    let duration = clamp_round(4.0 + (2.7 + 0.55 * normal(rng)).exp(), 4.0, 72.0);
    let amount = clamp_round((7.8 + 0.7 * normal(rng)).exp(), 250.0, 20000.0);
    let employment = if aged {
        pick(
            rng,
            &[
                ("long", 0.45),
                ("medium", 0.32),
                ("short", 0.15),
                ("unemployed", 0.08),
            ],
        )
    } else {
        pick(
            rng,
            &[
                ("long", 0.18),
                ("medium", 0.40),
                ("short", 0.27),
                ("unemployed", 0.15),
            ],
        )
    };
    let housing = pick(rng, &[("own", 0.71), ("rent", 0.18), ("free", 0.11)]);
    let purpose = pick(
        rng,
        &[
            ("radio_tv", 0.28),
            ("car_new", 0.23),
            ("furniture", 0.18),
            ("car_used", 0.10),
            ("business", 0.10),
            ("education", 0.06),
            ("repairs", 0.03),
            ("other", 0.02),
        ],
    );

    // Centered low with wide spread so the favorable-odds boundary cuts
    // through the population instead of passing above it; group terms are
    // large enough to move cases across that boundary.
    let mut z = -0.70;
    z += -0.055 * (duration as f64 - 20.0);
    z += -0.55 * ((amount as f64).ln() - 7.8);
    if aged {
        z += 0.90;
    }
    if male {
        z += 0.60;
    }
    match employment {
        "long" => z += 0.70,
        "medium" => z += 0.20,
        "unemployed" => z -= 0.80,
        _ => {}
    }
    match housing {
        "own" => z += 0.40,
        "rent" => z -= 0.20,
        _ => {}
    }
    match purpose {
        "car_used" => z += 0.30,
        "business" => z -= 0.20,
        _ => {}
    }
    let credit = if rng.gen::<f64>() < sigmoid(z) {
        "good"
    } else {
        "bad"
    };

    w.write_record([
        duration.to_string().as_str(),
        amount.to_string().as_str(),
        employment,
        housing,
        purpose,
        sex,
        age,
        credit,
    ])?;
    Ok(())
}

/// Writes `<recipe>.csv` and `<recipe>.schema.json` into `dir`, returning
/// the two paths.
pub fn write_bundle(
    recipe: Recipe,
    rows: usize,
    seed: u64,
    dir: &Path,
) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{}.csv", recipe.name()));
    let schema_path = dir.join(format!("{}.schema.json", recipe.name()));
    let file = std::fs::File::create(&csv_path)?;
    generate_csv(recipe, rows, seed, file)?;
    std::fs::write(&schema_path, recipe.schema_json())?;
    Ok((csv_path, schema_path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::dataset::load_dataset_from_reader;

    fn favored_rate(d: &crate::data::dataset::Dataset, attr: usize, value: &str) -> f64 {
        let mut num = 0usize;
        let mut den = 0usize;
        for i in 0..d.len() {
            if d.sensitive[attr][i] == value {
                den += 1;
                num += d.labels[i] as usize;
            }
        }
        num as f64 / den as f64
    }

    #[test]
    fn adult_generation_is_deterministic() {
        let mut a = Vec::new();
        let mut b = Vec::new();
        generate_csv(Recipe::Adult, 200, 7, &mut a).unwrap();
        generate_csv(Recipe::Adult, 200, 7, &mut b).unwrap();
        assert_eq!(a, b);
        let mut c = Vec::new();
        generate_csv(Recipe::Adult, 200, 8, &mut c).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn adult_matches_its_schema_and_biases_toward_privileged() {
        let mut buf = Vec::new();
        generate_csv(Recipe::Adult, 3000, 42, &mut buf).unwrap();
        let schema = Recipe::Adult.schema();
        let d = load_dataset_from_reader(buf.as_slice(), &schema).unwrap();
        assert_eq!(d.len(), 3000);
        let male = favored_rate(&d, 0, "Male");
        let female = favored_rate(&d, 0, "Female");
        assert!(
            male > female + 0.08,
            "male rate {male:.3} should clearly exceed female rate {female:.3}"
        );
        let white = favored_rate(&d, 1, "White");
        let nonwhite = favored_rate(&d, 1, "Black");
        assert!(white > nonwhite, "white {white:.3} vs black {nonwhite:.3}");
        let overall = d.labels.iter().map(|&l| l as f64).sum::<f64>() / d.len() as f64;
        assert!(
            (0.15..=0.35).contains(&overall),
            "overall favorable rate {overall:.3} out of range"
        );
    }

    #[test]
    fn german_matches_its_schema_and_biases_toward_privileged() {
        let mut buf = Vec::new();
        generate_csv(Recipe::German, 2000, 42, &mut buf).unwrap();
        let schema = Recipe::German.schema();
        let d = load_dataset_from_reader(buf.as_slice(), &schema).unwrap();
        let male = favored_rate(&d, 0, "male");
        let female = favored_rate(&d, 0, "female");
        assert!(male > female + 0.05, "male {male:.3} vs female {female:.3}");
        let aged = favored_rate(&d, 1, "aged");
        let young = favored_rate(&d, 1, "young");
        assert!(aged > young + 0.05, "aged {aged:.3} vs young {young:.3}");
        let overall = d.labels.iter().map(|&l| l as f64).sum::<f64>() / d.len() as f64;
        assert!(
            (0.55..=0.85).contains(&overall),
            "overall good-credit rate {overall:.3} out of range"
        );
    }

    #[test]
    fn unknown_recipe_name_rejected() {
        assert!(Recipe::parse("compas").is_err());
        assert_eq!(Recipe::parse("Adult").unwrap(), Recipe::Adult);
    }
}
