//! `fairaudit` — audit binary classifiers for group fairness and try
//! mitigation methods on them.
//!
//! Exit codes: 0 on success, 1 for configuration or data problems, 2 for
//! internal failures.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use fairaudit::data::schema::DatasetSchema;
use fairaudit::data::synth::{write_bundle, Recipe};
use fairaudit::error::{Error, Result};
use fairaudit::harness::{
    aggregate, collect_results, compare_methods, correlation_matrix, emit_report, load_scores,
    run_experiment, to_prediction_sets, write_comparison, write_correlation, write_results,
    ExperimentConfig, ReportFormat, RunResults, Surface,
};
use fairaudit::metrics::build_report;

#[derive(Parser)]
#[command(
    name = "fairaudit",
    version,
    about = "Group-fairness audits and bias mitigation for binary classifiers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configured experiment: repeated seeded splits, a baseline
    /// model, and each configured mitigation method, with metrics per run.
    Run {
        /// Experiment config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Output directory for results.json.
        #[arg(long)]
        out: PathBuf,
        /// Override the configured number of runs.
        #[arg(long)]
        runs: Option<usize>,
        /// Override the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the evaluation surface: test or train.
        #[arg(long)]
        surface: Option<String>,
    },
    /// Compare a method column of results A against one of results B
    /// (win-tie-loss per metric; requires shared splits).
    Compare {
        /// Results file or directory for side A.
        #[arg(long)]
        a: PathBuf,
        /// Results file or directory for side B.
        #[arg(long)]
        b: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Method column from A (default: the only non-base column).
        #[arg(long)]
        method_a: Option<String>,
        /// Method column from B (default: the only non-base column).
        #[arg(long)]
        method_b: Option<String>,
    },
    /// Correlate per-task metric changes across one or more result sets.
    Correlate {
        /// Results files or directories (each directory may hold several).
        #[arg(long, num_args = 1.., required = true)]
        results: Vec<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Audit an external score file: per-run group, fairness, and
    /// performance metrics without fitting any model.
    Audit {
        /// Score CSV with run_id, y_true, y_pred, y_prob, and one column
        /// per sensitive attribute.
        #[arg(long)]
        scores: PathBuf,
        /// Schema JSON declaring the sensitive attributes.
        #[arg(long)]
        schema: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a report from stored results.
    Report {
        /// Results file or directory.
        #[arg(long)]
        results: PathBuf,
        /// Output format: json, csv, or markdown.
        #[arg(long)]
        format: String,
    },
    /// Generate a bundled synthetic dataset (CSV + schema).
    Synth {
        /// Recipe name: adult or german.
        #[arg(long)]
        recipe: String,
        /// Number of rows (default: the recipe's own size).
        #[arg(long)]
        rows: Option<usize>,
        /// Generator seed.
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_user_error() { 1 } else { 2 })
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run {
            config,
            out,
            runs,
            seed,
            surface,
        } => run_cmd(&config, &out, runs, seed, surface.as_deref()),
        Command::Compare {
            a,
            b,
            out,
            method_a,
            method_b,
        } => compare_cmd(&a, &b, &out, method_a.as_deref(), method_b.as_deref()),
        Command::Correlate { results, out } => correlate_cmd(&results, &out),
        Command::Audit {
            scores,
            schema,
            out,
        } => audit_cmd(&scores, &schema, &out),
        Command::Report { results, format } => report_cmd(&results, &format),
        Command::Synth {
            recipe,
            rows,
            seed,
            out,
        } => synth_cmd(&recipe, rows, seed, &out),
    }
}

/// Resolves a config-relative path against the config file's directory.
fn anchor(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

fn run_cmd(
    config: &Path,
    out: &Path,
    runs: Option<usize>,
    seed: Option<u64>,
    surface: Option<&str>,
) -> Result<()> {
    let mut cfg = ExperimentConfig::from_file(config)?;
    let base = config.parent().unwrap_or(Path::new(".")).to_path_buf();
    anchor(&base, &mut cfg.dataset);
    anchor(&base, &mut cfg.schema);
    for m in &mut cfg.methods {
        if let Some(s) = &mut m.scores {
            anchor(&base, s);
        }
    }
    if let Some(r) = runs {
        cfg.runs = r;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(s) = surface {
        cfg.surface = Surface::parse(s)?;
    }
    let results = run_experiment(&cfg)?;
    let path = write_results(out, &results)?;
    let methods: Vec<&str> = results.methods.iter().map(|m| m.name.as_str()).collect();
    println!(
        "task {}: {} runs on the {:?} surface, methods {}",
        results.task_id(),
        results.runs,
        results.surface,
        methods.join(", ")
    );
    for flag in &results.flags {
        println!("flag: {flag}");
    }
    println!("wrote {}", path.display());
    Ok(())
}

/// The single non-base method name across a result set, or an error
/// telling the user to pick one.
fn sole_method(results: &[RunResults]) -> Result<String> {
    let names: BTreeSet<&str> = results
        .iter()
        .flat_map(|r| r.methods.iter())
        .map(|m| m.name.as_str())
        .filter(|n| *n != "base")
        .collect();
    match names.len() {
        1 => Ok(names.into_iter().next().unwrap().to_string()),
        0 => Err(Error::Config(
            "results contain no method column besides the baseline".into(),
        )),
        _ => Err(Error::Config(format!(
            "results contain several method columns ({}); pick one with --method-a/--method-b",
            names.into_iter().collect::<Vec<_>>().join(", ")
        ))),
    }
}

fn compare_cmd(
    a: &Path,
    b: &Path,
    out: &Path,
    method_a: Option<&str>,
    method_b: Option<&str>,
) -> Result<()> {
    let res_a = collect_results(&[a.to_path_buf()])?;
    let res_b = collect_results(&[b.to_path_buf()])?;
    let name_a = match method_a {
        Some(m) => m.to_string(),
        None => sole_method(&res_a)?,
    };
    let name_b = match method_b {
        Some(m) => m.to_string(),
        None => sole_method(&res_b)?,
    };
    let cmp = compare_methods(&res_a, &res_b, &name_a, &name_b)?;
    for row in &cmp.rows {
        println!(
            "{:>12}: win {} tie {} loss {}",
            row.metric, row.win, row.tie, row.loss
        );
    }
    println!(
        "mean overall selection-rate change ({} - {}): {:+.3}",
        cmp.method_a, cmp.method_b, cmp.mean_overall_sr_delta
    );
    for path in write_comparison(out, &cmp)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn correlate_cmd(results: &[PathBuf], out: &Path) -> Result<()> {
    let all = collect_results(results)?;
    let matrix = correlation_matrix(&all)?;
    println!(
        "correlated {} metric-change series over {} (task, method) observations",
        matrix.metrics.len(),
        matrix.observations
    );
    for flag in &matrix.flags {
        println!("flag: {flag}");
    }
    for path in write_correlation(out, &matrix)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn audit_cmd(scores: &Path, schema_path: &Path, out: &Path) -> Result<()> {
    let schema = DatasetSchema::from_file(schema_path)?;
    let sets = load_scores(scores, &schema)?;
    let (groups, preds) = to_prediction_sets(&sets, &schema)?;
    let labels = groups.report_labels();
    let mut runs = Vec::with_capacity(sets.len());
    for (set, pred) in sets.iter().zip(&preds) {
        let report = build_report(pred, groups.len())?;
        let mut flat = report.flat_json(&labels)?;
        if let Some(map) = flat.as_object_mut() {
            map.insert("run_id".into(), serde_json::json!(set.run_id));
        }
        runs.push(flat);
    }
    let doc = serde_json::json!({
        "source": scores.display().to_string(),
        "groups": groups
            .groups
            .iter()
            .zip(&labels)
            .map(|(g, l)| serde_json::json!({"label": l, "key": g.key}))
            .collect::<Vec<_>>(),
        "group_flags": groups.flags,
        "runs": runs,
    });
    std::fs::create_dir_all(out)?;
    let path = out.join("audit.json");
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    std::fs::write(&path, text)?;
    println!(
        "audited {} run(s) over {} group(s)",
        preds.len(),
        groups.len()
    );
    println!("wrote {}", path.display());
    Ok(())
}

fn report_cmd(results: &Path, format: &str) -> Result<()> {
    let format = ReportFormat::parse(format)?;
    let all = collect_results(&[results.to_path_buf()])?;
    let tables = aggregate(&all)?;
    let dir = if results.is_dir() {
        results.to_path_buf()
    } else {
        results
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."))
    };
    let path = emit_report(&tables, format, &dir)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn synth_cmd(recipe: &str, rows: Option<usize>, seed: u64, out: &Path) -> Result<()> {
    let recipe = Recipe::parse(recipe)?;
    let rows = rows.unwrap_or_else(|| recipe.default_rows());
    let (csv, schema) = write_bundle(recipe, rows, seed, out)?;
    println!("wrote {}", csv.display());
    println!("wrote {}", schema.display());
    Ok(())
}
