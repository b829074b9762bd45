//! Result persistence and report rendering. `results.json` is the raw
//! per-run record a `run` invocation writes; reports aggregate one or more
//! of those into the frequency/effect/correlation tables and render them
//! as JSON (canonical), CSV (flat rows), or Markdown (human-diffable
//! tables).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::runner::RunResults;
use crate::harness::tables::{
    correlation_matrix, effect_table, frequency_table, Comparison, CorrelationMatrix, EffectTable,
    FrequencyTable,
};

pub const RESULTS_FILE: &str = "results.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

impl ReportFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(Error::Config(format!(
                "unknown report format {other:?}; expected json, csv, or markdown"
            ))),
        }
    }

    fn file_name(self) -> &'static str {
        match self {
            ReportFormat::Json => "report.json",
            ReportFormat::Csv => "report.csv",
            ReportFormat::Markdown => "report.md",
        }
    }
}

/// Everything a report carries: the tasks it covers and their aggregate
/// tables. The correlation matrix is present only when enough (task,
/// method) observations exist; its absence is flagged, not fatal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateTables {
    pub tasks: Vec<String>,
    pub frequency: FrequencyTable,
    pub effects: EffectTable,
    pub correlation: Option<CorrelationMatrix>,
    pub flags: Vec<String>,
}

pub fn aggregate(results: &[RunResults]) -> Result<AggregateTables> {
    let frequency = frequency_table(results)?;
    let effects = effect_table(results)?;
    let mut flags = Vec::new();
    let correlation = match correlation_matrix(results) {
        Ok(m) => Some(m),
        Err(Error::EmptySample(msg)) => {
            flags.push(format!("correlation matrix omitted: {msg}"));
            None
        }
        Err(e) => return Err(e),
    };
    for res in results {
        for f in &res.flags {
            flags.push(format!("task {}: {f}", res.task_id()));
        }
    }
    Ok(AggregateTables {
        tasks: results.iter().map(|r| r.task_id()).collect(),
        frequency,
        effects,
        correlation,
        flags,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Writes `results.json` into `dir`, creating the directory if needed.
pub fn write_results(dir: &Path, res: &RunResults) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(RESULTS_FILE);
    write_json(&path, res)?;
    Ok(path)
}

/// Reads one `results.json`, given either the file or its directory.
pub fn read_results_file(path: &Path) -> Result<RunResults> {
    let file = if path.is_dir() {
        path.join(RESULTS_FILE)
    } else {
        path.to_path_buf()
    };
    let text = fs::read_to_string(&file).map_err(|e| {
        Error::Config(format!("cannot read results from {}: {e}", file.display()))
    })?;
    Ok(serde_json::from_str(&text)?)
}

/// Gathers results from a list of files or directories. A directory
/// yields its own `results.json` if present, otherwise the `results.json`
/// of each immediate subdirectory (sorted by name, so collection order is
/// deterministic).
pub fn collect_results(paths: &[PathBuf]) -> Result<Vec<RunResults>> {
    let mut out = Vec::new();
    for path in paths {
        if path.is_file() {
            out.push(read_results_file(path)?);
            continue;
        }
        let direct = path.join(RESULTS_FILE);
        if direct.is_file() {
            out.push(read_results_file(&direct)?);
            continue;
        }
        let mut subs: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|e| Error::Config(format!("cannot list {}: {e}", path.display())))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.join(RESULTS_FILE).is_file())
            .collect();
        subs.sort();
        if subs.is_empty() {
            return Err(Error::Config(format!(
                "no {RESULTS_FILE} under {}",
                path.display()
            )));
        }
        for sub in subs {
            out.push(read_results_file(&sub)?);
        }
    }
    if out.is_empty() {
        return Err(Error::Config("no results supplied".into()));
    }
    Ok(out)
}

/// Renders the aggregate tables into `dir` in the requested format and
/// returns the file written.
pub fn emit_report(tables: &AggregateTables, format: ReportFormat, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(format.file_name());
    match format {
        ReportFormat::Json => write_json(&path, tables)?,
        ReportFormat::Csv => fs::write(&path, render_csv(tables)?)?,
        ReportFormat::Markdown => fs::write(&path, render_markdown(tables))?,
    }
    Ok(path)
}

/// Flat CSV: one row per cell value, keyed by table, row, column, field.
fn render_csv(tables: &AggregateTables) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["table", "row", "column", "field", "value"])?;
    let f = &tables.frequency;
    for (mi, method) in f.methods.iter().enumerate() {
        for (ki, metric) in f.metrics.iter().enumerate() {
            let cell = &f.cells[mi][ki];
            for (field, v) in [
                ("increase", cell.increase),
                ("tie", cell.tie),
                ("decrease", cell.decrease),
            ] {
                w.write_record(["frequency", method, metric, field, &v.to_string()])?;
            }
        }
    }
    let e = &tables.effects;
    for (mi, method) in e.methods.iter().enumerate() {
        for (ki, metric) in e.metrics.iter().enumerate() {
            let Some(cell) = &e.cells[mi][ki] else {
                continue;
            };
            for (field, v) in [
                ("mean_delta", cell.mean_delta),
                ("mean_after", cell.mean_after),
                ("mean_before", cell.mean_before),
                ("extreme_delta", cell.extreme_delta),
                ("large_pct", cell.large_pct),
            ] {
                w.write_record(["effect", method, metric, field, &v.to_string()])?;
            }
        }
    }
    if let Some(c) = &tables.correlation {
        for (i, a) in c.metrics.iter().enumerate() {
            for (j, b) in c.metrics.iter().enumerate() {
                if let (Some(rho), Some(p)) = (c.rho[i][j], c.p[i][j]) {
                    w.write_record(["correlation", a, b, "rho", &rho.to_string()])?;
                    w.write_record(["correlation", a, b, "p", &p.to_string()])?;
                }
            }
        }
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Internal(format!("csv buffer: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Internal(format!("csv encoding: {e}")))
}

fn md_row(cells: &[String]) -> String {
    format!("| {} |\n", cells.join(" | "))
}

fn md_separator(n: usize) -> String {
    format!("|{}\n", " --- |".repeat(n))
}

fn render_markdown(tables: &AggregateTables) -> String {
    let mut s = String::new();
    s.push_str("# Audit report\n\n## Tasks\n\n");
    for t in &tables.tasks {
        let _ = writeln!(s, "- {t}");
    }

    let f = &tables.frequency;
    let _ = write!(
        s,
        "\n## Significant changes across {} task(s)\n\nEach cell counts tasks where the \
         method significantly increased (↑), tied with (−), or significantly decreased (↓) \
         the baseline's metric over the paired runs.\n\n",
        f.tasks
    );
    let mut header = vec!["Method".to_string()];
    header.extend(f.metrics.iter().map(|m| m.to_uppercase()));
    s.push_str(&md_row(&header));
    s.push_str(&md_separator(header.len()));
    for (mi, method) in f.methods.iter().enumerate() {
        let mut row = vec![method.clone()];
        row.extend(f.cells[mi].iter().map(|c| c.rendered()));
        s.push_str(&md_row(&row));
    }

    let e = &tables.effects;
    s.push_str(
        "\n## Mean effects\n\nEach cell shows the mean change and, in parentheses, the \
         absolute after−before values it came from.\n\n",
    );
    let mut header = vec!["Method".to_string()];
    header.extend(e.metrics.iter().map(|m| m.to_uppercase()));
    s.push_str(&md_row(&header));
    s.push_str(&md_separator(header.len()));
    for (mi, method) in e.methods.iter().enumerate() {
        let mut row = vec![method.clone()];
        row.extend(
            e.cells[mi]
                .iter()
                .map(|c| c.map_or("—".to_string(), |c| c.rendered())),
        );
        s.push_str(&md_row(&row));
    }
    s.push_str(
        "\n### Extreme task change and share of large effects\n\nCells show the most adverse \
         single-task change (largest drop for privileged-group metrics, largest rise for \
         unprivileged-group metrics, largest magnitude otherwise) and the percentage of tasks \
         with a significant large effect.\n\n",
    );
    let mut header = vec!["Method".to_string()];
    header.extend(e.metrics.iter().map(|m| m.to_uppercase()));
    s.push_str(&md_row(&header));
    s.push_str(&md_separator(header.len()));
    for (mi, method) in e.methods.iter().enumerate() {
        let mut row = vec![method.clone()];
        row.extend(e.cells[mi].iter().map(|c| {
            c.map_or("—".to_string(), |c| {
                format!("{:+.3} / {:.0}%", c.extreme_delta, c.large_pct)
            })
        }));
        s.push_str(&md_row(&row));
    }

    if let Some(c) = &tables.correlation {
        let _ = write!(
            s,
            "\n## Correlation of metric changes ({} observations)\n\nSpearman ρ between the \
             per-(task, method) mean changes. Values in parentheses are not significant at \
             0.05.\n\n",
            c.observations
        );
        let mut header = vec!["".to_string()];
        header.extend(c.metrics.iter().map(|m| format!("Δ{}", m.to_uppercase())));
        s.push_str(&md_row(&header));
        s.push_str(&md_separator(header.len()));
        for (i, a) in c.metrics.iter().enumerate() {
            let mut row = vec![format!("Δ{}", a.to_uppercase())];
            for j in 0..c.metrics.len() {
                row.push(match c.rho[i][j] {
                    Some(r) if c.significant[i][j] => format!("{r:.2}"),
                    Some(r) => format!("({r:.2})"),
                    None => "—".to_string(),
                });
            }
            s.push_str(&md_row(&row));
        }
    }

    let mut flags: Vec<&String> = tables.flags.iter().collect();
    flags.extend(&tables.frequency.flags);
    flags.extend(&tables.effects.flags);
    if let Some(c) = &tables.correlation {
        flags.extend(&c.flags);
    }
    if !flags.is_empty() {
        s.push_str("\n## Flags\n\n");
        for flag in flags {
            let _ = writeln!(s, "- {flag}");
        }
    }
    s
}

/// Writes a win-tie-loss comparison as `comparison.json` + `comparison.md`.
pub fn write_comparison(dir: &Path, c: &Comparison) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let json = dir.join("comparison.json");
    write_json(&json, c)?;
    let mut s = String::new();
    let _ = write!(
        s,
        "# {} vs {}\n\nWin-tie-loss over {} task(s); a win means {} beats {} in the \
         metric's preferred direction.\n\n",
        c.method_a, c.method_b, c.tasks, c.method_a, c.method_b
    );
    s.push_str(&md_row(&[
        "Metric".into(),
        "Win".into(),
        "Tie".into(),
        "Loss".into(),
    ]));
    s.push_str(&md_separator(4));
    for row in &c.rows {
        s.push_str(&md_row(&[
            row.metric.to_uppercase(),
            row.win.to_string(),
            row.tie.to_string(),
            row.loss.to_string(),
        ]));
    }
    let _ = write!(
        s,
        "\nMean overall selection-rate change ({} − {}): {:+.3}\n",
        c.method_a, c.method_b, c.mean_overall_sr_delta
    );
    if !c.flags.is_empty() {
        s.push_str("\n## Flags\n\n");
        for flag in &c.flags {
            let _ = writeln!(s, "- {flag}");
        }
    }
    let md = dir.join("comparison.md");
    fs::write(&md, s)?;
    Ok(vec![json, md])
}

/// Writes a correlation matrix as `correlation.json` + `correlation.md`.
pub fn write_correlation(dir: &Path, m: &CorrelationMatrix) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let json = dir.join("correlation.json");
    write_json(&json, m)?;
    let tables = AggregateTables {
        tasks: vec![],
        frequency: FrequencyTable {
            metrics: vec![],
            methods: vec![],
            cells: vec![],
            tasks: 0,
            flags: vec![],
        },
        effects: EffectTable {
            metrics: vec![],
            methods: vec![],
            cells: vec![],
            flags: vec![],
        },
        correlation: Some(m.clone()),
        flags: vec![],
    };
    // Reuse the report renderer's correlation section only.
    let full = render_markdown(&tables);
    let section = full
        .find("\n## Correlation")
        .map(|i| format!("# Correlation of metric changes\n{}", &full[i..]))
        .unwrap_or(full);
    let md = dir.join("correlation.md");
    fs::write(&md, section)?;
    Ok(vec![json, md])
}
