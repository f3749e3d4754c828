//! Benchmark harness: synthetic sweeps, per-trial metrics, CSV and SVG output.

mod experiment;
mod report;

use std::fs;
use std::path::{Path, PathBuf};

pub use experiment::{
    preset, run_experiment, run_methods, ExperimentKind, ExperimentSpec, Method, MethodOutcome,
    ResultRow, GRAPH_SET_SIZES, PRESETS,
};
pub use report::{
    rows_to_csv, summarize, summary_to_csv, svg_chart, Metric, SummaryRow, CSV_HEADER,
};

use crate::error::Result;

/// Reads one experiment spec from a `.toml` or `.json` file.
pub fn read_spec(path: &Path) -> Result<ExperimentSpec> {
    let text = fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e == "toml") {
        Ok(toml::from_str(&text)?)
    } else {
        Ok(serde_json::from_str(&text)?)
    }
}

/// Runs every spec in order and concatenates the rows.
pub fn run_all(specs: &[ExperimentSpec]) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    for spec in specs {
        rows.extend(run_experiment(spec)?);
    }
    Ok(rows)
}

fn x_label(kind: ExperimentKind) -> &'static str {
    match kind {
        ExperimentKind::Deformation => "deformation epsilon",
        ExperimentKind::Outlier => "outliers N_out",
        ExperimentKind::GraphSetSize => "graphs N_G",
    }
}

/// Writes `results.csv`, `summary.csv` and one accuracy and one consistency
/// chart per experiment into `out_dir`. Returns the written paths.
pub fn write_outputs(
    out_dir: &Path,
    specs: &[ExperimentSpec],
    rows: &[ResultRow],
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let results = out_dir.join("results.csv");
    fs::write(&results, rows_to_csv(rows))?;
    written.push(results);

    let summary = summarize(rows);
    let summary_path = out_dir.join("summary.csv");
    fs::write(&summary_path, summary_to_csv(&summary))?;
    written.push(summary_path);

    for spec in specs {
        let label = spec.label();
        for metric in [Metric::Accuracy, Metric::Consistency] {
            let path = out_dir.join(format!("{label}_{}.svg", metric.name()));
            fs::write(
                &path,
                svg_chart(&summary, &label, metric, x_label(spec.kind)),
            )?;
            written.push(path);
        }
    }
    Ok(written)
}
