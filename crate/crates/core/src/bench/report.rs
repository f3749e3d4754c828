use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::experiment::{Method, ResultRow};

pub const CSV_HEADER: &str =
    "experiment,method,swept_value,trial,accuracy,consistency,iterations,runtime_ms";

/// Result rows as CSV (header, LF line endings).
pub fn rows_to_csv(rows: &[ResultRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{:.3}",
            r.experiment,
            r.method,
            r.swept_value,
            r.trial,
            r.accuracy,
            r.consistency,
            r.iterations,
            r.runtime_ms
        );
    }
    out
}

/// Mean and population standard deviation.
fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub experiment: String,
    pub method: Method,
    pub swept_value: f64,
    pub trials: usize,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub consistency_mean: f64,
    pub consistency_std: f64,
    pub iterations_mean: f64,
}

/// Mean and spread per `(experiment, method, swept value)`, in first-seen
/// experiment order, then method, then swept value.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut experiments: Vec<&str> = Vec::new();
    for r in rows {
        if !experiments.contains(&r.experiment.as_str()) {
            experiments.push(&r.experiment);
        }
    }
    let mut out = Vec::new();
    for exp in experiments {
        let mut groups: BTreeMap<(Method, u64), (f64, Vec<&ResultRow>)> = BTreeMap::new();
        for r in rows.iter().filter(|r| r.experiment == exp) {
            // f64 keys via bits keep insertion-independent ordering for non-negative values.
            groups
                .entry((r.method, r.swept_value.to_bits()))
                .or_insert_with(|| (r.swept_value, Vec::new()))
                .1
                .push(r);
        }
        for ((method, _), (value, group)) in groups {
            let acc: Vec<f64> = group.iter().map(|r| r.accuracy).collect();
            let con: Vec<f64> = group.iter().map(|r| r.consistency).collect();
            let (accuracy_mean, accuracy_std) = mean_std(&acc);
            let (consistency_mean, consistency_std) = mean_std(&con);
            out.push(SummaryRow {
                experiment: exp.to_string(),
                method,
                swept_value: value,
                trials: group.len(),
                accuracy_mean,
                accuracy_std,
                consistency_mean,
                consistency_std,
                iterations_mean: group.iter().map(|r| r.iterations as f64).sum::<f64>()
                    / group.len() as f64,
            });
        }
    }
    out
}

pub fn summary_to_csv(summary: &[SummaryRow]) -> String {
    let mut out = String::from(
        "experiment,method,swept_value,trials,accuracy_mean,accuracy_std,consistency_mean,consistency_std,iterations_mean\n",
    );
    for s in summary {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            s.experiment,
            s.method,
            s.swept_value,
            s.trials,
            s.accuracy_mean,
            s.accuracy_std,
            s.consistency_mean,
            s.consistency_std,
            s.iterations_mean
        );
    }
    out
}

/// Which summary statistic to plot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Accuracy,
    Consistency,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::Consistency => "consistency",
        }
    }
}

const PALETTE: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

/// Line chart of one metric against the swept value, one polyline per method.
pub fn svg_chart(
    summary: &[SummaryRow],
    experiment: &str,
    metric: Metric,
    x_label: &str,
) -> String {
    let (w, h) = (640.0, 420.0);
    let (left, right, top, bottom) = (60.0, 170.0, 30.0, 50.0);
    let plot_w = w - left - right;
    let plot_h = h - top - bottom;

    let rows: Vec<&SummaryRow> = summary
        .iter()
        .filter(|s| s.experiment == experiment)
        .collect();
    let xs: Vec<f64> = rows.iter().map(|s| s.swept_value).collect();
    let x_min = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let x_max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let x_span = if x_max > x_min { x_max - x_min } else { 1.0 };
    let px = |x: f64| left + (x - x_min) / x_span * plot_w;
    let py = |y: f64| top + (1.0 - y.clamp(0.0, 1.0)) * plot_h;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{} - {}</text>"#,
        left + plot_w / 2.0,
        experiment,
        metric.name()
    );
    for k in 0..=5 {
        let y = k as f64 / 5.0;
        let _ = writeln!(
            out,
            r##"<line x1="{left}" y1="{0:.1}" x2="{1:.1}" y2="{0:.1}" stroke="#ddd"/><text x="{2:.1}" y="{3:.1}" text-anchor="end">{y:.1}</text>"##,
            py(y),
            left + plot_w,
            left - 6.0,
            py(y) + 4.0
        );
    }
    let mut ticks: Vec<f64> = xs.clone();
    ticks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ticks.dedup();
    for x in &ticks {
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            px(*x),
            top + plot_h + 16.0,
            x
        );
    }
    let _ = writeln!(
        out,
        r#"<rect x="{left}" y="{top}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        left + plot_w / 2.0,
        h - 12.0,
        x_label
    );

    let mut methods: Vec<Method> = rows.iter().map(|s| s.method).collect();
    methods.sort();
    methods.dedup();
    for (k, method) in methods.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|s| s.method == *method)
            .map(|s| {
                let y = match metric {
                    Metric::Accuracy => s.accuracy_mean,
                    Metric::Consistency => s.consistency_mean,
                };
                (s.swept_value, y)
            })
            .collect();
        pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let points: Vec<String> = pts
            .iter()
            .map(|(x, y)| format!("{:.1},{:.1}", px(*x), py(*y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            points.join(" ")
        );
        let ly = top + 14.0 + 18.0 * k as f64;
        let lx = left + plot_w + 12.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            method
        );
    }
    out.push_str("</svg>\n");
    out
}
