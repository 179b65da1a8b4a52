//! CSV and JSON report writers.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::bundle::{DatasetManifest, LabelTable};
use crate::error::{Error, Result};
use crate::metrics::{format_percent, harmonic_mean, EvalReport, TemplateStats};
use crate::selector::PredictionSet;

pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const REPORT_JSON_FILE: &str = "report.json";
pub const REPORT_CSV_FILE: &str = "report.csv";
pub const ABLATION_FILE: &str = "ablation.csv";
pub const CORRELATION_FILE: &str = "correlation.csv";
pub const FREQUENCY_FILE: &str = "freq.csv";

/// One line of a summary table; accuracies are fractions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub variant: String,
    pub k: usize,
    pub seed: Option<u64>,
    pub runs: usize,
    pub avg: f64,
    pub wga: f64,
    pub hm: f64,
}

impl SummaryRow {
    pub fn from_report(report: &EvalReport) -> Self {
        Self {
            variant: report.variant.clone(),
            k: report.k,
            seed: report.seed,
            runs: 1,
            avg: report.avg_acc,
            wga: report.wga,
            hm: report.hm,
        }
    }

    /// Averages AVG and WGA over repeated runs; HM is taken of the averages.
    pub fn averaged(variant: impl Into<String>, reports: &[EvalReport]) -> Result<Self> {
        let first = reports
            .first()
            .ok_or_else(|| Error::ConfigError("no runs to average".into()))?;
        let count = reports.len() as f64;
        let avg = reports.iter().map(|r| r.avg_acc).sum::<f64>() / count;
        let wga = reports.iter().map(|r| r.wga).sum::<f64>() / count;
        Ok(Self {
            variant: variant.into(),
            k: first.k,
            seed: first.seed,
            runs: reports.len(),
            avg,
            wga,
            hm: harmonic_mean(avg.clamp(0.0, 1.0), wga.clamp(0.0, 1.0))?,
        })
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e.into() })
}

fn write_rows<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let io = |e: csv::Error| Error::Io { path: path.to_path_buf(), source: e.into() };
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(row).map_err(io)?;
    }
    w.flush().map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `index,variant,y_true,y_pred,top_templates`, one block of N rows per set.
pub fn write_predictions(path: &Path, sets: &[PredictionSet], labels: &LabelTable) -> Result<()> {
    let rows = sets.iter().flat_map(|set| {
        let variant = set.variant.to_string();
        set.y_pred.iter().enumerate().map(move |(n, &pred)| {
            let templates: Vec<String> = set.templates[n].iter().map(usize::to_string).collect();
            vec![
                n.to_string(),
                variant.clone(),
                labels.class_of(n).to_string(),
                pred.to_string(),
                templates.join(";"),
            ]
        })
    });
    write_rows(path, &["index", "variant", "y_true", "y_pred", "top_templates"], rows)
}

/// `variant,k,seed,runs,avg,wga,hm` with accuracies in percent, one decimal.
pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let rows = rows.iter().map(|r| {
        vec![
            r.variant.clone(),
            r.k.to_string(),
            opt(r.seed),
            r.runs.to_string(),
            format_percent(r.avg),
            format_percent(r.wga),
            format_percent(r.hm),
        ]
    });
    write_rows(path, &["variant", "k", "seed", "runs", "avg", "wga", "hm"], rows)
}

/// `template_index,template_text,mean_sep,wga`, one row per template.
pub fn write_correlation(path: &Path, stats: &TemplateStats, manifest: &DatasetManifest) -> Result<()> {
    let rows = stats.templates.iter().map(|t| {
        vec![
            t.index.to_string(),
            manifest.templates[t.index].clone(),
            opt(t.mean_sep),
            opt(t.wga),
        ]
    });
    write_rows(path, &["template_index", "template_text", "mean_sep", "wga"], rows)
}

/// `scope,rank,template_index,template_text,count,fraction`.
///
/// Scope `all` ranks templates over every image, then each class name ranks
/// them over that class. `fraction` is the count over the selected slots in
/// the scope and is empty for a class without samples.
pub fn write_frequency(
    path: &Path,
    stats: &TemplateStats,
    labels: &LabelTable,
    manifest: &DatasetManifest,
) -> Result<()> {
    let mut rows = Vec::new();
    let mut push_scope = |scope: &str, order: Vec<usize>, count: &dyn Fn(usize) -> usize, slots: usize| {
        for (rank, j) in order.into_iter().enumerate() {
            let fraction = (slots > 0).then(|| count(j) as f64 / slots as f64);
            rows.push(vec![
                scope.to_string(),
                (rank + 1).to_string(),
                j.to_string(),
                manifest.templates[j].clone(),
                count(j).to_string(),
                opt(fraction),
            ]);
        }
    };
    push_scope("all", stats.ranked_overall(), &|j| stats.templates[j].overall, labels.len() * stats.k);
    let class_counts = labels.class_counts();
    for (i, name) in manifest.classes.iter().enumerate() {
        push_scope(
            name,
            stats.ranked_for_class(i),
            &|j| stats.templates[j].per_class[i],
            class_counts[i] * stats.k,
        );
    }
    write_rows(path, &["scope", "rank", "template_index", "template_text", "count", "fraction"], rows)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut json = serde_json::to_string_pretty(value).expect("report serializes");
    json.push('\n');
    fs::write(path, json).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}
