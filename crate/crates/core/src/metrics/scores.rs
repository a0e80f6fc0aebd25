use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::confusion::ConfusionMatrix;

/// Accuracy and macro-averaged precision, recall and F1, as fractions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// One-vs-rest per-class scores averaged with equal class weight. A class
/// whose precision or recall denominator is zero contributes 0 there.
pub fn metrics_from_confusion(cm: &ConfusionMatrix) -> Result<Metrics> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Range("confusion matrix is empty".into()));
    }
    let k = cm.classes();
    let (mut precision, mut recall, mut f1) = (0.0, 0.0, 0.0);
    for c in 0..k {
        let tp = cm.get(c, c);
        let predicted: u64 = (0..k).map(|t| cm.get(t, c)).sum();
        let actual: u64 = (0..k).map(|p| cm.get(c, p)).sum();
        let p = ratio(tp, predicted);
        let r = ratio(tp, actual);
        precision += p;
        recall += r;
        f1 += if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    }
    let k = k as f64;
    Ok(Metrics {
        accuracy: cm.trace() as f64 / total as f64,
        precision: precision / k,
        recall: recall / k,
        f1: f1 / k,
    })
}

/// Mean, population standard deviation and range of one metric, in percent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Range("cannot summarize zero runs".into()));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Ok(Self {
            mean,
            std: var.sqrt(),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2} ± {:.2}", self.mean, self.std)
    }
}

/// Per-metric summaries over runs, in percent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub runs: usize,
    pub accuracy: Summary,
    pub precision: Summary,
    pub recall: Summary,
    pub f1: Summary,
}

pub fn aggregate_runs(runs: &[Metrics]) -> Result<MetricsReport> {
    if runs.is_empty() {
        return Err(Error::Range("cannot aggregate zero runs".into()));
    }
    let pct = |f: fn(&Metrics) -> f64| -> Result<Summary> {
        Summary::of(&runs.iter().map(|m| 100.0 * f(m)).collect::<Vec<_>>())
    };
    Ok(MetricsReport {
        runs: runs.len(),
        accuracy: pct(|m| m.accuracy)?,
        precision: pct(|m| m.precision)?,
        recall: pct(|m| m.recall)?,
        f1: pct(|m| m.f1)?,
    })
}

const MARKDOWN_HEAD: &str = "| Model | Runs | Avg. Acc. | Avg. Prec. | Avg. Rec. | Avg. F1 | Min Acc. | Max Acc. |\n\
                             |---|---|---|---|---|---|---|---|\n";

/// Markdown table, one row per labelled report.
pub fn render_markdown(rows: &[(String, MetricsReport)]) -> String {
    let mut out = String::from(MARKDOWN_HEAD);
    for (name, r) in rows {
        out.push_str(&format!(
            "| {name} | {} | {} | {} | {} | {} | {:.2} | {:.2} |\n",
            r.runs, r.accuracy, r.precision, r.recall, r.f1, r.accuracy.min, r.accuracy.max
        ));
    }
    out
}

pub fn render_csv(rows: &[(String, MetricsReport)]) -> String {
    let mut out = String::from("model,runs");
    for metric in ["accuracy", "precision", "recall", "f1"] {
        for stat in ["mean", "std", "min", "max"] {
            out.push_str(&format!(",{metric}_{stat}"));
        }
    }
    out.push('\n');
    for (name, r) in rows {
        out.push_str(&format!("{name},{}", r.runs));
        for s in [r.accuracy, r.precision, r.recall, r.f1] {
            out.push_str(&format!(",{:.6},{:.6},{:.6},{:.6}", s.mean, s.std, s.min, s.max));
        }
        out.push('\n');
    }
    out
}
