use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::roc_auc;
use crate::error::{KinError, Result};
use crate::label::Label;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    /// 1-based.
    pub fold: usize,
    pub accuracy: f64,
    pub auc: f64,
    pub roc_points: Vec<(f64, f64)>,
    pub n_train: usize,
    pub n_test: usize,
    #[serde(skip)]
    pub test_scores: Vec<f64>,
    #[serde(skip)]
    pub test_labels: Vec<Label>,
}

/// One method on one relation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub relation: String,
    pub folds: Vec<FoldResult>,
    pub mean_accuracy: f64,
    /// Population standard deviation (divides by the fold count).
    pub std_accuracy: f64,
    pub mean_auc: f64,
}

pub fn population_std(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
}

impl ReportRow {
    pub fn new(
        method: impl Into<String>,
        relation: impl Into<String>,
        mut folds: Vec<FoldResult>,
    ) -> Self {
        folds.sort_by_key(|f| f.fold);
        let accs: Vec<f64> = folds.iter().map(|f| f.accuracy).collect();
        let n = folds.len().max(1) as f64;
        Self {
            method: method.into(),
            relation: relation.into(),
            mean_accuracy: accs.iter().sum::<f64>() / n,
            std_accuracy: population_std(&accs),
            mean_auc: folds.iter().map(|f| f.auc).sum::<f64>() / n,
            folds,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProtocolReport {
    pub rows: Vec<ReportRow>,
}

impl ProtocolReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Accuracies in percent, one line per row.
    pub fn to_text_table(&self) -> String {
        let folds = self.rows.iter().map(|r| r.folds.len()).max().unwrap_or(0);
        let mut header = vec!["method".to_string(), "relation".to_string()];
        header.extend((1..=folds).map(|i| format!("fold{i}")));
        header.extend(["mean±std".to_string(), "auc".to_string()]);
        let mut lines = vec![header];
        for r in &self.rows {
            let mut cells = vec![r.method.clone(), r.relation.clone()];
            cells.extend(r.folds.iter().map(|f| format!("{:.1}", 100.0 * f.accuracy)));
            cells.resize(2 + folds, String::new());
            cells.push(format!(
                "{:.1}±{:.1}",
                100.0 * r.mean_accuracy,
                100.0 * r.std_accuracy
            ));
            cells.push(format!("{:.3}", r.mean_auc));
            lines.push(cells);
        }
        let cols = lines[0].len();
        let widths: Vec<usize> = (0..cols)
            .map(|c| {
                lines
                    .iter()
                    .map(|l| l[c].chars().count())
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut out = String::new();
        for l in &lines {
            let mut line = String::new();
            for (c, cell) in l.iter().enumerate() {
                let pad = widths[c] - cell.chars().count();
                if c < 2 {
                    let _ = write!(line, "{cell}{}  ", " ".repeat(pad));
                } else {
                    let _ = write!(line, "{}{cell}  ", " ".repeat(pad));
                }
            }
            out.push_str(line.trim_end());
            out.push('\n');
        }
        out
    }

    /// ROC of all test scores of all rows pooled, as `fpr,tpr` lines.
    pub fn roc_csv(&self) -> Result<String> {
        let (scores, labels): (Vec<f64>, Vec<Label>) = self
            .rows
            .iter()
            .flat_map(|r| &r.folds)
            .flat_map(|f| {
                f.test_scores
                    .iter()
                    .copied()
                    .zip(f.test_labels.iter().copied())
            })
            .unzip();
        let roc = roc_auc(&scores, &labels)?;
        let mut out = String::from("fpr,tpr\n");
        for (x, y) in roc.points {
            let _ = writeln!(out, "{x},{y}");
        }
        Ok(out)
    }

    pub fn write_roc_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.roc_csv()?).map_err(|e| KinError::io(path, e))
    }
}
