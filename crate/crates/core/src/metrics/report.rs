use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::f1::{macro_f1, per_class_f1, weighted_f1, ConfusionTally};
use super::significance::Significance;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelScore {
    pub label: String,
    pub f1: f64,
    pub support: u64,
}

/// Scores of one run on one split. `per_label` follows scheme order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub split: String,
    pub method: String,
    pub fingerprint: String,
    pub per_label: Vec<LabelScore>,
    pub macro_f1: f64,
    pub weighted_f1: f64,
    pub accuracy: f64,
    /// Share of sentences routed to their gold label's prototype (PCM only).
    pub assignment_accuracy: Option<f64>,
    pub tally: ConfusionTally,
}

impl RunReport {
    pub fn from_tally(labels: &[String], tally: ConfusionTally) -> Result<Self> {
        if labels.len() != tally.labels() {
            return Err(Error::Metric(format!(
                "{} label names for a {}-label tally",
                labels.len(),
                tally.labels()
            )));
        }
        let f1 = per_class_f1(&tally);
        let support = tally.support();
        Ok(Self {
            seed: 0,
            split: String::new(),
            method: String::new(),
            fingerprint: String::new(),
            per_label: labels
                .iter()
                .zip(&f1)
                .zip(&support)
                .map(|((label, &f1), &support)| LabelScore {
                    label: label.clone(),
                    f1,
                    support,
                })
                .collect(),
            macro_f1: macro_f1(&f1)?,
            weighted_f1: weighted_f1(&f1, &support)?,
            accuracy: tally.accuracy(),
            assignment_accuracy: None,
            tally,
        })
    }

    /// Fold-wise mean: per-label F1 and the summary scores are averaged and
    /// the tallies summed. Metadata comes from the first report.
    pub fn average(reports: &[RunReport]) -> Result<Self> {
        let first = reports
            .first()
            .ok_or_else(|| Error::Metric("averaging no reports".into()))?;
        if reports.len() == 1 {
            return Ok(first.clone());
        }
        let n = reports.len() as f64;
        let mut out = first.clone();
        for r in &reports[1..] {
            if r.per_label.len() != out.per_label.len()
                || r.per_label
                    .iter()
                    .zip(&out.per_label)
                    .any(|(a, b)| a.label != b.label)
            {
                return Err(Error::Metric(
                    "averaging reports over different labels".into(),
                ));
            }
            out.tally.merge(&r.tally)?;
        }
        let mean = |f: &dyn Fn(&RunReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
        for (i, s) in out.per_label.iter_mut().enumerate() {
            s.f1 = mean(&|r| r.per_label[i].f1);
            s.support = reports.iter().map(|r| r.per_label[i].support).sum();
        }
        out.macro_f1 = mean(&|r| r.macro_f1);
        out.weighted_f1 = mean(&|r| r.weighted_f1);
        out.accuracy = mean(&|r| r.accuracy);
        out.assignment_accuracy = first
            .assignment_accuracy
            .map(|_| mean(&|r| r.assignment_accuracy.unwrap_or(0.0)));
        Ok(out)
    }

    pub fn f1_of(&self, label: &str) -> Option<f64> {
        self.per_label
            .iter()
            .find(|s| s.label == label)
            .map(|s| s.f1)
    }
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::Metric("mean of no values".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Ok((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, var.sqrt()))
}

/// Aggregate of several seeds of one configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub method: String,
    pub runs: Vec<RunReport>,
    pub macro_mean: f64,
    pub macro_std: f64,
    pub weighted_mean: f64,
    pub weighted_std: f64,
    /// Against the named baseline run-set, on macro-F1 and weighted-F1.
    pub significance_macro: Option<Significance>,
    pub significance_weighted: Option<Significance>,
}

impl AggregateReport {
    pub fn new(method: impl Into<String>, runs: Vec<RunReport>) -> Result<Self> {
        let macros: Vec<f64> = runs.iter().map(|r| r.macro_f1).collect();
        let weighted: Vec<f64> = runs.iter().map(|r| r.weighted_f1).collect();
        let (macro_mean, macro_std) = mean_std(&macros)?;
        let (weighted_mean, weighted_std) = mean_std(&weighted)?;
        Ok(Self {
            method: method.into(),
            runs,
            macro_mean,
            macro_std,
            weighted_mean,
            weighted_std,
            significance_macro: None,
            significance_weighted: None,
        })
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.runs.iter().map(|r| r.seed).collect()
    }

    pub fn macro_scores(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.macro_f1).collect()
    }

    pub fn weighted_scores(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.weighted_f1).collect()
    }
}

/// Role-wise F1 table with one column per system, scores in percent, closed
/// by macro- and weighted-F1 rows. All reports must share one label list.
pub fn render_table(columns: &[(&str, &RunReport)]) -> Result<String> {
    let (_, first) = columns
        .first()
        .ok_or_else(|| Error::Metric("no reports to render".into()))?;
    let labels: Vec<&str> = first.per_label.iter().map(|s| s.label.as_str()).collect();
    for (name, r) in columns {
        if r.per_label
            .iter()
            .map(|s| s.label.as_str())
            .ne(labels.iter().copied())
        {
            return Err(Error::Metric(format!(
                "report `{name}` uses a different label list"
            )));
        }
    }
    let role_w = labels
        .iter()
        .map(|l| l.chars().count())
        .chain(["Weighted-F1".len(), "Role".len()])
        .max()
        .unwrap_or(4);
    let col_w: Vec<usize> = columns
        .iter()
        .map(|(n, _)| n.chars().count().max(6))
        .collect();

    let mut out = String::new();
    let mut row = |cells: Vec<String>| {
        let _ = write!(out, "{:<role_w$}", cells[0]);
        for (c, w) in cells[1..].iter().zip(&col_w) {
            let _ = write!(out, "  {c:>w$}");
        }
        out.push('\n');
    };
    row(std::iter::once("Role".to_string())
        .chain(columns.iter().map(|(n, _)| n.to_string()))
        .collect());
    for (i, label) in labels.iter().enumerate() {
        row(std::iter::once(label.to_string())
            .chain(
                columns
                    .iter()
                    .map(|(_, r)| format!("{:.2}", 100.0 * r.per_label[i].f1)),
            )
            .collect());
    }
    row(std::iter::once("Macro-F1".to_string())
        .chain(
            columns
                .iter()
                .map(|(_, r)| format!("{:.2}", 100.0 * r.macro_f1)),
        )
        .collect());
    row(std::iter::once("Weighted-F1".to_string())
        .chain(
            columns
                .iter()
                .map(|(_, r)| format!("{:.2}", 100.0 * r.weighted_f1)),
        )
        .collect());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(gold: &[usize], pred: &[usize]) -> RunReport {
        let labels = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        RunReport::from_tally(
            &labels,
            ConfusionTally::from_predictions(3, gold, pred).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn report_fields() {
        let r = report(&[0, 0, 1, 1], &[0, 1, 1, 1]);
        assert_eq!(r.per_label.len(), 3);
        assert!((r.f1_of("a").unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.f1_of("b").unwrap() - 0.8).abs() < 1e-15);
        assert_eq!(r.f1_of("c"), Some(0.0));
        assert!((r.macro_f1 - (2.0 / 3.0 + 0.8) / 3.0).abs() < 1e-15);
        assert_eq!(r.accuracy, 0.75);
    }

    #[test]
    fn table_layout() {
        let a = report(&[0, 1, 2], &[0, 1, 2]);
        let b = report(&[0, 1, 2], &[0, 0, 2]);
        let t = render_table(&[("Baseline", &a), ("+PCM", &b)]).unwrap();
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 6);
        assert!(lines[0].starts_with("Role") && lines[0].ends_with("+PCM"));
        assert!(lines[2].starts_with('b') && lines[2].ends_with("0.00"));
        assert!(lines[4].starts_with("Macro-F1") && lines[4].contains("100.00"));
        assert!(render_table(&[]).is_err());
    }

    #[test]
    fn average_of_folds() {
        let a = report(&[0, 1, 2], &[0, 1, 2]);
        let b = report(&[0, 1, 2], &[0, 0, 2]);
        let avg = RunReport::average(&[a.clone(), b.clone()]).unwrap();
        assert!((avg.macro_f1 - (a.macro_f1 + b.macro_f1) / 2.0).abs() < 1e-15);
        assert_eq!(avg.tally.total(), 6);
        assert_eq!(RunReport::average(std::slice::from_ref(&a)).unwrap(), a);
    }

    #[test]
    fn mean_and_sample_std() {
        assert_eq!(mean_std(&[2.0; 5]).unwrap(), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }
}
