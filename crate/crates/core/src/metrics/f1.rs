use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-label true positive / false positive / false negative counts.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionTally {
    pub tp: Vec<u64>,
    pub fp: Vec<u64>,
    #[serde(rename = "fn")]
    pub fn_: Vec<u64>,
}

impl ConfusionTally {
    pub fn new(labels: usize) -> Self {
        Self {
            tp: vec![0; labels],
            fp: vec![0; labels],
            fn_: vec![0; labels],
        }
    }

    pub fn from_predictions(labels: usize, gold: &[usize], pred: &[usize]) -> Result<Self> {
        let mut t = Self::new(labels);
        t.add_all(gold, pred)?;
        Ok(t)
    }

    pub fn labels(&self) -> usize {
        self.tp.len()
    }

    pub fn add(&mut self, gold: usize, pred: usize) -> Result<()> {
        let n = self.labels();
        for i in [gold, pred] {
            if i >= n {
                return Err(Error::LabelOutOfRange { index: i, count: n });
            }
        }
        if gold == pred {
            self.tp[gold] += 1;
        } else {
            self.fn_[gold] += 1;
            self.fp[pred] += 1;
        }
        Ok(())
    }

    pub fn add_all(&mut self, gold: &[usize], pred: &[usize]) -> Result<()> {
        if gold.len() != pred.len() {
            return Err(Error::Metric(format!(
                "{} gold labels vs {} predictions",
                gold.len(),
                pred.len()
            )));
        }
        gold.iter()
            .zip(pred)
            .try_for_each(|(&g, &p)| self.add(g, p))
    }

    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if other.labels() != self.labels() {
            return Err(Error::Metric(
                "merging tallies over different label sets".into(),
            ));
        }
        for i in 0..self.labels() {
            self.tp[i] += other.tp[i];
            self.fp[i] += other.fp[i];
            self.fn_[i] += other.fn_[i];
        }
        Ok(())
    }

    /// Gold occurrences per label.
    pub fn support(&self) -> Vec<u64> {
        self.tp.iter().zip(&self.fn_).map(|(t, f)| t + f).collect()
    }

    pub fn total(&self) -> u64 {
        self.support().iter().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            0.0
        } else {
            self.tp.iter().sum::<u64>() as f64 / total as f64
        }
    }
}

/// `2tp / (2tp + fp + fn)`, or 0 when the label never occurs in gold or predictions.
pub fn per_class_f1(tally: &ConfusionTally) -> Vec<f64> {
    (0..tally.labels())
        .map(|i| {
            let denom = 2 * tally.tp[i] + tally.fp[i] + tally.fn_[i];
            if denom == 0 {
                0.0
            } else {
                (2 * tally.tp[i]) as f64 / denom as f64
            }
        })
        .collect()
}

pub fn macro_f1(per_label: &[f64]) -> Result<f64> {
    if per_label.is_empty() {
        return Err(Error::Metric("macro-F1 over an empty label set".into()));
    }
    Ok(per_label.iter().sum::<f64>() / per_label.len() as f64)
}

pub fn weighted_f1(per_label: &[f64], support: &[u64]) -> Result<f64> {
    if per_label.is_empty() || per_label.len() != support.len() {
        return Err(Error::Metric(format!(
            "weighted-F1 needs one support per label ({} vs {})",
            per_label.len(),
            support.len()
        )));
    }
    let total: u64 = support.iter().sum();
    if total == 0 {
        return Ok(0.0);
    }
    Ok(per_label
        .iter()
        .zip(support)
        .map(|(f, &s)| f * s as f64)
        .sum::<f64>()
        / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_predictions() {
        let t = ConfusionTally::from_predictions(3, &[0, 1, 2, 1], &[0, 1, 2, 1]).unwrap();
        assert_eq!(per_class_f1(&t), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn unseen_label_scores_zero_and_counts_in_macro() {
        let t = ConfusionTally::from_predictions(3, &[0, 1], &[0, 1]).unwrap();
        let f = per_class_f1(&t);
        assert_eq!(f[2], 0.0);
        assert!((macro_f1(&f).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn counts_example() {
        let t = ConfusionTally {
            tp: vec![3],
            fp: vec![1],
            fn_: vec![2],
        };
        assert!((per_class_f1(&t)[0] - 6.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn macro_and_weighted() {
        assert_eq!(macro_f1(&[1.0, 0.0]).unwrap(), 0.5);
        assert!((weighted_f1(&[1.0, 0.0], &[9, 1]).unwrap() - 0.9).abs() < 1e-15);
        assert!(macro_f1(&[]).is_err());
        assert!(weighted_f1(&[1.0], &[1, 2]).is_err());
    }

    #[test]
    fn tally_errors() {
        assert!(ConfusionTally::from_predictions(2, &[0, 2], &[0, 1]).is_err());
        assert!(ConfusionTally::from_predictions(2, &[0], &[0, 1]).is_err());
    }

    proptest! {
        #[test]
        fn support_sums_to_sentence_count(pairs in prop::collection::vec((0usize..4, 0usize..4), 0..60)) {
            let (g, p): (Vec<_>, Vec<_>) = pairs.iter().copied().unzip();
            let t = ConfusionTally::from_predictions(4, &g, &p).unwrap();
            prop_assert_eq!(t.total(), pairs.len() as u64);
        }

        #[test]
        fn weighted_equals_macro_for_equal_support(f in prop::collection::vec(0.0f64..1.0, 1..10), s in 1u64..50) {
            let support = vec![s; f.len()];
            let w = weighted_f1(&f, &support).unwrap();
            let m = macro_f1(&f).unwrap();
            prop_assert!((w - m).abs() < 1e-12);
        }

        #[test]
        fn macro_ignores_label_order(mut f in prop::collection::vec(0.0f64..1.0, 1..10)) {
            let a = macro_f1(&f).unwrap();
            f.reverse();
            prop_assert!((a - macro_f1(&f).unwrap()).abs() < 1e-12);
        }
    }
}
