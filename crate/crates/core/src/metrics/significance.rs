use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

pub const TEST_NAME: &str = "paired two-sided t-test";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Significance {
    pub test: String,
    pub mean_diff: f64,
    pub t: f64,
    pub df: usize,
    pub p_value: f64,
    pub at_05: bool,
    pub at_01: bool,
}

/// Paired two-sided t-test of `a` against `b` over matched runs.
///
/// All-zero differences give `p = 1`; a constant non-zero difference (zero
/// variance) gives `p = 0`.
pub fn significance_test(a: &[f64], b: &[f64]) -> Result<Significance> {
    if a.len() != b.len() {
        return Err(Error::Metric(format!(
            "paired test over {} vs {} scores",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::Metric("paired test needs at least two pairs".into()));
    }
    let n = a.len() as f64;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let df = a.len() - 1;
    let (t, p) = if var == 0.0 {
        if mean == 0.0 {
            (0.0, 1.0)
        } else {
            (mean.signum() * f64::INFINITY, 0.0)
        }
    } else {
        let t = mean / (var / n).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df as f64).map_err(|e| Error::Metric(e.to_string()))?;
        (t, (2.0 * dist.cdf(-t.abs())).min(1.0))
    };
    Ok(Significance {
        test: TEST_NAME.into(),
        mean_diff: mean,
        t,
        df,
        p_value: p,
        at_05: p < 0.05,
        at_01: p < 0.01,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Closed-form CDF of Student's t with 4 degrees of freedom.
    fn t4_cdf(x: f64) -> f64 {
        let u = x * x / 4.0;
        0.5 + 0.375 * x / (1.0 + u).sqrt() * (1.0 - x * x / (12.0 * (1.0 + u)))
    }

    #[test]
    fn five_pair_fixture_matches_closed_form() {
        let a = [62.1, 63.4, 61.8, 64.0, 62.9];
        let b = [61.5, 62.2, 61.9, 62.8, 61.7];
        let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let mean = d.iter().sum::<f64>() / 5.0;
        let sd = (d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0).sqrt();
        let t = mean / (sd / 5f64.sqrt());
        let expect = 2.0 * (1.0 - t4_cdf(t.abs()));
        let got = significance_test(&a, &b).unwrap();
        assert_eq!(got.df, 4);
        assert!((got.t - t).abs() < 1e-12);
        assert!(
            (got.p_value - expect).abs() < 1e-6,
            "{} vs {expect}",
            got.p_value
        );
    }

    #[test]
    fn identical_lists() {
        let s = significance_test(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(s.p_value, 1.0);
        assert!(!s.at_05);
    }

    #[test]
    fn large_shift_is_significant() {
        let b = [60.0, 61.0, 59.5, 60.5, 60.2];
        let a: Vec<f64> = b
            .iter()
            .enumerate()
            .map(|(i, v)| v + 2.0 + 1e-3 * i as f64)
            .collect();
        let s = significance_test(&a, &b).unwrap();
        assert!(s.at_01 && s.at_05);
        let exact: Vec<f64> = b.iter().map(|v| v + 2.0).collect();
        assert!(significance_test(&exact, &b).unwrap().at_01);
    }

    #[test]
    fn invalid_inputs() {
        assert!(significance_test(&[1.0, 2.0], &[1.0]).is_err());
        assert!(significance_test(&[1.0], &[1.0]).is_err());
    }
}
