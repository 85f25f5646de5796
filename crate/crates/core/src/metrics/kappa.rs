use crate::error::{Error, Result};

/// Fleiss' kappa over an `items x categories` table of rater counts. Every
/// item must be rated by the same number (at least two) of raters.
///
/// When raters agree on every item the result is 1, including the degenerate
/// case where a single category is used throughout and chance agreement is
/// also 1.
pub fn fleiss_kappa(ratings: &[Vec<u64>]) -> Result<f64> {
    let first = ratings
        .first()
        .ok_or_else(|| Error::Metric("no rated items".into()))?;
    let k = first.len();
    if k == 0 {
        return Err(Error::Metric("no rating categories".into()));
    }
    let n: u64 = first.iter().sum();
    if n < 2 {
        return Err(Error::Metric(format!(
            "each item needs at least 2 ratings, got {n}"
        )));
    }
    for (i, row) in ratings.iter().enumerate() {
        if row.len() != k {
            return Err(Error::Metric(format!(
                "item {i} has {} categories, expected {k}",
                row.len()
            )));
        }
        let r: u64 = row.iter().sum();
        if r != n {
            return Err(Error::Metric(format!(
                "item {i} has {r} ratings, expected {n}"
            )));
        }
    }
    let items = ratings.len() as f64;
    let nf = n as f64;
    let p_bar = ratings
        .iter()
        .map(|row| {
            let agree: f64 = row.iter().map(|&c| (c * c) as f64).sum();
            (agree - nf) / (nf * (nf - 1.0))
        })
        .sum::<f64>()
        / items;
    let p_e: f64 = (0..k)
        .map(|j| {
            let pj = ratings.iter().map(|row| row[j] as f64).sum::<f64>() / (items * nf);
            pj * pj
        })
        .sum();
    if p_bar == 1.0 {
        return Ok(1.0);
    }
    Ok((p_bar - p_e) / (1.0 - p_e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_agreement() {
        assert_eq!(
            fleiss_kappa(&[vec![3, 0], vec![0, 3], vec![3, 0]]).unwrap(),
            1.0
        );
        assert_eq!(fleiss_kappa(&[vec![2, 0], vec![2, 0]]).unwrap(), 1.0);
    }

    #[test]
    fn chance_level_agreement_is_zero() {
        // Two raters: half the items agree, categories used equally often.
        let k = fleiss_kappa(&[vec![2, 0], vec![0, 2], vec![1, 1], vec![1, 1]]).unwrap();
        assert!(k.abs() < 1e-15);
    }

    /// Spreadsheet-style evaluation: column proportions, per-row agreement,
    /// then the ratio, each as a separate pass.
    #[test]
    fn mixed_table_matches_direct_formula() {
        let t = vec![
            vec![3, 0, 0],
            vec![2, 1, 0],
            vec![1, 1, 1],
            vec![0, 3, 0],
            vec![0, 2, 1],
            vec![1, 0, 2],
            vec![0, 0, 3],
            vec![2, 0, 1],
            vec![1, 2, 0],
            vec![3, 0, 0],
        ];
        let (items, raters) = (10.0, 3.0);
        let mut col = [0.0; 3];
        for row in &t {
            for j in 0..3 {
                col[j] += row[j] as f64;
            }
        }
        let pe: f64 = col.iter().map(|c| (c / (items * raters)).powi(2)).sum();
        let mut pi_sum = 0.0;
        for row in &t {
            let mut s = 0.0;
            for &c in row {
                s += (c as f64) * (c as f64 - 1.0);
            }
            pi_sum += s / (raters * (raters - 1.0));
        }
        let pbar = pi_sum / items;
        let expect = (pbar - pe) / (1.0 - pe);
        assert!((fleiss_kappa(&t).unwrap() - expect).abs() < 1e-12);
        assert!(expect < 1.0);
    }

    #[test]
    fn invalid_tables() {
        assert!(fleiss_kappa(&[]).is_err());
        assert!(fleiss_kappa(&[vec![1, 0]]).is_err());
        assert!(fleiss_kappa(&[vec![2, 0], vec![1, 2]]).is_err());
        assert!(fleiss_kappa(&[vec![2, 0], vec![2]]).is_err());
    }
}
