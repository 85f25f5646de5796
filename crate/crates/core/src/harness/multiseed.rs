use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::train::{run_seed, SeedRun, TrainOptions};
use crate::error::{Error, Result};
use crate::metrics::{significance_test, AggregateReport};

/// Runs every configured seed (in parallel) and aggregates the held-out
/// reports. With `baseline`, attaches paired significance on matched seeds.
pub fn run_multi_seed(
    cfg: &ExperimentConfig,
    opts: &TrainOptions,
    baseline: Option<&AggregateReport>,
) -> Result<(AggregateReport, Vec<SeedRun>)> {
    if cfg.seeds.len() < 2 {
        return Err(Error::config("multi-seed runs need at least two seeds"));
    }
    let runs = cfg
        .seeds
        .par_iter()
        .map(|&seed| run_seed(cfg, seed, opts))
        .collect::<Result<Vec<_>>>()?;
    let mut agg = AggregateReport::new(
        cfg.method.as_str(),
        runs.iter().map(|r| r.report.clone()).collect(),
    )?;
    if let Some(b) = baseline {
        attach_significance(&mut agg, b)?;
    }
    Ok((agg, runs))
}

/// Paired tests of `agg` against `baseline`; both must cover the same seeds.
pub fn attach_significance(agg: &mut AggregateReport, baseline: &AggregateReport) -> Result<()> {
    let mut ours: Vec<(u64, f64, f64)> = agg
        .runs
        .iter()
        .map(|r| (r.seed, r.macro_f1, r.weighted_f1))
        .collect();
    let mut theirs: Vec<(u64, f64, f64)> = baseline
        .runs
        .iter()
        .map(|r| (r.seed, r.macro_f1, r.weighted_f1))
        .collect();
    ours.sort_by_key(|r| r.0);
    theirs.sort_by_key(|r| r.0);
    let seeds = |v: &[(u64, f64, f64)]| v.iter().map(|r| r.0).collect::<Vec<_>>();
    if seeds(&ours) != seeds(&theirs) {
        return Err(Error::Metric(format!(
            "seed mismatch with baseline: {:?} vs {:?}",
            seeds(&ours),
            seeds(&theirs)
        )));
    }
    let col = |v: &[(u64, f64, f64)], macro_: bool| {
        v.iter()
            .map(|r| if macro_ { r.1 } else { r.2 })
            .collect::<Vec<_>>()
    };
    agg.significance_macro = Some(significance_test(&col(&ours, true), &col(&theirs, true))?);
    agg.significance_weighted = Some(significance_test(&col(&ours, false), &col(&theirs, false))?);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{ConfusionTally, RunReport};

    fn agg(method: &str, seeds: &[u64], scores: &[f64]) -> AggregateReport {
        let labels = vec!["a".to_string()];
        let runs = seeds
            .iter()
            .zip(scores)
            .map(|(&seed, &s)| {
                let mut r = RunReport::from_tally(&labels, ConfusionTally::new(1)).unwrap();
                r.seed = seed;
                r.macro_f1 = s;
                r.weighted_f1 = s;
                r
            })
            .collect();
        AggregateReport::new(method, runs).unwrap()
    }

    #[test]
    fn identical_runs_have_zero_spread() {
        let a = agg("x", &[0, 1, 2, 3, 4], &[0.6; 5]);
        assert_eq!(a.macro_std, 0.0);
        assert_eq!(a.macro_mean, 0.6);
    }

    #[test]
    fn separated_scores_are_flagged() {
        let base = [60.1, 61.3, 59.8, 60.7, 60.2];
        let b = agg("baseline", &[0, 1, 2, 3, 4], &base);
        let shifted: Vec<f64> = base
            .iter()
            .enumerate()
            .map(|(i, v)| v + 2.0 + 0.01 * i as f64)
            .collect();
        let mut a = agg(
            "pcm",
            &[4, 3, 2, 1, 0],
            &shifted.iter().rev().copied().collect::<Vec<_>>(),
        );
        attach_significance(&mut a, &b).unwrap();
        let s = a.significance_macro.unwrap();
        assert!(s.at_01, "p = {}", s.p_value);
        assert!((a.macro_mean - (b.macro_mean + 2.02)).abs() < 1e-9);
    }

    #[test]
    fn seed_mismatch_is_an_error() {
        let b = agg("baseline", &[0, 1, 2], &[1.0, 2.0, 3.0]);
        let mut a = agg("pcm", &[0, 1, 5], &[1.0, 2.0, 3.0]);
        assert!(attach_significance(&mut a, &b).is_err());
    }
}
