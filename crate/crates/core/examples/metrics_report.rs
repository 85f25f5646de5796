//! Per-role F1, macro and weighted F1, a role-wise comparison table and a
//! paired significance test over seeds.
//!
//! cargo run --example metrics_report

use rrl::metrics::{render_table, significance_test, ConfusionTally, RunReport};

fn main() -> rrl::Result<()> {
    let labels: Vec<String> = ["Facts", "Argument", "Ruling"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let gold = [0, 0, 0, 0, 1, 1, 1, 2, 2, 0, 1, 2];
    let baseline = [0, 0, 1, 0, 1, 0, 1, 2, 1, 0, 1, 2];
    let improved = [0, 0, 0, 0, 1, 1, 1, 2, 1, 0, 1, 2];

    let a = RunReport::from_tally(
        &labels,
        ConfusionTally::from_predictions(3, &gold, &baseline)?,
    )?;
    let b = RunReport::from_tally(
        &labels,
        ConfusionTally::from_predictions(3, &gold, &improved)?,
    )?;
    println!("{}", render_table(&[("Baseline", &a), ("Improved", &b)])?);

    // Macro-F1 of five seeds per system, paired by seed.
    let base_runs = [0.621, 0.634, 0.619, 0.640, 0.627];
    let new_runs = [0.671, 0.689, 0.676, 0.684, 0.680];
    let s = significance_test(&new_runs, &base_runs)?;
    println!(
        "{}: mean diff {:.4}, t = {:.3}, df = {}, p = {:.2e} (0.05: {}, 0.01: {})",
        s.test, s.mean_diff, s.t, s.df, s.p_value, s.at_05, s.at_01
    );
    Ok(())
}
