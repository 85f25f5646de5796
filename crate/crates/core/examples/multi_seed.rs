//! Several seeds per method, aggregated to mean and standard deviation, with
//! a paired test of PBR against the baseline on matched seeds.
//!
//! cargo run --release --example multi_seed

use rrl::encoder::BackboneConfig;
use rrl::harness::{run_multi_seed, ExperimentConfig, Method, OptimizerConfig, TrainOptions};
use rrl::pbr::PbrConfig;

fn main() -> rrl::Result<()> {
    let base = ExperimentConfig {
        backbone: BackboneConfig::small(),
        optimizer: OptimizerConfig {
            learning_rate: 0.01,
            epochs: 8,
            ..OptimizerConfig::default()
        },
        seeds: vec![0, 1, 2, 3, 4],
        ..ExperimentConfig::default()
    };
    let pbr = ExperimentConfig {
        method: Method::Pbr,
        pbr: Some(PbrConfig {
            q: 4,
            ..PbrConfig::default()
        }),
        ..base.clone()
    };
    let opts = TrainOptions::default();
    let (baseline, _) = run_multi_seed(&base, &opts, None)?;
    let (with_pbr, _) = run_multi_seed(&pbr, &opts, Some(&baseline))?;
    for agg in [&baseline, &with_pbr] {
        println!(
            "{:<9} macro-F1 {:.2} ± {:.2}   weighted-F1 {:.2} ± {:.2}",
            agg.method,
            100.0 * agg.macro_mean,
            100.0 * agg.macro_std,
            100.0 * agg.weighted_mean,
            100.0 * agg.weighted_std
        );
    }
    if let Some(s) = &with_pbr.significance_macro {
        println!(
            "pbr vs baseline (macro): t = {:.3}, p = {:.4}, significant at 0.05: {}",
            s.t, s.p_value, s.at_05
        );
    }
    Ok(())
}
