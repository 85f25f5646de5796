//! Trains the baseline, PBR and PCM on a small synthetic corpus whose roles
//! are marked by dedicated cue words, and prints the dev scores.
//!
//! cargo run --release --example train_synthetic

use std::time::Instant;

use rrl::encoder::BackboneConfig;
use rrl::harness::{train, ExperimentConfig, Method, TrainOptions};
use rrl::metrics::render_table;
use rrl::pbr::PbrConfig;
use rrl::pcm::PcmConfig;

fn main() -> rrl::Result<()> {
    env_logger::init();
    let base = ExperimentConfig {
        backbone: BackboneConfig::small(),
        optimizer: rrl::harness::OptimizerConfig {
            learning_rate: 0.01,
            ..Default::default()
        },
        ..ExperimentConfig::default()
    };
    let configs = [
        ("Baseline", base.clone()),
        (
            "+PBR",
            ExperimentConfig {
                method: Method::Pbr,
                pbr: Some(PbrConfig {
                    q: 4,
                    ..PbrConfig::default()
                }),
                ..base.clone()
            },
        ),
        (
            "+PCM",
            ExperimentConfig {
                method: Method::Pcm,
                pcm: Some(PcmConfig::default()),
                ..base.clone()
            },
        ),
    ];
    let part = base.partitions()?.remove(0);
    let mut reports = Vec::new();
    for (name, cfg) in &configs {
        let start = Instant::now();
        let out = train(cfg, &part, 0, &TrainOptions::default())?;
        println!(
            "{name:<9} best epoch {:>2}  dev macro-F1 {:.4}  ({:.1?})",
            out.state.best_epoch.unwrap_or(0),
            out.dev_report.macro_f1,
            start.elapsed()
        );
        reports.push((*name, out.dev_report));
    }
    let columns: Vec<(&str, &rrl::metrics::RunReport)> =
        reports.iter().map(|(n, r)| (*n, r)).collect();
    println!("\n{}", render_table(&columns)?);
    Ok(())
}
