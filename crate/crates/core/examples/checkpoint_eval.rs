//! Train with checkpointing, reload the best checkpoint, evaluate it on the
//! held-out split, and show that a different config is refused.
//!
//! cargo run --release --example checkpoint_eval

use rrl::corpus::synthetic::SyntheticSpec;
use rrl::encoder::BackboneConfig;
use rrl::harness::{
    report_for, train, Checkpoint, CorpusConfig, ExperimentConfig, Model, OptimizerConfig,
    TrainOptions,
};
use rrl::metrics::render_table;

fn main() -> rrl::Result<()> {
    let cfg = ExperimentConfig {
        name: "checkpoint-example".into(),
        corpus: CorpusConfig::Synthetic {
            spec: SyntheticSpec {
                documents: 12,
                ..SyntheticSpec::default()
            },
            dev: 2,
            test: 2,
        },
        backbone: BackboneConfig::small(),
        optimizer: OptimizerConfig {
            learning_rate: 0.01,
            epochs: 15,
            ..OptimizerConfig::default()
        },
        output_dir: std::env::temp_dir().join("rrl-checkpoint-example"),
        ..ExperimentConfig::default()
    };
    let part = cfg.partitions()?.remove(0);
    let opts = TrainOptions {
        save_checkpoint: true,
        ..TrainOptions::default()
    };
    let out = train(&cfg, &part, 0, &opts)?;
    let path = out
        .state
        .best_checkpoint_path
        .expect("checkpoint was saved");
    println!(
        "best epoch {} saved to {}",
        out.checkpoint.epoch,
        path.display()
    );

    let ck = Checkpoint::load(&path)?;
    ck.ensure_matches(&cfg)?;
    let model = Model::from_checkpoint(&ck)?;
    let report = report_for(&model, &part.test, "test", &ck.fingerprint, ck.seed)?;
    println!("{}", render_table(&[("reloaded", &report)])?);

    let mut other = cfg.clone();
    other.optimizer.learning_rate = 0.001;
    match ck.ensure_matches(&other) {
        Err(e) => println!("refused: {e}"),
        Ok(()) => unreachable!("fingerprints differ"),
    }
    Ok(())
}
