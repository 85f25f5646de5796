//! Dump pooled and contextualized sentence vectors with gold and predicted
//! roles, ready for an external projection tool.
//!
//! cargo run --release --example export_embeddings

use rrl::encoder::BackboneConfig;
use rrl::harness::{
    export_embeddings, read_embeddings, train, ExperimentConfig, Layer, OptimizerConfig,
    TrainOptions,
};

fn main() -> rrl::Result<()> {
    let cfg = ExperimentConfig {
        backbone: BackboneConfig::small(),
        optimizer: OptimizerConfig {
            learning_rate: 0.01,
            epochs: 10,
            ..OptimizerConfig::default()
        },
        ..ExperimentConfig::default()
    };
    let part = cfg.partitions()?.remove(0);
    let out = train(&cfg, &part, 0, &TrainOptions::default())?;

    let dir = std::env::temp_dir().join("rrl-export-example");
    std::fs::create_dir_all(&dir)?;
    for (layer, file) in [
        (Layer::Pooled, "pooled.tsv"),
        (Layer::Contextualized, "contextualized.csv"),
    ] {
        let path = dir.join(file);
        let n = export_embeddings(&out.model, &part.dev, layer, &path)?;
        let rows = read_embeddings(&path)?;
        let first = &rows[0];
        println!(
            "{layer}: {n} rows -> {} (first: {} #{} gold {} pred {}, {} dims)",
            path.display(),
            first.doc_id,
            first.index,
            first.gold,
            first.pred,
            first.vector.len()
        );
    }
    Ok(())
}
