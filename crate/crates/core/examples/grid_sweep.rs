//! Grid search over prototype count and regularizer weights. Every point is
//! trained and scored on dev; the full table is written for later plotting.
//!
//! cargo run --release --example grid_sweep

use rrl::encoder::BackboneConfig;
use rrl::harness::{
    grid_search, Axis, ExperimentConfig, Grid, Method, OptimizerConfig, OutputLayout, TrainOptions,
};
use rrl::pbr::PbrConfig;

fn main() -> rrl::Result<()> {
    let base = ExperimentConfig {
        name: "grid-example".into(),
        method: Method::Pbr,
        pbr: Some(PbrConfig::default()),
        backbone: BackboneConfig::small(),
        optimizer: OptimizerConfig {
            learning_rate: 0.01,
            epochs: 10,
            ..OptimizerConfig::default()
        },
        output_dir: std::env::temp_dir().join("rrl-grid-example"),
        ..ExperimentConfig::default()
    };
    let grid = Grid::new(vec![
        Axis::parse("q", "2,4,8")?,
        Axis::parse("lambda_prox", "0,0.9")?,
        Axis::parse("lambda_div", "0,0.9")?,
    ]);
    println!("{} configurations", grid.size());
    let result = grid_search(&base, &grid, 0, &TrainOptions::default())?;
    print!("{}", result.render());
    result.save(&OutputLayout::new(&base.output_dir), "pbr-grid")?;
    println!(
        "table written under {}",
        base.output_dir.join("reports").display()
    );
    Ok(())
}
