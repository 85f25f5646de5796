//! Experiment plumbing: configs, training, sweeps, multi-seed aggregation,
//! checkpoints and exports.

mod config;
mod export;
mod grid;
mod model;
mod multiseed;
mod outputs;
mod train;

pub use config::{
    CorpusConfig, ExperimentConfig, Method, OptimizerConfig, Partition, SelectionMetric,
    SplitConfig, ENV_DATA_DIR, ENV_DEVICE, ENV_OUTPUT_DIR, LR_GRID,
};
pub use export::{
    embedding_rows, export_embeddings, read_embeddings, write_embeddings, EmbeddingRow, Layer,
};
pub use grid::{grid_search, Axis, Grid, GridResult, GridRow};
pub use model::{
    gold_indices, rng_stream, Checkpoint, Evaluation, Model, PcmSection, StepLoss, Stream,
    CHECKPOINT_FORMAT,
};
pub use multiseed::{attach_significance, run_multi_seed};
pub use outputs::{Manifest, ManifestEntry, OutputLayout, MANIFEST};
pub use train::{
    checkpoint_name, report_for, run_seed, selection_score, train, SeedRun, TrainOptions,
    TrainOutcome, TrainState,
};
