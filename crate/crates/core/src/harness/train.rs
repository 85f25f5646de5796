//! Training loop with per-epoch dev selection.

use std::path::PathBuf;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Partition, SelectionMetric};
use super::model::{gold_indices, rng_stream, Checkpoint, Model, Stream};
use super::outputs::OutputLayout;
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::metrics::RunReport;
use crate::optim::{clip_global_norm, Adam};
use crate::pcm::PrototypeSet;
use crate::tape::Graph;

#[derive(Clone, Debug, Default)]
pub struct TrainOptions {
    /// Precomputed prototype sets for PCM methods (skips extraction).
    pub prototypes: Option<Vec<PrototypeSet>>,
    /// Write the best checkpoint under the output directory.
    pub save_checkpoint: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    /// Epochs completed.
    pub epoch: usize,
    /// Best dev score so far; never decreases.
    pub best_dev: Option<f64>,
    pub best_epoch: Option<usize>,
    pub best_checkpoint_path: Option<PathBuf>,
    /// Mean training loss per epoch.
    pub loss_curve: Vec<f64>,
    /// Training loss of every step, in order.
    pub step_losses: Vec<f64>,
    /// Dev selection score after every epoch.
    pub dev_curve: Vec<f64>,
}

impl TrainState {
    /// Records an epoch's dev score; returns whether it is a new best
    /// (strictly greater, so ties keep the earlier epoch).
    pub fn record_dev(&mut self, epoch: usize, score: f64) -> bool {
        self.dev_curve.push(score);
        if self.best_dev.is_none_or(|b| score > b) {
            self.best_dev = Some(score);
            self.best_epoch = Some(epoch);
            true
        } else {
            false
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: Model,
    pub state: TrainState,
    pub checkpoint: Checkpoint,
    pub dev_report: RunReport,
}

pub fn selection_score(report: &RunReport, metric: SelectionMetric) -> f64 {
    match metric {
        SelectionMetric::MacroF1 => report.macro_f1,
        SelectionMetric::WeightedF1 => report.weighted_f1,
    }
}

/// Scores `model` on `corpus` and tags the report with run metadata.
pub fn report_for(
    model: &Model,
    corpus: &Corpus,
    split: &str,
    fingerprint: &str,
    seed: u64,
) -> Result<RunReport> {
    let eval = model.evaluate(corpus)?;
    let mut r = RunReport::from_tally(model.scheme.labels(), eval.tally)?;
    r.seed = seed;
    r.split = split.to_string();
    r.method = model.method.to_string();
    r.fingerprint = fingerprint.to_string();
    r.assignment_accuracy = eval.assignment_accuracy;
    Ok(r)
}

pub fn checkpoint_name(cfg: &ExperimentConfig, seed: u64, fold: Option<usize>) -> String {
    let fold = fold.map(|f| format!("-fold{f}")).unwrap_or_default();
    format!("{}-{}-seed{seed}{fold}.json", cfg.name, cfg.method)
}

/// Trains one model on `part.train`, selecting the epoch with the best dev
/// score. One document per step; PCM prototypes are computed once up front.
pub fn train(
    cfg: &ExperimentConfig,
    part: &Partition,
    seed: u64,
    opts: &TrainOptions,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if part.train.is_empty() {
        return Err(Error::InvalidSplit("no training documents".into()));
    }
    if part.dev.is_empty() {
        return Err(Error::InvalidSplit(
            "no dev documents for model selection".into(),
        ));
    }
    let fingerprint = cfg.fingerprint();
    let scheme = part.train.scheme().clone();
    let mut model = Model::build(cfg, &scheme, &part.train, opts.prototypes.clone(), seed)?;

    let docs = part.train.documents();
    let golds = docs
        .iter()
        .map(|d| gold_indices(&scheme, d))
        .collect::<Result<Vec<_>>>()?;
    let protos = docs
        .iter()
        .map(|d| model.doc_prototypes(d))
        .collect::<Result<Vec<_>>>()?;

    let mut adam = Adam::new(cfg.optimizer.adam);
    let mut dropout_rng = rng_stream(seed, Stream::Dropout);
    let mut shuffle_rng = rng_stream(seed, Stream::Shuffle);
    let mut order: Vec<usize> = (0..docs.len()).collect();
    let mut state = TrainState::default();
    let mut best: Option<Checkpoint> = None;
    let layout = opts
        .save_checkpoint
        .then(|| OutputLayout::new(&cfg.output_dir));
    let ck_path = match &layout {
        Some(l) => Some(
            l.ensure()?
                .checkpoints
                .join(checkpoint_name(cfg, seed, part.fold)),
        ),
        None => None,
    };

    for epoch in 1..=cfg.optimizer.epochs {
        if cfg.optimizer.shuffle {
            order.shuffle(&mut shuffle_rng);
        }
        let mut epoch_loss = 0.0;
        for &i in &order {
            let mut g = Graph::new();
            let (loss, parts) = model.loss(
                &mut g,
                &docs[i],
                &golds[i],
                protos[i].as_ref(),
                Some(&mut dropout_rng),
            )?;
            if !parts.total.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    doc_id: docs[i].doc_id.clone(),
                    loss: parts.total,
                });
            }
            let grads = g.backward(loss);
            let mut grads = grads.param_grads(&model.store);
            clip_global_norm(&mut grads, cfg.optimizer.grad_clip);
            adam.step(&mut model.store, &grads, cfg.optimizer.learning_rate)?;
            state.step_losses.push(parts.total);
            epoch_loss += parts.total;
        }
        state.loss_curve.push(epoch_loss / docs.len() as f64);
        state.epoch = epoch;

        let dev = report_for(&model, &part.dev, "dev", &fingerprint, seed)?;
        let score = selection_score(&dev, cfg.selection_metric);
        log::info!(
            "seed {seed} epoch {epoch}: loss {:.4} dev {:.4}",
            state.loss_curve[epoch - 1],
            score
        );
        if state.record_dev(epoch, score) {
            let ck = model.to_checkpoint(&fingerprint, seed, epoch);
            if let Some(path) = &ck_path {
                ck.save(path)?;
                state.best_checkpoint_path = Some(path.clone());
            }
            best = Some(ck);
        }
    }

    let checkpoint = best.expect("at least one epoch ran");
    let model = Model::from_checkpoint(&checkpoint)?;
    let dev_report = report_for(&model, &part.dev, "dev", &fingerprint, seed)?;
    if let (Some(layout), Some(path)) = (&layout, &ck_path) {
        layout.record_checkpoint(path, &fingerprint, seed, checkpoint.epoch)?;
    }
    Ok(TrainOutcome {
        model,
        state,
        checkpoint,
        dev_report,
    })
}

/// Result of one seed over every partition of the configured split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    /// Held-out report per fold (test split, or dev when there is no test).
    pub folds: Vec<RunReport>,
    pub dev: Vec<RunReport>,
    pub states: Vec<TrainState>,
    /// Mean over folds.
    pub report: RunReport,
}

/// Trains and evaluates one seed on every partition.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64, opts: &TrainOptions) -> Result<SeedRun> {
    let parts = cfg.partitions()?;
    let mut folds = Vec::new();
    let mut dev = Vec::new();
    let mut states = Vec::new();
    for part in &parts {
        let out = train(cfg, part, seed, opts)?;
        let (held, split) = if part.test.is_empty() {
            (&part.dev, "dev")
        } else {
            (&part.test, "test")
        };
        folds.push(report_for(
            &out.model,
            held,
            split,
            &cfg.fingerprint(),
            seed,
        )?);
        dev.push(out.dev_report);
        states.push(out.state);
    }
    let report = RunReport::average(&folds)?;
    Ok(SeedRun {
        seed,
        folds,
        dev,
        states,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn best_dev_is_monotone_and_strict() {
        let mut s = TrainState::default();
        assert!(s.record_dev(1, 0.5));
        assert!(!s.record_dev(2, 0.5));
        assert!(!s.record_dev(3, 0.4));
        assert!(s.record_dev(4, 0.7));
        assert_eq!(s.best_epoch, Some(4));
        assert_eq!(s.best_dev, Some(0.7));
    }
}
