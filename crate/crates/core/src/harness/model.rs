//! A trainable model for one method: backbone plus the optional PBR bank or
//! PCM prototypes and injection module, all sharing one parameter store.

use std::fs;
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Method};
use crate::corpus::{Corpus, Document, LabelScheme};
use crate::encoder::{builtin_encoders, Backbone, BackboneConfig, Prediction, SentenceHook};
use crate::error::{Error, Result};
use crate::metrics::ConfusionTally;
use crate::params::{NamedMatrix, ParamStore};
use crate::pbr::{regularize, PbrConfig, PbrTerms, SoftPrototypeBank};
use crate::pcm::{builtin_embedders, DocPrototypes, Pcm, PcmConfig, PrototypeSet};
use crate::tape::{Graph, Var};

/// Independent random streams of one run, so that enabling one component
/// never shifts the randomness seen by another.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    ModelInit = 0,
    Dropout = 1,
    PbrBank = 2,
    PcmInit = 3,
    Shuffle = 4,
}

pub fn rng_stream(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Gold label indices of `doc` under `scheme`.
pub fn gold_indices(scheme: &LabelScheme, doc: &Document) -> Result<Vec<usize>> {
    doc.sentences
        .iter()
        .enumerate()
        .map(|(index, s)| {
            let label = s
                .labels
                .get(scheme.level())
                .ok_or_else(|| Error::MissingLabel {
                    doc_id: doc.doc_id.clone(),
                    index,
                    level: scheme.level().to_string(),
                })?;
            scheme.index_of(label).ok_or_else(|| Error::UnknownLabel {
                label: label.to_string(),
                scheme: scheme.name().to_string(),
            })
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct Model {
    pub method: Method,
    pub scheme: LabelScheme,
    pub backbone: Backbone,
    pub store: ParamStore,
    pub pbr: Option<(PbrConfig, SoftPrototypeBank)>,
    pub pcm: Option<Pcm>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepLoss {
    pub total: f64,
    pub task: f64,
    pub pbr: Option<PbrTerms>,
}

impl Model {
    /// Builds a fresh model. For PCM methods, `prototypes` supplies
    /// precomputed sets; otherwise they are extracted from `train`.
    pub fn build(
        cfg: &ExperimentConfig,
        scheme: &LabelScheme,
        train: &Corpus,
        prototypes: Option<Vec<PrototypeSet>>,
        seed: u64,
    ) -> Result<Self> {
        let sets = match (&cfg.pcm, cfg.method.uses_pcm()) {
            (Some(_), true) => Some(prototypes),
            _ => None,
        };
        Self::assemble(
            cfg.method,
            scheme,
            &cfg.backbone,
            cfg.pbr.as_ref(),
            cfg.pcm.as_ref().zip(sets),
            train,
            seed,
        )
    }

    fn assemble(
        method: Method,
        scheme: &LabelScheme,
        backbone_cfg: &BackboneConfig,
        pbr: Option<&PbrConfig>,
        pcm: Option<(&PcmConfig, Option<Vec<PrototypeSet>>)>,
        train: &Corpus,
        seed: u64,
    ) -> Result<Self> {
        let encoder = builtin_encoders().resolve(&backbone_cfg.encoder)?;
        let mut store = ParamStore::new();
        let backbone = Backbone::new(
            backbone_cfg.clone(),
            scheme.len(),
            encoder,
            &mut store,
            &mut rng_stream(seed, Stream::ModelInit),
        )?;
        let pbr = match pbr {
            Some(p) if method == Method::Pbr => {
                p.validate()?;
                let bank = SoftPrototypeBank::new(
                    &mut store,
                    p.q,
                    backbone.sentence_dim(),
                    &mut rng_stream(seed, Stream::PbrBank),
                )?;
                Some((p.clone(), bank))
            }
            _ => None,
        };
        let pcm = match pcm {
            Some((p, sets)) if method.uses_pcm() => {
                let registry = builtin_embedders();
                let mut rng = rng_stream(seed, Stream::PcmInit);
                let dim = backbone.sentence_dim();
                Some(match sets {
                    Some(sets) => {
                        for s in &sets {
                            s.validate(scheme)?;
                        }
                        Pcm::from_sets(p, sets, dim, &registry, &mut store, &mut rng)?
                    }
                    None => Pcm::build(p, train, dim, &registry, &mut store, &mut rng)?,
                })
            }
            _ => None,
        };
        Ok(Self {
            method,
            scheme: scheme.clone(),
            backbone,
            store,
            pbr,
            pcm,
        })
    }

    /// Prototype rows for `doc` (PCM methods only). The gold-oracle method
    /// routes every sentence to its gold label's prototype.
    pub fn doc_prototypes(&self, doc: &Document) -> Result<Option<DocPrototypes>> {
        let Some(pcm) = &self.pcm else {
            return Ok(None);
        };
        let gold = match self.method {
            Method::PcmGold => Some(gold_indices(&self.scheme, doc)?),
            _ => None,
        };
        pcm.prototypes_for(doc, gold.as_deref()).map(Some)
    }

    /// Training loss of one document. `protos` must come from
    /// [`Model::doc_prototypes`] for the same document.
    pub fn loss(
        &self,
        g: &mut Graph,
        doc: &Document,
        gold: &[usize],
        protos: Option<&DocPrototypes>,
        dropout_rng: Option<&mut dyn RngCore>,
    ) -> Result<(Var, StepLoss)> {
        let hook = self.hook(protos)?;
        let out = self.backbone.forward(
            g,
            &self.store,
            doc,
            hook.as_ref().map(|h| h as &dyn SentenceHook),
            dropout_rng,
        )?;
        let task = self
            .backbone
            .task_loss(g, &self.store, out.emissions, gold)?;
        let task_value = g.scalar(task);
        match &self.pbr {
            Some((cfg, bank)) => {
                let protos = g.param(&self.store, bank.id);
                let (total, terms) = regularize(g, task, out.embeddings, protos, cfg)?;
                Ok((
                    total,
                    StepLoss {
                        total: g.scalar(total),
                        task: task_value,
                        pbr: Some(terms),
                    },
                ))
            }
            None => Ok((
                task,
                StepLoss {
                    total: task_value,
                    task: task_value,
                    pbr: None,
                },
            )),
        }
    }

    fn hook<'a>(
        &'a self,
        protos: Option<&DocPrototypes>,
    ) -> Result<Option<crate::pcm::PcmHook<'a>>> {
        match (&self.pcm, protos) {
            (Some(pcm), Some(p)) => Ok(Some(pcm.hook(p))),
            (None, None) => Ok(None),
            (Some(_), None) => Err(Error::Prototype(
                "PCM model called without prototypes".into(),
            )),
            (None, Some(_)) => Err(Error::Prototype(
                "prototypes given to a model without PCM".into(),
            )),
        }
    }

    pub fn predict(&self, doc: &Document) -> Result<(Prediction, Option<DocPrototypes>)> {
        let protos = self.doc_prototypes(doc)?;
        let hook = self.hook(protos.as_ref())?;
        let pred = self.backbone.predict(
            &self.store,
            doc,
            hook.as_ref().map(|h| h as &dyn SentenceHook),
        )?;
        Ok((pred, protos))
    }

    /// Confusion counts over `corpus` and, for PCM methods, the share of
    /// sentences whose assigned prototype is their gold label's.
    pub fn evaluate(&self, corpus: &Corpus) -> Result<Evaluation> {
        let mut tally = ConfusionTally::new(self.scheme.len());
        let (mut hits, mut total) = (0usize, 0usize);
        for doc in corpus.documents() {
            let gold = gold_indices(&self.scheme, doc)?;
            let (pred, protos) = self.predict(doc)?;
            tally.add_all(&gold, &pred.labels)?;
            if let Some(p) = protos {
                hits += p.assigned.iter().zip(&gold).filter(|(a, g)| a == g).count();
                total += gold.len();
            }
        }
        Ok(Evaluation {
            tally,
            assignment_accuracy: (self.pcm.is_some() && total > 0)
                .then(|| hits as f64 / total as f64),
        })
    }

    pub fn to_checkpoint(&self, fingerprint: &str, seed: u64, epoch: usize) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            fingerprint: fingerprint.to_string(),
            seed,
            epoch,
            method: self.method,
            scheme: self.scheme.clone(),
            backbone: self.backbone.config().clone(),
            pbr: self.pbr.as_ref().map(|(c, _)| c.clone()),
            pcm: self.pcm.as_ref().map(|p| PcmSection {
                injection: p.module.kind,
                embedder: p.embedder.key().to_string(),
                doc_embedder: p.doc_embedder.key().to_string(),
                sets: p.sets.clone(),
            }),
            params: self.store.to_named(),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        ck.check_header()?;
        let pcm_cfg = ck.pcm.as_ref().map(|p| PcmConfig {
            injection: p.injection,
            embedder: p.embedder.clone(),
            doc_embedder: Some(p.doc_embedder.clone()),
            ..PcmConfig::default()
        });
        let empty = Corpus::new(Vec::new(), ck.scheme.clone())?;
        let mut model = Self::assemble(
            ck.method,
            &ck.scheme,
            &ck.backbone,
            ck.pbr.as_ref(),
            pcm_cfg
                .as_ref()
                .zip(ck.pcm.as_ref().map(|p| Some(p.sets.clone()))),
            &empty,
            0,
        )?;
        model.store.load_named(&ck.params)?;
        Ok(model)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub tally: ConfusionTally,
    pub assignment_accuracy: Option<f64>,
}

pub const CHECKPOINT_FORMAT: &str = "rrl-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcmSection {
    pub injection: crate::pcm::InjectionKind,
    pub embedder: String,
    pub doc_embedder: String,
    pub sets: Vec<PrototypeSet>,
}

/// Everything needed to rebuild a trained model without its config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub fingerprint: String,
    pub seed: u64,
    pub epoch: usize,
    pub method: Method,
    pub scheme: LabelScheme,
    pub backbone: BackboneConfig,
    pub pbr: Option<PbrConfig>,
    pub pcm: Option<PcmSection>,
    pub params: Vec<NamedMatrix>,
}

impl Checkpoint {
    fn check_header(&self) -> Result<()> {
        if self.format != CHECKPOINT_FORMAT || self.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint {} v{}",
                self.format, self.version
            )));
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string(self)? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let ck: Self =
            serde_json::from_str(&fs::read_to_string(&path).map_err(Error::file(&path))?)?;
        ck.check_header()?;
        Ok(ck)
    }

    /// Refuses checkpoints trained under a different configuration.
    pub fn ensure_matches(&self, cfg: &ExperimentConfig) -> Result<()> {
        let fp = cfg.fingerprint();
        if fp != self.fingerprint {
            return Err(Error::FingerprintMismatch {
                checkpoint: self.fingerprint.clone(),
                config: fp,
            });
        }
        Ok(())
    }
}
