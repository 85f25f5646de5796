//! Hierarchical backbone: token encoder, word-level bidirectional recurrence,
//! attention pooling, sentence-level bidirectional recurrence, and a CRF (or
//! per-sentence softmax) output layer.

pub mod crf;
mod pooling;
mod recurrent;
mod token;

use std::sync::Arc;

use ndarray::Array2;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::layers::{dropout, Linear};
use crate::params::ParamStore;
use crate::tape::{Graph, Var};

pub use crf::CrfLayer;
pub use pooling::{attention_pool, AttentionPooler, Pooled};
pub use recurrent::{BiRnn, CellKind, Rnn};
pub use token::{builtin_encoders, EncoderRegistry, RandomSmallEncoder, TokenEncoder};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackboneConfig {
    /// Token encoder registry key.
    pub encoder: String,
    pub finetune_encoder: bool,
    pub cell: CellKind,
    pub dropout: f64,
    pub max_seq_len: usize,
    /// Output width of the bidirectional word-level layer (and of sentence vectors).
    pub word_rnn_dim: usize,
    /// Output width of the bidirectional sentence-level layer.
    pub sent_rnn_dim: usize,
    pub attn_dim: usize,
    pub use_crf: bool,
}

impl Default for BackboneConfig {
    fn default() -> Self {
        Self {
            encoder: "bert-base-uncased".into(),
            finetune_encoder: true,
            cell: CellKind::Lstm,
            dropout: 0.5,
            max_seq_len: 128,
            word_rnn_dim: 768,
            sent_rnn_dim: 768,
            attn_dim: 200,
            use_crf: true,
        }
    }
}

impl BackboneConfig {
    /// Small dimensions for tests and examples with the `random-small` encoder.
    pub fn small() -> Self {
        Self {
            encoder: "random-small:dim=16:seed=7:buckets=512".into(),
            dropout: 0.1,
            max_seq_len: 32,
            word_rnn_dim: 16,
            sent_rnn_dim: 16,
            attn_dim: 8,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config(format!(
                "dropout must be in [0, 1), got {}",
                self.dropout
            )));
        }
        for (name, v) in [
            ("max_seq_len", self.max_seq_len),
            ("word_rnn_dim", self.word_rnn_dim),
            ("sent_rnn_dim", self.sent_rnn_dim),
            ("attn_dim", self.attn_dim),
        ] {
            if v == 0 {
                return Err(Error::config(format!("{name} must be positive")));
            }
        }
        for (name, v) in [
            ("word_rnn_dim", self.word_rnn_dim),
            ("sent_rnn_dim", self.sent_rnn_dim),
        ] {
            if v % 2 != 0 {
                return Err(Error::config(format!(
                    "{name} must be even (split across two directions)"
                )));
            }
        }
        Ok(())
    }
}

/// Transformation applied to the `T x d` pooled sentence vectors before the
/// sentence-level layer.
pub trait SentenceHook {
    fn apply(&self, g: &mut Graph, store: &ParamStore, sentences: Var) -> Result<Var>;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct IdentityHook;

impl SentenceHook for IdentityHook {
    fn apply(&self, _g: &mut Graph, _store: &ParamStore, sentences: Var) -> Result<Var> {
        Ok(sentences)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ForwardVars {
    /// `T x d` pooled sentence vectors (before any hook).
    pub embeddings: Var,
    /// `T x sent_rnn_dim` sentence-level outputs.
    pub contextualized: Var,
    /// `T x L` label scores.
    pub emissions: Var,
}

#[derive(Clone, Debug)]
pub struct Prediction {
    pub embeddings: Array2<f64>,
    pub contextualized: Array2<f64>,
    pub emissions: Array2<f64>,
    pub labels: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct Backbone {
    config: BackboneConfig,
    encoder: Arc<dyn TokenEncoder>,
    word_rnn: BiRnn,
    pooler: AttentionPooler,
    sent_rnn: BiRnn,
    emission: Linear,
    crf: CrfLayer,
}

impl Backbone {
    /// Registers all backbone parameters in `store`, encoder weights first.
    pub fn new(
        config: BackboneConfig,
        labels: usize,
        encoder: Arc<dyn TokenEncoder>,
        store: &mut ParamStore,
        rng: &mut dyn RngCore,
    ) -> Result<Self> {
        config.validate()?;
        if labels == 0 {
            return Err(Error::config("backbone needs at least one label"));
        }
        encoder.init_params(store)?;
        let word_rnn = BiRnn::new(
            "word_rnn",
            config.cell,
            encoder.dim(),
            config.word_rnn_dim,
            store,
            rng,
        )?;
        let pooler =
            AttentionPooler::new("pool", config.word_rnn_dim, config.attn_dim, store, rng)?;
        let sent_rnn = BiRnn::new(
            "sent_rnn",
            config.cell,
            config.word_rnn_dim,
            config.sent_rnn_dim,
            store,
            rng,
        )?;
        let emission = Linear::new("emission", config.sent_rnn_dim, labels, store, rng)?;
        let crf = CrfLayer::new("crf", labels, store, rng)?;
        Ok(Self {
            config,
            encoder,
            word_rnn,
            pooler,
            sent_rnn,
            emission,
            crf,
        })
    }

    pub fn config(&self) -> &BackboneConfig {
        &self.config
    }

    pub fn labels(&self) -> usize {
        self.crf.labels()
    }

    /// Width of the pooled sentence vectors.
    pub fn sentence_dim(&self) -> usize {
        self.config.word_rnn_dim
    }

    pub fn crf(&self) -> &CrfLayer {
        &self.crf
    }

    pub fn pooler(&self) -> &AttentionPooler {
        &self.pooler
    }

    /// Pooled `1 x d` vector of one sentence. Tokens beyond `max_seq_len` are dropped.
    pub fn encode_sentence(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        tokens: &[String],
    ) -> Result<Var> {
        let tokens = &tokens[..tokens.len().min(self.config.max_seq_len)];
        let states = self
            .encoder
            .encode(g, store, tokens, self.config.finetune_encoder)?;
        let states = self.word_rnn.forward(g, store, states);
        Ok(self.pooler.pool(g, store, states)?.vector)
    }

    /// Builds the document graph. `dropout_rng` switches training-mode dropout on.
    pub fn forward(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        doc: &Document,
        hook: Option<&dyn SentenceHook>,
        mut dropout_rng: Option<&mut dyn RngCore>,
    ) -> Result<ForwardVars> {
        if doc.sentences.is_empty() {
            return Err(Error::EmptyDocument(doc.doc_id.clone()));
        }
        let mut rows = Vec::with_capacity(doc.sentences.len());
        for (index, s) in doc.sentences.iter().enumerate() {
            let tokens = s.tokens();
            if tokens.is_empty() {
                return Err(Error::EmptySentence {
                    doc_id: doc.doc_id.clone(),
                    index,
                });
            }
            rows.push(self.encode_sentence(g, store, &tokens)?);
        }
        let embeddings = g.concat_rows(&rows);
        let mut v = match hook {
            Some(h) => h.apply(g, store, embeddings)?,
            None => embeddings,
        };
        v = dropout(g, v, self.config.dropout, dropout_rng.as_deref_mut());
        let c = self.sent_rnn.forward(g, store, v);
        let c_drop = dropout(g, c, self.config.dropout, dropout_rng);
        let emissions = self.emission.forward(g, store, c_drop);
        Ok(ForwardVars {
            embeddings,
            contextualized: c,
            emissions,
        })
    }

    /// CRF negative log-likelihood, or summed cross-entropy when the CRF is off.
    pub fn task_loss(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        emissions: Var,
        gold: &[usize],
    ) -> Result<Var> {
        if gold.len() != g.value(emissions).nrows() {
            return Err(Error::shape(format!(
                "{} gold labels for {} sentences",
                gold.len(),
                g.value(emissions).nrows()
            )));
        }
        if self.config.use_crf {
            self.crf.nll(g, store, emissions, gold)
        } else {
            crf::cross_entropy_node(g, emissions, gold)
        }
    }

    pub fn decode(&self, store: &ParamStore, emissions: &Array2<f64>) -> Result<Vec<usize>> {
        if self.config.use_crf {
            self.crf.decode(store, emissions)
        } else {
            Ok(crf::argmax_rows(emissions))
        }
    }

    /// Evaluation-mode forward pass followed by decoding.
    pub fn predict(
        &self,
        store: &ParamStore,
        doc: &Document,
        hook: Option<&dyn SentenceHook>,
    ) -> Result<Prediction> {
        let mut g = Graph::new();
        let out = self.forward(&mut g, store, doc, hook, None)?;
        let emissions = g.value(out.emissions).clone();
        let labels = self.decode(store, &emissions)?;
        Ok(Prediction {
            embeddings: g.value(out.embeddings).clone(),
            contextualized: g.value(out.contextualized).clone(),
            emissions,
            labels,
        })
    }
}
