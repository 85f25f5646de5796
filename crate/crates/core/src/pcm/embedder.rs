use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::registry::{fnv1a, KeySpec, Registry};

/// Frozen sentence embedder used for prototype extraction and assignment.
/// Never trained; the same text always maps to the same vector.
pub trait SentenceEmbedder: Send + Sync + fmt::Debug {
    fn key(&self) -> &str;

    fn dim(&self) -> usize;

    fn embed(&self, tokens: &[String]) -> Result<Vec<f64>>;
}

pub type EmbedderRegistry = Registry<dyn SentenceEmbedder>;

/// Registry with the built-in `hash-bow` embedder.
pub fn builtin_embedders() -> EmbedderRegistry {
    let mut r = EmbedderRegistry::default();
    r.register("hash-bow", |spec: &KeySpec| {
        Ok(Arc::new(HashBowEmbedder::from_spec(spec)?) as Arc<dyn SentenceEmbedder>)
    });
    r
}

/// Mean of per-token Gaussian vectors, each seeded by a hash of the token.
/// Sentences sharing vocabulary land close together, which is all a
/// desk-scale stand-in for a pretrained domain encoder needs.
#[derive(Clone, Debug)]
pub struct HashBowEmbedder {
    key: String,
    dim: usize,
    seed: u64,
}

impl HashBowEmbedder {
    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::config("hash-bow embedder needs dim > 0"));
        }
        Ok(Self {
            key: format!("hash-bow:dim={dim}:seed={seed}"),
            dim,
            seed,
        })
    }

    pub fn from_spec(spec: &KeySpec) -> Result<Self> {
        let mut e = Self::new(spec.usize_arg("dim", 64)?, spec.u64_arg("seed", 0)?)?;
        e.key = spec.raw().to_string();
        Ok(e)
    }

    fn token_vector(&self, token: &str) -> impl Iterator<Item = f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(fnv1a(token.as_bytes()) ^ self.seed);
        (0..self.dim).map(move |_| StandardNormal.sample(&mut rng))
    }
}

impl SentenceEmbedder for HashBowEmbedder {
    fn key(&self) -> &str {
        &self.key
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, tokens: &[String]) -> Result<Vec<f64>> {
        if tokens.is_empty() {
            return Err(Error::shape("cannot embed an empty sentence"));
        }
        let mut out = vec![0.0; self.dim];
        for t in tokens {
            for (o, v) in out.iter_mut().zip(self.token_vector(t)) {
                *o += v;
            }
        }
        let n = tokens.len() as f64;
        out.iter_mut().for_each(|o| *o /= n);
        Ok(out)
    }
}

/// Whole-document embedding used by supervised sampling.
pub trait DocumentEmbedder {
    fn embed_document(&self, doc: &Document) -> Result<Vec<f64>>;
}

/// Mean of the document's sentence embeddings.
#[derive(Clone, Debug)]
pub struct MeanOfSentences(pub Arc<dyn SentenceEmbedder>);

impl DocumentEmbedder for MeanOfSentences {
    fn embed_document(&self, doc: &Document) -> Result<Vec<f64>> {
        if doc.sentences.is_empty() {
            return Err(Error::EmptyDocument(doc.doc_id.clone()));
        }
        let mut out = vec![0.0; self.0.dim()];
        for s in &doc.sentences {
            for (o, v) in out.iter_mut().zip(self.0.embed(&s.tokens())?) {
                *o += v;
            }
        }
        let n = doc.sentences.len() as f64;
        out.iter_mut().for_each(|o| *o /= n);
        Ok(out)
    }
}

/// Precomputed document embeddings keyed by document id.
impl DocumentEmbedder for BTreeMap<String, Vec<f64>> {
    fn embed_document(&self, doc: &Document) -> Result<Vec<f64>> {
        self.get(&doc.doc_id)
            .cloned()
            .ok_or_else(|| Error::Prototype(format!("no embedding for document `{}`", doc.doc_id)))
    }
}
