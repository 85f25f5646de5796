//! Seeded synthetic corpora with injective lexical cues.
//!
//! Every sentence contains one cue word owned by exactly one role, surrounded
//! by filler words shared by all roles. The labelling task is therefore
//! solvable from the cue alone, which makes these corpora useful as smoke
//! tests for the full training stack.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Corpus, Document, LabelScheme, Level, Sentence, SentenceLabels, SplitSpec};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub documents: usize,
    pub roles: usize,
    pub min_sentences: usize,
    pub max_sentences: usize,
    pub cues_per_role: usize,
    pub filler_vocab: usize,
    pub filler_per_sentence: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            documents: 8,
            roles: 4,
            min_sentences: 8,
            max_sentences: 12,
            cues_per_role: 1,
            filler_vocab: 40,
            filler_per_sentence: 5,
            seed: 7,
        }
    }
}

impl SyntheticSpec {
    pub fn scheme(&self) -> LabelScheme {
        LabelScheme::new(
            "synthetic",
            Level::Function,
            (0..self.roles).map(|r| format!("role{r}")),
        )
        .expect("role names are unique")
    }

    pub fn cue_word(role: usize, k: usize) -> String {
        format!("cue{role}x{k}")
    }

    /// Generates the corpus. Every document contains every role at least once.
    pub fn generate(&self) -> Result<Corpus> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let scheme = self.scheme();
        let mut docs = Vec::with_capacity(self.documents);
        for d in 0..self.documents {
            let n = rng
                .random_range(self.min_sentences..=self.max_sentences)
                .max(self.roles);
            let mut roles: Vec<usize> = (0..self.roles).collect();
            while roles.len() < n {
                roles.push(rng.random_range(0..self.roles));
            }
            roles.shuffle(&mut rng);
            let sentences = roles
                .into_iter()
                .map(|r| {
                    let mut words: Vec<String> = (0..self.filler_per_sentence)
                        .map(|_| format!("w{}", rng.random_range(0..self.filler_vocab)))
                        .collect();
                    let cue = Self::cue_word(r, rng.random_range(0..self.cues_per_role));
                    let at = rng.random_range(0..=words.len());
                    words.insert(at, cue);
                    Sentence::new(
                        format!("{}.", words.join(" ")),
                        SentenceLabels::at(Level::Function, scheme.label(r)),
                    )
                })
                .collect();
            let mut metadata = BTreeMap::new();
            metadata.insert("source".to_string(), "synthetic".to_string());
            docs.push(Document {
                doc_id: format!("syn{d:03}"),
                sentences,
                metadata,
            });
        }
        Corpus::new(docs, scheme)
    }
}

/// First documents train, then `dev` documents, then `test` documents.
pub fn sequential_split(corpus: &Corpus, dev: usize, test: usize) -> SplitSpec {
    let ids: Vec<String> = corpus.doc_ids().into_iter().map(String::from).collect();
    let n_train = ids.len().saturating_sub(dev + test);
    SplitSpec {
        train: ids[..n_train].to_vec(),
        dev: ids[n_train..n_train + dev].to_vec(),
        test: ids[n_train + dev..].to_vec(),
        fold_index: None,
    }
}
