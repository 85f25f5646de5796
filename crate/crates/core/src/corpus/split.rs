use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Corpus;
use crate::error::{Error, Result};

/// Document-level partition of a corpus.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: Vec<String>,
    pub dev: Vec<String>,
    pub test: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fold_index: Option<usize>,
}

impl SplitSpec {
    /// Checks that partitions are pairwise disjoint and drawn from `corpus`.
    pub fn validate(&self, corpus: &Corpus) -> Result<()> {
        let known: HashSet<&str> = corpus.doc_ids().into_iter().collect();
        let mut seen = HashSet::new();
        for (name, part) in [
            ("train", &self.train),
            ("dev", &self.dev),
            ("test", &self.test),
        ] {
            for id in part {
                if !known.contains(id.as_str()) {
                    return Err(Error::InvalidSplit(format!(
                        "{name} document `{id}` not in corpus"
                    )));
                }
                if !seen.insert(id.as_str()) {
                    return Err(Error::InvalidSplit(format!(
                        "document `{id}` appears in two partitions"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Builds a split from three separately loaded corpora.
pub fn fixed_split(train: &Corpus, dev: &Corpus, test: &Corpus) -> Result<SplitSpec> {
    let ids = |c: &Corpus| {
        c.doc_ids()
            .into_iter()
            .map(String::from)
            .collect::<Vec<_>>()
    };
    let spec = SplitSpec {
        train: ids(train),
        dev: ids(dev),
        test: ids(test),
        fold_index: None,
    };
    let all = Corpus::concat(&[train, dev, test]).map_err(|e| match e {
        Error::DuplicateDocument(id) => {
            Error::InvalidSplit(format!("document `{id}` appears in two partitions"))
        }
        other => other,
    })?;
    spec.validate(&all)?;
    Ok(spec)
}

/// Seeded k-fold partition. Fold `i` is the test set of split `i`, fold
/// `(i + 1) % k` its dev set, and the remaining folds its training set.
/// Fold sizes differ by at most one.
pub fn make_kfold_splits(corpus: &Corpus, k: usize, seed: u64) -> Result<Vec<SplitSpec>> {
    let m = corpus.len();
    if k < 2 {
        return Err(Error::InvalidSplit(format!(
            "k must be at least 2, got {k}"
        )));
    }
    if k > m {
        return Err(Error::InvalidSplit(format!(
            "k = {k} exceeds document count {m}"
        )));
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut fold_of = vec![0usize; m];
    let (base, extra) = (m / k, m % k);
    let mut pos = 0;
    for fold in 0..k {
        let size = base + usize::from(fold < extra);
        for &doc in &order[pos..pos + size] {
            fold_of[doc] = fold;
        }
        pos += size;
    }

    let ids = corpus.doc_ids();
    let collect = |pred: &dyn Fn(usize) -> bool| -> Vec<String> {
        (0..m)
            .filter(|&d| pred(fold_of[d]))
            .map(|d| ids[d].to_string())
            .collect()
    };
    Ok((0..k)
        .map(|i| {
            let dev_fold = (i + 1) % k;
            SplitSpec {
                test: collect(&|f| f == i),
                dev: collect(&|f| f == dev_fold),
                train: collect(&|f| f != i && f != dev_fold),
                fold_index: Some(i),
            }
        })
        .collect())
}
