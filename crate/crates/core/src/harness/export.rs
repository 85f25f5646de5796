//! Sentence-embedding dumps for external projection tools.

use std::fmt;
use std::fs::File;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::model::{gold_indices, Model};
use crate::corpus::Corpus;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layer {
    /// Attention-pooled sentence vectors, before any prototype injection.
    #[default]
    Pooled,
    /// Outputs of the sentence-level recurrent layer.
    Contextualized,
}

impl FromStr for Layer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pooled" => Ok(Self::Pooled),
            "contextualized" => Ok(Self::Contextualized),
            other => Err(Error::config(format!(
                "layer `{other}` is not available (expected pooled or contextualized)"
            ))),
        }
    }
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Pooled => "pooled",
            Self::Contextualized => "contextualized",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingRow {
    pub doc_id: String,
    pub index: usize,
    pub gold: String,
    pub pred: String,
    pub vector: Vec<f64>,
}

pub fn embedding_rows(model: &Model, corpus: &Corpus, layer: Layer) -> Result<Vec<EmbeddingRow>> {
    let mut rows = Vec::with_capacity(corpus.total_sentences());
    for doc in corpus.documents() {
        let gold = gold_indices(&model.scheme, doc)?;
        let (pred, _) = model.predict(doc)?;
        let m = match layer {
            Layer::Pooled => &pred.embeddings,
            Layer::Contextualized => &pred.contextualized,
        };
        for (i, row) in m.rows().into_iter().enumerate() {
            rows.push(EmbeddingRow {
                doc_id: doc.doc_id.clone(),
                index: i,
                gold: model.scheme.label(gold[i]).to_string(),
                pred: model.scheme.label(pred.labels[i]).to_string(),
                vector: row.to_vec(),
            });
        }
    }
    Ok(rows)
}

/// Tab-separated unless the file name ends in `.csv`. The vector is one
/// space-separated column written with shortest round-trip formatting.
pub fn write_embeddings(rows: &[EmbeddingRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::WriterBuilder::new()
        .delimiter(delimiter(path))
        .from_writer(File::create(path)?);
    w.write_record(["doc_id", "index", "gold", "pred", "vector"])?;
    for r in rows {
        let vector = r
            .vector
            .iter()
            .map(f64::to_string)
            .collect::<Vec<_>>()
            .join(" ");
        w.write_record([
            r.doc_id.as_str(),
            &r.index.to_string(),
            &r.gold,
            &r.pred,
            &vector,
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_embeddings(path: impl AsRef<Path>) -> Result<Vec<EmbeddingRow>> {
    let path = path.as_ref();
    let mut r = csv::ReaderBuilder::new()
        .delimiter(delimiter(path))
        .from_path(path)?;
    r.records()
        .enumerate()
        .map(|(line, rec)| {
            let rec = rec?;
            let bad = |m: &str| Error::MalformedRecord {
                path: path.to_path_buf(),
                line: line + 2,
                message: m.to_string(),
            };
            if rec.len() != 5 {
                return Err(bad("expected 5 columns"));
            }
            Ok(EmbeddingRow {
                doc_id: rec[0].to_string(),
                index: rec[1].parse().map_err(|_| bad("bad index"))?,
                gold: rec[2].to_string(),
                pred: rec[3].to_string(),
                vector: rec[4]
                    .split(' ')
                    .filter(|s| !s.is_empty())
                    .map(|v| v.parse().map_err(|_| bad("bad vector entry")))
                    .collect::<Result<_>>()?,
            })
        })
        .collect()
}

fn delimiter(path: &Path) -> u8 {
    if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
    {
        b','
    } else {
        b'\t'
    }
}

/// Writes the embeddings of every sentence in `corpus`; returns the row count.
pub fn export_embeddings(
    model: &Model,
    corpus: &Corpus,
    layer: Layer,
    path: impl AsRef<Path>,
) -> Result<usize> {
    let rows = embedding_rows(model, corpus, layer)?;
    write_embeddings(&rows, path)?;
    Ok(rows.len())
}
