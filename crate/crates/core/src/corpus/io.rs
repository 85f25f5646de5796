use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{validate_document, Corpus, Document, LabelScheme, Sentence, SentenceLabels};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct DocumentRecord {
    doc_id: String,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
    sentences: Vec<SentenceRecord>,
}

#[derive(Serialize, Deserialize)]
struct SentenceRecord {
    text: String,
    #[serde(default)]
    labels: SentenceLabels,
}

/// Reads a line-delimited corpus, one JSON document per line. Blank lines are skipped.
pub fn load_corpus(path: impl AsRef<Path>, scheme: &LabelScheme) -> Result<Corpus> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path).map_err(Error::file(path))?);
    read_corpus(reader, scheme, path)
}

pub fn load_corpus_from_str(text: &str, scheme: &LabelScheme) -> Result<Corpus> {
    read_corpus(text.as_bytes(), scheme, Path::new("<memory>"))
}

fn read_corpus<R: BufRead>(reader: R, scheme: &LabelScheme, path: &Path) -> Result<Corpus> {
    let mut documents = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: DocumentRecord =
            serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
        let doc = Document {
            doc_id: record.doc_id,
            metadata: record.metadata,
            sentences: record
                .sentences
                .into_iter()
                .map(|s| Sentence::new(s.text, s.labels))
                .collect(),
        };
        validate_document(&doc, scheme)?;
        if !seen.insert(doc.doc_id.clone()) {
            return Err(Error::DuplicateDocument(doc.doc_id));
        }
        documents.push(doc);
    }
    Corpus::new(documents, scheme.clone())
}

/// Canonical form: one compact JSON object per line with keys in a fixed
/// order and metadata sorted by key.
pub fn write_corpus<W: Write>(corpus: &Corpus, mut out: W) -> Result<()> {
    for doc in corpus.documents() {
        let record = DocumentRecord {
            doc_id: doc.doc_id.clone(),
            metadata: doc.metadata.clone(),
            sentences: doc
                .sentences
                .iter()
                .map(|s| SentenceRecord {
                    text: s.text.clone(),
                    labels: s.labels.clone(),
                })
                .collect(),
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write_corpus(
        corpus,
        BufWriter::new(File::create(path).map_err(Error::file(path))?),
    )
}

pub fn load_scheme(path: impl AsRef<Path>) -> Result<LabelScheme> {
    let path = path.as_ref();
    Ok(serde_json::from_reader(BufReader::new(
        File::open(path).map_err(Error::file(path))?,
    ))?)
}

pub fn save_scheme(scheme: &LabelScheme, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, scheme)?;
    w.write_all(b"\n")?;
    Ok(())
}
