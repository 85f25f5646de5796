//! Documents, sentences, label schemes and document-level splits.

mod io;
mod schemes;
mod split;
pub mod synthetic;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{
    load_corpus, load_corpus_from_str, load_scheme, save_corpus, save_scheme, write_corpus,
};
pub use schemes::{scotus_category_scheme, scotus_function_scheme};
pub use split::{fixed_split, make_kfold_splits, SplitSpec};

/// Annotation granularity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Category,
    Function,
    Step,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Category => "category",
            Level::Function => "function",
            Level::Step => "step",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "category" => Ok(Level::Category),
            "function" => Ok(Level::Function),
            "step" => Ok(Level::Step),
            other => Err(Error::InvalidScheme(format!("unknown level `{other}`"))),
        }
    }
}

#[derive(Deserialize, Serialize)]
struct SchemeRecord {
    name: String,
    level: Level,
    labels: Vec<String>,
}

/// Ordered label inventory at one granularity. The position of a label in
/// `labels()` is its index everywhere downstream.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "SchemeRecord", into = "SchemeRecord")]
pub struct LabelScheme {
    name: String,
    level: Level,
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl PartialEq for LabelScheme {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.level == other.level && self.labels == other.labels
    }
}

impl TryFrom<SchemeRecord> for LabelScheme {
    type Error = Error;

    fn try_from(r: SchemeRecord) -> Result<Self> {
        LabelScheme::new(r.name, r.level, r.labels)
    }
}

impl From<LabelScheme> for SchemeRecord {
    fn from(s: LabelScheme) -> Self {
        SchemeRecord {
            name: s.name,
            level: s.level,
            labels: s.labels,
        }
    }
}

impl LabelScheme {
    pub fn new<S: Into<String>>(
        name: impl Into<String>,
        level: Level,
        labels: impl IntoIterator<Item = S>,
    ) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::InvalidScheme("scheme has no labels".into()));
        }
        let mut index = HashMap::with_capacity(labels.len());
        for (i, l) in labels.iter().enumerate() {
            if l.is_empty() {
                return Err(Error::InvalidScheme("empty label identifier".into()));
            }
            if index.insert(l.clone(), i).is_some() {
                return Err(Error::InvalidScheme(format!("duplicate label `{l}`")));
            }
        }
        Ok(Self {
            name: name.into(),
            level,
            labels,
            index,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn level(&self) -> Level {
        self.level
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }
}

/// Labels of one sentence at each annotated level. Step labels are composite
/// identifiers of the form `category/function/attribute...`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceLabels {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub function: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<String>,
}

impl SentenceLabels {
    pub fn get(&self, level: Level) -> Option<&str> {
        match level {
            Level::Category => self.category.as_deref(),
            Level::Function => self.function.as_deref(),
            Level::Step => self.step.as_deref(),
        }
    }

    pub fn at(level: Level, label: impl Into<String>) -> Self {
        let mut out = Self::default();
        let label = Some(label.into());
        match level {
            Level::Category => out.category = label,
            Level::Function => out.function = label,
            Level::Step => out.step = label,
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sentence {
    pub text: String,
    pub token_count: usize,
    pub labels: SentenceLabels,
}

impl Sentence {
    pub fn new(text: impl Into<String>, labels: SentenceLabels) -> Self {
        let text = text.into();
        let token_count = tokenize(&text).len();
        Self {
            text,
            token_count,
            labels,
        }
    }

    pub fn tokens(&self) -> Vec<String> {
        tokenize(&self.text)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Document {
    pub doc_id: String,
    pub sentences: Vec<Sentence>,
    pub metadata: BTreeMap<String, String>,
}

impl Document {
    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }
}

/// A validated, immutable collection of documents under one label scheme.
#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    documents: Vec<Document>,
    scheme: LabelScheme,
    total_sentences: usize,
}

impl Corpus {
    /// Validates every document against `scheme`: ids unique, no empty
    /// documents or sentences, and every sentence labelled at the scheme level
    /// with a label from the scheme.
    pub fn new(documents: Vec<Document>, scheme: LabelScheme) -> Result<Self> {
        let mut seen = HashSet::with_capacity(documents.len());
        for doc in &documents {
            validate_document(doc, &scheme)?;
            if !seen.insert(doc.doc_id.as_str()) {
                return Err(Error::DuplicateDocument(doc.doc_id.clone()));
            }
        }
        let total_sentences = documents.iter().map(Document::len).sum();
        Ok(Self {
            documents,
            scheme,
            total_sentences,
        })
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn scheme(&self) -> &LabelScheme {
        &self.scheme
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn total_sentences(&self) -> usize {
        self.total_sentences
    }

    pub fn doc_ids(&self) -> Vec<&str> {
        self.documents.iter().map(|d| d.doc_id.as_str()).collect()
    }

    pub fn get(&self, doc_id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.doc_id == doc_id)
    }

    /// Gold label indices of a document at the scheme level.
    pub fn gold(&self, doc: &Document) -> Vec<usize> {
        let level = self.scheme.level();
        doc.sentences
            .iter()
            .map(|s| {
                let label = s.labels.get(level).expect("validated at construction");
                self.scheme
                    .index_of(label)
                    .expect("validated at construction")
            })
            .collect()
    }

    /// Documents whose id is in `ids`, in corpus order.
    pub fn subset<S: AsRef<str>>(&self, ids: &[S]) -> Result<Corpus> {
        let wanted: HashSet<&str> = ids.iter().map(AsRef::as_ref).collect();
        for id in &wanted {
            if self.get(id).is_none() {
                return Err(Error::InvalidSplit(format!("unknown document `{id}`")));
            }
        }
        let documents = self
            .documents
            .iter()
            .filter(|d| wanted.contains(d.doc_id.as_str()))
            .cloned()
            .collect();
        Corpus::new(documents, self.scheme.clone())
    }

    /// Concatenates corpora that share a scheme.
    pub fn concat(parts: &[&Corpus]) -> Result<Corpus> {
        let scheme = parts
            .first()
            .map(|c| c.scheme.clone())
            .ok_or_else(|| Error::InvalidSplit("no corpora to concatenate".into()))?;
        if parts.iter().any(|c| c.scheme != scheme) {
            return Err(Error::InvalidScheme("corpora use different schemes".into()));
        }
        let documents = parts
            .iter()
            .flat_map(|c| c.documents.iter().cloned())
            .collect();
        Corpus::new(documents, scheme)
    }
}

fn validate_document(doc: &Document, scheme: &LabelScheme) -> Result<()> {
    if doc.sentences.is_empty() {
        return Err(Error::EmptyDocument(doc.doc_id.clone()));
    }
    for (index, s) in doc.sentences.iter().enumerate() {
        if s.token_count == 0 {
            return Err(Error::EmptySentence {
                doc_id: doc.doc_id.clone(),
                index,
            });
        }
        let label = s
            .labels
            .get(scheme.level())
            .ok_or_else(|| Error::MissingLabel {
                doc_id: doc.doc_id.clone(),
                index,
                level: scheme.level().to_string(),
            })?;
        if scheme.index_of(label).is_none() {
            return Err(Error::UnknownLabel {
                label: label.to_string(),
                scheme: scheme.name().to_string(),
            });
        }
    }
    Ok(())
}

/// Lowercased alphanumeric word pieces.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scheme() -> LabelScheme {
        LabelScheme::new("toy", Level::Function, ["a", "b"]).unwrap()
    }

    fn doc(id: &str, labels: &[&str]) -> Document {
        Document {
            doc_id: id.into(),
            sentences: labels
                .iter()
                .map(|l| {
                    Sentence::new(
                        format!("text for {l}"),
                        SentenceLabels::at(Level::Function, *l),
                    )
                })
                .collect(),
            metadata: BTreeMap::new(),
        }
    }

    #[test]
    fn scheme_rejects_duplicates_and_empty() {
        assert!(LabelScheme::new("x", Level::Step, Vec::<String>::new()).is_err());
        assert!(LabelScheme::new("x", Level::Step, ["a", "a"]).is_err());
        assert!(LabelScheme::new("x", Level::Step, ["a", ""]).is_err());
    }

    #[test]
    fn scheme_index_follows_declaration_order() {
        let s = LabelScheme::new("x", Level::Category, ["z", "y", "x"]).unwrap();
        assert_eq!(s.index_of("z"), Some(0));
        assert_eq!(s.index_of("x"), Some(2));
        assert_eq!(s.label(1), "y");
    }

    #[test]
    fn corpus_counts_sentences() {
        let c = Corpus::new(
            vec![doc("d1", &["a", "b", "a"]), doc("d2", &["b"])],
            scheme(),
        )
        .unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.total_sentences(), 4);
        assert_eq!(c.gold(&c.documents()[0]), vec![0, 1, 0]);
    }

    #[test]
    fn corpus_rejects_bad_documents() {
        assert!(matches!(
            Corpus::new(vec![doc("d1", &[])], scheme()),
            Err(Error::EmptyDocument(_))
        ));
        assert!(matches!(
            Corpus::new(vec![doc("d1", &["c"])], scheme()),
            Err(Error::UnknownLabel { .. })
        ));
        assert!(matches!(
            Corpus::new(vec![doc("d1", &["a"]), doc("d1", &["b"])], scheme()),
            Err(Error::DuplicateDocument(_))
        ));
        let mut missing = doc("d1", &["a"]);
        missing.sentences[0].labels = SentenceLabels::at(Level::Category, "a");
        assert!(matches!(
            Corpus::new(vec![missing], scheme()),
            Err(Error::MissingLabel { .. })
        ));
    }

    #[test]
    fn tokenizer_lowercases_and_splits() {
        assert_eq!(
            tokenize("We granted certiorari."),
            vec!["we", "granted", "certiorari"]
        );
        assert!(tokenize(" ... ").is_empty());
    }

    #[test]
    fn subset_keeps_corpus_order() {
        let c = Corpus::new(
            vec![doc("d1", &["a"]), doc("d2", &["b"]), doc("d3", &["a"])],
            scheme(),
        )
        .unwrap();
        let s = c.subset(&["d3", "d1"]).unwrap();
        assert_eq!(s.doc_ids(), vec!["d1", "d3"]);
        assert!(c.subset(&["nope"]).is_err());
    }
}
