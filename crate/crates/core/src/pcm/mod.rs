//! Prototype-conditioned modulation: per-role mean embeddings from a frozen
//! embedder, nearest-prototype assignment, and injection into the backbone's
//! sentence vectors.

mod embedder;
mod inject;
mod sampling;

use std::fs;
use std::path::Path;
use std::sync::Arc;

use ndarray::Array2;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document, LabelScheme};
use crate::error::{Error, Result};
use crate::params::ParamStore;
use crate::pbr::NORM_FLOOR;

pub use embedder::{
    builtin_embedders, DocumentEmbedder, EmbedderRegistry, HashBowEmbedder, MeanOfSentences,
    SentenceEmbedder,
};
pub use inject::{
    cln, cross_attention, film, gated_residual, linear_fusion, InjectionKind, InjectionModule,
    InjectionParams, PcmHook, LN_EPS,
};
pub use sampling::{
    kmeans, sample_documents, select_k, silhouette, DocumentPool, KChoice, Sampled,
    SamplingStrategy,
};

pub const DEFAULT_EMBEDDER: &str = "hash-bow:dim=512:seed=11";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PcmConfig {
    pub injection: InjectionKind,
    pub sampling: SamplingStrategy,
    /// Frozen sentence embedder for extraction and assignment.
    pub embedder: String,
    /// Sentence embedder whose per-document mean drives supervised sampling;
    /// defaults to `embedder`.
    pub doc_embedder: Option<String>,
}

impl Default for PcmConfig {
    fn default() -> Self {
        Self {
            injection: InjectionKind::default(),
            sampling: SamplingStrategy::Full,
            embedder: DEFAULT_EMBEDDER.into(),
            doc_embedder: None,
        }
    }
}

impl PcmConfig {
    pub fn validate(&self) -> Result<()> {
        self.sampling.validate()
    }

    pub fn doc_embedder_key(&self) -> &str {
        self.doc_embedder.as_deref().unwrap_or(&self.embedder)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub strategy: SamplingStrategy,
    pub doc_ids: Vec<String>,
    pub embedder: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prototype {
    pub label: String,
    /// Position of `label` in the scheme.
    pub index: usize,
    pub vector: Vec<f64>,
}

/// Role prototypes in scheme order. Roles without any sentence in the pool
/// have no entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrototypeSet {
    prototypes: Vec<Prototype>,
    pub source: Provenance,
    /// Mean document embedding of the pool, used to route documents when
    /// several sets exist.
    pub centroid: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Assigned<'a> {
    pub index: usize,
    pub label: &'a str,
    pub vector: &'a [f64],
}

impl PrototypeSet {
    /// Averages embeddings per label index. Roles are emitted in scheme order.
    pub fn from_embeddings<'a, I>(
        scheme: &LabelScheme,
        labeled: I,
        source: Provenance,
    ) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, &'a [f64])>,
    {
        let mut sums: Vec<Option<(Vec<f64>, usize)>> = vec![None; scheme.len()];
        let mut dim = None;
        for (label, e) in labeled {
            if label >= scheme.len() {
                return Err(Error::LabelOutOfRange {
                    index: label,
                    count: scheme.len(),
                });
            }
            if *dim.get_or_insert(e.len()) != e.len() {
                return Err(Error::shape("sentence embeddings of different widths"));
            }
            let (sum, n) = sums[label].get_or_insert_with(|| (vec![0.0; e.len()], 0));
            sum.iter_mut().zip(e).for_each(|(s, v)| *s += v);
            *n += 1;
        }
        let prototypes: Vec<Prototype> = sums
            .into_iter()
            .enumerate()
            .filter_map(|(index, acc)| {
                acc.map(|(sum, n)| Prototype {
                    label: scheme.label(index).to_string(),
                    index,
                    vector: sum.into_iter().map(|s| s / n as f64).collect(),
                })
            })
            .collect();
        if prototypes.is_empty() {
            return Err(Error::Prototype(
                "no labeled sentences to build prototypes from".into(),
            ));
        }
        let set = Self {
            prototypes,
            source,
            centroid: None,
        };
        set.validate(scheme)?;
        Ok(set)
    }

    pub fn prototypes(&self) -> &[Prototype] {
        &self.prototypes
    }

    pub fn len(&self) -> usize {
        self.prototypes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prototypes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.prototypes.first().map_or(0, |p| p.vector.len())
    }

    pub fn get(&self, label_index: usize) -> Option<&Prototype> {
        self.prototypes.iter().find(|p| p.index == label_index)
    }

    pub fn validate(&self, scheme: &LabelScheme) -> Result<()> {
        let dim = self.dim();
        let mut last = None;
        for p in &self.prototypes {
            if p.index >= scheme.len() || scheme.label(p.index) != p.label {
                return Err(Error::UnknownLabel {
                    label: p.label.clone(),
                    scheme: scheme.name().to_string(),
                });
            }
            if last.is_some_and(|l| l >= p.index) {
                return Err(Error::Prototype(
                    "prototypes must follow scheme order without repeats".into(),
                ));
            }
            last = Some(p.index);
            if p.vector.len() != dim || p.vector.iter().any(|v| !v.is_finite()) {
                return Err(Error::Prototype(format!(
                    "prototype `{}` is not a finite width-{dim} vector",
                    p.label
                )));
            }
            if norm(&p.vector) <= NORM_FLOOR {
                return Err(Error::Prototype(format!(
                    "prototype `{}` has zero norm",
                    p.label
                )));
            }
        }
        Ok(())
    }

    /// Highest cosine similarity wins; ties keep the earlier scheme label.
    pub fn assign(&self, embedding: &[f64]) -> Result<Assigned<'_>> {
        if embedding.len() != self.dim() {
            return Err(Error::shape(format!(
                "embedding width {} vs prototype width {}",
                embedding.len(),
                self.dim()
            )));
        }
        let n = norm(embedding);
        if n < NORM_FLOOR {
            return Err(Error::ZeroNorm("prototype assignment"));
        }
        let mut best: Option<(f64, &Prototype)> = None;
        for p in &self.prototypes {
            let sim = dot(embedding, &p.vector) / (n * norm(&p.vector));
            if best.is_none_or(|(b, _)| sim > b) {
                best = Some((sim, p));
            }
        }
        let (_, p) = best.ok_or_else(|| Error::Prototype("empty prototype set".into()))?;
        Ok(Assigned {
            index: p.index,
            label: &p.label,
            vector: &p.vector,
        })
    }

    /// The gold label's prototype, whatever the similarity.
    pub fn gold_assign(&self, gold: usize) -> Result<Assigned<'_>> {
        let p = self
            .get(gold)
            .ok_or_else(|| Error::Prototype(format!("no prototype for gold label index {gold}")))?;
        Ok(Assigned {
            index: p.index,
            label: &p.label,
            vector: &p.vector,
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Embeds every sentence of the pool's documents and averages per gold role.
pub fn extract_prototypes(
    corpus: &Corpus,
    pool: &DocumentPool,
    embedder: &dyn SentenceEmbedder,
    strategy: &SamplingStrategy,
) -> Result<PrototypeSet> {
    if pool.doc_ids.is_empty() {
        return Err(Error::Prototype("empty document pool".into()));
    }
    let mut labeled = Vec::new();
    for id in &pool.doc_ids {
        let doc = corpus
            .get(id)
            .ok_or_else(|| Error::InvalidSplit(format!("unknown document `{id}`")))?;
        for (s, gold) in doc.sentences.iter().zip(corpus.gold(doc)) {
            labeled.push((gold, embedder.embed(&s.tokens())?));
        }
    }
    let source = Provenance {
        strategy: strategy.clone(),
        doc_ids: pool.doc_ids.clone(),
        embedder: embedder.key().to_string(),
    };
    let mut set = PrototypeSet::from_embeddings(
        corpus.scheme(),
        labeled.iter().map(|(l, e)| (*l, e.as_slice())),
        source,
    )?;
    set.centroid = pool.centroid.clone();
    Ok(set)
}

/// Samples pools from `train` under the configured strategy and extracts
/// one prototype set per pool.
pub fn build_prototype_sets(
    config: &PcmConfig,
    train: &Corpus,
    registry: &EmbedderRegistry,
) -> Result<Vec<PrototypeSet>> {
    config.validate()?;
    let embedder = registry.resolve(&config.embedder)?;
    let doc_embedder = registry.resolve(config.doc_embedder_key())?;
    let sampled = sample_documents(train, &config.sampling, &MeanOfSentences(doc_embedder))?;
    sampled
        .pools
        .iter()
        .map(|pool| extract_prototypes(train, pool, embedder.as_ref(), &config.sampling))
        .collect()
}

const FORMAT: &str = "rrl-prototypes";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct PrototypeFile {
    format: String,
    version: u32,
    scheme: String,
    sets: Vec<PrototypeSet>,
}

pub fn prototypes_to_json(scheme: &LabelScheme, sets: &[PrototypeSet]) -> Result<String> {
    let file = PrototypeFile {
        format: FORMAT.into(),
        version: VERSION,
        scheme: scheme.name().to_string(),
        sets: sets.to_vec(),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

pub fn save_prototypes(
    path: impl AsRef<Path>,
    scheme: &LabelScheme,
    sets: &[PrototypeSet],
) -> Result<()> {
    fs::write(path, prototypes_to_json(scheme, sets)? + "\n")?;
    Ok(())
}

pub fn load_prototypes(path: impl AsRef<Path>, scheme: &LabelScheme) -> Result<Vec<PrototypeSet>> {
    let file: PrototypeFile =
        serde_json::from_str(&fs::read_to_string(&path).map_err(Error::file(&path))?)?;
    if file.format != FORMAT || file.version != VERSION {
        return Err(Error::Prototype(format!(
            "unsupported prototype file {} v{}",
            file.format, file.version
        )));
    }
    if file.scheme != scheme.name() {
        return Err(Error::InvalidScheme(format!(
            "prototypes built for scheme `{}`, not `{}`",
            file.scheme,
            scheme.name()
        )));
    }
    for s in &file.sets {
        s.validate(scheme)?;
    }
    Ok(file.sets)
}

/// Prototype rows for one document plus the label each sentence was routed to.
#[derive(Clone, Debug, PartialEq)]
pub struct DocPrototypes {
    pub matrix: Array2<f64>,
    pub assigned: Vec<usize>,
}

/// Everything PCM needs at train and inference time.
#[derive(Clone, Debug)]
pub struct Pcm {
    pub embedder: Arc<dyn SentenceEmbedder>,
    pub doc_embedder: Arc<dyn SentenceEmbedder>,
    pub sets: Vec<PrototypeSet>,
    pub module: InjectionModule,
}

impl Pcm {
    /// Samples pools from `train`, extracts one prototype set per pool and
    /// registers the injection module for sentence width `dim`.
    pub fn build(
        config: &PcmConfig,
        train: &Corpus,
        dim: usize,
        registry: &EmbedderRegistry,
        store: &mut ParamStore,
        rng: &mut dyn RngCore,
    ) -> Result<Self> {
        let sets = build_prototype_sets(config, train, registry)?;
        Self::from_sets(config, sets, dim, registry, store, rng)
    }

    pub fn from_sets(
        config: &PcmConfig,
        sets: Vec<PrototypeSet>,
        dim: usize,
        registry: &EmbedderRegistry,
        store: &mut ParamStore,
        rng: &mut dyn RngCore,
    ) -> Result<Self> {
        let embedder = registry.resolve(&config.embedder)?;
        let doc_embedder = registry.resolve(config.doc_embedder_key())?;
        if sets.is_empty() {
            return Err(Error::Prototype("no prototype sets".into()));
        }
        if sets.len() > 1 && sets.iter().any(|s| s.centroid.is_none()) {
            return Err(Error::Prototype(
                "several prototype sets need centroids for routing".into(),
            ));
        }
        let proto_dim = sets[0].dim();
        if sets.iter().any(|s| s.dim() != proto_dim) || proto_dim != embedder.dim() {
            return Err(Error::shape(
                "prototype width must match the frozen embedder",
            ));
        }
        let module = InjectionModule::new(config.injection, dim, proto_dim, store, rng)?;
        Ok(Self {
            embedder,
            doc_embedder,
            sets,
            module,
        })
    }

    /// Set whose centroid is most cosine-similar to the document embedding;
    /// the only set when there is just one.
    pub fn select_set(&self, doc: &Document) -> Result<&PrototypeSet> {
        if self.sets.len() == 1 {
            return Ok(&self.sets[0]);
        }
        let e = MeanOfSentences(self.doc_embedder.clone()).embed_document(doc)?;
        let ne = norm(&e);
        if ne < NORM_FLOOR {
            return Err(Error::ZeroNorm("document routing"));
        }
        let mut best: Option<(f64, &PrototypeSet)> = None;
        for s in &self.sets {
            let c = s.centroid.as_deref().unwrap_or_default();
            let sim = dot(&e, c) / (ne * norm(c).max(NORM_FLOOR));
            if best.is_none_or(|(b, _)| sim > b) {
                best = Some((sim, s));
            }
        }
        Ok(best.expect("non-empty sets").1)
    }

    /// Prototype rows for `doc`: nearest prototype by default, or the gold
    /// label's prototype when `gold` is given.
    pub fn prototypes_for(&self, doc: &Document, gold: Option<&[usize]>) -> Result<DocPrototypes> {
        let set = self.select_set(doc)?;
        let mut matrix = Array2::zeros((doc.sentences.len(), set.dim()));
        let mut assigned = Vec::with_capacity(doc.sentences.len());
        for (i, s) in doc.sentences.iter().enumerate() {
            let a = match gold {
                Some(g) => set.gold_assign(
                    *g.get(i)
                        .ok_or_else(|| Error::shape("gold labels shorter than document"))?,
                )?,
                None => set.assign(&self.embedder.embed(&s.tokens())?)?,
            };
            matrix
                .row_mut(i)
                .iter_mut()
                .zip(a.vector)
                .for_each(|(m, v)| *m = *v);
            assigned.push(a.index);
        }
        Ok(DocPrototypes { matrix, assigned })
    }

    pub fn hook(&self, protos: &DocPrototypes) -> PcmHook<'_> {
        PcmHook {
            module: &self.module,
            prototypes: protos.matrix.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::synthetic::SyntheticSpec;
    use crate::corpus::Level;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scheme(n: usize) -> LabelScheme {
        LabelScheme::new("t", Level::Function, (0..n).map(|i| format!("r{i}"))).unwrap()
    }

    fn source() -> Provenance {
        Provenance {
            strategy: SamplingStrategy::Full,
            doc_ids: vec![],
            embedder: "test".into(),
        }
    }

    fn set(vectors: &[(usize, Vec<f64>)]) -> PrototypeSet {
        PrototypeSet::from_embeddings(
            &scheme(5),
            vectors.iter().map(|(l, v)| (*l, v.as_slice())),
            source(),
        )
        .unwrap()
    }

    #[test]
    fn mean_of_one_and_two() {
        let s = set(&[
            (1, vec![1.0, 2.0]),
            (3, vec![0.0, 4.0]),
            (3, vec![2.0, 0.0]),
        ]);
        assert_eq!(s.len(), 2);
        assert_eq!(s.get(1).unwrap().vector, vec![1.0, 2.0]);
        assert_eq!(s.get(3).unwrap().vector, vec![1.0, 2.0]);
        assert!(s.get(0).is_none());
        assert_eq!(s.prototypes()[0].label, "r1");
    }

    #[test]
    fn empty_and_invalid_inputs() {
        let none: Vec<(usize, &[f64])> = vec![];
        assert!(PrototypeSet::from_embeddings(&scheme(2), none, source()).is_err());
        let zero = [0.0, 0.0];
        assert!(PrototypeSet::from_embeddings(&scheme(2), [(0, &zero[..])], source()).is_err());
        let v = [1.0];
        assert!(PrototypeSet::from_embeddings(&scheme(2), [(2, &v[..])], source()).is_err());
    }

    #[test]
    fn assignment_matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let protos: Vec<(usize, Vec<f64>)> = (0..5)
            .map(|i| (i, (0..4).map(|_| rng.random::<f64>() - 0.5).collect()))
            .collect();
        let s = set(&protos);
        for _ in 0..20 {
            let q: Vec<f64> = (0..4).map(|_| rng.random::<f64>() - 0.5).collect();
            let mut best = (f64::NEG_INFINITY, 0);
            for (i, p) in &protos {
                let c = dot(&q, p) / (norm(&q) * norm(p));
                if c > best.0 {
                    best = (c, *i);
                }
            }
            assert_eq!(s.assign(&q).unwrap().index, best.1);
        }
    }

    #[test]
    fn assignment_ties_and_self_similarity() {
        let s = set(&[(2, vec![1.0, 0.0]), (4, vec![0.0, 1.0])]);
        assert_eq!(s.assign(&[3.0, 0.0]).unwrap().label, "r2");
        assert_eq!(s.assign(&[0.0, 1.0]).unwrap().label, "r4");
        assert_eq!(s.assign(&[1.0, 1.0]).unwrap().label, "r2");
        assert!(matches!(s.assign(&[0.0, 0.0]), Err(Error::ZeroNorm(_))));
        assert!(s.assign(&[1.0]).is_err());
    }

    #[test]
    fn gold_assign_ignores_similarity() {
        let s = set(&[(0, vec![1.0, 0.0]), (1, vec![0.0, 1.0])]);
        let q = [1.0, 0.01];
        assert_eq!(s.assign(&q).unwrap().index, 0);
        let g = s.gold_assign(1).unwrap();
        assert_eq!((g.label, g.vector), ("r1", &[0.0, 1.0][..]));
        assert!(s.gold_assign(3).is_err());
    }

    proptest! {
        #[test]
        fn assignment_is_scale_invariant(q in prop::collection::vec(-5.0f64..5.0, 3), k in 0.01f64..100.0) {
            prop_assume!(norm(&q) > 1e-3);
            let s = set(&[(0, vec![1.0, 0.2, 0.0]), (1, vec![-0.3, 1.0, 0.5]), (2, vec![0.0, -1.0, 1.0])]);
            let scaled: Vec<f64> = q.iter().map(|v| v * k).collect();
            prop_assert_eq!(s.assign(&q).unwrap().index, s.assign(&scaled).unwrap().index);
        }

        #[test]
        fn extraction_ignores_order(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut items: Vec<(usize, Vec<f64>)> =
                (0..12).map(|_| (rng.random_range(0..3), (0..2).map(|_| rng.random_range(1..9) as f64).collect())).collect();
            let a = set(&items);
            items.reverse();
            let b = set(&items);
            prop_assert_eq!(a.prototypes().len(), b.prototypes().len());
            for (x, y) in a.prototypes().iter().zip(b.prototypes()) {
                prop_assert_eq!(&x.vector, &y.vector);
            }
        }
    }

    #[test]
    fn pipeline_on_synthetic_corpus() {
        let c = SyntheticSpec::default().generate().unwrap();
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cfg = PcmConfig::default();
        let pcm = Pcm::build(&cfg, &c, 16, &builtin_embedders(), &mut store, &mut rng).unwrap();
        assert_eq!(pcm.sets.len(), 1);
        assert_eq!(pcm.sets[0].len(), c.scheme().len());
        let doc = &c.documents()[0];
        let gold = c.gold(doc);
        let oracle = pcm.prototypes_for(doc, Some(&gold)).unwrap();
        assert_eq!(oracle.assigned, gold);
        let nearest = pcm.prototypes_for(doc, None).unwrap();
        assert_eq!(
            nearest.matrix.dim(),
            (doc.sentences.len(), pcm.embedder.dim())
        );
    }

    #[test]
    fn file_round_trip() {
        let c = SyntheticSpec::default().generate().unwrap();
        let e = builtin_embedders().resolve(DEFAULT_EMBEDDER).unwrap();
        let pool = DocumentPool {
            doc_ids: c.doc_ids().into_iter().map(String::from).collect(),
            centroid: None,
        };
        let s = extract_prototypes(&c, &pool, e.as_ref(), &SamplingStrategy::Full).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        save_prototypes(&path, c.scheme(), std::slice::from_ref(&s)).unwrap();
        let first = std::fs::read(&path).unwrap();
        let back = load_prototypes(&path, c.scheme()).unwrap();
        assert_eq!(back, vec![s.clone()]);
        save_prototypes(&path, c.scheme(), &back).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), first);
        assert!(load_prototypes(&path, &scheme(4)).is_err());
    }
}
