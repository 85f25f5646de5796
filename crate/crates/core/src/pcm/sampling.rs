//! Choosing which training documents feed prototype extraction.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::embedder::DocumentEmbedder;
use crate::corpus::Corpus;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[derive(Default)]
pub enum SamplingStrategy {
    /// Every training document.
    #[default]
    Full,
    /// A seeded uniform subset of `ceil(fraction * M)` documents.
    Random {
        fraction: f64,
        #[serde(default)]
        seed: u64,
    },
    /// K-means over document embeddings; one pool per cluster, with `k`
    /// picked by the best silhouette score inside `cluster_range`.
    Supervised {
        #[serde(default = "default_cluster_range")]
        cluster_range: [usize; 2],
        #[serde(default)]
        seed: u64,
    },
}

fn default_cluster_range() -> [usize; 2] {
    [2, 10]
}

impl SamplingStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Full => "full",
            Self::Random { .. } => "random",
            Self::Supervised { .. } => "supervised",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Full => Ok(()),
            Self::Random { fraction, .. } => {
                if *fraction > 0.0 && *fraction <= 1.0 {
                    Ok(())
                } else {
                    Err(Error::config(format!(
                        "sampling fraction must be in (0, 1], got {fraction}"
                    )))
                }
            }
            Self::Supervised {
                cluster_range: [lo, hi],
                ..
            } => {
                if *lo < 2 || lo > hi {
                    Err(Error::config(format!(
                        "cluster range [{lo}, {hi}] must satisfy 2 <= lo <= hi"
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// A group of documents from which one prototype set is extracted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DocumentPool {
    pub doc_ids: Vec<String>,
    /// Mean document embedding, present for supervised pools.
    pub centroid: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sampled {
    pub pools: Vec<DocumentPool>,
    /// Silhouette score per evaluated `k` (supervised only).
    pub silhouettes: Vec<(usize, f64)>,
}

pub fn sample_documents(
    corpus: &Corpus,
    strategy: &SamplingStrategy,
    embedder: &dyn DocumentEmbedder,
) -> Result<Sampled> {
    strategy.validate()?;
    let m = corpus.len();
    if m == 0 {
        return Err(Error::Prototype(
            "cannot sample from an empty corpus".into(),
        ));
    }
    let ids: Vec<String> = corpus.doc_ids().into_iter().map(String::from).collect();
    match strategy {
        SamplingStrategy::Full => Ok(Sampled {
            pools: vec![DocumentPool {
                doc_ids: ids,
                centroid: None,
            }],
            silhouettes: Vec::new(),
        }),
        SamplingStrategy::Random { fraction, seed } => {
            let n = ((fraction * m as f64).ceil() as usize).clamp(1, m);
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut picked = index::sample(&mut rng, m, n).into_vec();
            picked.sort_unstable();
            Ok(Sampled {
                pools: vec![DocumentPool {
                    doc_ids: picked.into_iter().map(|i| ids[i].clone()).collect(),
                    centroid: None,
                }],
                silhouettes: Vec::new(),
            })
        }
        SamplingStrategy::Supervised {
            cluster_range,
            seed,
        } => {
            if m < 2 {
                return Err(Error::Prototype(format!(
                    "supervised sampling needs at least 2 documents, got {m}"
                )));
            }
            let points = corpus
                .documents()
                .iter()
                .map(|d| embedder.embed_document(d))
                .collect::<Result<Vec<_>>>()?;
            let choice = select_k(&points, *cluster_range, *seed)?;
            let pools = (0..choice.k)
                .map(|c| {
                    let members: Vec<usize> =
                        (0..m).filter(|&i| choice.assignment[i] == c).collect();
                    DocumentPool {
                        doc_ids: members.iter().map(|&i| ids[i].clone()).collect(),
                        centroid: Some(mean(members.iter().map(|&i| points[i].as_slice()))),
                    }
                })
                .collect();
            Ok(Sampled {
                pools,
                silhouettes: choice.scores,
            })
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KChoice {
    pub k: usize,
    pub assignment: Vec<usize>,
    pub scores: Vec<(usize, f64)>,
}

/// Runs k-means for every `k` in `[lo, min(hi, M - 1)]` (at least `k = 2`)
/// and keeps the one with the highest silhouette; ties go to the smaller `k`.
pub fn select_k(points: &[Vec<f64>], [lo, hi]: [usize; 2], seed: u64) -> Result<KChoice> {
    let m = points.len();
    if m < 2 {
        return Err(Error::Prototype(format!(
            "clustering needs at least 2 points, got {m}"
        )));
    }
    let upper = hi.min(m - 1).max(2);
    let lower = lo.max(2).min(upper);
    let mut best: Option<(f64, usize, Vec<usize>)> = None;
    let mut scores = Vec::new();
    for k in lower..=upper {
        let assignment = kmeans(points, k, seed)?;
        let s = silhouette(points, &assignment)?;
        scores.push((k, s));
        if best.as_ref().is_none_or(|(b, _, _)| s > *b) {
            best = Some((s, k, assignment));
        }
    }
    let (_, k, assignment) = best.expect("at least one k evaluated");
    Ok(KChoice {
        k,
        assignment,
        scores,
    })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn mean<'a>(rows: impl Iterator<Item = &'a [f64]>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    let mut n = 0usize;
    for r in rows {
        if out.is_empty() {
            out = vec![0.0; r.len()];
        }
        out.iter_mut().zip(r).for_each(|(o, v)| *o += v);
        n += 1;
    }
    out.iter_mut().for_each(|o| *o /= n as f64);
    out
}

const RESTARTS: usize = 10;
const MAX_ITER: usize = 300;

/// Lloyd's k-means with k-means++ seeding and several restarts; returns
/// cluster ids renumbered by first appearance so the output is canonical.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Result<Vec<usize>> {
    let m = points.len();
    if k == 0 || k > m {
        return Err(Error::Prototype(format!(
            "k-means with k = {k} on {m} points"
        )));
    }
    let dim = points[0].len();
    if points
        .iter()
        .any(|p| p.len() != dim || p.iter().any(|v| !v.is_finite()))
    {
        return Err(Error::Prototype(
            "k-means points must be finite and share one dimension".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..RESTARTS {
        let (inertia, assignment) = lloyd(points, k, &mut rng);
        if best.as_ref().is_none_or(|(b, _)| inertia < *b) {
            best = Some((inertia, assignment));
        }
    }
    Ok(canonical(&best.expect("RESTARTS > 0").1))
}

fn lloyd(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> (f64, Vec<usize>) {
    let m = points.len();
    let mut centers: Vec<Vec<f64>> = vec![points[rng.random_range(0..m)].clone()];
    while centers.len() < k {
        let d: Vec<f64> = points
            .iter()
            .map(|p| {
                centers
                    .iter()
                    .map(|c| sq_dist(p, c))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let total: f64 = d.iter().sum();
        let next = if total <= 0.0 {
            // Fewer distinct points than k: take any point not yet a center.
            (0..m)
                .find(|&i| !centers.iter().any(|c| c == &points[i]))
                .unwrap_or(0)
        } else {
            let mut target = rng.random::<f64>() * total;
            let mut pick = m - 1;
            for (i, di) in d.iter().enumerate() {
                if target < *di {
                    pick = i;
                    break;
                }
                target -= di;
            }
            pick
        };
        centers.push(points[next].clone());
    }

    let mut assignment = vec![usize::MAX; m];
    for _ in 0..MAX_ITER {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let c = nearest(p, &centers);
            if assignment[i] != c {
                assignment[i] = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let snapshot = centers.clone();
        for (c, center) in centers.iter_mut().enumerate() {
            let members: Vec<&[f64]> = (0..m)
                .filter(|&i| assignment[i] == c)
                .map(|i| points[i].as_slice())
                .collect();
            if members.is_empty() {
                // Re-seed an empty cluster at the point farthest from its center.
                let far = (0..m)
                    .map(|i| (i, sq_dist(&points[i], &snapshot[assignment[i]])))
                    .fold(
                        (0, f64::NEG_INFINITY),
                        |acc, x| if x.1 > acc.1 { x } else { acc },
                    )
                    .0;
                *center = points[far].clone();
            } else {
                *center = mean(members.into_iter());
            }
        }
    }
    let inertia = points
        .iter()
        .zip(&assignment)
        .map(|(p, &c)| sq_dist(p, &centers[c]))
        .sum();
    (inertia, assignment)
}

fn nearest(p: &[f64], centers: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, center) in centers.iter().enumerate() {
        let d = sq_dist(p, center);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

fn canonical(assignment: &[usize]) -> Vec<usize> {
    let mut map = Vec::new();
    assignment
        .iter()
        .map(|&c| match map.iter().position(|&x| x == c) {
            Some(i) => i,
            None => {
                map.push(c);
                map.len() - 1
            }
        })
        .collect()
}

/// Mean silhouette with Euclidean distance. Points in singleton clusters
/// score 0. Needs at least two non-empty clusters.
pub fn silhouette(points: &[Vec<f64>], assignment: &[usize]) -> Result<f64> {
    let m = points.len();
    if assignment.len() != m {
        return Err(Error::shape(
            "silhouette: one cluster id per point required",
        ));
    }
    let k = assignment.iter().copied().max().map_or(0, |c| c + 1);
    let sizes: Vec<usize> = (0..k)
        .map(|c| assignment.iter().filter(|&&a| a == c).count())
        .collect();
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return Err(Error::Prototype(
            "silhouette needs at least two clusters".into(),
        ));
    }
    let mut total = 0.0;
    for i in 0..m {
        let own = assignment[i];
        if sizes[own] == 1 {
            continue;
        }
        let mut sums = vec![0.0; k];
        for j in 0..m {
            if j != i {
                sums[assignment[j]] += sq_dist(&points[i], &points[j]).sqrt();
            }
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / m as f64)
}
