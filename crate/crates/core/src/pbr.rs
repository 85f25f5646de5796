//! Prototype-based regularization: a bank of trainable soft prototypes in the
//! sentence-embedding space, a proximity term pulling each sentence towards its
//! nearest prototype, and a diversity term pushing prototypes apart.
//!
//! `total = task + lambda_prox * prox - lambda_div * div`, with cosine distance
//! `d(a, b) = 1 - cos(a, b)`.

use ndarray::Array2;
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{ParamId, ParamStore};
use crate::tape::{Graph, Var};

/// Vectors with a smaller Euclidean norm are rejected by cosine computations.
pub const NORM_FLOOR: f64 = 1e-12;

/// Prototype counts swept in the sensitivity grid.
pub const Q_GRID: [usize; 6] = [2, 4, 8, 16, 32, 64];
/// Regularization weights swept in the sensitivity grid.
pub const LAMBDA_GRID: [f64; 3] = [0.0, 0.9, 10.0];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distance {
    #[default]
    Cosine,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PbrConfig {
    pub q: usize,
    pub lambda_prox: f64,
    pub lambda_div: f64,
    pub distance: Distance,
}

impl Default for PbrConfig {
    fn default() -> Self {
        Self {
            q: 16,
            lambda_prox: 0.9,
            lambda_div: 0.9,
            distance: Distance::Cosine,
        }
    }
}

impl PbrConfig {
    pub fn validate(&self) -> Result<()> {
        if self.q == 0 {
            return Err(Error::config("pbr.q must be at least 1"));
        }
        if !(self.lambda_prox >= 0.0 && self.lambda_prox.is_finite())
            || !(self.lambda_div >= 0.0 && self.lambda_div.is_finite())
        {
            return Err(Error::config("pbr lambdas must be finite and non-negative"));
        }
        if self.q < 2 && self.lambda_div > 0.0 {
            return Err(Error::config(
                "the diversity term needs at least two prototypes",
            ));
        }
        Ok(())
    }
}

/// `Q x d` trainable prototypes.
#[derive(Clone, Debug)]
pub struct SoftPrototypeBank {
    pub id: ParamId,
    q: usize,
    dim: usize,
}

pub const BANK_PARAM: &str = "pbr.prototypes";

impl SoftPrototypeBank {
    /// Registers `q` random unit vectors of width `dim`.
    pub fn new(
        store: &mut ParamStore,
        q: usize,
        dim: usize,
        rng: &mut dyn RngCore,
    ) -> Result<Self> {
        if q == 0 || dim == 0 {
            return Err(Error::config("prototype bank needs q >= 1 and dim >= 1"));
        }
        let mut protos = Array2::zeros((q, dim));
        for mut row in protos.rows_mut() {
            loop {
                row.mapv_inplace(|_| -> f64 { StandardNormal.sample(rng) });
                let n = row.dot(&row).sqrt();
                if n > 1e-6 {
                    row.mapv_inplace(|v| v / n);
                    break;
                }
            }
        }
        let id = store.add(BANK_PARAM, protos)?;
        Ok(Self { id, q, dim })
    }

    /// Re-attaches to a bank already present in `store`.
    pub fn from_store(store: &ParamStore) -> Option<Self> {
        let id = store.id(BANK_PARAM)?;
        let (q, dim) = store.get(id).dim();
        Some(Self { id, q, dim })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

pub fn cosine_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape(format!(
            "cosine distance between dims {} and {}",
            a.len(),
            b.len()
        )));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na < NORM_FLOOR || nb < NORM_FLOOR {
        return Err(Error::ZeroNorm("cosine distance"));
    }
    Ok(1.0 - dot / (na * nb))
}

/// Mean over rows of `embeddings` of the distance to the nearest prototype.
pub fn prox_loss_node(g: &mut Graph, embeddings: Var, prototypes: Var) -> Result<Var> {
    let t = g.value(embeddings).nrows();
    if t == 0 {
        return Err(Error::shape("proximity loss over zero sentences"));
    }
    let d = g.cosine_distance(embeddings, prototypes)?;
    let nearest = g.min_rows(d);
    let total = g.sum(nearest);
    Ok(g.scale(total, 1.0 / t as f64))
}

/// Mean pairwise distance over unordered prototype pairs.
pub fn div_loss_node(g: &mut Graph, prototypes: Var) -> Result<Var> {
    let q = g.value(prototypes).nrows();
    if q < 2 {
        return Err(Error::config(format!(
            "diversity loss needs Q >= 2, got {q}"
        )));
    }
    let d = g.cosine_distance(prototypes, prototypes)?;
    let upper = Array2::from_shape_fn((q, q), |(k, l)| if k < l { 1.0 } else { 0.0 });
    let upper = g.constant(upper);
    let pairs = g.mul(d, upper);
    let total = g.sum(pairs);
    Ok(g.scale(total, 2.0 / (q * (q - 1)) as f64))
}

pub fn prox_loss(embeddings: &Array2<f64>, prototypes: &Array2<f64>) -> Result<f64> {
    let mut g = Graph::new();
    let e = g.constant(embeddings.clone());
    let p = g.constant(prototypes.clone());
    let out = prox_loss_node(&mut g, e, p)?;
    Ok(g.scalar(out))
}

pub fn div_loss(prototypes: &Array2<f64>) -> Result<f64> {
    let mut g = Graph::new();
    let p = g.constant(prototypes.clone());
    let out = div_loss_node(&mut g, p)?;
    Ok(g.scalar(out))
}

pub fn total_loss(task: f64, prox: f64, div: f64, cfg: &PbrConfig) -> f64 {
    task + cfg.lambda_prox * prox - cfg.lambda_div * div
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PbrTerms {
    pub prox: f64,
    pub div: f64,
}

/// Adds both regularizers to `task`. The terms are always built so that the
/// prototypes stay in the graph even when their weights are zero.
pub fn regularize(
    g: &mut Graph,
    task: Var,
    embeddings: Var,
    prototypes: Var,
    cfg: &PbrConfig,
) -> Result<(Var, PbrTerms)> {
    let prox = prox_loss_node(g, embeddings, prototypes)?;
    let weighted_prox = g.scale(prox, cfg.lambda_prox);
    let mut total = g.add(task, weighted_prox);
    let mut div_value = 0.0;
    if g.value(prototypes).nrows() >= 2 {
        let div = div_loss_node(g, prototypes)?;
        div_value = g.scalar(div);
        let weighted_div = g.scale(div, cfg.lambda_div);
        total = g.sub(total, weighted_div);
    }
    let terms = PbrTerms {
        prox: g.scalar(prox),
        div: div_value,
    };
    Ok((total, terms))
}
