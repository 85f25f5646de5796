//! Conditioning modules that combine a sentence vector `h` (width `d`) with
//! its assigned prototype `p` (width `d_proto`) into a new width-`d` vector.
//! All maps act row-wise on `T x d` / `T x d_proto` matrices.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::encoder::SentenceHook;
use crate::error::{Error, Result};
use crate::params::{ParamId, ParamStore};
use crate::tape::{Graph, Var};

#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum InjectionKind {
    #[default]
    LinearFusion,
    Cln,
    GatedResidual,
    Film,
    CrossAttention,
}

impl InjectionKind {
    pub const ALL: [InjectionKind; 5] = [
        Self::LinearFusion,
        Self::Cln,
        Self::GatedResidual,
        Self::Film,
        Self::CrossAttention,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::LinearFusion => "linear_fusion",
            Self::Cln => "cln",
            Self::GatedResidual => "gated_residual",
            Self::Film => "film",
            Self::CrossAttention => "cross_attention",
        }
    }

    /// Linear fusion did best on legal text, gated residual elsewhere.
    pub fn default_for(legal: bool) -> Self {
        if legal {
            Self::LinearFusion
        } else {
            Self::GatedResidual
        }
    }
}

impl fmt::Display for InjectionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InjectionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::config(format!("unknown injection kind `{s}`")))
    }
}

pub const LN_EPS: f64 = 1e-5;

/// Parameter handles of one module. Row-vector convention: a projection
/// `W` of shape `in x out` maps `x` to `x W`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InjectionParams {
    /// `[h; p] W + b`
    LinearFusion { w: ParamId, b: ParamId },
    /// `(p Wg + bg) * LN(h) + (p Wb + bb)`
    Cln {
        w_gamma: ParamId,
        b_gamma: ParamId,
        w_beta: ParamId,
        b_beta: ParamId,
    },
    /// `h + sigmoid([h; p] Wg + bg) * (p Wp)`
    GatedResidual {
        w_p: ParamId,
        w_g: ParamId,
        b_g: ParamId,
    },
    /// `(p Wg + bg) * h + (p Wb + bb)`
    Film {
        w_gamma: ParamId,
        b_gamma: ParamId,
        w_beta: ParamId,
        b_beta: ParamId,
    },
    /// `h + (softmax(q . k / sqrt(d)) * (p Wv)) Wo` with `q = h Wq`, `k = p Wk`
    CrossAttention {
        w_q: ParamId,
        w_k: ParamId,
        w_v: ParamId,
        w_o: ParamId,
    },
}

#[derive(Clone, Debug)]
pub struct InjectionModule {
    pub kind: InjectionKind,
    pub dim: usize,
    pub proto_dim: usize,
    pub params: InjectionParams,
}

const PREFIX: &str = "pcm.inject";

impl InjectionModule {
    /// Registers the module's parameters. Gains start at 1 and shifts/gate
    /// biases at 0, so the modulating modules begin close to the identity.
    pub fn new(
        kind: InjectionKind,
        dim: usize,
        proto_dim: usize,
        store: &mut ParamStore,
        rng: &mut dyn RngCore,
    ) -> Result<Self> {
        if dim == 0 || proto_dim == 0 {
            return Err(Error::config("injection module needs positive dimensions"));
        }
        let name = |p: &str| format!("{PREFIX}.{}.{p}", kind.as_str());
        let (d, dp) = (dim, proto_dim);
        let params = match kind {
            InjectionKind::LinearFusion => InjectionParams::LinearFusion {
                w: store.add_uniform(name("w"), d + dp, d, d + dp, rng)?,
                b: store.add_uniform(name("b"), 1, d, d + dp, rng)?,
            },
            InjectionKind::Cln | InjectionKind::Film => {
                let w_gamma = store.add_uniform(name("w_gamma"), dp, d, dp, rng)?;
                let b_gamma = store.add(name("b_gamma"), Array2::ones((1, d)))?;
                let w_beta = store.add_uniform(name("w_beta"), dp, d, dp, rng)?;
                let b_beta = store.add_zeros(name("b_beta"), 1, d)?;
                if kind == InjectionKind::Cln {
                    InjectionParams::Cln {
                        w_gamma,
                        b_gamma,
                        w_beta,
                        b_beta,
                    }
                } else {
                    InjectionParams::Film {
                        w_gamma,
                        b_gamma,
                        w_beta,
                        b_beta,
                    }
                }
            }
            InjectionKind::GatedResidual => InjectionParams::GatedResidual {
                w_p: store.add_uniform(name("w_p"), dp, d, dp, rng)?,
                w_g: store.add_uniform(name("w_g"), d + dp, d, d + dp, rng)?,
                b_g: store.add_zeros(name("b_g"), 1, d)?,
            },
            InjectionKind::CrossAttention => InjectionParams::CrossAttention {
                w_q: store.add_uniform(name("w_q"), d, d, d, rng)?,
                w_k: store.add_uniform(name("w_k"), dp, d, dp, rng)?,
                w_v: store.add_uniform(name("w_v"), dp, d, dp, rng)?,
                w_o: store.add_uniform(name("w_o"), d, d, d, rng)?,
            },
        };
        Ok(Self {
            kind,
            dim,
            proto_dim,
            params,
        })
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, h: Var, p: Var) -> Result<Var> {
        let (t, d) = g.value(h).dim();
        let (tp, dp) = g.value(p).dim();
        if d != self.dim || dp != self.proto_dim || t != tp {
            return Err(Error::shape(format!(
                "injection expects {t} x {} and {t} x {}, got {t} x {d} and {tp} x {dp}",
                self.dim, self.proto_dim
            )));
        }
        let mut bind =
            |ids: &[ParamId]| -> Vec<Var> { ids.iter().map(|&id| g.param(store, id)).collect() };
        let out = match self.params {
            InjectionParams::LinearFusion { w, b } => {
                let v = bind(&[w, b]);
                linear_fusion(g, h, p, v[0], v[1])
            }
            InjectionParams::Cln {
                w_gamma,
                b_gamma,
                w_beta,
                b_beta,
            } => {
                let v = bind(&[w_gamma, b_gamma, w_beta, b_beta]);
                cln(g, h, p, [v[0], v[1], v[2], v[3]], LN_EPS)
            }
            InjectionParams::GatedResidual { w_p, w_g, b_g } => {
                let v = bind(&[w_p, w_g, b_g]);
                gated_residual(g, h, p, v[0], v[1], v[2])
            }
            InjectionParams::Film {
                w_gamma,
                b_gamma,
                w_beta,
                b_beta,
            } => {
                let v = bind(&[w_gamma, b_gamma, w_beta, b_beta]);
                film(g, h, p, [v[0], v[1], v[2], v[3]])
            }
            InjectionParams::CrossAttention { w_q, w_k, w_v, w_o } => {
                let v = bind(&[w_q, w_k, w_v, w_o]);
                cross_attention(g, h, p, [v[0], v[1], v[2], v[3]])
            }
        };
        Ok(out)
    }

    /// Evaluation-only convenience over plain matrices.
    pub fn apply(
        &self,
        store: &ParamStore,
        h: &Array2<f64>,
        p: &Array2<f64>,
    ) -> Result<Array2<f64>> {
        let mut g = Graph::new();
        let hv = g.constant(h.clone());
        let pv = g.constant(p.clone());
        let out = self.forward(&mut g, store, hv, pv)?;
        Ok(g.value(out).clone())
    }
}

pub fn linear_fusion(g: &mut Graph, h: Var, p: Var, w: Var, b: Var) -> Var {
    let hp = g.concat_cols(&[h, p]);
    let y = g.matmul(hp, w);
    g.add_row(y, b)
}

fn affine(g: &mut Graph, x: Var, w: Var, b: Var) -> Var {
    let y = g.matmul(x, w);
    g.add_row(y, b)
}

/// `[w_gamma, b_gamma, w_beta, b_beta]`.
pub fn cln(g: &mut Graph, h: Var, p: Var, [wg, bg, wb, bb]: [Var; 4], eps: f64) -> Var {
    let normed = g.layer_norm_rows(h, eps);
    let gamma = affine(g, p, wg, bg);
    let beta = affine(g, p, wb, bb);
    let scaled = g.mul(gamma, normed);
    g.add(scaled, beta)
}

pub fn gated_residual(g: &mut Graph, h: Var, p: Var, w_p: Var, w_g: Var, b_g: Var) -> Var {
    let hp = g.concat_cols(&[h, p]);
    let pre = affine(g, hp, w_g, b_g);
    let gate = g.sigmoid(pre);
    let proj = g.matmul(p, w_p);
    let gated = g.mul(gate, proj);
    g.add(h, gated)
}

/// `[w_gamma, b_gamma, w_beta, b_beta]`.
pub fn film(g: &mut Graph, h: Var, p: Var, [wg, bg, wb, bb]: [Var; 4]) -> Var {
    let gamma = affine(g, p, wg, bg);
    let beta = affine(g, p, wb, bb);
    let scaled = g.mul(gamma, h);
    g.add(scaled, beta)
}

/// `[w_q, w_k, w_v, w_o]`. Each sentence attends over its single prototype,
/// so the attention weight is exactly one; the score path is kept so the
/// module stays a faithful attention layer.
pub fn cross_attention(g: &mut Graph, h: Var, p: Var, [wq, wk, wv, wo]: [Var; 4]) -> Var {
    let q = g.matmul(h, wq);
    let k = g.matmul(p, wk);
    let a = g.value(q).ncols();
    let qk = g.mul(q, k);
    let ones = g.constant(Array2::ones((a, 1)));
    let scores = g.matmul(qk, ones);
    let scores = g.scale(scores, 1.0 / (a as f64).sqrt());
    let weights = g.softmax_rows(scores);
    let v = g.matmul(p, wv);
    let attended = g.mul_col(v, weights);
    let out = g.matmul(attended, wo);
    g.add(h, out)
}

/// Applies an injection module with fixed (gradient-free) prototype rows,
/// one per sentence of the current document.
#[derive(Clone, Debug)]
pub struct PcmHook<'a> {
    pub module: &'a InjectionModule,
    pub prototypes: Array2<f64>,
}

impl SentenceHook for PcmHook<'_> {
    fn apply(&self, g: &mut Graph, store: &ParamStore, sentences: Var) -> Result<Var> {
        let p = g.constant(self.prototypes.clone());
        self.module.forward(g, store, sentences, p)
    }
}
