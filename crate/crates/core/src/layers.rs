use ndarray::Array2;
use rand::{Rng, RngCore};

use crate::error::Result;
use crate::params::{ParamId, ParamStore};
use crate::tape::{Graph, Var};

/// Affine map `x W + b` applied row-wise; `W` is `input x output`.
#[derive(Clone, Debug)]
pub struct Linear {
    pub input: usize,
    pub output: usize,
    pub w: ParamId,
    pub b: ParamId,
}

impl Linear {
    pub fn new(
        prefix: &str,
        input: usize,
        output: usize,
        store: &mut ParamStore,
        rng: &mut dyn RngCore,
    ) -> Result<Self> {
        Ok(Self {
            input,
            output,
            w: store.add_uniform(format!("{prefix}.w"), input, output, input, rng)?,
            b: store.add_uniform(format!("{prefix}.b"), 1, output, input, rng)?,
        })
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Var {
        let w = g.param(store, self.w);
        let b = g.param(store, self.b);
        let y = g.matmul(x, w);
        g.add_row(y, b)
    }
}

/// Inverted dropout. Without an RNG (evaluation) or with `p == 0` the input is
/// returned untouched and no randomness is consumed.
pub fn dropout<R: RngCore + ?Sized>(g: &mut Graph, x: Var, p: f64, rng: Option<&mut R>) -> Var {
    let Some(rng) = rng else { return x };
    if p <= 0.0 {
        return x;
    }
    let keep = 1.0 - p;
    let dim = g.value(x).dim();
    let mask = Array2::from_shape_simple_fn(dim, || {
        if rng.random::<f64>() < keep {
            1.0 / keep
        } else {
            0.0
        }
    });
    let mask = g.constant(mask);
    g.mul(x, mask)
}
