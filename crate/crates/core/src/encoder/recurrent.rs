use std::str::FromStr;

use ndarray::Array2;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{ParamId, ParamStore};
use crate::tape::{Graph, Var};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellKind {
    #[default]
    Lstm,
    Gru,
}

impl CellKind {
    fn gates(self) -> usize {
        match self {
            CellKind::Lstm => 4,
            CellKind::Gru => 3,
        }
    }
}

impl FromStr for CellKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lstm" => Ok(CellKind::Lstm),
            "gru" => Ok(CellKind::Gru),
            other => Err(Error::config(format!("unknown cell `{other}`"))),
        }
    }
}

/// Unidirectional recurrent layer over a `T x input` sequence.
#[derive(Clone, Debug)]
pub struct Rnn {
    kind: CellKind,
    hidden: usize,
    w_x: ParamId,
    w_h: ParamId,
    b: ParamId,
}

impl Rnn {
    pub fn new(
        prefix: &str,
        kind: CellKind,
        input: usize,
        hidden: usize,
        store: &mut ParamStore,
        rng: &mut dyn RngCore,
    ) -> Result<Self> {
        let width = kind.gates() * hidden;
        Ok(Self {
            kind,
            hidden,
            w_x: store.add_uniform(format!("{prefix}.w_x"), input, width, hidden, rng)?,
            w_h: store.add_uniform(format!("{prefix}.w_h"), hidden, width, hidden, rng)?,
            b: store.add_uniform(format!("{prefix}.b"), 1, width, hidden, rng)?,
        })
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    /// Returns the `T x hidden` hidden states, row `t` aligned with input row `t`
    /// regardless of direction.
    pub fn run(&self, g: &mut Graph, store: &ParamStore, xs: Var, reverse: bool) -> Var {
        let steps = g.value(xs).nrows();
        let w_x = g.param(store, self.w_x);
        let w_h = g.param(store, self.w_h);
        let b = g.param(store, self.b);
        let xw = g.matmul(xs, w_x);
        let xw = g.add_row(xw, b);

        let h = self.hidden;
        let mut outputs: Vec<Option<Var>> = vec![None; steps];
        let mut state: Option<(Var, Var)> = None;
        let order: Box<dyn Iterator<Item = usize>> = if reverse {
            Box::new((0..steps).rev())
        } else {
            Box::new(0..steps)
        };
        for t in order {
            let x_t = g.slice_rows(xw, t, 1);
            let (h_new, c_new) = match self.kind {
                CellKind::Lstm => {
                    let pre = match state {
                        Some((h_prev, _)) => {
                            let hw = g.matmul(h_prev, w_h);
                            g.add(x_t, hw)
                        }
                        None => x_t,
                    };
                    let i = g.slice_cols(pre, 0, h);
                    let i = g.sigmoid(i);
                    let f = g.slice_cols(pre, h, h);
                    let f = g.sigmoid(f);
                    let cand = g.slice_cols(pre, 2 * h, h);
                    let cand = g.tanh(cand);
                    let o = g.slice_cols(pre, 3 * h, h);
                    let o = g.sigmoid(o);
                    let ic = g.mul(i, cand);
                    let c = match state {
                        Some((_, c_prev)) => {
                            let fc = g.mul(f, c_prev);
                            g.add(fc, ic)
                        }
                        None => ic,
                    };
                    let tc = g.tanh(c);
                    (g.mul(o, tc), c)
                }
                CellKind::Gru => {
                    let h_prev = match state {
                        Some((h_prev, _)) => h_prev,
                        None => g.constant(Array2::zeros((1, h))),
                    };
                    let hw = g.matmul(h_prev, w_h);
                    let xr = g.slice_cols(x_t, 0, h);
                    let hr = g.slice_cols(hw, 0, h);
                    let r = g.add(xr, hr);
                    let r = g.sigmoid(r);
                    let xz = g.slice_cols(x_t, h, h);
                    let hz = g.slice_cols(hw, h, h);
                    let z = g.add(xz, hz);
                    let z = g.sigmoid(z);
                    let xn = g.slice_cols(x_t, 2 * h, h);
                    let hn = g.slice_cols(hw, 2 * h, h);
                    let rhn = g.mul(r, hn);
                    let n = g.add(xn, rhn);
                    let n = g.tanh(n);
                    // h = n + z * (h_prev - n)
                    let diff = g.sub(h_prev, n);
                    let zd = g.mul(z, diff);
                    let h_new = g.add(n, zd);
                    (h_new, h_new)
                }
            };
            outputs[t] = Some(h_new);
            state = Some((h_new, c_new));
        }
        let rows: Vec<Var> = outputs
            .into_iter()
            .map(|o| o.expect("every step visited"))
            .collect();
        g.concat_rows(&rows)
    }
}

/// Forward and backward layers with concatenated outputs (`T x 2*hidden`).
#[derive(Clone, Debug)]
pub struct BiRnn {
    fwd: Rnn,
    bwd: Rnn,
}

impl BiRnn {
    /// `output` is the concatenated width and must be even.
    pub fn new(
        prefix: &str,
        kind: CellKind,
        input: usize,
        output: usize,
        store: &mut ParamStore,
        rng: &mut dyn RngCore,
    ) -> Result<Self> {
        if output == 0 || !output.is_multiple_of(2) {
            return Err(Error::config(format!(
                "{prefix}: bidirectional output width must be a positive even number, got {output}"
            )));
        }
        Ok(Self {
            fwd: Rnn::new(
                &format!("{prefix}.fwd"),
                kind,
                input,
                output / 2,
                store,
                rng,
            )?,
            bwd: Rnn::new(
                &format!("{prefix}.bwd"),
                kind,
                input,
                output / 2,
                store,
                rng,
            )?,
        })
    }

    pub fn output_dim(&self) -> usize {
        self.fwd.hidden() * 2
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, xs: Var) -> Var {
        let f = self.fwd.run(g, store, xs, false);
        let b = self.bwd.run(g, store, xs, true);
        g.concat_cols(&[f, b])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn check_layer(kind: CellKind) {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut store = ParamStore::new();
        let rnn = BiRnn::new("rnn", kind, 3, 4, &mut store, &mut rng).unwrap();
        let xs = Array2::from_shape_fn((5, 3), |(i, j)| ((i * 3 + j) as f64 * 0.37).sin());

        let loss = |store: &ParamStore| {
            let mut g = Graph::new();
            let x = g.constant(xs.clone());
            let out = rnn.forward(&mut g, store, x);
            let sq = g.mul(out, out);
            let s = g.sum(sq);
            (g.scalar(s), g.backward(s).param_grads(store))
        };

        let (_, grads) = loss(&store);
        assert_eq!(grads.len(), 6);
        for (id, grad) in grads {
            for idx in 0..grad.len() {
                let (r, c) = (idx / grad.ncols(), idx % grad.ncols());
                let mut plus = store.clone();
                plus.get_mut(id)[[r, c]] += 1e-6;
                let mut minus = store.clone();
                minus.get_mut(id)[[r, c]] -= 1e-6;
                let numeric = (loss(&plus).0 - loss(&minus).0) / 2e-6;
                let a = grad[[r, c]];
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-2);
                assert!(rel < 1e-4, "{} ({r},{c}): {a} vs {numeric}", store.name(id));
            }
        }
    }

    #[test]
    fn lstm_gradients() {
        check_layer(CellKind::Lstm);
    }

    #[test]
    fn gru_gradients() {
        check_layer(CellKind::Gru);
    }

    #[test]
    fn output_length_equals_input_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut store = ParamStore::new();
        let rnn = BiRnn::new("r", CellKind::Lstm, 2, 6, &mut store, &mut rng).unwrap();
        let mut g = Graph::new();
        let x = g.constant(Array2::ones((7, 2)));
        let out = rnn.forward(&mut g, &store, x);
        assert_eq!(g.value(out).dim(), (7, 6));
    }

    #[test]
    fn odd_width_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut store = ParamStore::new();
        assert!(BiRnn::new("r", CellKind::Lstm, 2, 5, &mut store, &mut rng).is_err());
    }
}
