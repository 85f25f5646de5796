use rand::RngCore;

use crate::error::{Error, Result};
use crate::params::{ParamId, ParamStore};
use crate::tape::{Graph, Var};

/// Additive attention pooling of token states into one sentence vector:
///
/// `u_t = tanh(W h_t + b)`, `alpha = softmax_t(u_t . u_ctx)`, `v = sum_t alpha_t h_t`.
#[derive(Clone, Debug)]
pub struct AttentionPooler {
    input: usize,
    /// `input x attn`
    pub w: ParamId,
    /// `1 x attn`
    pub b: ParamId,
    /// `attn x 1` context vector
    pub context: ParamId,
}

#[derive(Clone, Copy, Debug)]
pub struct Pooled {
    /// `1 x input` sentence vector
    pub vector: Var,
    /// `1 x T` attention weights
    pub weights: Var,
}

impl AttentionPooler {
    pub fn new(
        prefix: &str,
        input: usize,
        attn: usize,
        store: &mut ParamStore,
        rng: &mut dyn RngCore,
    ) -> Result<Self> {
        Ok(Self {
            input,
            w: store.add_uniform(format!("{prefix}.w"), input, attn, input, rng)?,
            b: store.add_uniform(format!("{prefix}.b"), 1, attn, input, rng)?,
            context: store.add_uniform(format!("{prefix}.context"), attn, 1, attn, rng)?,
        })
    }

    pub fn pool(&self, g: &mut Graph, store: &ParamStore, states: Var) -> Result<Pooled> {
        let d = g.value(states).ncols();
        if d != self.input {
            return Err(Error::shape(format!(
                "pooler expects width {}, got {d}",
                self.input
            )));
        }
        let w = g.param(store, self.w);
        let b = g.param(store, self.b);
        let ctx = g.param(store, self.context);
        attention_pool(g, states, w, b, ctx)
    }
}

/// Pools `states` (`T x d`) with projection `w` (`d x a`), bias `b` (`1 x a`)
/// and context vector `context` (`a x 1`).
pub fn attention_pool(g: &mut Graph, states: Var, w: Var, b: Var, context: Var) -> Result<Pooled> {
    if g.value(states).nrows() == 0 {
        return Err(Error::shape("attention pooling over an empty sequence"));
    }
    let u = g.matmul(states, w);
    let u = g.add_row(u, b);
    let u = g.tanh(u);
    let scores = g.matmul(u, context);
    let scores = g.transpose(scores);
    let weights = g.softmax_rows(scores);
    let vector = g.matmul(weights, states);
    Ok(Pooled { vector, weights })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tape::gradcheck;
    use ndarray::Array2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn randn(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Array2<f64> {
        Array2::from_shape_simple_fn((r, c), || StandardNormal.sample(rng))
    }

    fn setup(input: usize, attn: usize) -> (AttentionPooler, ParamStore) {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut store = ParamStore::new();
        let p = AttentionPooler::new("pool", input, attn, &mut store, &mut rng).unwrap();
        (p, store)
    }

    /// Straight-line attention pooling with explicit loops.
    fn reference(h: &Array2<f64>, w: &Array2<f64>, b: &Array2<f64>, ctx: &Array2<f64>) -> Vec<f64> {
        let (t, d) = h.dim();
        let a = w.ncols();
        let mut scores = vec![0.0; t];
        for i in 0..t {
            for k in 0..a {
                let mut pre = b[[0, k]];
                for j in 0..d {
                    pre += h[[i, j]] * w[[j, k]];
                }
                scores[i] += pre.tanh() * ctx[[k, 0]];
            }
        }
        let z: f64 = scores.iter().map(|s| s.exp()).sum();
        let mut v = vec![0.0; d];
        for i in 0..t {
            let alpha = scores[i].exp() / z;
            for j in 0..d {
                v[j] += alpha * h[[i, j]];
            }
        }
        v
    }

    #[test]
    fn single_token_passes_through() {
        let (p, store) = setup(4, 3);
        let h = Array2::from_shape_vec((1, 4), vec![0.5, -1.0, 2.0, 0.1]).unwrap();
        let mut g = Graph::new();
        let x = g.constant(h.clone());
        let out = p.pool(&mut g, &store, x).unwrap();
        assert_eq!(g.value(out.weights)[[0, 0]], 1.0);
        assert_eq!(g.value(out.vector), &h);
    }

    #[test]
    fn identical_tokens_give_that_token() {
        let (p, store) = setup(3, 2);
        let h = Array2::from_shape_fn((5, 3), |(_, j)| j as f64 - 0.7);
        let mut g = Graph::new();
        let x = g.constant(h.clone());
        let out = p.pool(&mut g, &store, x).unwrap();
        for (a, b) in g.value(out.vector).iter().zip(h.row(0).iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_reference_implementation() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let (p, store) = setup(4, 3);
        let h = randn(&mut rng, 3, 4);
        let mut g = Graph::new();
        let x = g.constant(h.clone());
        let out = p.pool(&mut g, &store, x).unwrap();
        let expect = reference(&h, store.get(p.w), store.get(p.b), store.get(p.context));
        for (a, b) in g.value(out.vector).iter().zip(expect) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn weights_are_a_distribution() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (p, store) = setup(5, 4);
        for t in 1..8 {
            let mut g = Graph::new();
            let x = g.constant(randn(&mut rng, t, 5) * 3.0);
            let out = p.pool(&mut g, &store, x).unwrap();
            let w = g.value(out.weights);
            assert!(w.iter().all(|&a| a >= 0.0));
            assert!((w.sum() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn empty_sequence_rejected() {
        let (p, store) = setup(2, 2);
        let mut g = Graph::new();
        let x = g.constant(Array2::zeros((0, 2)));
        assert!(p.pool(&mut g, &store, x).is_err());
    }

    #[test]
    fn gradients_in_inputs_and_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let inputs = [
            randn(&mut rng, 4, 3),
            randn(&mut rng, 3, 2),
            randn(&mut rng, 1, 2),
            randn(&mut rng, 2, 1),
            randn(&mut rng, 1, 3),
        ];
        gradcheck::check(
            &inputs,
            |g, v| {
                let pooled = attention_pool(g, v[0], v[1], v[2], v[3]).unwrap();
                let weighted = g.mul(pooled.vector, v[4]);
                g.sum(weighted)
            },
            1e-4,
        );
    }
}
