//! Linear-chain CRF with virtual start and end states.
//!
//! For `L` labels the transition matrix is `(L + 2) x (L + 2)`; index `L` is the
//! start state and `L + 1` the end state. A path `y` over `m` positions scores
//!
//! `trans[start, y_0] + sum_t emit[t, y_t] + sum_t trans[y_{t-1}, y_t] + trans[y_{m-1}, end]`.

use ndarray::Array2;
use rand::RngCore;

use crate::error::{Error, Result};
use crate::params::{ParamId, ParamStore};
use crate::tape::{Graph, Var};

pub fn start_state(labels: usize) -> usize {
    labels
}

pub fn end_state(labels: usize) -> usize {
    labels + 1
}

fn check_shapes(emissions: &Array2<f64>, transitions: &Array2<f64>) -> Result<usize> {
    let (m, l) = emissions.dim();
    if m == 0 {
        return Err(Error::shape("CRF over an empty sequence"));
    }
    if transitions.dim() != (l + 2, l + 2) {
        return Err(Error::shape(format!(
            "transitions {:?} do not match {l} labels",
            transitions.dim()
        )));
    }
    Ok(l)
}

fn logsumexp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.map(|x| (x - max).exp()).sum::<f64>().ln()
}

pub fn path_score(
    emissions: &Array2<f64>,
    transitions: &Array2<f64>,
    path: &[usize],
) -> Result<f64> {
    let l = check_shapes(emissions, transitions)?;
    if path.len() != emissions.nrows() {
        return Err(Error::shape(format!(
            "path of length {} for {} positions",
            path.len(),
            emissions.nrows()
        )));
    }
    if let Some(&bad) = path.iter().find(|&&y| y >= l) {
        return Err(Error::LabelOutOfRange {
            index: bad,
            count: l,
        });
    }
    let mut score = transitions[[start_state(l), path[0]]] + emissions[[0, path[0]]];
    for t in 1..path.len() {
        score += transitions[[path[t - 1], path[t]]] + emissions[[t, path[t]]];
    }
    Ok(score + transitions[[path[path.len() - 1], end_state(l)]])
}

/// Forward log-messages: `alpha[t, j]` is the log-sum of all prefixes ending in `j` at `t`.
fn forward_messages(emissions: &Array2<f64>, transitions: &Array2<f64>, l: usize) -> Array2<f64> {
    let m = emissions.nrows();
    let mut alpha = Array2::zeros((m, l));
    for j in 0..l {
        alpha[[0, j]] = transitions[[start_state(l), j]] + emissions[[0, j]];
    }
    for t in 1..m {
        for j in 0..l {
            let prev = alpha.row(t - 1);
            alpha[[t, j]] =
                logsumexp((0..l).map(|i| prev[i] + transitions[[i, j]])) + emissions[[t, j]];
        }
    }
    alpha
}

pub fn log_partition(emissions: &Array2<f64>, transitions: &Array2<f64>) -> Result<f64> {
    let l = check_shapes(emissions, transitions)?;
    let alpha = forward_messages(emissions, transitions, l);
    let last = alpha.row(emissions.nrows() - 1);
    Ok(logsumexp(
        (0..l).map(|j| last[j] + transitions[[j, end_state(l)]]),
    ))
}

/// Negative log-likelihood `log Z - score(gold)` with its gradients.
#[derive(Clone, Debug)]
pub struct CrfNll {
    pub value: f64,
    pub d_emissions: Array2<f64>,
    pub d_transitions: Array2<f64>,
}

pub fn neg_log_likelihood(
    emissions: &Array2<f64>,
    transitions: &Array2<f64>,
    gold: &[usize],
) -> Result<CrfNll> {
    let gold_score = path_score(emissions, transitions, gold)?;
    let l = emissions.ncols();
    let m = emissions.nrows();
    let (s, e) = (start_state(l), end_state(l));

    let alpha = forward_messages(emissions, transitions, l);
    let mut beta = Array2::zeros((m, l));
    for i in 0..l {
        beta[[m - 1, i]] = transitions[[i, e]];
    }
    for t in (0..m - 1).rev() {
        for i in 0..l {
            let next = beta.row(t + 1);
            beta[[t, i]] =
                logsumexp((0..l).map(|j| transitions[[i, j]] + emissions[[t + 1, j]] + next[j]));
        }
    }
    let log_z = logsumexp((0..l).map(|j| alpha[[m - 1, j]] + transitions[[j, e]]));

    let mut d_em = Array2::zeros((m, l));
    let mut d_tr = Array2::zeros(transitions.dim());
    for t in 0..m {
        for j in 0..l {
            d_em[[t, j]] = (alpha[[t, j]] + beta[[t, j]] - log_z).exp();
        }
    }
    for j in 0..l {
        d_tr[[s, j]] = d_em[[0, j]];
        d_tr[[j, e]] = d_em[[m - 1, j]];
    }
    for t in 0..m - 1 {
        for i in 0..l {
            for j in 0..l {
                d_tr[[i, j]] += (alpha[[t, i]]
                    + transitions[[i, j]]
                    + emissions[[t + 1, j]]
                    + beta[[t + 1, j]]
                    - log_z)
                    .exp();
            }
        }
    }
    d_tr[[s, gold[0]]] -= 1.0;
    d_tr[[gold[m - 1], e]] -= 1.0;
    for t in 0..m {
        d_em[[t, gold[t]]] -= 1.0;
        if t > 0 {
            d_tr[[gold[t - 1], gold[t]]] -= 1.0;
        }
    }
    Ok(CrfNll {
        value: log_z - gold_score,
        d_emissions: d_em,
        d_transitions: d_tr,
    })
}

/// Viterbi decoding. Ties resolve to the lowest label index at every step.
pub fn decode(emissions: &Array2<f64>, transitions: &Array2<f64>) -> Result<Vec<usize>> {
    let l = check_shapes(emissions, transitions)?;
    let m = emissions.nrows();
    let mut delta = Array2::zeros((m, l));
    let mut back = Array2::<usize>::zeros((m, l));
    for j in 0..l {
        delta[[0, j]] = transitions[[start_state(l), j]] + emissions[[0, j]];
    }
    for t in 1..m {
        for j in 0..l {
            let mut best = 0;
            let mut best_score = delta[[t - 1, 0]] + transitions[[0, j]];
            for i in 1..l {
                let s = delta[[t - 1, i]] + transitions[[i, j]];
                if s > best_score {
                    best = i;
                    best_score = s;
                }
            }
            delta[[t, j]] = best_score + emissions[[t, j]];
            back[[t, j]] = best;
        }
    }
    let mut last = 0;
    let mut last_score = delta[[m - 1, 0]] + transitions[[0, end_state(l)]];
    for j in 1..l {
        let s = delta[[m - 1, j]] + transitions[[j, end_state(l)]];
        if s > last_score {
            last = j;
            last_score = s;
        }
    }
    let mut path = vec![0; m];
    path[m - 1] = last;
    for t in (1..m).rev() {
        path[t - 1] = back[[t, path[t]]];
    }
    Ok(path)
}

/// Per-position argmax (lowest index on ties), used when the CRF is disabled.
pub fn argmax_rows(emissions: &Array2<f64>) -> Vec<usize> {
    emissions
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Summed per-sentence cross-entropy of softmax(logits) against `gold`, with gradient.
pub fn cross_entropy(logits: &Array2<f64>, gold: &[usize]) -> Result<(f64, Array2<f64>)> {
    let (m, l) = logits.dim();
    if gold.len() != m {
        return Err(Error::shape(format!(
            "{} gold labels for {m} rows",
            gold.len()
        )));
    }
    let mut grad = Array2::zeros((m, l));
    let mut loss = 0.0;
    for (t, row) in logits.rows().into_iter().enumerate() {
        let y = gold[t];
        if y >= l {
            return Err(Error::LabelOutOfRange { index: y, count: l });
        }
        let lse = logsumexp(row.iter().copied());
        loss += lse - row[y];
        for j in 0..l {
            grad[[t, j]] = (row[j] - lse).exp();
        }
        grad[[t, y]] -= 1.0;
    }
    Ok((loss, grad))
}

/// Trainable transition scores.
#[derive(Clone, Debug)]
pub struct CrfLayer {
    labels: usize,
    pub transitions: ParamId,
}

impl CrfLayer {
    pub fn new(
        prefix: &str,
        labels: usize,
        store: &mut ParamStore,
        rng: &mut dyn RngCore,
    ) -> Result<Self> {
        let n = labels + 2;
        Ok(Self {
            labels,
            transitions: store.add_uniform(format!("{prefix}.transitions"), n, n, n, rng)?,
        })
    }

    pub fn labels(&self) -> usize {
        self.labels
    }

    pub fn nll(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        emissions: Var,
        gold: &[usize],
    ) -> Result<Var> {
        let tr = g.param(store, self.transitions);
        crf_nll_node(g, emissions, tr, gold)
    }

    pub fn decode(&self, store: &ParamStore, emissions: &Array2<f64>) -> Result<Vec<usize>> {
        decode(emissions, store.get(self.transitions))
    }
}

/// CRF negative log-likelihood as a graph node.
pub fn crf_nll_node(
    g: &mut Graph,
    emissions: Var,
    transitions: Var,
    gold: &[usize],
) -> Result<Var> {
    let out = neg_log_likelihood(g.value(emissions), g.value(transitions), gold)?;
    Ok(g.fused(
        out.value,
        vec![
            (emissions, out.d_emissions),
            (transitions, out.d_transitions),
        ],
    ))
}

pub fn cross_entropy_node(g: &mut Graph, logits: Var, gold: &[usize]) -> Result<Var> {
    let (loss, grad) = cross_entropy(g.value(logits), gold)?;
    Ok(g.fused(loss, vec![(logits, grad)]))
}
