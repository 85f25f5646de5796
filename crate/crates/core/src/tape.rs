//! A small reverse-mode automatic differentiation tape over `f64` matrices.
//!
//! Every value is an `Array2<f64>`; vectors are `1 x n` rows and sequences are
//! `T x n` matrices with one row per step. Nodes are appended in evaluation
//! order, so a reverse sweep over the node list is a valid topological order.

use std::collections::HashMap;

use ndarray::{s, Array1, Array2, Axis};

use crate::error::{Error, Result};
use crate::params::{ParamId, ParamStore};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Param,
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    MulCol(Var, Var),
    Scale(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    Transpose(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceRows(Var, usize),
    SliceCols(Var, usize),
    SumAll(Var),
    SoftmaxRows(Var),
    LayerNormRows {
        x: Var,
        inv_std: Array1<f64>,
    },
    CosineDistance {
        a: Var,
        b: Var,
        a_norm: Array1<f64>,
        b_norm: Array1<f64>,
    },
    MinRows {
        x: Var,
        argmin: Vec<usize>,
    },
    GatherRows {
        table: Var,
        rows: Vec<usize>,
    },
    /// Loss whose gradients w.r.t. each input were computed in the forward pass.
    Fused {
        inputs: Vec<(Var, Array2<f64>)>,
    },
}

#[derive(Debug)]
struct Node {
    value: Array2<f64>,
    op: Op,
    needs_grad: bool,
}

/// Computation graph for a single forward/backward pass.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    bound: HashMap<ParamId, Var>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Array2<f64>, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn grad_any(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].needs_grad)
    }

    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Differentiable leaf that is not tied to a stored parameter.
    pub fn input(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    pub fn row(&mut self, values: &[f64]) -> Var {
        self.constant(
            Array2::from_shape_vec((1, values.len()), values.to_vec()).expect("row shape"),
        )
    }

    /// Binds a stored parameter. Repeated calls within one graph return the same node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(v) = self.bound.get(&id) {
            return *v;
        }
        let v = self.push(store.get(id).clone(), Op::Param, true);
        self.bound.insert(id, v);
        v
    }

    /// Binds a parameter as a constant: it participates in the forward pass only.
    pub fn frozen(&mut self, store: &ParamStore, id: ParamId) -> Var {
        self.constant(store.get(id).clone())
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[[0, 0]]
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).dot(self.value(b));
        let g = self.grad_any(&[a, b]);
        self.push(value, Op::MatMul(a, b), g)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) + self.value(b);
        let g = self.grad_any(&[a, b]);
        self.push(value, Op::Add(a, b), g)
    }

    /// Adds a `1 x n` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        assert_eq!(self.value(row).nrows(), 1, "add_row expects a 1 x n row");
        let value = self.value(a) + self.value(row);
        let g = self.grad_any(&[a, row]);
        self.push(value, Op::AddRow(a, row), g)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) - self.value(b);
        let g = self.grad_any(&[a, b]);
        self.push(value, Op::Sub(a, b), g)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) * self.value(b);
        let g = self.grad_any(&[a, b]);
        self.push(value, Op::Mul(a, b), g)
    }

    /// Scales row `i` of `a` by `col[i, 0]`.
    pub fn mul_col(&mut self, a: Var, col: Var) -> Var {
        assert_eq!(
            self.value(col).ncols(),
            1,
            "mul_col expects an n x 1 column"
        );
        let value = self.value(a) * self.value(col);
        let g = self.grad_any(&[a, col]);
        self.push(value, Op::MulCol(a, col), g)
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let value = self.value(a) * k;
        let g = self.grad_any(&[a]);
        self.push(value, Op::Scale(a, k), g)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(sigmoid);
        let g = self.grad_any(&[a]);
        self.push(value, Op::Sigmoid(a), g)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(f64::tanh);
        let g = self.grad_any(&[a]);
        self.push(value, Op::Tanh(a), g)
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).t().to_owned();
        let g = self.grad_any(&[a]);
        self.push(value, Op::Transpose(a), g)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|v| self.value(*v).view()).collect();
        let value = ndarray::concatenate(Axis(1), &views).expect("concat_cols: row counts differ");
        let g = self.grad_any(parts);
        self.push(value, Op::ConcatCols(parts.to_vec()), g)
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|v| self.value(*v).view()).collect();
        let value =
            ndarray::concatenate(Axis(0), &views).expect("concat_rows: column counts differ");
        let g = self.grad_any(parts);
        self.push(value, Op::ConcatRows(parts.to_vec()), g)
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Var {
        let value = self.value(a).slice(s![start..start + len, ..]).to_owned();
        let g = self.grad_any(&[a]);
        self.push(value, Op::SliceRows(a, start), g)
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let value = self.value(a).slice(s![.., start..start + len]).to_owned();
        let g = self.grad_any(&[a]);
        self.push(value, Op::SliceCols(a, start), g)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Array2::from_elem((1, 1), self.value(a).sum());
        let g = self.grad_any(&[a]);
        self.push(value, Op::SumAll(a), g)
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let mut value = self.value(a).clone();
        for mut row in value.rows_mut() {
            let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
            row.mapv_inplace(|x| (x - max).exp());
            let z = row.sum();
            row.mapv_inplace(|x| x / z);
        }
        let g = self.grad_any(&[a]);
        self.push(value, Op::SoftmaxRows(a), g)
    }

    /// Per-row standardization `(x - mean) / sqrt(var + eps)` with population variance.
    pub fn layer_norm_rows(&mut self, x: Var, eps: f64) -> Var {
        let src = self.value(x);
        let mut value = src.clone();
        let mut inv_std = Array1::zeros(src.nrows());
        for (i, mut row) in value.rows_mut().into_iter().enumerate() {
            let n = row.len() as f64;
            let mean = row.sum() / n;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let inv = 1.0 / (var + eps).sqrt();
            row.mapv_inplace(|v| (v - mean) * inv);
            inv_std[i] = inv;
        }
        let g = self.grad_any(&[x]);
        self.push(value, Op::LayerNormRows { x, inv_std }, g)
    }

    /// Pairwise cosine distance `1 - cos(a_i, b_j)` between the rows of `a` (n x d)
    /// and `b` (m x d), giving an n x m matrix.
    pub fn cosine_distance(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.ncols() != bv.ncols() {
            return Err(Error::shape(format!(
                "cosine distance between dims {} and {}",
                av.ncols(),
                bv.ncols()
            )));
        }
        let a_norm = row_norms(av);
        let b_norm = row_norms(bv);
        if a_norm
            .iter()
            .chain(b_norm.iter())
            .any(|&n| n < crate::pbr::NORM_FLOOR)
        {
            return Err(Error::ZeroNorm("cosine distance"));
        }
        let dots = av.dot(&bv.t());
        let mut value = dots;
        for ((i, j), v) in value.indexed_iter_mut() {
            *v = 1.0 - *v / (a_norm[i] * b_norm[j]);
        }
        let g = self.grad_any(&[a, b]);
        Ok(self.push(
            value,
            Op::CosineDistance {
                a,
                b,
                a_norm,
                b_norm,
            },
            g,
        ))
    }

    /// Row-wise minimum as an n x 1 column. Ties resolve to the lowest column index.
    pub fn min_rows(&mut self, x: Var) -> Var {
        let src = self.value(x);
        let mut argmin = Vec::with_capacity(src.nrows());
        let mut value = Array2::zeros((src.nrows(), 1));
        for (i, row) in src.rows().into_iter().enumerate() {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v < row[best] {
                    best = j;
                }
            }
            argmin.push(best);
            value[[i, 0]] = row[best];
        }
        let g = self.grad_any(&[x]);
        self.push(value, Op::MinRows { x, argmin }, g)
    }

    pub fn gather_rows(&mut self, table: Var, rows: &[usize]) -> Var {
        let src = self.value(table);
        let mut value = Array2::zeros((rows.len(), src.ncols()));
        for (k, &r) in rows.iter().enumerate() {
            value.row_mut(k).assign(&src.row(r));
        }
        let g = self.grad_any(&[table]);
        self.push(
            value,
            Op::GatherRows {
                table,
                rows: rows.to_vec(),
            },
            g,
        )
    }

    /// Registers a scalar whose input gradients were already computed.
    pub(crate) fn fused(&mut self, value: f64, inputs: Vec<(Var, Array2<f64>)>) -> Var {
        let g = inputs.iter().any(|(v, _)| self.nodes[v.0].needs_grad);
        self.push(Array2::from_elem((1, 1), value), Op::Fused { inputs }, g)
    }

    /// Reverse sweep from a scalar root.
    pub fn backward(&self, root: Var) -> Gradients {
        assert_eq!(
            self.value(root).dim(),
            (1, 1),
            "backward root must be scalar"
        );
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(Array2::ones((1, 1)));

        for idx in (0..=root.0).rev() {
            let Some(dy) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            if matches!(node.op, Op::Leaf | Op::Param) {
                grads[idx] = Some(dy);
                continue;
            }
            let mut acc = |v: Var, g: Array2<f64>| {
                if !self.nodes[v.0].needs_grad {
                    return;
                }
                match &mut grads[v.0] {
                    Some(existing) => *existing += &g,
                    slot @ None => *slot = Some(g),
                }
            };
            match &node.op {
                Op::Leaf | Op::Param => {}
                Op::MatMul(a, b) => {
                    acc(*a, dy.dot(&self.value(*b).t()));
                    acc(*b, self.value(*a).t().dot(&dy));
                }
                Op::Add(a, b) => {
                    acc(*a, dy.clone());
                    acc(*b, dy);
                }
                Op::AddRow(a, r) => {
                    acc(*r, dy.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    acc(*a, dy);
                }
                Op::Sub(a, b) => {
                    acc(*b, -&dy);
                    acc(*a, dy);
                }
                Op::Mul(a, b) => {
                    acc(*a, &dy * self.value(*b));
                    acc(*b, &dy * self.value(*a));
                }
                Op::MulCol(a, c) => {
                    let dc = (&dy * self.value(*a))
                        .sum_axis(Axis(1))
                        .insert_axis(Axis(1));
                    acc(*a, &dy * self.value(*c));
                    acc(*c, dc);
                }
                Op::Scale(a, k) => acc(*a, dy * *k),
                Op::Sigmoid(a) => {
                    let y = &node.value;
                    acc(*a, &dy * &y.mapv(|s| s * (1.0 - s)));
                }
                Op::Tanh(a) => {
                    let y = &node.value;
                    acc(*a, &dy * &y.mapv(|t| 1.0 - t * t));
                }
                Op::Transpose(a) => acc(*a, dy.t().to_owned()),
                Op::ConcatCols(parts) => {
                    let mut start = 0;
                    for p in parts {
                        let w = self.value(*p).ncols();
                        acc(*p, dy.slice(s![.., start..start + w]).to_owned());
                        start += w;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut start = 0;
                    for p in parts {
                        let h = self.value(*p).nrows();
                        acc(*p, dy.slice(s![start..start + h, ..]).to_owned());
                        start += h;
                    }
                }
                Op::SliceRows(a, start) => {
                    let mut g = Array2::zeros(self.value(*a).dim());
                    g.slice_mut(s![*start..*start + dy.nrows(), ..]).assign(&dy);
                    acc(*a, g);
                }
                Op::SliceCols(a, start) => {
                    let mut g = Array2::zeros(self.value(*a).dim());
                    g.slice_mut(s![.., *start..*start + dy.ncols()]).assign(&dy);
                    acc(*a, g);
                }
                Op::SumAll(a) => acc(*a, Array2::from_elem(self.value(*a).dim(), dy[[0, 0]])),
                Op::SoftmaxRows(a) => {
                    let y = &node.value;
                    let mut g = &dy * y;
                    for (mut grow, yrow) in g.rows_mut().into_iter().zip(y.rows()) {
                        let dot = grow.sum();
                        grow.zip_mut_with(&yrow, |gv, &yv| *gv -= yv * dot);
                    }
                    acc(*a, g);
                }
                Op::LayerNormRows { x, inv_std } => {
                    let y = &node.value;
                    let mut g = Array2::zeros(y.dim());
                    let n = y.ncols() as f64;
                    for i in 0..y.nrows() {
                        let dyr = dy.row(i);
                        let yr = y.row(i);
                        let mean_dy = dyr.sum() / n;
                        let mean_dyy =
                            dyr.iter().zip(yr.iter()).map(|(a, b)| a * b).sum::<f64>() / n;
                        for j in 0..y.ncols() {
                            g[[i, j]] = inv_std[i] * (dyr[j] - mean_dy - yr[j] * mean_dyy);
                        }
                    }
                    acc(*x, g);
                }
                Op::CosineDistance {
                    a,
                    b,
                    a_norm,
                    b_norm,
                } => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let y = &node.value;
                    let mut ga = Array2::zeros(av.dim());
                    let mut gb = Array2::zeros(bv.dim());
                    for i in 0..av.nrows() {
                        for j in 0..bv.nrows() {
                            let d = dy[[i, j]];
                            if d == 0.0 {
                                continue;
                            }
                            let cos = 1.0 - y[[i, j]];
                            let ab = a_norm[i] * b_norm[j];
                            let (ai, bj) = (av.row(i), bv.row(j));
                            let aa = a_norm[i] * a_norm[i];
                            let bb = b_norm[j] * b_norm[j];
                            for k in 0..av.ncols() {
                                ga[[i, k]] -= d * (bj[k] / ab - cos * ai[k] / aa);
                                gb[[j, k]] -= d * (ai[k] / ab - cos * bj[k] / bb);
                            }
                        }
                    }
                    acc(*a, ga);
                    acc(*b, gb);
                }
                Op::MinRows { x, argmin } => {
                    let mut g = Array2::zeros(self.value(*x).dim());
                    for (i, &j) in argmin.iter().enumerate() {
                        g[[i, j]] = dy[[i, 0]];
                    }
                    acc(*x, g);
                }
                Op::GatherRows { table, rows } => {
                    let mut g = Array2::zeros(self.value(*table).dim());
                    for (k, &r) in rows.iter().enumerate() {
                        let mut dst = g.row_mut(r);
                        dst += &dy.row(k);
                    }
                    acc(*table, g);
                }
                Op::Fused { inputs } => {
                    let k = dy[[0, 0]];
                    for (v, g) in inputs {
                        acc(*v, g * k);
                    }
                }
            }
        }
        Gradients {
            grads,
            params: self.bound.iter().map(|(id, v)| (*id, *v)).collect(),
        }
    }
}

/// Gradients produced by [`Graph::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Array2<f64>>>,
    params: Vec<(ParamId, Var)>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Array2<f64>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Gradients of every bound parameter, sorted by parameter id. Parameters
    /// that took no part in the loss get an explicit zero gradient.
    pub fn param_grads(&self, store: &ParamStore) -> Vec<(ParamId, Array2<f64>)> {
        let mut out: Vec<_> = self
            .params
            .iter()
            .map(|(id, v)| {
                let g = self
                    .get(*v)
                    .cloned()
                    .unwrap_or_else(|| Array2::zeros(store.get(*id).dim()));
                (*id, g)
            })
            .collect();
        out.sort_by_key(|(id, _)| *id);
        out
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn row_norms(m: &Array2<f64>) -> Array1<f64> {
    m.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect()
}

#[cfg(test)]
pub(crate) mod gradcheck {
    //! Central finite-difference checks used throughout the unit tests.

    use super::*;

    /// Compares analytic gradients against central differences for every
    /// entry of every input. `build` must rebuild the whole scalar from leaves.
    pub fn check<F>(inputs: &[Array2<f64>], build: F, tol: f64)
    where
        F: Fn(&mut Graph, &[Var]) -> Var,
    {
        let mut g = Graph::new();
        let vars: Vec<Var> = inputs.iter().map(|x| g.input(x.clone())).collect();
        let out = build(&mut g, &vars);
        let grads = g.backward(out);

        let eps = 1e-6;
        for (k, x) in inputs.iter().enumerate() {
            let analytic = grads
                .get(vars[k])
                .cloned()
                .unwrap_or_else(|| Array2::zeros(x.dim()));
            for idx in 0..x.len() {
                let (r, c) = (idx / x.ncols(), idx % x.ncols());
                let eval = |delta: f64| {
                    let mut perturbed: Vec<Array2<f64>> = inputs.to_vec();
                    perturbed[k][[r, c]] += delta;
                    let mut g = Graph::new();
                    let vars: Vec<Var> = perturbed.into_iter().map(|x| g.input(x)).collect();
                    let out = build(&mut g, &vars);
                    g.scalar(out)
                };
                let numeric = (eval(eps) - eval(-eps)) / (2.0 * eps);
                let a = analytic[[r, c]];
                let denom = a.abs().max(numeric.abs()).max(1e-2);
                let rel = (a - numeric).abs() / denom;
                assert!(
                    rel < tol,
                    "input {k} entry ({r},{c}): analytic {a} vs numeric {numeric} (rel {rel})"
                );
            }
        }
    }
}
