//! Tape-based reverse-mode differentiation over dense `f64` matrices.
//!
//! A [`Graph`] records every operation eagerly: values are computed as the
//! graph is built, and [`Graph::backward`] walks the tape in reverse to
//! produce gradients for every [`ParamStore`] entry the output depends on.
//! Everything is a 2-D matrix; vectors are `1×n` or `n×1`.

use std::borrow::Cow;

use ndarray::{concatenate, s, Array2, ArrayView2, Axis, Zip};

use crate::params::{Gradients, ParamId, ParamStore};

/// Handle to a node on the tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// One block-diagonal attention segment: queries `q_start..q_start+q_len`
/// attend to keys `k_start..k_start+k_len`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AttnSegment {
    pub q_start: usize,
    pub q_len: usize,
    pub k_start: usize,
    pub k_len: usize,
}

impl AttnSegment {
    pub fn square(start: usize, len: usize) -> Self {
        Self {
            q_start: start,
            q_len: len,
            k_start: start,
            k_len: len,
        }
    }
}

/// Options for [`Graph::attention`].
#[derive(Clone, Debug, Default)]
pub struct AttnSpec {
    pub heads: usize,
    pub segments: Vec<AttnSegment>,
    /// Query `i` of a segment only sees keys `j <= i` of that segment.
    pub causal: bool,
    /// Per key row: `true` when the key may be attended to.
    pub key_mask: Option<Vec<bool>>,
}

enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    MatMulT(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    MulConst(Var, Array2<f64>),
    Scale(Var, f64),
    AddScalar(Var),
    Tanh(Var),
    Sigmoid(Var),
    Gelu(Var),
    Ln(Var),
    Softmax(Var),
    LogSoftmax(Var),
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Array2<f64>,
        inv_std: Vec<f64>,
    },
    Embedding {
        table: Var,
        ids: Vec<usize>,
    },
    SelectRows(Var, Vec<usize>),
    SliceRows(Var, usize),
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
    SumRows(Var),
    SumAll(Var),
    GatherPerRow(Var, Vec<Option<usize>>),
    Attention {
        q: Var,
        k: Var,
        v: Var,
        spec: AttnSpec,
        probs: Vec<Array2<f64>>,
    },
}

struct Node<'p> {
    value: Cow<'p, Array2<f64>>,
    op: Op,
}

/// Recording tape bound to one parameter store.
pub struct Graph<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node<'p>>,
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

impl<'p> Graph<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Self {
            params,
            nodes: Vec::with_capacity(256),
        }
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> Var {
        self.nodes.push(Node {
            value: Cow::Owned(value),
            op,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.dim()
    }

    /// Scalar value of a `1×1` node.
    pub fn scalar(&self, v: Var) -> f64 {
        let val = self.value(v);
        debug_assert_eq!(val.dim(), (1, 1));
        val[[0, 0]]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        self.nodes.push(Node {
            value: Cow::Borrowed(self.params.get(id)),
            op: Op::Param(id),
        });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).dot(self.value(b));
        self.push(value, Op::MatMul(a, b))
    }

    /// `a · bᵀ`
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).dot(&self.value(b).t());
        self.push(value, Op::MatMulT(a, b))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).t().to_owned();
        self.push(value, Op::Transpose(a))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) + self.value(b);
        self.push(value, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) - self.value(b);
        self.push(value, Op::Sub(a, b))
    }

    /// Adds a `1×c` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let value = self.value(a) + self.value(row);
        self.push(value, Op::AddRow(a, row))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) * self.value(b);
        self.push(value, Op::Mul(a, b))
    }

    /// Elementwise product with a constant matrix (no gradient to the constant).
    pub fn mul_const(&mut self, a: Var, c: Array2<f64>) -> Var {
        let value = self.value(a) * &c;
        self.push(value, Op::MulConst(a, c))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let value = self.value(a) * factor;
        self.push(value, Op::Scale(a, factor))
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a) + c;
        self.push(value, Op::AddScalar(a))
    }

    /// `1 - a`
    pub fn one_minus(&mut self, a: Var) -> Var {
        let neg = self.scale(a, -1.0);
        self.add_scalar(neg, 1.0)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(f64::tanh);
        self.push(value, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(sigmoid);
        self.push(value, Op::Sigmoid(a))
    }

    /// Tanh-approximated GELU.
    pub fn gelu(&mut self, a: Var) -> Var {
        let value = self
            .value(a)
            .mapv(|x| 0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh()));
        self.push(value, Op::Gelu(a))
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(f64::ln);
        self.push(value, Op::Ln(a))
    }

    /// Row-wise softmax.
    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let value = softmax_rows(&self.value(a).view());
        self.push(value, Op::Softmax(a))
    }

    /// Row-wise softmax where `mask[i][j] == false` entries get probability 0.
    pub fn masked_softmax_rows(&mut self, a: Var, mask: &Array2<bool>) -> Var {
        let mut logits = self.value(a).clone();
        Zip::from(&mut logits).and(mask).for_each(|x, &keep| {
            if !keep {
                *x = f64::NEG_INFINITY;
            }
        });
        let value = softmax_rows(&logits.view());
        self.push(value, Op::Softmax(a))
    }

    pub fn log_softmax_rows(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let mut value = x.clone();
        for mut row in value.rows_mut() {
            let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
            row.mapv_inplace(|v| v - lse);
        }
        self.push(value, Op::LogSoftmax(a))
    }

    /// Per-row layer normalization with `1×c` gain and bias.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Var {
        let xv = self.value(x);
        let cols = xv.ncols() as f64;
        let mut xhat = xv.clone();
        let mut inv_std = Vec::with_capacity(xv.nrows());
        for mut row in xhat.rows_mut() {
            let mean = row.sum() / cols;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols;
            let inv = 1.0 / (var + eps).sqrt();
            row.mapv_inplace(|v| (v - mean) * inv);
            inv_std.push(inv);
        }
        let value = &xhat * self.value(gamma) + self.value(beta);
        self.push(
            value,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            },
        )
    }

    /// Row lookup into an embedding table.
    pub fn embedding(&mut self, table: Var, ids: &[usize]) -> Var {
        let t = self.value(table);
        let mut value = Array2::zeros((ids.len(), t.ncols()));
        for (r, &id) in ids.iter().enumerate() {
            value.row_mut(r).assign(&t.row(id));
        }
        self.push(
            value,
            Op::Embedding {
                table,
                ids: ids.to_vec(),
            },
        )
    }

    pub fn select_rows(&mut self, a: Var, rows: &[usize]) -> Var {
        let av = self.value(a);
        let mut value = Array2::zeros((rows.len(), av.ncols()));
        for (r, &src) in rows.iter().enumerate() {
            value.row_mut(r).assign(&av.row(src));
        }
        self.push(value, Op::SelectRows(a, rows.to_vec()))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Var {
        let value = self.value(a).slice(s![start..start + len, ..]).to_owned();
        self.push(value, Op::SliceRows(a, start))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let views: Vec<ArrayView2<f64>> = parts.iter().map(|&p| self.value(p).view()).collect();
        let value = concatenate(Axis(0), &views).expect("column counts agree");
        self.push(value, Op::ConcatRows(parts.to_vec()))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let views: Vec<ArrayView2<f64>> = parts.iter().map(|&p| self.value(p).view()).collect();
        let value = concatenate(Axis(1), &views).expect("row counts agree");
        self.push(value, Op::ConcatCols(parts.to_vec()))
    }

    /// Row sums as an `r×1` column.
    pub fn sum_rows(&mut self, a: Var) -> Var {
        let value = self.value(a).sum_axis(Axis(1)).insert_axis(Axis(1));
        self.push(value, Op::SumRows(a))
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let value = Array2::from_elem((1, 1), self.value(a).sum());
        self.push(value, Op::SumAll(a))
    }

    pub fn mean_all(&mut self, a: Var) -> Var {
        let n = self.value(a).len() as f64;
        let s = self.sum_all(a);
        self.scale(s, 1.0 / n)
    }

    /// Picks one column per row (`None` yields 0) into an `r×1` column.
    pub fn gather_per_row(&mut self, a: Var, cols: &[Option<usize>]) -> Var {
        let av = self.value(a);
        let value = Array2::from_shape_fn((cols.len(), 1), |(r, _)| match cols[r] {
            Some(c) => av[[r, c]],
            None => 0.0,
        });
        self.push(value, Op::GatherPerRow(a, cols.to_vec()))
    }

    /// Scaled dot-product multi-head attention over block-diagonal segments.
    /// `q`, `k`, `v` are already projected; heads split the column axis.
    pub fn attention(&mut self, q: Var, k: Var, v: Var, spec: AttnSpec) -> Var {
        let (qv, kv, vv) = (self.value(q), self.value(k), self.value(v));
        let d = qv.ncols();
        assert!(spec.heads > 0 && d % spec.heads == 0, "heads must divide width");
        let dh = d / spec.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut out = Array2::zeros((qv.nrows(), vv.ncols()));
        let mut probs = Vec::with_capacity(spec.segments.len() * spec.heads);
        for seg in &spec.segments {
            for h in 0..spec.heads {
                let cols = h * dh..(h + 1) * dh;
                let qh = qv.slice(s![seg.q_start..seg.q_start + seg.q_len, cols.clone()]);
                let kh = kv.slice(s![seg.k_start..seg.k_start + seg.k_len, cols.clone()]);
                let vh = vv.slice(s![seg.k_start..seg.k_start + seg.k_len, cols.clone()]);
                let mut scores = qh.dot(&kh.t()) * scale;
                for i in 0..seg.q_len {
                    for j in 0..seg.k_len {
                        let masked = (spec.causal && j > i)
                            || spec
                                .key_mask
                                .as_ref()
                                .is_some_and(|m| !m[seg.k_start + j]);
                        if masked {
                            scores[[i, j]] = f64::NEG_INFINITY;
                        }
                    }
                }
                let p = softmax_rows(&scores.view());
                out.slice_mut(s![seg.q_start..seg.q_start + seg.q_len, cols])
                    .assign(&p.dot(&vh));
                probs.push(p);
            }
        }
        self.push(
            out,
            Op::Attention {
                q,
                k,
                v,
                spec,
                probs,
            },
        )
    }

    /// Attention probabilities recorded by an [`Graph::attention`] node, in
    /// `(segment, head)` order.
    pub fn attention_probs(&self, v: Var) -> Option<&[Array2<f64>]> {
        match &self.nodes[v.0].op {
            Op::Attention { probs, .. } => Some(probs),
            _ => None,
        }
    }

    /// Reverse pass from a `1×1` output. Returns gradients for every
    /// parameter reached.
    pub fn backward(&self, output: Var) -> Gradients {
        let n = output.0 + 1;
        let mut grads: Vec<Option<Array2<f64>>> = (0..n).map(|_| None).collect();
        grads[output.0] = Some(Array2::ones(self.value(output).dim()));
        let mut param_grads: Vec<Option<Array2<f64>>> = vec![None; self.params.len()];

        for idx in (0..n).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {}
                Op::Param(id) => acc_owned(&mut param_grads[id.0], g),
                Op::MatMul(a, b) => {
                    let ga = g.dot(&self.value(*b).t());
                    let gb = self.value(*a).t().dot(&g);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::MatMulT(a, b) => {
                    let ga = g.dot(self.value(*b));
                    let gb = g.t().dot(self.value(*a));
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::Transpose(a) => acc(&mut grads, *a, g.t().to_owned()),
                Op::Add(a, b) => {
                    acc(&mut grads, *b, g.clone());
                    acc(&mut grads, *a, g);
                }
                Op::Sub(a, b) => {
                    acc(&mut grads, *b, -&g);
                    acc(&mut grads, *a, g);
                }
                Op::AddRow(a, row) => {
                    acc(&mut grads, *row, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    acc(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let ga = &g * self.value(*b);
                    let gb = &g * self.value(*a);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::MulConst(a, c) => acc(&mut grads, *a, &g * c),
                Op::Scale(a, f) => acc(&mut grads, *a, g * *f),
                Op::AddScalar(a) => acc(&mut grads, *a, g),
                Op::Tanh(a) => {
                    let y = &node.value;
                    let ga = Zip::from(&g).and(&**y).map_collect(|&g, &y| g * (1.0 - y * y));
                    acc(&mut grads, *a, ga);
                }
                Op::Sigmoid(a) => {
                    let y = &node.value;
                    let ga = Zip::from(&g).and(&**y).map_collect(|&g, &y| g * y * (1.0 - y));
                    acc(&mut grads, *a, ga);
                }
                Op::Gelu(a) => {
                    let x = self.value(*a);
                    let ga = Zip::from(&g).and(x).map_collect(|&g, &x| {
                        let t = (GELU_C * (x + GELU_A * x * x * x)).tanh();
                        let dt = (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x);
                        g * (0.5 * (1.0 + t) + 0.5 * x * dt)
                    });
                    acc(&mut grads, *a, ga);
                }
                Op::Ln(a) => {
                    let x = self.value(*a);
                    acc(&mut grads, *a, &g / x);
                }
                Op::Softmax(a) => {
                    let p: &Array2<f64> = &node.value;
                    let mut ga = &g * p;
                    for (mut row, prow) in ga.rows_mut().into_iter().zip(p.rows()) {
                        let dot = row.sum();
                        Zip::from(&mut row).and(&prow).for_each(|r, &pv| *r -= pv * dot);
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::LogSoftmax(a) => {
                    let y: &Array2<f64> = &node.value;
                    let mut ga = g.clone();
                    for ((mut row, yrow), grow) in
                        ga.rows_mut().into_iter().zip(y.rows()).zip(g.rows())
                    {
                        let total = grow.sum();
                        Zip::from(&mut row)
                            .and(&yrow)
                            .for_each(|r, &yv| *r -= yv.exp() * total);
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::LayerNorm {
                    x,
                    gamma,
                    beta,
                    xhat,
                    inv_std,
                } => {
                    acc(&mut grads, *beta, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    acc(
                        &mut grads,
                        *gamma,
                        (&g * xhat).sum_axis(Axis(0)).insert_axis(Axis(0)),
                    );
                    let dxhat = &g * self.value(*gamma);
                    let cols = xhat.ncols() as f64;
                    let mut gx = Array2::zeros(xhat.dim());
                    for r in 0..xhat.nrows() {
                        let dr = dxhat.row(r);
                        let xr = xhat.row(r);
                        let sum_d = dr.sum();
                        let sum_dx = dr.dot(&xr);
                        let inv = inv_std[r];
                        let mut out = gx.row_mut(r);
                        for c in 0..xhat.ncols() {
                            out[c] = inv / cols * (cols * dr[c] - sum_d - xr[c] * sum_dx);
                        }
                    }
                    acc(&mut grads, *x, gx);
                }
                Op::Embedding { table, ids } => {
                    let mut gt = Array2::zeros(self.value(*table).dim());
                    for (r, &id) in ids.iter().enumerate() {
                        let mut dst = gt.row_mut(id);
                        dst += &g.row(r);
                    }
                    acc(&mut grads, *table, gt);
                }
                Op::SelectRows(a, rows) => {
                    let mut ga = Array2::zeros(self.value(*a).dim());
                    for (r, &src) in rows.iter().enumerate() {
                        let mut dst = ga.row_mut(src);
                        dst += &g.row(r);
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::SliceRows(a, start) => {
                    let mut ga = Array2::zeros(self.value(*a).dim());
                    ga.slice_mut(s![*start..*start + g.nrows(), ..]).assign(&g);
                    acc(&mut grads, *a, ga);
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let rows = self.value(p).nrows();
                        acc(
                            &mut grads,
                            p,
                            g.slice(s![offset..offset + rows, ..]).to_owned(),
                        );
                        offset += rows;
                    }
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let cols = self.value(p).ncols();
                        acc(
                            &mut grads,
                            p,
                            g.slice(s![.., offset..offset + cols]).to_owned(),
                        );
                        offset += cols;
                    }
                }
                Op::SumRows(a) => {
                    let (r, c) = self.value(*a).dim();
                    let ga = Array2::from_shape_fn((r, c), |(i, _)| g[[i, 0]]);
                    acc(&mut grads, *a, ga);
                }
                Op::SumAll(a) => {
                    let ga = Array2::from_elem(self.value(*a).dim(), g[[0, 0]]);
                    acc(&mut grads, *a, ga);
                }
                Op::GatherPerRow(a, cols) => {
                    let mut ga = Array2::zeros(self.value(*a).dim());
                    for (r, c) in cols.iter().enumerate() {
                        if let Some(c) = c {
                            ga[[r, *c]] += g[[r, 0]];
                        }
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::Attention {
                    q,
                    k,
                    v,
                    spec,
                    probs,
                } => {
                    let (qv, kv, vv) = (self.value(*q), self.value(*k), self.value(*v));
                    let dh = qv.ncols() / spec.heads;
                    let scale = 1.0 / (dh as f64).sqrt();
                    let mut gq = Array2::zeros(qv.dim());
                    let mut gk = Array2::zeros(kv.dim());
                    let mut gv = Array2::zeros(vv.dim());
                    let mut pi = 0;
                    for seg in &spec.segments {
                        let qr = seg.q_start..seg.q_start + seg.q_len;
                        let kr = seg.k_start..seg.k_start + seg.k_len;
                        for h in 0..spec.heads {
                            let cols = h * dh..(h + 1) * dh;
                            let p = &probs[pi];
                            pi += 1;
                            let go = g.slice(s![qr.clone(), cols.clone()]);
                            let qh = qv.slice(s![qr.clone(), cols.clone()]);
                            let kh = kv.slice(s![kr.clone(), cols.clone()]);
                            let vh = vv.slice(s![kr.clone(), cols.clone()]);
                            let dp = go.dot(&vh.t());
                            let mut ds = &dp * p;
                            for (mut row, prow) in ds.rows_mut().into_iter().zip(p.rows()) {
                                let dot = row.sum();
                                Zip::from(&mut row).and(&prow).for_each(|r, &pv| *r -= pv * dot);
                            }
                            ds *= scale;
                            let mut gvs = gv.slice_mut(s![kr.clone(), cols.clone()]);
                            gvs += &p.t().dot(&go);
                            let mut gqs = gq.slice_mut(s![qr.clone(), cols.clone()]);
                            gqs += &ds.dot(&kh);
                            let mut gks = gk.slice_mut(s![kr.clone(), cols.clone()]);
                            gks += &ds.t().dot(&qh);
                        }
                    }
                    acc(&mut grads, *q, gq);
                    acc(&mut grads, *k, gk);
                    acc(&mut grads, *v, gv);
                }
            }
        }
        Gradients::from_vec(param_grads)
    }
}

fn acc(grads: &mut [Option<Array2<f64>>], v: Var, g: Array2<f64>) {
    acc_owned(&mut grads[v.0], g);
}

fn acc_owned(slot: &mut Option<Array2<f64>>, g: Array2<f64>) {
    match slot {
        Some(existing) => *existing += &g,
        None => *slot = Some(g),
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

/// Numerically stable row-wise softmax. Rows that are entirely `-inf`
/// become all zeros.
pub fn softmax_rows(x: &ArrayView2<f64>) -> Array2<f64> {
    let mut out = x.to_owned();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        if max == f64::NEG_INFINITY {
            row.fill(0.0);
            continue;
        }
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn softmax_rows_are_distributions(vals in prop::collection::vec(-50.0f64..50.0, 1..40)) {
            let n = vals.len();
            let x = Array2::from_shape_vec((1, n), vals).unwrap();
            let p = softmax_rows(&x.view());
            prop_assert!((p.sum() - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn fully_masked_row_is_zero() {
        let x = Array2::from_elem((1, 3), f64::NEG_INFINITY);
        assert_eq!(softmax_rows(&x.view()).sum(), 0.0);
    }
}
