//! Reverse-mode automatic differentiation over dense `f64` matrices.
//!
//! A [`Tape`] records one forward computation as a flat list of nodes;
//! [`Tape::backward`] walks it in reverse and accumulates parameter
//! gradients into a [`Grads`] buffer. Parameters live in a [`ParamStore`]
//! that the tape borrows, so recording a pass never copies weights.
//!
//! The op set is exactly what the encoder–decoder needs. Attention, layer
//! normalization and the two losses are fused ops with hand-written
//! backward rules, which keeps the tape short.

use std::collections::HashMap;

use ndarray::{s, Array2, ArrayView2, Axis, Zip};
use rand::Rng;

pub type Mat = Array2<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named trainable matrices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Mat>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a parameter. Names must be unique.
    pub fn add(&mut self, name: impl Into<String>, value: Mat) -> ParamId {
        let name = name.into();
        assert!(!self.index.contains_key(&name), "duplicate parameter {name}");
        self.index.insert(name.clone(), self.values.len());
        self.names.push(name);
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Mat {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Mat {
        &mut self.values[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).map(|&i| ParamId(i))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Total number of scalar entries.
    pub fn numel(&self) -> usize {
        self.values.iter().map(|v| v.len()).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Mat)> {
        self.names
            .iter()
            .zip(&self.values)
            .enumerate()
            .map(|(i, (n, v))| (ParamId(i), n.as_str(), v))
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut Mat> {
        self.values.iter_mut()
    }

    pub fn zero_grads(&self) -> Grads {
        Grads(self.values.iter().map(|v| Mat::zeros(v.raw_dim())).collect())
    }
}

/// Gradient buffers, shaped like the parameters of a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grads(Vec<Mat>);

impl Grads {
    pub fn get(&self, id: ParamId) -> &Mat {
        &self.0[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Mat {
        &mut self.0[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Mat> {
        self.0.iter()
    }

    pub fn fill_zero(&mut self) {
        for g in &mut self.0 {
            g.fill(0.0);
        }
    }

    pub fn add_scaled(&mut self, other: &Grads, scale: f64) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            a.scaled_add(scale, b);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

struct AttentionCache {
    heads: usize,
    probs: Vec<Mat>,
}

enum Op {
    Input,
    Param(ParamId),
    Embed { table: ParamId, ids: Vec<usize> },
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Dropout { x: Var, mask: Mat },
    LayerNorm { x: Var, gain: Var, bias: Var, xhat: Mat, inv_std: Vec<f64> },
    Attention { q: Var, k: Var, v: Var, cache: AttentionCache },
    SmoothedNll { logits: Var, probs: Mat, targets: Vec<usize>, eps: f64 },
    SymmetricKl { a: Var, b: Var, pa: Mat, pb: Mat, kl_ab: Vec<f64>, kl_ba: Vec<f64> },
    WeightedSum(Vec<(Var, f64)>),
}

struct Node {
    value: Option<Mat>,
    op: Op,
}

pub struct Tape<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Tape {
            params,
            nodes: Vec::with_capacity(256),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Mat, op: Op) -> Var {
        self.nodes.push(Node {
            value: Some(value),
            op,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Mat {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(m), _) => m,
            (None, Op::Param(id)) => self.params.get(*id),
            _ => unreachable!("node without value"),
        }
    }

    /// The single entry of a 1×1 node.
    pub fn scalar(&self, v: Var) -> f64 {
        let m = self.value(v);
        debug_assert_eq!(m.dim(), (1, 1));
        m[[0, 0]]
    }

    pub fn input(&mut self, value: Mat) -> Var {
        self.push(value, Op::Input)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        self.nodes.push(Node {
            value: None,
            op: Op::Param(id),
        });
        Var(self.nodes.len() - 1)
    }

    /// Gathers rows `ids` of an embedding table.
    pub fn embed(&mut self, table: ParamId, ids: &[usize]) -> Var {
        let t = self.params.get(table);
        let mut out = Mat::zeros((ids.len(), t.ncols()));
        for (r, &id) in ids.iter().enumerate() {
            out.row_mut(r).assign(&t.row(id));
        }
        self.push(out, Op::Embed { table, ids: ids.to_vec() })
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).dot(self.value(b));
        self.push(out, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a) + self.value(b);
        self.push(out, Op::Add(a, b))
    }

    /// Adds a 1×n row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let out = self.value(a) + self.value(row);
        self.push(out, Op::AddRow(a, row))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a) * c;
        self.push(out, Op::Scale(a, c))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(|x| x.max(0.0));
        self.push(out, Op::Relu(a))
    }

    /// Inverted dropout. With `rate == 0` this is the identity and records
    /// nothing.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: Var, rate: f64, rng: &mut R) -> Var {
        if rate <= 0.0 {
            return x;
        }
        let keep = 1.0 - rate;
        let shape = self.value(x).raw_dim();
        let mask = Mat::from_shape_simple_fn(shape, || if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 });
        let out = self.value(x) * &mask;
        self.push(out, Op::Dropout { x, mask })
    }

    /// Row-wise layer normalization with gain and bias rows (1×n).
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Var {
        let xv = self.value(x);
        let n = xv.ncols() as f64;
        let mut xhat = xv.to_owned();
        let mut inv_std = Vec::with_capacity(xv.nrows());
        for mut row in xhat.rows_mut() {
            let mean = row.sum() / n;
            row.mapv_inplace(|v| v - mean);
            let var = row.iter().map(|v| v * v).sum::<f64>() / n;
            let r = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            row.mapv_inplace(|v| v * r);
            inv_std.push(r);
        }
        let out = &xhat * self.value(gain) + self.value(bias);
        self.push(out, Op::LayerNorm { x, gain, bias, xhat, inv_std })
    }

    /// Multi-head scaled dot-product attention over already-projected
    /// queries, keys and values. With `causal`, query `i` only sees keys
    /// `0..=i`.
    pub fn attention(&mut self, q: Var, k: Var, v: Var, heads: usize, causal: bool) -> Var {
        let (qv, kv, vv) = (self.value(q), self.value(k), self.value(v));
        let (tq, d) = qv.dim();
        let tk = kv.nrows();
        let dk = d / heads;
        let scale = 1.0 / (dk as f64).sqrt();
        let mut out = Mat::zeros((tq, d));
        let mut probs = Vec::with_capacity(heads);
        for h in 0..heads {
            let cols = s![.., h * dk..(h + 1) * dk];
            let mut scores = qv.slice(cols).dot(&kv.slice(cols).t()) * scale;
            for (i, mut row) in scores.rows_mut().into_iter().enumerate() {
                if causal {
                    for j in (i + 1)..tk {
                        row[j] = f64::NEG_INFINITY;
                    }
                }
                softmax_in_place(row.as_slice_mut().expect("contiguous row"));
            }
            out.slice_mut(cols).assign(&scores.dot(&vv.slice(cols)));
            probs.push(scores);
        }
        self.push(out, Op::Attention { q, k, v, cache: AttentionCache { heads, probs } })
    }

    /// Label-smoothed negative log-likelihood, summed over rows. Row `t` of
    /// `logits` is scored against `targets[t]`; `eps` of the target mass is
    /// spread uniformly over the vocabulary.
    pub fn smoothed_nll(&mut self, logits: Var, targets: &[usize], eps: f64) -> Var {
        let lv = self.value(logits);
        assert_eq!(lv.nrows(), targets.len());
        let vocab = lv.ncols() as f64;
        let mut probs = lv.to_owned();
        let mut loss = 0.0;
        for (mut row, &y) in probs.rows_mut().into_iter().zip(targets) {
            let slice = row.as_slice_mut().expect("contiguous row");
            log_softmax_in_place(slice);
            let mean_logp = slice.iter().sum::<f64>() / vocab;
            loss -= (1.0 - eps) * slice[y] + eps * mean_logp;
            for p in slice.iter_mut() {
                *p = p.exp();
            }
        }
        self.push(
            Mat::from_elem((1, 1), loss),
            Op::SmoothedNll { logits, probs, targets: targets.to_vec(), eps },
        )
    }

    /// `KL(p_a‖p_b) + KL(p_b‖p_a)` between the row softmaxes of two logit
    /// matrices, averaged over rows.
    pub fn symmetric_kl(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(av.dim(), bv.dim());
        let rows = av.nrows();
        let mut la = av.to_owned();
        let mut lb = bv.to_owned();
        let mut kl_ab = Vec::with_capacity(rows);
        let mut kl_ba = Vec::with_capacity(rows);
        for (mut ra, mut rb) in la.rows_mut().into_iter().zip(lb.rows_mut()) {
            let sa = ra.as_slice_mut().expect("contiguous row");
            let sb = rb.as_slice_mut().expect("contiguous row");
            log_softmax_in_place(sa);
            log_softmax_in_place(sb);
            let (mut ab, mut ba) = (0.0, 0.0);
            for (x, y) in sa.iter().zip(sb.iter()) {
                ab += x.exp() * (x - y);
                ba += y.exp() * (y - x);
            }
            kl_ab.push(ab);
            kl_ba.push(ba);
        }
        // Row-wise `ab + ba` keeps the value bit-identical when `a` and `b` swap.
        let total = kl_ab.iter().zip(&kl_ba).map(|(x, y)| x + y).sum::<f64>() / rows.max(1) as f64;
        let pa = la.mapv(f64::exp);
        let pb = lb.mapv(f64::exp);
        self.push(Mat::from_elem((1, 1), total), Op::SymmetricKl { a, b, pa, pb, kl_ab, kl_ba })
    }

    /// `Σ wᵢ·xᵢ` over 1×1 nodes.
    pub fn weighted_sum(&mut self, terms: &[(Var, f64)]) -> Var {
        let total = terms.iter().map(|&(v, w)| w * self.scalar(v)).sum::<f64>();
        self.push(Mat::from_elem((1, 1), total), Op::WeightedSum(terms.to_vec()))
    }

    /// Back-propagates from the 1×1 node `root` and adds `scale · ∂root/∂θ`
    /// into `grads`.
    pub fn backward(&self, root: Var, scale: f64, grads: &mut Grads) {
        let mut adj: Vec<Option<Mat>> = (0..self.nodes.len()).map(|_| None).collect();
        adj[root.0] = Some(Mat::from_elem((1, 1), scale));

        fn acc(adj: &mut [Option<Mat>], v: Var, g: Mat) {
            match &mut adj[v.0] {
                Some(existing) => *existing += &g,
                slot @ None => *slot = Some(g),
            }
        }
        fn acc_view(adj: &mut [Option<Mat>], v: Var, g: ArrayView2<f64>) {
            match &mut adj[v.0] {
                Some(existing) => *existing += &g,
                slot @ None => *slot = Some(g.to_owned()),
            }
        }

        for i in (0..=root.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            match &self.nodes[i].op {
                Op::Input => {}
                Op::Param(id) => grads.0[id.0] += &g,
                Op::Embed { table, ids } => {
                    let tg = &mut grads.0[table.0];
                    for (r, &id) in ids.iter().enumerate() {
                        let mut row = tg.row_mut(id);
                        row += &g.row(r);
                    }
                }
                Op::MatMul(a, b) => {
                    let ga = g.dot(&self.value(*b).t());
                    let gb = self.value(*a).t().dot(&g);
                    acc(&mut adj, *a, ga);
                    acc(&mut adj, *b, gb);
                }
                Op::Add(a, b) => {
                    acc_view(&mut adj, *b, g.view());
                    acc(&mut adj, *a, g);
                }
                Op::AddRow(a, row) => {
                    let gr = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    acc(&mut adj, *row, gr);
                    acc(&mut adj, *a, g);
                }
                Op::Scale(a, c) => acc(&mut adj, *a, g * *c),
                Op::Relu(a) => {
                    let mut ga = g;
                    Zip::from(&mut ga)
                        .and(self.value(*a))
                        .for_each(|gv, &x| if x <= 0.0 { *gv = 0.0 });
                    acc(&mut adj, *a, ga);
                }
                Op::Dropout { x, mask } => acc(&mut adj, *x, g * mask),
                Op::LayerNorm { x, gain, bias, xhat, inv_std } => {
                    let gain_v = self.value(*gain);
                    acc(&mut adj, *bias, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    acc(&mut adj, *gain, (&g * xhat).sum_axis(Axis(0)).insert_axis(Axis(0)));
                    let dxhat = &g * gain_v;
                    let n = dxhat.ncols() as f64;
                    let mut dx = Mat::zeros(dxhat.raw_dim());
                    for r in 0..dxhat.nrows() {
                        let dh = dxhat.row(r);
                        let xh = xhat.row(r);
                        let mean_dh = dh.sum() / n;
                        let mean_dh_xh = dh.dot(&xh) / n;
                        let mut out = dx.row_mut(r);
                        Zip::from(&mut out)
                            .and(&dh)
                            .and(&xh)
                            .for_each(|o, &d, &h| *o = inv_std[r] * (d - mean_dh - h * mean_dh_xh));
                    }
                    acc(&mut adj, *x, dx);
                }
                Op::Attention { q, k, v, cache } => {
                    let (qv, kv, vv) = (self.value(*q), self.value(*k), self.value(*v));
                    let d = qv.ncols();
                    let dk = d / cache.heads;
                    let scale = 1.0 / (dk as f64).sqrt();
                    let mut gq = Mat::zeros(qv.raw_dim());
                    let mut gk = Mat::zeros(kv.raw_dim());
                    let mut gv = Mat::zeros(vv.raw_dim());
                    for (h, p) in cache.probs.iter().enumerate() {
                        let cols = s![.., h * dk..(h + 1) * dk];
                        let go = g.slice(cols);
                        let dp = go.dot(&vv.slice(cols).t());
                        gv.slice_mut(cols).assign(&p.t().dot(&go));
                        let mut ds = p * &dp;
                        for (mut ds_row, p_row) in ds.rows_mut().into_iter().zip(p.rows()) {
                            let inner = ds_row.sum();
                            Zip::from(&mut ds_row).and(&p_row).for_each(|x, &pv| *x -= pv * inner);
                        }
                        ds *= scale;
                        gq.slice_mut(cols).assign(&ds.dot(&kv.slice(cols)));
                        gk.slice_mut(cols).assign(&ds.t().dot(&qv.slice(cols)));
                    }
                    acc(&mut adj, *q, gq);
                    acc(&mut adj, *k, gk);
                    acc(&mut adj, *v, gv);
                }
                Op::SmoothedNll { logits, probs, targets, eps } => {
                    let gs = g[[0, 0]];
                    let uniform = eps / probs.ncols() as f64;
                    let mut gl = probs.clone();
                    for (mut row, &y) in gl.rows_mut().into_iter().zip(targets) {
                        row.mapv_inplace(|p| p - uniform);
                        row[y] -= 1.0 - eps;
                    }
                    gl *= gs;
                    acc(&mut adj, *logits, gl);
                }
                Op::SymmetricKl { a, b, pa, pb, kl_ab, kl_ba } => {
                    let gs = g[[0, 0]] / pa.nrows().max(1) as f64;
                    let mut ga = Mat::zeros(pa.raw_dim());
                    let mut gb = Mat::zeros(pb.raw_dim());
                    for r in 0..pa.nrows() {
                        for c in 0..pa.ncols() {
                            let (x, y) = (pa[[r, c]], pb[[r, c]]);
                            let diff = ln_ratio(x, y);
                            ga[[r, c]] = gs * (x * diff + x - y - x * kl_ab[r]);
                            gb[[r, c]] = gs * (-y * diff + y - x - y * kl_ba[r]);
                        }
                    }
                    acc(&mut adj, *a, ga);
                    acc(&mut adj, *b, gb);
                }
                Op::WeightedSum(terms) => {
                    let gs = g[[0, 0]];
                    for &(v, w) in terms {
                        acc(&mut adj, v, Mat::from_elem((1, 1), gs * w));
                    }
                }
            }
        }
    }
}

/// `ln(x / y)` for probabilities, 0 when both underflow to zero.
fn ln_ratio(x: f64, y: f64) -> f64 {
    if x == 0.0 && y == 0.0 {
        0.0
    } else {
        x.ln() - y.ln()
    }
}

pub fn log_softmax_in_place(xs: &mut [f64]) {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
    for x in xs.iter_mut() {
        *x -= lse;
    }
}

pub fn softmax_in_place(xs: &mut [f64]) {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in xs.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in xs.iter_mut() {
        *x /= sum;
    }
}
