//! Reverse-mode differentiation over dense tensors.
//!
//! A [`Tape`] is an append-only list of nodes. Each node holds its forward
//! value and the op that produced it; [`Tape::backward`] walks the list in
//! reverse, so the recording order is a valid topological order by
//! construction.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};

use super::segment::{self, check_segments, segment_counts, ReduceMode};
use super::{ParamStore, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param,
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Square(Var),
    Silu(Var),
    LeakyRelu(Var, f64),
    ConcatCols(Vec<Var>),
    GatherRows(Var, Vec<usize>),
    SegmentReduce {
        input: Var,
        ids: Vec<usize>,
        mode: ReduceMode,
        // Max: winning row per output element; Mean: unused.
        argmax: Vec<usize>,
    },
    SegmentSoftmax {
        input: Var,
        ids: Vec<usize>,
        n: usize,
    },
    RowSum(Var),
    MulCol(Var, Var),
    SumRows(Var),
    SumAll(Var),
    MeanAll(Var),
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Recorded forward computation.
#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
    params: HashMap<String, Var>,
}

/// Result of a backward pass.
#[derive(Debug, Clone)]
pub struct Gradients {
    nodes: Vec<Option<Tensor>>,
    params: BTreeMap<String, Tensor>,
}

impl Gradients {
    /// Gradient of a parameter that took part in the forward pass.
    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.params.get(name)
    }

    /// Gradient with respect to a leaf or parameter node; `None` if it did
    /// not influence the loss. Intermediate gradients are not retained.
    pub fn wrt(&self, var: Var) -> Option<&Tensor> {
        self.nodes[var.0].as_ref()
    }

    pub fn params(&self) -> &BTreeMap<String, Tensor> {
        &self.params
    }

    pub fn into_params(self) -> BTreeMap<String, Tensor> {
        self.params
    }
}

/// Runs [`Tape::backward`] and fills in zeros for every parameter of `store`
/// that the loss does not depend on.
pub fn backward(tape: &Tape, loss: Var, store: &ParamStore) -> Result<BTreeMap<String, Tensor>> {
    let mut grads = tape.backward(loss)?.into_params();
    for (name, value) in store.iter() {
        grads
            .entry(name.to_string())
            .or_insert_with(|| Tensor::zeros(value.shape()));
    }
    Ok(grads)
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// A constant input; gradients are still tracked for inspection.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Binds a named parameter. Repeated calls return the same node so that
    /// gradients from every use accumulate.
    pub fn param(&mut self, store: &ParamStore, name: &str) -> Result<Var> {
        if let Some(&v) = self.params.get(name) {
            return Ok(v);
        }
        let value = store.require(name)?.clone();
        let v = self.push(value, Op::Param);
        self.params.insert(name.to_string(), v);
        Ok(v)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    /// Adds a bias vector to every row.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (r, c) = self.value(a).dims2();
        let b = self.value(bias);
        if b.numel() != c {
            return Err(Error::dim("add_bias", format!("{c} columns, bias of {}", b.numel())));
        }
        let mut out = self.value(a).clone();
        for i in 0..r {
            for (o, &bv) in out.row_mut(i).iter_mut().zip(b.data()) {
                *o += bv;
            }
        }
        Ok(self.push(out, Op::AddBias(a, bias)))
    }

    fn same_shape(&self, a: Var, b: Var, ctx: &str) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(Error::dim(ctx, format!("{sa:?} vs {sb:?}")));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "add")?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x + y);
        Ok(self.push(out, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "sub")?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x - y);
        Ok(self.push(out, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "mul")?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x * y);
        Ok(self.push(out, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let out = self.value(a).map(|x| x * s);
        self.push(out, Op::Scale(a, s))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x * x);
        self.push(out, Op::Square(a))
    }

    pub fn silu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x * sigmoid(x));
        self.push(out, Op::Silu(a))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let out = self.value(a).map(|x| if x > 0.0 { x } else { slope * x });
        self.push(out, Op::LeakyRelu(a, slope))
    }

    /// Horizontal concatenation of matrices with equal row counts.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = self.value(parts[0]).rows();
        if let Some(p) = parts.iter().find(|&&p| self.value(p).rows() != rows) {
            return Err(Error::dim(
                "concat_cols",
                format!("{} rows vs {rows}", self.value(*p).rows()),
            ));
        }
        let widths: Vec<usize> = parts.iter().map(|&p| self.value(p).cols()).collect();
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(rows * total);
        for i in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(i));
            }
        }
        Ok(self.push(Tensor::matrix(rows, total, data), Op::ConcatCols(parts.to_vec())))
    }

    pub fn gather_rows(&mut self, a: Var, idx: &[usize]) -> Result<Var> {
        let rows = self.value(a).rows();
        if let Some(&bad) = idx.iter().find(|&&i| i >= rows) {
            return Err(Error::Index {
                context: "gather_rows".into(),
                index: bad,
                limit: rows,
            });
        }
        let out = self.value(a).select_rows(idx);
        Ok(self.push(out, Op::GatherRows(a, idx.to_vec())))
    }

    pub fn segment_reduce(&mut self, a: Var, ids: &[usize], n: usize, mode: ReduceMode) -> Result<Var> {
        check_segments(self.value(a).rows(), ids, n, "segment_reduce")?;
        let (out, argmax) = segment::segment_reduce_unchecked(self.value(a), ids, n, mode);
        Ok(self.push(
            out,
            Op::SegmentReduce {
                input: a,
                ids: ids.to_vec(),
                mode,
                argmax,
            },
        ))
    }

    pub fn segment_softmax(&mut self, a: Var, ids: &[usize], n: usize) -> Result<Var> {
        check_segments(self.value(a).numel(), ids, n, "segment_softmax")?;
        let out = segment::segment_softmax_unchecked(self.value(a), ids, n);
        Ok(self.push(
            out,
            Op::SegmentSoftmax {
                input: a,
                ids: ids.to_vec(),
                n,
            },
        ))
    }

    /// Sum across columns: `[n×m] -> [n×1]`.
    pub fn row_sum(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let (r, _) = t.dims2();
        let out: Vec<f64> = (0..r).map(|i| t.row(i).iter().sum()).collect();
        self.push(Tensor::matrix(r, 1, out), Op::RowSum(a))
    }

    /// Scales row `i` of `a` by `c[i]`.
    pub fn mul_col(&mut self, a: Var, c: Var) -> Result<Var> {
        let (r, _) = self.value(a).dims2();
        if self.value(c).numel() != r {
            return Err(Error::dim(
                "mul_col",
                format!("{r} rows, column of {}", self.value(c).numel()),
            ));
        }
        let mut out = self.value(a).clone();
        for i in 0..r {
            let s = self.value(c).data()[i];
            for o in out.row_mut(i) {
                *o *= s;
            }
        }
        Ok(self.push(out, Op::MulCol(a, c)))
    }

    /// Sum over rows: `[n×m] -> [1×m]`.
    pub fn sum_rows(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let (r, c) = t.dims2();
        let mut out = vec![0.0; c];
        for i in 0..r {
            for (o, &v) in out.iter_mut().zip(t.row(i)) {
                *o += v;
            }
        }
        self.push(Tensor::matrix(1, c, out), Op::SumRows(a))
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(s), Op::SumAll(a))
    }

    pub fn mean_all(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let s = t.data().iter().sum::<f64>() / t.numel() as f64;
        self.push(Tensor::scalar(s), Op::MeanAll(a))
    }

    /// Propagates `d loss / d node` for every node recorded before `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if !self.value(loss).is_scalar() {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::full(self.value(loss).shape(), 1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf | Op::Param => grads[idx] = Some(g),
                Op::MatMul(a, b) => {
                    let av = self.value(*a);
                    let bv = self.value(*b);
                    let ga = g.matmul(&bv.transpose())?;
                    let gb = av.transpose().matmul(&g)?;
                    accumulate(&mut grads, *a, reshape_like(ga, av));
                    accumulate(&mut grads, *b, reshape_like(gb, bv));
                }
                Op::AddBias(a, b) => {
                    let bv = self.value(*b);
                    let (r, c) = g.dims2();
                    let mut gb = vec![0.0; c];
                    for i in 0..r {
                        for (o, &v) in gb.iter_mut().zip(g.row(i)) {
                            *o += v;
                        }
                    }
                    accumulate(&mut grads, *b, Tensor::new(bv.shape().to_vec(), gb)?);
                    accumulate(&mut grads, *a, g);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *b, g.map(|v| -v));
                    accumulate(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let ga = g.zip_map(self.value(*b), |gv, bv| gv * bv);
                    let gb = g.zip_map(self.value(*a), |gv, av| gv * av);
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Scale(a, s) => {
                    let s = *s;
                    accumulate(&mut grads, *a, g.map(|v| v * s));
                }
                Op::Square(a) => {
                    let ga = g.zip_map(self.value(*a), |gv, x| 2.0 * x * gv);
                    accumulate(&mut grads, *a, ga);
                }
                Op::Silu(a) => {
                    let ga = g.zip_map(self.value(*a), |gv, x| {
                        let s = sigmoid(x);
                        gv * s * (1.0 + x * (1.0 - s))
                    });
                    accumulate(&mut grads, *a, ga);
                }
                Op::LeakyRelu(a, slope) => {
                    let slope = *slope;
                    let ga = g.zip_map(self.value(*a), |gv, x| if x > 0.0 { gv } else { slope * gv });
                    accumulate(&mut grads, *a, ga);
                }
                Op::ConcatCols(parts) => {
                    let rows = g.rows();
                    let mut offset = 0;
                    for &p in parts {
                        let w = self.value(p).cols();
                        let mut data = Vec::with_capacity(rows * w);
                        for i in 0..rows {
                            data.extend_from_slice(&g.row(i)[offset..offset + w]);
                        }
                        offset += w;
                        let gp = reshape_like(Tensor::matrix(rows, w, data), self.value(p));
                        accumulate(&mut grads, p, gp);
                    }
                }
                Op::GatherRows(a, idx) => {
                    let av = self.value(*a);
                    let mut ga = Tensor::zeros(av.shape());
                    for (e, &src) in idx.iter().enumerate() {
                        for (o, &v) in ga.row_mut(src).iter_mut().zip(g.row(e)) {
                            *o += v;
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::SegmentReduce {
                    input,
                    ids,
                    mode,
                    argmax,
                } => {
                    let av = self.value(*input);
                    let d = av.cols();
                    let mut ga = Tensor::zeros(av.shape());
                    match mode {
                        ReduceMode::Sum => {
                            for (e, &s) in ids.iter().enumerate() {
                                ga.row_mut(e).copy_from_slice(g.row(s));
                            }
                        }
                        ReduceMode::Mean => {
                            let counts = segment_counts(ids, g.rows());
                            for (e, &s) in ids.iter().enumerate() {
                                let inv = 1.0 / counts[s] as f64;
                                for (o, &v) in ga.row_mut(e).iter_mut().zip(g.row(s)) {
                                    *o = v * inv;
                                }
                            }
                        }
                        ReduceMode::Max => {
                            for (slot, &e) in argmax.iter().enumerate() {
                                if e != usize::MAX {
                                    ga.data_mut()[e * d + slot % d] += g.data()[slot];
                                }
                            }
                        }
                    }
                    accumulate(&mut grads, *input, ga);
                }
                Op::SegmentSoftmax { input, ids, n } => {
                    let y = node.value.data();
                    let gy = g.data();
                    let mut dot = vec![0.0; *n];
                    for (e, &s) in ids.iter().enumerate() {
                        dot[s] += y[e] * gy[e];
                    }
                    let gz: Vec<f64> = ids
                        .iter()
                        .enumerate()
                        .map(|(e, &s)| y[e] * (gy[e] - dot[s]))
                        .collect();
                    let gz = Tensor::new(self.value(*input).shape().to_vec(), gz)?;
                    accumulate(&mut grads, *input, gz);
                }
                Op::RowSum(a) => {
                    let av = self.value(*a);
                    let (r, c) = av.dims2();
                    let mut ga = Vec::with_capacity(r * c);
                    for i in 0..r {
                        ga.extend(std::iter::repeat_n(g.data()[i], c));
                    }
                    accumulate(&mut grads, *a, Tensor::new(av.shape().to_vec(), ga)?);
                }
                Op::MulCol(a, c) => {
                    let av = self.value(*a);
                    let cv = self.value(*c);
                    let r = av.rows();
                    let mut ga = g.clone();
                    let mut gc = vec![0.0; r];
                    for i in 0..r {
                        let s = cv.data()[i];
                        let mut acc = 0.0;
                        for (o, &x) in ga.row_mut(i).iter_mut().zip(av.row(i)) {
                            acc += *o * x;
                            *o *= s;
                        }
                        gc[i] = acc;
                    }
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *c, Tensor::new(cv.shape().to_vec(), gc)?);
                }
                Op::SumRows(a) => {
                    let av = self.value(*a);
                    let r = av.rows();
                    let mut ga = Tensor::zeros(av.shape());
                    for i in 0..r {
                        ga.row_mut(i).copy_from_slice(g.data());
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::SumAll(a) => {
                    let gv = g.item();
                    accumulate(&mut grads, *a, Tensor::full(self.value(*a).shape(), gv));
                }
                Op::MeanAll(a) => {
                    let av = self.value(*a);
                    let gv = g.item() / av.numel() as f64;
                    accumulate(&mut grads, *a, Tensor::full(av.shape(), gv));
                }
            }
        }

        let mut params = BTreeMap::new();
        for (name, &v) in &self.params {
            if v.0 <= loss.0 {
                if let Some(g) = &grads[v.0] {
                    params.insert(name.clone(), g.clone());
                }
            }
        }
        Ok(Gradients {
            nodes: grads,
            params,
        })
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn reshape_like(t: Tensor, like: &Tensor) -> Tensor {
    if t.shape() == like.shape() {
        t
    } else {
        Tensor::new(like.shape().to_vec(), t.into_data()).expect("same element count")
    }
}

fn accumulate(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}
