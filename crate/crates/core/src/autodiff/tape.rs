use std::sync::Arc;

use super::{ParamId, ParamStore};
use crate::error::{Error, Result};
use crate::graph::PropagationMatrix;
use crate::rng::SeedRng;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op {
    Input,
    Param(ParamId),
    MatMul(NodeId, NodeId),
    Spmm(Arc<PropagationMatrix>, NodeId),
    Add(NodeId, NodeId),
    /// Adds a 1×c row to every row.
    AddRow(NodeId, NodeId),
    ScaleByParam { gate: NodeId, input: NodeId },
    Relu(NodeId),
    /// Per-entry multipliers: 0 for dropped, 1/(1-rate) for kept.
    Dropout { input: NodeId, scale: Vec<f64> },
    ConcatCols(Vec<NodeId>),
    /// Mean cross-entropy over `rows`; `probs` caches the softmax.
    SoftmaxCrossEntropy {
        logits: NodeId,
        rows: Vec<usize>,
        labels: Vec<usize>,
        probs: Tensor,
    },
    Sum(NodeId),
    Mul(NodeId, NodeId),
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Tensor,
}

/// Recorded computation. Nodes only reference earlier nodes, so the record is
/// topologically ordered by construction.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    adjoints: Option<Vec<Option<Tensor>>>,
    relu_margin: f64,
}

impl Tape {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            adjoints: None,
            relu_margin: f64::INFINITY,
        }
    }

    fn push(&mut self, op: Op, value: Tensor) -> NodeId {
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// Smallest `|x|` seen by any ReLU on this tape (`inf` if none).
    pub fn min_relu_margin(&self) -> f64 {
        self.relu_margin
    }

    /// Constant input; receives an adjoint but no parameter gradient.
    pub fn input(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Input, value)
    }

    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> NodeId {
        self.push(Op::Param(id), store.get(id).value.clone())
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).matmul(self.value(b))?;
        Ok(self.push(Op::MatMul(a, b), v))
    }

    pub fn spmm_const(&mut self, p: &Arc<PropagationMatrix>, h: NodeId) -> Result<NodeId> {
        let v = p.spmm(self.value(h))?;
        Ok(self.push(Op::Spmm(Arc::clone(p), h), v))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).add(self.value(b))?;
        Ok(self.push(Op::Add(a, b), v))
    }

    pub fn add_row(&mut self, a: NodeId, bias: NodeId) -> Result<NodeId> {
        let (x, b) = (self.value(a), self.value(bias));
        if b.rows() != 1 || b.cols() != x.cols() {
            return Err(Error::shape(
                "add_row",
                format!("bias {:?} for input {:?}", b.shape(), x.shape()),
            ));
        }
        let mut v = x.clone();
        for i in 0..v.rows() {
            for (o, &bb) in v.row_mut(i).iter_mut().zip(b.data()) {
                *o += bb;
            }
        }
        Ok(self.push(Op::AddRow(a, bias), v))
    }

    pub fn scale_by_param(&mut self, gate: NodeId, input: NodeId) -> Result<NodeId> {
        let g = self.value(gate);
        if g.shape() != (1, 1) {
            return Err(Error::shape("scale_by_param", format!("gate is {:?}, expected 1x1", g.shape())));
        }
        let v = self.value(input).scale(g.data()[0]);
        Ok(self.push(Op::ScaleByParam { gate, input }, v))
    }

    pub fn relu(&mut self, input: NodeId) -> NodeId {
        let x = self.value(input);
        let margin = x.data().iter().fold(self.relu_margin, |m, v| m.min(v.abs()));
        let v = x.map(|v| if v > 0.0 { v } else { 0.0 });
        self.relu_margin = margin;
        self.push(Op::Relu(input), v)
    }

    /// Inverted dropout. Rate 0 or `training == false` returns `input` itself.
    pub fn dropout(&mut self, input: NodeId, rate: f64, training: bool, rng: &mut SeedRng) -> Result<NodeId> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::config("dropout", "rate", format!("must lie in [0, 1), got {rate}")));
        }
        if rate == 0.0 || !training {
            return Ok(input);
        }
        let keep = 1.0 / (1.0 - rate);
        let x = self.value(input);
        let scale: Vec<f64> = (0..x.len())
            .map(|_| if rng.uniform() < rate { 0.0 } else { keep })
            .collect();
        let data = x.data().iter().zip(&scale).map(|(v, s)| v * s).collect();
        let v = Tensor::from_vec(x.rows(), x.cols(), data)?;
        Ok(self.push(Op::Dropout { input, scale }, v))
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let vals: Vec<&Tensor> = parts.iter().map(|&p| self.value(p)).collect();
        let v = Tensor::concat_cols(&vals)?;
        Ok(self.push(Op::ConcatCols(parts.to_vec()), v))
    }

    /// Mean over `rows` of `-log softmax(logits[row])[labels[row]]`, with
    /// max-subtraction. Returns a 1×1 node.
    pub fn softmax_cross_entropy(&mut self, logits: NodeId, labels: &[usize], rows: &[usize]) -> Result<NodeId> {
        let z = self.value(logits);
        if rows.is_empty() {
            return Err(Error::Dataset("cross-entropy mask selects no nodes".into()));
        }
        if labels.len() != z.rows() {
            return Err(Error::shape(
                "softmax_cross_entropy",
                format!("{} labels for {} logit rows", labels.len(), z.rows()),
            ));
        }
        let c = z.cols();
        let mut probs = Tensor::zeros(rows.len(), c);
        let mut total = 0.0;
        let mut picked = Vec::with_capacity(rows.len());
        for (k, &i) in rows.iter().enumerate() {
            let label = labels[i];
            if label >= c {
                return Err(Error::Dataset(format!("label {label} of node {i} outside [0, {c})")));
            }
            let row = z.row(i);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let denom: f64 = row.iter().map(|v| (v - max).exp()).sum();
            let log_denom = denom.ln();
            total -= row[label] - max - log_denom;
            for (p, v) in probs.row_mut(k).iter_mut().zip(row) {
                *p = (v - max - log_denom).exp();
            }
            picked.push(label);
        }
        let loss = total / rows.len() as f64;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("cross-entropy loss is {loss}")));
        }
        Ok(self.push(
            Op::SoftmaxCrossEntropy {
                logits,
                rows: rows.to_vec(),
                labels: picked,
                probs,
            },
            Tensor::scalar(loss),
        ))
    }

    pub fn sum(&mut self, input: NodeId) -> NodeId {
        let v = Tensor::scalar(self.value(input).sum());
        self.push(Op::Sum(input), v)
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(Error::shape("mul", format!("{:?} vs {:?}", x.shape(), y.shape())));
        }
        let data = x.data().iter().zip(y.data()).map(|(p, q)| p * q).collect();
        let v = Tensor::from_vec(x.rows(), x.cols(), data)?;
        Ok(self.push(Op::Mul(a, b), v))
    }

    /// Adjoint of `id` after [`Tape::backward`]; `None` before, or when the
    /// node does not influence the loss.
    pub fn grad(&self, id: NodeId) -> Option<&Tensor> {
        self.adjoints.as_ref()?.get(id.0)?.as_ref()
    }

    /// Reverse sweep from a scalar `loss`. Zeroes every parameter gradient in
    /// `store` and accumulates fresh ones. May be called once per tape.
    pub fn backward(&mut self, loss: NodeId, store: &mut ParamStore) -> Result<()> {
        if self.adjoints.is_some() {
            return Err(Error::Tape("backward already ran on this tape".into()));
        }
        let lv = self.value(loss);
        if lv.shape() != (1, 1) {
            return Err(Error::Tape(format!("loss must be 1x1, got {:?}", lv.shape())));
        }
        if !lv.data()[0].is_finite() {
            return Err(Error::NonFinite(format!("loss is {}", lv.data()[0])));
        }
        store.zero_grads();

        let mut adj: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        adj[loss.0] = Some(Tensor::scalar(1.0));

        fn accumulate(adj: &mut [Option<Tensor>], id: NodeId, g: Tensor) -> Result<()> {
            match &mut adj[id.0] {
                Some(existing) => existing.add_assign(&g),
                slot @ None => {
                    *slot = Some(g);
                    Ok(())
                }
            }
        }

        for idx in (0..=loss.0).rev() {
            let Some(up) = adj[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Input => {}
                Op::Param(pid) => store.get_mut(*pid).grad.add_assign(&up)?,
                Op::MatMul(a, b) => {
                    let ga = up.matmul_t(self.value(*b))?;
                    let gb = self.value(*a).t_matmul(&up)?;
                    accumulate(&mut adj, *a, ga)?;
                    accumulate(&mut adj, *b, gb)?;
                }
                Op::Spmm(p, h) => accumulate(&mut adj, *h, p.spmm_t(&up)?)?,
                Op::Add(a, b) => {
                    accumulate(&mut adj, *a, up.clone())?;
                    accumulate(&mut adj, *b, up.clone())?;
                }
                Op::AddRow(a, bias) => {
                    let mut gb = Tensor::zeros(1, up.cols());
                    for i in 0..up.rows() {
                        for (o, &g) in gb.data_mut().iter_mut().zip(up.row(i)) {
                            *o += g;
                        }
                    }
                    accumulate(&mut adj, *a, up.clone())?;
                    accumulate(&mut adj, *bias, gb)?;
                }
                Op::ScaleByParam { gate, input } => {
                    let g = self.value(*gate).data()[0];
                    let dgate = up.dot(self.value(*input))?;
                    accumulate(&mut adj, *input, up.scale(g))?;
                    accumulate(&mut adj, *gate, Tensor::scalar(dgate))?;
                }
                Op::Relu(input) => {
                    let x = self.value(*input);
                    let data = up
                        .data()
                        .iter()
                        .zip(x.data())
                        .map(|(&g, &v)| if v > 0.0 { g } else { 0.0 })
                        .collect();
                    accumulate(&mut adj, *input, Tensor::from_vec(up.rows(), up.cols(), data)?)?;
                }
                Op::Dropout { input, scale } => {
                    let data = up.data().iter().zip(scale).map(|(g, s)| g * s).collect();
                    accumulate(&mut adj, *input, Tensor::from_vec(up.rows(), up.cols(), data)?)?;
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let w = self.value(p).cols();
                        let g = Tensor::from_fn(up.rows(), w, |i, j| up.get(i, offset + j));
                        accumulate(&mut adj, p, g)?;
                        offset += w;
                    }
                }
                Op::SoftmaxCrossEntropy {
                    logits,
                    rows,
                    labels,
                    probs,
                } => {
                    let z = self.value(*logits);
                    let scale = up.data()[0] / rows.len() as f64;
                    let mut g = Tensor::zeros(z.rows(), z.cols());
                    for (k, (&i, &label)) in rows.iter().zip(labels).enumerate() {
                        let out = g.row_mut(i);
                        for (o, &p) in out.iter_mut().zip(probs.row(k)) {
                            *o += scale * p;
                        }
                        out[label] -= scale;
                    }
                    accumulate(&mut adj, *logits, g)?;
                }
                Op::Sum(input) => {
                    let x = self.value(*input);
                    accumulate(&mut adj, *input, Tensor::filled(x.rows(), x.cols(), up.data()[0]))?;
                }
                Op::Mul(a, b) => {
                    let (x, y) = (self.value(*a), self.value(*b));
                    let ga = up.data().iter().zip(y.data()).map(|(g, v)| g * v).collect();
                    let gb = up.data().iter().zip(x.data()).map(|(g, v)| g * v).collect();
                    accumulate(&mut adj, *a, Tensor::from_vec(up.rows(), up.cols(), ga)?)?;
                    accumulate(&mut adj, *b, Tensor::from_vec(up.rows(), up.cols(), gb)?)?;
                }
            }
            adj[idx] = Some(up);
        }
        self.adjoints = Some(adj);
        Ok(())
    }
}
