use std::sync::Arc;

use super::{ConvKind, ModelSpec, SkipKind};
use crate::autodiff::{NodeId, ParamId, ParamStore, Parameter, Tape};
use crate::error::{Error, Result};
use crate::graph::{PropagationKind, PropagationMatrix, SparseGraph};
use crate::rng::SeedRng;
use crate::tensor::Tensor;

/// Propagation operators a model needs for one graph: `P` of the configured
/// kind, plus the row-normalized operator for the mean aggregator.
#[derive(Debug, Clone)]
pub struct GraphOperators {
    pub p: Arc<PropagationMatrix>,
    pub p_rw: Arc<PropagationMatrix>,
}

impl GraphOperators {
    pub fn new(graph: &SparseGraph, kind: PropagationKind) -> Self {
        let p = Arc::new(PropagationMatrix::build(graph, kind));
        let p_rw = if kind == PropagationKind::RowNorm {
            Arc::clone(&p)
        } else {
            Arc::new(PropagationMatrix::build(graph, PropagationKind::RowNorm))
        };
        Self { p, p_rw }
    }

    pub fn n_nodes(&self) -> usize {
        self.p.n()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    /// `W^l`, or `W_nb` for the mean aggregator. Absent for SGC.
    pub w: Option<ParamId>,
    pub w_self: Option<ParamId>,
    pub ffn: Option<[ParamId; 4]>,
    pub alpha: Option<ParamId>,
    pub beta: Option<ParamId>,
}

/// Encoder → `depth` blocks → decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct UdgnnModel {
    spec: ModelSpec,
    in_dim: usize,
    n_classes: usize,
    store: ParamStore,
    enc: (ParamId, ParamId),
    dec: (ParamId, ParamId),
    layers: Vec<LayerParams>,
}

/// Result of one forward pass: the tape, the logits node and the hidden
/// states `H^0 ..= H^L`.
#[derive(Debug)]
pub struct Forward {
    pub tape: Tape,
    pub logits: NodeId,
    pub hidden: Vec<NodeId>,
}

impl Forward {
    pub fn hidden_values(&self) -> Vec<Tensor> {
        self.hidden.iter().map(|&h| self.tape.value(h).clone()).collect()
    }

    pub fn logits_value(&self) -> &Tensor {
        self.tape.value(self.logits)
    }

    /// Records the masked cross-entropy and returns its node.
    pub fn loss(&mut self, labels: &[usize], rows: &[usize]) -> Result<NodeId> {
        self.tape.softmax_cross_entropy(self.logits, labels, rows)
    }
}

fn glorot(rows: usize, cols: usize, rng: &mut SeedRng) -> Tensor {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    Tensor::from_fn(rows, cols, |_, _| rng.uniform_range(-a, a))
}

impl UdgnnModel {
    /// Every parameter draws from its own named sub-stream of `seed`, so
    /// models of different depth built from one seed share encoder and
    /// decoder weights (JK excepted: its decoder is wider).
    pub fn new(spec: &ModelSpec, in_dim: usize, n_classes: usize, seed: u64) -> Result<Self> {
        spec.validate()?;
        let root = SeedRng::new(seed);
        let h = spec.hidden_dim;
        let mut store = ParamStore::new();
        let weight = |store: &mut ParamStore, name: String, rows, cols| {
            let mut rng = root.split(&name);
            store.add(Parameter::new(name, glorot(rows, cols, &mut rng), false))
        };
        let bias = |store: &mut ParamStore, name: String, cols| store.add(Parameter::new(name, Tensor::zeros(1, cols), true));
        let gate = |store: &mut ParamStore, name: String, v: f64| store.add(Parameter::new(name, Tensor::scalar(v), true));

        let enc = (weight(&mut store, "enc.w".into(), in_dim, h), bias(&mut store, "enc.b".into(), h));
        let dec_in = if spec.skip_kind == SkipKind::JK { h * spec.depth } else { h };
        let dec = (weight(&mut store, "dec.w".into(), dec_in, n_classes), bias(&mut store, "dec.b".into(), n_classes));

        let mut layers = Vec::with_capacity(spec.depth);
        for l in 1..=spec.depth {
            let w = spec.conv_kind.has_weight().then(|| {
                let name = if spec.conv_kind == ConvKind::SageMean { "w_nb" } else { "w" };
                weight(&mut store, format!("layer{l}.{name}"), h, h)
            });
            let w_self = (spec.conv_kind == ConvKind::SageMean).then(|| weight(&mut store, format!("layer{l}.w_self"), h, h));
            let ffn = spec.with_ffn.then(|| {
                [
                    weight(&mut store, format!("layer{l}.ffn.w1"), h, h),
                    bias(&mut store, format!("layer{l}.ffn.b1"), h),
                    weight(&mut store, format!("layer{l}.ffn.w2"), h, h),
                    bias(&mut store, format!("layer{l}.ffn.b2"), h),
                ]
            });
            let drive = spec.skip_kind == SkipKind::Drive;
            let alpha = drive.then(|| gate(&mut store, format!("layer{l}.alpha"), spec.alpha_init));
            let beta = spec.with_ffn.then(|| gate(&mut store, format!("layer{l}.beta"), spec.beta_init));
            layers.push(LayerParams { w, w_self, ffn, alpha, beta });
        }
        Ok(Self {
            spec: spec.clone(),
            in_dim,
            n_classes,
            store,
            enc,
            dec,
            layers,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn set_dropout_rate(&mut self, rate: f64) -> Result<()> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::config("model spec", "dropout_rate", "must lie in [0, 1)"));
        }
        self.spec.dropout_rate = rate;
        Ok(())
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn encoder(&self) -> (ParamId, ParamId) {
        self.enc
    }

    pub fn decoder(&self) -> (ParamId, ParamId) {
        self.dec
    }

    /// Parameters of block `l`, 1-based.
    pub fn layer(&self, l: usize) -> &LayerParams {
        &self.layers[l - 1]
    }

    pub fn layers(&self) -> &[LayerParams] {
        &self.layers
    }

    fn sigma(&self, tape: &mut Tape, x: NodeId) -> NodeId {
        if self.spec.linear_mode {
            x
        } else {
            tape.relu(x)
        }
    }

    fn conv(&self, tape: &mut Tape, l: usize, x: NodeId, ops: &GraphOperators) -> Result<NodeId> {
        let lp = &self.layers[l - 1];
        match self.spec.conv_kind {
            ConvKind::GCN => {
                let px = tape.spmm_const(&ops.p, x)?;
                let w = tape.param(&self.store, lp.w.expect("gcn weight"));
                let pxw = tape.matmul(px, w)?;
                Ok(self.sigma(tape, pxw))
            }
            ConvKind::SGC => tape.spmm_const(&ops.p, x),
            ConvKind::SageMean => {
                let px = tape.spmm_const(&ops.p_rw, x)?;
                let w_nb = tape.param(&self.store, lp.w.expect("sage weight"));
                let w_self = tape.param(&self.store, lp.w_self.expect("sage self weight"));
                let a = tape.matmul(px, w_nb)?;
                let b = tape.matmul(x, w_self)?;
                let s = tape.add(a, b)?;
                Ok(self.sigma(tape, s))
            }
            ConvKind::Dense => {
                let w = tape.param(&self.store, lp.w.expect("dense weight"));
                let xw = tape.matmul(x, w)?;
                Ok(self.sigma(tape, xw))
            }
        }
    }

    fn ffn(&self, tape: &mut Tape, params: &[ParamId; 4], m: NodeId) -> Result<NodeId> {
        let [w1, b1, w2, b2] = params.map(|id| tape.param(&self.store, id));
        let z = tape.matmul(m, w1)?;
        let z = tape.add_row(z, b1)?;
        let z = self.sigma(tape, z);
        let z = tape.matmul(z, w2)?;
        tape.add_row(z, b2)
    }

    /// One block `H^{l-1} → H^l` (`l` is 1-based). `h0` is required by the
    /// initial-connection variant.
    #[allow(clippy::too_many_arguments)]
    pub fn block_forward(
        &self,
        tape: &mut Tape,
        l: usize,
        h: NodeId,
        h0: Option<NodeId>,
        ops: &GraphOperators,
        training: bool,
        rng: &mut SeedRng,
    ) -> Result<NodeId> {
        let rate = self.spec.dropout_rate;
        let x = tape.dropout(h, rate, training, rng)?;
        let conv = self.conv(tape, l, x, ops)?;
        let lp = &self.layers[l - 1];
        match self.spec.skip_kind {
            SkipKind::NoSkip | SkipKind::JK => Ok(conv),
            SkipKind::Residual => tape.add(h, conv),
            SkipKind::Initial => {
                let h0 = h0.ok_or_else(|| Error::Unsupported("initial connection needs H^0".into()))?;
                tape.add(h0, conv)
            }
            SkipKind::Drive => {
                let alpha = tape.param(&self.store, lp.alpha.expect("drive gate"));
                let gated = tape.scale_by_param(alpha, conv)?;
                let m = tape.add(h, gated)?;
                match &lp.ffn {
                    None => Ok(m),
                    Some(params) => {
                        let x = tape.dropout(m, rate, training, rng)?;
                        let f = self.ffn(tape, params, x)?;
                        let beta = tape.param(&self.store, lp.beta.expect("ffn gate"));
                        let gated = tape.scale_by_param(beta, f)?;
                        tape.add(m, gated)
                    }
                }
            }
        }
    }

    /// Full forward pass. `rng` feeds dropout and is untouched when
    /// `training` is false or the dropout rate is zero.
    pub fn forward(&self, ops: &GraphOperators, features: &Tensor, training: bool, rng: &mut SeedRng) -> Result<Forward> {
        if features.cols() != self.in_dim {
            return Err(Error::shape(
                "model_forward",
                format!("features have {} columns, encoder expects {}", features.cols(), self.in_dim),
            ));
        }
        if features.rows() != ops.n_nodes() {
            return Err(Error::shape(
                "model_forward",
                format!("{} feature rows for a {}-node operator", features.rows(), ops.n_nodes()),
            ));
        }
        let mut tape = Tape::new();
        let x = tape.input(features.clone());
        let ew = tape.param(&self.store, self.enc.0);
        let eb = tape.param(&self.store, self.enc.1);
        let h0 = tape.matmul(x, ew)?;
        let h0 = tape.add_row(h0, eb)?;

        let mut hidden = Vec::with_capacity(self.depth() + 1);
        hidden.push(h0);
        let mut h = h0;
        for l in 1..=self.depth() {
            h = self.block_forward(&mut tape, l, h, Some(h0), ops, training, rng)?;
            hidden.push(h);
        }
        let readout = if self.spec.skip_kind == SkipKind::JK {
            jk_readout(&mut tape, &hidden[1..])?
        } else {
            h
        };
        let dw = tape.param(&self.store, self.dec.0);
        let db = tape.param(&self.store, self.dec.1);
        let logits = tape.matmul(readout, dw)?;
        let logits = tape.add_row(logits, db)?;
        Ok(Forward { tape, logits, hidden })
    }

    /// Evaluation-mode logits.
    pub fn predict(&self, ops: &GraphOperators, features: &Tensor) -> Result<Tensor> {
        let mut unused = SeedRng::new(0);
        let fwd = self.forward(ops, features, false, &mut unused)?;
        Ok(fwd.logits_value().clone())
    }

    /// `(|α_l|, |β_l|)` per layer; zeros where the gate does not exist.
    pub fn gate_magnitudes(&self) -> (Vec<f64>, Vec<f64>) {
        let read = |id: Option<ParamId>| id.map_or(0.0, |id| self.store.get(id).value.data()[0].abs());
        self.layers.iter().map(|lp| (read(lp.alpha), read(lp.beta))).unzip()
    }

    pub fn set_gates(&mut self, alpha: f64, beta: f64) {
        for lp in self.layers.clone() {
            if let Some(a) = lp.alpha {
                self.store.get_mut(a).value = Tensor::scalar(alpha);
            }
            if let Some(b) = lp.beta {
                self.store.get_mut(b).value = Tensor::scalar(beta);
            }
        }
    }

    /// Copies encoder and decoder values from `other` (shapes must agree).
    pub fn copy_encoder_decoder(&mut self, other: &UdgnnModel) -> Result<()> {
        for (mine, theirs) in [
            (self.enc.0, other.enc.0),
            (self.enc.1, other.enc.1),
            (self.dec.0, other.dec.0),
            (self.dec.1, other.dec.1),
        ] {
            let src = other.store.get(theirs).value.clone();
            let dst = &mut self.store.get_mut(mine).value;
            if dst.shape() != src.shape() {
                return Err(Error::shape("copy_encoder_decoder", format!("{:?} vs {:?}", dst.shape(), src.shape())));
            }
            *dst = src;
        }
        Ok(())
    }
}

/// `[H^1 | … | H^L]`.
pub fn jk_readout(tape: &mut Tape, layers: &[NodeId]) -> Result<NodeId> {
    if layers.is_empty() {
        return Err(Error::Unsupported("JK readout needs at least one layer".into()));
    }
    tape.concat_cols(layers)
}
