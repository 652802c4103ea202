use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::PropagationMatrix;
use crate::nn::{ConvKind, SkipKind, UdgnnModel};
use crate::tensor::Tensor;

/// Masks are enumerated exhaustively up to this depth, beyond it the
/// elementary symmetric polynomial recurrence is used.
pub const EXHAUSTIVE_MAX_DEPTH: usize = 20;
/// Largest depth accepted by the path enumeration oracles.
pub const ENUMERATION_MAX_DEPTH: usize = 12;

/// Bit `l-1` set means layer `l` takes the convolution branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PathDescriptor {
    pub mask: u64,
    pub depth: usize,
}

impl PathDescriptor {
    pub fn length(self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn takes_conv(self, layer: usize) -> bool {
        self.mask >> (layer - 1) & 1 == 1
    }

    /// Paths admitted by a skip kind at depth `depth`, ascending by mask.
    pub fn admissible(skip: SkipKind, depth: usize) -> Result<Vec<Self>> {
        if depth > 63 {
            return Err(Error::Unsupported(format!("path masks need depth ≤ 63, got {depth}")));
        }
        let full = if depth == 0 { 0 } else { u64::MAX >> (64 - depth) };
        let masks: Vec<u64> = match skip {
            SkipKind::NoSkip => vec![full],
            SkipKind::Residual | SkipKind::Drive => (0..=full).collect(),
            // conv layers form a suffix {L-k+1, ..., L}
            SkipKind::Initial => {
                let mut m: Vec<u64> = (0..=depth).map(|k| full & !(full >> k)).collect();
                m.sort_unstable();
                m
            }
            SkipKind::JK => {
                return Err(Error::Unsupported("JK readout has no single-output path set".into()));
            }
        };
        Ok(masks.into_iter().map(|mask| Self { mask, depth }).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathWeights {
    /// Total weight of paths of each length `0..=L`.
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
}

/// Path-length distribution of a skip-connection scheme. `alphas` are the
/// per-layer gates, required for Drive and ignored otherwise.
pub fn path_weight_distribution(skip: SkipKind, depth: usize, alphas: Option<&[f64]>) -> Result<PathWeights> {
    let raw = match skip {
        SkipKind::NoSkip => {
            let mut w = vec![0.0; depth + 1];
            w[depth] = 1.0;
            w
        }
        SkipKind::Residual => gated_weights(&vec![1.0; depth]),
        SkipKind::Initial => vec![1.0; depth + 1],
        SkipKind::JK => (0..=depth).map(|l| if l == 0 { 0.0 } else { 1.0 }).collect(),
        SkipKind::Drive => {
            let alphas = alphas.ok_or_else(|| Error::config("path distribution", "alphas", "required for Drive"))?;
            if alphas.len() != depth {
                return Err(Error::config(
                    "path distribution",
                    "alphas",
                    format!("has {} entries for depth {depth}", alphas.len()),
                ));
            }
            gated_weights(alphas)
        }
    };
    let total: f64 = raw.iter().sum();
    let normalized = raw.iter().map(|&w| if total != 0.0 { w / total } else { 0.0 }).collect();
    Ok(PathWeights { raw, normalized })
}

/// `w_l = Σ_{|S| = l} Π_{i∈S} g_i`.
fn gated_weights(gates: &[f64]) -> Vec<f64> {
    let depth = gates.len();
    if depth <= EXHAUSTIVE_MAX_DEPTH {
        let mut w = vec![0.0; depth + 1];
        for mask in 0u64..(1 << depth) {
            let prod: f64 = (0..depth).filter(|i| mask >> i & 1 == 1).map(|i| gates[i]).product();
            w[mask.count_ones() as usize] += prod;
        }
        w
    } else {
        elementary_symmetric(gates)
    }
}

pub(crate) fn elementary_symmetric(x: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; x.len() + 1];
    e[0] = 1.0;
    for (i, &xi) in x.iter().enumerate() {
        for k in (1..=i + 1).rev() {
            e[k] += xi * e[k - 1];
        }
    }
    e
}

/// Dense, linear view of a model for the path oracles: per-layer weights
/// (`None` = identity, as in SGC) and per-layer gate factors.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearStack {
    pub skip: SkipKind,
    pub weights: Vec<Option<Tensor>>,
    pub gates: Vec<f64>,
}

impl LinearStack {
    pub fn from_model(model: &UdgnnModel) -> Result<Self> {
        let spec = model.spec();
        if !spec.linear_mode {
            return Err(Error::Unsupported("path decomposition needs a linear_mode model".into()));
        }
        if !matches!(spec.conv_kind, ConvKind::GCN | ConvKind::SGC) {
            return Err(Error::Unsupported(format!("path decomposition covers gcn and sgc, not {}", spec.conv_kind.name())));
        }
        if spec.with_ffn || spec.skip_kind == SkipKind::JK {
            return Err(Error::Unsupported("path decomposition covers single-branch blocks only".into()));
        }
        if spec.depth > ENUMERATION_MAX_DEPTH {
            return Err(Error::Unsupported(format!(
                "path enumeration is limited to depth {ENUMERATION_MAX_DEPTH}"
            )));
        }
        let store = model.store();
        let weights = model.layers().iter().map(|lp| lp.w.map(|id| store.get(id).value.clone())).collect();
        let gates = model
            .layers()
            .iter()
            .map(|lp| lp.alpha.map_or(1.0, |id| store.get(id).value.data()[0]))
            .collect();
        Ok(Self {
            skip: spec.skip_kind,
            weights,
            gates,
        })
    }

    pub fn depth(&self) -> usize {
        self.weights.len()
    }

    /// `g · P X W` for layer `l` (1-based), with a dense `P`.
    fn conv(&self, p: &Tensor, x: &Tensor, l: usize) -> Result<Tensor> {
        let px = p.matmul(x)?;
        let out = match &self.weights[l - 1] {
            Some(w) => px.matmul(w)?,
            None => px,
        };
        Ok(out.scale(self.gates[l - 1]))
    }
}

/// `H^L = Σ_path P_path H^0 W_path`, summed path by path with a dense `P`.
pub fn enumerate_paths_forward(p: &PropagationMatrix, h0: &Tensor, stack: &LinearStack) -> Result<Tensor> {
    let dense = p.to_dense();
    let depth = stack.depth();
    if depth > ENUMERATION_MAX_DEPTH {
        return Err(Error::Unsupported(format!("path enumeration is limited to depth {ENUMERATION_MAX_DEPTH}")));
    }
    let mut total: Option<Tensor> = None;
    for path in PathDescriptor::admissible(stack.skip, depth)? {
        let mut term = h0.clone();
        for l in 1..=depth {
            if path.takes_conv(l) {
                term = stack.conv(&dense, &term, l)?;
            }
        }
        match total.as_mut() {
            Some(t) => t.add_assign(&term)?,
            None => total = Some(term),
        }
    }
    total.ok_or_else(|| Error::Unsupported("no admissible path".into()))
}

/// `∂L/∂W^l` from the backward path decomposition, given the cached block
/// inputs `hidden[k] = H^k` and the upstream gradient `G = ∂L/∂H^L`.
///
/// NoSkip and Initial: `(H^{l-1})ᵀ (Pᵀ)^{L-l+1} G (W^{l+1} ⋯ W^L)ᵀ`.
/// Residual and Drive: `g_l (P H^{l-1})ᵀ Σ_S (Pᵀ)^{|S|} G (Π_{j∈S} g_j W^j)ᵀ`
/// over subsets `S ⊆ {l+1, …, L}`. For SGC the result is the gradient with
/// respect to an identity weight inserted at layer `l`.
pub fn analytic_grad(p: &PropagationMatrix, hidden: &[Tensor], upstream: &Tensor, stack: &LinearStack, layer: usize) -> Result<Tensor> {
    let depth = stack.depth();
    if layer == 0 || layer > depth {
        return Err(Error::config("analytic grad", "layer", format!("must lie in 1..={depth}, got {layer}")));
    }
    if hidden.len() < depth {
        return Err(Error::shape("analytic_grad", format!("{} cached states for depth {depth}", hidden.len())));
    }
    let dense = p.to_dense();
    let pt = dense.transpose();
    let back = |x: &Tensor, j: usize| -> Result<Tensor> {
        let px = pt.matmul(x)?;
        let out = match &stack.weights[j - 1] {
            Some(w) => px.matmul_t(w)?,
            None => px,
        };
        Ok(out)
    };
    let dh = match stack.skip {
        SkipKind::NoSkip | SkipKind::Initial => {
            let mut x = upstream.clone();
            for j in (layer + 1..=depth).rev() {
                x = back(&x, j)?;
            }
            x
        }
        SkipKind::Residual | SkipKind::Drive => {
            let downstream = depth - layer;
            let mut acc = Tensor::zeros(upstream.rows(), upstream.cols());
            for mask in 0u64..(1 << downstream) {
                let mut x = upstream.clone();
                let mut gate = 1.0;
                for j in (layer + 1..=depth).rev() {
                    if mask >> (j - layer - 1) & 1 == 1 {
                        x = back(&x, j)?;
                        gate *= stack.gates[j - 1];
                    }
                }
                acc.add_assign(&x.scale(gate))?;
            }
            acc
        }
        SkipKind::JK => return Err(Error::Unsupported("JK readout has no single-output path set".into())),
    };
    let ph = dense.matmul(&hidden[layer - 1])?;
    Ok(ph.t_matmul(&dh)?.scale(stack.gates[layer - 1]))
}

/// `∂L/∂H^L` for mean cross-entropy over `rows`, in closed form:
/// `((softmax(Z) − Y) / |rows|) W_decᵀ` restricted to the masked rows.
pub fn cross_entropy_upstream(logits: &Tensor, labels: &[usize], rows: &[usize], w_dec: &Tensor) -> Result<Tensor> {
    if rows.is_empty() {
        return Err(Error::Dataset("upstream gradient over an empty mask".into()));
    }
    let mut dz = Tensor::zeros(logits.rows(), logits.cols());
    let scale = 1.0 / rows.len() as f64;
    for &i in rows {
        let z = logits.row(i);
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exp: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
        let total: f64 = exp.iter().sum();
        let out = dz.row_mut(i);
        for (k, e) in exp.iter().enumerate() {
            out[k] = scale * (e / total - f64::from(u8::from(k == labels[i])));
        }
    }
    dz.matmul_t(w_dec)
}
