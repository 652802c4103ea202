//! Randomized equivalence suites between the path-decomposition oracles and
//! the model's own forward and backward passes.

use serde::{Deserialize, Serialize};

use super::{analytic_grad, cross_entropy_upstream, enumerate_paths_forward, LinearStack};
use crate::error::{Error, Result};
use crate::graph::{PropagationKind, SparseGraph};
use crate::nn::{ConvKind, GraphOperators, ModelSpec, SkipKind, UdgnnModel};
use crate::rng::{derive_seed, SeedRng};
use crate::tensor::Tensor;

pub const THEOREM1_TOLERANCE: f64 = 1e-10;
pub const THEOREM2_TOLERANCE: f64 = 1e-8;
pub const VERIFY_SKIPS: [SkipKind; 4] = [SkipKind::NoSkip, SkipKind::Residual, SkipKind::Initial, SkipKind::Drive];
pub const VERIFY_CONVS: [ConvKind; 2] = [ConvKind::SGC, ConvKind::GCN];
pub const VERIFY_MAX_DEPTH: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Theorem {
    /// Forward path decomposition.
    Forward,
    /// Backward gradient path decomposition.
    Backward,
}

impl Theorem {
    pub fn from_number(n: u32) -> Option<Self> {
        match n {
            1 => Some(Theorem::Forward),
            2 => Some(Theorem::Backward),
            _ => None,
        }
    }

    pub fn tolerance(self) -> f64 {
        match self {
            Theorem::Forward => THEOREM1_TOLERANCE,
            Theorem::Backward => THEOREM2_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct VerifyOptions {
    /// Perturb the oracle output so the suite must fail. Negative control.
    pub inject_fault: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub theorem: Theorem,
    pub trials: usize,
    pub comparisons: usize,
    /// Max elementwise absolute deviation (forward) or max relative error
    /// (backward).
    pub max_deviation: f64,
    pub tolerance: f64,
    pub worst_seed: u64,
    pub worst_case: String,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.max_deviation < self.tolerance
    }
}

/// A random graph, features and labels for one trial.
#[derive(Debug, Clone)]
pub struct VerifyInstance {
    pub seed: u64,
    pub graph: SparseGraph,
    pub propagation: PropagationKind,
    pub features: Tensor,
    pub labels: Vec<usize>,
    pub rows: Vec<usize>,
    pub hidden_dim: usize,
    pub n_classes: usize,
}

impl VerifyInstance {
    /// 5–16 nodes, hidden width 2–8.
    pub fn random(seed: u64) -> Result<Self> {
        let mut rng = SeedRng::new(seed);
        let n = 5 + rng.below(12);
        let density = rng.uniform_range(0.15, 0.6);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.bernoulli(density) {
                    edges.push((u, v));
                }
            }
        }
        let graph = SparseGraph::from_edges(n, &edges)?;
        let propagation = [PropagationKind::SymNorm, PropagationKind::SymNormSelfLoop, PropagationKind::RowNorm][rng.below(3)];
        let in_dim = 2 + rng.below(5);
        let hidden_dim = 2 + rng.below(7);
        let n_classes = 2 + rng.below(3);
        let features = Tensor::from_fn(n, in_dim, |_, _| rng.normal());
        let labels = (0..n).map(|_| rng.below(n_classes)).collect();
        let mut rows: Vec<usize> = (0..n).filter(|_| rng.bernoulli(0.5)).collect();
        if rows.is_empty() {
            rows.push(rng.below(n));
        }
        Ok(Self {
            seed,
            graph,
            propagation,
            features,
            labels,
            rows,
            hidden_dim,
            n_classes,
        })
    }

    /// Linear-mode model with random nonzero gates for Drive.
    pub fn model(&self, conv: ConvKind, skip: SkipKind, depth: usize) -> Result<UdgnnModel> {
        let mut spec = ModelSpec::plain(conv, skip, depth, self.hidden_dim);
        spec.linear_mode = true;
        spec.propagation_kind = self.propagation;
        let key = format!("{}/{skip:?}/{depth}", conv.name());
        let mut model = UdgnnModel::new(&spec, self.features.cols(), self.n_classes, derive_seed(self.seed, &key))?;
        let mut rng = SeedRng::new(derive_seed(self.seed, &format!("gates/{key}")));
        for lp in model.layers().to_vec() {
            if let Some(a) = lp.alpha {
                model.store_mut().get_mut(a).value = Tensor::scalar(rng.uniform_range(-1.0, 1.0));
            }
        }
        Ok(model)
    }
}

/// Forward oracle on one model: max |enumerated − model H^L|.
pub fn forward_deviation(model: &UdgnnModel, ops: &GraphOperators, features: &Tensor, options: VerifyOptions) -> Result<f64> {
    let stack = LinearStack::from_model(model)?;
    let fwd = model.forward(ops, features, false, &mut SeedRng::new(0))?;
    let hidden = fwd.hidden_values();
    let mut enumerated = enumerate_paths_forward(&ops.p, &hidden[0], &stack)?;
    if options.inject_fault {
        let v = enumerated.get(0, 0);
        enumerated.set(0, 0, v + 1e-6 * v.abs().max(1.0));
    }
    enumerated.max_abs_diff(&hidden[model.depth()])
}

/// Same model with every SGC layer replaced by a GCN layer whose weight is
/// the identity, so autodiff exposes `∂L/∂W^l` at `W = I`.
fn identity_weight_twin(model: &UdgnnModel) -> Result<UdgnnModel> {
    let spec = ModelSpec {
        conv_kind: ConvKind::GCN,
        ..model.spec().clone()
    };
    let mut twin = UdgnnModel::new(&spec, model.in_dim(), model.n_classes(), 0)?;
    twin.copy_encoder_decoder(model)?;
    let h = spec.hidden_dim;
    for l in 1..=model.depth() {
        let (mine, theirs) = (twin.layer(l).clone(), model.layer(l).clone());
        let id = mine.w.expect("gcn weight");
        twin.store_mut().get_mut(id).value = Tensor::identity(h);
        if let (Some(a), Some(b)) = (mine.alpha, theirs.alpha) {
            let v = model.store().get(b).value.clone();
            twin.store_mut().get_mut(a).value = v;
        }
    }
    Ok(twin)
}

/// Backward oracle on one model: max over layers of
/// `max|analytic − autodiff| / max|autodiff|`.
pub fn backward_deviation(
    model: &UdgnnModel,
    ops: &GraphOperators,
    inst: &VerifyInstance,
    options: VerifyOptions,
) -> Result<f64> {
    let stack = LinearStack::from_model(model)?;
    let mut reference = if model.spec().conv_kind == ConvKind::SGC {
        identity_weight_twin(model)?
    } else {
        model.clone()
    };
    let mut fwd = reference.forward(ops, &inst.features, false, &mut SeedRng::new(0))?;
    let hidden = fwd.hidden_values();
    let loss = fwd.loss(&inst.labels, &inst.rows)?;
    fwd.tape.backward(loss, reference.store_mut())?;

    let w_dec = &model.store().get(model.decoder().0).value;
    let upstream = cross_entropy_upstream(fwd.logits_value(), &inst.labels, &inst.rows, w_dec)?;
    let mut worst: f64 = 0.0;
    for l in 1..=model.depth() {
        let mut analytic = analytic_grad(&ops.p, &hidden, &upstream, &stack, l)?;
        if options.inject_fault {
            analytic = analytic.scale(1.0 + 1e-6);
        }
        let id = reference.layer(l).w.expect("reference has weights");
        let auto = &reference.store().get(id).grad;
        let diff = analytic.max_abs_diff(auto)?;
        let scale = auto.max_abs();
        let rel = if scale > 0.0 { diff / scale } else { diff };
        worst = worst.max(rel);
    }
    Ok(worst)
}

/// Runs the oracle over `trials` random instances, each across the full
/// grid of skip kinds, convolutions and depths `1..=6`.
pub fn verify_theorem(theorem: Theorem, trials: usize, seed: u64, options: VerifyOptions) -> Result<VerifyReport> {
    if trials == 0 {
        return Err(Error::config("verify", "trials", "must be at least 1"));
    }
    let mut report = VerifyReport {
        theorem,
        trials,
        comparisons: 0,
        max_deviation: 0.0,
        tolerance: theorem.tolerance(),
        worst_seed: 0,
        worst_case: String::new(),
    };
    for t in 0..trials {
        let inst_seed = derive_seed(seed, &format!("trial/{t}"));
        let inst = VerifyInstance::random(inst_seed)?;
        let ops = GraphOperators::new(&inst.graph, inst.propagation);
        for skip in VERIFY_SKIPS {
            for conv in VERIFY_CONVS {
                for depth in 1..=VERIFY_MAX_DEPTH {
                    let model = inst.model(conv, skip, depth)?;
                    let dev = match theorem {
                        Theorem::Forward => forward_deviation(&model, &ops, &inst.features, options)?,
                        Theorem::Backward => backward_deviation(&model, &ops, &inst, options)?,
                    };
                    report.comparisons += 1;
                    if dev.is_nan() || dev > report.max_deviation || report.comparisons == 1 {
                        report.max_deviation = if dev.is_nan() { f64::INFINITY } else { dev };
                        report.worst_seed = inst_seed;
                        report.worst_case = format!(
                            "{skip:?} {} depth {depth}, n={}, h={}, {:?}",
                            conv.name(),
                            inst.graph.n_nodes(),
                            inst.hidden_dim,
                            inst.propagation
                        );
                    }
                }
            }
        }
    }
    Ok(report)
}
