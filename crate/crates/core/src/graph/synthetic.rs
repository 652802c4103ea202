//! Seeded synthetic node-classification graphs.
//!
//! Draw order, each stage on its own split stream of the spec seed:
//! `labels` (one uniform class per node, ascending node id), `edges` (one
//! uniform per unordered pair, lexicographic `(u, v)` order; planted partition
//! only), `features` (node-major, one standard normal per coordinate) and
//! `splits` (per class in ascending class id: shuffle the class members, then
//! take train, val, test counts in that order).

use serde::{Deserialize, Serialize};

use super::{NodeDataset, SparseGraph};
use crate::error::{Error, Result};
use crate::rng::SeedRng;
use crate::tensor::Tensor;

pub const NOISY_COMPLETE_MAX_NODES: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    #[default]
    PlantedPartition,
    NoisyComplete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    #[serde(default)]
    pub generator: GeneratorKind,
    pub n_nodes: usize,
    pub n_classes: usize,
    pub feature_dim: usize,
    /// Probability that an edge joins two nodes of the same class.
    #[serde(default)]
    pub homophily: f64,
    #[serde(default)]
    pub mean_degree: f64,
    pub feature_signal: f64,
    pub noise_std: f64,
    /// (train, val, test)
    pub split_fractions: (f64, f64, f64),
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |field, reason: String| Err(Error::config("synthetic spec", field, reason));
        if self.n_nodes == 0 {
            return bad("n_nodes", "must be at least 1".into());
        }
        if self.n_classes == 0 {
            return bad("n_classes", "must be at least 1".into());
        }
        if self.feature_dim < self.n_classes {
            return bad(
                "feature_dim",
                format!("must be >= n_classes ({}) to hold orthogonal class directions", self.n_classes),
            );
        }
        if !(0.0..=1.0).contains(&self.homophily) {
            return bad("homophily", format!("must lie in [0, 1], got {}", self.homophily));
        }
        if !(self.mean_degree.is_finite() && self.mean_degree >= 0.0) {
            return bad("mean_degree", format!("must be finite and >= 0, got {}", self.mean_degree));
        }
        if !(self.feature_signal.is_finite() && self.feature_signal >= 0.0) {
            return bad("feature_signal", format!("must be finite and >= 0, got {}", self.feature_signal));
        }
        if !(self.noise_std.is_finite() && self.noise_std > 0.0) {
            return bad("noise_std", format!("must be finite and > 0, got {}", self.noise_std));
        }
        let (a, b, c) = self.split_fractions;
        if !(a > 0.0 && b > 0.0 && c > 0.0) {
            return bad("split_fractions", "all three fractions must be positive".into());
        }
        if a + b + c > 1.0 + 1e-12 {
            return bad("split_fractions", format!("fractions sum to {} > 1", a + b + c));
        }
        Ok(())
    }
}

/// Edge probabilities of the planted-partition model given realized labels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedProbabilities {
    pub p_intra: f64,
    pub p_inter: f64,
    pub intra_pairs: u64,
    pub inter_pairs: u64,
}

impl PlantedProbabilities {
    /// Chooses `p_intra`, `p_inter` so that the expected mean degree is
    /// `mean_degree` and the expected intra-class edge fraction is `homophily`.
    pub fn solve(spec: &SyntheticSpec, labels: &[usize]) -> Result<Self> {
        let n = labels.len() as u64;
        let mut sizes = vec![0u64; spec.n_classes];
        for &l in labels {
            sizes[l] += 1;
        }
        let intra_pairs: u64 = sizes.iter().map(|&s| s * s.saturating_sub(1) / 2).sum();
        let inter_pairs = n * n.saturating_sub(1) / 2 - intra_pairs;
        let expected_edges = spec.mean_degree * n as f64 / 2.0;
        let want_intra = spec.homophily * expected_edges;
        let want_inter = (1.0 - spec.homophily) * expected_edges;
        let ratio = |want: f64, pairs: u64, name: &str| -> Result<f64> {
            if want == 0.0 {
                return Ok(0.0);
            }
            let p = if pairs == 0 { f64::INFINITY } else { want / pairs as f64 };
            if p > 1.0 {
                return Err(Error::Infeasible(format!(
                    "{name} = {p} exceeds 1 ({want} expected edges over {pairs} candidate pairs); \
                     lower mean_degree or move homophily away from the bound"
                )));
            }
            Ok(p)
        };
        Ok(Self {
            p_intra: ratio(want_intra, intra_pairs, "p_intra")?,
            p_inter: ratio(want_inter, inter_pairs, "p_inter")?,
            intra_pairs,
            inter_pairs,
        })
    }

    pub fn expected_edges(&self) -> f64 {
        self.p_intra * self.intra_pairs as f64 + self.p_inter * self.inter_pairs as f64
    }

    pub fn edge_variance(&self) -> f64 {
        self.p_intra * (1.0 - self.p_intra) * self.intra_pairs as f64
            + self.p_inter * (1.0 - self.p_inter) * self.inter_pairs as f64
    }
}

fn draw_labels(spec: &SyntheticSpec, root: &SeedRng) -> Vec<usize> {
    let mut rng = root.split("labels");
    (0..spec.n_nodes).map(|_| rng.below(spec.n_classes)).collect()
}

fn draw_features(spec: &SyntheticSpec, labels: &[usize], root: &SeedRng) -> Tensor {
    let mut rng = root.split("features");
    let mut x = Tensor::zeros(labels.len(), spec.feature_dim);
    for (i, &l) in labels.iter().enumerate() {
        let row = x.row_mut(i);
        for (j, v) in row.iter_mut().enumerate() {
            let mean = if j == l { spec.feature_signal } else { 0.0 };
            *v = mean + spec.noise_std * rng.normal();
        }
    }
    x
}

fn draw_splits(spec: &SyntheticSpec, labels: &[usize], root: &SeedRng) -> [Vec<bool>; 3] {
    let mut rng = root.split("splits");
    let n = labels.len();
    let mut masks = [vec![false; n], vec![false; n], vec![false; n]];
    let (ft, fv, fs) = spec.split_fractions;
    for class in 0..spec.n_classes {
        let mut members: Vec<usize> = (0..n).filter(|&i| labels[i] == class).collect();
        rng.shuffle(&mut members);
        let size = members.len();
        let take = |f: f64| (f * size as f64).round() as usize;
        let n_train = take(ft).min(size);
        let n_val = take(fv).min(size - n_train);
        let n_test = take(fs).min(size - n_train - n_val);
        let bounds = [0, n_train, n_train + n_val, n_train + n_val + n_test];
        for (s, mask) in masks.iter_mut().enumerate() {
            for &i in &members[bounds[s]..bounds[s + 1]] {
                mask[i] = true;
            }
        }
    }
    masks
}

fn assemble(spec: &SyntheticSpec, labels: Vec<usize>, root: &SeedRng) -> NodeDataset {
    let features = draw_features(spec, &labels, root);
    let [train_mask, val_mask, test_mask] = draw_splits(spec, &labels, root);
    NodeDataset {
        features,
        labels,
        train_mask,
        val_mask,
        test_mask,
        n_classes: spec.n_classes,
    }
}

/// Planted-partition (stochastic block) graph with class-informative features.
pub fn generate_planted_partition(spec: &SyntheticSpec) -> Result<(SparseGraph, NodeDataset)> {
    spec.validate()?;
    let root = SeedRng::new(spec.seed);
    let labels = draw_labels(spec, &root);
    let probs = PlantedProbabilities::solve(spec, &labels)?;

    let mut rng = root.split("edges");
    let n = spec.n_nodes;
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = if labels[u] == labels[v] { probs.p_intra } else { probs.p_inter };
            if rng.uniform() < p {
                edges.push((u, v));
            }
        }
    }
    let graph = SparseGraph::from_edges(n, &edges)?;
    let data = assemble(spec, labels, &root);
    Ok((graph, data))
}

/// Complete graph over class-informative features: neighbors carry no label
/// information beyond the global class frequencies.
pub fn generate_noisy_complete(spec: &SyntheticSpec) -> Result<(SparseGraph, NodeDataset)> {
    spec.validate()?;
    if spec.n_nodes > NOISY_COMPLETE_MAX_NODES {
        return Err(Error::config(
            "synthetic spec",
            "n_nodes",
            format!(
                "{} exceeds the complete-graph cap of {NOISY_COMPLETE_MAX_NODES}",
                spec.n_nodes
            ),
        ));
    }
    let root = SeedRng::new(spec.seed);
    let labels = draw_labels(spec, &root);
    let graph = SparseGraph::complete(spec.n_nodes);
    let data = assemble(spec, labels, &root);
    Ok((graph, data))
}

pub fn generate(spec: &SyntheticSpec) -> Result<(SparseGraph, NodeDataset)> {
    match spec.generator {
        GeneratorKind::PlantedPartition => generate_planted_partition(spec),
        GeneratorKind::NoisyComplete => generate_noisy_complete(spec),
    }
}

/// Fraction of undirected edges whose endpoints share a label.
pub fn edge_homophily(graph: &SparseGraph, labels: &[usize]) -> f64 {
    let edges = graph.edges();
    if edges.is_empty() {
        return 0.0;
    }
    let same = edges.iter().filter(|&&(u, v)| labels[u] == labels[v]).count();
    same as f64 / edges.len() as f64
}
