//! Datasets and settings shared by the integration tests and the
//! acceptance suite.
#![allow(dead_code)]

use udgnn_core::graph::{generate, GeneratorKind, NodeDataset, SparseGraph, SyntheticSpec};
use udgnn_core::train::TrainConfig;

pub const HIDDEN: usize = 16;

/// Homophilous planted partition: n=400, c=4, homophily 0.75, mean degree 10.
pub fn homophilous_spec() -> SyntheticSpec {
    SyntheticSpec {
        generator: GeneratorKind::PlantedPartition,
        n_nodes: 400,
        n_classes: 4,
        feature_dim: 16,
        homophily: 0.75,
        mean_degree: 10.0,
        feature_signal: 1.0,
        noise_std: 1.0,
        split_fractions: (0.3, 0.2, 0.5),
        seed: 1,
    }
}

/// Complete graph whose neighborhoods carry no label information: n=300, c=7.
pub fn noisy_complete_spec() -> SyntheticSpec {
    SyntheticSpec {
        generator: GeneratorKind::NoisyComplete,
        n_nodes: 300,
        n_classes: 7,
        feature_dim: 16,
        homophily: 0.0,
        mean_degree: 0.0,
        feature_signal: 4.0,
        noise_std: 1.0,
        split_fractions: (0.3, 0.2, 0.5),
        seed: 1,
    }
}

/// Well separated classes on a sparse graph.
pub fn easy_spec() -> SyntheticSpec {
    SyntheticSpec {
        n_nodes: 200,
        n_classes: 3,
        feature_dim: 8,
        homophily: 0.8,
        mean_degree: 4.0,
        feature_signal: 8.0,
        noise_std: 1.0,
        split_fractions: (0.4, 0.2, 0.4),
        seed: 5,
        ..homophilous_spec()
    }
}

pub fn dataset(spec: &SyntheticSpec) -> (SparseGraph, NodeDataset) {
    generate(spec).expect("acceptance dataset spec is valid")
}

pub fn experiment_config() -> TrainConfig {
    TrainConfig {
        learning_rate: 0.01,
        weight_decay: 5e-4,
        max_epochs: 300,
        patience: 100,
        dropout_rate: Some(0.0),
        seed: 0,
        record_timing: false,
    }
}
