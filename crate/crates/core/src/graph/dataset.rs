use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Node features, labels and train/val/test membership.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeDataset {
    pub features: Tensor,
    pub labels: Vec<usize>,
    pub train_mask: Vec<bool>,
    pub val_mask: Vec<bool>,
    pub test_mask: Vec<bool>,
    pub n_classes: usize,
}

impl NodeDataset {
    pub fn n_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.labels.len();
        if self.features.rows() != n {
            return Err(Error::Dataset(format!(
                "{} feature rows for {n} labels",
                self.features.rows()
            )));
        }
        for (name, m) in [
            ("train", &self.train_mask),
            ("val", &self.val_mask),
            ("test", &self.test_mask),
        ] {
            if m.len() != n {
                return Err(Error::Dataset(format!("{name} mask has length {}, expected {n}", m.len())));
            }
        }
        if !self.features.all_finite() {
            return Err(Error::Dataset("features contain non-finite values".into()));
        }
        for i in 0..n {
            let hits = [self.train_mask[i], self.val_mask[i], self.test_mask[i]]
                .iter()
                .filter(|&&b| b)
                .count();
            if hits > 1 {
                return Err(Error::Dataset(format!("node {i} appears in more than one split (mask overlap)")));
            }
            if hits == 1 && self.labels[i] >= self.n_classes {
                return Err(Error::Dataset(format!(
                    "node {i} has label {} outside [0, {})",
                    self.labels[i], self.n_classes
                )));
            }
        }
        Ok(())
    }

    pub fn mask_indices(mask: &[bool]) -> Vec<usize> {
        mask.iter()
            .enumerate()
            .filter_map(|(i, &m)| m.then_some(i))
            .collect()
    }

    pub fn train_indices(&self) -> Vec<usize> {
        Self::mask_indices(&self.train_mask)
    }

    pub fn val_indices(&self) -> Vec<usize> {
        Self::mask_indices(&self.val_mask)
    }

    pub fn test_indices(&self) -> Vec<usize> {
        Self::mask_indices(&self.test_mask)
    }
}
