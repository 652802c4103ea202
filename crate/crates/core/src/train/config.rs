use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::ModelSpec;

fn default_lr() -> f64 {
    0.01
}
fn default_wd() -> f64 {
    5e-4
}
fn default_max_epochs() -> usize {
    1000
}
fn default_patience() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_wd")]
    pub weight_decay: f64,
    #[serde(default = "default_max_epochs")]
    pub max_epochs: usize,
    /// Epochs without a strict validation-accuracy improvement before stopping.
    #[serde(default = "default_patience")]
    pub patience: usize,
    /// Overrides the model's dropout rate when set.
    #[serde(default)]
    pub dropout_rate: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    /// Measure wall-clock time. Off by default so reports are reproducible
    /// byte for byte.
    #[serde(default)]
    pub record_timing: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: default_lr(),
            weight_decay: default_wd(),
            max_epochs: default_max_epochs(),
            patience: default_patience(),
            dropout_rate: None,
            seed: 0,
            record_timing: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field, reason: &str| Err(Error::config("train config", field, reason));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate", "must be positive and finite");
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return bad("weight_decay", "must be non-negative and finite");
        }
        if self.patience > self.max_epochs {
            return bad("patience", "must not exceed max_epochs");
        }
        if let Some(r) = self.dropout_rate {
            if !(0.0..1.0).contains(&r) {
                return bad("dropout_rate", "must lie in [0, 1)");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Training-mode loss before this epoch's update.
    pub train_loss: f64,
    /// Validation accuracy after the update.
    pub val_acc: f64,
    pub abs_alpha: Vec<f64>,
    pub abs_beta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub model: ModelSpec,
    pub config: TrainConfig,
    pub optimizer: String,
    pub dropout_placement: String,
    pub epochs_run: usize,
    /// 0 means the initial parameters were never beaten on validation.
    pub best_epoch: usize,
    pub best_val_acc: f64,
    pub test_acc: f64,
    pub history: Vec<EpochRecord>,
    pub wall_ms: u64,
}

impl TrainReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|source| Error::Json {
            context: "train report".into(),
            source,
        })?;
        s.push('\n');
        Ok(s)
    }

    /// `epoch,train_loss,val_acc` per epoch.
    pub fn metrics_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_acc\n");
        for r in &self.history {
            out.push_str(&format!("{},{},{}\n", r.epoch, r.train_loss, r.val_acc));
        }
        out
    }
}
