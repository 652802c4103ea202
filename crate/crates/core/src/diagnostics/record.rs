use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{conv_ratio, von_neumann_entropy};
use crate::error::{Error, Result};
use crate::graph::NodeDataset;
use crate::nn::{GraphOperators, UdgnnModel};
use crate::rng::SeedRng;
use crate::train::{accuracy, train_with_observer, TrainConfig, TrainReport};

pub const DIAGNOSTICS_HEADER: &str = "epoch,layer,conv_ratio,grad_entropy,abs_alpha,abs_beta,loss,val_acc";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerDiagnostics {
    pub layer: usize,
    pub conv_ratio: f64,
    pub conv_ratio_capped: bool,
    /// Entropy of the raw `∂L/∂W^l`; absent for weightless convolutions.
    pub grad_entropy: Option<f64>,
    pub grad_is_zero: bool,
    pub abs_alpha: f64,
    pub abs_beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub epoch: usize,
    /// Evaluation-mode training loss of the snapshot.
    pub loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
    pub layers: Vec<LayerDiagnostics>,
}

/// Measures one parameter snapshot: an evaluation-mode forward and backward
/// pass on the training loss. The model itself is not modified.
pub fn snapshot_diagnostics(model: &UdgnnModel, ops: &GraphOperators, data: &NodeDataset, epoch: usize) -> Result<DiagnosticsRecord> {
    let train_rows = data.train_indices();
    let val_rows = data.val_indices();
    let mut fwd = model.forward(ops, &data.features, false, &mut SeedRng::new(0))?;
    let train_acc = accuracy(fwd.logits_value(), &data.labels, &train_rows)?;
    let val_acc = accuracy(fwd.logits_value(), &data.labels, &val_rows)?;
    let hidden = fwd.hidden_values();
    let loss_node = fwd.loss(&data.labels, &train_rows)?;
    let loss = fwd.tape.value(loss_node).data()[0];
    let mut store = model.store().clone();
    fwd.tape.backward(loss_node, &mut store)?;

    let (alphas, betas) = model.gate_magnitudes();
    let mut layers = Vec::with_capacity(model.depth());
    for l in 1..=model.depth() {
        let cr = conv_ratio(&hidden[l - 1], &hidden[l])?;
        let entropy = match model.layer(l).w {
            Some(id) => Some(von_neumann_entropy(&store.get(id).grad)?),
            None => None,
        };
        layers.push(LayerDiagnostics {
            layer: l,
            conv_ratio: cr.value,
            conv_ratio_capped: cr.capped_rows > 0,
            grad_entropy: entropy.map(|e| e.value),
            grad_is_zero: entropy.is_some_and(|e| e.zero_matrix),
            abs_alpha: alphas[l - 1],
            abs_beta: betas[l - 1],
        });
    }
    Ok(DiagnosticsRecord {
        epoch,
        loss,
        train_acc,
        val_acc,
        layers,
    })
}

/// Trains like [`crate::train::train`] and snapshots diagnostics at epoch 0
/// and every `log_every` epochs.
pub fn record_training_diagnostics(
    model: &mut UdgnnModel,
    ops: &GraphOperators,
    data: &NodeDataset,
    config: &TrainConfig,
    log_every: usize,
) -> Result<(TrainReport, Vec<DiagnosticsRecord>)> {
    if log_every == 0 {
        return Err(Error::config("diagnostics", "log_every", "must be at least 1"));
    }
    let mut records = Vec::new();
    let report = train_with_observer(model, ops, data, config, &mut |view| {
        if view.epoch % log_every == 0 {
            records.push(snapshot_diagnostics(view.model, ops, data, view.epoch)?);
        }
        Ok(())
    })?;
    Ok((report, records))
}

#[derive(Serialize)]
struct CsvRow {
    epoch: usize,
    layer: usize,
    conv_ratio: f64,
    grad_entropy: Option<f64>,
    abs_alpha: f64,
    abs_beta: f64,
    loss: f64,
    val_acc: f64,
}

pub fn write_diagnostics_csv<W: Write>(records: &[DiagnosticsRecord], w: W) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(DIAGNOSTICS_HEADER.split(','))?;
    for r in records {
        for l in &r.layers {
            out.serialize(CsvRow {
                epoch: r.epoch,
                layer: l.layer,
                conv_ratio: l.conv_ratio,
                grad_entropy: l.grad_entropy,
                abs_alpha: l.abs_alpha,
                abs_beta: l.abs_beta,
                loss: r.loss,
                val_acc: r.val_acc,
            })?;
        }
    }
    out.flush().map_err(|e| Error::io("<csv writer>", e))
}
