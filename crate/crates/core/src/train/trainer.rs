use std::time::Instant;

use super::{adam_step, EpochRecord, TrainConfig, TrainReport};
use crate::error::{Error, Result};
use crate::graph::NodeDataset;
use crate::nn::{GraphOperators, UdgnnModel};
use crate::rng::SeedRng;
use crate::tensor::Tensor;

/// State handed to a training observer: epoch 0 is the initialization,
/// epoch `e ≥ 1` is the model after `e` updates.
pub struct EpochView<'a> {
    pub epoch: usize,
    pub model: &'a UdgnnModel,
    pub train_loss: Option<f64>,
    pub val_acc: f64,
}

/// Row-wise argmax; ties go to the smallest class index.
pub fn argmax_rows(logits: &Tensor) -> Vec<usize> {
    (0..logits.rows())
        .map(|i| {
            let row = logits.row(i);
            let mut best = 0;
            for (k, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

pub fn accuracy(logits: &Tensor, labels: &[usize], rows: &[usize]) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::Dataset("accuracy over an empty mask".into()));
    }
    let pred = argmax_rows(logits);
    let correct = rows.iter().filter(|&&i| pred[i] == labels[i]).count();
    Ok(correct as f64 / rows.len() as f64)
}

pub fn evaluate(model: &UdgnnModel, ops: &GraphOperators, data: &NodeDataset, rows: &[usize]) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::Dataset("evaluation mask is empty".into()));
    }
    let logits = model.predict(ops, &data.features)?;
    accuracy(&logits, &data.labels, rows)
}

pub fn train(model: &mut UdgnnModel, ops: &GraphOperators, data: &NodeDataset, config: &TrainConfig) -> Result<TrainReport> {
    train_with_observer(model, ops, data, config, &mut |_| Ok(()))
}

/// Full-batch training with early stopping on validation accuracy. On
/// return the model holds the best-validation parameters.
pub fn train_with_observer(
    model: &mut UdgnnModel,
    ops: &GraphOperators,
    data: &NodeDataset,
    config: &TrainConfig,
    observer: &mut dyn FnMut(&EpochView) -> Result<()>,
) -> Result<TrainReport> {
    config.validate()?;
    data.validate()?;
    let (train_rows, val_rows, test_rows) = (data.train_indices(), data.val_indices(), data.test_indices());
    for (name, rows) in [("train", &train_rows), ("val", &val_rows), ("test", &test_rows)] {
        if rows.is_empty() {
            return Err(Error::Dataset(format!("{name} mask is empty")));
        }
    }
    if let Some(rate) = config.dropout_rate {
        model.set_dropout_rate(rate)?;
    }
    let started = config.record_timing.then(Instant::now);
    let mut rng = SeedRng::new(config.seed).split("dropout");

    let val0 = evaluate(model, ops, data, &val_rows)?;
    observer(&EpochView {
        epoch: 0,
        model,
        train_loss: None,
        val_acc: val0,
    })?;
    let snapshot = |m: &UdgnnModel| m.store().iter().map(|p| p.value.clone()).collect::<Vec<_>>();
    let mut best = (0usize, val0, snapshot(model));
    let mut since_best = 0usize;
    let mut history = Vec::new();

    for epoch in 1..=config.max_epochs {
        let mut fwd = model.forward(ops, &data.features, true, &mut rng)?;
        let loss = fwd.loss(&data.labels, &train_rows).map_err(|e| match e {
            Error::NonFinite(msg) => Error::NonFinite(format!("training diverged at epoch {epoch}: {msg}")),
            other => other,
        })?;
        let train_loss = fwd.tape.value(loss).data()[0];
        fwd.tape.backward(loss, model.store_mut())?;
        adam_step(model.store_mut(), config.learning_rate, config.weight_decay);

        let val_acc = evaluate(model, ops, data, &val_rows)?;
        let (abs_alpha, abs_beta) = model.gate_magnitudes();
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_acc,
            abs_alpha,
            abs_beta,
        });
        observer(&EpochView {
            epoch,
            model,
            train_loss: Some(train_loss),
            val_acc,
        })?;
        if val_acc > best.1 {
            best = (epoch, val_acc, snapshot(model));
            since_best = 0;
        } else {
            since_best += 1;
        }
        if since_best >= config.patience {
            break;
        }
    }

    let epochs_run = history.len();
    let (best_epoch, best_val_acc, values) = best;
    for (p, v) in model.store_mut().iter_mut().zip(values) {
        p.value = v;
    }
    let test_acc = evaluate(model, ops, data, &test_rows)?;
    Ok(TrainReport {
        model: model.spec().clone(),
        config: config.clone(),
        optimizer: "adam(0.9, 0.999, 1e-8), coupled L2, gates and biases exempt".into(),
        dropout_placement: "block input before conv and before FFN, training only".into(),
        epochs_run,
        best_epoch,
        best_val_acc,
        test_acc,
        history,
        wall_ms: started.map_or(0, |t| t.elapsed().as_millis() as u64),
    })
}
