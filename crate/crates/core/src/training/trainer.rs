use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::{cross_entropy_value, Tape};
use crate::error::{Error, Result};
use crate::layers::Mode;
use crate::metrics::{confusion, ConfusionMatrix};
use crate::model::Model;
use crate::numerics::{RngStream, Tensor};
use crate::pipeline::{Partition, SegmentSet};
use crate::training::adam::Adam;
use crate::training::config::TrainingConfig;
use crate::training::loss::{l2_penalty, record_loss};
use crate::training::schedule::{EpochAction, Plateau};

/// Independent sub-streams of a run seed.
pub(crate) const STREAM_INIT: u64 = 1;
const STREAM_SHUFFLE: u64 = 2;
const STREAM_DROPOUT: u64 = 3;

/// Inference batch size; affects speed only.
const EVAL_BATCH: usize = 128;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_acc: f64,
    /// Learning rate used during this epoch.
    pub lr: f64,
}

pub const HISTORY_HEADER: &str = "epoch,train_loss,val_loss,val_acc,lr";

/// History as CSV. Floats use the shortest representation that parses back
/// to the same value.
pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut out = format!("{HISTORY_HEADER}\n");
    for r in history {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.epoch, r.train_loss, r.val_loss, r.val_acc, r.lr
        );
    }
    out
}

pub fn write_history(path: &Path, history: &[EpochRecord]) -> Result<()> {
    std::fs::write(path, history_csv(history)).map_err(|e| Error::io(path, e))
}

pub fn read_history(path: &Path) -> Result<Vec<EpochRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |row: usize, msg: &str| Error::Ingest {
        path: path.to_path_buf(),
        message: format!("row {row}: {msg}"),
    };
    let mut lines = text.lines();
    if lines.next() != Some(HISTORY_HEADER) {
        return Err(bad(1, "expected header epoch,train_loss,val_loss,val_acc,lr"));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 5 {
                return Err(bad(i + 2, "expected 5 columns"));
            }
            let f = |j: usize| cells[j].parse::<f64>().map_err(|_| bad(i + 2, "bad number"));
            Ok(EpochRecord {
                epoch: cells[0].parse().map_err(|_| bad(i + 2, "bad epoch"))?,
                train_loss: f(1)?,
                val_loss: f(2)?,
                val_acc: f(3)?,
                lr: f(4)?,
            })
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest validation loss.
    pub model: Model,
    pub history: Vec<EpochRecord>,
    /// 1-based epoch whose weights were restored.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

/// Class probabilities for `indices`, evaluated in chunks.
pub fn predict_probs(model: &Model, data: &SegmentSet, indices: &[usize]) -> Result<Tensor> {
    let classes = model.config().classes;
    let mut out = Vec::with_capacity(indices.len() * classes);
    for chunk in indices.chunks(EVAL_BATCH) {
        let (x, _) = data.batch(chunk, classes)?;
        out.extend_from_slice(model.predict(&x)?.data());
    }
    Tensor::new(&[indices.len(), classes], out)
}

fn argmax_rows(probs: &Tensor) -> Vec<usize> {
    let classes = probs.dim(1);
    probs
        .data()
        .chunks(classes.max(1))
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &p)| if p > best.1 { (i, p) } else { best })
                .0
        })
        .collect()
}

/// Validation-style loss (cross-entropy + L2) and accuracy on a partition.
pub fn evaluate_loss(model: &Model, data: &SegmentSet, partition: Partition) -> Result<(f64, f64)> {
    let indices = data.indices(partition);
    if indices.is_empty() {
        return Err(Error::Contract(format!("{partition} partition is empty")));
    }
    let classes = model.config().classes;
    let probs = predict_probs(model, data, &indices)?;
    let mut onehot = vec![0.0; indices.len() * classes];
    let labels = data.labels_of(&indices);
    for (row, &l) in labels.iter().enumerate() {
        onehot[row * classes + l] = 1.0;
    }
    let targets = Tensor::new(&[indices.len(), classes], onehot)?;
    let loss = cross_entropy_value(&probs, &targets) + l2_penalty(model, model.config().l2_lambda);
    let predicted = argmax_rows(&probs);
    let correct = predicted.iter().zip(&labels).filter(|(p, t)| p == t).count();
    Ok((loss, correct as f64 / indices.len() as f64))
}

/// Confusion matrix of the model's arg-max predictions on a partition.
pub fn evaluate_confusion(model: &Model, data: &SegmentSet, partition: Partition) -> Result<ConfusionMatrix> {
    let indices = data.indices(partition);
    let probs = predict_probs(model, data, &indices)?;
    confusion(&data.labels_of(&indices), &argmax_rows(&probs), model.config().classes)
}

/// Trains `model` in place of a copy and returns the best-validation
/// weights. Everything random derives from `seed`.
pub fn train(model: &Model, data: &SegmentSet, cfg: &TrainingConfig, seed: u64) -> Result<TrainOutcome> {
    cfg.validate()?;
    let train_idx = data.indices(Partition::Train);
    if train_idx.is_empty() || data.indices(Partition::Val).is_empty() {
        return Err(Error::Contract("train and val partitions must be non-empty".into()));
    }
    if data.window_len() != model.config().input_length {
        return Err(Error::shape(format!(
            "windows of {} samples for a model expecting {}",
            data.window_len(),
            model.config().input_length
        )));
    }

    let root = RngStream::new(seed);
    let mut shuffle_rng = root.fork(STREAM_SHUFFLE);
    let mut dropout_rng = root.fork(STREAM_DROPOUT);
    let classes = model.config().classes;
    let lambda = model.config().l2_lambda;
    let names: Vec<String> = model.param_infos().into_iter().map(|i| i.name).collect();
    let shapes: Vec<Vec<usize>> = model.params().iter().map(|t| t.shape().to_vec()).collect();

    let mut current = model.clone();
    let mut best = model.clone();
    let mut best_epoch = 0;
    let mut adam = Adam::new(cfg.adam, &shapes);
    let mut plateau = Plateau::new(cfg);
    let mut history = Vec::new();
    let mut order = train_idx;
    let mut stopped_early = false;

    for epoch in 1..=cfg.max_epochs {
        let lr = plateau.lr();
        shuffle_rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        for (b, chunk) in order.chunks(cfg.batch).enumerate() {
            let (x, y) = data.batch(chunk, classes)?;
            let mut tape = Tape::new();
            let xv = tape.input(x);
            let rec = current.record(&mut tape, xv, Mode::Train, &mut dropout_rng)?;
            let loss = record_loss(&mut tape, &current, rec.probs, &rec.params, &y, lambda)?;
            let value = tape.value(loss).item();
            if !value.is_finite() {
                return Err(Error::numeric(format!(
                    "non-finite training loss at epoch {epoch}, batch {}",
                    b + 1
                )));
            }
            let grads = tape
                .backward(loss)
                .map_err(|e| Error::numeric(format!("epoch {epoch}, batch {}: {e}", b + 1)))?;
            drop(tape);
            adam.step(&mut current.params_mut(), &grads.into_vec(), &names, lr)?;
            loss_sum += value * chunk.len() as f64;
        }
        let train_loss = loss_sum / order.len() as f64;
        let (val_loss, val_acc) = evaluate_loss(&current, data, Partition::Val)?;
        if !val_loss.is_finite() {
            return Err(Error::numeric(format!("non-finite validation loss at epoch {epoch}")));
        }
        let record = EpochRecord {
            epoch,
            train_loss,
            val_loss,
            val_acc,
            lr,
        };
        log::info!(
            "epoch {epoch}: train_loss {train_loss:.5} val_loss {val_loss:.5} val_acc {val_acc:.4} lr {lr:e}"
        );
        history.push(record);
        if val_loss < plateau.best() {
            best = current.clone();
            best_epoch = epoch;
        }
        if plateau.on_epoch_end(val_loss) == EpochAction::Stop {
            stopped_early = true;
            break;
        }
    }
    Ok(TrainOutcome {
        model: best,
        history,
        best_epoch,
        stopped_early,
    })
}
