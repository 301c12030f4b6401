use log::{debug, info};

use super::adam::AdamState;
use super::curve::{CurveRow, EpochSummary, LearningCurve};
use crate::error::{Error, Result};
use crate::layers::{softmax_ce, Mode};
use crate::model::{Gradients, Model};
use crate::numcore::{Matrix, Rng};

/// A labelled sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub frames: Matrix,
    pub label: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr: f64,
    pub max_epochs: usize,
    /// Consecutive non-improving epochs tolerated; training stops once
    /// this many is exceeded.
    pub patience: usize,
    pub min_delta: f64,
    pub seed: u64,
    /// Learning-curve cadence in optimizer steps.
    pub eval_every: usize,
    /// Stop after the first epoch whose training accuracy reaches this.
    pub stop_at_train_acc: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 16,
            lr: 1e-4,
            max_epochs: 100,
            patience: 5,
            min_delta: 0.0,
            seed: 0,
            eval_every: 10,
            stop_at_train_acc: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 1 {
            return Err(Error::validation("batch_size", "must be at least 1"));
        }
        if self.patience < 1 {
            return Err(Error::validation("patience", "must be at least 1"));
        }
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return Err(Error::validation("lr", "must be finite and non-negative"));
        }
        if self.eval_every < 1 {
            return Err(Error::validation("eval_every", "must be at least 1"));
        }
        if !(self.min_delta >= 0.0) {
            return Err(Error::validation("min_delta", "must be non-negative"));
        }
        Ok(())
    }
}

/// Index batches for one epoch: a Fisher-Yates shuffle keyed by
/// `(seed, epoch)`, cut into consecutive chunks (the last may be short).
pub fn make_batches(n: usize, batch_size: usize, seed: u64, epoch: usize) -> Vec<Vec<usize>> {
    assert!(batch_size > 0, "batch_size must be positive");
    let mut order: Vec<usize> = (0..n).collect();
    Rng::derived(seed, epoch as u64).shuffle(&mut order);
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Mean cross entropy of a batch and the gradient of every parameter,
/// plus the number of correctly classified sequences.
pub fn batch_loss_and_grads(model: &Model, batch: &[&Example], mode: Mode) -> Result<(f64, usize, Gradients, crate::model::ForwardCache)> {
    let frames: Vec<&Matrix> = batch.iter().map(|e| &e.frames).collect();
    let (logits, cache) = model.forward_batch(&frames, mode)?;
    let scale = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    let mut correct = 0;
    let mut grads = Vec::with_capacity(batch.len());
    for (z, ex) in logits.iter().zip(batch) {
        let (l, mut g) = softmax_ce(z, ex.label)?;
        loss += l;
        if argmax(z) == ex.label {
            correct += 1;
        }
        g.iter_mut().for_each(|v| *v *= scale);
        grads.push(g);
    }
    let loss = loss * scale;
    if !loss.is_finite() {
        return Err(Error::Divergence { block: "loss".into() });
    }
    let grads = model.backward(&cache, &grads)?;
    Ok((loss, correct, grads, cache))
}

/// Inference-mode mean loss and accuracy over `set`.
pub fn evaluate(model: &Model, set: &[Example]) -> Result<(f64, f64)> {
    if set.is_empty() {
        return Ok((f64::NAN, f64::NAN));
    }
    let frames: Vec<&Matrix> = set.iter().map(|e| &e.frames).collect();
    let logits = model.logits_batch(&frames)?;
    let mut loss = 0.0;
    let mut correct = 0;
    for (z, ex) in logits.iter().zip(set) {
        loss += softmax_ce(z, ex.label)?.0;
        correct += usize::from(argmax(z) == ex.label);
    }
    let n = set.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

#[derive(Clone, Debug)]
pub struct FitReport {
    pub curve: LearningCurve,
    /// Epoch whose parameters were restored.
    pub best_epoch: usize,
    pub best_monitored_loss: f64,
    pub epochs_run: usize,
    pub stopped_early: bool,
}

/// Mini-batch Adam training with early stopping.
///
/// The monitored loss is the validation loss when `val` is non-empty and
/// the epoch's mean training loss otherwise. On return `model` holds the
/// best epoch's parameters. If the loss or a gradient turns non-finite the
/// model is reset to the last completed epoch and a divergence error is
/// returned.
pub fn fit(model: &mut Model, train: &[Example], val: &[Example], cfg: &TrainConfig) -> Result<FitReport> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyInput("training set".into()));
    }
    let lens: Vec<usize> = model.param_blocks().iter().map(|b| b.values.len()).collect();
    let mut adam = AdamState::new(&lens, cfg.lr);
    let mut curve = LearningCurve::default();

    let mut best_model = model.clone();
    let mut best_loss = f64::INFINITY;
    let mut best_epoch = 0;
    let mut stale = 0;
    let mut step = 0usize;
    let (mut win_loss, mut win_correct, mut win_seen) = (0.0, 0usize, 0usize);
    let mut epochs_run = 0;
    let mut stopped_early = false;

    for epoch in 0..cfg.max_epochs {
        let checkpoint = model.clone();
        let (mut ep_loss, mut ep_correct) = (0.0, 0usize);
        for batch_idx in make_batches(train.len(), cfg.batch_size, cfg.seed, epoch) {
            let batch: Vec<&Example> = batch_idx.iter().map(|&i| &train[i]).collect();
            let outcome = batch_loss_and_grads(model, &batch, Mode::Train).and_then(|(loss, correct, grads, cache)| {
                model.update_running_stats(&cache)?;
                adam.step(&mut model.param_blocks_mut(), &grads)?;
                Ok((loss, correct))
            });
            let (loss, correct) = match outcome {
                Ok(v) => v,
                Err(e @ Error::Divergence { .. }) => {
                    *model = checkpoint;
                    return Err(e);
                }
                Err(e) => return Err(e),
            };
            let b = batch.len();
            ep_loss += loss * b as f64;
            ep_correct += correct;
            win_loss += loss * b as f64;
            win_correct += correct;
            win_seen += b;
            step += 1;
            if step.is_multiple_of(cfg.eval_every) {
                let (val_loss, val_acc) = evaluate(model, val)?;
                curve.rows.push(CurveRow {
                    epoch,
                    step,
                    train_loss: win_loss / win_seen as f64,
                    train_acc: win_correct as f64 / win_seen as f64,
                    val_loss,
                    val_acc,
                });
                (win_loss, win_correct, win_seen) = (0.0, 0, 0);
            }
        }
        epochs_run += 1;

        let train_loss = ep_loss / train.len() as f64;
        let train_acc = ep_correct as f64 / train.len() as f64;
        let (val_loss, val_acc) = evaluate(model, val)?;
        curve.epochs.push(EpochSummary {
            epoch,
            train_loss,
            train_acc,
            val_loss,
            val_acc,
        });
        debug!("epoch {epoch}: train loss {train_loss:.4} acc {train_acc:.3}, val loss {val_loss:.4} acc {val_acc:.3}");

        let reached = cfg.stop_at_train_acc.is_some_and(|th| train_acc >= th);
        let monitored = if val.is_empty() { train_loss } else { val_loss };
        if monitored < best_loss - cfg.min_delta {
            best_loss = monitored;
            best_epoch = epoch;
            best_model = model.clone();
            stale = 0;
        } else {
            stale += 1;
            if stale > cfg.patience {
                stopped_early = true;
                break;
            }
        }
        if reached {
            break;
        }
    }
    info!("training stopped after {epochs_run} epochs; best epoch {best_epoch} (monitored loss {best_loss:.6})");
    *model = best_model;
    Ok(FitReport {
        curve,
        best_epoch,
        best_monitored_loss: best_loss,
        epochs_run,
        stopped_early,
    })
}
