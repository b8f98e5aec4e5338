//! Mini-batch AdamW training with early stopping on validation accuracy
//! (ties broken by validation loss).

use std::io::Write;

use ndarray::Axis;

use super::{argmax, Classifier, Mode};
use crate::error::{Error, Result};
use crate::nn::ops::softmax_cross_entropy;
use crate::nn::{AdamW, AdamWConfig, Tape};
use crate::phase::ModelInput;
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub dropout: f64,
    pub modality_dropout: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping; `None` never stops early.
    pub patience: Option<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            weight_decay: 2e-5,
            dropout: 0.2,
            modality_dropout: 0.05,
            batch_size: 8,
            max_epochs: 150,
            patience: Some(15),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let prob = 0.0..1.0;
        if !prob.contains(&self.dropout) || !prob.contains(&self.modality_dropout) {
            return Err(Error::Config(
                "dropout probabilities must lie in [0, 1)".into(),
            ));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.lr.is_nan() || self.lr <= 0.0 || self.weight_decay < 0.0 {
            return Err(Error::Config(
                "lr must be positive and weight decay nonnegative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training-mode loss over the epoch's batches.
    pub train_loss: f64,
    /// Validation accuracy in percent.
    pub val_acc: f64,
    /// Mean eval-mode cross-entropy on the validation set.
    pub val_loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were kept, if any epoch ran.
    pub best_epoch: Option<usize>,
    pub steps: usize,
}

impl History {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["epoch", "train_loss", "val_acc", "val_loss"])?;
        for e in &self.epochs {
            w.write_record([
                e.epoch.to_string(),
                format!("{:.6}", e.train_loss),
                format!("{:.4}", e.val_acc),
                format!("{:.6}", e.val_loss),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Eval-mode accuracy (percent) and mean cross-entropy; `(0, 0)` for an empty set.
pub fn evaluate(model: &dyn Classifier, data: &[(&ModelInput, usize)]) -> Result<(f64, f64)> {
    if data.is_empty() {
        return Ok((0.0, 0.0));
    }
    let mut correct = 0;
    let mut loss = 0.0;
    for part in data.chunks(32) {
        let inputs: Vec<&ModelInput> = part.iter().map(|(i, _)| *i).collect();
        let logits = model.logits(&inputs)?;
        for (row, (_, y)) in logits.axis_iter(Axis(0)).zip(part) {
            let row = row.as_slice().expect("contiguous");
            correct += usize::from(argmax(row) == *y);
            loss += softmax_cross_entropy(row, *y)?.0;
        }
    }
    let n = data.len() as f64;
    Ok((100.0 * correct as f64 / n, loss / n))
}

/// Trains in place and leaves the best-validation parameters in `model`.
pub fn train(
    model: &mut dyn Classifier,
    train_set: &[(&ModelInput, usize)],
    val_set: &[(&ModelInput, usize)],
    cfg: &TrainConfig,
) -> Result<History> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::Data("empty training set".into()));
    }
    let classes = model.config().classes;
    if let Some((_, y)) = train_set.iter().chain(val_set).find(|(_, y)| *y >= classes) {
        return Err(Error::Label { label: *y, classes });
    }
    let mut history = History::default();
    if cfg.max_epochs == 0 {
        return Ok(history);
    }
    let mut opt = AdamW::new(
        model.params(),
        AdamWConfig {
            lr: cfg.lr,
            weight_decay: cfg.weight_decay,
            ..AdamWConfig::default()
        },
    );
    let mut rng = SeededRng::derive(cfg.seed, 0x7261_696e);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut best: Option<((f64, f64), crate::nn::ParamStore)> = None;
    let mut since_best = 0;

    for epoch in 1..=cfg.max_epochs {
        rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let inputs: Vec<&ModelInput> = chunk.iter().map(|&i| train_set[i].0).collect();
            let labels: Vec<usize> = chunk.iter().map(|&i| train_set[i].1).collect();
            let grads = {
                let mut tape = Tape::new(model.params());
                let mut mode = Mode::Train {
                    rng: &mut rng,
                    dropout: cfg.dropout,
                    modality_dropout: cfg.modality_dropout,
                };
                let out = model.forward(&mut tape, &inputs, &mut mode)?;
                let (loss, _) = tape.softmax_cross_entropy(out.logits, &labels)?;
                let value = tape.value(loss)[[0, 0]];
                if !value.is_finite() {
                    return Err(Error::Divergence {
                        epoch,
                        step: history.steps + 1,
                        detail: format!("loss is {value}"),
                    });
                }
                loss_sum += value;
                tape.backward(loss)?
            };
            opt.step(model.params_mut(), &grads).map_err(|e| match e {
                Error::NonFiniteGradient(name) => Error::Divergence {
                    epoch,
                    step: history.steps + 1,
                    detail: format!("non-finite gradient for `{name}`"),
                },
                other => other,
            })?;
            history.steps += 1;
            batches += 1;
        }
        let (val_acc, val_loss) = evaluate(&*model, val_set)?;
        history.epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / batches as f64,
            val_acc,
            val_loss,
        });
        let improved = best
            .as_ref()
            .is_none_or(|((acc, loss), _)| val_acc > *acc || (val_acc == *acc && val_loss < *loss));
        if improved {
            best = Some(((val_acc, val_loss), model.params().clone()));
            history.best_epoch = Some(epoch);
            since_best = 0;
        } else {
            since_best += 1;
            if cfg.patience.is_some_and(|p| since_best >= p) {
                break;
            }
        }
    }
    if let Some((_, params)) = best {
        *model.params_mut() = params;
    }
    Ok(history)
}
