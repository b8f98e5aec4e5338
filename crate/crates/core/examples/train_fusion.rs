//! Train a small gated-fusion BiLSTM on amplitude + sanitized phase with one
//! velocity held out, then print the per-epoch history and test accuracy.

use phasefuse::datagen::{generate_dataset, SynthConfig};
use phasefuse::harness::{confusion_csv, prepare, run_lovo_prepared, LovoOptions};
use phasefuse::model::ModelKind;
use phasefuse::{InputConfig, Velocity};

fn main() -> phasefuse::Result<()> {
    let ds = generate_dataset(&SynthConfig {
        samples_per_cell: 10,
        ..SynthConfig::default()
    })?;
    let data = prepare(&ds, InputConfig::AmpPlusSanitized)?;
    let mut opts = LovoOptions::desk();
    opts.hidden = 16;
    opts.train.max_epochs = 15;

    let cell = run_lovo_prepared(&data, ModelKind::GfBilstm, Velocity::V2, 1, &opts)?;
    for e in &cell.history.epochs {
        println!(
            "epoch {:3}  train loss {:.4}  val acc {:6.2}%  val loss {:.4}",
            e.epoch, e.train_loss, e.val_acc, e.val_loss
        );
    }
    println!(
        "kept epoch {:?}; held-out V2 accuracy {:.2}%",
        cell.history.best_epoch, cell.accuracy
    );
    print!("{}", confusion_csv(&cell.confusion)?);
    Ok(())
}
