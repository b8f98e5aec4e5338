//! Compare tape gradients of a tiny gated-fusion BiLSTM against central
//! finite differences, one line per parameter tensor.

use ndarray::Array3;
use phasefuse::model::{Classifier, GfBilstm, Mode, ModelConfig};
use phasefuse::nn::gradcheck::check_gradients;
use phasefuse::nn::Tape;
use phasefuse::{InputConfig, ModelInput, SeededRng};

fn loss(model: &GfBilstm, inputs: &[&ModelInput], labels: &[usize]) -> phasefuse::Result<f64> {
    let mut tape = Tape::new(model.params());
    let out = model.forward(&mut tape, inputs, &mut Mode::Eval)?;
    let (l, _) = tape.softmax_cross_entropy(out.logits, labels)?;
    Ok(tape.value(l)[[0, 0]])
}

fn main() -> phasefuse::Result<()> {
    let cfg = ModelConfig::new(InputConfig::AmpPlusSanitized, 4)
        .with_hidden(3)
        .with_classes(2);
    let model = GfBilstm::new(cfg, 5)?;
    let mut rng = SeededRng::new(11);
    let inputs: Vec<ModelInput> = (0..2)
        .map(|_| ModelInput {
            tensor: Array3::from_shape_simple_fn((2, 4, 6), || rng.normal()),
            config: cfg.input,
        })
        .collect();
    let refs: Vec<&ModelInput> = inputs.iter().collect();
    let labels = [0, 1];

    let grads = {
        let mut tape = Tape::new(model.params());
        let out = model.forward(&mut tape, &refs, &mut Mode::Eval)?;
        let (l, _) = tape.softmax_cross_entropy(out.logits, &labels)?;
        tape.backward(l)?
    };
    let mut params = model.params().clone();
    let report = check_gradients(&mut params, &grads, 1e-5, |p| {
        loss(
            &GfBilstm::from_params(p.clone(), cfg.input, 1)?,
            &refs,
            &labels,
        )
    })?;
    for c in &report {
        println!("{:<20} relative error {:.2e}", c.name, c.rel_error);
    }
    let worst = report.iter().map(|c| c.rel_error).fold(0.0, f64::max);
    println!("worst {worst:.2e} over {} tensors", report.len());
    Ok(())
}
