//! Analytic gradients against central finite differences, 64-bit.

use ndarray::{Array2, Array3};
use phasefuse::model::{BaselineBilstm, Classifier, GfBilstm, Mode, ModelConfig};
use phasefuse::nn::gradcheck::{check_gradients, ParamCheck};
use phasefuse::nn::{BiLstm, LayerNorm, ParamStore, Tape};
use phasefuse::{InputConfig, ModelInput, SeededRng};

const STEP: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn random_input(rng: &mut SeededRng, config: InputConfig, s: usize, t: usize) -> ModelInput {
    let m = config.channel_multiplier();
    ModelInput {
        tensor: Array3::from_shape_fn((m, s, t), |_| rng.normal()),
        config,
    }
}

fn assert_report(report: &[ParamCheck]) {
    for c in report {
        eprintln!(
            "{:<24} rel {:.3e} abs {:.3e} entry-rel {:.3e}",
            c.name, c.rel_error, c.max_abs_error, c.max_entry_rel_error
        );
    }
    let worst = report
        .iter()
        .max_by(|a, b| a.rel_error.total_cmp(&b.rel_error))
        .unwrap();
    assert!(worst.rel_error < TOL, "worst: {worst:?}");
}

fn model_loss(model: &dyn Classifier, inputs: &[&ModelInput], labels: &[usize]) -> f64 {
    let mut tape = Tape::new(model.params());
    let out = model.forward(&mut tape, inputs, &mut Mode::Eval).unwrap();
    let (loss, _) = tape.softmax_cross_entropy(out.logits, labels).unwrap();
    tape.value(loss)[[0, 0]]
}

fn check_model(
    model: &mut dyn Classifier,
    inputs: &[&ModelInput],
    labels: &[usize],
) -> Vec<ParamCheck> {
    let grads = {
        let mut tape = Tape::new(model.params());
        let out = model.forward(&mut tape, inputs, &mut Mode::Eval).unwrap();
        let (loss, _) = tape.softmax_cross_entropy(out.logits, labels).unwrap();
        tape.backward(loss).unwrap()
    };
    let cfg = *model.config();
    let kind = model.kind();
    let mut params = model.params().clone();
    check_gradients(&mut params, &grads, STEP, |p| {
        let probe: Box<dyn Classifier> = match kind {
            phasefuse::model::ModelKind::GfBilstm => {
                Box::new(GfBilstm::from_params(p.clone(), cfg.input, cfg.receivers)?)
            }
            phasefuse::model::ModelKind::Baseline => Box::new(BaselineBilstm::from_params(
                p.clone(),
                cfg.input,
                cfg.receivers,
            )?),
        };
        Ok(model_loss(probe.as_ref(), inputs, labels))
    })
    .unwrap()
}

#[test]
fn gf_bilstm_tiny_matches_finite_differences() {
    let mut rng = SeededRng::new(11);
    let cfg = ModelConfig::new(InputConfig::AmpPlusSanitized, 4)
        .with_hidden(3)
        .with_classes(2);
    let mut model = GfBilstm::new(cfg, 5).unwrap();
    let a = random_input(&mut rng, cfg.input, 4, 6);
    let b = random_input(&mut rng, cfg.input, 4, 6);
    let report = check_model(&mut model, &[&a, &b], &[1, 1]);
    assert_report(&report);
}

#[test]
fn baseline_tiny_matches_finite_differences() {
    let mut rng = SeededRng::new(12);
    let cfg = ModelConfig::new(InputConfig::AmpPlusUnwrapped, 4)
        .with_hidden(3)
        .with_classes(3);
    let mut model = BaselineBilstm::new(cfg, 6).unwrap();
    let a = random_input(&mut rng, cfg.input, 4, 5);
    let b = random_input(&mut rng, cfg.input, 4, 5);
    let report = check_model(&mut model, &[&a, &b], &[2, 0]);
    assert_report(&report);
}

/// Checks a small graph `build(tape, x) -> logits` where `x` is an affine
/// image of a fixed input, so input gradients are exercised through `lift`.
fn check_graph<F>(mut store: ParamStore, input: Array2<f64>, labels: &[usize], build: F)
where
    F: Fn(&mut Tape<'_>, phasefuse::nn::NodeId) -> phasefuse::nn::NodeId,
{
    let lift_w = store.id("lift.w").unwrap();
    let lift_b = store.id("lift.b").unwrap();
    let loss_of = |store: &ParamStore| -> (f64, Option<phasefuse::nn::Grads>) {
        let mut tape = Tape::new(store);
        let x = tape.input(input.clone());
        let x = tape.affine(x, lift_w, lift_b).unwrap();
        let logits = build(&mut tape, x);
        let (loss, _) = tape.softmax_cross_entropy(logits, labels).unwrap();
        let value = tape.value(loss)[[0, 0]];
        (value, Some(tape.backward(loss).unwrap()))
    };
    let (_, grads) = loss_of(&store);
    let report = check_gradients(&mut store, &grads.unwrap(), STEP, |p| Ok(loss_of(p).0)).unwrap();
    assert_report(&report);
}

fn lifted_store(rng: &mut SeededRng, input_width: usize, width: usize) -> ParamStore {
    let mut store = ParamStore::new();
    store.add_uniform("lift.w", width, input_width, 0.8, rng);
    store.add_uniform("lift.b", 1, width, 0.3, rng);
    store
}

#[test]
fn affine_and_relu_match_finite_differences() {
    let mut rng = SeededRng::new(21);
    let mut store = lifted_store(&mut rng, 3, 5);
    let w = store.add_uniform("head.w", 3, 5, 0.7, &mut rng);
    let b = store.add_uniform("head.b", 1, 3, 0.2, &mut rng);
    let input = Array2::from_shape_fn((4, 3), |_| rng.normal());
    check_graph(store, input, &[0, 2, 1, 2], |t, x| {
        let r = t.relu(x);
        t.affine(r, w, b).unwrap()
    });
}

#[test]
fn grouped_layer_norm_matches_finite_differences() {
    let mut rng = SeededRng::new(22);
    let mut store = lifted_store(&mut rng, 4, 6);
    let ln = LayerNorm::new(&mut store, "ln", 6, 3);
    for name in ["ln.gamma", "ln.beta"] {
        let id = store.id(name).unwrap();
        store.get_mut(id).mapv_inplace(|v| v + 0.3 * rng.normal());
    }
    let w = store.add_uniform("head.w", 2, 6, 0.7, &mut rng);
    let b = store.add_uniform("head.b", 1, 2, 0.2, &mut rng);
    let input = Array2::from_shape_fn((3, 4), |_| rng.normal());
    check_graph(store, input, &[1, 0, 1], |t, x| {
        let y = t.layer_norm(x, &ln).unwrap();
        t.affine(y, w, b).unwrap()
    });
}

#[test]
fn bilstm_and_mean_pool_match_finite_differences() {
    let mut rng = SeededRng::new(23);
    let (batch, steps) = (2, 5);
    let mut store = lifted_store(&mut rng, 3, 3);
    let layer = BiLstm::new(&mut store, "rnn", 3, 4, &mut rng);
    let w = store.add_uniform("head.w", 3, 8, 0.7, &mut rng);
    let b = store.add_uniform("head.b", 1, 3, 0.2, &mut rng);
    let input = Array2::from_shape_fn((batch * steps, 3), |_| rng.normal());
    check_graph(store, input, &[2, 0], |t, x| {
        let h = t.bilstm(x, &layer, batch).unwrap();
        let pooled = t.mean_pool(h, batch).unwrap();
        t.affine(pooled, w, b).unwrap()
    });
}

#[test]
fn gated_fusion_and_concat_match_finite_differences() {
    let mut rng = SeededRng::new(24);
    let mut store = lifted_store(&mut rng, 3, 8);
    let wa = store.add_uniform("a.w", 4, 8, 0.6, &mut rng);
    let ba = store.add_uniform("a.b", 1, 4, 0.2, &mut rng);
    let wp = store.add_uniform("p.w", 4, 8, 0.6, &mut rng);
    let bp = store.add_uniform("p.b", 1, 4, 0.2, &mut rng);
    let wg = store.add_uniform("gate.w", 4, 8, 0.6, &mut rng);
    let bg = store.add_uniform("gate.b", 1, 4, 0.2, &mut rng);
    let w = store.add_uniform("head.w", 2, 8, 0.7, &mut rng);
    let b = store.add_uniform("head.b", 1, 2, 0.2, &mut rng);
    let input = Array2::from_shape_fn((3, 3), |_| rng.normal());
    check_graph(store, input, &[0, 1, 1], |t, x| {
        let ua = t.affine(x, wa, ba).unwrap();
        let up = t.affine(x, wp, bp).unwrap();
        let fused = t.gated_fuse(ua, up, wg, bg).unwrap();
        let both = t.concat_cols(fused.z, ua).unwrap();
        t.affine(both, w, b).unwrap()
    });
}

#[test]
fn sample_mask_matches_finite_differences() {
    let mut rng = SeededRng::new(25);
    let mut store = lifted_store(&mut rng, 2, 3);
    let w = store.add_uniform("head.w", 2, 3, 0.7, &mut rng);
    let b = store.add_uniform("head.b", 1, 2, 0.2, &mut rng);
    // two steps of a batch of three, middle sample masked
    let input = Array2::from_shape_fn((6, 2), |_| rng.normal());
    check_graph(store, input, &[1, 0, 1, 0, 0, 1], |t, x| {
        let m = t.mask_samples(x, &[true, false, true]);
        t.affine(m, w, b).unwrap()
    });
}
