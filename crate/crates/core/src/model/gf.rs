//! Two-stream gated-fusion BiLSTM.
//!
//! ```text
//! amplitude -> LN -> BiLSTM -> ReLU(W_A . + b_A) -> u_A --+
//!                                                          gate -> z -> BiLSTM x2 -> mean -> MLP -> logits
//! phase     -> LN -> BiLSTM -> ReLU(W_P . + b_P) -> u_P --+
//! ```

use super::{
    check_inputs, linear, lookup_linear, lookup_norm, maybe_dropout, time_major, Classifier,
    ForwardOut, FusionTrace, MaskRecord, Mode, ModelConfig, ModelKind,
};
use crate::error::{Error, Result};
use crate::model::draw_modality_mask;
use crate::nn::{BiLstm, LayerNorm, ParamId, ParamStore, Tape};
use crate::phase::{InputConfig, ModelInput};
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy)]
struct Layout {
    ln_a: LayerNorm,
    ln_p: LayerNorm,
    enc_a: BiLstm,
    enc_p: BiLstm,
    proj_a: (ParamId, ParamId),
    proj_p: (ParamId, ParamId),
    gate: (ParamId, ParamId),
    post: [BiLstm; 2],
    head1: (ParamId, ParamId),
    head2: (ParamId, ParamId),
}

#[derive(Debug, Clone)]
pub struct GfBilstm {
    store: ParamStore,
    layout: Layout,
    config: ModelConfig,
}

impl GfBilstm {
    /// Fresh model; rejects single-stream input configurations.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        if !config.input.is_two_stream() {
            return Err(Error::Config(format!(
                "GF-BiLSTM needs amplitude and phase streams, `{}` has one",
                config.input
            )));
        }
        let mut rng = SeededRng::new(seed);
        let mut store = ParamStore::new();
        let h = config.hidden;
        let width = config.subcarriers * config.receivers;
        let s = config.subcarriers;
        let ln_a = LayerNorm::new(&mut store, "gf.ln_a", width, s);
        let ln_p = LayerNorm::new(&mut store, "gf.ln_p", width, s);
        let enc_a = BiLstm::new(&mut store, "gf.enc_a", width, h, &mut rng);
        let enc_p = BiLstm::new(&mut store, "gf.enc_p", width, h, &mut rng);
        let proj_a = linear(&mut store, "gf.proj_a", h, 2 * h, &mut rng);
        let proj_p = linear(&mut store, "gf.proj_p", h, 2 * h, &mut rng);
        let gate = linear(&mut store, "gf.gate", h, 2 * h, &mut rng);
        let post = [
            BiLstm::new(&mut store, "gf.post0", h, h, &mut rng),
            BiLstm::new(&mut store, "gf.post1", 2 * h, h, &mut rng),
        ];
        let head1 = linear(&mut store, "gf.head.1", 2 * h, 2 * h, &mut rng);
        let head2 = linear(&mut store, "gf.head.2", config.classes, 2 * h, &mut rng);
        Ok(Self {
            store,
            layout: Layout {
                ln_a,
                ln_p,
                enc_a,
                enc_p,
                proj_a,
                proj_p,
                gate,
                post,
                head1,
                head2,
            },
            config,
        })
    }

    /// Rebuilds a model around loaded parameters, inferring widths from shapes.
    pub fn from_params(store: ParamStore, input: InputConfig, receivers: usize) -> Result<Self> {
        let enc_a = BiLstm::lookup(&store, "gf.enc_a")?;
        let head2 = lookup_linear(&store, "gf.head.2")?;
        let width = enc_a.fwd.input;
        if receivers == 0 || width % receivers != 0 {
            return Err(Error::Data(format!(
                "width {width} not divisible by {receivers} receivers"
            )));
        }
        let config = ModelConfig {
            hidden: enc_a.fwd.hidden,
            classes: store.get(head2.0).nrows(),
            subcarriers: width / receivers,
            receivers,
            input,
        };
        let s = config.subcarriers;
        let layout = Layout {
            ln_a: lookup_norm(&store, "gf.ln_a", s)?,
            ln_p: lookup_norm(&store, "gf.ln_p", s)?,
            enc_a,
            enc_p: BiLstm::lookup(&store, "gf.enc_p")?,
            proj_a: lookup_linear(&store, "gf.proj_a")?,
            proj_p: lookup_linear(&store, "gf.proj_p")?,
            gate: lookup_linear(&store, "gf.gate")?,
            post: [
                BiLstm::lookup(&store, "gf.post0")?,
                BiLstm::lookup(&store, "gf.post1")?,
            ],
            head1: lookup_linear(&store, "gf.head.1")?,
            head2,
        };
        Ok(Self {
            store,
            layout,
            config,
        })
    }

    /// Parameter ids of the gate, `(W_g, b_g)`.
    pub fn gate_params(&self) -> (ParamId, ParamId) {
        self.layout.gate
    }

    fn stream_channels(&self) -> (Vec<usize>, Vec<usize>) {
        let r = self.config.receivers;
        (
            (0..r).map(|i| 2 * i).collect(),
            (0..r).map(|i| 2 * i + 1).collect(),
        )
    }
}

impl Classifier for GfBilstm {
    fn kind(&self) -> ModelKind {
        ModelKind::GfBilstm
    }

    fn config(&self) -> &ModelConfig {
        &self.config
    }

    fn params(&self) -> &ParamStore {
        &self.store
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    fn forward<'p>(
        &'p self,
        tape: &mut Tape<'p>,
        inputs: &[&ModelInput],
        mode: &mut Mode<'_>,
    ) -> Result<ForwardOut> {
        check_inputs(&self.config, inputs)?;
        let l = &self.layout;
        let batch = inputs.len();
        let (amp_ch, phase_ch) = self.stream_channels();
        let amp = tape.input(time_major(inputs, &amp_ch)?);
        let phase = tape.input(time_major(inputs, &phase_ch)?);

        let mut na = tape.layer_norm(amp, &l.ln_a)?;
        let mut np = tape.layer_norm(phase, &l.ln_p)?;

        let mut masks = vec![MaskRecord::None; batch];
        if let Mode::Train {
            rng,
            modality_dropout,
            ..
        } = mode
        {
            for m in masks.iter_mut() {
                *m = draw_modality_mask(*modality_dropout, rng);
            }
            let keep_a: Vec<bool> = masks.iter().map(|m| *m != MaskRecord::Amplitude).collect();
            let keep_p: Vec<bool> = masks.iter().map(|m| *m != MaskRecord::Phase).collect();
            na = tape.mask_samples(na, &keep_a);
            np = tape.mask_samples(np, &keep_p);
        }

        let ea = tape.bilstm(na, &l.enc_a, batch)?;
        let ea = maybe_dropout(tape, ea, mode);
        let ep = tape.bilstm(np, &l.enc_p, batch)?;
        let ep = maybe_dropout(tape, ep, mode);
        let ua = tape.affine(ea, l.proj_a.0, l.proj_a.1)?;
        let ua = tape.relu(ua);
        let up = tape.affine(ep, l.proj_p.0, l.proj_p.1)?;
        let up = tape.relu(up);
        let fused = tape.gated_fuse(ua, up, l.gate.0, l.gate.1)?;

        let h1 = tape.bilstm(fused.z, &l.post[0], batch)?;
        let h1 = maybe_dropout(tape, h1, mode);
        let h2 = tape.bilstm(h1, &l.post[1], batch)?;
        let pooled = tape.mean_pool(h2, batch)?;
        let q = tape.affine(pooled, l.head1.0, l.head1.1)?;
        let q = tape.relu(q);
        let q = maybe_dropout(tape, q, mode);
        let logits = tape.affine(q, l.head2.0, l.head2.1)?;
        Ok(ForwardOut {
            logits,
            fusion: Some(FusionTrace {
                u_a: ua,
                u_p: up,
                z: fused.z,
                gate: fused.gate,
                masks,
            }),
        })
    }
}
