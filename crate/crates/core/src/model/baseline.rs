//! Single-stream BiLSTM: all input channels flattened into the per-time
//! feature vector, then LN, three BiLSTM layers, mean pooling and the MLP head.

use super::{
    check_inputs, linear, lookup_linear, lookup_norm, maybe_dropout, time_major, Classifier,
    ForwardOut, Mode, ModelConfig, ModelKind,
};
use crate::error::{Error, Result};
use crate::nn::{BiLstm, LayerNorm, ParamId, ParamStore, Tape};
use crate::phase::{InputConfig, ModelInput};
use crate::rng::SeededRng;

pub const LAYERS: usize = 3;

#[derive(Debug, Clone)]
pub struct BaselineBilstm {
    store: ParamStore,
    norm: LayerNorm,
    layers: Vec<BiLstm>,
    head1: (ParamId, ParamId),
    head2: (ParamId, ParamId),
    config: ModelConfig,
}

impl BaselineBilstm {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = SeededRng::new(seed);
        let mut store = ParamStore::new();
        let h = config.hidden;
        let s = config.subcarriers;
        let width = s * config.receivers * config.input.channel_multiplier();
        let norm = LayerNorm::new(&mut store, "base.ln", width, width);
        let layers = (0..LAYERS)
            .map(|i| {
                let input = if i == 0 { width } else { 2 * h };
                BiLstm::new(&mut store, &format!("base.lstm{i}"), input, h, &mut rng)
            })
            .collect();
        let head1 = linear(&mut store, "base.head.1", 2 * h, 2 * h, &mut rng);
        let head2 = linear(&mut store, "base.head.2", config.classes, 2 * h, &mut rng);
        Ok(Self {
            store,
            norm,
            layers,
            head1,
            head2,
            config,
        })
    }

    pub fn from_params(store: ParamStore, input: InputConfig, receivers: usize) -> Result<Self> {
        let layers = (0..LAYERS)
            .map(|i| BiLstm::lookup(&store, &format!("base.lstm{i}")))
            .collect::<Result<Vec<_>>>()?;
        let head2 = lookup_linear(&store, "base.head.2")?;
        let width = layers[0].fwd.input;
        let per = receivers * input.channel_multiplier();
        if per == 0 || width % per != 0 {
            return Err(Error::Data(format!(
                "width {width} not divisible into {per} channels"
            )));
        }
        let config = ModelConfig {
            hidden: layers[0].fwd.hidden,
            classes: store.get(head2.0).nrows(),
            subcarriers: width / per,
            receivers,
            input,
        };
        Ok(Self {
            norm: lookup_norm(&store, "base.ln", width)?,
            head1: lookup_linear(&store, "base.head.1")?,
            head2,
            layers,
            store,
            config,
        })
    }
}

impl Classifier for BaselineBilstm {
    fn kind(&self) -> ModelKind {
        ModelKind::Baseline
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
        let batch = inputs.len();
        let channels: Vec<usize> = (0..inputs[0].channels()).collect();
        let x = tape.input(time_major(inputs, &channels)?);
        let mut h = tape.layer_norm(x, &self.norm)?;
        for (i, layer) in self.layers.iter().enumerate() {
            if i > 0 {
                h = maybe_dropout(tape, h, mode);
            }
            h = tape.bilstm(h, layer, batch)?;
        }
        let pooled = tape.mean_pool(h, batch)?;
        let q = tape.affine(pooled, self.head1.0, self.head1.1)?;
        let q = tape.relu(q);
        let q = maybe_dropout(tape, q, mode);
        let logits = tape.affine(q, self.head2.0, self.head2.1)?;
        Ok(ForwardOut {
            logits,
            fusion: None,
        })
    }
}
