//! Sequence classifiers over preprocessed CSI and their training loop.

mod baseline;
mod gf;
mod modality;
mod train;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array2, Axis};

pub use baseline::BaselineBilstm;
pub use gf::GfBilstm;
pub use modality::{apply_modality_dropout, draw_modality_mask, MaskRecord};
pub use train::{evaluate, train, EpochRecord, History, TrainConfig};

use crate::error::{Error, Result};
use crate::nn::{checkpoint, softmax, LayerNorm, NodeId, ParamStore, Tape};
use crate::phase::{InputConfig, ModelInput};
use crate::rng::SeededRng;

/// Which architecture a model uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    /// Single-stream BiLSTM over all input channels.
    Baseline,
    /// Two-stream gated-fusion BiLSTM.
    GfBilstm,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Baseline => "BiLSTM",
            ModelKind::GfBilstm => "GF-BiLSTM",
        }
    }

    pub fn supports(self, config: InputConfig) -> bool {
        self == ModelKind::Baseline || config.is_two_stream()
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(ModelKind::Baseline),
            "gf" => Ok(ModelKind::GfBilstm),
            other => Err(Error::Usage(format!("unknown model `{other}`"))),
        }
    }
}

/// Architecture hyperparameters and the input contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    /// Per-direction hidden width `h`.
    pub hidden: usize,
    pub classes: usize,
    pub subcarriers: usize,
    /// Receiver channels per sample.
    pub receivers: usize,
    pub input: InputConfig,
}

impl ModelConfig {
    pub fn new(input: InputConfig, subcarriers: usize) -> Self {
        Self {
            hidden: 128,
            classes: 8,
            subcarriers,
            receivers: 1,
            input,
        }
    }

    pub fn with_hidden(mut self, hidden: usize) -> Self {
        self.hidden = hidden;
        self
    }

    pub fn with_classes(mut self, classes: usize) -> Self {
        self.classes = classes;
        self
    }

    pub fn with_receivers(mut self, receivers: usize) -> Self {
        self.receivers = receivers;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.classes < 2 || self.subcarriers < 2 || self.receivers == 0 {
            return Err(Error::Config(format!("invalid model config {self:?}")));
        }
        Ok(())
    }
}

/// Forward-pass behaviour.
pub enum Mode<'r> {
    Eval,
    Train {
        rng: &'r mut SeededRng,
        dropout: f64,
        modality_dropout: f64,
    },
}

impl Mode<'_> {
    pub fn is_train(&self) -> bool {
        matches!(self, Mode::Train { .. })
    }
}

/// Fusion internals exposed for inspection.
pub struct FusionTrace {
    pub u_a: NodeId,
    pub u_p: NodeId,
    pub z: NodeId,
    pub gate: Array2<f64>,
    pub masks: Vec<MaskRecord>,
}

pub struct ForwardOut {
    /// `batch x C`
    pub logits: NodeId,
    pub fusion: Option<FusionTrace>,
}

/// Common interface of the two architectures.
pub trait Classifier {
    fn kind(&self) -> ModelKind;
    fn config(&self) -> &ModelConfig;
    fn params(&self) -> &ParamStore;
    fn params_mut(&mut self) -> &mut ParamStore;

    /// Records a forward pass over `inputs` (one batch) on `tape`.
    fn forward<'p>(
        &'p self,
        tape: &mut Tape<'p>,
        inputs: &[&ModelInput],
        mode: &mut Mode<'_>,
    ) -> Result<ForwardOut>;

    /// Eval-mode logits for a batch, `batch x C`.
    fn logits(&self, inputs: &[&ModelInput]) -> Result<Array2<f64>> {
        let mut tape = Tape::new(self.params());
        let out = self.forward(&mut tape, inputs, &mut Mode::Eval)?;
        Ok(tape.value(out.logits).clone())
    }
}

/// Either architecture, for code that picks one at run time.
#[derive(Debug, Clone)]
pub enum Model {
    Baseline(BaselineBilstm),
    Gf(GfBilstm),
}

impl Model {
    pub fn new(kind: ModelKind, config: ModelConfig, seed: u64) -> Result<Self> {
        Ok(match kind {
            ModelKind::Baseline => Model::Baseline(BaselineBilstm::new(config, seed)?),
            ModelKind::GfBilstm => Model::Gf(GfBilstm::new(config, seed)?),
        })
    }

    pub fn as_classifier(&self) -> &dyn Classifier {
        match self {
            Model::Baseline(m) => m,
            Model::Gf(m) => m,
        }
    }

    pub fn as_classifier_mut(&mut self) -> &mut dyn Classifier {
        match self {
            Model::Baseline(m) => m,
            Model::Gf(m) => m,
        }
    }

    /// Writes a GFBW checkpoint: the parameters plus `meta.*` tensors
    /// recording the input configuration and receiver count.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<u64> {
        let c = self.as_classifier();
        let mut store = c.params().clone();
        let cfg = c.config();
        store.add_vector("meta.input_config", vec![cfg.input.column() as f64]);
        store.add_vector("meta.receivers", vec![cfg.receivers as f64]);
        checkpoint::save(&store, path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let full = checkpoint::load(path)?;
        let meta = |name: &str| {
            full.id(name)
                .map(|id| full.get(id)[[0, 0]] as usize)
                .ok_or_else(|| Error::Data(format!("checkpoint lacks `{name}`")))
        };
        let column = meta("meta.input_config")?;
        let input = *InputConfig::ALL
            .get(column.wrapping_sub(1))
            .ok_or_else(|| Error::Data(format!("bad input config column {column}")))?;
        let receivers = meta("meta.receivers")?;
        let mut store = ParamStore::new();
        for id in full.ids() {
            let name = full.name(id);
            if name.starts_with("meta.") {
                continue;
            }
            if full.rank(id) == 1 {
                store.add_vector(name, full.get(id).row(0).to_vec());
            } else {
                store.add_matrix(name, full.get(id).clone());
            }
        }
        if store.id("gf.head.2.w").is_some() {
            Ok(Model::Gf(GfBilstm::from_params(store, input, receivers)?))
        } else if store.id("base.head.2.w").is_some() {
            Ok(Model::Baseline(BaselineBilstm::from_params(
                store, input, receivers,
            )?))
        } else {
            Err(Error::Data(
                "checkpoint matches no known architecture".into(),
            ))
        }
    }
}

/// Most probable class (lowest index on ties) and the softmax distribution.
pub fn predict(model: &dyn Classifier, input: &ModelInput) -> Result<(usize, Vec<f64>)> {
    let logits = model.logits(&[input])?;
    let probs = softmax(logits.row(0).as_slice().expect("contiguous"));
    Ok((argmax(&probs), probs))
}

/// Index of the first maximum.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Eval-mode predictions for many inputs, in chunks of `chunk`.
pub fn predict_all(
    model: &dyn Classifier,
    inputs: &[&ModelInput],
    chunk: usize,
) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(inputs.len());
    for part in inputs.chunks(chunk.max(1)) {
        let logits = model.logits(part)?;
        for row in logits.axis_iter(Axis(0)) {
            out.push(argmax(row.as_slice().expect("contiguous")));
        }
    }
    Ok(out)
}

/// Gathers the given tensor channels of a batch into a time-major matrix:
/// row `t * batch + b`, columns = channels concatenated, `S` each.
pub(crate) fn time_major(inputs: &[&ModelInput], channels: &[usize]) -> Result<Array2<f64>> {
    let first = inputs.first().ok_or(Error::EmptyInput("empty batch"))?;
    let (_, s, t) = first.tensor.dim();
    if inputs.iter().any(|i| i.tensor.dim() != first.tensor.dim()) {
        return Err(Error::Shape("batch inputs differ in shape".into()));
    }
    let batch = inputs.len();
    let mut out = Array2::zeros((t * batch, channels.len() * s));
    for (b, input) in inputs.iter().enumerate() {
        for (ci, &c) in channels.iter().enumerate() {
            let plane = input.tensor.index_axis(Axis(0), c);
            for (k, row) in plane.outer_iter().enumerate() {
                let col = ci * s + k;
                for (ti, v) in row.iter().enumerate() {
                    out[[ti * batch + b, col]] = *v;
                }
            }
        }
    }
    Ok(out)
}

pub(crate) fn check_inputs(config: &ModelConfig, inputs: &[&ModelInput]) -> Result<()> {
    let expect_channels = config.receivers * config.input.channel_multiplier();
    for input in inputs {
        let (m, s, t) = input.tensor.dim();
        if input.config != config.input || m != expect_channels || s != config.subcarriers || t == 0
        {
            return Err(Error::Shape(format!(
                "model expects {expect_channels} x {} x T input ({}), got {m} x {s} x {t} ({})",
                config.subcarriers, config.input, input.config
            )));
        }
    }
    Ok(())
}

pub(crate) fn linear(
    store: &mut ParamStore,
    prefix: &str,
    out: usize,
    input: usize,
    rng: &mut SeededRng,
) -> (crate::nn::ParamId, crate::nn::ParamId) {
    let bound = 1.0 / (input as f64).sqrt();
    let w = store.add_uniform(format!("{prefix}.w"), out, input, bound, rng);
    let b = store.add_vector(format!("{prefix}.b"), vec![0.0; out]);
    (w, b)
}

pub(crate) fn lookup_linear(
    store: &ParamStore,
    prefix: &str,
) -> Result<(crate::nn::ParamId, crate::nn::ParamId)> {
    let get = |s: &str| {
        store
            .id(&format!("{prefix}.{s}"))
            .ok_or_else(|| Error::Data(format!("missing parameter {prefix}.{s}")))
    };
    Ok((get("w")?, get("b")?))
}

pub(crate) fn lookup_norm(store: &ParamStore, prefix: &str, group: usize) -> Result<LayerNorm> {
    let get = |s: &str| {
        store
            .id(&format!("{prefix}.{s}"))
            .ok_or_else(|| Error::Data(format!("missing parameter {prefix}.{s}")))
    };
    Ok(LayerNorm {
        gamma: get("gamma")?,
        beta: get("beta")?,
        group,
        eps: crate::nn::layer_norm::DEFAULT_EPS,
    })
}

pub(crate) fn maybe_dropout(tape: &mut Tape<'_>, x: NodeId, mode: &mut Mode<'_>) -> NodeId {
    match mode {
        Mode::Eval => x,
        Mode::Train { rng, dropout, .. } => tape.dropout(x, *dropout, rng),
    }
}
