use std::fmt::Write as _;

use crate::csi::{Dataset, Velocity};
use crate::datagen::{lovo_split_tags, stratified_split};
use crate::error::{Error, Result};
use crate::model::{predict_all, train, History, Model, ModelConfig, ModelKind, TrainConfig};
use crate::phase::{preprocess_sample, InputConfig, ModelInput};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LovoOptions {
    pub hidden: usize,
    pub classes: usize,
    /// Share of each class in the training velocities held out for early stopping.
    pub val_fraction: f64,
    /// Training settings; `seed` is replaced per run.
    pub train: TrainConfig,
}

impl Default for LovoOptions {
    fn default() -> Self {
        Self {
            hidden: 128,
            classes: 8,
            val_fraction: 0.1,
            train: TrainConfig::default(),
        }
    }
}

impl LovoOptions {
    /// Reduced-cost preset that keeps a full grid on one CPU core within a
    /// couple of hours.
    pub fn desk() -> Self {
        Self {
            hidden: 32,
            train: TrainConfig {
                lr: 1e-3,
                max_epochs: 25,
                patience: Some(6),
                ..TrainConfig::default()
            },
            ..Self::default()
        }
    }
}

/// A dataset preprocessed for one input configuration.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: InputConfig,
    pub inputs: Vec<ModelInput>,
    pub labels: Vec<usize>,
    pub velocities: Vec<Velocity>,
    pub subcarriers: usize,
    pub receivers: usize,
}

pub fn prepare(dataset: &Dataset, config: InputConfig) -> Result<Prepared> {
    if dataset.is_empty() {
        return Err(Error::Data("empty dataset".into()));
    }
    let inputs = dataset
        .samples
        .iter()
        .map(|s| preprocess_sample(s, config))
        .collect::<Result<Vec<_>>>()?;
    Ok(Prepared {
        config,
        inputs,
        labels: dataset.samples.iter().map(|s| s.label).collect(),
        velocities: dataset.samples.iter().map(|s| s.velocity).collect(),
        subcarriers: dataset.shape.subcarriers,
        receivers: dataset.shape.channels,
    })
}

/// Outcome of training on two velocities and testing on the third.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub model: ModelKind,
    pub config: InputConfig,
    pub held_out: Velocity,
    pub seed: u64,
    /// Percent of held-out samples classified correctly.
    pub accuracy: f64,
    /// `confusion[true][predicted]` over the held-out samples.
    pub confusion: Vec<Vec<usize>>,
    pub history: History,
}

impl CellResult {
    pub fn test_size(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }
}

pub fn run_lovo(
    dataset: &Dataset,
    kind: ModelKind,
    config: InputConfig,
    held_out: Velocity,
    seed: u64,
    opts: &LovoOptions,
) -> Result<CellResult> {
    check_supported(kind, config)?;
    run_lovo_prepared(&prepare(dataset, config)?, kind, held_out, seed, opts)
}

fn check_supported(kind: ModelKind, config: InputConfig) -> Result<()> {
    if kind.supports(config) {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "{kind} needs a two-stream input, got {config}"
        )))
    }
}

pub fn run_lovo_prepared(
    data: &Prepared,
    kind: ModelKind,
    held_out: Velocity,
    seed: u64,
    opts: &LovoOptions,
) -> Result<CellResult> {
    run_lovo_trained(data, kind, held_out, seed, opts).map(|(cell, _)| cell)
}

/// Like [`run_lovo_prepared`] but also hands back the trained model.
pub fn run_lovo_trained(
    data: &Prepared,
    kind: ModelKind,
    held_out: Velocity,
    seed: u64,
    opts: &LovoOptions,
) -> Result<(CellResult, Model)> {
    check_supported(kind, data.config)?;
    let split = lovo_split_tags(&data.velocities, held_out)?;
    if split.train.is_empty() || split.test.is_empty() {
        return Err(Error::Data(format!("empty split for held-out {held_out}")));
    }
    let (train_idx, val_idx) =
        stratified_split(&split.train, |i| data.labels[i], opts.val_fraction, seed);
    let pairs = |idx: &[usize]| -> Vec<(&ModelInput, usize)> {
        idx.iter()
            .map(|&i| (&data.inputs[i], data.labels[i]))
            .collect()
    };
    let model_cfg = ModelConfig::new(data.config, data.subcarriers)
        .with_hidden(opts.hidden)
        .with_classes(opts.classes)
        .with_receivers(data.receivers);
    let mut model = Model::new(kind, model_cfg, seed)?;
    let cfg = TrainConfig { seed, ..opts.train };
    let history = train(
        model.as_classifier_mut(),
        &pairs(&train_idx),
        &pairs(&val_idx),
        &cfg,
    )?;

    let test_inputs: Vec<&ModelInput> = split.test.iter().map(|&i| &data.inputs[i]).collect();
    let predictions = predict_all(model.as_classifier(), &test_inputs, 32)?;
    let mut confusion = vec![vec![0usize; opts.classes]; opts.classes];
    for (&i, &p) in split.test.iter().zip(&predictions) {
        let y = data.labels[i];
        if y >= opts.classes {
            return Err(Error::Label {
                label: y,
                classes: opts.classes,
            });
        }
        confusion[y][p] += 1;
    }
    let correct: usize = (0..opts.classes).map(|c| confusion[c][c]).sum();
    let cell = CellResult {
        model: kind,
        config: data.config,
        held_out,
        seed,
        accuracy: 100.0 * correct as f64 / split.test.len() as f64,
        confusion,
        history,
    };
    Ok((cell, model))
}

/// Which cells of the grid to run.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub runs: Vec<(ModelKind, InputConfig)>,
    pub held_out: Vec<Velocity>,
    pub seeds: Vec<u64>,
}

impl GridSpec {
    /// Every velocity, all four inputs for the baseline and the two
    /// two-stream inputs for the fusion model.
    pub fn full(seeds: Vec<u64>) -> Self {
        let mut runs: Vec<_> = InputConfig::ALL
            .into_iter()
            .map(|c| (ModelKind::Baseline, c))
            .collect();
        runs.extend(
            InputConfig::ALL
                .into_iter()
                .filter(|c| c.is_two_stream())
                .map(|c| (ModelKind::GfBilstm, c)),
        );
        Self {
            runs,
            held_out: TABLE_ORDER.to_vec(),
            seeds,
        }
    }
}

/// Held-out velocities in the order the results table lists them.
const TABLE_ORDER: [Velocity; 3] = [Velocity::V3, Velocity::V2, Velocity::V1];

pub fn run_grid(
    dataset: &Dataset,
    spec: &GridSpec,
    opts: &LovoOptions,
) -> Result<ExperimentResult> {
    if spec.seeds.is_empty() {
        return Err(Error::Config("grid needs at least one seed".into()));
    }
    for &(kind, config) in &spec.runs {
        check_supported(kind, config)?;
    }
    let mut cells = Vec::new();
    for config in InputConfig::ALL {
        let kinds: Vec<ModelKind> = spec
            .runs
            .iter()
            .filter(|(_, c)| *c == config)
            .map(|(k, _)| *k)
            .collect();
        if kinds.is_empty() {
            continue;
        }
        let data = prepare(dataset, config)?;
        for &held_out in &spec.held_out {
            for &kind in &kinds {
                for &seed in &spec.seeds {
                    cells.push(run_lovo_prepared(&data, kind, held_out, seed, opts)?);
                }
            }
        }
    }
    Ok(ExperimentResult {
        seeds: spec.seeds.clone(),
        cells,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub seeds: Vec<u64>,
    pub cells: Vec<CellResult>,
}

impl ExperimentResult {
    fn matching(
        &self,
        kind: ModelKind,
        config: InputConfig,
        held_out: Option<Velocity>,
    ) -> impl Iterator<Item = &CellResult> {
        self.cells.iter().filter(move |c| {
            c.model == kind && c.config == config && held_out.is_none_or(|v| c.held_out == v)
        })
    }

    /// Mean accuracy over seeds (and over splits when `held_out` is `None`).
    pub fn mean_accuracy(
        &self,
        kind: ModelKind,
        config: InputConfig,
        held_out: Option<Velocity>,
    ) -> Option<f64> {
        let (sum, n) = self
            .matching(kind, config, held_out)
            .fold((0.0, 0usize), |(s, n), c| (s + c.accuracy, n + 1));
        (n > 0).then(|| sum / n as f64)
    }

    /// Results table: one block per held-out velocity, one row per model,
    /// one column per input configuration, seed-averaged accuracy in percent.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let _ = writeln!(
            out,
            "Leave-one-velocity-out accuracy (%), mean over seeds {}.\n",
            seeds.join(", ")
        );
        out.push_str("| Train | Test | Model | 1 | 2 | 3 | 4 |\n");
        out.push_str("|---|---|---|---|---|---|---|\n");
        for held_out in TABLE_ORDER {
            if !self.cells.iter().any(|c| c.held_out == held_out) {
                continue;
            }
            let train: Vec<String> = Velocity::ALL
                .into_iter()
                .filter(|&v| v != held_out)
                .map(|v| v.name().to_uppercase())
                .collect();
            for kind in [ModelKind::Baseline, ModelKind::GfBilstm] {
                if !self.cells.iter().any(|c| c.model == kind) {
                    continue;
                }
                let _ = write!(
                    out,
                    "| {} | {} | {} |",
                    train.join("&"),
                    held_out.name().to_uppercase(),
                    kind.name()
                );
                for config in InputConfig::ALL {
                    let cell = if !kind.supports(config) {
                        "−".to_string()
                    } else {
                        self.mean_accuracy(kind, config, Some(held_out))
                            .map_or_else(|| "n/a".to_string(), |a| format!("{a:.2}"))
                    };
                    let _ = write!(out, " {cell} |");
                }
                out.push('\n');
            }
        }
        out
    }

    /// One line per trained cell: model, input column, held-out velocity, seed, accuracy.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["model", "config", "held_out", "seed", "accuracy", "epochs"])?;
        for c in &self.cells {
            w.write_record([
                c.model.name().to_string(),
                c.config.column().to_string(),
                c.held_out.name().to_string(),
                c.seed.to_string(),
                format!("{:.4}", c.accuracy),
                c.history.epochs.len().to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

/// `confusion[true][predicted]` as CSV with a `true\predicted` header row.
pub fn confusion_csv(confusion: &[Vec<usize>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["true\\pred".to_string()];
    header.extend((0..confusion.len()).map(|c| c.to_string()));
    w.write_record(&header)?;
    for (i, row) in confusion.iter().enumerate() {
        let mut rec = vec![i.to_string()];
        rec.extend(row.iter().map(usize::to_string));
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}
