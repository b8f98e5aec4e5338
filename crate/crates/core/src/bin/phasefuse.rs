use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ndarray::{s, Array2};

use phasefuse::csib::{read_csib, write_csib};
use phasefuse::datagen::{generate_dataset, lovo_split_tags, SynthConfig};
use phasefuse::harness::{
    bench_preprocessing, confusion_csv, export_figure_data, prepare, run_grid, run_lovo_trained,
    FigureKind, FigureStage, GridSpec, LovoOptions,
};
use phasefuse::model::{predict_all, Model, ModelKind};
use phasefuse::{
    ComplexCsi, CsiShape, Dataset, Error, InputConfig, LabeledSample, Result, Velocity,
};

#[derive(Parser)]
#[command(
    name = "phasefuse",
    version,
    about = "CSI phase calibration and gated-fusion BiLSTM toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Training knobs shared by `train` and `grid`; defaults are the desk-scale preset.
#[derive(clap::Args)]
struct TrainArgs {
    /// Hidden width of every LSTM direction.
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Early-stopping patience in epochs; 0 disables early stopping.
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
}

impl TrainArgs {
    fn options(&self) -> LovoOptions {
        let mut opts = LovoOptions::desk();
        if let Some(h) = self.hidden {
            opts.hidden = h;
        }
        if let Some(e) = self.epochs {
            opts.train.max_epochs = e;
        }
        if let Some(p) = self.patience {
            opts.train.patience = (p > 0).then_some(p);
        }
        if let Some(lr) = self.lr {
            opts.train.lr = lr;
        }
        opts
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic labeled dataset.
    Gen {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        samples_per_cell: Option<usize>,
    },
    /// Convert every sample to a model input; each plane is stored as a real-only channel.
    Preprocess {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        config: InputConfig,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one leave-one-velocity-out cell and save the checkpoint.
    Train {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        holdout: Velocity,
        #[arg(long)]
        config: InputConfig,
        #[arg(long)]
        model: ModelKind,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        ckpt: PathBuf,
        /// Optional per-epoch history CSV.
        #[arg(long)]
        history: Option<PathBuf>,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Evaluate a checkpoint on the held-out velocity; prints accuracy and the confusion CSV.
    Eval {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        holdout: Velocity,
        /// Write the confusion matrix here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full grid and write the markdown results table.
    Grid {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        seeds: Vec<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Optional per-run CSV twin of the table.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Time the preprocessing pipelines single-threaded.
    Bench {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 5)]
        iters: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export heatmap or overlay data of one sample's first channel.
    Fig {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        sample: usize,
        #[arg(long)]
        kind: FigureKind,
        #[arg(long)]
        stage: FigureStage,
        #[arg(long)]
        out: PathBuf,
    },
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Planes of a model input as real-only CSI channels, so they fit in a CSIB file.
fn as_real_channels(tensor: &ndarray::Array3<f64>) -> Result<Vec<ComplexCsi>> {
    (0..tensor.dim().0)
        .map(|m| {
            let real = tensor.slice(s![m, .., ..]).mapv(|v| v as f32);
            let imag = Array2::zeros(real.dim());
            ComplexCsi::new(real, imag)
        })
        .collect()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen {
            seed,
            out,
            samples_per_cell,
        } => {
            let mut cfg = SynthConfig {
                seed,
                ..SynthConfig::default()
            };
            if let Some(k) = samples_per_cell {
                cfg.samples_per_cell = k;
            }
            let ds = generate_dataset(&cfg)?;
            let bytes = write_csib(&out, &ds)?;
            println!(
                "wrote {} samples ({bytes} bytes) to {}",
                ds.len(),
                out.display()
            );
        }
        Command::Preprocess { input, config, out } => {
            let ds = read_csib(&input)?;
            let data = prepare(&ds, config)?;
            let samples = data
                .inputs
                .iter()
                .zip(&ds.samples)
                .map(|(inp, orig)| {
                    LabeledSample::new(as_real_channels(&inp.tensor)?, orig.label, orig.velocity)
                })
                .collect::<Result<Vec<_>>>()?;
            let shape = CsiShape {
                channels: ds.shape.channels * config.channel_multiplier(),
                ..ds.shape
            };
            let bytes = write_csib(&out, &Dataset::new(shape, samples)?)?;
            println!("wrote {config} inputs ({bytes} bytes) to {}", out.display());
        }
        Command::Train {
            input,
            holdout,
            config,
            model,
            seed,
            ckpt,
            history,
            train,
        } => {
            let ds = read_csib(&input)?;
            let data = prepare(&ds, config)?;
            let (cell, trained) = run_lovo_trained(&data, model, holdout, seed, &train.options())?;
            let bytes = trained.save(&ckpt)?;
            if let Some(path) = history {
                let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
                cell.history.write_csv(file)?;
            }
            println!(
                "{} {config} held-out {holdout} seed {seed}: {:.2}% after {} epochs (best {}), checkpoint {} ({bytes} bytes)",
                model.name(),
                cell.accuracy,
                cell.history.epochs.len(),
                cell.history.best_epoch.unwrap_or(0),
                ckpt.display()
            );
        }
        Command::Eval {
            input,
            ckpt,
            holdout,
            out,
        } => {
            let ds = read_csib(&input)?;
            let model = Model::load(&ckpt)?;
            let cfg = model.as_classifier().config();
            let data = prepare(&ds, cfg.input)?;
            let split = lovo_split_tags(&data.velocities, holdout)?;
            let inputs: Vec<_> = split.test.iter().map(|&i| &data.inputs[i]).collect();
            let preds = predict_all(model.as_classifier(), &inputs, 32)?;
            let mut confusion = vec![vec![0usize; cfg.classes]; cfg.classes];
            for (&i, &p) in split.test.iter().zip(&preds) {
                let y = data.labels[i];
                if y >= cfg.classes {
                    return Err(Error::Label {
                        label: y,
                        classes: cfg.classes,
                    });
                }
                confusion[y][p] += 1;
            }
            let correct: usize = (0..cfg.classes).map(|c| confusion[c][c]).sum();
            println!(
                "accuracy {:.2}% ({correct}/{})",
                100.0 * correct as f64 / inputs.len().max(1) as f64,
                inputs.len()
            );
            let table = confusion_csv(&confusion)?;
            match out {
                Some(path) => write_text(&path, &table)?,
                None => print!("{table}"),
            }
        }
        Command::Grid {
            input,
            seeds,
            out,
            csv,
            train,
        } => {
            let ds = read_csib(&input)?;
            let result = run_grid(&ds, &GridSpec::full(seeds), &train.options())?;
            write_text(&out, &result.to_markdown())?;
            if let Some(path) = csv {
                write_text(&path, &result.to_csv()?)?;
            }
            print!("{}", result.to_markdown());
        }
        Command::Bench { input, iters, out } => {
            if iters < 5 {
                return Err(Error::Usage("bench needs --iters >= 5".into()));
            }
            let ds = read_csib(&input)?;
            let result = bench_preprocessing(&ds, iters)?;
            write_text(&out, &result.to_csv()?)?;
            println!("{result}");
        }
        Command::Fig {
            input,
            sample,
            kind,
            stage,
            out,
        } => {
            let ds = read_csib(&input)?;
            let s = ds.samples.get(sample).ok_or_else(|| {
                Error::Usage(format!(
                    "sample {sample} out of range ({} samples)",
                    ds.len()
                ))
            })?;
            export_figure_data(s, kind, stage, &out)?;
            println!(
                "wrote {kind} of {stage} for sample {sample} to {}",
                out.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
