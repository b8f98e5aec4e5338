use std::fmt;
use std::hint::black_box;
use std::time::Instant;

use ndarray::Array2;

use crate::csi::{amplitude, raw_phase, ComplexCsi, Dataset};
use crate::error::{Error, Result};
use crate::phase::{sanitize, unwrap_temporal};

/// Preprocessing pipelines compared by the benchmark, cheapest first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PreprocMethod {
    AmpOnly,
    PhaseUnwrapped,
    AmpPhaseUnwrapped,
    PhaseSanitized,
    AmpPhaseSanitized,
}

impl PreprocMethod {
    pub const ALL: [PreprocMethod; 5] = [
        PreprocMethod::AmpOnly,
        PreprocMethod::PhaseUnwrapped,
        PreprocMethod::AmpPhaseUnwrapped,
        PreprocMethod::PhaseSanitized,
        PreprocMethod::AmpPhaseSanitized,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PreprocMethod::AmpOnly => "Amp-only",
            PreprocMethod::PhaseUnwrapped => "Phase-only (Unw)",
            PreprocMethod::AmpPhaseUnwrapped => "Amp+Phase (Unw)",
            PreprocMethod::PhaseSanitized => "Phase-only (San)",
            PreprocMethod::AmpPhaseSanitized => "Amp+Phase (San)",
        }
    }

    fn uses_amplitude(self) -> bool {
        matches!(
            self,
            PreprocMethod::AmpOnly
                | PreprocMethod::AmpPhaseUnwrapped
                | PreprocMethod::AmpPhaseSanitized
        )
    }

    /// Runs the pipeline on one channel and returns its output planes.
    fn apply(self, csi: &ComplexCsi) -> Result<Vec<Array2<f64>>> {
        let mut planes = Vec::with_capacity(2);
        if self.uses_amplitude() {
            planes.push(amplitude(csi)?.into_values());
        }
        match self {
            PreprocMethod::AmpOnly => {}
            PreprocMethod::PhaseUnwrapped | PreprocMethod::AmpPhaseUnwrapped => {
                planes.push(unwrap_temporal(&raw_phase(csi)?)?.into_values());
            }
            PreprocMethod::PhaseSanitized | PreprocMethod::AmpPhaseSanitized => {
                let (san, _) = sanitize(&unwrap_temporal(&raw_phase(csi)?)?)?;
                planes.push(san.into_values());
            }
        }
        Ok(planes)
    }
}

impl fmt::Display for PreprocMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodTiming {
    pub method: PreprocMethod,
    /// Mean over runs of milliseconds per sample.
    pub mean_ms: f64,
    /// Sample standard deviation over runs.
    pub std_ms: f64,
    /// `mean_ms` relative to amplitude-only.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub runs: usize,
    pub samples: usize,
    pub methods: Vec<MethodTiming>,
    /// Per-sample time of a pipeline that only touches the data, in ms.
    pub noop_ms: f64,
}

impl BenchResult {
    pub fn timing(&self, method: PreprocMethod) -> &MethodTiming {
        self.methods
            .iter()
            .find(|m| m.method == method)
            .expect("every method is timed")
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["method", "mean_ms_per_sample", "sd_ms", "ratio_vs_amp"])?;
        for m in &self.methods {
            w.write_record([
                m.method.name().to_string(),
                format!("{:.4}", m.mean_ms),
                format!("{:.4}", m.std_ms),
                format!("{:.2}", m.ratio),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

impl fmt::Display for BenchResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<18} {:>18} {:>10}   ({} samples, {} runs)",
            "method", "ms/sample", "x vs amp", self.samples, self.runs
        )?;
        for m in &self.methods {
            writeln!(
                f,
                "{:<18} {:>10.4} ± {:<6.4} {:>9.2}",
                m.method.name(),
                m.mean_ms,
                m.std_ms,
                m.ratio
            )?;
        }
        write!(f, "{:<18} {:>10.4}", "loop overhead", self.noop_ms)
    }
}

fn time_pass(dataset: &Dataset, mut work: impl FnMut(&ComplexCsi) -> Result<()>) -> Result<f64> {
    let start = Instant::now();
    for sample in &dataset.samples {
        for ch in &sample.channels {
            work(ch)?;
        }
    }
    Ok(start.elapsed().as_secs_f64() * 1e3 / dataset.len() as f64)
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Times every method over the whole (already loaded) dataset on the calling
/// thread: one warm-up pass, then `runs` timed passes.
pub fn bench_preprocessing(dataset: &Dataset, runs: usize) -> Result<BenchResult> {
    if dataset.is_empty() {
        return Err(Error::Data("cannot benchmark an empty dataset".into()));
    }
    if runs == 0 {
        return Err(Error::Config("benchmark needs at least one run".into()));
    }
    let pass = |method: PreprocMethod| {
        move |csi: &ComplexCsi| {
            black_box(method.apply(black_box(csi))?);
            Ok(())
        }
    };
    for method in PreprocMethod::ALL {
        time_pass(dataset, pass(method))?;
    }
    // Methods are interleaved within each run so slow drift (frequency
    // scaling, background load) affects all of them alike.
    let mut per_run = vec![Vec::with_capacity(runs); PreprocMethod::ALL.len()];
    for _ in 0..runs {
        for (i, method) in PreprocMethod::ALL.into_iter().enumerate() {
            per_run[i].push(time_pass(dataset, pass(method))?);
        }
    }
    let timings: Vec<_> = PreprocMethod::ALL
        .into_iter()
        .zip(per_run.iter().map(|xs| mean_std(xs)))
        .collect();
    let noop = (0..runs)
        .map(|_| {
            time_pass(dataset, |csi| {
                black_box(csi.real()[[0, 0]]);
                Ok(())
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let amp_mean = timings[0].1 .0;
    Ok(BenchResult {
        runs,
        samples: dataset.len(),
        methods: timings
            .into_iter()
            .map(|(method, (mean_ms, std_ms))| MethodTiming {
                method,
                mean_ms,
                std_ms,
                ratio: mean_ms / amp_mean,
            })
            .collect(),
        noop_ms: mean_std(&noop).0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate_dataset, SynthConfig};

    #[test]
    fn amp_only_ratio_is_one() {
        let ds = generate_dataset(&SynthConfig {
            subcarriers: 8,
            timestamps: 16,
            samples_per_cell: 1,
            ..SynthConfig::default()
        })
        .unwrap();
        let r = bench_preprocessing(&ds, 2).unwrap();
        assert_eq!(r.timing(PreprocMethod::AmpOnly).ratio, 1.0);
        assert!(r.methods.iter().all(|m| m.mean_ms > 0.0));
    }

    #[test]
    fn empty_dataset_rejected() {
        let ds = Dataset::new(
            crate::csi::CsiShape {
                subcarriers: 2,
                timestamps: 1,
                channels: 1,
            },
            Vec::new(),
        )
        .unwrap();
        assert!(matches!(bench_preprocessing(&ds, 5), Err(Error::Data(_))));
    }
}
