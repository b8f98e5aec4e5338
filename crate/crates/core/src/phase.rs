//! Phase calibration: temporal unwrapping, per-packet linear sanitization,
//! and assembly of the four model input configurations.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use ndarray::{s, Array1, Array2, Array3, ArrayView1};

use crate::csi::{self, AmplitudeMatrix, LabeledSample, PhaseMatrix, PhaseState};
use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * PI;

/// Removes +-2pi jumps along time, independently for every subcarrier.
///
/// A correction is applied only when a consecutive difference is strictly
/// larger than pi in magnitude; the first packet is left as is.
pub fn unwrap_temporal(phase: &PhaseMatrix) -> Result<PhaseMatrix> {
    phase.expect_state(PhaseState::Raw)?;
    let mut out = phase.values().clone();
    for mut row in out.rows_mut() {
        unwrap_in_place(row.as_slice_mut().expect("standard layout"));
    }
    Ok(PhaseMatrix::from_trusted(out, PhaseState::Unwrapped))
}

/// Unwraps a single series in place.
pub fn unwrap_in_place(series: &mut [f64]) {
    let Some(&first) = series.first() else {
        return;
    };
    let mut prev_raw = first;
    let mut correction = 0.0;
    for x in series.iter_mut().skip(1) {
        let raw = *x;
        let d = raw - prev_raw;
        if d.abs() > PI {
            correction -= TWO_PI * (d / TWO_PI).round();
        }
        prev_raw = raw;
        *x = raw + correction;
    }
}

/// Per-packet trend parameters: `phi_t ~ alpha_t * k + beta_t`, `k = 1..=S`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrendParams {
    pub alpha: Array1<f64>,
    pub beta: Array1<f64>,
}

/// Closed-form least-squares line through `(k, phase[k-1])` for `k = 1..=S`.
///
/// Uses the analytic inverse of `X^T X` in centered form, which is the same
/// solution with less cancellation.
pub fn fit_linear_trend(phase_col: ArrayView1<f64>) -> Result<(f64, f64)> {
    let s = phase_col.len();
    if s < 2 {
        return Err(Error::Underdetermined(s));
    }
    let n = s as f64;
    let k_mean = (n + 1.0) / 2.0;
    let k_var_sum = n * (n * n - 1.0) / 12.0; // sum (k - k_mean)^2
    let mut y_sum = 0.0;
    let mut ky_sum = 0.0;
    for (i, &y) in phase_col.iter().enumerate() {
        y_sum += y;
        ky_sum += (i as f64 + 1.0 - k_mean) * y;
    }
    let alpha = ky_sum / k_var_sum;
    let beta = y_sum / n - alpha * k_mean;
    Ok((alpha, beta))
}

/// Subtracts the fitted per-packet line from every column of an unwrapped phase.
pub fn sanitize(phase: &PhaseMatrix) -> Result<(PhaseMatrix, TrendParams)> {
    phase.expect_state(PhaseState::Unwrapped)?;
    let (out, trend) = remove_linear_trend(phase.values())?;
    Ok((PhaseMatrix::from_trusted(out, PhaseState::Sanitized), trend))
}

/// Column-wise detrending on a plain matrix, regardless of state tags.
pub fn remove_linear_trend(values: &Array2<f64>) -> Result<(Array2<f64>, TrendParams)> {
    let (s, t) = values.dim();
    if s < 2 {
        return Err(Error::Underdetermined(s));
    }
    let mut out = values.clone();
    let mut alpha = Array1::zeros(t);
    let mut beta = Array1::zeros(t);
    let mut column = Array1::zeros(s);
    for ti in 0..t {
        column.assign(&values.column(ti));
        let (a, b) = fit_linear_trend(column.view())?;
        alpha[ti] = a;
        beta[ti] = b;
        for (k, v) in out.column_mut(ti).iter_mut().enumerate() {
            *v -= a * (k as f64 + 1.0) + b;
        }
    }
    Ok((out, TrendParams { alpha, beta }))
}

/// Which representation of a sample is fed to a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum InputConfig {
    /// Config 1: unwrapped phase, no sanitization.
    PhaseOnlyUnwrapped,
    /// Config 2: amplitude.
    AmplitudeOnly,
    /// Config 3: amplitude stacked with unwrapped phase.
    AmpPlusUnwrapped,
    /// Config 4: amplitude stacked with sanitized phase.
    AmpPlusSanitized,
}

impl InputConfig {
    pub const ALL: [InputConfig; 4] = [
        InputConfig::PhaseOnlyUnwrapped,
        InputConfig::AmplitudeOnly,
        InputConfig::AmpPlusUnwrapped,
        InputConfig::AmpPlusSanitized,
    ];

    /// Model channels per receiver channel.
    pub fn channel_multiplier(self) -> usize {
        match self {
            InputConfig::PhaseOnlyUnwrapped | InputConfig::AmplitudeOnly => 1,
            InputConfig::AmpPlusUnwrapped | InputConfig::AmpPlusSanitized => 2,
        }
    }

    /// Column number used in result tables (1-based).
    pub fn column(self) -> usize {
        self as usize + 1
    }

    pub fn is_two_stream(self) -> bool {
        self.channel_multiplier() == 2
    }

    pub fn cli_name(self) -> &'static str {
        match self {
            InputConfig::PhaseOnlyUnwrapped => "phase",
            InputConfig::AmplitudeOnly => "amp",
            InputConfig::AmpPlusUnwrapped => "amp-unw",
            InputConfig::AmpPlusSanitized => "amp-san",
        }
    }

    fn uses_amplitude(self) -> bool {
        self != InputConfig::PhaseOnlyUnwrapped
    }
}

impl fmt::Display for InputConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.cli_name())
    }
}

impl FromStr for InputConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        InputConfig::ALL
            .into_iter()
            .find(|c| c.cli_name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown input config `{s}`")))
    }
}

/// Real tensor `[M, S, T]` ready for a model, laid out modality x subcarrier x time.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInput {
    pub tensor: Array3<f64>,
    pub config: InputConfig,
}

impl ModelInput {
    pub fn channels(&self) -> usize {
        self.tensor.dim().0
    }

    /// Number of receiver channels the tensor was built from.
    pub fn receivers(&self) -> usize {
        self.channels() / self.config.channel_multiplier()
    }
}

/// Builds the input tensor for one receiver channel.
pub fn build_model_input(
    amp: &AmplitudeMatrix,
    raw_phase: &PhaseMatrix,
    config: InputConfig,
) -> Result<ModelInput> {
    if amp.dim() != raw_phase.dim() {
        return Err(Error::Shape(format!(
            "amplitude {:?} vs phase {:?}",
            amp.dim(),
            raw_phase.dim()
        )));
    }
    let planes = planes_for(amp, raw_phase, config)?;
    Ok(ModelInput {
        tensor: stack(&planes),
        config,
    })
}

fn planes_for(
    amp: &AmplitudeMatrix,
    raw_phase: &PhaseMatrix,
    config: InputConfig,
) -> Result<Vec<Array2<f64>>> {
    let mut planes = Vec::with_capacity(2);
    if config.uses_amplitude() {
        planes.push(amp.values().clone());
    }
    match config {
        InputConfig::AmplitudeOnly => {}
        InputConfig::PhaseOnlyUnwrapped | InputConfig::AmpPlusUnwrapped => {
            planes.push(unwrap_temporal(raw_phase)?.into_values());
        }
        InputConfig::AmpPlusSanitized => {
            let (san, _) = sanitize(&unwrap_temporal(raw_phase)?)?;
            planes.push(san.into_values());
        }
    }
    Ok(planes)
}

fn stack(planes: &[Array2<f64>]) -> Array3<f64> {
    let (s, t) = planes[0].dim();
    let mut out = Array3::zeros((planes.len(), s, t));
    for (i, p) in planes.iter().enumerate() {
        out.slice_mut(s![i, .., ..]).assign(p);
    }
    out
}

/// Preprocesses every receiver channel of a sample and stacks the results,
/// amplitude before phase within each receiver.
pub fn preprocess_sample(sample: &LabeledSample, config: InputConfig) -> Result<ModelInput> {
    let mut planes = Vec::with_capacity(sample.channels.len() * config.channel_multiplier());
    for ch in &sample.channels {
        let amp = if config.uses_amplitude() {
            csi::amplitude(ch)?
        } else {
            AmplitudeMatrix::new(Array2::zeros((ch.subcarriers(), ch.timestamps())))?
        };
        let phase = if config == InputConfig::AmplitudeOnly {
            PhaseMatrix::from_trusted(
                Array2::zeros((ch.subcarriers(), ch.timestamps())),
                PhaseState::Raw,
            )
        } else {
            csi::raw_phase(ch)?
        };
        planes.extend(planes_for(&amp, &phase, config)?);
    }
    Ok(ModelInput {
        tensor: stack(&planes),
        config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use ndarray::array;

    fn raw_row(v: &[f64]) -> PhaseMatrix {
        PhaseMatrix::raw(Array2::from_shape_vec((1, v.len()), v.to_vec()).unwrap()).unwrap()
    }

    #[test]
    fn unwrap_corrects_single_jump() {
        let out = unwrap_temporal(&raw_row(&[0.1, 3.0, -3.0])).unwrap();
        let v = out.values();
        assert_eq!(v[[0, 0]], 0.1);
        assert_eq!(v[[0, 1]], 3.0);
        assert!((v[[0, 2]] - 3.28318531).abs() < 1e-8);
        assert_eq!(out.state(), PhaseState::Unwrapped);
    }

    #[test]
    fn unwrap_leaves_constant_series() {
        let out = unwrap_temporal(&raw_row(&[1.0, 1.0, 1.0])).unwrap();
        assert_eq!(out.values(), &array![[1.0, 1.0, 1.0]]);
    }

    #[test]
    fn unwrap_leaves_exact_pi_difference() {
        let out = unwrap_temporal(&raw_row(&[0.0, PI, 0.0])).unwrap();
        assert_eq!(out.values(), &array![[0.0, PI, 0.0]]);
    }

    #[test]
    fn unwrap_requires_raw_state() {
        let un = unwrap_temporal(&raw_row(&[0.0, 1.0])).unwrap();
        assert!(matches!(
            unwrap_temporal(&un),
            Err(Error::PhaseState { .. })
        ));
    }

    #[test]
    fn fit_examples() {
        let (a, b) = fit_linear_trend(array![2.0, 4.0, 6.0].view()).unwrap();
        assert!((a - 2.0).abs() < 1e-12 && b.abs() < 1e-12);
        let (a, b) = fit_linear_trend(array![1.0, 1.0, 1.0].view()).unwrap();
        assert!(a.abs() < 1e-12 && (b - 1.0).abs() < 1e-12);
        assert!(matches!(
            fit_linear_trend(array![1.0].view()),
            Err(Error::Underdetermined(1))
        ));
    }

    /// Normal equations solved by Cramer's rule, plus a coarse-to-fine grid
    /// search over (alpha, beta), as two independent routes.
    fn oracle_fit(y: &[f64]) -> (f64, f64) {
        let n = y.len() as f64;
        let (mut sk, mut skk, mut sy, mut sky) = (0.0, 0.0, 0.0, 0.0);
        for (i, v) in y.iter().enumerate() {
            let k = i as f64 + 1.0;
            sk += k;
            skk += k * k;
            sy += v;
            sky += k * v;
        }
        let det = n * skk - sk * sk;
        ((n * sky - sk * sy) / det, (skk * sy - sk * sky) / det)
    }

    fn grid_fit(y: &[f64]) -> (f64, f64) {
        let sse = |a: f64, b: f64| {
            y.iter()
                .enumerate()
                .map(|(i, v)| (v - a * (i as f64 + 1.0) - b).powi(2))
                .sum::<f64>()
        };
        let (mut ca, mut cb, mut span) = (0.0, 0.0, 8.0);
        for _ in 0..30 {
            let mut best = (f64::INFINITY, ca, cb);
            for i in -20..=20 {
                for j in -20..=20 {
                    let a = ca + span * i as f64 / 20.0;
                    let b = cb + span * j as f64 / 20.0;
                    let e = sse(a, b);
                    if e < best.0 {
                        best = (e, a, b);
                    }
                }
            }
            ca = best.1;
            cb = best.2;
            span /= 4.0;
        }
        (ca, cb)
    }

    #[test]
    fn fit_matches_normal_equations_and_grid_search() {
        let y = [0.0, 1.0, 3.0];
        let (a, b) = fit_linear_trend(ndarray::aview1(&y)).unwrap();
        let (oa, ob) = oracle_fit(&y);
        let (ga, gb) = grid_fit(&y);
        assert!((oa - 1.5).abs() < 1e-12 && (ob + 5.0 / 3.0).abs() < 1e-12);
        assert!((ga - 1.5).abs() < 1e-4 && (gb + 1.6667).abs() < 1e-4);
        assert!((a - 1.5).abs() < 1e-4 && (b + 1.6667).abs() < 1e-4);
        assert!((a - oa).abs() < 1e-12 && (b - ob).abs() < 1e-12);
    }

    #[test]
    fn sanitize_exact_line_gives_zero() {
        let mut v = Array2::zeros((5, 4));
        for t in 0..4 {
            for k in 0..5 {
                v[[k, t]] = (t as f64 - 1.5) * (k as f64 + 1.0) + 0.3 * t as f64;
            }
        }
        let (out, trend) =
            sanitize(&PhaseMatrix::with_state(v, PhaseState::Unwrapped).unwrap()).unwrap();
        assert!(out.values().iter().all(|x| x.abs() < 1e-9));
        assert!((trend.alpha[0] + 1.5).abs() < 1e-12);
        assert!((trend.beta[3] - 0.9).abs() < 1e-12);
    }

    #[test]
    fn sanitize_equals_per_column_fit() {
        let mut rng = SeededRng::new(11);
        let v = Array2::from_shape_simple_fn((8, 5), || rng.uniform_range(-10.0, 10.0));
        let (out, _) =
            sanitize(&PhaseMatrix::with_state(v.clone(), PhaseState::Unwrapped).unwrap()).unwrap();
        for t in 0..5 {
            let col: Vec<f64> = v.column(t).to_vec();
            let (a, b) = oracle_fit(&col);
            for k in 0..8 {
                let expect = col[k] - a * (k as f64 + 1.0) - b;
                assert!((out.values()[[k, t]] - expect).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn sanitize_rejects_raw() {
        assert!(matches!(
            sanitize(&raw_row(&[0.0, 1.0])),
            Err(Error::PhaseState { .. })
        ));
    }

    #[test]
    fn amplitude_only_config_is_identity() {
        let amp = AmplitudeMatrix::new(array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]).unwrap();
        let ph = PhaseMatrix::raw(Array2::zeros((3, 2))).unwrap();
        let m = build_model_input(&amp, &ph, InputConfig::AmplitudeOnly).unwrap();
        assert_eq!(m.channels(), 1);
        assert_eq!(m.tensor.slice(s![0, .., ..]), amp.values());
    }

    #[test]
    fn amp_plus_sanitized_of_linear_phase() {
        let amp = AmplitudeMatrix::new(array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]).unwrap();
        let ph = PhaseMatrix::raw(array![[0.1, -0.2], [0.3, 0.0], [0.5, 0.2]]).unwrap();
        let m = build_model_input(&amp, &ph, InputConfig::AmpPlusSanitized).unwrap();
        assert_eq!(m.tensor.dim(), (2, 3, 2));
        assert_eq!(m.tensor.slice(s![0, .., ..]), amp.values());
        assert!(m
            .tensor
            .slice(s![1, .., ..])
            .iter()
            .all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn amp_plus_unwrapped_is_continuous() {
        let amp = AmplitudeMatrix::new(Array2::ones((2, 3))).unwrap();
        let ph = PhaseMatrix::raw(array![[0.1, 3.0, -3.0], [0.0, 0.0, 0.0]]).unwrap();
        let m = build_model_input(&amp, &ph, InputConfig::AmpPlusUnwrapped).unwrap();
        assert!((m.tensor[[1, 0, 2]] - 3.28318531).abs() < 1e-8);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let amp = AmplitudeMatrix::new(Array2::ones((2, 3))).unwrap();
        let ph = PhaseMatrix::raw(Array2::zeros((3, 3))).unwrap();
        assert!(matches!(
            build_model_input(&amp, &ph, InputConfig::AmplitudeOnly),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn config_names_round_trip() {
        for c in InputConfig::ALL {
            assert_eq!(c.cli_name().parse::<InputConfig>().unwrap(), c);
        }
        assert_eq!(InputConfig::AmpPlusSanitized.column(), 4);
    }
}
