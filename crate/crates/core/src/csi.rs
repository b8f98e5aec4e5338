//! CSI data model and amplitude/phase decomposition.
//!
//! Matrices are subcarrier-major: row `k` is a subcarrier, column `t` a packet.
//! Complex samples are held in `f32` (the on-disk precision); everything
//! derived from them is computed in `f64`.

use std::f64::consts::PI;
use std::fmt;

use ndarray::{Array2, Zip};

use crate::error::{Error, Result};

/// Complex channel matrix `H` of shape `S x T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexCsi {
    real: Array2<f32>,
    imag: Array2<f32>,
}

impl ComplexCsi {
    pub fn new(real: Array2<f32>, imag: Array2<f32>) -> Result<Self> {
        if real.dim() != imag.dim() {
            return Err(Error::Shape(format!(
                "real part {:?} vs imaginary part {:?}",
                real.dim(),
                imag.dim()
            )));
        }
        let (s, t) = real.dim();
        if s < 2 || t < 1 {
            return Err(Error::Shape(format!(
                "CSI needs S >= 2 and T >= 1, got S={s}, T={t}"
            )));
        }
        for (((k, t), re), im) in real.indexed_iter().zip(imag.iter()) {
            if !re.is_finite() || !im.is_finite() {
                return Err(Error::NonFinite { k, t });
            }
        }
        Ok(Self { real, imag })
    }

    /// Builds from polar form, rounding to storage precision.
    pub fn from_polar(amplitude: &Array2<f64>, phase: &Array2<f64>) -> Result<Self> {
        if amplitude.dim() != phase.dim() {
            return Err(Error::Shape(format!(
                "amplitude {:?} vs phase {:?}",
                amplitude.dim(),
                phase.dim()
            )));
        }
        let real = Zip::from(amplitude)
            .and(phase)
            .map_collect(|&a, &p| (a * p.cos()) as f32);
        let imag = Zip::from(amplitude)
            .and(phase)
            .map_collect(|&a, &p| (a * p.sin()) as f32);
        Self::new(real, imag)
    }

    pub fn subcarriers(&self) -> usize {
        self.real.nrows()
    }

    pub fn timestamps(&self) -> usize {
        self.real.ncols()
    }

    pub fn real(&self) -> &Array2<f32> {
        &self.real
    }

    pub fn imag(&self) -> &Array2<f32> {
        &self.imag
    }
}

/// Amplitude matrix `A`, nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeMatrix(Array2<f64>);

impl AmplitudeMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if let Some(((k, t), _)) = values
            .indexed_iter()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::NonFinite { k, t });
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_values(self) -> Array2<f64> {
        self.0
    }

    pub fn dim(&self) -> (usize, usize) {
        self.0.dim()
    }
}

/// Processing stage of a phase matrix. Transitions only go forward.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseState {
    Raw,
    Unwrapped,
    Sanitized,
}

impl PhaseState {
    pub fn name(self) -> &'static str {
        match self {
            PhaseState::Raw => "raw",
            PhaseState::Unwrapped => "unwrapped",
            PhaseState::Sanitized => "sanitized",
        }
    }
}

impl fmt::Display for PhaseState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Phase matrix in radians tagged with its processing stage.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMatrix {
    values: Array2<f64>,
    state: PhaseState,
}

impl PhaseMatrix {
    /// Wrapped phase; every entry must lie in (-pi, pi].
    pub fn raw(values: Array2<f64>) -> Result<Self> {
        if let Some(((k, t), v)) = values
            .indexed_iter()
            .find(|(_, v)| !v.is_finite() || **v <= -PI || **v > PI)
        {
            return Err(Error::Data(format!(
                "raw phase {v} at ({k}, {t}) outside (-pi, pi]"
            )));
        }
        Ok(Self {
            values,
            state: PhaseState::Raw,
        })
    }

    /// Constructs a matrix in an arbitrary state. Only finiteness is checked.
    pub fn with_state(values: Array2<f64>, state: PhaseState) -> Result<Self> {
        if let Some(((k, t), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { k, t });
        }
        Ok(Self { values, state })
    }

    pub(crate) fn from_trusted(values: Array2<f64>, state: PhaseState) -> Self {
        Self { values, state }
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn state(&self) -> PhaseState {
        self.state
    }

    pub fn dim(&self) -> (usize, usize) {
        self.values.dim()
    }

    pub(crate) fn expect_state(&self, expected: PhaseState) -> Result<()> {
        if self.state != expected {
            return Err(Error::PhaseState {
                expected: expected.name(),
                found: self.state.name(),
            });
        }
        Ok(())
    }
}

/// Execution speed of a recorded activity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Velocity {
    V1,
    V2,
    V3,
}

impl Velocity {
    pub const ALL: [Velocity; 3] = [Velocity::V1, Velocity::V2, Velocity::V3];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Velocity::V1 => "V1",
            Velocity::V2 => "V2",
            Velocity::V3 => "V3",
        }
    }
}

impl fmt::Display for Velocity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Velocity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "v1" => Ok(Velocity::V1),
            "v2" => Ok(Velocity::V2),
            "v3" => Ok(Velocity::V3),
            other => Err(Error::Usage(format!("unknown velocity `{other}`"))),
        }
    }
}

/// One recording: CSI from each receiver channel plus its activity label and speed.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub channels: Vec<ComplexCsi>,
    pub label: usize,
    pub velocity: Velocity,
}

impl LabeledSample {
    pub fn new(channels: Vec<ComplexCsi>, label: usize, velocity: Velocity) -> Result<Self> {
        let first = channels
            .first()
            .ok_or(Error::EmptyInput("sample without channels"))?;
        let shape = (first.subcarriers(), first.timestamps());
        if channels
            .iter()
            .any(|c| (c.subcarriers(), c.timestamps()) != shape)
        {
            return Err(Error::Shape(
                "channels of one sample differ in shape".into(),
            ));
        }
        Ok(Self {
            channels,
            label,
            velocity,
        })
    }

    /// `(S, T, n_channels)`.
    pub fn shape(&self) -> (usize, usize, usize) {
        let c = &self.channels[0];
        (c.subcarriers(), c.timestamps(), self.channels.len())
    }
}

/// Per-sample tensor shape shared by every sample of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CsiShape {
    pub subcarriers: usize,
    pub timestamps: usize,
    pub channels: usize,
}

/// A homogeneous collection of labeled samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub shape: CsiShape,
    pub samples: Vec<LabeledSample>,
}

impl Dataset {
    /// Checks that every sample matches `shape`.
    pub fn new(shape: CsiShape, samples: Vec<LabeledSample>) -> Result<Self> {
        if let Some((i, s)) = samples
            .iter()
            .enumerate()
            .find(|(_, s)| s.shape() != (shape.subcarriers, shape.timestamps, shape.channels))
        {
            return Err(Error::Shape(format!(
                "sample {i} has shape {:?}, dataset expects {:?}",
                s.shape(),
                shape
            )));
        }
        Ok(Self { shape, samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            shape: self.shape,
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
        }
    }
}

/// Splits `H` into amplitude and wrapped phase.
///
/// Phase is the four-quadrant arctangent mapped into (-pi, pi]; a zero entry
/// has phase 0.
pub fn decompose(csi: &ComplexCsi) -> Result<(AmplitudeMatrix, PhaseMatrix)> {
    let amp = amplitude(csi)?;
    let phase = raw_phase(csi)?;
    Ok((amp, phase))
}

/// Elementwise `sqrt(re^2 + im^2)`.
///
/// Entries are finite by construction of [`ComplexCsi`], so no check is needed here.
pub fn amplitude(csi: &ComplexCsi) -> Result<AmplitudeMatrix> {
    let amp = Zip::from(&csi.real).and(&csi.imag).map_collect(|&re, &im| {
        let (re, im) = (re as f64, im as f64);
        (re * re + im * im).sqrt()
    });
    Ok(AmplitudeMatrix(amp))
}

/// Wrapped phase in (-pi, pi]; zero entries map to 0.
pub fn raw_phase(csi: &ComplexCsi) -> Result<PhaseMatrix> {
    let phase = Zip::from(&csi.real).and(&csi.imag).map_collect(|&re, &im| {
        if re == 0.0 && im == 0.0 {
            0.0
        } else {
            principal_angle((im as f64).atan2(re as f64))
        }
    });
    Ok(PhaseMatrix::from_trusted(phase, PhaseState::Raw))
}

/// Inverse of [`decompose`] in full precision: `(a cos phi, a sin phi)`.
pub fn recompose(amp: &AmplitudeMatrix, phase: &PhaseMatrix) -> (Array2<f64>, Array2<f64>) {
    let real = Zip::from(amp.values())
        .and(phase.values())
        .map_collect(|&a, &p| a * p.cos());
    let imag = Zip::from(amp.values())
        .and(phase.values())
        .map_collect(|&a, &p| a * p.sin());
    (real, imag)
}

/// Maps an `atan2` result onto (-pi, pi].
fn principal_angle(angle: f64) -> f64 {
    if angle <= -PI {
        angle + 2.0 * PI
    } else {
        angle
    }
}

/// Wraps an arbitrary angle into (-pi, pi].
pub fn wrap_phase(angle: f64) -> f64 {
    let wrapped = angle - 2.0 * PI * ((angle + PI) / (2.0 * PI)).floor();
    // floor puts exact odd multiples of pi at -pi
    if wrapped <= -PI {
        wrapped + 2.0 * PI
    } else if wrapped > PI {
        wrapped - 2.0 * PI
    } else {
        wrapped
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn single(re: f32, im: f32) -> ComplexCsi {
        ComplexCsi::new(array![[re], [0.0]], array![[im], [0.0]]).unwrap()
    }

    #[test]
    fn three_four_five() {
        let (a, p) = decompose(&single(3.0, 4.0)).unwrap();
        assert_eq!(a.values()[[0, 0]], 5.0);
        assert!((p.values()[[0, 0]] - 0.927295218).abs() < 1e-9);
    }

    #[test]
    fn zero_entry_has_zero_phase() {
        let (a, p) = decompose(&single(0.0, 0.0)).unwrap();
        assert_eq!(a.values()[[0, 0]], 0.0);
        assert_eq!(p.values()[[0, 0]], 0.0);
        let (_, p) = decompose(&single(-0.0, -0.0)).unwrap();
        assert_eq!(p.values()[[0, 0]], 0.0);
    }

    #[test]
    fn negative_real_axis_maps_to_plus_pi() {
        let (a, p) = decompose(&single(-1.0, 0.0)).unwrap();
        assert_eq!(a.values()[[0, 0]], 1.0);
        assert_eq!(p.values()[[0, 0]], PI);
        let (_, p) = decompose(&single(-1.0, -0.0)).unwrap();
        assert_eq!(p.values()[[0, 0]], PI);
    }

    #[test]
    fn non_finite_entry_is_rejected_with_position() {
        let err = ComplexCsi::new(array![[0.0, 1.0], [2.0, f32::NAN]], Array2::zeros((2, 2)))
            .unwrap_err();
        assert!(matches!(err, Error::NonFinite { k: 1, t: 1 }));
    }

    #[test]
    fn raw_phase_rejects_minus_pi() {
        assert!(PhaseMatrix::raw(array![[-PI], [0.0]]).is_err());
        assert!(PhaseMatrix::raw(array![[PI], [0.0]]).is_ok());
    }

    #[test]
    fn wrap_phase_range() {
        assert_eq!(wrap_phase(PI), PI);
        assert_eq!(wrap_phase(-PI), PI);
        assert!((wrap_phase(3.0 * PI + 0.5) - (-PI + 0.5)).abs() < 1e-12);
        assert!((wrap_phase(-0.25) + 0.25).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn recompose_inverts_decompose(
            entries in proptest::collection::vec((-1e3f32..1e3, -1e3f32..1e3), 6)
        ) {
            let real = Array2::from_shape_vec((3, 2), entries.iter().map(|e| e.0).collect()).unwrap();
            let imag = Array2::from_shape_vec((3, 2), entries.iter().map(|e| e.1).collect()).unwrap();
            let csi = ComplexCsi::new(real.clone(), imag.clone()).unwrap();
            let (a, p) = decompose(&csi).unwrap();
            for &v in p.values() {
                prop_assert!(v > -PI && v <= PI);
            }
            let (re, im) = recompose(&a, &p);
            for ((r0, r1), (i0, i1)) in real.iter().zip(re.iter()).zip(imag.iter().zip(im.iter())) {
                prop_assert!((*r0 as f64 - r1).abs() < 1e-6);
                prop_assert!((*i0 as f64 - i1).abs() < 1e-6);
            }
        }

        #[test]
        fn wrap_phase_is_congruent(x in -1e4f64..1e4) {
            let w = wrap_phase(x);
            prop_assert!(w > -PI && w <= PI);
            let n = (x - w) / (2.0 * PI);
            prop_assert!((n - n.round()).abs() < 1e-9);
        }
    }
}
