//! Stream-level modality dropout.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Which stream, if any, was zeroed for a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskRecord {
    None,
    Amplitude,
    Phase,
}

/// With probability `p`, picks one stream uniformly; never both.
pub fn draw_modality_mask(p: f64, rng: &mut SeededRng) -> MaskRecord {
    if p <= 0.0 || !rng.bernoulli(p) {
        return MaskRecord::None;
    }
    if rng.bernoulli(0.5) {
        MaskRecord::Amplitude
    } else {
        MaskRecord::Phase
    }
}

/// Applies modality dropout to one sample's normalized streams (`T x F` each).
/// The chosen stream is zeroed at every time step.
pub fn apply_modality_dropout(
    train_mode: bool,
    amp_norm: &Array2<f64>,
    phase_norm: &Array2<f64>,
    p: f64,
    rng: &mut SeededRng,
) -> Result<(Array2<f64>, Array2<f64>, MaskRecord)> {
    if !train_mode {
        return Err(Error::Mode("modality dropout is training-only"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Config(format!(
            "modality dropout {p} outside [0, 1]"
        )));
    }
    let record = draw_modality_mask(p, rng);
    let mut a = amp_norm.clone();
    let mut ph = phase_norm.clone();
    match record {
        MaskRecord::Amplitude => a.fill(0.0),
        MaskRecord::Phase => ph.fill(0.0),
        MaskRecord::None => {}
    }
    Ok((a, ph, record))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_probability_passes_through() {
        let a = Array2::from_elem((4, 3), 1.5);
        let p = Array2::from_elem((4, 3), -0.5);
        let mut rng = SeededRng::new(1);
        let (a2, p2, rec) = apply_modality_dropout(true, &a, &p, 0.0, &mut rng).unwrap();
        assert_eq!((a2, p2, rec), (a, p, MaskRecord::None));
    }

    #[test]
    fn eval_mode_is_rejected() {
        let a = Array2::zeros((1, 1));
        let mut rng = SeededRng::new(1);
        assert!(matches!(
            apply_modality_dropout(false, &a, &a, 0.1, &mut rng),
            Err(Error::Mode(_))
        ));
    }

    #[test]
    fn certain_drop_masks_exactly_one_stream() {
        let a = Array2::from_elem((5, 2), 1.0);
        let p = Array2::from_elem((5, 2), 2.0);
        let mut rng = SeededRng::new(9);
        for _ in 0..100 {
            let (a2, p2, rec) = apply_modality_dropout(true, &a, &p, 1.0, &mut rng).unwrap();
            let a_zero = a2.iter().all(|v| *v == 0.0);
            let p_zero = p2.iter().all(|v| *v == 0.0);
            assert!(a_zero ^ p_zero);
            assert_eq!(a_zero, rec == MaskRecord::Amplitude);
        }
    }
}
