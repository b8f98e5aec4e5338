use std::f64::consts::PI;

use ndarray::Array2;
use proptest::prelude::*;

use phasefuse::phase::remove_linear_trend;
use phasefuse::{sanitize, unwrap_temporal, PhaseMatrix, PhaseState};

const TWO_PI: f64 = 2.0 * PI;

fn matrix(s: usize, t: usize, lo: f64, hi: f64) -> impl Strategy<Value = Array2<f64>> {
    prop::collection::vec(lo..hi, s * t)
        .prop_map(move |v| Array2::from_shape_vec((s, t), v).unwrap())
}

fn raw_phase() -> impl Strategy<Value = Array2<f64>> {
    (2usize..12, 1usize..40).prop_flat_map(|(s, t)| matrix(s, t, -PI + 1e-12, PI))
}

fn unwrapped_phase() -> impl Strategy<Value = Array2<f64>> {
    (2usize..12, 1usize..20).prop_flat_map(|(s, t)| matrix(s, t, -50.0, 50.0))
}

fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

proptest! {
    #[test]
    fn unwrap_is_congruent_and_continuous(raw in raw_phase()) {
        let out = unwrap_temporal(&PhaseMatrix::raw(raw.clone()).unwrap()).unwrap();
        prop_assert_eq!(out.state(), PhaseState::Unwrapped);
        let u = out.values();
        for ((k, t), v) in u.indexed_iter() {
            let turns = (v - raw[[k, t]]) / TWO_PI;
            prop_assert!((turns - turns.round()).abs() * TWO_PI < 1e-9);
            if t == 0 {
                prop_assert_eq!(*v, raw[[k, 0]]);
            } else {
                prop_assert!((v - u[[k, t - 1]]).abs() <= PI + 1e-9);
            }
        }
    }

    #[test]
    fn unwrap_of_continuous_series_recovers_it(
        start in -PI + 1e-6..PI,
        steps in prop::collection::vec(-3.0f64..3.0, 1..60),
    ) {
        let mut truth = vec![start];
        for d in &steps {
            truth.push(truth.last().unwrap() + d);
        }
        let wrapped: Vec<f64> = truth.iter().map(|&x| phasefuse::csi::wrap_phase(x)).collect();
        let raw = Array2::from_shape_vec((2, truth.len()), [wrapped.clone(), wrapped].concat()).unwrap();
        let out = unwrap_temporal(&PhaseMatrix::raw(raw).unwrap()).unwrap();
        for (got, want) in out.values().row(0).iter().zip(&truth) {
            prop_assert!((got - want).abs() < 1e-9);
        }
    }

    #[test]
    fn sanitized_columns_are_orthogonal_to_trend(u in unwrapped_phase()) {
        let m = PhaseMatrix::with_state(u, PhaseState::Unwrapped).unwrap();
        let (san, trend) = sanitize(&m).unwrap();
        let s = san.dim().0 as f64;
        prop_assert_eq!(trend.alpha.len(), san.dim().1);
        for col in san.values().columns() {
            let sum: f64 = col.sum();
            let ksum: f64 = col.iter().enumerate().map(|(i, v)| (i as f64 + 1.0) * v).sum();
            prop_assert!(sum.abs() < 1e-6 * s);
            prop_assert!(ksum.abs() < 1e-6 * s * s);
        }
    }

    #[test]
    fn sanitize_is_idempotent(u in unwrapped_phase()) {
        let (once, _) = remove_linear_trend(&u).unwrap();
        let again = PhaseMatrix::with_state(once.clone(), PhaseState::Unwrapped).unwrap();
        let (twice, trend) = sanitize(&again).unwrap();
        prop_assert!(max_abs_diff(&once, twice.values()) < 1e-9);
        prop_assert!(trend.alpha.iter().chain(&trend.beta).all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn sanitize_ignores_added_linear_terms(
        u in unwrapped_phase(),
        coeffs in prop::collection::vec((-2.0f64..2.0, -10.0f64..10.0), 20),
    ) {
        let mut shifted = u.clone();
        for (t, mut col) in shifted.columns_mut().into_iter().enumerate() {
            let (a, b) = coeffs[t];
            for (i, v) in col.iter_mut().enumerate() {
                *v += a * (i as f64 + 1.0) + b;
            }
        }
        let (base, _) = remove_linear_trend(&u).unwrap();
        let (moved, _) = remove_linear_trend(&shifted).unwrap();
        prop_assert!(max_abs_diff(&base, &moved) < 1e-6);
    }

    #[test]
    fn exactly_linear_columns_sanitize_to_zero(
        coeffs in prop::collection::vec((-3.0f64..3.0, -20.0f64..20.0), 1..30),
        s in 2usize..64,
    ) {
        let u = Array2::from_shape_fn((s, coeffs.len()), |(k, t)| {
            coeffs[t].0 * (k as f64 + 1.0) + coeffs[t].1
        });
        let m = PhaseMatrix::with_state(u, PhaseState::Unwrapped).unwrap();
        let (san, trend) = sanitize(&m).unwrap();
        prop_assert!(san.values().iter().all(|v| v.abs() < 1e-9));
        for (t, (a, b)) in coeffs.iter().enumerate() {
            prop_assert!((trend.alpha[t] - a).abs() < 1e-9);
            prop_assert!((trend.beta[t] - b).abs() < 1e-8);
        }
    }
}

#[test]
fn sanitize_rejects_raw_and_sanitized_states() {
    let raw = PhaseMatrix::raw(Array2::zeros((3, 2))).unwrap();
    assert!(sanitize(&raw).is_err());
    let san = PhaseMatrix::with_state(Array2::zeros((3, 2)), PhaseState::Sanitized).unwrap();
    assert!(sanitize(&san).is_err());
    assert!(unwrap_temporal(&san).is_err());
}
