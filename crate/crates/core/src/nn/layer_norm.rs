//! Layer normalization across subcarriers.

use ndarray::Array2;

use super::params::{ParamId, ParamStore};
use super::tape::{NodeId, Tape};
use crate::error::{Error, Result};

pub const DEFAULT_EPS: f64 = 1e-5;

/// Standalone parameters for [`layer_norm`].
#[derive(Debug, Clone, PartialEq)]
pub struct LayerNormParams {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub epsilon: f64,
}

impl LayerNormParams {
    pub fn identity(width: usize) -> Self {
        Self {
            gamma: vec![1.0; width],
            beta: vec![0.0; width],
            epsilon: DEFAULT_EPS,
        }
    }
}

/// `gamma * (x - mean) / sqrt(var + eps) + beta` with population variance.
pub fn layer_norm(p: &LayerNormParams, x: &[f64]) -> Result<Vec<f64>> {
    if p.gamma.len() != x.len() || p.beta.len() != x.len() {
        return Err(Error::Shape(format!(
            "layer_norm: input {} vs gamma {} / beta {}",
            x.len(),
            p.gamma.len(),
            p.beta.len()
        )));
    }
    if x.is_empty() {
        return Err(Error::EmptyInput("layer_norm input"));
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let inv = 1.0 / (var + p.epsilon).sqrt();
    Ok(x.iter()
        .zip(p.gamma.iter().zip(&p.beta))
        .map(|(v, (g, b))| g * (v - mean) * inv + b)
        .collect())
}

/// Learnable layer norm over contiguous feature groups.
///
/// With several receiver channels the feature row is `n_groups` blocks of
/// `group` subcarriers; statistics are taken per block, gamma and beta span
/// the whole row.
#[derive(Debug, Clone, Copy)]
pub struct LayerNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub group: usize,
    pub eps: f64,
}

impl LayerNorm {
    pub fn new(store: &mut ParamStore, prefix: &str, width: usize, group: usize) -> Self {
        assert!(
            group > 0 && width.is_multiple_of(group),
            "width must be a multiple of group"
        );
        Self {
            gamma: store.add_vector(format!("{prefix}.gamma"), vec![1.0; width]),
            beta: store.add_vector(format!("{prefix}.beta"), vec![0.0; width]),
            group,
            eps: DEFAULT_EPS,
        }
    }
}

impl Tape<'_> {
    pub fn layer_norm(&mut self, x: NodeId, ln: &LayerNorm) -> Result<NodeId> {
        let xv = self.value(x);
        let gamma = self.params.get(ln.gamma);
        let beta = self.params.get(ln.beta);
        let (rows, width) = xv.dim();
        if gamma.ncols() != width {
            return Err(Error::Shape(format!(
                "layer_norm: input width {width} vs gamma {}",
                gamma.ncols()
            )));
        }
        let group = ln.group;
        let groups = width / group;
        let gamma = gamma.row(0).to_vec();
        let beta = beta.row(0).to_vec();
        let mut xhat = Array2::zeros((rows, width));
        let mut inv_std = Array2::zeros((rows, groups));
        let mut y = Array2::zeros((rows, width));
        for r in 0..rows {
            let xr = xv.row(r);
            let xr = xr.as_slice().expect("contiguous");
            let mut xh = xhat.row_mut(r);
            let xh = xh.as_slice_mut().expect("contiguous");
            let mut yr = y.row_mut(r);
            let yr = yr.as_slice_mut().expect("contiguous");
            for gi in 0..groups {
                let span = gi * group..(gi + 1) * group;
                let seg = &xr[span.clone()];
                let mean = seg.iter().sum::<f64>() / group as f64;
                let var = seg.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / group as f64;
                let inv = 1.0 / (var + ln.eps).sqrt();
                inv_std[[r, gi]] = inv;
                for j in span {
                    let h = (xr[j] - mean) * inv;
                    xh[j] = h;
                    yr[j] = gamma[j] * h + beta[j];
                }
            }
        }
        let out = self.next_id();
        let ln = *ln;
        Ok(self.record(
            y,
            Box::new(move |ctx| {
                let Some(dy) = ctx.take(out) else { return };
                let gamma = ctx.params.get(ln.gamma).row(0).to_vec();
                let mut dgamma = Array2::zeros((1, width));
                let mut dbeta = Array2::zeros((1, width));
                let mut dx = Array2::zeros((rows, width));
                let mut dxh = vec![0.0; group];
                for r in 0..rows {
                    for gi in 0..groups {
                        let base = gi * group;
                        let mut mean_d = 0.0;
                        let mut mean_dx = 0.0;
                        for i in 0..group {
                            let j = base + i;
                            let d = dy[[r, j]];
                            dgamma[[0, j]] += d * xhat[[r, j]];
                            dbeta[[0, j]] += d;
                            dxh[i] = d * gamma[j];
                            mean_d += dxh[i];
                            mean_dx += dxh[i] * xhat[[r, j]];
                        }
                        mean_d /= group as f64;
                        mean_dx /= group as f64;
                        let inv = inv_std[[r, gi]];
                        for i in 0..group {
                            let j = base + i;
                            dx[[r, j]] = inv * (dxh[i] - mean_d - xhat[[r, j]] * mean_dx);
                        }
                    }
                }
                ctx.accumulate_param(ln.gamma, &dgamma);
                ctx.accumulate_param(ln.beta, &dbeta);
                ctx.accumulate(x, dx);
            }),
        ))
    }
}
