//! Batched tape ops shared by the models.
//!
//! Sequence tensors are time-major matrices: row `t * batch + b` holds the
//! feature vector of batch element `b` at time `t`.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, Axis, Zip};

use super::params::ParamId;
use super::tape::{NodeId, Tape};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `x W^T + b` in row-major layout (a plain `dot` may hand back column-major).
pub(crate) fn affine_rows(x: &Array2<f64>, w: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let mut y = Array2::zeros((x.nrows(), w.nrows()));
    general_mat_mul(1.0, x, &w.t(), 0.0, &mut y);
    y += b;
    y
}

impl Tape<'_> {
    /// `x W^T + b` for `W: out x in`, `b: 1 x out`.
    pub fn affine(&mut self, x: NodeId, w: ParamId, b: ParamId) -> Result<NodeId> {
        let wv = self.params.get(w);
        let xv = self.value(x);
        if xv.ncols() != wv.ncols() || self.params.get(b).ncols() != wv.nrows() {
            return Err(Error::Shape(format!(
                "affine: input width {} vs weight {:?}",
                xv.ncols(),
                wv.dim()
            )));
        }
        let y = affine_rows(xv, wv, self.params.get(b));
        let out = self.next_id();
        Ok(self.record(
            y,
            Box::new(move |ctx| {
                let Some(dy) = ctx.take(out) else { return };
                let xv = ctx.value(x);
                let dw = dy.t().dot(xv);
                let db = dy.sum_axis(Axis(0)).insert_axis(Axis(0));
                let dx = dy.dot(ctx.params.get(w));
                ctx.accumulate_param(w, &dw);
                ctx.accumulate_param(b, &db);
                ctx.accumulate(x, dx);
            }),
        ))
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let y = self.value(x).mapv(|v| v.max(0.0));
        let out = self.next_id();
        self.record(
            y,
            Box::new(move |ctx| {
                let Some(mut dy) = ctx.take(out) else { return };
                Zip::from(&mut dy).and(ctx.value(out)).for_each(|d, &y| {
                    if y <= 0.0 {
                        *d = 0.0
                    }
                });
                ctx.accumulate(x, dy);
            }),
        )
    }

    /// Feature-axis concatenation `[a | b]`.
    pub fn concat_cols(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.nrows() != bv.nrows() {
            return Err(Error::Shape(format!(
                "concat: {} rows vs {} rows",
                av.nrows(),
                bv.nrows()
            )));
        }
        let split = av.ncols();
        let y = ndarray::concatenate![Axis(1), *av, *bv];
        let out = self.next_id();
        Ok(self.record(
            y,
            Box::new(move |ctx| {
                let Some(dy) = ctx.take(out) else { return };
                ctx.accumulate(a, dy.slice(s![.., ..split]).to_owned());
                ctx.accumulate(b, dy.slice(s![.., split..]).to_owned());
            }),
        ))
    }

    /// Inverted dropout: keeps each entry with probability `1 - p`, scaled by `1 / (1 - p)`.
    pub fn dropout(&mut self, x: NodeId, p: f64, rng: &mut SeededRng) -> NodeId {
        if p <= 0.0 {
            return x;
        }
        let keep = 1.0 / (1.0 - p);
        let mask = Array2::from_shape_simple_fn(self.value(x).dim(), || {
            if rng.uniform() < p {
                0.0
            } else {
                keep
            }
        });
        self.apply_mask(x, mask)
    }

    /// Zeroes every row belonging to a batch element whose `keep` flag is false.
    pub fn mask_samples(&mut self, x: NodeId, keep: &[bool]) -> NodeId {
        if keep.iter().all(|&k| k) {
            return x;
        }
        let batch = keep.len();
        let (rows, cols) = self.value(x).dim();
        let mut mask = Array2::ones((rows, cols));
        for (r, mut row) in mask.rows_mut().into_iter().enumerate() {
            if !keep[r % batch] {
                row.fill(0.0);
            }
        }
        self.apply_mask(x, mask)
    }

    fn apply_mask(&mut self, x: NodeId, mask: Array2<f64>) -> NodeId {
        let y = self.value(x) * &mask;
        let out = self.next_id();
        self.record(
            y,
            Box::new(move |ctx| {
                let Some(dy) = ctx.take(out) else { return };
                ctx.accumulate(x, dy * &mask);
            }),
        )
    }

    /// Equal-weight average over time: `(T * batch) x F -> batch x F`.
    pub fn mean_pool(&mut self, x: NodeId, batch: usize) -> Result<NodeId> {
        let xv = self.value(x);
        if batch == 0 || !xv.nrows().is_multiple_of(batch) || xv.nrows() == 0 {
            return Err(Error::Shape(format!(
                "mean_pool: {} rows not divisible into batch {batch}",
                xv.nrows()
            )));
        }
        let steps = xv.nrows() / batch;
        let scale = 1.0 / steps as f64;
        let mut y = Array2::zeros((batch, xv.ncols()));
        for t in 0..steps {
            y += &xv.slice(s![t * batch..(t + 1) * batch, ..]);
        }
        y *= scale;
        let out = self.next_id();
        Ok(self.record(
            y,
            Box::new(move |ctx| {
                let Some(dy) = ctx.take(out) else { return };
                let dy = dy * scale;
                let mut dx = Array2::zeros((steps * batch, dy.ncols()));
                for t in 0..steps {
                    dx.slice_mut(s![t * batch..(t + 1) * batch, ..]).assign(&dy);
                }
                ctx.accumulate(x, dx);
            }),
        ))
    }

    /// Mean cross-entropy over the batch. Returns the scalar loss node and
    /// the softmax probabilities.
    pub fn softmax_cross_entropy(
        &mut self,
        logits: NodeId,
        labels: &[usize],
    ) -> Result<(NodeId, Array2<f64>)> {
        let lv = self.value(logits);
        let (batch, classes) = lv.dim();
        if batch != labels.len() {
            return Err(Error::Shape(format!(
                "{batch} logit rows vs {} labels",
                labels.len()
            )));
        }
        let mut probs = Array2::zeros((batch, classes));
        let mut loss = 0.0;
        for (b, &y) in labels.iter().enumerate() {
            let (l, p) = softmax_cross_entropy(lv.row(b).as_slice().expect("contiguous"), y)?;
            loss += l;
            probs.row_mut(b).assign(&ndarray::Array1::from(p));
        }
        let loss = loss / batch as f64;
        let mut dlogits = probs.clone();
        for (b, &y) in labels.iter().enumerate() {
            dlogits[[b, y]] -= 1.0;
        }
        dlogits /= batch as f64;
        let out = self.next_id();
        let node = self.record(
            Array2::from_elem((1, 1), loss),
            Box::new(move |ctx| {
                let Some(g) = ctx.take(out) else { return };
                ctx.accumulate(logits, dlogits * g[[0, 0]]);
            }),
        );
        Ok((node, probs))
    }
}

/// Numerically stable softmax and `-log p_y`.
pub fn softmax_cross_entropy(logits: &[f64], y: usize) -> Result<(f64, Vec<f64>)> {
    if logits.len() < 2 {
        return Err(Error::Shape(format!(
            "need at least 2 classes, got {}",
            logits.len()
        )));
    }
    if y >= logits.len() {
        return Err(Error::Label {
            label: y,
            classes: logits.len(),
        });
    }
    let p = softmax(logits);
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    Ok((log_sum - (logits[y] - max), p))
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}
