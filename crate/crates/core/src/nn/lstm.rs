//! LSTM cells and bidirectional layers with backpropagation through time.
//!
//! Gate blocks are ordered (input, forget, candidate, output) along the
//! `4h` axis of every weight and bias.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, Axis};

use super::kernel::acc_matmul;
use super::ops::sigmoid;
use super::params::{ParamId, ParamStore};
use super::tape::{NodeId, Tape};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy)]
pub struct LstmCell {
    pub input: usize,
    pub hidden: usize,
    /// `4h x d`
    pub w_ih: ParamId,
    /// `4h x h`
    pub w_hh: ParamId,
    /// `4h`
    pub bias: ParamId,
}

impl LstmCell {
    /// Weights uniform in `[-1/sqrt(h), 1/sqrt(h)]`; forget bias 1, other biases 0.
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        input: usize,
        hidden: usize,
        rng: &mut SeededRng,
    ) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        let w_ih = store.add_uniform(format!("{prefix}.w_ih"), 4 * hidden, input, bound, rng);
        let w_hh = store.add_uniform(format!("{prefix}.w_hh"), 4 * hidden, hidden, bound, rng);
        let mut b = vec![0.0; 4 * hidden];
        b[hidden..2 * hidden].fill(1.0);
        let bias = store.add_vector(format!("{prefix}.bias"), b);
        Self {
            input,
            hidden,
            w_ih,
            w_hh,
            bias,
        }
    }

    /// Recovers a cell from an existing store by name.
    pub fn lookup(store: &ParamStore, prefix: &str) -> Result<Self> {
        let get = |suffix: &str| {
            store
                .id(&format!("{prefix}.{suffix}"))
                .ok_or_else(|| Error::Data(format!("missing parameter {prefix}.{suffix}")))
        };
        let (w_ih, w_hh, bias) = (get("w_ih")?, get("w_hh")?, get("bias")?);
        let (four_h, input) = store.get(w_ih).dim();
        Ok(Self {
            input,
            hidden: four_h / 4,
            w_ih,
            w_hh,
            bias,
        })
    }

    /// One recurrence step for a single sequence.
    pub fn step(
        &self,
        store: &ParamStore,
        x: &[f64],
        h_prev: &[f64],
        c_prev: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let h = self.hidden;
        if x.len() != self.input || h_prev.len() != h || c_prev.len() != h {
            return Err(Error::Shape(format!(
                "lstm step: x {} / h {} / c {} vs cell ({}, {h})",
                x.len(),
                h_prev.len(),
                c_prev.len(),
                self.input
            )));
        }
        let w_ih = store.get(self.w_ih);
        let w_hh = store.get(self.w_hh);
        let b = store.get(self.bias);
        let pre = w_ih.dot(&ndarray::aview1(x)) + w_hh.dot(&ndarray::aview1(h_prev)) + b.row(0);
        let mut h_t = vec![0.0; h];
        let mut c_t = vec![0.0; h];
        for j in 0..h {
            let i = sigmoid(pre[j]);
            let f = sigmoid(pre[h + j]);
            let g = pre[2 * h + j].tanh();
            let o = sigmoid(pre[3 * h + j]);
            c_t[j] = f * c_prev[j] + i * g;
            h_t[j] = o * c_t[j].tanh();
        }
        Ok((h_t, c_t))
    }

    /// Runs the cell over a whole sequence from zero state, optionally in reverse.
    /// Outputs are aligned with input positions.
    pub fn run(
        &self,
        store: &ParamStore,
        seq: &[Vec<f64>],
        reverse: bool,
    ) -> Result<Vec<Vec<f64>>> {
        let mut h = vec![0.0; self.hidden];
        let mut c = vec![0.0; self.hidden];
        let mut out = vec![Vec::new(); seq.len()];
        let order: Box<dyn Iterator<Item = usize>> = if reverse {
            Box::new((0..seq.len()).rev())
        } else {
            Box::new(0..seq.len())
        };
        for t in order {
            let (h2, c2) = self.step(store, &seq[t], &h, &c)?;
            h = h2;
            c = c2;
            out[t] = h.clone();
        }
        Ok(out)
    }
}

/// A forward and a backward cell over the same input.
#[derive(Debug, Clone, Copy)]
pub struct BiLstm {
    pub fwd: LstmCell,
    pub bwd: LstmCell,
}

impl BiLstm {
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        input: usize,
        hidden: usize,
        rng: &mut SeededRng,
    ) -> Self {
        Self {
            fwd: LstmCell::new(store, &format!("{prefix}.fwd"), input, hidden, rng),
            bwd: LstmCell::new(store, &format!("{prefix}.bwd"), input, hidden, rng),
        }
    }

    pub fn lookup(store: &ParamStore, prefix: &str) -> Result<Self> {
        Ok(Self {
            fwd: LstmCell::lookup(store, &format!("{prefix}.fwd"))?,
            bwd: LstmCell::lookup(store, &format!("{prefix}.bwd"))?,
        })
    }

    pub fn output_width(&self) -> usize {
        self.fwd.hidden + self.bwd.hidden
    }
}

/// `output_t = [forward h_t ; backward h_t]` for a single sequence.
pub fn bilstm_forward(
    store: &ParamStore,
    fwd: &LstmCell,
    bwd: &LstmCell,
    seq: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>> {
    if seq.is_empty() {
        return Err(Error::EmptyInput("bilstm sequence"));
    }
    let f = fwd.run(store, seq, false)?;
    let b = bwd.run(store, seq, true)?;
    Ok(f.into_iter()
        .zip(b)
        .map(|(mut a, b)| {
            a.extend(b);
            a
        })
        .collect())
}

impl Tape<'_> {
    /// Unidirectional LSTM over a time-major batch.
    pub fn lstm(
        &mut self,
        x: NodeId,
        cell: &LstmCell,
        batch: usize,
        reverse: bool,
    ) -> Result<NodeId> {
        let xv = self.value(x);
        let (rows, d) = xv.dim();
        if d != cell.input {
            return Err(Error::Shape(format!(
                "lstm: input width {d} vs cell input {}",
                cell.input
            )));
        }
        if batch == 0 || rows == 0 || rows % batch != 0 {
            return Err(Error::EmptyInput("lstm sequence"));
        }
        let steps = rows / batch;
        let h = cell.hidden;
        let w_ih = self.params.get(cell.w_ih);
        let w_hh = self.params.get(cell.w_hh);
        let bias = self.params.get(cell.bias);

        // gate pre-activations for every step at once, then activations in place
        let mut gates = Array2::<f64>::zeros((rows, 4 * h));
        general_mat_mul(1.0, xv, &w_ih.t(), 0.0, &mut gates);
        gates += bias;
        let w_hh_t = w_hh.t().as_standard_layout().into_owned();
        let w_hh_t = w_hh_t.as_slice().expect("row-major");
        let mut hs = Array2::<f64>::zeros((rows, h));
        let mut cs = Array2::<f64>::zeros((rows, h));
        let mut tcs = Array2::<f64>::zeros((rows, h));
        let time = move |step: usize| if reverse { steps - 1 - step } else { step };
        for step in 0..steps {
            let t = time(step);
            let r0 = t * batch;
            if step > 0 {
                let p0 = time(step - 1) * batch;
                let h_prev = &hs.as_slice().expect("row-major")[p0 * h..(p0 + batch) * h];
                let g =
                    &mut gates.as_slice_mut().expect("row-major")[r0 * 4 * h..(r0 + batch) * 4 * h];
                acc_matmul(h_prev, w_hh_t, g, batch, h, 4 * h);
            }
            for b in 0..batch {
                let r = r0 + b;
                let c_prev: Option<Vec<f64>> = (step > 0).then(|| {
                    let p = time(step - 1) * batch + b;
                    cs.row(p).to_vec()
                });
                let mut grow = gates.row_mut(r);
                let g = grow.as_slice_mut().expect("contiguous");
                let mut crow = cs.row_mut(r);
                let c = crow.as_slice_mut().expect("contiguous");
                let mut hrow = hs.row_mut(r);
                let hr = hrow.as_slice_mut().expect("contiguous");
                let mut trow = tcs.row_mut(r);
                let tc = trow.as_slice_mut().expect("contiguous");
                for j in 0..h {
                    let i_g = sigmoid(g[j]);
                    let f_g = sigmoid(g[h + j]);
                    let c_g = g[2 * h + j].tanh();
                    let o_g = sigmoid(g[3 * h + j]);
                    g[j] = i_g;
                    g[h + j] = f_g;
                    g[2 * h + j] = c_g;
                    g[3 * h + j] = o_g;
                    let cp = c_prev.as_ref().map_or(0.0, |v| v[j]);
                    c[j] = f_g * cp + i_g * c_g;
                    tc[j] = c[j].tanh();
                    hr[j] = o_g * tc[j];
                }
            }
        }

        let out = self.next_id();
        let cell = *cell;
        Ok(self.record(
            hs,
            Box::new(move |ctx| {
                let Some(dh_out) = ctx.take(out) else { return };
                let w_ih = ctx.params.get(cell.w_ih);
                let w_hh = ctx.params.get(cell.w_hh);
                let hs = ctx.value(out);
                let mut dgates = Array2::<f64>::zeros((rows, 4 * h));
                let mut dh_next = Array2::<f64>::zeros((batch, h));
                let mut dc_next = Array2::<f64>::zeros((batch, h));
                let mut h_prev_all = Array2::<f64>::zeros((rows, h));
                for step in (0..steps).rev() {
                    let t = time(step);
                    let r0 = t * batch;
                    let prev = (step > 0).then(|| time(step - 1) * batch);
                    for b in 0..batch {
                        let r = r0 + b;
                        let g = gates.row(r);
                        let g = g.as_slice().expect("contiguous");
                        let tc = tcs.row(r);
                        let tc = tc.as_slice().expect("contiguous");
                        let dho = dh_out.row(r);
                        let mut dg_row = dgates.row_mut(r);
                        let dg = dg_row.as_slice_mut().expect("contiguous");
                        for j in 0..h {
                            let (i_g, f_g, c_g, o_g) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
                            let dh = dho[j] + dh_next[[b, j]];
                            let d_o = dh * tc[j];
                            let dc = dh * o_g * (1.0 - tc[j] * tc[j]) + dc_next[[b, j]];
                            let cp = prev.map_or(0.0, |p| cs[[p + b, j]]);
                            dc_next[[b, j]] = dc * f_g;
                            dg[j] = dc * c_g * i_g * (1.0 - i_g);
                            dg[h + j] = dc * cp * f_g * (1.0 - f_g);
                            dg[2 * h + j] = dc * i_g * (1.0 - c_g * c_g);
                            dg[3 * h + j] = d_o * o_g * (1.0 - o_g);
                        }
                    }
                    if let Some(p0) = prev {
                        let dg = &dgates.as_slice().expect("row-major")
                            [r0 * 4 * h..(r0 + batch) * 4 * h];
                        let dh = dh_next.as_slice_mut().expect("row-major");
                        dh.fill(0.0);
                        acc_matmul(dg, w_hh.as_slice().expect("row-major"), dh, batch, 4 * h, h);
                        h_prev_all
                            .slice_mut(s![r0..r0 + batch, ..])
                            .assign(&hs.slice(s![p0..p0 + batch, ..]));
                    }
                }
                let xv = ctx.value(x);
                let dw_ih = dgates.t().dot(xv);
                let dw_hh = dgates.t().dot(&h_prev_all);
                let db = dgates.sum_axis(Axis(0)).insert_axis(Axis(0));
                let dx = dgates.dot(w_ih);
                ctx.accumulate_param(cell.w_ih, &dw_ih);
                ctx.accumulate_param(cell.w_hh, &dw_hh);
                ctx.accumulate_param(cell.bias, &db);
                ctx.accumulate(x, dx);
            }),
        ))
    }

    /// Bidirectional layer: `[fwd ; bwd]` along features, aligned in time.
    pub fn bilstm(&mut self, x: NodeId, layer: &BiLstm, batch: usize) -> Result<NodeId> {
        let f = self.lstm(x, &layer.fwd, batch, false)?;
        let b = self.lstm(x, &layer.bwd, batch, true)?;
        self.concat_cols(f, b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_sigmoid(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    /// Direct scalar transcription of the recurrence.
    fn oracle_step(
        store: &ParamStore,
        cell: &LstmCell,
        x: &[f64],
        h_prev: &[f64],
        c_prev: &[f64],
    ) -> (Vec<f64>, Vec<f64>) {
        let (wi, wh, b) = (
            store.get(cell.w_ih),
            store.get(cell.w_hh),
            store.get(cell.bias),
        );
        let h = cell.hidden;
        let pre = |row: usize| {
            let mut acc = b[[0, row]];
            for (k, xv) in x.iter().enumerate() {
                acc += wi[[row, k]] * xv;
            }
            for (k, hv) in h_prev.iter().enumerate() {
                acc += wh[[row, k]] * hv;
            }
            acc
        };
        let mut hn = vec![0.0; h];
        let mut cn = vec![0.0; h];
        for j in 0..h {
            let i = scalar_sigmoid(pre(j));
            let f = scalar_sigmoid(pre(h + j));
            let g = pre(2 * h + j).tanh();
            let o = scalar_sigmoid(pre(3 * h + j));
            cn[j] = f * c_prev[j] + i * g;
            hn[j] = o * cn[j].tanh();
        }
        (hn, cn)
    }

    fn zero_cell(store: &mut ParamStore, d: usize, h: usize) -> LstmCell {
        let cell = LstmCell::new(store, "z", d, h, &mut SeededRng::new(0));
        for id in [cell.w_ih, cell.w_hh, cell.bias] {
            store.get_mut(id).fill(0.0);
        }
        cell
    }

    #[test]
    fn zero_params_zero_state() {
        let mut store = ParamStore::new();
        let cell = zero_cell(&mut store, 3, 2);
        let (h, c) = cell
            .step(&store, &[1.0, -2.0, 0.5], &[0.0; 2], &[0.0; 2])
            .unwrap();
        assert_eq!(h, vec![0.0; 2]);
        assert_eq!(c, vec![0.0; 2]);
    }

    #[test]
    fn zero_params_halve_cell() {
        let mut store = ParamStore::new();
        let cell = zero_cell(&mut store, 3, 2);
        let (h, c) = cell
            .step(&store, &[1.0, 1.0, 1.0], &[0.3, 0.3], &[2.0, -4.0])
            .unwrap();
        assert_eq!(c, vec![1.0, -2.0]);
        assert!((h[0] - 0.5 * 1.0f64.tanh()).abs() < 1e-15);
        assert!((h[1] - 0.5 * (-2.0f64).tanh()).abs() < 1e-15);
    }

    #[test]
    fn step_matches_scalar_oracle() {
        let mut store = ParamStore::new();
        let mut rng = SeededRng::new(42);
        let cell = LstmCell::new(&mut store, "c", 3, 2, &mut rng);
        for id in [cell.w_ih, cell.w_hh, cell.bias] {
            store
                .get_mut(id)
                .mapv_inplace(|_| rng.uniform_range(-1.0, 1.0));
        }
        let (mut h, mut c) = (vec![0.0; 2], vec![0.0; 2]);
        let (mut oh, mut oc) = (h.clone(), c.clone());
        for t in 0..5 {
            let x = [t as f64 * 0.3, -0.7, 1.1 - t as f64 * 0.1];
            (h, c) = cell.step(&store, &x, &h, &c).unwrap();
            (oh, oc) = oracle_step(&store, &cell, &x, &oh, &oc);
            for j in 0..2 {
                assert!((h[j] - oh[j]).abs() < 1e-12 && (c[j] - oc[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn step_shape_mismatch() {
        let mut store = ParamStore::new();
        let cell = LstmCell::new(&mut store, "c", 3, 2, &mut SeededRng::new(1));
        assert!(matches!(
            cell.step(&store, &[1.0, 2.0], &[0.0; 2], &[0.0; 2]),
            Err(Error::Shape(_))
        ));
    }

    fn random_seq(rng: &mut SeededRng, t: usize, d: usize) -> Vec<Vec<f64>> {
        (0..t)
            .map(|_| (0..d).map(|_| rng.normal()).collect())
            .collect()
    }

    #[test]
    fn bilstm_single_step() {
        let mut store = ParamStore::new();
        let mut rng = SeededRng::new(3);
        let layer = BiLstm::new(&mut store, "b", 2, 3, &mut rng);
        let seq = vec![vec![0.4, -0.9]];
        let out = bilstm_forward(&store, &layer.fwd, &layer.bwd, &seq).unwrap();
        let (hf, _) = layer
            .fwd
            .step(&store, &seq[0], &[0.0; 3], &[0.0; 3])
            .unwrap();
        let (hb, _) = layer
            .bwd
            .step(&store, &seq[0], &[0.0; 3], &[0.0; 3])
            .unwrap();
        assert_eq!(out[0], [hf, hb].concat());
    }

    #[test]
    fn bilstm_palindrome_symmetry() {
        let mut store = ParamStore::new();
        let mut rng = SeededRng::new(4);
        let cell = LstmCell::new(&mut store, "shared", 2, 3, &mut rng);
        let seq = vec![
            vec![1.0, 0.0],
            vec![0.2, -0.5],
            vec![0.7, 0.7],
            vec![0.2, -0.5],
            vec![1.0, 0.0],
        ];
        let out = bilstm_forward(&store, &cell, &cell, &seq).unwrap();
        let t = seq.len();
        for i in 0..t {
            assert_eq!(out[i][..3], out[t - 1 - i][3..]);
        }
    }

    #[test]
    fn bilstm_empty_sequence() {
        let mut store = ParamStore::new();
        let layer = BiLstm::new(&mut store, "b", 2, 3, &mut SeededRng::new(1));
        assert!(matches!(
            bilstm_forward(&store, &layer.fwd, &layer.bwd, &[]),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn batched_tape_matches_per_sequence_runs() {
        let mut store = ParamStore::new();
        let mut rng = SeededRng::new(5);
        let layer = BiLstm::new(&mut store, "b", 3, 4, &mut rng);
        let (steps, batch) = (4, 3);
        let seqs: Vec<_> = (0..batch).map(|_| random_seq(&mut rng, steps, 3)).collect();
        let mut x = Array2::zeros((steps * batch, 3));
        for t in 0..steps {
            for b in 0..batch {
                x.row_mut(t * batch + b)
                    .assign(&ndarray::aview1(&seqs[b][t]));
            }
        }
        let mut tape = Tape::new(&store);
        let xi = tape.input(x);
        let y = tape.bilstm(xi, &layer, batch).unwrap();
        let yv = tape.value(y);
        for (b, seq) in seqs.iter().enumerate() {
            let f = layer.fwd.run(&store, seq, false).unwrap();
            let r = layer.bwd.run(&store, seq, true).unwrap();
            for t in 0..steps {
                let expect = [f[t].clone(), r[t].clone()].concat();
                for (j, e) in expect.iter().enumerate() {
                    assert!((yv[[t * batch + b, j]] - e).abs() < 1e-12);
                }
            }
        }
    }
}
