//! Per-time gated fusion of two feature streams.

use ndarray::{Array2, Axis, Zip};

use super::ops::sigmoid;
use super::params::ParamId;
use super::tape::{NodeId, Tape};
use crate::error::{Error, Result};

/// `g = sigmoid(Wg [uA; uP] + bg)`, `z = g * uA + (1 - g) * uP`.
///
/// `wg` is `h x 2h`, `bg` has length `h`. Returns `(z, g)`.
pub fn gated_fuse(
    wg: &Array2<f64>,
    bg: &[f64],
    u_a: &[f64],
    u_p: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let h = u_a.len();
    if u_p.len() != h || wg.dim() != (h, 2 * h) || bg.len() != h {
        return Err(Error::Shape(format!(
            "gated_fuse: uA {h}, uP {}, Wg {:?}, bg {}",
            u_p.len(),
            wg.dim(),
            bg.len()
        )));
    }
    let mut z = vec![0.0; h];
    let mut g = vec![0.0; h];
    for j in 0..h {
        let mut a = bg[j];
        for k in 0..h {
            a += wg[[j, k]] * u_a[k] + wg[[j, h + k]] * u_p[k];
        }
        g[j] = sigmoid(a);
        z[j] = g[j] * u_a[j] + (1.0 - g[j]) * u_p[j];
    }
    Ok((z, g))
}

/// Output of the batched fusion op.
pub struct Fused {
    pub z: NodeId,
    /// Gate activations, same shape as `z`.
    pub gate: Array2<f64>,
}

impl Tape<'_> {
    pub fn gated_fuse(
        &mut self,
        u_a: NodeId,
        u_p: NodeId,
        wg: ParamId,
        bg: ParamId,
    ) -> Result<Fused> {
        let (av, pv) = (self.value(u_a), self.value(u_p));
        let w = self.params.get(wg);
        let h = av.ncols();
        if av.dim() != pv.dim() || w.dim() != (h, 2 * h) || self.params.get(bg).ncols() != h {
            return Err(Error::Shape(format!(
                "gated_fuse: uA {:?}, uP {:?}, Wg {:?}",
                av.dim(),
                pv.dim(),
                w.dim()
            )));
        }
        let cat = ndarray::concatenate![Axis(1), *av, *pv];
        let mut gate = super::ops::affine_rows(&cat, w, self.params.get(bg));
        gate.mapv_inplace(sigmoid);
        let mut z = Array2::zeros(av.dim());
        Zip::from(&mut z)
            .and(&gate)
            .and(av)
            .and(pv)
            .for_each(|z, &g, &a, &p| *z = g * a + (1.0 - g) * p);
        let out = self.next_id();
        let g_cache = gate.clone();
        let z = self.record(
            z,
            Box::new(move |ctx| {
                let Some(dz) = ctx.take(out) else { return };
                let (av, pv) = (ctx.value(u_a), ctx.value(u_p));
                let mut da = &dz * &g_cache;
                let mut dp = &dz - &da;
                let mut dpre = Array2::zeros(dz.dim());
                Zip::from(&mut dpre)
                    .and(&dz)
                    .and(&g_cache)
                    .and(av)
                    .and(pv)
                    .for_each(|dpre, &d, &g, &a, &p| *dpre = d * (a - p) * g * (1.0 - g));
                let w = ctx.params.get(wg);
                let dw = dpre.t().dot(&cat);
                let db = dpre.sum_axis(Axis(0)).insert_axis(Axis(0));
                let dcat = dpre.dot(w);
                da += &dcat.slice(ndarray::s![.., ..h]);
                dp += &dcat.slice(ndarray::s![.., h..]);
                ctx.accumulate_param(wg, &dw);
                ctx.accumulate_param(bg, &db);
                ctx.accumulate(u_a, da);
                ctx.accumulate(u_p, dp);
            }),
        );
        Ok(Fused { z, gate })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_logit_averages() {
        let wg = Array2::zeros((3, 6));
        let (z, g) = gated_fuse(&wg, &[0.0; 3], &[1.0, 2.0, 3.0], &[3.0, 0.0, -1.0]).unwrap();
        assert_eq!(g, vec![0.5; 3]);
        assert_eq!(z, vec![2.0, 1.0, 1.0]);
    }

    #[test]
    fn equal_streams_pass_through() {
        let wg = Array2::from_shape_fn((2, 4), |(i, j)| (i as f64 - j as f64) * 0.7);
        let u = [0.3, -1.4];
        let (z, _) = gated_fuse(&wg, &[0.2, -0.1], &u, &u).unwrap();
        for (a, b) in z.iter().zip(&u) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn saturated_gate_selects_amplitude() {
        let wg = Array2::zeros((2, 4));
        let (z, g) = gated_fuse(&wg, &[30.0, 30.0], &[1.0, -2.0], &[5.0, 5.0]).unwrap();
        assert!((z[0] - 1.0).abs() < 1e-9 && (z[1] + 2.0).abs() < 1e-9);
        assert!(g.iter().all(|&v| v < 1.0));
    }

    #[test]
    fn shape_mismatch() {
        let wg = Array2::zeros((2, 3));
        assert!(matches!(
            gated_fuse(&wg, &[0.0; 2], &[1.0, 2.0], &[1.0, 2.0]),
            Err(Error::Shape(_))
        ));
    }
}
