//! Small-batch matrix product for recurrent steps.
//!
//! A recurrent step multiplies a handful of rows by a full weight matrix.
//! General GEMM repacks the weight on every call, which dominates at these
//! shapes, so the product is done directly as row-wise axpy updates.

/// `out[b, :] += sum_k a[b, k] * w[k, :]` over row-major slices
/// `a: batch x k`, `w: k x n`, `out: batch x n`.
pub(crate) fn acc_matmul(a: &[f64], w: &[f64], out: &mut [f64], batch: usize, k: usize, n: usize) {
    assert_eq!(a.len(), batch * k);
    assert_eq!(w.len(), k * n);
    assert_eq!(out.len(), batch * n);
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx2") && std::arch::is_x86_feature_detected!("fma") {
        // SAFETY: the required CPU features were detected at run time.
        unsafe { acc_matmul_fma(a, w, out, batch, k, n) };
        return;
    }
    acc_matmul_plain(a, w, out, batch, k, n);
}

fn acc_matmul_plain(a: &[f64], w: &[f64], out: &mut [f64], batch: usize, k: usize, n: usize) {
    for kk in 0..k {
        let wrow = &w[kk * n..(kk + 1) * n];
        for b in 0..batch {
            let s = a[b * k + kk];
            for (o, &wv) in out[b * n..(b + 1) * n].iter_mut().zip(wrow) {
                *o += s * wv;
            }
        }
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn acc_matmul_fma(a: &[f64], w: &[f64], out: &mut [f64], batch: usize, k: usize, n: usize) {
    for kk in 0..k {
        let wrow = &w[kk * n..(kk + 1) * n];
        for b in 0..batch {
            let s = a[b * k + kk];
            for (o, &wv) in out[b * n..(b + 1) * n].iter_mut().zip(wrow) {
                *o = s.mul_add(wv, *o);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    #[test]
    fn matches_naive_triple_loop() {
        let mut rng = SeededRng::new(4);
        let (batch, k, n) = (3, 5, 7);
        let a: Vec<f64> = (0..batch * k).map(|_| rng.normal()).collect();
        let w: Vec<f64> = (0..k * n).map(|_| rng.normal()).collect();
        let init: Vec<f64> = (0..batch * n).map(|_| rng.normal()).collect();
        let mut out = init.clone();
        acc_matmul(&a, &w, &mut out, batch, k, n);
        for b in 0..batch {
            for j in 0..n {
                let expect: f64 =
                    init[b * n + j] + (0..k).map(|i| a[b * k + i] * w[i * n + j]).sum::<f64>();
                assert!((out[b * n + j] - expect).abs() < 1e-12);
            }
        }
    }
}
