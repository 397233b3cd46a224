//! Slice-level forward/backward kernels used by the tape.

/// `c = op(a) · op(b) + beta · c`, all row-major. `op(a)` is `m × k`,
/// `op(b)` is `k × n`. When `trans_a` is set, `a` is stored as `k × m`;
/// when `trans_b` is set, `b` is stored as `n × k`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    trans_a: bool,
    b: &[f64],
    trans_b: bool,
    beta: f64,
    c: &mut [f64],
) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        c.iter_mut().for_each(|v| *v *= beta);
        return;
    }
    let (rsa, csa) = if trans_a { (1, m) } else { (k, 1) };
    let (rsb, csb) = if trans_b { (1, k) } else { (n, 1) };
    // SAFETY: the asserts above pin every buffer to exactly the extent the
    // strides address, and `c` does not alias `a` or `b` (distinct borrows).
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Geometry of a batched 1-D convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct ConvGeom {
    pub batch: usize,
    pub c_in: usize,
    pub len: usize,
    pub c_out: usize,
    pub width: usize,
    pub stride: usize,
    pub pad: usize,
    pub len_out: usize,
}

impl ConvGeom {
    fn patch(&self) -> usize {
        self.c_in * self.width
    }

    /// Batch elements per im2col chunk; bounds the column buffer to a few
    /// million entries.
    fn chunk(&self) -> usize {
        const MAX_COLS: usize = 1 << 22;
        (MAX_COLS / (self.patch() * self.len_out).max(1)).clamp(1, self.batch)
    }

    fn im2col(&self, x: &[f64], b0: usize, nb: usize, cols: &mut [f64]) {
        let ncols = nb * self.len_out;
        for c in 0..self.c_in {
            for w in 0..self.width {
                let row = &mut cols[(c * self.width + w) * ncols..][..ncols];
                for bi in 0..nb {
                    let src = &x[((b0 + bi) * self.c_in + c) * self.len..][..self.len];
                    let dst = &mut row[bi * self.len_out..][..self.len_out];
                    for (t, d) in dst.iter_mut().enumerate() {
                        let pos = (t * self.stride + w) as isize - self.pad as isize;
                        *d = if pos >= 0 && (pos as usize) < self.len {
                            src[pos as usize]
                        } else {
                            0.0
                        };
                    }
                }
            }
        }
    }

    fn col2im(&self, cols: &[f64], b0: usize, nb: usize, gx: &mut [f64]) {
        let ncols = nb * self.len_out;
        for c in 0..self.c_in {
            for w in 0..self.width {
                let row = &cols[(c * self.width + w) * ncols..][..ncols];
                for bi in 0..nb {
                    let dst = &mut gx[((b0 + bi) * self.c_in + c) * self.len..][..self.len];
                    let src = &row[bi * self.len_out..][..self.len_out];
                    for (t, &v) in src.iter().enumerate() {
                        let pos = (t * self.stride + w) as isize - self.pad as isize;
                        if pos >= 0 && (pos as usize) < self.len {
                            dst[pos as usize] += v;
                        }
                    }
                }
            }
        }
    }

    pub fn forward(&self, x: &[f64], kernel: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.batch * self.c_out * self.len_out];
        let chunk = self.chunk();
        let mut b0 = 0;
        while b0 < self.batch {
            let nb = chunk.min(self.batch - b0);
            let ncols = nb * self.len_out;
            let mut cols = vec![0.0; self.patch() * ncols];
            self.im2col(x, b0, nb, &mut cols);
            let mut res = vec![0.0; self.c_out * ncols];
            gemm(
                self.c_out,
                self.patch(),
                ncols,
                kernel,
                false,
                &cols,
                false,
                0.0,
                &mut res,
            );
            for o in 0..self.c_out {
                for bi in 0..nb {
                    let src = &res[o * ncols + bi * self.len_out..][..self.len_out];
                    out[((b0 + bi) * self.c_out + o) * self.len_out..][..self.len_out]
                        .copy_from_slice(src);
                }
            }
            b0 += nb;
        }
        out
    }

    /// Returns `(grad_input, grad_kernel)`; either may be skipped.
    pub fn backward(
        &self,
        x: &[f64],
        kernel: &[f64],
        g: &[f64],
        want_x: bool,
        want_k: bool,
    ) -> (Option<Vec<f64>>, Option<Vec<f64>>) {
        let mut gx = want_x.then(|| vec![0.0; x.len()]);
        let mut gk = want_k.then(|| vec![0.0; kernel.len()]);
        let chunk = self.chunk();
        let mut b0 = 0;
        while b0 < self.batch {
            let nb = chunk.min(self.batch - b0);
            let ncols = nb * self.len_out;
            let mut gm = vec![0.0; self.c_out * ncols];
            for o in 0..self.c_out {
                for bi in 0..nb {
                    gm[o * ncols + bi * self.len_out..][..self.len_out].copy_from_slice(
                        &g[((b0 + bi) * self.c_out + o) * self.len_out..][..self.len_out],
                    );
                }
            }
            if let Some(gk) = gk.as_mut() {
                let mut cols = vec![0.0; self.patch() * ncols];
                self.im2col(x, b0, nb, &mut cols);
                gemm(
                    self.c_out,
                    ncols,
                    self.patch(),
                    &gm,
                    false,
                    &cols,
                    true,
                    1.0,
                    gk,
                );
            }
            if let Some(gx) = gx.as_mut() {
                let mut gcols = vec![0.0; self.patch() * ncols];
                gemm(
                    self.patch(),
                    self.c_out,
                    ncols,
                    kernel,
                    true,
                    &gm,
                    false,
                    0.0,
                    &mut gcols,
                );
                self.col2im(&gcols, b0, nb, gx);
            }
            b0 += nb;
        }
        (gx, gk)
    }
}

/// Per-row standardization over contiguous rows of length `len`.
pub(crate) fn instance_norm_forward(x: &[f64], len: usize, eps: f64) -> Vec<f64> {
    let mut y = vec![0.0; x.len()];
    for (row, out) in x.chunks_exact(len).zip(y.chunks_exact_mut(len)) {
        let (mean, inv) = row_stats(row, eps);
        for (o, &v) in out.iter_mut().zip(row) {
            *o = (v - mean) * inv;
        }
    }
    y
}

pub(crate) fn instance_norm_backward(x: &[f64], y: &[f64], g: &[f64], len: usize, eps: f64) -> Vec<f64> {
    let mut gx = vec![0.0; x.len()];
    let n = len as f64;
    for ((row, yr), (gr, out)) in x
        .chunks_exact(len)
        .zip(y.chunks_exact(len))
        .zip(g.chunks_exact(len).zip(gx.chunks_exact_mut(len)))
    {
        let (_, inv) = row_stats(row, eps);
        let mean_g = gr.iter().sum::<f64>() / n;
        let mean_gy = gr.iter().zip(yr).map(|(a, b)| a * b).sum::<f64>() / n;
        for ((o, &gv), &yv) in out.iter_mut().zip(gr).zip(yr) {
            *o = inv * (gv - mean_g - yv * mean_gy);
        }
    }
    gx
}

fn row_stats(row: &[f64], eps: f64) -> (f64, f64) {
    let n = row.len() as f64;
    let mean = row.iter().sum::<f64>() / n;
    let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, 1.0 / (var + eps).sqrt())
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Masked log-sum-exp of one row. `None` when no entry is included.
pub(crate) fn logsumexp_row(row: &[f64], mask: Option<&[bool]>) -> Option<f64> {
    let included = |i: usize| mask.is_none_or(|m| m[i]);
    let max = row
        .iter()
        .enumerate()
        .filter(|&(i, _)| included(i))
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return None;
    }
    if max.is_infinite() || max.is_nan() {
        return Some(max);
    }
    let sum: f64 = row
        .iter()
        .enumerate()
        .filter(|&(i, _)| included(i))
        .map(|(_, &v)| (v - max).exp())
        .sum();
    Some(max + sum.ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_transposes() {
        // a = [[1,2],[3,4]], b = [[5,6],[7,8]]
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [5.0, 6.0, 7.0, 8.0];
        let mut c = [0.0; 4];
        gemm(2, 2, 2, &a, false, &b, false, 0.0, &mut c);
        assert_eq!(c, [19.0, 22.0, 43.0, 50.0]);
        gemm(2, 2, 2, &a, true, &b, false, 0.0, &mut c);
        assert_eq!(c, [26.0, 30.0, 38.0, 44.0]);
        gemm(2, 2, 2, &a, false, &b, true, 0.0, &mut c);
        assert_eq!(c, [17.0, 23.0, 39.0, 53.0]);
    }

    #[test]
    fn logsumexp_row_handles_masks_and_large_values() {
        assert!((logsumexp_row(&[1000.0, 1000.0], None).unwrap() - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(logsumexp_row(&[1.0, 5.0], Some(&[true, false])), Some(1.0));
        assert_eq!(logsumexp_row(&[1.0], Some(&[false])), None);
    }
}
