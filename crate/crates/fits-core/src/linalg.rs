//! Minimal dense kernels over flat row-major slices.
//!
//! These are deliberately hand-rolled loops rather than a BLAS-backed
//! matrix type: the layer contract requires the vectorized forward pass to
//! equal the scalar per-neuron reference *bit for bit*, so the summation
//! order of every reduction is fixed (strictly ascending index) and must
//! never be reassociated by a library's blocking or SIMD strategy.

/// Dot product accumulated in ascending index order.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

/// `out = W x` for a row-major `rows x cols` matrix.
#[inline]
pub fn matvec(w: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(w.len(), rows * cols);
    debug_assert_eq!(x.len(), cols);
    debug_assert_eq!(out.len(), rows);
    for r in 0..rows {
        out[r] = dot(&w[r * cols..(r + 1) * cols], x);
    }
}

/// `out = W^T y` for a row-major `rows x cols` matrix. Each output element
/// is accumulated over ascending row index.
#[inline]
pub fn matvec_t(w: &[f64], rows: usize, cols: usize, y: &[f64], out: &mut [f64]) {
    debug_assert_eq!(w.len(), rows * cols);
    debug_assert_eq!(y.len(), rows);
    debug_assert_eq!(out.len(), cols);
    for c in 0..cols {
        let mut acc = 0.0;
        for r in 0..rows {
            acc += w[r * cols + c] * y[r];
        }
        out[c] = acc;
    }
}

/// Rank-one accumulate `dw += g x^T` into a row-major `rows x cols` buffer.
#[inline]
pub fn outer_acc(dw: &mut [f64], rows: usize, cols: usize, g: &[f64], x: &[f64]) {
    debug_assert_eq!(dw.len(), rows * cols);
    debug_assert_eq!(g.len(), rows);
    debug_assert_eq!(x.len(), cols);
    for r in 0..rows {
        let gr = g[r];
        let row = &mut dw[r * cols..(r + 1) * cols];
        for c in 0..cols {
            row[c] += gr * x[c];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_matches_hand_sum() {
        assert_eq!(dot(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]), 32.0);
    }

    #[test]
    fn matvec_and_transpose_agree_with_reference() {
        // W = [[1, 2], [3, 4], [5, 6]]
        let w = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let mut y = [0.0; 3];
        matvec(&w, 3, 2, &[1.0, -1.0], &mut y);
        assert_eq!(y, [-1.0, -1.0, -1.0]);

        let mut x = [0.0; 2];
        matvec_t(&w, 3, 2, &[1.0, 1.0, 1.0], &mut x);
        assert_eq!(x, [9.0, 12.0]);
    }

    #[test]
    fn outer_acc_accumulates() {
        let mut dw = [1.0; 4];
        outer_acc(&mut dw, 2, 2, &[2.0, 3.0], &[10.0, 20.0]);
        assert_eq!(dw, [21.0, 41.0, 31.0, 61.0]);
    }
}
