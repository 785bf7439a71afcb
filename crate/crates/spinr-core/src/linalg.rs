//! Dense row-major matrices and the GEMM everything trains through.
//!
//! The toolkit needs exactly one expensive primitive: `C = A * B` in f64.
//! Forward passes use it as `activations * weights^T`, backward passes as
//! `delta * weights` and `delta^T * activations`; the transposed operands
//! are materialized explicitly (weight matrices are small and the one large
//! transpose per step is a few percent of the multiply cost), which keeps a
//! single entry point on the hot path instead of three variants.
//!
//! The multiply itself is `matrixmultiply::dgemm` — single-threaded,
//! cache-blocked, with runtime-dispatched fma kernels. Its fused accumulation
//! can differ from a naively rounded two-op sum in the last ulp; every
//! consumer in the crate treats that as noise far below its own tolerances.
//! Within a build the kernel selection is fixed and there is no threading,
//! so identical inputs always produce bit-identical outputs.

/// Row-major f64 matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "shape/data mismatch");
        Mat { rows, cols, data }
    }

    #[inline(always)]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline(always)]
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }

    #[inline(always)]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline(always)]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Mat {
        let mut out = Mat::zeros(self.cols, self.rows);
        transpose_into(&mut out, self);
        out
    }

    /// Zero every element, keeping the allocation.
    pub fn fill_zero(&mut self) {
        self.data.iter_mut().for_each(|x| *x = 0.0);
    }
}

/// `out = m^T`. `out` must already have the transposed shape.
pub fn transpose_into(out: &mut Mat, m: &Mat) {
    assert_eq!(out.rows, m.cols);
    assert_eq!(out.cols, m.rows);
    const T: usize = 8; // 8x8 f64 tiles: one cache line per row
    let (r, c) = (m.rows, m.cols);
    for i0 in (0..r).step_by(T) {
        for j0 in (0..c).step_by(T) {
            let i1 = (i0 + T).min(r);
            let j1 = (j0 + T).min(c);
            for i in i0..i1 {
                for j in j0..j1 {
                    out.data[j * r + i] = m.data[i * c + j];
                }
            }
        }
    }
}

/// Column sums of `m` into a caller-provided buffer (used for bias
/// gradients on the training hot path).
pub fn col_sums_into(m: &Mat, out: &mut [f64]) {
    assert_eq!(out.len(), m.cols, "output length differs from column count");
    out.iter_mut().for_each(|x| *x = 0.0);
    for r in 0..m.rows {
        let row = m.row(r);
        for (o, &v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
}

/// Fresh-allocation convenience wrapper around [`col_sums_into`].
pub fn col_sums(m: &Mat) -> Vec<f64> {
    let mut out = vec![0.0; m.cols];
    col_sums_into(m, &mut out);
    out
}

/// `c = a * b`, overwriting `c`. Shapes must already agree.
pub fn matmul_into(c: &mut Mat, a: &Mat, b: &Mat) {
    assert_eq!(a.cols, b.rows, "inner dimensions differ");
    assert_eq!(c.rows, a.rows, "output rows differ");
    assert_eq!(c.cols, b.cols, "output cols differ");
    let (m, k, n) = (a.rows, a.cols, b.cols);
    if m == 0 || k == 0 || n == 0 {
        c.fill_zero();
        return;
    }
    // Row-major strides throughout; beta = 0 overwrites C without reading it.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            k as isize,
            1,
            b.data.as_ptr(),
            n as isize,
            1,
            0.0,
            c.data.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `c = a * b^T`, overwriting `c`. No transpose is materialized: the
/// kernel reads `b` column-major (row stride 1, column stride `b.cols`),
/// which is exactly `b^T` in row-major terms.
pub fn matmul_nt_into(c: &mut Mat, a: &Mat, b: &Mat) {
    assert_eq!(a.cols, b.cols, "inner dimensions differ");
    assert_eq!(c.rows, a.rows, "output rows differ");
    assert_eq!(c.cols, b.rows, "output cols differ");
    let (m, k, n) = (a.rows, a.cols, b.rows);
    if m == 0 || k == 0 || n == 0 {
        c.fill_zero();
        return;
    }
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            k as isize,
            1,
            b.data.as_ptr(),
            1,
            k as isize,
            0.0,
            c.data.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `c = a^T * b`, overwriting `c`. As with [`matmul_nt_into`], the
/// transposition happens in the kernel's stride arguments, not in memory.
pub fn matmul_tn_into(c: &mut Mat, a: &Mat, b: &Mat) {
    assert_eq!(a.rows, b.rows, "inner dimensions differ");
    assert_eq!(c.rows, a.cols, "output rows differ");
    assert_eq!(c.cols, b.cols, "output cols differ");
    let (m, k, n) = (a.cols, a.rows, b.cols);
    if m == 0 || k == 0 || n == 0 {
        c.fill_zero();
        return;
    }
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            1,
            m as isize,
            b.data.as_ptr(),
            n as isize,
            1,
            0.0,
            c.data.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Fresh-allocation convenience wrapper around [`matmul_into`].
pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    let mut c = Mat::zeros(a.rows, b.cols);
    matmul_into(&mut c, a, b);
    c
}

/// Textbook triple loop, kept as the oracle the tuned kernel is tested
/// against. Never used on a hot path.
pub fn naive_matmul(a: &Mat, b: &Mat) -> Mat {
    assert_eq!(a.cols, b.rows);
    let mut c = Mat::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        for j in 0..b.cols {
            let mut s = 0.0;
            for kk in 0..a.cols {
                s += a.at(i, kk) * b.at(kk, j);
            }
            *c.at_mut(i, j) = s;
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
        let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Mat::from_vec(rows, cols, data)
    }

    fn assert_close(a: &Mat, b: &Mat, tol: f64) {
        assert_eq!((a.rows, a.cols), (b.rows, b.cols));
        for (x, y) in a.data.iter().zip(&b.data) {
            let scale = 1.0f64.max(x.abs()).max(y.abs());
            assert!(
                (x - y).abs() / scale < tol,
                "kernel {x} vs oracle {y}"
            );
        }
    }

    #[test]
    fn kernel_matches_naive_across_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        // Covers: panel-exact, ragged column tails, row-quad tails, tiny
        // inner dims (first layer), k-blocking (k > 512), and skinny
        // outputs (output layer).
        let shapes = [
            (4, 4, 4),
            (64, 64, 64),
            (128, 128, 128),
            (5, 7, 3),
            (33, 2, 128),
            (130, 128, 3),
            (17, 600, 35),
            (3, 1030, 96),
            (97, 129, 67),
            (1, 1, 1),
        ];
        for &(m, k, n) in &shapes {
            let a = random_mat(&mut rng, m, k);
            let b = random_mat(&mut rng, k, n);
            let fast = matmul(&a, &b);
            let slow = naive_matmul(&a, &b);
            assert_close(&fast, &slow, 1e-12);
        }
    }

    #[test]
    fn strided_variants_match_materialized_transposes() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        // (m, k, n) as seen by the product; covers the hot backward shapes
        // (dw: skinny-tall, da: wide) plus ragged tails.
        let shapes = [(4, 4, 4), (3, 4096, 128), (128, 4096, 128), (97, 33, 5), (1, 2, 1)];
        for &(m, k, n) in &shapes {
            let a = random_mat(&mut rng, m, k);
            let b_t = random_mat(&mut rng, n, k); // b^T stored directly
            let mut c = Mat::zeros(m, n);
            matmul_nt_into(&mut c, &a, &b_t);
            assert_close(&c, &naive_matmul(&a, &b_t.transpose()), 1e-12);

            let a_t = random_mat(&mut rng, k, m); // a^T stored directly
            let b = random_mat(&mut rng, k, n);
            let mut c = Mat::zeros(m, n);
            matmul_tn_into(&mut c, &a_t, &b);
            assert_close(&c, &naive_matmul(&a_t.transpose(), &b), 1e-12);
        }
    }

    #[test]
    fn strided_variants_handle_zero_dims() {
        let a = Mat::zeros(0, 4);
        let b_t = Mat::zeros(3, 4);
        let mut c = Mat::from_vec(0, 3, vec![]);
        matmul_nt_into(&mut c, &a, &b_t);
        let a_t = Mat::zeros(0, 2);
        let b = Mat::zeros(0, 5);
        let mut c = Mat::from_vec(2, 5, vec![7.0; 10]);
        matmul_tn_into(&mut c, &a_t, &b);
        assert!(c.data.iter().all(|&x| x == 0.0), "empty inner dim must zero the output");
    }

    #[test]
    fn kernel_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_mat(&mut rng, 61, 200);
        let b = random_mat(&mut rng, 200, 45);
        let c1 = matmul(&a, &b);
        let c2 = matmul(&a, &b);
        assert_eq!(c1.data, c2.data);
    }

    #[test]
    fn transpose_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_mat(&mut rng, 37, 90);
        let tt = m.transpose().transpose();
        assert_eq!(m, tt);
        let t = m.transpose();
        for i in 0..m.rows {
            for j in 0..m.cols {
                assert_eq!(m.at(i, j), t.at(j, i));
            }
        }
    }

    #[test]
    fn col_sums_match_manual() {
        let m = Mat::from_vec(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(col_sums(&m), vec![9.0, 12.0]);
        // The into-variant clears stale contents before accumulating.
        let mut buf = vec![100.0, -100.0];
        col_sums_into(&m, &mut buf);
        assert_eq!(buf, vec![9.0, 12.0]);
    }

    #[test]
    fn zero_sized_inputs_are_fine() {
        let a = Mat::zeros(0, 4);
        let b = Mat::zeros(4, 2);
        let c = matmul(&a, &b);
        assert_eq!((c.rows, c.cols), (0, 2));
    }
}
