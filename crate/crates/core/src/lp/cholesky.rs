//! Dense Cholesky factorisation for the interior-point normal equations.

/// Lower-triangular factor stored row-major in a full `n x n` buffer.
pub(crate) struct Cholesky {
    n: usize,
    l: Vec<f64>,
    /// Rows whose pivot collapsed; their solution components are forced to
    /// zero, which is the standard treatment for dependent constraints.
    dropped: usize,
}

/// Pivot substituted for a collapsed one.
const HUGE_PIVOT: f64 = 1e64;

/// A pivot collapses when elimination cancels all but this fraction of the
/// row's own diagonal.
const CANCELLATION: f64 = 1e-16;

impl Cholesky {
    /// Factors the symmetric positive semidefinite matrix whose lower
    /// triangle is stored row-major in `a` (upper triangle ignored).
    pub(crate) fn factor(n: usize, mut a: Vec<f64>) -> Self {
        debug_assert_eq!(a.len(), n * n);
        let mut dropped = 0;
        for i in 0..n {
            let (done, rest) = a.split_at_mut(i * n);
            let row_i = &mut rest[..n];
            for j in 0..i {
                let row_j = &done[j * n..j * n + j];
                let s = row_i[j] - dot(&row_i[..j], row_j);
                row_i[j] = s / done[j * n + j];
            }
            let diag = row_i[i];
            let d = diag - dot(&row_i[..i], &row_i[..i]);
            if !(d > CANCELLATION * diag) {
                row_i[i] = HUGE_PIVOT;
                dropped += 1;
            } else {
                row_i[i] = d.sqrt();
            }
        }
        Self { n, l: a, dropped }
    }

    pub(crate) fn dropped(&self) -> usize {
        self.dropped
    }

    pub(crate) fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            b[i] = (b[i] - dot(row, &b[..i])) / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..n {
                s -= self.l[k * n + i] * b[k];
            }
            b[i] = s / self.l[i * n + i];
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four accumulators let the compiler vectorise the reduction.
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let k = 4 * c;
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in 4 * chunks..a.len() {
        s += a[k] * b[k];
    }
    s
}
