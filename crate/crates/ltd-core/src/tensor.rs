//! Dense third-order tensors and real matrices.
//!
//! A [`Tensor3`] stores its entries band-sequentially: the frontal slice index
//! varies slowest, then the row, then the column. The entry `(i, j, k)` lives
//! at offset `(k * n1 + i) * n2 + j`, so every frontal slice is a contiguous
//! `n1 x n2` row-major block. This makes the per-slice Fourier-domain work
//! (products, SVDs) operate on contiguous memory.
//!
//! Mode-3 tubes `(i, j, :)` are strided with stride `n1 * n2`; mode-3
//! unfolding is therefore a pure reinterpretation of the same buffer as an
//! `n3 x (n1 * n2)` row-major matrix.

use crate::error::{LtdError, Result};

/// Dense real third-order tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    n1: usize,
    n2: usize,
    n3: usize,
    values: Vec<f64>,
}

impl Tensor3 {
    /// All-zero tensor of the given shape.
    pub fn zeros(n1: usize, n2: usize, n3: usize) -> Self {
        Self {
            n1,
            n2,
            n3,
            values: vec![0.0; n1 * n2 * n3],
        }
    }

    /// Build from a band-sequential value buffer.
    ///
    /// Fails if the length does not equal `n1 * n2 * n3` or any entry is not
    /// finite.
    pub fn from_values(n1: usize, n2: usize, n3: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n1 * n2 * n3 {
            return Err(LtdError::DimensionMismatch(format!(
                "expected {} values for a {}x{}x{} tensor, got {}",
                n1 * n2 * n3,
                n1,
                n2,
                n3,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LtdError::InvalidInput(
                "tensor contains non-finite entries".into(),
            ));
        }
        Ok(Self { n1, n2, n3, values })
    }

    /// Shape as `(n1, n2, n3)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n1, self.n2, self.n3)
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn n3(&self) -> usize {
        self.n3
    }

    #[inline]
    pub(crate) fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.n1 + i) * self.n2 + j
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.offset(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let o = self.offset(i, j, k);
        self.values[o] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Contiguous view of frontal slice `k` (`n1 x n2`, row-major).
    pub fn frontal_slice(&self, k: usize) -> &[f64] {
        let len = self.n1 * self.n2;
        &self.values[k * len..(k + 1) * len]
    }

    pub fn frontal_slice_mut(&mut self, k: usize) -> &mut [f64] {
        let len = self.n1 * self.n2;
        &mut self.values[k * len..(k + 1) * len]
    }

    /// Copy the mode-3 tube `(i, j, :)` into `buf` (length `n3`).
    pub fn copy_tube_into(&self, i: usize, j: usize, buf: &mut [f64]) {
        debug_assert_eq!(buf.len(), self.n3);
        let stride = self.n1 * self.n2;
        let base = i * self.n2 + j;
        for (k, b) in buf.iter_mut().enumerate() {
            *b = self.values[base + k * stride];
        }
    }

    /// Overwrite the mode-3 tube `(i, j, :)` from `buf`.
    pub fn set_tube(&mut self, i: usize, j: usize, buf: &[f64]) {
        debug_assert_eq!(buf.len(), self.n3);
        let stride = self.n1 * self.n2;
        let base = i * self.n2 + j;
        for (k, b) in buf.iter().enumerate() {
            self.values[base + k * stride] = *b;
        }
    }

    /// Euclidean norm of the mode-3 tube `(i, j, :)`.
    pub fn tube_norm(&self, i: usize, j: usize) -> f64 {
        let stride = self.n1 * self.n2;
        let base = i * self.n2 + j;
        let mut acc = 0.0;
        for k in 0..self.n3 {
            let v = self.values[base + k * stride];
            acc += v * v;
        }
        acc.sqrt()
    }

    /// Frobenius norm of the lateral slice `(:, j, :)`.
    pub fn lateral_slice_norm(&self, j: usize) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.n3 {
            let slice = self.frontal_slice(k);
            for i in 0..self.n1 {
                let v = slice[i * self.n2 + j];
                acc += v * v;
            }
        }
        acc.sqrt()
    }

    pub fn frobenius_norm_sqr(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_norm_sqr().sqrt()
    }

    /// Entry-wise map.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor3 {
        Tensor3 {
            n1: self.n1,
            n2: self.n2,
            n3: self.n3,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Entry-wise `a * self + b * other`.
    pub fn lin_comb(&self, a: f64, other: &Tensor3, b: f64) -> Result<Tensor3> {
        if self.dims() != other.dims() {
            return Err(LtdError::DimensionMismatch(format!(
                "lin_comb of {:?} and {:?}",
                self.dims(),
                other.dims()
            )));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&x, &y)| a * x + b * y)
            .collect();
        Ok(Tensor3 {
            n1: self.n1,
            n2: self.n2,
            n3: self.n3,
            values,
        })
    }

    /// Squared Frobenius distance to `other`.
    pub fn dist_sqr(&self, other: &Tensor3) -> f64 {
        debug_assert_eq!(self.dims(), other.dims());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(&x, &y)| (x - y) * (x - y))
            .sum()
    }

    /// New tensor keeping only the lateral slices listed in `indices`.
    pub fn select_lateral(&self, indices: &[usize]) -> Tensor3 {
        let mut out = Tensor3::zeros(self.n1, indices.len(), self.n3);
        for k in 0..self.n3 {
            let src = self.frontal_slice(k);
            let dst = out.frontal_slice_mut(k);
            for i in 0..self.n1 {
                for (jj, &j) in indices.iter().enumerate() {
                    dst[i * indices.len() + jj] = src[i * self.n2 + j];
                }
            }
        }
        out
    }

    /// Concatenate `other` after `self` along the lateral axis.
    pub fn concat_lateral(&self, other: &Tensor3) -> Result<Tensor3> {
        if self.n1 != other.n1 || self.n3 != other.n3 {
            return Err(LtdError::DimensionMismatch(format!(
                "lateral concat of {:?} and {:?}",
                self.dims(),
                other.dims()
            )));
        }
        let n2 = self.n2 + other.n2;
        let mut out = Tensor3::zeros(self.n1, n2, self.n3);
        for k in 0..self.n3 {
            let a = self.frontal_slice(k);
            let b = other.frontal_slice(k);
            let dst = out.frontal_slice_mut(k);
            for i in 0..self.n1 {
                dst[i * n2..i * n2 + self.n2]
                    .copy_from_slice(&a[i * self.n2..(i + 1) * self.n2]);
                dst[i * n2 + self.n2..(i + 1) * n2]
                    .copy_from_slice(&b[i * other.n2..(i + 1) * other.n2]);
            }
        }
        Ok(out)
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Conjugate transpose under the t-product: transpose every frontal slice and
/// reverse the order of slices `2..n3`.
pub fn conj_transpose(x: &Tensor3) -> Tensor3 {
    let (n1, n2, n3) = x.dims();
    let mut out = Tensor3::zeros(n2, n1, n3);
    for k in 0..n3 {
        let src_k = if k == 0 { 0 } else { n3 - k };
        let src = x.frontal_slice(src_k);
        let dst = out.frontal_slice_mut(k);
        for i in 0..n1 {
            for j in 0..n2 {
                dst[j * n1 + i] = src[i * n2 + j];
            }
        }
    }
    out
}

/// Identity tensor: first frontal slice is `I_n`, all other slices zero.
pub fn identity_tensor(n: usize, n3: usize) -> Tensor3 {
    let mut out = Tensor3::zeros(n, n, n3);
    for i in 0..n {
        out.set(i, i, 0, 1.0);
    }
    out
}

/// Indices of lateral slices with Frobenius norm strictly above `tol`.
///
/// The solver calls this with `tol = 0` because its proximal steps produce
/// exact zeros.
pub fn group_support(z: &Tensor3, tol: f64) -> Vec<usize> {
    (0..z.n2())
        .filter(|&j| z.lateral_slice_norm(j) > tol)
        .collect()
}

// ---------------------------------------------------------------------------
// Real matrices
// ---------------------------------------------------------------------------

/// Dense real matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn from_values(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(LtdError::DimensionMismatch(format!(
                "expected {} values for a {}x{} matrix, got {}",
                rows * cols,
                rows,
                cols,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LtdError::InvalidInput(
                "matrix contains non-finite entries".into(),
            ));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.values[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.values[c * self.rows + r] = self.values[r * self.cols + c];
            }
        }
        out
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(LtdError::DimensionMismatch(format!(
                "matmul of {}x{} and {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.values[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let src = &other.values[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.values[i * other.cols..(i + 1) * other.cols];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        Ok(out)
    }

    /// `self * v` for a column vector `v`.
    pub fn mat_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|r| {
                self.row(r)
                    .iter()
                    .zip(v)
                    .map(|(&a, &b)| a * b)
                    .sum::<f64>()
            })
            .collect()
    }

    pub fn frobenius_norm_sqr(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_norm_sqr().sqrt()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn lin_comb(&self, a: f64, other: &Matrix, b: f64) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(LtdError::DimensionMismatch(format!(
                "lin_comb of {}x{} and {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&x, &y)| a * x + b * y)
            .collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            values,
        })
    }

    pub fn dist_sqr(&self, other: &Matrix) -> f64 {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.values
            .iter()
            .zip(&other.values)
            .map(|(&x, &y)| (x - y) * (x - y))
            .sum()
    }
}

/// Largest singular value via power iteration on the Gram matrix.
///
/// The iteration runs on the smaller of `m * m^T` and `m^T * m` (same nonzero
/// spectrum), at most 100 steps, stopping when the Rayleigh quotient changes
/// by less than `1e-10` relative. Returns 0 for the zero matrix.
pub fn spectral_norm(m: &Matrix) -> f64 {
    let (rows, cols) = (m.rows, m.cols);
    if rows == 0 || cols == 0 {
        return 0.0;
    }
    // Gram matrix on the smaller side.
    let n = rows.min(cols);
    let mut gram = vec![0.0; n * n];
    if rows <= cols {
        for a in 0..n {
            for b in a..n {
                let dot: f64 = m.row(a).iter().zip(m.row(b)).map(|(&x, &y)| x * y).sum();
                gram[a * n + b] = dot;
                gram[b * n + a] = dot;
            }
        }
    } else {
        for a in 0..n {
            for b in a..n {
                let mut dot = 0.0;
                for r in 0..rows {
                    dot += m.values[r * cols + a] * m.values[r * cols + b];
                }
                gram[a * n + b] = dot;
                gram[b * n + a] = dot;
            }
        }
    }

    // Deterministic start vector with a mild tilt so it is not orthogonal to
    // the leading eigenvector of typical structured matrices.
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64) * 1e-3).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);

    let mut lambda = 0.0;
    for _ in 0..100 {
        let mut w = vec![0.0; n];
        for a in 0..n {
            let mut acc = 0.0;
            for b in 0..n {
                acc += gram[a * n + b] * v[b];
            }
            w[a] = acc;
        }
        let wn = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if wn == 0.0 {
            return 0.0;
        }
        let new_lambda: f64 = v.iter().zip(&w).map(|(&a, &b)| a * b).sum();
        w.iter_mut().for_each(|x| *x /= wn);
        v = w;
        if (new_lambda - lambda).abs() <= 1e-10 * new_lambda.abs().max(f64::MIN_POSITIVE) {
            lambda = new_lambda;
            break;
        }
        lambda = new_lambda;
    }
    lambda.max(0.0).sqrt()
}

// ---------------------------------------------------------------------------
// Mode-3 unfolding and products
// ---------------------------------------------------------------------------

/// Mode-3 unfolding: an `n3 x (n1 * n2)` matrix with
/// `X_(3)(k, i * n2 + j) = x(i, j, k)` (zero-based).
///
/// With the band-sequential layout this is a straight copy of the value
/// buffer.
pub fn mode3_unfold(x: &Tensor3) -> Matrix {
    let (n1, n2, n3) = x.dims();
    Matrix {
        rows: n3,
        cols: n1 * n2,
        values: x.values().to_vec(),
    }
}

/// Inverse of [`mode3_unfold`] for the given shape.
pub fn mode3_fold(m: &Matrix, dims: (usize, usize, usize)) -> Result<Tensor3> {
    let (n1, n2, n3) = dims;
    if m.rows != n3 || m.cols != n1 * n2 {
        return Err(LtdError::DimensionMismatch(format!(
            "cannot fold a {}x{} matrix into a {}x{}x{} tensor",
            m.rows, m.cols, n1, n2, n3
        )));
    }
    Ok(Tensor3 {
        n1,
        n2,
        n3,
        values: m.values.clone(),
    })
}

/// Mode-3 tensor-matrix product: `(x ×₃ m)(i, j, k) = Σ_l x(i, j, l) m(k, l)`
/// for `m` of shape `p x n3`, giving an `n1 x n2 x p` tensor.
pub fn mode3_product(x: &Tensor3, m: &Matrix) -> Result<Tensor3> {
    let (n1, n2, n3) = x.dims();
    if m.cols != n3 {
        return Err(LtdError::DimensionMismatch(format!(
            "mode-3 product of {:?} tensor with {}x{} matrix",
            x.dims(),
            m.rows,
            m.cols
        )));
    }
    let mut out = Tensor3::zeros(n1, n2, m.rows);
    let plane = n1 * n2;
    for k in 0..m.rows {
        let dst = out.frontal_slice_mut(k);
        for l in 0..n3 {
            let w = m.get(k, l);
            if w == 0.0 {
                continue;
            }
            let src = &x.values[l * plane..(l + 1) * plane];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += w * s;
            }
        }
    }
    Ok(out)
}

/// Gram-style contraction used for the basis gradient:
/// `out(k, l) = Σ_{i,j} x(i, j, k) * y(i, j, l)` for `x` of shape
/// `n1 x n2 x n3` and `y` of shape `n1 x n2 x p`, giving `n3 x p`.
///
/// This equals `X_(3) * Y_(3)^T` without forming the unfoldings.
pub fn mode3_gram(x: &Tensor3, y: &Tensor3) -> Result<Matrix> {
    if x.n1() != y.n1() || x.n2() != y.n2() {
        return Err(LtdError::DimensionMismatch(format!(
            "mode-3 gram of {:?} and {:?}",
            x.dims(),
            y.dims()
        )));
    }
    let mut out = Matrix::zeros(x.n3(), y.n3());
    for k in 0..x.n3() {
        let xs = x.frontal_slice(k);
        for l in 0..y.n3() {
            let ys = y.frontal_slice(l);
            let dot: f64 = xs.iter().zip(ys).map(|(&a, &b)| a * b).sum();
            out.set(k, l, dot);
        }
    }
    Ok(out)
}
