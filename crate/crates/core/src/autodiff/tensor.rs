use std::fmt;

use crate::error::{Error, Result};

/// Stand-in for negative infinity in attention masks.
///
/// Finite so that adding a scaled distance bias to a masked entry stays finite.
pub const SENTINEL: f64 = -1e9;

/// Logits at or below this value receive exactly zero softmax weight.
pub const MASKED_THRESHOLD: f64 = -1e8;

#[inline]
pub fn is_masked(x: f64) -> bool {
    x <= MASKED_THRESHOLD
}

/// Dense row-major array of `f64`.
///
/// Every operation the encoder needs works on 2-D tensors; a scalar is `[1, 1]`.
#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor{:?}", self.shape)?;
        if self.data.len() <= 64 {
            write!(f, " {:?}", self.data)?;
        }
        Ok(())
    }
}

impl Tensor {
    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::Empty("tensor shape has a zero extent"));
        }
        if numel != data.len() {
            return Err(Error::dim("Tensor::new", shape, &[data.len()]));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor {
            shape: vec![rows, cols],
            data: vec![0.0; rows * cols],
        }
    }

    pub fn full(rows: usize, cols: usize, value: f64) -> Self {
        Tensor {
            shape: vec![rows, cols],
            data: vec![value; rows * cols],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor {
            shape: vec![1, 1],
            data: vec![value],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Tensor::zeros(n, n);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    /// Build a 2-D tensor from nested rows. Panics on ragged input.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let r = rows.len();
        let c = rows.first().map(|row| row.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.as_ref().len(), c, "ragged rows");
            data.extend_from_slice(row.as_ref());
        }
        Tensor {
            shape: vec![r, c],
            data,
        }
    }

    pub fn row_vector(values: &[f64]) -> Self {
        Tensor {
            shape: vec![1, values.len()],
            data: values.to_vec(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        self.shape[1..].iter().product()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols() + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        let cols = self.cols();
        self.data[r * cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows()).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn item(&self) -> Result<f64> {
        if self.data.len() != 1 {
            return Err(Error::dim("item", &self.shape, &[1, 1]));
        }
        Ok(self.data[0])
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        assert_eq!(self.shape, other.shape);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    fn same_shape(&self, other: &Tensor, op: &'static str) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::dim(op, &self.shape, &other.shape));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    fn zip_with(&self, other: &Tensor, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        self.same_shape(other, op)?;
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, "mul", |a, b| a * b)
    }

    pub fn scale(&self, s: f64) -> Tensor {
        self.map(|x| x * s)
    }

    pub fn relu(&self) -> Tensor {
        self.map(|x| if x <= 0.0 { 0.0 } else { x })
    }

    pub fn sigmoid(&self) -> Tensor {
        self.map(sigmoid)
    }

    pub fn abs(&self) -> Tensor {
        self.map(f64::abs)
    }

    /// Add a `[1, cols]` row to every row.
    pub fn add_row(&self, bias: &Tensor) -> Result<Tensor> {
        if bias.rows() != 1 || bias.cols() != self.cols() {
            return Err(Error::dim("add_row", &self.shape, &bias.shape));
        }
        let c = self.cols();
        let mut out = self.clone();
        for row in out.data.chunks_mut(c) {
            for (x, b) in row.iter_mut().zip(&bias.data) {
                *x += b;
            }
        }
        Ok(out)
    }

    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        let (m, k) = (self.rows(), self.cols());
        let (k2, n) = (other.rows(), other.cols());
        if k != k2 {
            return Err(Error::dim("matmul", &self.shape, &other.shape));
        }
        let mut out = vec![0.0; m * n];
        gemm(
            m,
            k,
            n,
            &self.data,
            [k as isize, 1],
            &other.data,
            [n as isize, 1],
            &mut out,
            0.0,
        );
        Ok(Tensor {
            shape: vec![m, n],
            data: out,
        })
    }

    pub fn transpose(&self) -> Tensor {
        let (r, c) = (self.rows(), self.cols());
        let mut data = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                data[j * r + i] = self.data[i * c + j];
            }
        }
        Tensor {
            shape: vec![c, r],
            data,
        }
    }

    /// Row-wise softmax. Entries at or below [`MASKED_THRESHOLD`] get weight exactly 0.
    /// A row containing NaN comes out all NaN.
    pub fn softmax_rows(&self) -> Result<Tensor> {
        let c = self.cols();
        let mut out = vec![0.0; self.data.len()];
        for (r, (row, dst)) in self.data.chunks(c).zip(out.chunks_mut(c)).enumerate() {
            if row.iter().any(|x| x.is_nan()) {
                dst.fill(f64::NAN);
                continue;
            }
            let max = row
                .iter()
                .copied()
                .filter(|&x| !is_masked(x))
                .fold(f64::NEG_INFINITY, f64::max);
            if max == f64::NEG_INFINITY {
                return Err(Error::DegenerateRow { row: r });
            }
            let mut sum = 0.0;
            for (d, &x) in dst.iter_mut().zip(row) {
                if !is_masked(x) {
                    *d = (x - max).exp();
                    sum += *d;
                }
            }
            for d in dst.iter_mut() {
                *d /= sum;
            }
        }
        Ok(Tensor {
            shape: self.shape.clone(),
            data: out,
        })
    }

    /// Row-wise layer normalization followed by the affine `gain`, `bias` (both `[1, cols]`).
    pub fn layer_norm(&self, gain: &Tensor, bias: &Tensor, eps: f64) -> Result<Tensor> {
        let c = self.cols();
        for p in [gain, bias] {
            if p.rows() != 1 || p.cols() != c {
                return Err(Error::dim("layer_norm", &self.shape, &p.shape));
            }
        }
        let mut out = self.normalize_rows(eps).0;
        for row in out.data.chunks_mut(c) {
            for ((x, g), b) in row.iter_mut().zip(&gain.data).zip(&bias.data) {
                *x = *x * g + b;
            }
        }
        Ok(out)
    }

    /// Zero-mean unit-variance rows, plus the per-row inverse standard deviation.
    pub(crate) fn normalize_rows(&self, eps: f64) -> (Tensor, Vec<f64>) {
        let c = self.cols();
        let n = c as f64;
        let mut data = vec![0.0; self.data.len()];
        let mut inv_std = Vec::with_capacity(self.rows());
        for (row, dst) in self.data.chunks(c).zip(data.chunks_mut(c)) {
            let mean = row.iter().sum::<f64>() / n;
            let var = row.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
            let is = 1.0 / (var + eps).sqrt();
            for (d, x) in dst.iter_mut().zip(row) {
                *d = (x - mean) * is;
            }
            inv_std.push(is);
        }
        (
            Tensor {
                shape: self.shape.clone(),
                data,
            },
            inv_std,
        )
    }

    pub fn concat_cols(parts: &[&Tensor]) -> Result<Tensor> {
        let first = parts.first().ok_or(Error::Empty("concat_cols of nothing"))?;
        let r = first.rows();
        for p in parts {
            if p.rows() != r {
                return Err(Error::dim("concat_cols", &first.shape, &p.shape));
            }
        }
        let total: usize = parts.iter().map(|p| p.cols()).sum();
        let mut data = Vec::with_capacity(r * total);
        for i in 0..r {
            for p in parts {
                data.extend_from_slice(p.row(i));
            }
        }
        Ok(Tensor {
            shape: vec![r, total],
            data,
        })
    }

    pub fn concat_rows(parts: &[&Tensor]) -> Result<Tensor> {
        let first = parts.first().ok_or(Error::Empty("concat_rows of nothing"))?;
        let c = first.cols();
        for p in parts {
            if p.cols() != c {
                return Err(Error::dim("concat_rows", &first.shape, &p.shape));
            }
        }
        let total: usize = parts.iter().map(|p| p.rows()).sum();
        let mut data = Vec::with_capacity(total * c);
        for p in parts {
            data.extend_from_slice(&p.data);
        }
        Ok(Tensor {
            shape: vec![total, c],
            data,
        })
    }

    pub fn slice_rows(&self, start: usize, len: usize) -> Result<Tensor> {
        if len == 0 || start + len > self.rows() {
            return Err(Error::dim("slice_rows", &self.shape, &[start, len]));
        }
        let c = self.cols();
        Ok(Tensor {
            shape: vec![len, c],
            data: self.data[start * c..(start + len) * c].to_vec(),
        })
    }

    pub fn slice_cols(&self, start: usize, len: usize) -> Result<Tensor> {
        if len == 0 || start + len > self.cols() {
            return Err(Error::dim("slice_cols", &self.shape, &[start, len]));
        }
        let mut data = Vec::with_capacity(self.rows() * len);
        for r in 0..self.rows() {
            data.extend_from_slice(&self.row(r)[start..start + len]);
        }
        Ok(Tensor {
            shape: vec![self.rows(), len],
            data,
        })
    }

    /// Column-wise maximum over all rows, `[1, cols]`, with the winning row per column.
    pub fn max_rows(&self) -> (Tensor, Vec<usize>) {
        let c = self.cols();
        let mut best = self.row(0).to_vec();
        let mut arg = vec![0; c];
        for r in 1..self.rows() {
            for (j, &x) in self.row(r).iter().enumerate() {
                if x > best[j] {
                    best[j] = x;
                    arg[j] = r;
                }
            }
        }
        (Tensor::row_vector(&best), arg)
    }

    /// Column sums, `[1, cols]`.
    pub fn sum_rows(&self) -> Tensor {
        let c = self.cols();
        let mut acc = vec![0.0; c];
        for row in self.data.chunks(c) {
            for (a, x) in acc.iter_mut().zip(row) {
                *a += x;
            }
        }
        Tensor::row_vector(&acc)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Row lookup; `ids[i]` selects the i-th output row.
    pub fn gather_rows(&self, ids: &[usize]) -> Result<Tensor> {
        if ids.is_empty() {
            return Err(Error::Empty("gather_rows with no ids"));
        }
        let c = self.cols();
        let mut data = Vec::with_capacity(ids.len() * c);
        for &id in ids {
            if id >= self.rows() {
                return Err(Error::IdOutOfRange { id, rows: self.rows() });
            }
            data.extend_from_slice(self.row(id));
        }
        Ok(Tensor {
            shape: vec![ids.len(), c],
            data,
        })
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `c = a·b + beta·c` for an `m×k` by `k×n` product with arbitrary (row, col) strides.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_strides: [isize; 2],
    b: &[f64],
    b_strides: [isize; 2],
    c: &mut [f64],
    beta: f64,
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    // SAFETY: the asserts above bound every index reachable through the given
    // strides, which describe m×k, k×n and m×n views of dense buffers.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            a_strides[0],
            a_strides[1],
            b.as_ptr(),
            b_strides[0],
            b_strides[1],
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
