//! Dense row-major 2-D arrays of `f64` and the matrix-product kernels
//! shared by the forward and backward passes.

use std::fmt;

use crate::error::{Error, Result};

/// Left operands sparser than this use the zero-skipping kernel.
const SPARSE_DENSITY: f64 = 0.2;

#[derive(Clone, PartialEq)]
pub struct Tensor2D {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Tensor2D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor2D({}x{}) ", self.rows, self.cols)?;
        if self.data.len() <= 16 {
            f.debug_list().entries(self.data.iter()).finish()
        } else {
            write!(f, "[{}, {}, ... ]", self.data[0], self.data[1])
        }
    }
}

impl Tensor2D {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::full(rows, cols, 0.0)
    }

    pub fn full(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self::full(1, 1, value)
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                op: "from_vec",
                lhs: (rows, cols),
                rhs: (data.len(), 1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a tensor from nested rows; panics on ragged input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            assert_eq!(row.len(), cols, "ragged rows");
            data.extend_from_slice(row);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        self.data[r * self.cols + c] = value;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// The single entry of a 1x1 tensor.
    pub fn item(&self) -> Option<f64> {
        (self.data.len() == 1).then(|| self.data[0])
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.expect_same_shape(other, op)?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub(crate) fn expect_same_shape(&self, other: &Self, op: &'static str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                op,
                lhs: self.shape(),
                rhs: other.shape(),
            });
        }
        Ok(())
    }

    /// `self += other`, shapes must agree.
    pub fn add_assign(&mut self, other: &Self) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|x| *x = value);
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|r| self.row(r).iter().sum()).collect()
    }

    /// Column sums as a `1 x cols` tensor.
    pub fn col_sums(&self) -> Self {
        let mut out = Self::zeros(1, self.cols);
        for r in 0..self.rows {
            for (o, x) in out.data.iter_mut().zip(self.row(r)) {
                *o += x;
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    fn density(&self) -> f64 {
        if self.data.is_empty() {
            return 1.0;
        }
        let nnz = self.data.iter().filter(|&&x| x != 0.0).count();
        nnz as f64 / self.data.len() as f64
    }
}

/// Which operand of a product is read transposed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Trans {
    No,
    Yes,
}

fn logical_shape(t: &Tensor2D, trans: Trans) -> (usize, usize) {
    match trans {
        Trans::No => (t.rows, t.cols),
        Trans::Yes => (t.cols, t.rows),
    }
}

/// `op(a) · op(b)`.
///
/// A sparse operand (bag-of-words inputs, reconstruction gradients) goes
/// through a zero-skipping row-axpy kernel, a sparse right operand via
/// `(op(b)ᵀ op(a)ᵀ)ᵀ`; everything else through `matrixmultiply::dgemm`.
/// All paths are single-threaded with a fixed accumulation order, so
/// results are bitwise reproducible.
pub fn matmul(a: &Tensor2D, ta: Trans, b: &Tensor2D, tb: Trans) -> Result<Tensor2D> {
    let (m, k) = logical_shape(a, ta);
    let (k2, n) = logical_shape(b, tb);
    if k != k2 {
        return Err(Error::ShapeMismatch {
            op: "matmul",
            lhs: (m, k),
            rhs: (k2, n),
        });
    }
    let mut out = Tensor2D::zeros(m, n);
    if m == 0 || n == 0 || k == 0 {
        return Ok(out);
    }
    if a.density() < SPARSE_DENSITY {
        match tb {
            Trans::No => sparse_left(a, ta, b, &mut out),
            Trans::Yes => sparse_left(a, ta, &b.transpose(), &mut out),
        }
        return Ok(out);
    }
    if b.density() < SPARSE_DENSITY {
        let mut out_t = Tensor2D::zeros(n, m);
        let flip = |t| match t {
            Trans::No => Trans::Yes,
            Trans::Yes => Trans::No,
        };
        match ta {
            Trans::No => sparse_left(b, flip(tb), &a.transpose(), &mut out_t),
            Trans::Yes => sparse_left(b, flip(tb), a, &mut out_t),
        }
        return Ok(out_t.transpose());
    }
    let (rsa, csa) = match ta {
        Trans::No => (a.cols as isize, 1),
        Trans::Yes => (1, a.cols as isize),
    };
    let (rsb, csb) = match tb {
        Trans::No => (b.cols as isize, 1),
        Trans::Yes => (1, b.cols as isize),
    };
    // SAFETY: strides describe in-bounds views of `a.data` (m x k),
    // `b.data` (k x n) and `out.data` (m x n, row-major, exclusively borrowed).
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            0.0,
            out.data.as_mut_ptr(),
            n as isize,
            1,
        );
    }
    Ok(out)
}

fn sparse_left(a: &Tensor2D, ta: Trans, b: &Tensor2D, out: &mut Tensor2D) {
    let n = out.cols;
    match ta {
        // out[i,:] += a[i,k] * b[k,:]
        Trans::No => {
            for i in 0..a.rows {
                let out_row = &mut out.data[i * n..(i + 1) * n];
                for (k, &aik) in a.row(i).iter().enumerate() {
                    if aik != 0.0 {
                        axpy(aik, b.row(k), out_row);
                    }
                }
            }
        }
        // out = aᵀ b: out[i,:] += a[k,i] * b[k,:], walking stored rows of a.
        Trans::Yes => {
            for k in 0..a.rows {
                let b_row = b.row(k);
                for (i, &aki) in a.row(k).iter().enumerate() {
                    if aki != 0.0 {
                        axpy(aki, b_row, &mut out.data[i * n..(i + 1) * n]);
                    }
                }
            }
        }
    }
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
