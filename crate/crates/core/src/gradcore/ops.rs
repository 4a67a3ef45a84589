//! Forward semantics of every primitive, independent of the tape.

use super::tensor::{matmul, Tensor2D, Trans};
use crate::error::{Error, Result};

/// `x · w + b`, with `b` (1 x h) broadcast over the rows of `x`.
pub fn affine(x: &Tensor2D, w: &Tensor2D, b: &Tensor2D) -> Result<Tensor2D> {
    if b.rows() != 1 || b.cols() != w.cols() {
        return Err(Error::ShapeMismatch {
            op: "affine(bias)",
            lhs: w.shape(),
            rhs: b.shape(),
        });
    }
    let mut out = matmul(x, Trans::No, w, Trans::No)?;
    let bias = b.data();
    for r in 0..out.rows() {
        for (o, bj) in out.row_mut(r).iter_mut().zip(bias) {
            *o += bj;
        }
    }
    Ok(out)
}

pub fn relu(x: &Tensor2D) -> Tensor2D {
    x.map(|v| if v > 0.0 { v } else { 0.0 })
}

pub fn exp(x: &Tensor2D) -> Tensor2D {
    x.map(f64::exp)
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(x: &Tensor2D) -> Tensor2D {
    let mut out = x.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    out
}

/// Elementwise natural log. With `floor = Some(f)` entries below `f` are
/// clamped to `f` first; with `None` any nonpositive entry is an error.
pub fn log_rows(x: &Tensor2D, floor: Option<f64>) -> Result<Tensor2D> {
    match floor {
        Some(f) => Ok(x.map(|v| v.max(f).ln())),
        None => {
            if let Some(bad) = x.data().iter().find(|&&v| v <= 0.0 || v.is_nan()) {
                return Err(Error::DomainError {
                    op: "log_rows",
                    detail: format!("log of nonpositive entry {bad}"),
                });
            }
            Ok(x.map(f64::ln))
        }
    }
}

pub fn hadamard(a: &Tensor2D, b: &Tensor2D) -> Result<Tensor2D> {
    a.zip_map(b, "hadamard", |x, y| x * y)
}

pub fn add(a: &Tensor2D, b: &Tensor2D) -> Result<Tensor2D> {
    a.zip_map(b, "add", |x, y| x + y)
}

pub fn scale(x: &Tensor2D, c: f64) -> Tensor2D {
    x.map(|v| c * v)
}

pub fn add_scalar(x: &Tensor2D, c: f64) -> Tensor2D {
    x.map(|v| v + c)
}

pub fn sum_all(x: &Tensor2D) -> Tensor2D {
    Tensor2D::scalar(x.sum())
}
