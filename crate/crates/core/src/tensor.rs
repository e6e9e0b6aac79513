//! Minimal dense 2-D linear algebra: the [`Tensor`] carrier type, row-wise
//! softmax, matrix product, and a central-finite-difference gradient checker.
//!
//! Everything is 64-bit and row-major. Shapes are validated at operation
//! entry; values are immutable after construction and safe to share across
//! threads.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense 2-D array of `f64` in row-major order.
///
/// Serialized as `{"shape": [rows, cols], "data": [...]}`; deserialization
/// rejects shape/data length mismatches and non-finite entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TensorRepr", into = "TensorRepr")]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TensorRepr {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl TryFrom<TensorRepr> for Tensor {
    type Error = Error;

    fn try_from(repr: TensorRepr) -> Result<Tensor> {
        if repr.shape.len() != 2 {
            return Err(Error::InvalidShape {
                expected: "shape of rank 2".into(),
                actual: format!("rank {}", repr.shape.len()),
            });
        }
        Tensor::new(repr.shape[0], repr.shape[1], repr.data)
    }
}

impl From<Tensor> for TensorRepr {
    fn from(t: Tensor) -> TensorRepr {
        TensorRepr {
            shape: vec![t.rows, t.cols],
            data: t.data,
        }
    }
}

impl Tensor {
    /// Builds a tensor, validating the data length and entry finiteness.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidShape {
                expected: format!("{rows}x{cols} = {} entries", rows * cols),
                actual: format!("{} entries", data.len()),
            });
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure(format!(
                "non-finite tensor entry {bad}"
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds a tensor from nested rows; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidShape {
                expected: format!("rows of uniform length {m}"),
                actual: "ragged rows".into(),
            });
        }
        Self::new(n, m, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Returns a copy with `delta` added to entry `(i, j)`.
    pub fn with_nudged(&self, i: usize, j: usize, delta: f64) -> Self {
        let mut out = self.clone();
        out.data[i * self.cols + j] += delta;
        out
    }

    /// Maximum absolute entry; 0 for an empty tensor.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub(crate) fn shape_string(&self) -> String {
        format!("{}x{}", self.rows, self.cols)
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Row-wise softmax with per-row max subtraction.
///
/// Each output row is non-negative and sums to 1 within 1e-12; inputs with
/// entries as large as ±1e4 neither overflow nor produce NaN.
pub fn softmax_rows(logits: &Tensor) -> Result<Tensor> {
    if logits.is_empty() {
        return Err(Error::InvalidShape {
            expected: "non-empty tensor".into(),
            actual: logits.shape_string(),
        });
    }
    let mut out = Tensor::zeros(logits.rows, logits.cols);
    for i in 0..logits.rows {
        let row = logits.row(i);
        let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let dst = &mut out.data_mut()[i * logits.cols..(i + 1) * logits.cols];
        let mut sum = 0.0;
        for (d, &v) in dst.iter_mut().zip(row) {
            *d = (v - max).exp();
            sum += *d;
        }
        for d in dst.iter_mut() {
            *d /= sum;
        }
    }
    Ok(out)
}

/// Log-sum-exp of a row: `max + ln Σ exp(x - max)`.
pub(crate) fn logsumexp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Standard matrix product `a · b`.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.cols != b.rows {
        return Err(Error::InvalidShape {
            expected: format!("inner dimensions to agree ({} vs {})", a.cols, b.rows),
            actual: format!("{} * {}", a.shape_string(), b.shape_string()),
        });
    }
    let mut data = vec![0.0; a.rows * b.cols];
    for i in 0..a.rows {
        for k in 0..a.cols {
            let aik = a.get(i, k);
            let brow = b.row(k);
            let dst = &mut data[i * b.cols..(i + 1) * b.cols];
            for (d, &bkj) in dst.iter_mut().zip(brow) {
                *d += aik * bkj;
            }
        }
    }
    Tensor::new(a.rows, b.cols, data)
}

/// Default step size for [`finite_diff_grad`].
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Central-difference gradient of a scalar function of a tensor:
/// `(f(x + h·e_ij) - f(x - h·e_ij)) / 2h` per entry.
pub fn finite_diff_grad<F>(f: F, x: &Tensor, h: f64) -> Result<Tensor>
where
    F: Fn(&Tensor) -> Result<f64>,
{
    if !h.is_finite() || h <= 0.0 {
        return Err(Error::NumericalFailure(format!(
            "finite-difference step must be positive, got {h}"
        )));
    }
    let mut grad = Tensor::zeros(x.rows, x.cols);
    for i in 0..x.rows {
        for j in 0..x.cols {
            let up = f(&x.with_nudged(i, j, h))?;
            let down = f(&x.with_nudged(i, j, -h))?;
            if !up.is_finite() || !down.is_finite() {
                return Err(Error::NumericalFailure(format!(
                    "non-finite evaluation at entry ({i}, {j})"
                )));
            }
            grad.data_mut()[i * x.cols + j] = (up - down) / (2.0 * h);
        }
    }
    Ok(grad)
}

/// Worst-case relative disagreement between two same-shaped tensors, with the
/// denominator floored at `max(|a|, |b|, 1e-8)` entrywise so near-zero
/// gradients do not blow up the ratio.
pub fn max_relative_error(a: &Tensor, b: &Tensor) -> Result<f64> {
    if a.rows != b.rows || a.cols != b.cols {
        return Err(Error::InvalidShape {
            expected: a.shape_string(),
            actual: b.shape_string(),
        });
    }
    Ok(a.data
        .iter()
        .zip(&b.data)
        .map(|(&x, &y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-8))
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_rejects_length_mismatch() {
        assert!(matches!(
            Tensor::new(2, 2, vec![1.0; 3]),
            Err(Error::InvalidShape { .. })
        ));
    }

    #[test]
    fn new_rejects_non_finite() {
        assert!(matches!(
            Tensor::new(1, 2, vec![1.0, f64::NAN]),
            Err(Error::NumericalFailure(_))
        ));
    }

    #[test]
    fn json_round_trip_and_mismatch_rejection() {
        let t = Tensor::new(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let json = serde_json::to_string(&t).unwrap();
        assert!(json.contains("\"shape\":[2,3]"));
        let back: Tensor = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);

        let bad = r#"{"shape": [2, 3], "data": [1.0, 2.0]}"#;
        assert!(serde_json::from_str::<Tensor>(bad).is_err());
    }

    #[test]
    fn softmax_symmetric_row() {
        let t = Tensor::new(1, 2, vec![0.0, 0.0]).unwrap();
        let s = softmax_rows(&t).unwrap();
        assert_eq!(s.row(0), &[0.5, 0.5]);
    }

    #[test]
    fn softmax_saturated_row_does_not_overflow() {
        let t = Tensor::new(1, 2, vec![1000.0, 0.0]).unwrap();
        let s = softmax_rows(&t).unwrap();
        assert_eq!(s.get(0, 0), 1.0);
        assert!(s.get(0, 1) < 1e-300);
    }

    #[test]
    fn softmax_known_row() {
        let t = Tensor::new(1, 3, vec![1.0, 2.0, 3.0]).unwrap();
        let s = softmax_rows(&t).unwrap();
        let expect = [0.09003057317038046, 0.24472847105479767, 0.6652409557748219];
        for (got, want) in s.row(0).iter().zip(expect) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn softmax_empty_is_invalid_shape() {
        let t = Tensor::zeros(0, 3);
        assert!(matches!(
            softmax_rows(&t),
            Err(Error::InvalidShape { .. })
        ));
    }

    #[test]
    fn matmul_identity() {
        let eye = Tensor::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let m = Tensor::new(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(matmul(&eye, &m).unwrap(), m);
    }

    #[test]
    fn matmul_convex_combination_rows() {
        let a = Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.5, 0.5]]).unwrap();
        let b = Tensor::from_rows(&[vec![2.0, 0.0], vec![0.0, 4.0]]).unwrap();
        let c = matmul(&a, &b).unwrap();
        let want = Tensor::from_rows(&[vec![2.0, 0.0], vec![0.0, 4.0], vec![1.0, 2.0]]).unwrap();
        assert_eq!(c, want);
    }

    #[test]
    fn matmul_shape_mismatch() {
        let a = Tensor::zeros(2, 3);
        let b = Tensor::zeros(2, 2);
        assert!(matches!(matmul(&a, &b), Err(Error::InvalidShape { .. })));
    }

    #[test]
    fn finite_diff_on_sum_of_squares() {
        let x = Tensor::new(1, 2, vec![1.0, 2.0]).unwrap();
        let f = |t: &Tensor| Ok(t.data().iter().map(|v| v * v).sum());
        let g = finite_diff_grad(f, &x, 1e-5).unwrap();
        assert!((g.get(0, 0) - 2.0).abs() < 1e-6);
        assert!((g.get(0, 1) - 4.0).abs() < 1e-6);
    }

    #[test]
    fn finite_diff_on_constant_is_zero() {
        let x = Tensor::new(2, 2, vec![1.0, -3.0, 0.5, 2.0]).unwrap();
        let g = finite_diff_grad(|_| Ok(7.5), &x, 1e-5).unwrap();
        assert!(g.max_abs() < 1e-9);
    }

    #[test]
    fn finite_diff_rejects_bad_step_and_nan() {
        let x = Tensor::zeros(1, 1);
        assert!(finite_diff_grad(|_| Ok(0.0), &x, 0.0).is_err());
        assert!(matches!(
            finite_diff_grad(|_| Ok(f64::NAN), &x, 1e-5),
            Err(Error::NumericalFailure(_))
        ));
    }
}
