//! Point clouds in embedding space.
//!
//! A predicted sequence span becomes a cloud of *soft* points (one
//! probability-weighted average of embedding rows per position); the
//! reference becomes a cloud of plain embedding lookups. Both carry uniform
//! weights, forming probability measures that the transport machinery
//! consumes.

use crate::error::{Error, Result};
use crate::tensor::{matmul, softmax_rows, Tensor};

/// Half-open token range `[start, end)` selecting the section of a sequence
/// that enters a point cloud.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SpanMask {
    start: usize,
    end: usize,
}

impl SpanMask {
    pub fn new(start: usize, end: usize) -> Result<Self> {
        if start >= end {
            return Err(Error::InvalidSpan {
                start,
                end,
                len: end,
            });
        }
        Ok(Self { start, end })
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn end(&self) -> usize {
        self.end
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        false // start < end by construction
    }

    /// Checks the span fits a sequence of `len` tokens.
    pub fn check_within(&self, len: usize) -> Result<()> {
        if self.end > len {
            return Err(Error::InvalidSpan {
                start: self.start,
                end: self.end,
                len,
            });
        }
        Ok(())
    }
}

/// A weighted set of points in embedding space: one point per row of
/// `points`, with non-negative weights summing to 1.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    points: Tensor,
    weights: Vec<f64>,
}

impl PointCloud {
    pub fn new(points: Tensor, weights: Vec<f64>) -> Result<Self> {
        if points.rows() == 0 {
            return Err(Error::InvalidShape {
                expected: "at least one point".into(),
                actual: "empty cloud".into(),
            });
        }
        if weights.len() != points.rows() {
            return Err(Error::InvalidShape {
                expected: format!("{} weights", points.rows()),
                actual: format!("{} weights", weights.len()),
            });
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::NumericalFailure(
                "cloud weights must be finite and non-negative".into(),
            ));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::NumericalFailure(format!(
                "cloud weights sum to {sum}, expected 1"
            )));
        }
        Ok(Self { points, weights })
    }

    /// Cloud with uniform weights `1/n` over the given points.
    pub fn uniform(points: Tensor) -> Result<Self> {
        let n = points.rows();
        if n == 0 {
            return Err(Error::InvalidShape {
                expected: "at least one point".into(),
                actual: "empty cloud".into(),
            });
        }
        let w = vec![1.0 / n as f64; n];
        Self::new(points, w)
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        false // non-empty by construction
    }

    pub fn dim(&self) -> usize {
        self.points.cols()
    }

    pub fn points(&self) -> &Tensor {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        self.points.row(i)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Builds the predicted-side cloud: for each position in `span`, softmax the
/// logits row and average the embedding rows under those probabilities.
/// Weights are uniform over the span.
pub fn soft_cloud(logits: &Tensor, embeddings: &Tensor, span: SpanMask) -> Result<PointCloud> {
    span.check_within(logits.rows())?;
    if logits.cols() != embeddings.rows() {
        return Err(Error::InvalidShape {
            expected: format!("logits cols == embedding rows ({})", embeddings.rows()),
            actual: format!("{} cols", logits.cols()),
        });
    }
    let mut rows = Vec::with_capacity(span.len());
    for t in span.start()..span.end() {
        rows.push(logits.row(t).to_vec());
    }
    let span_logits = Tensor::from_rows(&rows)?;
    let probs = softmax_rows(&span_logits)?;
    let points = matmul(&probs, embeddings)?;
    PointCloud::uniform(points)
}

/// Builds the reference-side cloud by plain embedding lookups over the
/// span's token ids. Weights are uniform.
pub fn hard_cloud(token_ids: &[usize], embeddings: &Tensor, span: SpanMask) -> Result<PointCloud> {
    span.check_within(token_ids.len())?;
    let vocab = embeddings.rows();
    let mut rows = Vec::with_capacity(span.len());
    for &id in &token_ids[span.start()..span.end()] {
        if id >= vocab {
            return Err(Error::InvalidToken { id, vocab });
        }
        rows.push(embeddings.row(id).to_vec());
    }
    let points = Tensor::from_rows(&rows)?;
    PointCloud::uniform(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tensor(rows: &[Vec<f64>]) -> Tensor {
        Tensor::from_rows(rows).unwrap()
    }

    #[test]
    fn span_validation() {
        assert!(SpanMask::new(1, 1).is_err());
        assert!(SpanMask::new(2, 1).is_err());
        let s = SpanMask::new(1, 3).unwrap();
        assert_eq!(s.len(), 2);
        assert!(s.check_within(3).is_ok());
        assert!(s.check_within(2).is_err());
    }

    #[test]
    fn soft_cloud_saturated_row_hits_embedding_row() {
        let logits = tensor(&[vec![0.0, 1e4, 0.0]]);
        let emb = tensor(&[vec![1.0, 0.0], vec![3.0, -2.0], vec![0.0, 5.0]]);
        let cloud = soft_cloud(&logits, &emb, SpanMask::new(0, 1).unwrap()).unwrap();
        assert_eq!(cloud.len(), 1);
        for (got, want) in cloud.point(0).iter().zip([3.0, -2.0]) {
            assert!((got - want).abs() < 1e-9);
        }
    }

    #[test]
    fn soft_cloud_uniform_logits_give_midpoint() {
        let logits = tensor(&[vec![0.0, 0.0]]);
        let emb = tensor(&[vec![0.0, 0.0], vec![2.0, 2.0]]);
        let cloud = soft_cloud(&logits, &emb, SpanMask::new(0, 1).unwrap()).unwrap();
        assert_eq!(cloud.point(0), &[1.0, 1.0]);
    }

    #[test]
    fn soft_cloud_weights_are_uniform_and_sized_by_span() {
        let logits = tensor(&[vec![0.1, 0.2], vec![0.3, -0.1], vec![0.0, 0.0]]);
        let emb = tensor(&[vec![1.0], vec![2.0]]);
        let cloud = soft_cloud(&logits, &emb, SpanMask::new(1, 3).unwrap()).unwrap();
        assert_eq!(cloud.len(), 2);
        assert_eq!(cloud.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn soft_cloud_rejects_bad_span_and_shape() {
        let logits = tensor(&[vec![0.0, 0.0]]);
        let emb = tensor(&[vec![1.0], vec![2.0]]);
        assert!(matches!(
            soft_cloud(&logits, &emb, SpanMask::new(0, 2).unwrap()),
            Err(Error::InvalidSpan { .. })
        ));
        let emb3 = tensor(&[vec![1.0], vec![2.0], vec![3.0]]);
        assert!(matches!(
            soft_cloud(&logits, &emb3, SpanMask::new(0, 1).unwrap()),
            Err(Error::InvalidShape { .. })
        ));
    }

    #[test]
    fn hard_cloud_lookup() {
        let emb = tensor(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0], vec![4.0]]);
        let cloud = hard_cloud(&[3], &emb, SpanMask::new(0, 1).unwrap()).unwrap();
        assert_eq!(cloud.point(0), &[3.0]);
    }

    #[test]
    fn hard_cloud_repeated_ids_share_weight() {
        let emb = tensor(&[vec![0.0], vec![1.0]]);
        let cloud = hard_cloud(&[1, 1], &emb, SpanMask::new(0, 2).unwrap()).unwrap();
        assert_eq!(cloud.len(), 2);
        assert_eq!(cloud.point(0), cloud.point(1));
        assert_eq!(cloud.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn hard_cloud_respects_span() {
        let emb = tensor(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]);
        let cloud = hard_cloud(&[0, 1, 2, 3], &emb, SpanMask::new(1, 3).unwrap()).unwrap();
        assert_eq!(cloud.len(), 2);
        assert_eq!(cloud.point(0), &[1.0]);
        assert_eq!(cloud.point(1), &[2.0]);
    }

    #[test]
    fn hard_cloud_rejects_out_of_vocab() {
        let emb = tensor(&[vec![0.0], vec![1.0]]);
        assert!(matches!(
            hard_cloud(&[2], &emb, SpanMask::new(0, 1).unwrap()),
            Err(Error::InvalidToken { id: 2, vocab: 2 })
        ));
    }

    #[test]
    fn saturated_soft_cloud_matches_hard_cloud() {
        // Margin >= 30 on the argmax token makes the soft point coincide with
        // the lookup to within 1e-9 per coordinate.
        let logits = tensor(&[vec![30.0, 0.0, 0.0], vec![0.0, 0.0, 30.0]]);
        let emb = tensor(&[vec![1.5, -0.5], vec![0.0, 0.0], vec![-2.0, 4.0]]);
        let span = SpanMask::new(0, 2).unwrap();
        let soft = soft_cloud(&logits, &emb, span).unwrap();
        let hard = hard_cloud(&[0, 2], &emb, span).unwrap();
        for i in 0..2 {
            for (s, h) in soft.point(i).iter().zip(hard.point(i)) {
                assert!((s - h).abs() < 1e-9);
            }
        }
    }
}
