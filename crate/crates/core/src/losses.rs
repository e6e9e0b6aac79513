//! Token-level objectives — cross-entropy, focal, soft Dice — and the
//! composite mixer. Every loss returns its scalar value together with the
//! analytic gradient with respect to the logits, so gradient checking and
//! plain gradient descent need no autodiff machinery.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{logsumexp, softmax_rows, Tensor};

/// Default focal-loss focusing exponent.
pub const DEFAULT_FOCAL_GAMMA: f64 = 2.0;
/// Default Dice smoothing constant.
pub const DEFAULT_DICE_SMOOTH: f64 = 1e-6;

/// Scalar loss value plus its gradient with respect to the logits.
#[derive(Clone, Debug)]
pub struct LossResult {
    pub value: f64,
    pub grad: Tensor,
}

/// The four mixable objectives, in the fixed order used for all
/// accumulation and reporting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LossKind {
    Ce,
    Focal,
    Dice,
    Topo,
}

impl LossKind {
    pub const ALL: [LossKind; 4] = [LossKind::Ce, LossKind::Focal, LossKind::Dice, LossKind::Topo];

    pub fn name(&self) -> &'static str {
        match self {
            LossKind::Ce => "ce",
            LossKind::Focal => "focal",
            LossKind::Dice => "dice",
            LossKind::Topo => "topo",
        }
    }
}

/// Non-negative mixing weights for the composite objective.
///
/// Serialized as `{"ce": 0.6, "dice": 0.2, "topo": 0.2, "focal": 0.0}`;
/// omitted keys default to 0 and unknown keys are rejected.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompositeSpec {
    #[serde(default)]
    pub ce: f64,
    #[serde(default)]
    pub focal: f64,
    #[serde(default)]
    pub dice: f64,
    #[serde(default)]
    pub topo: f64,
}

impl CompositeSpec {
    pub fn ce_only() -> Self {
        Self {
            ce: 1.0,
            focal: 0.0,
            dice: 0.0,
            topo: 0.0,
        }
    }

    pub fn weight(&self, kind: LossKind) -> f64 {
        match kind {
            LossKind::Ce => self.ce,
            LossKind::Focal => self.focal,
            LossKind::Dice => self.dice,
            LossKind::Topo => self.topo,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.ce, self.focal, self.dice, self.topo];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::NumericalFailure(
                "composite weights must be finite and non-negative".into(),
            ));
        }
        if all.iter().all(|w| *w == 0.0) {
            return Err(Error::MissingComponent(
                "at least one composite weight must be positive".into(),
            ));
        }
        Ok(())
    }
}

fn check_targets(logits: &Tensor, targets: &[usize]) -> Result<()> {
    if logits.is_empty() {
        return Err(Error::InvalidShape {
            expected: "non-empty logits".into(),
            actual: format!("{}x{}", logits.rows(), logits.cols()),
        });
    }
    if targets.len() != logits.rows() {
        return Err(Error::InvalidShape {
            expected: format!("{} targets", logits.rows()),
            actual: format!("{} targets", targets.len()),
        });
    }
    if let Some(&id) = targets.iter().find(|&&id| id >= logits.cols()) {
        return Err(Error::InvalidToken {
            id,
            vocab: logits.cols(),
        });
    }
    Ok(())
}

/// Mean over positions of `-log softmax(logits)[target]`, with gradient
/// `(softmax - one_hot) / T`.
pub fn cross_entropy(logits: &Tensor, targets: &[usize]) -> Result<LossResult> {
    check_targets(logits, targets)?;
    let t = logits.rows() as f64;
    let probs = softmax_rows(logits)?;
    let mut grad = probs.clone();
    let mut value = 0.0;
    for (i, &target) in targets.iter().enumerate() {
        let row = logits.row(i);
        let lse = logsumexp(row.iter().copied());
        value += -(row[target] - lse);
        let cols = logits.cols();
        let grow = &mut grad.data_mut()[i * cols..(i + 1) * cols];
        for g in grow.iter_mut() {
            *g /= t;
        }
        grow[target] -= 1.0 / t;
    }
    Ok(LossResult {
        value: value / t,
        grad,
    })
}

/// Focal loss: mean of `(1 - p_t)^gamma * (-log p_t)` over positions, with
/// the analytic gradient through both the modulating factor and `log p_t`.
///
/// At `gamma = 0` this reproduces [`cross_entropy`] bit for bit.
pub fn focal(logits: &Tensor, targets: &[usize], gamma: f64) -> Result<LossResult> {
    check_targets(logits, targets)?;
    if !gamma.is_finite() || gamma < 0.0 {
        return Err(Error::NumericalFailure(format!(
            "focal gamma must be non-negative, got {gamma}"
        )));
    }
    let t = logits.rows() as f64;
    let probs = softmax_rows(logits)?;
    let cols = logits.cols();
    let mut grad = Tensor::zeros(logits.rows(), cols);
    let mut value = 0.0;
    for (i, &target) in targets.iter().enumerate() {
        let row = logits.row(i);
        let lse = logsumexp(row.iter().copied());
        let log_p = row[target] - lse; // finite even when p underflows
        let p = probs.get(i, target);
        let omp = 1.0 - p;
        value += omp.powf(gamma) * (-log_p);

        // d/dz_v [(1-p)^g * (-log p)] = coeff * (onehot_v - p_v), where
        // coeff = g*(1-p)^(g-1)*p*log p - (1-p)^g. The p*log p pairing keeps
        // the expression finite as p -> 0, and the omp == 0 limit is 0 for
        // g > 0 (and exactly -1 for g = 0, recovering cross-entropy).
        let coeff = if omp == 0.0 {
            if gamma == 0.0 {
                -1.0
            } else {
                0.0
            }
        } else {
            gamma * omp.powf(gamma - 1.0) * p * log_p - omp.powf(gamma)
        };
        let prow = probs.row(i);
        let grow = &mut grad.data_mut()[i * cols..(i + 1) * cols];
        for (v, g) in grow.iter_mut().enumerate() {
            let indicator = if v == target { 1.0 } else { 0.0 };
            *g = coeff * (indicator - prow[v]) / t;
        }
    }
    Ok(LossResult {
        value: value / t,
        grad,
    })
}

/// Soft micro Dice over the flattened `T x V` probability / one-hot arrays:
/// `1 - (2 Σ p·g + smooth) / (Σ p + Σ g + smooth)`.
pub fn dice(logits: &Tensor, targets: &[usize], smooth: f64) -> Result<LossResult> {
    check_targets(logits, targets)?;
    if !smooth.is_finite() || smooth <= 0.0 {
        return Err(Error::NumericalFailure(format!(
            "dice smoothing constant must be positive, got {smooth}"
        )));
    }
    let probs = softmax_rows(logits)?;
    let t = logits.rows();
    let cols = logits.cols();

    let intersection: f64 = targets
        .iter()
        .enumerate()
        .map(|(i, &target)| probs.get(i, target))
        .sum();
    let sum_p: f64 = probs.data().iter().sum();
    let sum_g = t as f64;
    let numer = 2.0 * intersection + smooth;
    let denom = sum_p + sum_g + smooth;
    let value = 1.0 - numer / denom;

    // dvalue/dp_i = -(2 g_i * denom - numer) / denom^2, then softmax backprop
    // per row: dz = p ⊙ (w - <w, p>).
    let mut grad = Tensor::zeros(t, cols);
    let d2 = denom * denom;
    for (i, &target) in targets.iter().enumerate() {
        let prow = probs.row(i);
        let mut w = vec![0.0; cols];
        for (v, wv) in w.iter_mut().enumerate() {
            let g_i = if v == target { 1.0 } else { 0.0 };
            *wv = -(2.0 * g_i * denom - numer) / d2;
        }
        let dot: f64 = w.iter().zip(prow).map(|(wv, pv)| wv * pv).sum();
        let grow = &mut grad.data_mut()[i * cols..(i + 1) * cols];
        for (v, g) in grow.iter_mut().enumerate() {
            *g = prow[v] * (w[v] - dot);
        }
    }
    Ok(LossResult { value, grad })
}

/// Exact linear combination of pre-evaluated loss parts: value
/// `Σ w_k · value_k` and gradient `Σ w_k · grad_k`.
///
/// Parts are keyed by [`LossKind`]; every kind with a positive weight must
/// be present. Accumulation follows the fixed `ALL` order.
pub fn composite(spec: &CompositeSpec, parts: &[(LossKind, &LossResult)]) -> Result<LossResult> {
    spec.validate()?;
    let mut value = 0.0;
    let mut grad: Option<Tensor> = None;
    for kind in LossKind::ALL {
        let w = spec.weight(kind);
        if w == 0.0 {
            continue;
        }
        let part = parts
            .iter()
            .find(|(k, _)| *k == kind)
            .map(|(_, r)| *r)
            .ok_or_else(|| Error::MissingComponent(kind.name().into()))?;
        value += w * part.value;
        match &mut grad {
            None => {
                let mut g = part.grad.clone();
                for x in g.data_mut() {
                    *x *= w;
                }
                grad = Some(g);
            }
            Some(acc) => {
                if acc.rows() != part.grad.rows() || acc.cols() != part.grad.cols() {
                    return Err(Error::InvalidShape {
                        expected: format!("{}x{}", acc.rows(), acc.cols()),
                        actual: format!("{}x{}", part.grad.rows(), part.grad.cols()),
                    });
                }
                for (x, y) in acc.data_mut().iter_mut().zip(part.grad.data()) {
                    *x += w * y;
                }
            }
        }
    }
    Ok(LossResult {
        value,
        grad: grad.expect("validate() guarantees a positive weight"),
    })
}
