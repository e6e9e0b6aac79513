//! # otloss
//!
//! Composite training objectives for structured recipe generation, built
//! around a point-cloud loss in embedding space:
//!
//! - [`tensor`]: minimal dense 2-D linear algebra plus a finite-difference
//!   gradient checker.
//! - [`cloud`]: soft (probability-weighted) and hard (lookup) point clouds
//!   over a token span.
//! - [`transport`]: log-domain Sinkhorn, the debiased Sinkhorn divergence,
//!   and the topological loss with analytic gradients.
//! - [`losses`]: cross-entropy, focal, soft Dice, and the composite mixer.
//! - [`extract`]: deterministic rule-based extraction of quantities, times,
//!   temperatures, and cooking actions from recipe text.
//! - [`metrics`]: the recipe-specific evaluation suite (ingredient recall,
//!   quantity/action/time/temperature precision, edit distances, ROUGE-1)
//!   plus corpus aggregation.
//! - [`toy`]: a desk-scale model and training loop demonstrating that the
//!   objectives optimize end to end.
//! - [`gradcheck`]: seeded finite-difference suites shared by the CLI and
//!   the acceptance tests.

pub mod cloud;
pub mod error;
pub mod extract;
pub mod gradcheck;
pub mod losses;
pub mod metrics;
pub mod tensor;
pub mod toy;
pub mod transport;

pub use cloud::{hard_cloud, soft_cloud, PointCloud, SpanMask};
pub use error::{Error, Result};
pub use losses::{composite, cross_entropy, dice, focal, CompositeSpec, LossKind, LossResult};
pub use metrics::{score_corpus, MetricConfig, MetricReport, Recipe};
pub use tensor::{finite_diff_grad, matmul, softmax_rows, Tensor};
pub use transport::{
    cost_matrix, sinkhorn, sinkhorn_divergence, topological_loss, SinkhornConfig, TransportResult,
};
