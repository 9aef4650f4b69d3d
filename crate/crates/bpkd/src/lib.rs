//! Boundary-privileged knowledge distillation toolkit.
//!
//! Framework-independent building blocks for distilling semantic
//! segmentation networks with separate edge and body supervision:
//!
//! - [`edge_masks`]: per-class binary edge bands from label maps via
//!   dilation minus erosion, average-pooled into soft masks at the network
//!   output stride.
//! - [`losses`]: the edge/body logit decomposition, the masked edge loss and
//!   the channel-wise body enhancement loss, the composite objective, and
//!   its analytic gradient with a finite-difference checker.
//! - [`metrics`]: confusion-matrix mIoU and mAcc, plain or restricted to the
//!   boundary band (trimap) of the ground truth.
//! - [`uncertainty`]: per-pixel normalized entropy maps and the
//!   entropy/accuracy correlation along edges.
//! - [`io`]: `.npy` tensor containers, single-channel PNG label maps, and
//!   deterministic JSON reports.
//! - [`oracle`]: a naive nested-loop reimplementation of the loss pipeline
//!   for independent cross-checking in tests.
//!
//! Everything computes in 64-bit floats with fixed reduction orders, so
//! outputs are bit-stable across runs and thread counts.

pub mod edge_masks;
pub mod io;
pub mod losses;
pub mod metrics;
pub mod oracle;
pub mod uncertainty;

pub use edge_masks::{BinaryMap, EdgeConfig, SoftMaskStack};
pub use io::{DenseTensor, LabelMap, ReportDocument, ReportValue};
pub use losses::{GradientTensor, LogitTensor, LossReport, LossWeights};
pub use metrics::{ConfusionMatrix, MetricsReport};
pub use uncertainty::{CorrelationReport, EntropyMap};
