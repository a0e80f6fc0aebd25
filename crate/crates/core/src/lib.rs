//! Padé approximant neural networks for 1D signal classification.
//!
//! A Padé layer computes, per output channel,
//! `sum_m (w_m * x^m + b_m) / (1 + sum_n |v_n * x^n|)` where `*` is a
//! same-padded correlation and powers are elementwise. `Q = 0` gives a
//! generative (Self-ONN) layer and `P = 1, Q = 0` a plain convolution.

pub mod autodiff;
pub mod error;
pub mod layers;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod pipeline;
pub mod training;

pub use error::{Error, Result};
pub use metrics::{ConfusionMatrix, Metrics, MetricsReport};
pub use model::{Model, ModelConfig};
pub use numerics::{RngStream, Tensor};
pub use pipeline::{FaultClass, SegmentSet};
pub use training::{RunReport, TrainingConfig};
