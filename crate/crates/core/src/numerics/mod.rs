//! Tensor storage, seeded randomness and the sliding-window primitives.

mod conv;
mod pool;
mod rng;
mod tensor;

pub use conv::{conv1d_same, conv1d_same_backward, ConvGrads, KernelShape};
pub use pool::{maxpool1d, maxpool1d_backward, maxpool1d_with_indices};
pub use rng::{rng_uniform, RngStream};
pub use tensor::{Tensor, MAX_RANK};

#[cfg(test)]
pub(crate) use conv::tests::conv_oracle;
