//! Shared fixtures for the benchmarks.

use padenet::{RngStream, Tensor};

/// Uniform `[-1, 1)` tensor of the given shape.
pub fn random_tensor(shape: &[usize], rng: &mut RngStream) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, rng.uniform(-1.0, 1.0, n).unwrap()).unwrap()
}

/// Batch of `batch` inputs with one-hot targets cycling over `classes`.
pub fn batch(batch: usize, length: usize, classes: usize, rng: &mut RngStream) -> (Tensor, Tensor) {
    let x = random_tensor(&[batch, length, 1], rng);
    let mut y = Tensor::zeros(&[batch, classes]);
    for b in 0..batch {
        y.data_mut()[b * classes + b % classes] = 1.0;
    }
    (x, y)
}
