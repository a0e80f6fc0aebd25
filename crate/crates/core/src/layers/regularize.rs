use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{RngStream, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Train,
    Eval,
}

/// Inverted-dropout mask: each entry is 0 with probability `rate`, otherwise
/// `1 / (1 - rate)`.
pub fn dropout_mask(n: usize, rate: f64, rng: &mut RngStream) -> Result<Vec<f64>> {
    check_rate(rate)?;
    let keep = 1.0 / (1.0 - rate);
    Ok((0..n)
        .map(|_| if rng.unit() < rate { 0.0 } else { keep })
        .collect())
}

fn check_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::config(format!("dropout rate must be in [0, 1), got {rate}")));
    }
    Ok(())
}

pub fn dropout_apply(x: &Tensor, rate: f64, mode: Mode, rng: &mut RngStream) -> Result<Tensor> {
    check_rate(rate)?;
    if mode == Mode::Eval || rate == 0.0 {
        return Ok(x.clone());
    }
    let mask = dropout_mask(x.len(), rate, rng)?;
    let data = x.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
    Tensor::new(x.shape(), data)
}

/// `[B, M, C]` to `[B, M*C]`, row-major per sample.
pub fn flatten(x: &Tensor) -> Result<Tensor> {
    if x.rank() != 3 {
        return Err(Error::shape(format!("flatten expects rank 3, got {:?}", x.shape())));
    }
    let (b, m, c) = (x.dim(0), x.dim(1), x.dim(2));
    x.clone().reshape(&[b, m * c])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_and_zero_rate_are_identity() {
        let mut rng = RngStream::new(1);
        let x = Tensor::new(&[2, 3], vec![1.0, -2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(dropout_apply(&x, 0.25, Mode::Eval, &mut rng).unwrap(), x);
        assert_eq!(dropout_apply(&x, 0.0, Mode::Train, &mut rng).unwrap(), x);
    }

    #[test]
    fn rate_one_rejected() {
        let mut rng = RngStream::new(1);
        assert!(matches!(
            dropout_apply(&Tensor::zeros(&[1]), 1.0, Mode::Train, &mut rng),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn inverted_scaling_monte_carlo() {
        let mut rng = RngStream::new(2024);
        let n = 1_000_000;
        let x = Tensor::filled(&[n], 2.0);
        let y = dropout_apply(&x, 0.25, Mode::Train, &mut rng).unwrap();
        let survivors = y.data().iter().filter(|&&v| v != 0.0).count() as f64 / n as f64;
        assert!((survivors - 0.75).abs() < 0.003, "survivor fraction {survivors}");
        let mean = y.sum() / n as f64;
        assert!((mean - 2.0).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn flatten_shapes() {
        let x = Tensor::zeros(&[2, 7, 32]);
        let f = flatten(&x).unwrap();
        assert_eq!(f.shape(), &[2, 224]);
        assert_eq!(f.clone().reshape(&[2, 7, 32]).unwrap(), x);
        assert!(flatten(&Tensor::zeros(&[3, 4])).is_err());
    }
}
