use crate::error::{Error, Result};
use crate::numerics::{RngStream, Tensor};

/// Fully connected layer parameters: `weights` is `[in, out]`, `bias` is `[out]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseParams {
    pub weights: Tensor,
    pub bias: Tensor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DenseActivation {
    Tanh,
    Softmax,
}

impl DenseParams {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weights: Tensor::zeros(&[inputs, outputs]),
            bias: Tensor::zeros(&[outputs]),
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot(inputs: usize, outputs: usize, rng: &mut RngStream) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let w = rng
            .uniform(-limit, limit, inputs * outputs)
            .expect("glorot limit is positive");
        Self {
            weights: Tensor::new(&[inputs, outputs], w).expect("sized above"),
            bias: Tensor::zeros(&[outputs]),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.dim(0)
    }

    pub fn outputs(&self) -> usize {
        self.weights.dim(1)
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// `x[B, F] * w[F, O] + b`.
pub fn affine(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    if x.rank() != 2 || w.rank() != 2 || x.dim(1) != w.dim(0) {
        return Err(Error::shape(format!(
            "dense input {:?} incompatible with weights {:?}",
            x.shape(),
            w.shape()
        )));
    }
    let (batch, fin, fout) = (x.dim(0), w.dim(0), w.dim(1));
    b.expect_shape(&[fout])?;
    let mut out = Vec::with_capacity(batch * fout);
    for row in x.data().chunks_exact(fin) {
        let mut acc = b.data().to_vec();
        for (xi, wrow) in row.iter().zip(w.data().chunks_exact(fout)) {
            for (a, wv) in acc.iter_mut().zip(wrow) {
                *a += xi * wv;
            }
        }
        out.extend_from_slice(&acc);
    }
    Tensor::new(&[batch, fout], out)
}

/// Row-wise softmax with max subtraction.
pub fn softmax(logits: &Tensor) -> Result<Tensor> {
    if logits.rank() != 2 {
        return Err(Error::shape(format!(
            "softmax expects [batch, classes], got {:?}",
            logits.shape()
        )));
    }
    let classes = logits.dim(1);
    let mut out = Vec::with_capacity(logits.len());
    for row in logits.data().chunks_exact(classes) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        out.extend(exps.into_iter().map(|e| e / total));
    }
    Tensor::new(logits.shape(), out)
}

pub fn dense_forward(x: &Tensor, params: &DenseParams, activation: DenseActivation) -> Result<Tensor> {
    let z = affine(x, &params.weights, &params.bias)?;
    match activation {
        DenseActivation::Tanh => Ok(z.map(f64::tanh)),
        DenseActivation::Softmax => softmax(&z),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_tanh_at_zero() {
        let mut p = DenseParams::zeros(3, 3);
        for i in 0..3 {
            p.weights.data_mut()[i * 3 + i] = 1.0;
        }
        let y = dense_forward(&Tensor::zeros(&[2, 3]), &p, DenseActivation::Tanh).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn softmax_equal_logits_is_uniform() {
        let y = softmax(&Tensor::filled(&[2, 8], 3.7)).unwrap();
        assert!(y.data().iter().all(|&v| (v - 0.125).abs() < 1e-15));
    }

    #[test]
    fn softmax_closed_form() {
        let y = softmax(&Tensor::new(&[1, 2], vec![2f64.ln(), 0.0]).unwrap()).unwrap();
        assert!((y.data()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((y.data()[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn softmax_rows_are_distributions() {
        let mut rng = RngStream::new(11);
        let x = Tensor::new(&[50, 8], rng.uniform(-40.0, 40.0, 400).unwrap()).unwrap();
        let y = softmax(&x).unwrap();
        for row in y.data().chunks(8) {
            assert!(row.iter().all(|&p| p >= 0.0));
            assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn shape_mismatch() {
        let p = DenseParams::zeros(4, 2);
        assert!(dense_forward(&Tensor::zeros(&[1, 3]), &p, DenseActivation::Tanh).is_err());
    }
}
