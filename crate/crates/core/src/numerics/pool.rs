use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Non-overlapping max pooling along the length axis. A trailing partial
/// window is dropped.
///
/// Returns the pooled tensor and, for every output element, the flat input
/// index that produced it (first maximum wins on ties).
pub fn maxpool1d_with_indices(x: &Tensor, pool: usize) -> Result<(Tensor, Vec<usize>)> {
    if x.rank() != 3 {
        return Err(Error::shape(format!(
            "maxpool input must be [batch, length, channels], got {:?}",
            x.shape()
        )));
    }
    let (batch, len, ch) = (x.dim(0), x.dim(1), x.dim(2));
    if pool == 0 || len < pool {
        return Err(Error::Range(format!(
            "length {len} is shorter than pool size {pool}"
        )));
    }
    let out_len = len / pool;
    let mut out = Vec::with_capacity(batch * out_len * ch);
    let mut argmax = Vec::with_capacity(batch * out_len * ch);
    let src = x.data();
    for b in 0..batch {
        for o in 0..out_len {
            for c in 0..ch {
                let base = (b * len + o * pool) * ch + c;
                let mut best = base;
                for p in 1..pool {
                    let idx = base + p * ch;
                    if src[idx] > src[best] {
                        best = idx;
                    }
                }
                out.push(src[best]);
                argmax.push(best);
            }
        }
    }
    Ok((Tensor::new(&[batch, out_len, ch], out)?, argmax))
}

pub fn maxpool1d(x: &Tensor, pool: usize) -> Result<Tensor> {
    maxpool1d_with_indices(x, pool).map(|(t, _)| t)
}

/// Routes each output gradient back to the input element that won its window.
pub fn maxpool1d_backward(input_shape: &[usize], argmax: &[usize], grad_out: &Tensor) -> Tensor {
    let mut gx = Tensor::zeros(input_shape);
    let dst = gx.data_mut();
    for (&idx, &g) in argmax.iter().zip(grad_out.data()) {
        dst[idx] += g;
    }
    gx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;
    use proptest::prelude::*;

    fn seq(v: &[f64]) -> Tensor {
        Tensor::new(&[1, v.len(), 1], v.to_vec()).unwrap()
    }

    #[test]
    fn drops_trailing_element() {
        assert_eq!(maxpool1d(&seq(&[1.0, 3.0, 2.0, 5.0, 4.0]), 2).unwrap().data(), &[3.0, 5.0]);
    }

    #[test]
    fn architecture_lengths() {
        for (m, expect) in [(1000, 500), (125, 62), (62, 31), (31, 15), (15, 7)] {
            let y = maxpool1d(&Tensor::zeros(&[1, m, 32]), 2).unwrap();
            assert_eq!(y.shape(), &[1, expect, 32]);
        }
    }

    #[test]
    fn constant_signal_stays_constant() {
        let y = maxpool1d(&Tensor::filled(&[2, 9, 3], 0.5), 2).unwrap();
        assert_eq!(y.shape(), &[2, 4, 3]);
        assert!(y.data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn too_short_is_an_error() {
        assert!(matches!(maxpool1d(&seq(&[1.0]), 2), Err(Error::Range(_))));
    }

    proptest! {
        #[test]
        fn each_output_is_its_window_max(len in 2usize..40, ch in 1usize..4, seed in any::<u64>()) {
            let mut rng = RngStream::new(seed);
            let x = Tensor::new(&[2, len, ch], rng.uniform(-5.0, 5.0, 2 * len * ch).unwrap()).unwrap();
            let y = maxpool1d(&x, 2).unwrap();
            prop_assert_eq!(y.dim(1), len / 2);
            for b in 0..2 {
                for o in 0..len / 2 {
                    for c in 0..ch {
                        let a = x.data()[(b * len + 2 * o) * ch + c];
                        let d = x.data()[(b * len + 2 * o + 1) * ch + c];
                        prop_assert_eq!(y.data()[(b * (len / 2) + o) * ch + c], a.max(d));
                    }
                }
            }
        }
    }
}
