//! Same-padded, stride-1 1D correlation over `[batch, length, channels]`.
//!
//! Kernel banks are rank-3 tensors laid out `[taps, in_channels, out_channels]`.
//! Output position `m` sees input positions `m - K/2 ..= m + K/2`, with zeros
//! outside the signal. No kernel flip.
//!
//! Each sample reduces to one matrix product: the zero-padded input, viewed
//! with row stride `Cin`, is a `[M, K*Cin]` window matrix with overlapping
//! rows, so no im2col copy is needed.

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Extents of a kernel bank.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KernelShape {
    pub taps: usize,
    pub cin: usize,
    pub cout: usize,
}

impl KernelShape {
    pub fn of(kernel: &Tensor) -> Result<Self> {
        if kernel.rank() != 3 {
            return Err(Error::shape(format!(
                "kernel bank must be [taps, cin, cout], got {:?}",
                kernel.shape()
            )));
        }
        let shape = Self {
            taps: kernel.dim(0),
            cin: kernel.dim(1),
            cout: kernel.dim(2),
        };
        if shape.taps == 0 || shape.taps.is_multiple_of(2) {
            return Err(Error::config(format!(
                "kernel size must be odd and positive, got {}",
                shape.taps
            )));
        }
        Ok(shape)
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.taps, self.cin, self.cout]
    }

    pub fn len(&self) -> usize {
        self.taps * self.cin * self.cout
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn half(&self) -> usize {
        self.taps / 2
    }
}

fn check_input(x: &Tensor, ks: &KernelShape) -> Result<(usize, usize)> {
    if x.rank() != 3 {
        return Err(Error::shape(format!(
            "conv input must be [batch, length, channels], got {:?}",
            x.shape()
        )));
    }
    if x.dim(2) != ks.cin {
        return Err(Error::shape(format!(
            "input has {} channels, kernel expects {}",
            x.dim(2),
            ks.cin
        )));
    }
    Ok((x.dim(0), x.dim(1)))
}

/// Copies `src` (`len` rows of `width`) into the middle of `dst`, leaving
/// `half` zero rows on each side.
fn pad_rows(src: &[f64], width: usize, half: usize, dst: &mut Vec<f64>) {
    let rows = src.len() / width.max(1);
    dst.clear();
    dst.resize((rows + 2 * half) * width, 0.0);
    dst[half * width..(half + rows) * width].copy_from_slice(src);
}

/// `c[m x n] = beta*c + a[m x k] * b[k x n]` with explicit strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    rsa: usize,
    csa: usize,
    b: &[f64],
    rsb: usize,
    csb: usize,
    beta: f64,
    c: &mut [f64],
) {
    if m == 0 || n == 0 {
        return;
    }
    // Bounds are checked here so the unsafe call only ever reads inside the slices.
    if k > 0 {
        assert!((m - 1) * rsa + (k - 1) * csa < a.len());
        assert!((k - 1) * rsb + (n - 1) * csb < b.len());
    }
    assert!(m * n <= c.len());
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Same-padded correlation. `bias`, if given, has one entry per output channel.
pub fn conv1d_same(x: &Tensor, kernel: &Tensor, bias: Option<&Tensor>) -> Result<Tensor> {
    let ks = KernelShape::of(kernel)?;
    let (batch, len) = check_input(x, &ks)?;
    if let Some(b) = bias {
        b.expect_shape(&[ks.cout])?;
    }
    let mut out = Tensor::zeros(&[batch, len, ks.cout]);
    let half = ks.half();
    let mut padded = Vec::new();
    let out_stride = len * ks.cout;
    for b in 0..batch {
        let y = &mut out.data_mut()[b * out_stride..(b + 1) * out_stride];
        let beta = match bias {
            Some(bias) => {
                for row in y.chunks_exact_mut(ks.cout) {
                    row.copy_from_slice(bias.data());
                }
                1.0
            }
            None => 0.0,
        };
        pad_rows(x.sample(b), ks.cin, half, &mut padded);
        gemm(
            len,
            ks.taps * ks.cin,
            ks.cout,
            &padded,
            ks.cin,
            1,
            kernel.data(),
            ks.cout,
            1,
            beta,
            y,
        );
    }
    Ok(out)
}

/// Gradients of [`conv1d_same`] with respect to input, kernel and bias.
pub struct ConvGrads {
    pub input: Tensor,
    pub kernel: Tensor,
    pub bias: Tensor,
}

pub fn conv1d_same_backward(x: &Tensor, kernel: &Tensor, grad_out: &Tensor) -> Result<ConvGrads> {
    let ks = KernelShape::of(kernel)?;
    let (batch, len) = check_input(x, &ks)?;
    grad_out.expect_shape(&[batch, len, ks.cout])?;
    let half = ks.half();

    // Input adjoint is a correlation of the padded output gradient with the
    // tap-reversed, transposed kernel: [taps, cout, cin].
    let mut flipped = vec![0.0; ks.len()];
    for k in 0..ks.taps {
        for ci in 0..ks.cin {
            for co in 0..ks.cout {
                flipped[((ks.taps - 1 - k) * ks.cout + co) * ks.cin + ci] =
                    kernel.data()[(k * ks.cin + ci) * ks.cout + co];
            }
        }
    }

    let mut gx = Tensor::zeros(x.shape());
    let mut gw = Tensor::zeros(kernel.shape());
    let mut gb = vec![0.0; ks.cout];
    let mut padded_x = Vec::new();
    let mut padded_g = Vec::new();
    let in_stride = len * ks.cin;
    for b in 0..batch {
        let g = grad_out.sample(b);
        for row in g.chunks_exact(ks.cout) {
            for (acc, v) in gb.iter_mut().zip(row) {
                *acc += v;
            }
        }
        pad_rows(x.sample(b), ks.cin, half, &mut padded_x);
        // dW[(k,ci), co] += sum_m window[m, (k,ci)] * g[m, co]
        gemm(
            ks.taps * ks.cin,
            len,
            ks.cout,
            &padded_x,
            1,
            ks.cin,
            g,
            ks.cout,
            1,
            1.0,
            gw.data_mut(),
        );
        pad_rows(g, ks.cout, half, &mut padded_g);
        gemm(
            len,
            ks.taps * ks.cout,
            ks.cin,
            &padded_g,
            ks.cout,
            1,
            &flipped,
            ks.cin,
            1,
            0.0,
            &mut gx.data_mut()[b * in_stride..(b + 1) * in_stride],
        );
    }
    Ok(ConvGrads {
        input: gx,
        kernel: gw,
        bias: Tensor::vector(gb),
    })
}
