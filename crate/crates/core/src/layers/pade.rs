//! Padé approximant layer.
//!
//! ```text
//!            sum_{m=1..P} (w_pm * x^m + b_m)
//! y = -----------------------------------------
//!      1 + sum_{n=1..Q} | w_qn * x^n |
//! ```
//!
//! `*` is same-padded correlation, `x^m` an elementwise power taken before the
//! correlation, and `|.|` is applied per order term. Every numerator order has
//! its own per-channel bias; their sum plays the role of the constant
//! numerator coefficient. Denominator banks carry no bias because the constant
//! denominator coefficient is fixed at 1, which keeps the denominator `>= 1`.
//!
//! `Q = 0` gives the generative neuron of a Self-ONN; `P = 1, Q = 0` is a
//! plain biased convolution.

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::numerics::{conv1d_same, KernelShape, RngStream, Tensor};

/// Half-width of the uniform range used for fresh denominator kernels. Small
/// values start the layer close to its `Q = 0` reduction.
pub const DENOMINATOR_INIT_RANGE: f64 = 0.01;

#[derive(Clone, Debug, PartialEq)]
pub struct PadeLayerParams {
    /// `P` banks `[taps, cin, cout]`, index `m - 1` multiplies `x^m`.
    pub numerator: Vec<Tensor>,
    /// `P` bias vectors `[cout]`.
    pub numerator_bias: Vec<Tensor>,
    /// `Q` bias-free banks, index `n - 1` multiplies `x^n`.
    pub denominator: Vec<Tensor>,
}

impl PadeLayerParams {
    pub fn zeros(p: usize, q: usize, shape: KernelShape) -> Result<Self> {
        if p < 1 {
            return Err(Error::config(format!("numerator order P must be >= 1, got {p}")));
        }
        if shape.taps.is_multiple_of(2) || shape.taps == 0 {
            return Err(Error::config(format!(
                "kernel size must be odd and positive, got {}",
                shape.taps
            )));
        }
        Ok(Self {
            numerator: vec![Tensor::zeros(&shape.dims()); p],
            numerator_bias: vec![Tensor::zeros(&[shape.cout]); p],
            denominator: vec![Tensor::zeros(&shape.dims()); q],
        })
    }

    /// Glorot-uniform numerator banks, zero biases, denominator banks uniform
    /// in `[-DENOMINATOR_INIT_RANGE, DENOMINATOR_INIT_RANGE)`.
    pub fn init(p: usize, q: usize, shape: KernelShape, rng: &mut RngStream) -> Result<Self> {
        let mut params = Self::zeros(p, q, shape)?;
        let fan_in = shape.taps * shape.cin;
        let fan_out = shape.taps * shape.cout;
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for bank in &mut params.numerator {
            *bank = Tensor::new(&shape.dims(), rng.uniform(-limit, limit, shape.len())?)?;
        }
        for bank in &mut params.denominator {
            *bank = Tensor::new(
                &shape.dims(),
                rng.uniform(-DENOMINATOR_INIT_RANGE, DENOMINATOR_INIT_RANGE, shape.len())?,
            )?;
        }
        Ok(params)
    }

    pub fn p(&self) -> usize {
        self.numerator.len()
    }

    pub fn q(&self) -> usize {
        self.denominator.len()
    }

    pub fn kernel_shape(&self) -> Result<KernelShape> {
        let first = self
            .numerator
            .first()
            .ok_or_else(|| Error::config("numerator order P must be >= 1, got 0"))?;
        KernelShape::of(first)
    }

    /// Checks bank counts and that every bank and bias agrees on one shape.
    pub fn validate(&self) -> Result<KernelShape> {
        let shape = self.kernel_shape()?;
        if self.numerator_bias.len() != self.p() {
            return Err(Error::config(format!(
                "{} numerator banks but {} biases",
                self.p(),
                self.numerator_bias.len()
            )));
        }
        for bank in self.numerator.iter().chain(&self.denominator) {
            bank.expect_shape(&shape.dims())?;
        }
        for bias in &self.numerator_bias {
            bias.expect_shape(&[shape.cout])?;
        }
        Ok(shape)
    }

    /// `P * (Cin*Cout*K + Cout) + Q * Cin*Cout*K`.
    pub fn param_count(&self) -> usize {
        self.numerator.iter().map(Tensor::len).sum::<usize>()
            + self.numerator_bias.iter().map(Tensor::len).sum::<usize>()
            + self.denominator.iter().map(Tensor::len).sum::<usize>()
    }
}

/// Closed-form trainable scalar count of one layer.
pub fn pade_param_count(p: usize, q: usize, shape: KernelShape) -> usize {
    p * (shape.len() + shape.cout) + q * shape.len()
}

fn power(x: &Tensor, order: usize) -> Tensor {
    if order == 1 {
        x.clone()
    } else {
        x.map(|v| v.powi(order as i32))
    }
}

/// Numerator and denominator maps of the layer.
pub struct PadeParts {
    pub numerator: Tensor,
    pub denominator: Tensor,
    /// Per-order denominator terms before the absolute value.
    pub terms: Vec<Tensor>,
}

pub fn pade_parts(x: &Tensor, params: &PadeLayerParams) -> Result<PadeParts> {
    params.validate()?;
    let mut numerator: Option<Tensor> = None;
    for (m, (bank, bias)) in params.numerator.iter().zip(&params.numerator_bias).enumerate() {
        let term = conv1d_same(&power(x, m + 1), bank, Some(bias))?;
        numerator = Some(match numerator {
            None => term,
            Some(acc) => acc.zip_map(&term, |a, b| a + b)?,
        });
    }
    let numerator = numerator.expect("P >= 1 checked by validate");

    let mut terms = Vec::with_capacity(params.q());
    let mut abs_sum: Option<Tensor> = None;
    for (n, bank) in params.denominator.iter().enumerate() {
        let term = conv1d_same(&power(x, n + 1), bank, None)?;
        let magnitude = term.map(f64::abs);
        abs_sum = Some(match abs_sum {
            None => magnitude,
            Some(acc) => acc.zip_map(&magnitude, |a, b| a + b)?,
        });
        terms.push(term);
    }
    let denominator = match abs_sum {
        Some(s) => s.map(|v| v + 1.0),
        None => Tensor::filled(numerator.shape(), 1.0),
    };
    Ok(PadeParts {
        numerator,
        denominator,
        terms,
    })
}

pub fn pade_forward(x: &Tensor, params: &PadeLayerParams) -> Result<Tensor> {
    if !x.all_finite() {
        return Err(Error::numeric("non-finite input to Padé layer"));
    }
    let parts = pade_parts(x, params)?;
    let out = if params.q() == 0 {
        parts.numerator
    } else {
        parts.numerator.zip_map(&parts.denominator, |n, d| n / d)?
    };
    if !out.all_finite() {
        return Err(Error::numeric("Padé layer produced a non-finite value"));
    }
    Ok(out)
}

/// Generative (Self-ONN) neuron: a Padé layer without denominator.
pub fn generative_forward(x: &Tensor, params: &PadeLayerParams) -> Result<Tensor> {
    if params.q() != 0 {
        return Err(Error::config(format!(
            "generative layer must have Q = 0, got Q = {}",
            params.q()
        )));
    }
    pade_forward(x, params)
}

/// Smallest `|w_qn * x^n|` over every denominator term, or `+inf` when `Q = 0`.
/// Gradient checks skip draws where this sits on the kink of `|.|`.
pub fn min_denominator_term(x: &Tensor, params: &PadeLayerParams) -> Result<f64> {
    let parts = pade_parts(x, params)?;
    Ok(parts
        .terms
        .iter()
        .flat_map(|t| t.data().iter())
        .map(|v| v.abs())
        .fold(f64::INFINITY, f64::min))
}

/// Tape handles for one layer's parameters, in the same order as
/// [`PadeLayerParams`].
#[derive(Clone, Debug)]
pub struct PadeVars {
    pub numerator: Vec<Var>,
    pub numerator_bias: Vec<Var>,
    pub denominator: Vec<Var>,
}

impl PadeVars {
    pub fn register(tape: &mut Tape, params: &PadeLayerParams) -> Self {
        Self {
            numerator: params.numerator.iter().map(|t| tape.param(t.clone()).0).collect(),
            numerator_bias: params.numerator_bias.iter().map(|t| tape.param(t.clone()).0).collect(),
            denominator: params.denominator.iter().map(|t| tape.param(t.clone()).0).collect(),
        }
    }
}

/// Records the layer on `tape` with the same operation order as
/// [`pade_forward`], so values agree bit for bit.
pub fn pade_on_tape(tape: &mut Tape, x: Var, vars: &PadeVars) -> Result<Var> {
    if vars.numerator.is_empty() {
        return Err(Error::config("numerator order P must be >= 1, got 0"));
    }
    let powers_needed = vars.numerator.len().max(vars.denominator.len());
    let mut powers = Vec::with_capacity(powers_needed);
    powers.push(x);
    for order in 2..=powers_needed {
        powers.push(tape.pow(x, order as u32));
    }

    let mut numerator: Option<Var> = None;
    for (m, (&w, &b)) in vars.numerator.iter().zip(&vars.numerator_bias).enumerate() {
        let term = tape.conv1d(powers[m], w, Some(b))?;
        numerator = Some(match numerator {
            None => term,
            Some(acc) => tape.add(acc, term)?,
        });
    }
    let numerator = numerator.expect("non-empty numerator");

    let mut abs_sum: Option<Var> = None;
    for (n, &w) in vars.denominator.iter().enumerate() {
        let term = tape.conv1d(powers[n], w, None)?;
        let magnitude = tape.abs(term);
        abs_sum = Some(match abs_sum {
            None => magnitude,
            Some(acc) => tape.add(acc, magnitude)?,
        });
    }
    match abs_sum {
        None => Ok(numerator),
        Some(s) => {
            let denominator = tape.add_scalar(s, 1.0);
            tape.div(numerator, denominator)
        }
    }
}
