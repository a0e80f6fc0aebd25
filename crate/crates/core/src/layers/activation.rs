use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Tensor;

pub const LEAKY_SLOPE: f64 = 0.01;

/// Nonlinearity applied after each Padé layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationKind {
    Tanh,
    LeakyRelu,
}

impl ActivationKind {
    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Tanh => "tanh",
            ActivationKind::LeakyRelu => "leaky_relu",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "tanh" => Ok(ActivationKind::Tanh),
            "leaky_relu" | "leakyrelu" => Ok(ActivationKind::LeakyRelu),
            other => Err(Error::config(format!("unknown activation '{other}'"))),
        }
    }

    #[inline]
    pub fn eval(self, u: f64) -> f64 {
        match self {
            ActivationKind::Tanh => u.tanh(),
            ActivationKind::LeakyRelu => {
                if u >= 0.0 {
                    u
                } else {
                    LEAKY_SLOPE * u
                }
            }
        }
    }

    /// Derivative given the pre-activation `u` and output `y`.
    #[inline]
    pub fn derivative(self, u: f64, y: f64) -> f64 {
        match self {
            ActivationKind::Tanh => 1.0 - y * y,
            ActivationKind::LeakyRelu => {
                if u >= 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
        }
    }
}

pub fn activation_apply(x: &Tensor, kind: ActivationKind) -> Result<Tensor> {
    if !x.all_finite() {
        return Err(Error::numeric("non-finite activation input"));
    }
    Ok(x.map(|u| kind.eval(u)))
}
