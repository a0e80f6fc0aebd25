use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::ActivationKind;

/// Hyperparameters of the stacked Padé network.
///
/// The defaults describe the full-size network: seven blocks of
/// `[Padé(32 filters, K=7) -> activation -> maxpool(2)]`, then flatten,
/// dropout, a 64-unit tanh dense layer and an 8-way softmax.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub p: usize,
    pub q: usize,
    pub activation: ActivationKind,
    pub filters: usize,
    pub kernel: usize,
    pub blocks: usize,
    pub dense_units: usize,
    pub classes: usize,
    pub dropout: f64,
    /// Weight of the squared-norm penalty on Padé kernels.
    pub l2_lambda: f64,
    pub input_length: usize,
    pub input_channels: usize,
}

pub const POOL_SIZE: usize = 2;

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            p: 2,
            q: 1,
            activation: ActivationKind::Tanh,
            filters: 32,
            kernel: 7,
            blocks: 7,
            dense_units: 64,
            classes: 8,
            dropout: 0.25,
            l2_lambda: 1e-4,
            input_length: 1000,
            input_channels: 1,
        }
    }
}

/// Neuron family implied by `(P, Q)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelFamily {
    Cnn,
    SelfOnn,
    PadeNet,
}

impl ModelFamily {
    pub fn label(self) -> &'static str {
        match self {
            ModelFamily::Cnn => "CNN",
            ModelFamily::SelfOnn => "Self-ONN",
            ModelFamily::PadeNet => "PadéNet",
        }
    }
}

impl ModelConfig {
    pub fn with_orders(p: usize, q: usize, activation: ActivationKind) -> Self {
        Self {
            p,
            q,
            activation,
            ..Self::default()
        }
    }

    pub fn family(&self) -> ModelFamily {
        match (self.p, self.q) {
            (_, q) if q > 0 => ModelFamily::PadeNet,
            (1, 0) => ModelFamily::Cnn,
            _ => ModelFamily::SelfOnn,
        }
    }

    /// Sequence lengths entering each block, then the length after the last pool.
    pub fn block_lengths(&self) -> Vec<usize> {
        let mut lengths = vec![self.input_length];
        for _ in 0..self.blocks {
            let last = *lengths.last().unwrap();
            lengths.push(last / POOL_SIZE);
        }
        lengths
    }

    pub fn flatten_features(&self) -> usize {
        self.block_lengths().last().copied().unwrap_or(0) * self.filters
    }

    /// Every violated constraint, one message each.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.p < 1 {
            out.push(format!("p: numerator order must be >= 1, got {}", self.p));
        }
        if self.family() == ModelFamily::SelfOnn && self.activation != ActivationKind::Tanh {
            out.push(format!(
                "activation: Self-ONN configurations (Q = 0, P = {}) require tanh, got {}",
                self.p,
                self.activation.name()
            ));
        }
        if self.kernel == 0 || self.kernel.is_multiple_of(2) {
            out.push(format!("kernel: must be odd and positive, got {}", self.kernel));
        }
        for (field, value) in [
            ("filters", self.filters),
            ("blocks", self.blocks),
            ("dense_units", self.dense_units),
            ("input_channels", self.input_channels),
        ] {
            if value == 0 {
                out.push(format!("{field}: must be positive"));
            }
        }
        if self.classes < 2 {
            out.push(format!("classes: need at least 2, got {}", self.classes));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            out.push(format!("dropout: must be in [0, 1), got {}", self.dropout));
        }
        if !(self.l2_lambda >= 0.0 && self.l2_lambda.is_finite()) {
            out.push(format!("l2_lambda: must be finite and >= 0, got {}", self.l2_lambda));
        }
        let lengths = self.block_lengths();
        if lengths[..lengths.len() - 1].iter().any(|&m| m < POOL_SIZE) {
            out.push(format!(
                "input_length: {} is too short for {} pooling blocks",
                self.input_length, self.blocks
            ));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let problems = self.violations();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::config(problems.join("; ")))
        }
    }

    /// `key=value` lines used in checkpoint headers.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        vec![
            ("p".into(), self.p.to_string()),
            ("q".into(), self.q.to_string()),
            ("activation".into(), self.activation.name().into()),
            ("filters".into(), self.filters.to_string()),
            ("kernel".into(), self.kernel.to_string()),
            ("blocks".into(), self.blocks.to_string()),
            ("dense_units".into(), self.dense_units.to_string()),
            ("classes".into(), self.classes.to_string()),
            ("dropout".into(), format!("{:?}", self.dropout)),
            ("l2_lambda".into(), format!("{:?}", self.l2_lambda)),
            ("input_length".into(), self.input_length.to_string()),
            ("input_channels".into(), self.input_channels.to_string()),
        ]
    }

    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self> {
        let get = |key: &str| -> Result<&str> {
            pairs
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.as_str())
                .ok_or_else(|| Error::Load(format!("missing config key '{key}'")))
        };
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Load(format!("bad value '{v}' for config key '{key}'")))
        }
        let config = Self {
            p: num("p", get("p")?)?,
            q: num("q", get("q")?)?,
            activation: ActivationKind::parse(get("activation")?)
                .map_err(|e| Error::Load(e.to_string()))?,
            filters: num("filters", get("filters")?)?,
            kernel: num("kernel", get("kernel")?)?,
            blocks: num("blocks", get("blocks")?)?,
            dense_units: num("dense_units", get("dense_units")?)?,
            classes: num("classes", get("classes")?)?,
            dropout: num("dropout", get("dropout")?)?,
            l2_lambda: num("l2_lambda", get("l2_lambda")?)?,
            input_length: num("input_length", get("input_length")?)?,
            input_channels: num("input_channels", get("input_channels")?)?,
        };
        config.validate().map_err(|e| Error::Load(e.to_string()))?;
        Ok(config)
    }
}
