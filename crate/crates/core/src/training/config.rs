use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
        }
    }
}

/// Optimization protocol. The L2 weight lives in
/// [`ModelConfig`](crate::model::ModelConfig) with the layers it applies to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub lr: f64,
    pub batch: usize,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub lr_patience: usize,
    pub lr_factor: f64,
    pub seeds: Vec<u64>,
    pub adam: AdamConfig,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            lr: 5e-4,
            batch: 64,
            max_epochs: 100,
            early_stop_patience: 20,
            lr_patience: 10,
            lr_factor: 0.5,
            seeds: vec![0, 1, 2, 3, 4],
            adam: AdamConfig::default(),
        }
    }
}

impl TrainingConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            out.push(format!("lr: must be positive, got {}", self.lr));
        }
        for (field, value) in [
            ("batch", self.batch),
            ("max_epochs", self.max_epochs),
            ("early_stop_patience", self.early_stop_patience),
            ("lr_patience", self.lr_patience),
        ] {
            if value == 0 {
                out.push(format!("{field}: must be positive"));
            }
        }
        if !(self.lr_factor > 0.0 && self.lr_factor < 1.0) {
            out.push(format!("lr_factor: must be in (0, 1), got {}", self.lr_factor));
        }
        if self.seeds.is_empty() {
            out.push("seeds: need at least one seed".into());
        }
        let a = &self.adam;
        if !(0.0..1.0).contains(&a.beta1) {
            out.push(format!("adam.beta1: must be in [0, 1), got {}", a.beta1));
        }
        if !(0.0..1.0).contains(&a.beta2) {
            out.push(format!("adam.beta2: must be in [0, 1), got {}", a.beta2));
        }
        if !(a.epsilon > 0.0 && a.epsilon.is_finite()) {
            out.push(format!("adam.epsilon: must be positive, got {}", a.epsilon));
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
}
