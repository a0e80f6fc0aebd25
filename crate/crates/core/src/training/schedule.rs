use serde::{Deserialize, Serialize};

use crate::training::config::TrainingConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EpochAction {
    Continue,
    ReduceLr,
    Stop,
}

/// Plateau bookkeeping: learning-rate decay and early stopping driven by
/// validation loss.
#[derive(Clone, Debug, PartialEq)]
pub struct Plateau {
    lr: f64,
    factor: f64,
    lr_patience: usize,
    stop_patience: usize,
    best: f64,
    stale_lr: usize,
    stale_stop: usize,
}

impl Plateau {
    pub fn new(cfg: &TrainingConfig) -> Self {
        Self {
            lr: cfg.lr,
            factor: cfg.lr_factor,
            lr_patience: cfg.lr_patience,
            stop_patience: cfg.early_stop_patience,
            best: f64::INFINITY,
            stale_lr: 0,
            stale_stop: 0,
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    /// Only a strictly lower loss counts as improvement and resets both
    /// counters. Otherwise both advance; stopping wins over decay when they
    /// fall due together.
    pub fn on_epoch_end(&mut self, val_loss: f64) -> EpochAction {
        if val_loss < self.best {
            self.best = val_loss;
            self.stale_lr = 0;
            self.stale_stop = 0;
            return EpochAction::Continue;
        }
        self.stale_lr += 1;
        self.stale_stop += 1;
        if self.stale_stop >= self.stop_patience {
            return EpochAction::Stop;
        }
        if self.stale_lr >= self.lr_patience {
            self.lr *= self.factor;
            self.stale_lr = 0;
            return EpochAction::ReduceLr;
        }
        EpochAction::Continue
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fresh() -> Plateau {
        Plateau::new(&TrainingConfig::default())
    }

    #[test]
    fn decreasing_losses_never_act() {
        let mut p = fresh();
        for e in 0..30 {
            assert_eq!(p.on_epoch_end(1.0 - e as f64 * 0.01), EpochAction::Continue);
        }
        assert_eq!(p.lr(), 5e-4);
    }

    #[test]
    fn ten_flat_epochs_halve_once() {
        let mut p = fresh();
        p.on_epoch_end(1.0);
        let actions: Vec<EpochAction> = (0..10).map(|_| p.on_epoch_end(1.0)).collect();
        assert!(actions[..9].iter().all(|&a| a == EpochAction::Continue));
        assert_eq!(actions[9], EpochAction::ReduceLr);
        assert_eq!(p.lr(), 2.5e-4);
    }

    #[test]
    fn twenty_flat_epochs_stop() {
        let mut p = fresh();
        p.on_epoch_end(1.0);
        let actions: Vec<EpochAction> = (0..20).map(|_| p.on_epoch_end(1.0)).collect();
        assert_eq!(actions.iter().filter(|&&a| a == EpochAction::ReduceLr).count(), 1);
        assert_eq!(actions[19], EpochAction::Stop);
    }

    #[test]
    fn equal_loss_is_not_improvement() {
        let mut p = fresh();
        p.on_epoch_end(0.5);
        p.on_epoch_end(0.5);
        assert_eq!(p.best(), 0.5);
        assert_eq!(p.stale_stop, 1);
    }

    #[test]
    fn lr_values_are_powers_of_the_factor() {
        let mut p = fresh();
        p.on_epoch_end(1.0);
        let mut seen = vec![p.lr()];
        for e in 0..60 {
            // Improve just before the stop counter fires.
            let loss = if e % 19 == 18 { 1.0 - e as f64 } else { 10.0 };
            p.on_epoch_end(loss);
            seen.push(p.lr());
        }
        assert!(seen.windows(2).all(|w| w[1] <= w[0]));
        for lr in seen {
            let k = (5e-4 / lr).log2();
            assert!((k - k.round()).abs() < 1e-12, "{lr}");
        }
    }
}
