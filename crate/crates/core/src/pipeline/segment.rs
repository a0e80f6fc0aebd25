use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const WINDOW: usize = 1000;

/// Consecutive non-overlapping windows; the tail shorter than `window` is
/// dropped.
pub fn segment_signal(signal: &[f64], window: usize) -> Result<Vec<Vec<f64>>> {
    if window == 0 {
        return Err(Error::config("window length must be positive"));
    }
    if signal.len() < window {
        return Err(Error::Range(format!(
            "signal of {} samples is shorter than one {window}-sample window",
            signal.len()
        )));
    }
    Ok(signal.chunks_exact(window).map(<[f64]>::to_vec).collect())
}

/// Min-max maps a window onto [-1, 1]. Constant windows become zeros.
pub fn normalize_segment(window: &[f64]) -> Vec<f64> {
    let (lo, hi) = window
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(hi > lo) {
        return vec![0.0; window.len()];
    }
    let span = hi - lo;
    window.iter().map(|&v| 2.0 * (v - lo) / span - 1.0).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.8,
            val: 0.1,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let ok = self.train > 0.0 && self.val >= 0.0 && self.train + self.val <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!(
                "split ratios train={} val={} must be positive and sum to at most 1",
                self.train, self.val
            )))
        }
    }

    /// `(train, val, test)` counts for `n` windows: floor for train and val,
    /// the remainder to test.
    pub fn counts(&self, n: usize) -> (usize, usize, usize) {
        // Guard against products such as 0.1 * 30 landing a hair under an integer.
        let floor = |r: f64| ((r * n as f64) + 1e-9).floor() as usize;
        let train = floor(self.train).min(n);
        let val = floor(self.val).min(n - train);
        (train, val, n - train - val)
    }
}

/// Splits one file's windows in temporal order.
pub fn temporal_split<T>(mut windows: Vec<T>, ratios: SplitRatios) -> (Vec<T>, Vec<T>, Vec<T>) {
    let n = windows.len();
    if n < 10 {
        log::warn!("temporal split of only {n} windows; partitions may be empty");
    }
    let (train, val, _) = ratios.counts(n);
    let test = windows.split_off(train + val);
    let val = windows.split_off(train);
    (windows, val, test)
}
