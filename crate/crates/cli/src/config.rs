use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use padenet::model::ModelConfig;
use padenet::pipeline::{Channel, SplitRatios, SynthCorpusConfig, NUM_CLASSES, WINDOW};
use padenet::training::TrainingConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "PADENET_OUT";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Synthetic,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub source: DataSource,
    /// Directory of `<label>.csv` recordings when `source` is `csv`.
    pub dir: Option<PathBuf>,
    pub channel: Channel,
    pub window: usize,
    pub split: SplitRatios,
    pub synthetic: SynthCorpusConfig,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            source: DataSource::Synthetic,
            dir: None,
            channel: Channel::Accel1,
            window: WINDOW,
            split: SplitRatios::default(),
            synthetic: SynthCorpusConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Report root; falls back to `$PADENET_OUT`, then `runs`.
    pub dir: Option<PathBuf>,
    /// Checkpoints go here instead of beside the histories when set.
    pub checkpoint_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub training: TrainingConfig,
    pub data: DataConfig,
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Every violated constraint, each prefixed with its block and field.
    pub fn violations(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        out.extend(self.model.violations().into_iter().map(|v| format!("model.{v}")));
        out.extend(self.training.violations().into_iter().map(|v| format!("training.{v}")));

        let d = &self.data;
        if d.window == 0 {
            out.push("data.window: must be positive".into());
        }
        if let Err(e) = d.split.validate() {
            out.push(format!("data.split: {e}"));
        }
        match d.source {
            DataSource::Csv if d.dir.is_none() => out.push("data.dir: required when source is csv".into()),
            DataSource::Synthetic => {
                out.extend(d.synthetic.signal.violations().into_iter().map(|v| format!("data.synthetic.{v}")));
                for (field, empty) in [
                    ("classes", d.synthetic.classes.is_empty()),
                    ("speeds_hz", d.synthetic.speeds_hz.is_empty()),
                    ("loads", d.synthetic.loads.is_empty()),
                ] {
                    if empty {
                        out.push(format!("data.synthetic.{field}: must not be empty"));
                    }
                }
            }
            DataSource::Csv => {}
        }
        if self.model.input_length != d.window {
            out.push(format!(
                "model.input_length: must equal data.window ({}), got {}",
                d.window, self.model.input_length
            ));
        }
        if self.model.input_channels != 1 {
            out.push(format!(
                "model.input_channels: one sensor channel is read, got {}",
                self.model.input_channels
            ));
        }
        if self.model.classes != NUM_CLASSES {
            out.push(format!("model.classes: must be {NUM_CLASSES}, got {}", self.model.classes));
        }
        out
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            bail!("invalid config: {}", v.join("; "))
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// First 12 hex digits of the SHA-256 of the resolved model, training and
    /// data blocks. Output locations do not change the hash.
    pub fn hash(&self) -> String {
        let keyed = serde_json::json!({
            "model": self.model,
            "training": self.training,
            "data": self.data,
        });
        let digest = Sha256::digest(keyed.to_string().as_bytes());
        hex::encode(digest)[..12].to_string()
    }

    pub fn out_root(&self) -> PathBuf {
        self.output
            .dir
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("runs"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        assert_eq!(ExperimentConfig::default().violations(), Vec::<String>::new());
    }

    #[test]
    fn lists_every_violation() {
        let mut c = ExperimentConfig::default();
        c.model.p = 0;
        c.training.batch = 0;
        c.data.source = DataSource::Csv;
        let v = c.violations();
        assert!(v.iter().any(|s| s.starts_with("model.p")), "{v:?}");
        assert!(v.iter().any(|s| s.starts_with("training.batch")), "{v:?}");
        assert!(v.iter().any(|s| s.starts_with("data.dir")), "{v:?}");
    }

    #[test]
    fn json_round_trip_and_partial_files() {
        let c = ExperimentConfig::default();
        assert_eq!(serde_json::from_str::<ExperimentConfig>(&c.to_json()).unwrap(), c);

        let partial: ExperimentConfig =
            serde_json::from_str(r#"{"model": {"p": 1, "q": 2}, "data": {"synthetic": {"snr_db": 5.0}}}"#).unwrap();
        assert_eq!((partial.model.p, partial.model.q), (1, 2));
        assert_eq!(partial.data.synthetic.signal.snr_db, 5.0);
        assert_eq!(partial.training, TrainingConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"model": {"pp": 1}}"#).is_err());
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"extra": 1}"#).is_err());
    }

    #[test]
    fn hash_ignores_output_block() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.output.dir = Some("elsewhere".into());
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 12);
        b.model.q = 2;
        assert_ne!(a.hash(), b.hash());
    }
}
