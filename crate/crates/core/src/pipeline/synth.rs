//! Deterministic stand-in recordings for desk-scale experiments.
//!
//! Every recording is `base + background + signature(class) + noise`, where
//! `f` is the speed setting in Hz and `t` is time in seconds:
//!
//! | class | signature |
//! |-------|-----------|
//! | H  | none |
//! | RU | rotation tone raised to 1.5x amplitude, plus `1.0 sin(2π·40f·t) + 0.6 sin(2π·70f·t)` |
//! | RM | `0.8 sin(2π·60f·t) + 0.6 sin(2π·90f·t)` |
//! | SW | fixed tones `0.8 sin(2π·1100·t) + 0.5 sin(2π·2300·t)` |
//! | VU | `0.8 (1 + sin(2π·8f·t)) sin(2π·3300·t)` (amplitude modulation) |
//! | BR | `1.0 sin(2π·30f·t) + 0.5 sin(2π·50f·t)` |
//! | KA | `0.8 (1 + 0.9 sin(2π·20f·t)) sin(2π·1650·t)` |
//! | FB | decaying bursts `4 e^{-τ/1 ms} sin(2π·6000·τ)` every `1/(5.3f)` s |
//!
//! `base = L sin(2π f t)` and `background = 0.3 sin(2π·20f·t)` are shared by
//! all classes, with load factor `L = 1.25` when loaded, `1` otherwise. The
//! signature is scaled by `L` too. Each component gets a random phase from
//! the recording's stream. White Gaussian noise is then added per channel at
//! the configured SNR relative to that channel's clean power. Channels are
//! the same clean signal with gains accel1 1.0, audio 0.6, accel2 0.8,
//! accel3 0.5 and independent noise.

use std::f64::consts::TAU;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::RngStream;
use crate::pipeline::ingest::{Channel, SENSOR_COLUMNS};
use crate::pipeline::label::{FaultClass, RecordingLabel, SPEEDS_HZ};

pub const SAMPLE_RATE_HZ: f64 = 42_000.0;

const CHANNEL_GAINS: [f64; SENSOR_COLUMNS] = [1.0, 0.6, 0.8, 0.5];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub sample_rate: f64,
    pub duration_s: f64,
    pub snr_db: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            sample_rate: SAMPLE_RATE_HZ,
            duration_s: 2.0,
            snr_db: 10.0,
        }
    }
}

impl SynthConfig {
    pub fn samples(&self) -> usize {
        (self.sample_rate * self.duration_s).round() as usize
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            out.push(format!("sample_rate: must be positive, got {}", self.sample_rate));
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            out.push(format!("duration_s: must be positive, got {}", self.duration_s));
        }
        if !self.snr_db.is_finite() {
            out.push(format!("snr_db: must be finite, got {}", self.snr_db));
        }
        out
    }
}

/// A multi-channel recording with its decoded label.
#[derive(Clone, Debug, PartialEq)]
pub struct Recording {
    pub label: RecordingLabel,
    pub sample_rate: f64,
    pub channels: [Vec<f64>; SENSOR_COLUMNS],
}

impl Recording {
    pub fn channel(&self, c: Channel) -> &[f64] {
        &self.channels[c.column()]
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Writes the four sensor columns with a header row.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io = |e: csv::Error| match e.into_kind() {
            csv::ErrorKind::Io(source) => Error::io(path, source),
            other => Error::Load(format!("{}: {other:?}", path.display())),
        };
        let mut w = csv::Writer::from_path(path).map_err(io)?;
        w.write_record(Channel::ALL.iter().map(|c| c.name())).map_err(io)?;
        let mut row: [String; SENSOR_COLUMNS] = Default::default();
        for i in 0..self.len() {
            for (cell, ch) in row.iter_mut().zip(&self.channels) {
                *cell = ch[i].to_string();
            }
            w.write_record(&row).map_err(io)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Stream id of a recording under a corpus seed; distinct for every label.
fn stream_id(label: &RecordingLabel) -> u64 {
    (label.class.index() as u64) << 16 | u64::from(label.speed_hz) << 1 | u64::from(label.loaded)
}

struct Tone {
    amp: f64,
    freq: f64,
    phase: f64,
}

impl Tone {
    fn at(&self, t: f64) -> f64 {
        self.amp * (TAU * self.freq * t + self.phase).sin()
    }
}

/// Clean (noise-free) accel1 signal.
fn clean_signal(label: &RecordingLabel, cfg: &SynthConfig, rng: &mut RngStream) -> Vec<f64> {
    let f = f64::from(label.speed_hz);
    let load = if label.loaded { 1.25 } else { 1.0 };
    let mut phase = || TAU * rng.unit();
    let mut tone = |amp: f64, freq: f64| Tone {
        amp,
        freq,
        phase: phase(),
    };

    let base_amp = if label.class == FaultClass::RU { 1.5 } else { 1.0 };
    let mut tones = vec![tone(load * base_amp, f), tone(0.3, 20.0 * f)];
    // (carrier, modulation frequency, depth)
    let mut modulated: Option<(Tone, Tone)> = None;
    let mut bursts: Option<(f64, f64)> = None;
    match label.class {
        FaultClass::H => {}
        FaultClass::RU => {
            tones.push(tone(1.0 * load, 40.0 * f));
            tones.push(tone(0.6 * load, 70.0 * f));
        }
        FaultClass::RM => {
            tones.push(tone(0.8 * load, 60.0 * f));
            tones.push(tone(0.6 * load, 90.0 * f));
        }
        FaultClass::SW => {
            tones.push(tone(0.8 * load, 1100.0));
            tones.push(tone(0.5 * load, 2300.0));
        }
        FaultClass::VU => modulated = Some((tone(0.8 * load, 3300.0), tone(1.0, 8.0 * f))),
        FaultClass::BR => {
            tones.push(tone(1.0 * load, 30.0 * f));
            tones.push(tone(0.5 * load, 50.0 * f));
        }
        FaultClass::KA => modulated = Some((tone(0.8 * load, 1650.0), tone(0.9, 20.0 * f))),
        FaultClass::FB => {
            let period = 1.0 / (5.3 * f);
            bursts = Some((period, period * rng.unit()));
        }
    }

    let n = cfg.samples();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / cfg.sample_rate;
        let mut v: f64 = tones.iter().map(|tn| tn.at(t)).sum();
        if let Some((carrier, envelope)) = &modulated {
            v += (1.0 + envelope.at(t)) * carrier.at(t);
        }
        if let Some((period, offset)) = bursts {
            let since = (t - offset).rem_euclid(period);
            if since < 5e-3 {
                v += 4.0 * load * (-since / 1e-3).exp() * (TAU * 6000.0 * since).sin();
            }
        }
        out.push(v);
    }
    out
}

/// Generates all four channels of a recording. Identical arguments give
/// identical samples.
pub fn synth_generate(
    class: FaultClass,
    speed_hz: u32,
    loaded: bool,
    seed: u64,
    cfg: &SynthConfig,
) -> Result<Recording> {
    let problems = cfg.violations();
    if !problems.is_empty() {
        return Err(Error::config(problems.join("; ")));
    }
    if !SPEEDS_HZ.contains(&speed_hz) {
        return Err(Error::config(format!(
            "speed {speed_hz} Hz is not one of {SPEEDS_HZ:?}"
        )));
    }
    let label = RecordingLabel {
        class,
        speed_hz,
        loaded,
    };
    let root = RngStream::new(seed).fork(stream_id(&label));
    let clean = clean_signal(&label, cfg, &mut root.fork(0));
    let power = clean.iter().map(|v| v * v).sum::<f64>() / clean.len().max(1) as f64;
    let noise_std = (power / 10f64.powf(cfg.snr_db / 10.0)).sqrt();

    let channels = std::array::from_fn(|c| {
        let gain = CHANNEL_GAINS[c];
        let mut noise = root.fork(1 + c as u64);
        clean
            .iter()
            .map(|&v| gain * (v + noise_std * noise.normal()))
            .collect()
    });
    Ok(Recording {
        label,
        sample_rate: cfg.sample_rate,
        channels,
    })
}
