use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::container::{ArrayData, Container};
use crate::numerics::Tensor;
use crate::pipeline::ingest::{ingest_recording, Channel};
use crate::pipeline::label::{parse_label, FaultClass, RecordingLabel, NUM_CLASSES, SPEEDS_HZ};
use crate::pipeline::segment::{normalize_segment, segment_signal, temporal_split, SplitRatios};
use crate::pipeline::synth::{synth_generate, SynthConfig};

pub const SHARD_KIND: &str = "segments";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Partition {
    Train,
    Val,
    Test,
}

impl Partition {
    pub const ALL: [Partition; 3] = [Partition::Train, Partition::Val, Partition::Test];

    fn code(self) -> u8 {
        self as u8
    }

    fn from_code(c: u8) -> Result<Self> {
        Self::ALL
            .get(c as usize)
            .copied()
            .ok_or_else(|| Error::Load(format!("bad partition code {c}")))
    }

    pub fn name(self) -> &'static str {
        match self {
            Partition::Train => "train",
            Partition::Val => "val",
            Partition::Test => "test",
        }
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Normalized, labeled windows with provenance and partition tags.
///
/// Windows are stored row-major in one buffer. Files are appended whole, so
/// within a file the windows keep their temporal order.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentSet {
    window: usize,
    windows: Vec<f64>,
    labels: Vec<u8>,
    file_ids: Vec<u32>,
    window_indices: Vec<u32>,
    partitions: Vec<Partition>,
    files: Vec<String>,
}

impl SegmentSet {
    pub fn new(window: usize) -> Self {
        Self {
            window,
            windows: Vec::new(),
            labels: Vec::new(),
            file_ids: Vec::new(),
            window_indices: Vec::new(),
            partitions: Vec::new(),
            files: Vec::new(),
        }
    }

    /// Segments `signal`, normalizes every window and splits them
    /// temporally. Returns the number of windows added.
    pub fn add_file(
        &mut self,
        name: &str,
        class: FaultClass,
        signal: &[f64],
        ratios: SplitRatios,
    ) -> Result<usize> {
        let file_id = u32::try_from(self.files.len()).map_err(|_| Error::Range("too many files".into()))?;
        let windows: Vec<Vec<f64>> = segment_signal(signal, self.window)?
            .iter()
            .map(|w| normalize_segment(w))
            .collect();
        let n = windows.len();
        let (train, val, test) = temporal_split(windows, ratios);
        let tagged = [(Partition::Train, train), (Partition::Val, val), (Partition::Test, test)];
        let mut index = 0u32;
        for (partition, part) in tagged {
            for w in part {
                self.windows.extend_from_slice(&w);
                self.labels.push(class.index() as u8);
                self.file_ids.push(file_id);
                self.window_indices.push(index);
                self.partitions.push(partition);
                index += 1;
            }
        }
        self.files.push(name.to_string());
        Ok(n)
    }

    pub fn window_len(&self) -> usize {
        self.window
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    pub fn window(&self, i: usize) -> &[f64] {
        &self.windows[i * self.window..(i + 1) * self.window]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i] as usize
    }

    pub fn partition(&self, i: usize) -> Partition {
        self.partitions[i]
    }

    /// `(file id, window index within the file)`.
    pub fn origin(&self, i: usize) -> (usize, usize) {
        (self.file_ids[i] as usize, self.window_indices[i] as usize)
    }

    /// Positions of every window in `partition`, in storage order.
    pub fn indices(&self, partition: Partition) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.partitions[i] == partition).collect()
    }

    pub fn labels_of(&self, indices: &[usize]) -> Vec<usize> {
        indices.iter().map(|&i| self.label(i)).collect()
    }

    pub fn class_counts(&self, partition: Partition) -> [usize; NUM_CLASSES] {
        let mut counts = [0; NUM_CLASSES];
        for i in self.indices(partition) {
            counts[self.label(i)] += 1;
        }
        counts
    }

    /// Inputs `[B, window, 1]` and one-hot targets `[B, classes]`.
    pub fn batch(&self, indices: &[usize], classes: usize) -> Result<(Tensor, Tensor)> {
        let mut x = Vec::with_capacity(indices.len() * self.window);
        let mut y = vec![0.0; indices.len() * classes];
        for (row, &i) in indices.iter().enumerate() {
            x.extend_from_slice(self.window(i));
            let label = self.label(i);
            if label >= classes {
                return Err(Error::Range(format!("label {label} outside {classes} classes")));
            }
            y[row * classes + label] = 1.0;
        }
        Ok((
            Tensor::new(&[indices.len(), self.window, 1], x)?,
            Tensor::new(&[indices.len(), classes], y)?,
        ))
    }

    /// Only the windows of `partition`, provenance kept.
    pub fn subset(&self, partition: Partition) -> Self {
        let mut out = Self {
            files: self.files.clone(),
            ..Self::new(self.window)
        };
        for i in self.indices(partition) {
            out.windows.extend_from_slice(self.window(i));
            out.labels.push(self.labels[i]);
            out.file_ids.push(self.file_ids[i]);
            out.window_indices.push(self.window_indices[i]);
            out.partitions.push(partition);
        }
        out
    }

    pub fn to_container(&self) -> Result<Container> {
        let mut c = Container::new();
        c.set("kind", SHARD_KIND);
        c.set("window", self.window.to_string());
        c.set("files", self.files.len().to_string());
        for (i, name) in self.files.iter().enumerate() {
            c.set(format!("file.{i}"), name.clone());
        }
        let n = self.len();
        c.push("windows", &[n, self.window], ArrayData::F64(self.windows.clone()))?;
        c.push("labels", &[n], ArrayData::U8(self.labels.clone()))?;
        c.push("file_ids", &[n], ArrayData::U32(self.file_ids.clone()))?;
        c.push("window_indices", &[n], ArrayData::U32(self.window_indices.clone()))?;
        c.push(
            "partitions",
            &[n],
            ArrayData::U8(self.partitions.iter().map(|p| p.code()).collect()),
        )?;
        Ok(c)
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        if c.get("kind") != Some(SHARD_KIND) {
            return Err(Error::Load(format!(
                "expected a segment shard, found kind '{}'",
                c.get("kind").unwrap_or("<none>")
            )));
        }
        let header_num = |key: &str| -> Result<usize> {
            c.get(key)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Load(format!("shard header '{key}' missing or invalid")))
        };
        let window = header_num("window")?;
        let files = (0..header_num("files")?)
            .map(|i| {
                c.get(&format!("file.{i}"))
                    .map(str::to_string)
                    .ok_or_else(|| Error::Load(format!("shard header 'file.{i}' missing")))
            })
            .collect::<Result<Vec<_>>>()?;
        let array = |name: &str| {
            c.array(name)
                .ok_or_else(|| Error::Load(format!("shard array '{name}' missing")))
        };
        let windows_arr = array("windows")?;
        let n = windows_arr.shape.first().copied().unwrap_or(0);
        if windows_arr.shape != [n, window] {
            return Err(Error::Load(format!(
                "shard windows have shape {:?}, expected [n, {window}]",
                windows_arr.shape
            )));
        }
        let ArrayData::F64(windows) = &windows_arr.data else {
            return Err(Error::Load("shard windows are not f64".into()));
        };
        let u8s = |name: &str| -> Result<Vec<u8>> {
            match &array(name)?.data {
                ArrayData::U8(v) if v.len() == n => Ok(v.clone()),
                _ => Err(Error::Load(format!("shard array '{name}' must be {n} u8 values"))),
            }
        };
        let u32s = |name: &str| -> Result<Vec<u32>> {
            match &array(name)?.data {
                ArrayData::U32(v) if v.len() == n => Ok(v.clone()),
                _ => Err(Error::Load(format!("shard array '{name}' must be {n} u32 values"))),
            }
        };
        let labels = u8s("labels")?;
        if let Some(bad) = labels.iter().find(|&&l| l as usize >= NUM_CLASSES) {
            return Err(Error::Load(format!("shard label {bad} outside the class set")));
        }
        let file_ids = u32s("file_ids")?;
        if file_ids.iter().any(|&f| f as usize >= files.len()) {
            return Err(Error::Load("shard file id outside the file table".into()));
        }
        let partitions = u8s("partitions")?
            .into_iter()
            .map(Partition::from_code)
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            window,
            windows: windows.clone(),
            labels,
            file_ids,
            window_indices: u32s("window_indices")?,
            partitions,
            files,
        })
    }

    pub fn write_shard(&self, path: &Path) -> Result<()> {
        self.to_container()?.write(path)
    }

    pub fn read_shard(path: &Path) -> Result<Self> {
        Self::from_container(&Container::read(path)?)
    }
}

/// Recordings to synthesize, one file per (class, speed, load).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthCorpusConfig {
    #[serde(flatten)]
    pub signal: SynthConfig,
    pub classes: Vec<FaultClass>,
    pub speeds_hz: Vec<u32>,
    pub loads: Vec<bool>,
    pub seed: u64,
}

impl Default for SynthCorpusConfig {
    fn default() -> Self {
        Self {
            signal: SynthConfig::default(),
            classes: FaultClass::ALL.to_vec(),
            speeds_hz: SPEEDS_HZ.to_vec(),
            loads: vec![false, true],
            seed: 0,
        }
    }
}

impl SynthCorpusConfig {
    pub fn labels(&self) -> Vec<RecordingLabel> {
        let mut out = Vec::new();
        for &class in &self.classes {
            for &speed_hz in &self.speeds_hz {
                for &loaded in &self.loads {
                    out.push(RecordingLabel {
                        class,
                        speed_hz,
                        loaded,
                    });
                }
            }
        }
        out.sort_by_key(|l| l.stem());
        out
    }
}

/// Synthesizes the corpus and returns the segmented set for `channel`.
/// Files are processed in name order.
pub fn build_synthetic_set(
    cfg: &SynthCorpusConfig,
    channel: Channel,
    window: usize,
    ratios: SplitRatios,
) -> Result<SegmentSet> {
    ratios.validate()?;
    let mut set = SegmentSet::new(window);
    for label in cfg.labels() {
        let rec = synth_generate(label.class, label.speed_hz, label.loaded, cfg.seed, &cfg.signal)?;
        set.add_file(&label.stem(), label.class, rec.channel(channel), ratios)?;
    }
    Ok(set)
}

/// Writes one `<stem>.csv` per recording into `dir`.
pub fn write_synthetic_corpus(cfg: &SynthCorpusConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for label in cfg.labels() {
        let rec = synth_generate(label.class, label.speed_hz, label.loaded, cfg.seed, &cfg.signal)?;
        let path = dir.join(format!("{}.csv", label.stem()));
        rec.write_csv(&path)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Loads every `*.csv` in `dir` whose name parses as a recording label, in
/// file-name order.
pub fn load_csv_dir(dir: &Path, channel: Channel, window: usize, ratios: SplitRatios) -> Result<SegmentSet> {
    ratios.validate()?;
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")))
        .collect();
    entries.sort();
    let mut set = SegmentSet::new(window);
    for path in entries {
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        let label = match parse_label(&name) {
            Ok(label) => label,
            Err(e) => {
                log::warn!("skipping {}: {e}", path.display());
                continue;
            }
        };
        let signal = ingest_recording(&path, channel)?;
        set.add_file(&name, label.class, &signal, ratios)?;
    }
    if set.is_empty() {
        return Err(Error::Ingest {
            path: dir.to_path_buf(),
            message: "no labeled recordings found".into(),
        });
    }
    Ok(set)
}
