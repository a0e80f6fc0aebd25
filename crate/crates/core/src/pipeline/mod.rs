//! Recording ingest, windowing, normalization, temporal splits and the
//! synthetic corpus.

mod dataset;
mod ingest;
mod label;
mod segment;
mod synth;

pub use dataset::{
    build_synthetic_set, load_csv_dir, write_synthetic_corpus, Partition, SegmentSet,
    SynthCorpusConfig, SHARD_KIND,
};
pub use ingest::{ingest_recording, Channel, SENSOR_COLUMNS};
pub use label::{parse_label, FaultClass, RecordingLabel, NUM_CLASSES, SPEEDS_HZ};
pub use segment::{normalize_segment, segment_signal, temporal_split, SplitRatios, WINDOW};
pub use synth::{synth_generate, Recording, SynthConfig, SAMPLE_RATE_HZ};
