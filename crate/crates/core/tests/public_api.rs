use padenet::layers::ActivationKind;
use padenet::metrics::metrics_from_confusion;
use padenet::model::{load_checkpoint, save_checkpoint};
use padenet::pipeline::{build_synthetic_set, Channel, Partition, SplitRatios, SynthCorpusConfig};
use padenet::training::{evaluate_confusion, run_experiment, train};
use padenet::{Model, ModelConfig, RngStream, SegmentSet, TrainingConfig};

fn small_model(p: usize, q: usize) -> ModelConfig {
    ModelConfig {
        input_length: 256,
        blocks: 3,
        filters: 4,
        dense_units: 8,
        ..ModelConfig::with_orders(p, q, ActivationKind::Tanh)
    }
}

fn small_corpus() -> SegmentSet {
    let mut cfg = SynthCorpusConfig::default();
    cfg.signal.duration_s = 0.25;
    cfg.speeds_hz = vec![30, 60];
    build_synthetic_set(&cfg, Channel::Accel1, 256, SplitRatios::default()).unwrap()
}

#[test]
fn synthetic_corpus_is_balanced() {
    let set = small_corpus();
    assert_eq!(set.files().len(), 32);
    let per_file = 10500 / 256;
    let (train, val, test) = SplitRatios::default().counts(per_file);
    for (partition, n) in [(Partition::Train, train), (Partition::Val, val), (Partition::Test, test)] {
        assert!(set.class_counts(partition).iter().all(|&c| c == 4 * n));
    }
}

#[test]
fn trained_checkpoint_scores_identically_after_reload() {
    let data = small_corpus();
    let config = small_model(2, 1);
    let model = Model::build(&config, &mut RngStream::new(3)).unwrap();
    let training = TrainingConfig {
        max_epochs: 3,
        lr: 3e-3,
        ..TrainingConfig::default()
    };
    let outcome = train(&model, &data, &training, 3).unwrap();
    assert!(outcome.history.len() == 3);
    assert!(outcome.history.last().unwrap().train_loss < outcome.history[0].train_loss);

    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("ckpt");
    save_checkpoint(&outcome.model, &path).unwrap();
    let reloaded = load_checkpoint(&path).unwrap();
    assert_eq!(reloaded, outcome.model);

    let shard_path = tmp.path().join("test.shard");
    data.subset(Partition::Test).write_shard(&shard_path).unwrap();
    let shard = SegmentSet::read_shard(&shard_path).unwrap();
    let a = evaluate_confusion(&outcome.model, &data, Partition::Test).unwrap();
    let b = evaluate_confusion(&reloaded, &shard, Partition::Test).unwrap();
    assert_eq!(a, b);
    assert_eq!(
        metrics_from_confusion(&a).unwrap().accuracy,
        metrics_from_confusion(&b).unwrap().accuracy
    );
}

#[test]
fn experiments_are_reproducible() {
    let data = small_corpus();
    let training = TrainingConfig {
        max_epochs: 2,
        seeds: vec![0, 1],
        ..TrainingConfig::default()
    };
    let a = run_experiment(&small_model(1, 0), &training, &data).unwrap();
    let b = run_experiment(&small_model(1, 0), &training, &data).unwrap();
    assert_eq!(a.summary, b.summary);
    assert_eq!(a.confusion, b.confusion);
    for (x, y) in a.runs.iter().zip(&b.runs) {
        assert_eq!(x.history, y.history);
        assert_eq!(x.model, y.model);
    }
    assert_ne!(a.runs[0].model, a.runs[1].model);
}
