use crate::error::{Error, Result};
use crate::metrics::{aggregate_runs, metrics_from_confusion, ConfusionMatrix, Metrics, MetricsReport};
use crate::model::{Model, ModelConfig};
use crate::numerics::RngStream;
use crate::pipeline::{Partition, SegmentSet};
use crate::training::config::TrainingConfig;
use crate::training::trainer::{evaluate_confusion, train, EpochRecord, STREAM_INIT};

/// Result of training and testing one seed.
#[derive(Clone, Debug)]
pub struct SeedRun {
    pub seed: u64,
    pub model: Model,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub confusion: ConfusionMatrix,
    pub metrics: Metrics,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub model: ModelConfig,
    pub runs: Vec<SeedRun>,
    pub summary: MetricsReport,
    /// Test confusion matrices summed over seeds.
    pub confusion: ConfusionMatrix,
}

/// Builds the model for `seed` exactly as [`run_experiment`] does.
pub fn build_for_seed(model: &ModelConfig, seed: u64) -> Result<Model> {
    Model::build(model, &mut RngStream::new(seed).fork(STREAM_INIT))
}

/// Trains one seed and scores it on the test partition.
pub fn run_seed(model: &ModelConfig, training: &TrainingConfig, data: &SegmentSet, seed: u64) -> Result<SeedRun> {
    let init = build_for_seed(model, seed)?;
    let outcome = train(&init, data, training, seed)?;
    let confusion = evaluate_confusion(&outcome.model, data, Partition::Test)?;
    let metrics = metrics_from_confusion(&confusion)?;
    Ok(SeedRun {
        seed,
        model: outcome.model,
        history: outcome.history,
        best_epoch: outcome.best_epoch,
        confusion,
        metrics,
    })
}

pub fn summarize(model: &ModelConfig, runs: Vec<SeedRun>) -> Result<RunReport> {
    let first = runs
        .first()
        .ok_or_else(|| Error::Range("no runs to summarize".into()))?;
    let mut total = ConfusionMatrix::new(first.confusion.classes());
    for r in &runs {
        total.add(&r.confusion)?;
    }
    let summary = aggregate_runs(&runs.iter().map(|r| r.metrics).collect::<Vec<_>>())?;
    Ok(RunReport {
        model: model.clone(),
        runs,
        summary,
        confusion: total,
    })
}

/// Trains one configuration under every seed in `training.seeds`.
/// `on_seed` sees each run as soon as it finishes.
pub fn run_experiment_with(
    model: &ModelConfig,
    training: &TrainingConfig,
    data: &SegmentSet,
    mut on_seed: impl FnMut(&SeedRun) -> Result<()>,
) -> Result<RunReport> {
    model.validate()?;
    training.validate()?;
    let mut runs = Vec::with_capacity(training.seeds.len());
    for &seed in &training.seeds {
        log::info!("P={} Q={} seed {seed}", model.p, model.q);
        let run = run_seed(model, training, data, seed)?;
        on_seed(&run)?;
        runs.push(run);
    }
    summarize(model, runs)
}

pub fn run_experiment(model: &ModelConfig, training: &TrainingConfig, data: &SegmentSet) -> Result<RunReport> {
    run_experiment_with(model, training, data, |_| Ok(()))
}

/// [`run_experiment`] for every configuration in `grid`, in order.
pub fn run_grid(grid: &[ModelConfig], training: &TrainingConfig, data: &SegmentSet) -> Result<Vec<RunReport>> {
    grid.iter().map(|m| run_experiment(m, training, data)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::ActivationKind;
    use crate::pipeline::{FaultClass, SplitRatios};

    fn data() -> SegmentSet {
        let mut rng = RngStream::new(5);
        let mut set = SegmentSet::new(16);
        for (i, class) in [FaultClass::H, FaultClass::RU].into_iter().enumerate() {
            let sign = if i == 0 { 1.0 } else { -1.0 };
            let s: Vec<f64> = (0..16 * 20).map(|k| sign * (k % 16) as f64 + rng.normal()).collect();
            set.add_file(&format!("f{i}"), class, &s, SplitRatios::default()).unwrap();
        }
        set
    }

    fn config() -> (ModelConfig, TrainingConfig) {
        let m = ModelConfig {
            input_length: 16,
            blocks: 1,
            filters: 2,
            kernel: 3,
            dense_units: 3,
            classes: 2,
            ..ModelConfig::with_orders(1, 1, ActivationKind::LeakyRelu)
        };
        let t = TrainingConfig {
            lr: 1e-2,
            batch: 8,
            max_epochs: 3,
            seeds: vec![3, 4],
            ..TrainingConfig::default()
        };
        (m, t)
    }

    #[test]
    fn aggregates_every_seed() {
        let (m, t) = config();
        let d = data();
        let mut seen = Vec::new();
        let report = run_experiment_with(&m, &t, &d, |r| {
            seen.push(r.seed);
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, vec![3, 4]);
        assert_eq!(report.runs.len(), 2);
        assert_eq!(report.summary.runs, 2);
        let per_run: u64 = report.runs.iter().map(|r| r.confusion.total()).sum();
        assert_eq!(report.confusion.total(), per_run);
        assert_eq!(per_run, 2 * d.indices(Partition::Test).len() as u64);

        // Equal run sizes: pooled accuracy equals the mean of run accuracies.
        let pooled = metrics_from_confusion(&report.confusion).unwrap().accuracy * 100.0;
        assert!((pooled - report.summary.accuracy.mean).abs() < 1e-9);
    }

    #[test]
    fn single_seed_has_zero_spread() {
        let (m, mut t) = config();
        t.seeds = vec![9];
        let report = run_experiment(&m, &t, &data()).unwrap();
        assert_eq!(report.summary.accuracy.std, 0.0);
    }
}
