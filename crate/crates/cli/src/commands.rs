use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context};
use clap::{Args, Parser, Subcommand};
use padenet::layers::ActivationKind;
use padenet::metrics::{aggregate_runs, metrics_from_confusion, render_csv, render_markdown, MetricsReport};
use padenet::model::{checkpoint_metadata, closed_form_param_count, load_checkpoint, save_checkpoint_with, ModelConfig};
use padenet::pipeline::{
    build_synthetic_set, load_csv_dir, write_synthetic_corpus, FaultClass, Partition, SegmentSet, SynthCorpusConfig,
};
use padenet::training::{evaluate_confusion, run_experiment_with, toy_network_grad_check, write_history, SeedRun};
use padenet::ConfusionMatrix;

use crate::config::{DataSource, ExperimentConfig};

#[derive(Debug, Parser)]
#[command(name = "padenet", version, about = "Padé approximant networks for motor fault diagnosis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic recording corpus as CSV files.
    Synth(SynthArgs),
    /// Train one configuration under every seed and write the reports.
    Train(TrainArgs),
    /// Score a checkpoint on a segment shard.
    Eval(EvalArgs),
    /// Print the trainable parameter count of a configuration.
    Params(ParamsArgs),
    /// Finite-difference check of the toy network's gradients.
    Gradcheck(GradcheckArgs),
    /// Rebuild reports from existing per-seed outputs.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    pub duration: f64,
    #[arg(long, default_value_t = 10.0)]
    pub snr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long, value_parser = parse_activation)]
    pub activation: Option<ActivationKind>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Comma-separated seed list.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub shard: PathBuf,
    /// Fail unless the accuracy equals the one recorded at training time.
    #[arg(long)]
    pub check: bool,
}

#[derive(Debug, Args)]
pub struct ParamsArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub q: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 2)]
    pub p: usize,
    #[arg(long, default_value_t = 1)]
    pub q: usize,
    #[arg(long, value_parser = parse_activation, default_value = "tanh")]
    pub activation: ActivationKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of consecutive seeds to check.
    #[arg(long, default_value_t = 1)]
    pub draws: u64,
    #[arg(long, default_value_t = 1e-5)]
    pub eps: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub tolerance: f64,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Experiment directories, each holding `config.json` and `seed-*/`.
    #[arg(required = true)]
    pub dirs: Vec<PathBuf>,
}

fn parse_activation(s: &str) -> Result<ActivationKind, String> {
    ActivationKind::parse(s).map_err(|e| e.to_string())
}

pub fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::Train(a) => train(a).map(|_| ()),
        Command::Eval(a) => eval(a),
        Command::Params(a) => params(a),
        Command::Gradcheck(a) => gradcheck(a),
        Command::Report(a) => report(a),
    }
}

fn class_codes() -> Vec<&'static str> {
    FaultClass::ALL.iter().map(|c| c.code()).collect()
}

pub fn synth(a: SynthArgs) -> anyhow::Result<()> {
    let mut cfg = SynthCorpusConfig {
        seed: a.seed,
        ..SynthCorpusConfig::default()
    };
    cfg.signal.duration_s = a.duration;
    cfg.signal.snr_db = a.snr;
    let v = cfg.signal.violations();
    ensure!(v.is_empty(), "invalid synthetic settings: {}", v.join("; "));
    let files = write_synthetic_corpus(&cfg, &a.out)?;
    println!("wrote {} recordings to {}", files.len(), a.out.display());
    Ok(())
}

/// Applies the command-line overrides on top of the file (or defaults).
pub fn resolve(a: &TrainArgs) -> anyhow::Result<ExperimentConfig> {
    let mut c = match &a.config {
        Some(path) => ExperimentConfig::read(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(p) = a.p {
        c.model.p = p;
    }
    if let Some(q) = a.q {
        c.model.q = q;
    }
    if let Some(act) = a.activation {
        c.model.activation = act;
    }
    if let Some(e) = a.epochs {
        c.training.max_epochs = e;
    }
    if let Some(s) = &a.seeds {
        c.training.seeds = s.clone();
    }
    if let Some(o) = &a.out {
        c.output.dir = Some(o.clone());
    }
    Ok(c)
}

pub fn load_data(c: &ExperimentConfig) -> anyhow::Result<SegmentSet> {
    let d = &c.data;
    let set = match d.source {
        DataSource::Synthetic => build_synthetic_set(&d.synthetic, d.channel, d.window, d.split)?,
        DataSource::Csv => {
            let dir = d.dir.as_deref().context("data.dir is required for csv input")?;
            load_csv_dir(dir, d.channel, d.window, d.split)?
        }
    };
    Ok(set)
}

pub fn run_label(m: &ModelConfig) -> String {
    format!("{} P={} Q={} {}", m.family().label(), m.p, m.q, m.activation.name())
}

/// Runs every seed and returns the experiment directory.
pub fn train(a: TrainArgs) -> anyhow::Result<PathBuf> {
    let c = resolve(&a)?;
    c.validate()?;
    let hash = c.hash();
    let root = c.out_root().join(&hash);
    std::fs::create_dir_all(&root).with_context(|| format!("creating {}", root.display()))?;
    let ckpt_root = c.output.checkpoint_dir.as_ref().map(|d| d.join(&hash));
    write_text(&root.join("config.json"), &c.to_json())?;

    let data = load_data(&c)?;
    log::info!(
        "{} windows from {} files; train/val/test = {}/{}/{}",
        data.len(),
        data.files().len(),
        data.indices(Partition::Train).len(),
        data.indices(Partition::Val).len(),
        data.indices(Partition::Test).len()
    );
    data.subset(Partition::Test).write_shard(&root.join("test.shard"))?;

    let codes = class_codes();
    let report = run_experiment_with(&c.model, &c.training, &data, |run: &SeedRun| {
        let dir = root.join(format!("seed-{}", run.seed));
        let ckpt = match &ckpt_root {
            Some(r) => r.join(format!("seed-{}", run.seed)).join("checkpoint"),
            None => dir.join("checkpoint"),
        };
        let meta = vec![
            ("seed".to_string(), run.seed.to_string()),
            ("config_hash".to_string(), hash.clone()),
            ("best_epoch".to_string(), run.best_epoch.to_string()),
            ("test_accuracy".to_string(), run.metrics.accuracy.to_string()),
        ];
        save_checkpoint_with(&run.model, &ckpt, &meta)?;
        write_history(&dir.join("history.csv"), &run.history)?;
        run.confusion.write_csv(&dir.join("confusion.csv"), &codes)?;
        println!(
            "seed {}: test accuracy {:.2}% (best epoch {})",
            run.seed,
            100.0 * run.metrics.accuracy,
            run.best_epoch
        );
        Ok(())
    })?;

    report.confusion.write_csv(&root.join("confusion.csv"), &codes)?;
    write_reports(&root, &[(run_label(&c.model), report.summary)])?;
    println!("{}: accuracy {} over {} seeds", root.display(), report.summary.accuracy, report.summary.runs);
    Ok(root)
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_reports(root: &Path, rows: &[(String, MetricsReport)]) -> anyhow::Result<()> {
    write_text(&root.join("report.md"), &render_markdown(rows))?;
    write_text(&root.join("report.csv"), &render_csv(rows))
}

pub fn eval(a: EvalArgs) -> anyhow::Result<()> {
    let model = load_checkpoint(&a.checkpoint)?;
    let shard = SegmentSet::read_shard(&a.shard)?;
    ensure!(
        shard.window_len() == model.config().input_length,
        "shard windows have {} samples but the model expects {}",
        shard.window_len(),
        model.config().input_length
    );
    let cm = evaluate_confusion(&model, &shard, Partition::Test)?;
    ensure!(cm.total() > 0, "{} holds no test windows", a.shard.display());
    let m = metrics_from_confusion(&cm)?;
    println!("windows: {}", cm.total());
    println!("accuracy: {:.4}%", 100.0 * m.accuracy);
    println!("precision: {:.4}%", 100.0 * m.precision);
    println!("recall: {:.4}%", 100.0 * m.recall);
    println!("f1: {:.4}%", 100.0 * m.f1);

    let meta = checkpoint_metadata(&a.checkpoint)?;
    if let Some((_, recorded)) = meta.iter().find(|(k, _)| k == "test_accuracy") {
        let recorded: f64 = recorded.parse().context("recorded test_accuracy is not a number")?;
        let same = recorded == m.accuracy;
        println!("recorded accuracy: {:.4}% ({})", 100.0 * recorded, if same { "identical" } else { "differs" });
        if a.check && !same {
            bail!("accuracy {} differs from recorded {}", m.accuracy, recorded);
        }
    } else if a.check {
        bail!("{} records no test accuracy", a.checkpoint.display());
    }
    Ok(())
}

pub fn params(a: ParamsArgs) -> anyhow::Result<()> {
    let mut m = match &a.config {
        Some(path) => ExperimentConfig::read(path)?.model,
        None => ModelConfig::default(),
    };
    if let Some(p) = a.p {
        m.p = p;
    }
    if let Some(q) = a.q {
        m.q = q;
    }
    m.validate()?;
    println!("{}", closed_form_param_count(&m));
    Ok(())
}

pub fn gradcheck(a: GradcheckArgs) -> anyhow::Result<()> {
    ensure!(a.draws > 0, "--draws must be positive");
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for seed in a.seed..a.seed + a.draws {
        match toy_network_grad_check(a.p, a.q, a.activation, seed, a.eps)? {
            Some(r) => {
                log::info!("seed {seed}: {:.3e} over {} entries", r.max_rel_error, r.checked);
                worst = worst.max(r.max_rel_error);
                checked += 1;
            }
            None => log::warn!("seed {seed}: denominator term near zero, skipped"),
        }
    }
    ensure!(checked > 0, "every draw had a denominator term near zero");
    println!("max relative error: {worst:.3e}");
    ensure!(worst <= a.tolerance, "relative error {worst:.3e} exceeds {:.1e}", a.tolerance);
    Ok(())
}

fn seed_dirs(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut out: Vec<(u64, PathBuf)> = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        let seed = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("seed-"))
            .and_then(|s| s.parse::<u64>().ok());
        if let (Some(seed), true) = (seed, path.is_dir()) {
            out.push((seed, path));
        }
    }
    out.sort();
    Ok(out.into_iter().map(|(_, p)| p).collect())
}

pub fn report(a: ReportArgs) -> anyhow::Result<()> {
    let mut rows = Vec::new();
    for dir in &a.dirs {
        let c = ExperimentConfig::read(&dir.join("config.json"))?;
        let mut runs = Vec::new();
        let mut total: Option<ConfusionMatrix> = None;
        for seed_dir in seed_dirs(dir)? {
            let cm = ConfusionMatrix::read_csv(&seed_dir.join("confusion.csv"))?;
            runs.push(metrics_from_confusion(&cm)?);
            match &mut total {
                Some(t) => t.add(&cm)?,
                None => total = Some(cm),
            }
        }
        let total = total.with_context(|| format!("{} has no seed-*/confusion.csv", dir.display()))?;
        let row = (run_label(&c.model), aggregate_runs(&runs)?);
        total.write_csv(&dir.join("confusion.csv"), &class_codes())?;
        write_reports(dir, std::slice::from_ref(&row))?;
        rows.push(row);
    }
    print!("{}", render_markdown(&rows));
    Ok(())
}
