//! Command-line driver: synthetic data, ingestion checks, pre-training,
//! fine-tuning and evaluation.
//!
//! Exit codes: 0 success, 1 usage, 2 I/O, 3 numeric abort, 4 data
//! integrity, 5 checkpoint or transfer.

pub mod config;

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use geoplih::diffcore::Checkpoint;
use geoplih::evalmetrics::MetricsReport;
use geoplih::synth::{write_corpus, AffinitySpec, SynthSpec};
use geoplih::train::{
    affinity_residuals, affinity_samples, identity_baseline, init_model, pretrain_samples, run_training,
    set_head_bias, transfer_weights, AffinitySample, ModelConfig, Task,
};
use geoplih::trajio::{parse_frames, pair_consecutive, read_labels, split_targets, ComplexFrame, SplitManifest};
use geoplih::{Error, Result};

use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "geoplih", version, about = "Equivariant protein-ligand affinity model with trajectory pre-training")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic trajectory corpus and a labelled affinity set.
    Synth(SynthArgs),
    /// Parse inputs, pair frames and audit the target split.
    Check(RunArgs),
    /// Next-frame coordinate pre-training.
    Pretrain(RunArgs),
    /// Affinity fine-tuning, optionally from a pre-trained checkpoint.
    Finetune(FinetuneArgs),
    /// Evaluate a checkpoint on labelled complexes.
    Eval(EvalArgs),
    /// Print the full default config.
    Config(RunArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Output directory.
    #[arg(long, default_value = "data")]
    out: PathBuf,
    /// Trajectory targets.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    targets: u64,
    /// Frames per trajectory target.
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
    frames: u64,
    /// Complexes in the labelled affinity set.
    #[arg(long, default_value_t = 250, value_parser = clap::value_parser!(u64).range(1..))]
    complexes: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    trajectories: Option<PathBuf>,
    #[arg(long)]
    complexes: Option<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FinetuneArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Initialise the encoder from a pre-training checkpoint.
    #[arg(long)]
    from_checkpoint: Option<PathBuf>,
    /// Train the affinity head only.
    #[arg(long)]
    freeze_encoder: bool,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Split manifest; restricts evaluation to `--subset` and supplies the
    /// training labels for the binned table.
    #[arg(long)]
    split: Option<PathBuf>,
    #[arg(long, default_value = "test", value_parser = ["train", "val", "test"])]
    subset: String,
}

/// Maps an error to the process exit code.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => 1,
        Error::Io { .. } => 2,
        Error::NumericAbort(_) => 3,
        Error::Parse { .. }
        | Error::Integrity(_)
        | Error::EmptyPocket { .. }
        | Error::Contract(_)
        | Error::UndefinedCorrelation(_) => 4,
        Error::Checkpoint(_) | Error::Transfer(_) | Error::Dimension { .. } | Error::Index { .. } => 5,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synth(a) => cmd_synth(&a),
        Command::Check(a) => cmd_check(&resolve(&a)?),
        Command::Pretrain(a) => cmd_pretrain(&resolve(&a)?),
        Command::Finetune(a) => {
            let mut cfg = resolve(&a.run)?;
            cfg.freeze_encoder |= a.freeze_encoder;
            cmd_finetune(&cfg, a.from_checkpoint.as_deref())
        }
        Command::Eval(a) => {
            let cfg = resolve(&a.run)?;
            let out = a.run.out.clone().unwrap_or_else(|| cfg.out_dir.join("eval"));
            cmd_eval(&cfg, &a.checkpoint, a.split.as_deref(), &a.subset, &out)
        }
        Command::Config(a) => {
            print!("{}", resolve(&a)?.to_text());
            Ok(())
        }
    }
}

fn resolve(a: &RunArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &a.config {
        cfg.apply_file(path)?;
    }
    cfg.apply_env()?;
    for kv in &a.sets {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.threads {
        cfg.threads = v;
    }
    if let Some(v) = a.max_epochs {
        cfg.max_epochs = v;
    }
    if let Some(v) = a.patience {
        cfg.patience = v;
    }
    if let Some(v) = a.lr {
        cfg.lr = v;
    }
    if let Some(v) = &a.out {
        cfg.out_dir = v.clone();
    }
    if let Some(v) = &a.trajectories {
        cfg.trajectories = v.clone();
    }
    if let Some(v) = &a.complexes {
        cfg.complexes = v.clone();
    }
    if let Some(v) = &a.labels {
        cfg.labels = v.clone();
    }
    cfg.model.validate()?;
    Ok(cfg)
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let base = SynthSpec {
        n_frames: a.frames as usize,
        seed: a.seed,
        ..SynthSpec::default()
    };
    let affinity = AffinitySpec::new(a.complexes as usize, a.seed);
    let summary = write_corpus(&a.out, &base, a.targets as usize, &affinity)?;
    println!(
        "synth: targets={} frames={} labels={} out={}",
        summary.n_targets,
        summary.n_frames,
        summary.n_labels,
        a.out.display()
    );
    Ok(())
}

/// Frames from one file, or from every `.frames` file of a directory in name
/// order, sorted by `(target, t)`.
fn load_frames(path: &Path) -> Result<Vec<ComplexFrame>> {
    let mut frames = Vec::new();
    if path.is_dir() {
        let entries = fs::read_dir(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let mut files: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "frames"))
            .collect();
        files.sort();
        for f in files {
            frames.extend(parse_frames(&f)?);
        }
    } else {
        frames = parse_frames(path)?;
    }
    frames.sort_by(|a, b| (&a.target_id, a.t_index).cmp(&(&b.target_id, b.t_index)));
    Ok(frames)
}

fn target_ids(frames: &[ComplexFrame]) -> Vec<String> {
    frames
        .iter()
        .map(|f| f.target_id.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

fn subset(frames: &[ComplexFrame], ids: &[String]) -> Vec<ComplexFrame> {
    let set: BTreeSet<&str> = ids.iter().map(String::as_str).collect();
    frames.iter().filter(|f| set.contains(f.target_id.as_str())).cloned().collect::<Vec<_>>()
}

fn split_for(frames: &[ComplexFrame], seed: u64) -> Result<SplitManifest> {
    let split = split_targets(&target_ids(frames), seed)?;
    split.audit_leakage()?;
    Ok(split)
}

fn cmd_check(cfg: &RunConfig) -> Result<()> {
    let mut checked = false;
    if cfg.trajectories.exists() {
        let frames = load_frames(&cfg.trajectories)?;
        let pairing = pair_consecutive(&frames);
        let split = split_for(&frames, cfg.seed)?;
        pretrain_samples(&frames, &cfg.model.graph)?;
        println!(
            "check trajectories: targets={} frames={} pairs={} skipped={} split={}/{}/{} leakage=none",
            split.len(),
            frames.len(),
            pairing.pairs.len(),
            pairing.skipped,
            split.train.len(),
            split.val.len(),
            split.test.len()
        );
        checked = true;
    }
    if cfg.complexes.exists() {
        let frames = load_frames(&cfg.complexes)?;
        let labels = read_labels(&cfg.labels)?;
        let samples = affinity_samples(&frames, &labels, &cfg.model.graph)?;
        let split = split_for(&frames, cfg.seed)?;
        println!(
            "check complexes: complexes={} labels={} split={}/{}/{} leakage=none",
            samples.len(),
            labels.len(),
            split.train.len(),
            split.val.len(),
            split.test.len()
        );
        checked = true;
    }
    if !checked {
        return Err(Error::Config(format!(
            "nothing to check: neither {} nor {} exists",
            cfg.trajectories.display(),
            cfg.complexes.display()
        )));
    }
    Ok(())
}

fn cmd_pretrain(cfg: &RunConfig) -> Result<()> {
    let frames = load_frames(&cfg.trajectories)?;
    let split = split_for(&frames, cfg.seed)?;
    let train = pretrain_samples(&subset(&frames, &split.train), &cfg.model.graph)?;
    let val = pretrain_samples(&subset(&frames, &split.val), &cfg.model.graph)?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::Integrity("pre-training needs frame pairs in both train and val targets".into()));
    }
    let out = cfg.out_dir.join("pretrain");
    let mut tc = cfg.train_config(Task::Pretrain, out.clone());
    tc.notes.insert("trajectories".into(), cfg.trajectories.display().to_string());
    let store = init_model(&cfg.model, cfg.seed, false)?;
    let outcome = run_training(&train, &val, store, &cfg.model, &tc)?;
    split.save(out.join("split.txt"))?;
    let baseline = identity_baseline(&val);
    let last = outcome.history.last().expect("at least one epoch");
    println!(
        "pretrain: epochs={} best_epoch={} val_mse={:.6e} identity_mse={:.6e} ratio={:.4} final_val_mse={:.6e} checkpoint={}",
        outcome.history.len(),
        outcome.best_epoch,
        outcome.best_val_loss,
        baseline,
        outcome.best_val_loss / baseline,
        last.val_loss,
        out.join("best.ckpt").display()
    );
    Ok(())
}

fn select(samples: &[AffinitySample], ids: &[String]) -> Vec<AffinitySample> {
    let set: BTreeSet<&str> = ids.iter().map(String::as_str).collect();
    samples.iter().filter(|s| set.contains(s.target_id.as_str())).cloned().collect()
}

fn labelled(cfg: &RunConfig) -> Result<(Vec<ComplexFrame>, Vec<AffinitySample>)> {
    let frames = load_frames(&cfg.complexes)?;
    let labels = read_labels(&cfg.labels)?;
    let samples = affinity_samples(&frames, &labels, &cfg.model.graph)?;
    Ok((frames, samples))
}

fn cmd_finetune(cfg: &RunConfig, from_checkpoint: Option<&Path>) -> Result<()> {
    let (frames, samples) = labelled(cfg)?;
    let split = split_for(&frames, cfg.seed)?;
    let (train, val, test) = (select(&samples, &split.train), select(&samples, &split.val), select(&samples, &split.test));

    let mut store = init_model(&cfg.model, cfg.seed, true)?;
    let out = cfg.out_dir.join("finetune");
    let mut tc = cfg.train_config(Task::Finetune, out.clone());
    match from_checkpoint {
        Some(path) => {
            let ckpt = Checkpoint::load(path)?;
            let report = transfer_weights(&ckpt, &mut store)?;
            println!(
                "finetune: transferred {} tensors from {}, {} fresh",
                report.transferred.len(),
                path.display(),
                report.fresh.len()
            );
            tc.notes.insert("init".into(), "pretrained".into());
            tc.notes.insert("from_checkpoint".into(), path.display().to_string());
        }
        None => {
            tc.notes.insert("init".into(), "scratch".into());
        }
    }
    let train_labels: Vec<f64> = train.iter().map(|s| s.label).collect();
    let mean = train_labels.iter().sum::<f64>() / train_labels.len().max(1) as f64;
    set_head_bias(&mut store, &cfg.model, mean)?;

    let outcome = run_training(&train, &val, store, &cfg.model, &tc)?;
    split.save(out.join("split.txt"))?;
    let residuals = affinity_residuals(&outcome.best, &cfg.model, &test)?;
    let report = MetricsReport::compute(residuals, &train_labels, None)?;
    report.write_csvs(&out)?;
    println!(
        "finetune: init={} epochs={} best_epoch={} test {}",
        tc.notes["init"],
        outcome.history.len(),
        outcome.best_epoch,
        report.summary_line()
    );
    Ok(())
}

fn cmd_eval(cfg: &RunConfig, checkpoint: &Path, split: Option<&Path>, which: &str, out: &Path) -> Result<()> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let mut cfg = cfg.clone();
    cfg.model = ModelConfig::from_metadata(&ckpt.metadata)?;
    let (_, samples) = labelled(&cfg)?;
    let (samples, train_labels) = match split {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.to_path_buf(),
                source: e,
            })?;
            let manifest = SplitManifest::from_text(&text)?;
            let ids = match which {
                "train" => &manifest.train,
                "val" => &manifest.val,
                _ => &manifest.test,
            };
            let train_labels = select(&samples, &manifest.train).iter().map(|s| s.label).collect();
            (select(&samples, ids), train_labels)
        }
        None => (samples, Vec::new()),
    };
    if samples.is_empty() {
        return Err(Error::Integrity("no labelled complexes to evaluate".into()));
    }
    let residuals = affinity_residuals(&ckpt.params, &cfg.model, &samples)?;
    let report = MetricsReport::compute(residuals, &train_labels, None)?;
    report.write_csvs(out)?;
    println!("{}", report.summary_line());
    Ok(())
}
