use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use spapnet::eval::{
    evaluate_fold, read_frame_traces, read_verdicts, vote_all, predict_clips, write_attention_report,
    write_class_metrics, write_fold_metrics, write_frame_traces, write_verdicts, FoldEvaluation, VerdictRow,
};
use spapnet::graph::{build_graph, SqueezeRatios, SqueezeSchedule};
use spapnet::model::Checkpoint;
use spapnet::pose::{
    ingest_manifest, parse_keypoint_path, read_clip_store, segment_clips, write_clip_cache, write_clip_store, Clip,
    DatasetManifest, FilterRules, Label, NormalizeOptions, TaskMode, DEFAULT_MIN_CONFIDENCE,
};
use spapnet::synth::SynthDataset;
use spapnet::train::{cross_validate, plan_folds, train_fold, write_history, FoldPlan, TrainConfig};
use spapnet::{Error, Result};

/// Pose-based tremor classification: ingest keypoints, train, evaluate and explain.
#[derive(Debug, Parser)]
#[command(name = "spapnet", version)]
struct Cli {
    /// Worker threads for parallel stages (defaults to all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Normalize and clip the videos listed in a manifest.
    Ingest(IngestArgs),
    /// Generate a synthetic keypoint dataset with a manifest.
    Synth(SynthArgs),
    /// Cross-validate the model and write per-fold checkpoints and histories.
    Train(TrainArgs),
    /// Evaluate a training run on its held-out folds.
    Eval(EvalArgs),
    /// Classify new keypoint files with a checkpoint.
    Predict(PredictArgs),
    /// Write joint-attention tables and plots from evaluation outputs.
    Attention(AttentionArgs),
    /// Print the channel-squeezing widths per target node.
    Schedule(ScheduleArgs),
}

#[derive(Debug, Args)]
struct IngestOptions {
    /// Task: binary (PT vs rest) or multiclass.
    #[arg(long, default_value = "binary")]
    mode: TaskMode,
    /// Confidence a reference joint needs for its frame to be kept.
    #[arg(long, default_value_t = DEFAULT_MIN_CONFIDENCE)]
    min_confidence: f64,
    /// Task id to exclude (repeatable).
    #[arg(long = "drop-task")]
    drop_tasks: Vec<String>,
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// Manifest CSV (video_id,participant_id,label,task_id,path).
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory for clips.jsonl and clips.bin.
    #[arg(long)]
    out: PathBuf,
    /// Frames per clip.
    #[arg(long, default_value_t = 100)]
    clip_len: usize,
    #[command(flatten)]
    opts: IngestOptions,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Output directory (manifest.csv and keypoints/).
    #[arg(long)]
    out: PathBuf,
    /// binary writes PT and NoTremor videos; multiclass writes all five classes.
    #[arg(long, default_value = "binary")]
    mode: TaskMode,
    /// Explicit comma-separated labels (overrides --mode), e.g. PT,NoTremor.
    #[arg(long, value_delimiter = ',')]
    classes: Option<Vec<Label>>,
    #[arg(long, default_value_t = 20)]
    videos_per_class: usize,
    /// Frames per video.
    #[arg(long, default_value_t = 300)]
    frames: usize,
    /// Tremor amplitude in pixels.
    #[arg(long, default_value_t = 6.0)]
    amplitude: f64,
    /// Standard deviation of per-joint pixel noise.
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    #[arg(long, env = "SPAPNET_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Run directory for folds.csv, config.txt, clips.jsonl and fold_<k>/.
    #[arg(long)]
    out: PathBuf,
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Config override `key=value` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    mode: Option<TaskMode>,
    #[arg(long, env = "SPAPNET_SEED")]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Train only this fold (0-based).
    #[arg(long)]
    fold: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_MIN_CONFIDENCE)]
    min_confidence: f64,
    #[arg(long = "drop-task")]
    drop_tasks: Vec<String>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Run directory written by `train`.
    #[arg(long)]
    run: PathBuf,
    /// Output directory (defaults to the run directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Verdict CSV to write.
    #[arg(long)]
    out: PathBuf,
    /// Optional per-frame attention CSV.
    #[arg(long)]
    frames: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_MIN_CONFIDENCE)]
    min_confidence: f64,
    /// Keypoint files or detector output directories.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
}

#[derive(Debug, Args)]
struct AttentionArgs {
    #[arg(long)]
    verdicts: PathBuf,
    /// Per-frame attention CSV.
    #[arg(long)]
    frames: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "binary")]
    mode: TaskMode,
    /// Class whose videos are summarized.
    #[arg(long, default_value = "PT")]
    class: String,
    /// Number of videos that get per-frame plots.
    #[arg(long, default_value_t = 3)]
    traces: usize,
}

#[derive(Debug, Args)]
struct ScheduleArgs {
    #[arg(long, default_value_t = 128)]
    cin: usize,
    #[arg(long, default_value_t = 0.9)]
    b: f64,
    #[arg(long, default_value_t = 0.125)]
    d: f64,
    /// Print only this target node's row (1-based).
    #[arg(long)]
    node: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("error: --workers must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_user_error() { 1 } else { 2 })
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Ingest(a) => ingest(a),
        Command::Synth(a) => synth(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Predict(a) => predict(a),
        Command::Attention(a) => attention(a),
        Command::Schedule(a) => schedule(a),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn ingest(a: IngestArgs) -> Result<()> {
    let manifest = DatasetManifest::read(&a.manifest)?;
    let rules = FilterRules {
        mode: a.opts.mode,
        drop_tasks: a.opts.drop_tasks,
    };
    let opts = NormalizeOptions {
        min_confidence: a.opts.min_confidence,
    };
    let clips = ingest_manifest(&manifest, &rules, a.clip_len, opts)?;
    create_dir(&a.out)?;
    write_clip_store(&a.out.join("clips.jsonl"), &clips)?;
    write_clip_cache(&a.out.join("clips.bin"), &clips)?;
    println!("{} clips from {} videos", clips.len(), manifest.records.len());
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let classes = match (a.classes, a.mode) {
        (Some(c), _) => c,
        (None, TaskMode::Binary) => vec![Label::PT, Label::NoTremor],
        (None, TaskMode::Multiclass) => vec![Label::PT, Label::ET, Label::FT, Label::DT, Label::NoTremor],
    };
    let mut ds = SynthDataset::new(classes, a.videos_per_class, a.seed);
    ds.duration_frames = a.frames;
    ds.amplitude_px = a.amplitude;
    ds.noise_std_px = a.noise;
    create_dir(&a.out)?;
    let manifest = ds.write(&a.out)?;
    println!("{} videos written to {}", manifest.records.len(), a.out.display());
    Ok(())
}

fn train_config(a: &TrainArgs) -> Result<TrainConfig> {
    let mut cfg = match &a.config {
        Some(path) => TrainConfig::from_file(path, a.mode)?,
        None => TrainConfig::for_mode(a.mode.unwrap_or(TaskMode::Binary)),
    };
    for kv in &a.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override {kv:?} is not key=value")))?;
        cfg.set(k.trim(), v)?;
    }
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(epochs) = a.epochs {
        cfg.max_epochs = epochs;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn train(a: TrainArgs) -> Result<()> {
    // Everything that can fail on bad input happens before the run directory is touched.
    let cfg = train_config(&a)?;
    let manifest = DatasetManifest::read(&a.manifest)?;
    let rules = FilterRules {
        mode: cfg.mode,
        drop_tasks: a.drop_tasks.clone(),
    };
    let opts = NormalizeOptions {
        min_confidence: a.min_confidence,
    };
    let clips = ingest_manifest(&manifest, &rules, cfg.model.clip_len, opts)?;
    if clips.is_empty() {
        return Err(Error::Validation(format!("{} yields no clips", a.manifest.display())));
    }
    let plan = plan_folds(&clips, &cfg)?;
    if let Some(f) = a.fold {
        if f >= plan.k {
            return Err(Error::Config(format!("fold {f} out of range for {} folds", plan.k)));
        }
    }

    create_dir(&a.out)?;
    spapnet::io::write_atomic(&a.out.join("config.txt"), cfg.to_kv().as_bytes())?;
    plan.write(&a.out.join("folds.csv"))?;
    write_clip_store(&a.out.join("clips.jsonl"), &clips)?;

    let results = match a.fold {
        Some(f) => vec![train_fold(&clips, &plan, f, &cfg)?],
        None => cross_validate(&clips, &plan, &cfg)?,
    };
    let class_names = cfg.mode.class_names();
    for r in &results {
        let dir = a.out.join(format!("fold_{}", r.fold));
        create_dir(&dir)?;
        write_history(&dir.join("history.csv"), &r.history)?;
        Checkpoint::from_model(&r.model, cfg.seed, class_names).save(&dir.join("checkpoint.json"))?;
        let last = r.history.last();
        println!(
            "fold {}: best epoch {} of {}, val loss {:.5}",
            r.fold,
            r.best_epoch,
            last.map_or(0, |h| h.epoch),
            r.history[r.best_epoch - 1].val_loss
        );
    }
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let run = &a.run;
    let cfg = TrainConfig::from_file(&run.join("config.txt"), None)?;
    let plan = FoldPlan::read(&run.join("folds.csv"))?;
    let clips = read_clip_store(&run.join("clips.jsonl"))?;
    let out = a.out.clone().unwrap_or_else(|| run.clone());

    let mut evals: Vec<FoldEvaluation> = Vec::new();
    for fold in 0..plan.k {
        let path = run.join(format!("fold_{fold}")).join("checkpoint.json");
        if !path.exists() {
            log::warn!("fold {fold}: no checkpoint at {}, skipped", path.display());
            continue;
        }
        let model = Checkpoint::load(&path)?.to_model()?;
        let held_out: Vec<&Clip> = clips.iter().filter(|c| plan.fold_of(&c.video_id) == Some(fold)).collect();
        evals.push(evaluate_fold(&model, &held_out, fold, cfg.mode)?);
    }
    if evals.is_empty() {
        return Err(Error::Validation(format!("{} contains no fold checkpoints", run.display())));
    }

    create_dir(&out)?;
    let rows: Vec<VerdictRow> = evals.iter().flat_map(|e| e.rows.iter().cloned()).collect();
    let preds: Vec<_> = evals.iter().flat_map(|e| e.predictions.iter().cloned()).collect();
    write_verdicts(&out.join("verdicts.csv"), &rows, cfg.mode.class_names())?;
    write_frame_traces(&out.join("frames.csv"), &preds)?;
    write_fold_metrics(&out.join("metrics.csv"), &evals)?;
    if cfg.mode == TaskMode::Multiclass {
        write_class_metrics(&out.join("class_metrics.csv"), &evals)?;
    }
    for e in &evals {
        println!(
            "fold {}: AC {} F1 {}",
            e.fold,
            e.report.ac.map_or("-".into(), |v| format!("{v:.3}")),
            e.report.f1.map_or("-".into(), |v| format!("{v:.3}"))
        );
    }
    Ok(())
}

fn predict(a: PredictArgs) -> Result<()> {
    let ckpt = Checkpoint::load(&a.checkpoint)?;
    let model = ckpt.to_model()?;
    let clip_len = ckpt.config.clip_len;
    let opts = NormalizeOptions {
        min_confidence: a.min_confidence,
    };
    let mut clips = Vec::new();
    let mut ids: HashMap<String, PathBuf> = HashMap::new();
    for path in &a.inputs {
        let seq = parse_keypoint_path(path)?;
        if let Some(prev) = ids.insert(seq.video_id.clone(), path.clone()) {
            return Err(Error::Validation(format!(
                "video id {:?} appears in both {} and {}",
                seq.video_id,
                prev.display(),
                path.display()
            )));
        }
        let got = segment_clips(&seq, clip_len, Label::Other, "", opts);
        if got.is_empty() {
            log::warn!("{} yields no clips of length {clip_len}", path.display());
        }
        clips.extend(got);
    }
    let refs: Vec<&Clip> = clips.iter().collect();
    let preds = predict_clips(&model, &refs)?;
    let rows: Vec<VerdictRow> = vote_all(&preds)?
        .into_iter()
        .map(|verdict| VerdictRow {
            verdict,
            true_class: None,
        })
        .collect();
    let names: Vec<&str> = ckpt.class_names.iter().map(String::as_str).collect();
    write_verdicts(&a.out, &rows, &names)?;
    if let Some(frames) = &a.frames {
        write_frame_traces(frames, &preds)?;
    }
    for r in &rows {
        println!("{},{}", r.verdict.video_id, names[r.verdict.voted_class]);
    }
    Ok(())
}

fn attention(a: AttentionArgs) -> Result<()> {
    let names = a.mode.class_names();
    let class = a
        .mode
        .class_index(&a.class)
        .ok_or_else(|| Error::Validation(format!("class {:?} is not one of {names:?}", a.class)))?;
    let rows = read_verdicts(&a.verdicts, names)?;
    // Correctly classified videos when the truth is known, otherwise predicted members.
    let selected: Vec<_> = rows
        .into_iter()
        .filter(|r| r.verdict.voted_class == class && r.true_class.is_none_or(|t| t == class))
        .map(|r| r.verdict)
        .collect();
    if selected.is_empty() {
        return Err(Error::Validation(format!("no videos classified as {}", a.class)));
    }
    let traces: Vec<_> = read_frame_traces(&a.frames)?
        .into_iter()
        .filter(|(v, _)| selected.iter().any(|s| s.video_id == *v))
        .take(a.traces)
        .collect();
    create_dir(&a.out)?;
    let weights = write_attention_report(&a.out, &selected, &traces)?;
    print!("{}", spapnet::eval::joint_table(&weights));
    Ok(())
}

fn schedule(a: ScheduleArgs) -> Result<()> {
    let ratios = SqueezeRatios { b: a.b, d: a.d };
    let sched = SqueezeSchedule::new(&build_graph(), a.cin, ratios)?;
    match a.node {
        Some(n) if (1..=sched.widths.len()).contains(&n) => {
            let row: Vec<String> = sched.widths[n - 1].iter().map(usize::to_string).collect();
            println!("{}", row.join(","));
        }
        Some(n) => return Err(Error::Config(format!("node {n} out of range 1..={}", sched.widths.len()))),
        None => print!("{sched}"),
    }
    Ok(())
}
