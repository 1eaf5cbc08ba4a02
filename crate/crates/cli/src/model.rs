use std::path::Path;

use anyhow::Context;
use fishforge::augment::{AblationColumn, PresetName};
use fishforge::lossmath::LossConfig;
use fishforge::synthgen::DatasetManifest;
use fishforge::tinynet::{
    embed as embed_rows, predict, train_with, Checkpoint, Dataset, EpochRecord, OptimizerKind, Part,
    Schedule, TrainConfig, TrainMode,
};
use fishforge::uncert::{format_sig, write_predictions};
use serde::Serialize;

use crate::args::{AblationArgs, EmbedArgs, EvalArgs, ModeArg, OptimizerArg, SplitArg, TrainArgs, TrainOptions};
use crate::data::preset;
use crate::output::{prepare_out, usage, write_run_config};

pub const MODEL_FILE: &str = "model.ffm";
pub const LOG_FILE: &str = "train_log.csv";
pub const SPLIT_FILE: &str = "split.json";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const EMBED_FILE: &str = "embeddings.csv";
pub const ABLATION_FILE: &str = "ablation.csv";

pub fn train_config(o: &TrainOptions) -> anyhow::Result<TrainConfig> {
    let chosen = o.preset.map(preset);
    let mode = match o.mode {
        ModeArg::Joint => match chosen.as_ref().map(|p| p.name) {
            Some(PresetName::Light) => TrainMode::JointLight,
            _ => TrainMode::JointHeavy,
        },
        ModeArg::Ce => TrainMode::CeOnly,
        ModeArg::ClDetached => TrainMode::ClDetached,
        ModeArg::ClAttached => TrainMode::ClAttached,
    };
    let cfg = TrainConfig {
        mode,
        preset: Some(chosen.unwrap_or_else(|| fishforge::augment::AugmentPreset::named(mode.default_preset()))),
        batch_size: o.batch,
        schedule: Schedule {
            lr_min: o.lr_min,
            lr_max: o.lr_max,
            warmup: o.warmup,
            cycle: o.cycle,
        },
        optimizer: match o.optimizer {
            OptimizerArg::Adam => OptimizerKind::adam(),
            OptimizerArg::Sgd => OptimizerKind::sgd(),
        },
        epochs: o.epochs,
        finetune_epochs: o.finetune_epochs,
        seed: o.seed,
        split_seed: o.split_seed,
        loss: LossConfig {
            tau: o.tau,
            lambda: o.lambda,
            alpha: o.alpha,
            ..LossConfig::default()
        },
        ..TrainConfig::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_dataset(dir: &Path) -> anyhow::Result<(DatasetManifest, Dataset)> {
    let manifest = DatasetManifest::load(dir)?;
    let data = Dataset::from_manifest(&manifest)?;
    Ok((manifest, data))
}

fn part(s: SplitArg) -> Part {
    match s {
        SplitArg::Train => Part::Train,
        SplitArg::Val => Part::Val,
        SplitArg::Test => Part::Test,
        SplitArg::All => Part::All,
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format_sig(x, 9)).unwrap_or_default()
}

fn print_epoch(r: &EpochRecord) {
    let show = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
    println!(
        "{:<16} epoch {:>3}  lr {:.2e}  loss {:.4}  train_acc {}  val_loss {}  val_acc {}",
        format!("{:?}", r.phase).to_lowercase(),
        r.epoch,
        r.lr,
        r.train_loss,
        show(r.train_acc),
        show(r.val_loss),
        show(r.val_acc),
    );
}

fn write_log(path: &Path, log: &[EpochRecord]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "phase",
        "epoch",
        "lr",
        "train_loss",
        "train_contrastive",
        "train_ce",
        "train_acc",
        "val_loss",
        "val_acc",
    ])?;
    for r in log {
        w.write_record([
            format!("{:?}", r.phase).to_lowercase(),
            r.epoch.to_string(),
            format_sig(r.lr, 9),
            format_sig(r.train_loss, 9),
            opt(r.train_contrastive),
            opt(r.train_ce),
            opt(r.train_acc),
            opt(r.val_loss),
            opt(r.val_acc),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn train(args: TrainArgs) -> anyhow::Result<()> {
    let cfg = train_config(&args.opts)?;
    prepare_out(&args.out, &[MODEL_FILE, LOG_FILE, SPLIT_FILE], args.force)?;
    let (_, data) = load_dataset(&args.data)?;
    let out = train_with(&data, &cfg, &mut print_epoch)?;
    let model = args.out.join(MODEL_FILE);
    out.checkpoint.save(&model)?;
    write_log(&args.out.join(LOG_FILE), &out.log)?;
    let split_path = args.out.join(SPLIT_FILE);
    let ids = |idx: &[usize]| idx.iter().map(|&i| data.samples[i].id.clone()).collect::<Vec<_>>();
    let split = serde_json::json!({
        "split_seed": cfg.split_seed,
        "train": ids(&out.split.train),
        "val": ids(&out.split.val),
        "test": ids(&out.split.test),
    });
    std::fs::write(&split_path, serde_json::to_string_pretty(&split)? + "\n")
        .with_context(|| format!("writing {}", split_path.display()))?;
    println!("model {}", model.display());
    write_run_config(&args.out, "train", &args, &cfg)?;
    Ok(())
}

/// Loads a checkpoint and the dataset split it was trained with.
fn model_and_data(model: &Path, data_dir: &Path, split: SplitArg) -> anyhow::Result<(Checkpoint, Dataset, Vec<usize>)> {
    let ckpt = Checkpoint::load(model)?;
    let (_, data) = load_dataset(data_dir)?;
    let s = fishforge::tinynet::Split::stratified(&data.labels(), ckpt.meta.split_seed);
    let idx = s.part(part(split));
    if idx.is_empty() {
        return Err(usage(format!("split {split:?} is empty")));
    }
    Ok((ckpt, data, idx))
}

#[derive(Serialize)]
struct EvalSummary {
    split: SplitArg,
    records: usize,
    accuracy: f64,
    alpha: f64,
}

pub fn eval(args: EvalArgs) -> anyhow::Result<()> {
    prepare_out(&args.out, &[PREDICTIONS_FILE], args.force)?;
    let (ckpt, data, idx) = model_and_data(&args.model, &args.data, args.split)?;
    let records = predict(&ckpt, &data, &idx)?;
    let path = args.out.join(PREDICTIONS_FILE);
    write_predictions(&path, &records)?;
    let accuracy = records.iter().filter(|r| r.correct()).count() as f64 / records.len() as f64;
    println!("records  {}", records.len());
    println!("accuracy {accuracy:.4}");
    println!("predictions {}", path.display());
    let summary = EvalSummary {
        split: args.split,
        records: records.len(),
        accuracy,
        alpha: ckpt.meta.loss.alpha,
    };
    write_run_config(&args.out, "eval", &args, &summary)?;
    Ok(())
}

pub fn embed(args: EmbedArgs) -> anyhow::Result<()> {
    prepare_out(&args.out, &[EMBED_FILE], args.force)?;
    let (ckpt, data, idx) = model_and_data(&args.model, &args.data, args.split)?;
    let r = embed_rows(&ckpt, &data, &idx)?;
    let path = args.out.join(EMBED_FILE);
    let mut w = csv::Writer::from_path(&path)?;
    let mut header = vec!["id".to_string(), "true_label".to_string()];
    header.extend((0..r.ncols()).map(|j| format!("r{j}")));
    w.write_record(&header)?;
    for (&i, row) in idx.iter().zip(r.rows()) {
        let s = &data.samples[i];
        let mut rec = vec![s.id.clone(), s.label.to_string()];
        rec.extend(row.iter().map(|&v| format_sig(v, 9)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    println!("{} rows x {} dims -> {}", idx.len(), r.ncols(), path.display());
    write_run_config(&args.out, "embed", &args, &serde_json::json!({ "split_seed": ckpt.meta.split_seed }))?;
    Ok(())
}

#[derive(Serialize)]
struct AblationResult {
    column: &'static str,
    test_accuracy: f64,
    final_val_accuracy: Option<f64>,
}

pub fn ablation(args: AblationArgs) -> anyhow::Result<()> {
    let base = train_config(&args.opts)?;
    prepare_out(&args.out, &[ABLATION_FILE], args.force)?;
    let (_, data) = load_dataset(&args.data)?;
    let base_preset = base.preset();
    let mut results = Vec::new();
    for column in AblationColumn::ALL {
        let cfg = TrainConfig {
            preset: Some(column.preset(&base_preset)),
            ..base.clone()
        };
        let out = train_with(&data, &cfg, &mut |_| {})?;
        let recs = predict(&out.checkpoint, &data, &out.split.test)?;
        let acc = recs.iter().filter(|r| r.correct()).count() as f64 / recs.len() as f64;
        println!("{:<11} {:.2}%", column.label(), 100.0 * acc);
        results.push(AblationResult {
            column: column.label(),
            test_accuracy: acc,
            final_val_accuracy: out.log.last().and_then(|r| r.val_acc),
        });
    }
    let path = args.out.join(ABLATION_FILE);
    let mut w = csv::Writer::from_path(&path)?;
    let mut header = vec!["test_set".to_string()];
    header.extend(results.iter().map(|r| r.column.to_string()));
    w.write_record(&header)?;
    let mut row = vec!["synthetic".to_string()];
    row.extend(results.iter().map(|r| format!("{:.1}", 100.0 * r.test_accuracy)));
    w.write_record(&row)?;
    w.flush()?;
    println!("{}", path.display());
    write_run_config(&args.out, "ablation", &args, &serde_json::json!({
        "base": base,
        "results": results,
    }))?;
    Ok(())
}
