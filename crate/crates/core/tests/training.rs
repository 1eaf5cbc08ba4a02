use fishforge::synthgen::{generate_dataset, DatasetManifest, GenerateOptions, GenerationSpec};
use fishforge::tinynet::{
    predict, Architecture, Checkpoint, Dataset, OptimizerKind, Phase, TrainConfig, TrainMode,
};
use fishforge::seed::sub_seed;
use fishforge::tinynet::Network;
use fishforge::{Error, Result};

fn small_arch() -> Architecture {
    Architecture {
        input_side: 8,
        channels: 3,
        encoder: vec![192, 32, 16],
        projector: vec![16, 8, 8],
        classifier: vec![16, 16, 16, 3],
        dropout: 0.25,
    }
}

fn dataset() -> (tempfile::TempDir, DatasetManifest, Dataset) {
    let dir = tempfile::tempdir().unwrap();
    let m = generate_dataset(&GenerationSpec::demo(10, 3), dir.path(), &GenerateOptions::default()).unwrap();
    let d = Dataset::from_manifest(&m).unwrap();
    (dir, m, d)
}

fn config(mode: TrainMode) -> TrainConfig {
    TrainConfig {
        mode,
        batch_size: 8,
        epochs: 2,
        seed: 11,
        split_seed: 5,
        arch: small_arch(),
        ..TrainConfig::default()
    }
}

fn tensor(c: &Checkpoint, prefix: &str) -> Vec<Vec<f64>> {
    c.network
        .named_tensors()
        .into_iter()
        .filter(|(n, _, _)| n.starts_with(prefix))
        .map(|(_, _, t)| t.to_vec())
        .collect()
}

#[test]
fn identical_seeds_give_identical_checkpoint_bytes() -> Result<()> {
    let (_d, _m, data) = dataset();
    let a = fishforge::tinynet::train(&data, &config(TrainMode::JointHeavy))?;
    let b = fishforge::tinynet::train(&data, &config(TrainMode::JointHeavy))?;
    assert_eq!(a.checkpoint.to_bytes()?, b.checkpoint.to_bytes()?);
    assert_eq!(a.log, b.log);
    let mut other = config(TrainMode::JointHeavy);
    other.seed = 12;
    let c = fishforge::tinynet::train(&data, &other)?;
    assert_ne!(a.checkpoint.to_bytes()?, c.checkpoint.to_bytes()?);
    Ok(())
}

#[test]
fn detached_finetune_keeps_encoder_bits() -> Result<()> {
    let (_d, _m, data) = dataset();
    let mut pre_only = config(TrainMode::ClDetached);
    pre_only.finetune_epochs = Some(0);
    let pre = fishforge::tinynet::train(&data, &pre_only)?;
    let full = fishforge::tinynet::train(&data, &config(TrainMode::ClDetached))?;
    assert_eq!(tensor(&pre.checkpoint, "encoder"), tensor(&full.checkpoint, "encoder"));
    assert_ne!(tensor(&pre.checkpoint, "classifier"), tensor(&full.checkpoint, "classifier"));
    let phases: Vec<Phase> = full.log.iter().map(|r| r.phase).collect();
    assert_eq!(phases, [Phase::Pretrain, Phase::Pretrain, Phase::FrozenFinetune, Phase::FrozenFinetune]);
    Ok(())
}

#[test]
fn attached_finetune_moves_encoder() -> Result<()> {
    let (_d, _m, data) = dataset();
    let mut pre_only = config(TrainMode::ClAttached);
    pre_only.finetune_epochs = Some(0);
    let pre = fishforge::tinynet::train(&data, &pre_only)?;
    let full = fishforge::tinynet::train(&data, &config(TrainMode::ClAttached))?;
    assert_ne!(tensor(&pre.checkpoint, "encoder"), tensor(&full.checkpoint, "encoder"));
    Ok(())
}

#[test]
fn ce_only_never_touches_contrastive_path() -> Result<()> {
    let (_d, _m, data) = dataset();
    let cfg = config(TrainMode::CeOnly);
    let out = fishforge::tinynet::train(&data, &cfg)?;
    assert!(out.log.iter().all(|r| r.train_contrastive.is_none() && r.phase == Phase::Supervised));
    // Projector weights are still at their initial values.
    let init = Network::new(cfg.arch.clone(), sub_seed(cfg.seed, 0))?;
    let untrained = Checkpoint::from_network(init, &cfg, 0, data.patch_size());
    assert_eq!(tensor(&untrained, "projector"), tensor(&out.checkpoint, "projector"));
    assert_ne!(tensor(&untrained, "encoder"), tensor(&out.checkpoint, "encoder"));
    Ok(())
}

#[test]
fn predictions_cover_split_and_survive_reload() -> Result<()> {
    let (dir, _m, data) = dataset();
    let out = fishforge::tinynet::train(&data, &config(TrainMode::JointLight))?;
    let recs = predict(&out.checkpoint, &data, &out.split.test)?;
    assert_eq!(recs.len(), out.split.test.len());
    for r in &recs {
        assert!((r.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!((0.0..=1.0).contains(&r.certainty));
    }
    let path = dir.path().join("model.ffm");
    out.checkpoint.save(&path)?;
    let back = Checkpoint::load(&path)?;
    assert_eq!(back, out.checkpoint);
    assert_eq!(predict(&back, &data, &out.split.test)?, recs);
    Ok(())
}

#[test]
fn runaway_learning_rate_is_reported_as_divergence() {
    let (_d, _m, data) = dataset();
    let mut cfg = config(TrainMode::CeOnly);
    cfg.optimizer = OptimizerKind::sgd();
    cfg.schedule.lr_max = 1e200;
    cfg.schedule.warmup = 0.0;
    cfg.epochs = 5;
    match fishforge::tinynet::train(&data, &cfg) {
        Err(Error::Divergence { .. }) => {}
        other => panic!("expected divergence, got {:?}", other.map(|o| o.log)),
    }
}

#[test]
fn patch_size_mismatch_is_rejected() {
    let (_d, _m, data) = dataset();
    let mut cfg = config(TrainMode::JointHeavy);
    cfg.arch = Architecture { input_side: 7, encoder: vec![147, 32, 16], ..small_arch() };
    assert!(matches!(fishforge::tinynet::train(&data, &cfg), Err(Error::Shape(_))));
}
