//! Training schemes: joint, CE-only and the two contrastive-pretraining
//! variants.

use std::fmt;

use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::checkpoint::Checkpoint;
use super::data::{encode_batch, Dataset, Split};
use super::model::{Architecture, Heads, Network};
use super::optim::{OptimizerKind, Optimizer, Schedule};
use crate::augment::{apply, augment_pair, sample_transform, AugmentPreset, PresetName};
use crate::error::{Error, Result};
use crate::lossmath::{classification_loss, joint_loss, nt_xent, LossConfig};
use crate::patch::Patch;
use crate::seed::{rng, sub_seed};
use crate::uncert::argmax;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    JointHeavy,
    JointLight,
    CeOnly,
    ClDetached,
    ClAttached,
}

impl TrainMode {
    pub const ALL: [TrainMode; 5] = [
        TrainMode::JointHeavy,
        TrainMode::JointLight,
        TrainMode::CeOnly,
        TrainMode::ClDetached,
        TrainMode::ClAttached,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TrainMode::JointHeavy => "joint_heavy",
            TrainMode::JointLight => "joint_light",
            TrainMode::CeOnly => "ce_only",
            TrainMode::ClDetached => "cl_detached",
            TrainMode::ClAttached => "cl_attached",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let s = s.replace('-', "_");
        Self::ALL.into_iter().find(|m| m.name() == s)
    }

    /// Augmentation preset used unless overridden.
    pub fn default_preset(self) -> PresetName {
        match self {
            TrainMode::JointLight => PresetName::Light,
            _ => PresetName::Heavy,
        }
    }

    pub fn uses_contrastive(self) -> bool {
        !matches!(self, TrainMode::CeOnly)
    }

    fn phases(self) -> &'static [Phase] {
        match self {
            TrainMode::JointHeavy | TrainMode::JointLight => &[Phase::Joint],
            TrainMode::CeOnly => &[Phase::Supervised],
            TrainMode::ClDetached => &[Phase::Pretrain, Phase::FrozenFinetune],
            TrainMode::ClAttached => &[Phase::Pretrain, Phase::Finetune],
        }
    }
}

impl fmt::Display for TrainMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Contrastive + CE on every step.
    Joint,
    /// CE only, encoder and classifier trained.
    Supervised,
    /// Contrastive only, encoder and projector trained.
    Pretrain,
    /// CE only with a frozen encoder.
    FrozenFinetune,
    /// CE only, encoder and classifier trained after pretraining.
    Finetune,
}

impl Phase {
    fn tag(self) -> u64 {
        self as u64 + 1
    }

    fn contrastive(self) -> bool {
        matches!(self, Phase::Joint | Phase::Pretrain)
    }

    fn classification(self) -> bool {
        !matches!(self, Phase::Pretrain)
    }

    fn trains_encoder(self) -> bool {
        !matches!(self, Phase::FrozenFinetune)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub mode: TrainMode,
    /// Overrides the mode's default preset.
    pub preset: Option<AugmentPreset>,
    pub batch_size: usize,
    pub schedule: Schedule,
    pub optimizer: OptimizerKind,
    pub epochs: usize,
    /// Epochs of the CE phase in two-phase modes; defaults to `epochs`.
    pub finetune_epochs: Option<usize>,
    pub seed: u64,
    pub split_seed: u64,
    pub loss: LossConfig,
    pub arch: Architecture,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: TrainMode::JointHeavy,
            preset: None,
            batch_size: 128,
            schedule: Schedule::default(),
            optimizer: OptimizerKind::adam(),
            epochs: 50,
            finetune_epochs: None,
            seed: 0,
            split_seed: 0,
            loss: LossConfig::default(),
            arch: Architecture::default(),
        }
    }
}

impl TrainConfig {
    pub fn preset(&self) -> AugmentPreset {
        self.preset
            .clone()
            .unwrap_or_else(|| AugmentPreset::named(self.mode.default_preset()))
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        self.loss.validate()?;
        self.arch.validate()?;
        self.preset().validate()?;
        if self.loss.classes != self.arch.classes() {
            return Err(Error::Config(format!(
                "loss expects {} classes, classifier has {}",
                self.loss.classes,
                self.arch.classes()
            )));
        }
        if self.batch_size < 2 && self.mode.uses_contrastive() {
            return Err(Error::Config("contrastive modes need batch size >= 2".into()));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config("batch size and epochs must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub phase: Phase,
    pub epoch: usize,
    /// Learning rate at the start of the epoch.
    pub lr: f64,
    pub train_loss: f64,
    pub train_contrastive: Option<f64>,
    pub train_ce: Option<f64>,
    pub train_acc: Option<f64>,
    pub val_loss: Option<f64>,
    pub val_acc: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub checkpoint: Checkpoint,
    pub log: Vec<EpochRecord>,
    pub split: Split,
}

/// Trains on the train part of a stratified split of `data`.
pub fn train(data: &Dataset, cfg: &TrainConfig) -> Result<TrainOutput> {
    train_with(data, cfg, &mut |_| {})
}

/// Like [`train`], calling `on_epoch` after each epoch.
pub fn train_with(
    data: &Dataset,
    cfg: &TrainConfig,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainOutput> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Config("dataset is empty".into()));
    }
    if let Some(s) = data.samples.iter().find(|s| s.label >= cfg.loss.classes) {
        return Err(Error::Config(format!("sample {} has label {}", s.id, s.label)));
    }
    let split = Split::stratified(&data.labels(), cfg.split_seed);
    if split.train.len() < 2 {
        return Err(Error::Config("training split has fewer than 2 samples".into()));
    }
    // Fail early on size mismatches.
    encode_batch(&[&data.samples[0].patch], cfg.arch.input_side)?;

    let val_inputs = (!split.val.is_empty())
        .then(|| data.inputs(&split.val, cfg.arch.input_side))
        .transpose()?;
    let val_labels: Vec<usize> = split.val.iter().map(|&i| data.samples[i].label).collect();

    let mut net = Network::new(cfg.arch.clone(), sub_seed(cfg.seed, 0))?;
    let preset = cfg.preset();
    let mut log = Vec::new();
    let mut total_epochs = 0;
    for &phase in cfg.mode.phases() {
        let epochs = match phase {
            Phase::FrozenFinetune | Phase::Finetune => cfg.finetune_epochs.unwrap_or(cfg.epochs),
            _ => cfg.epochs,
        };
        let sizes: Vec<usize> = net.named_tensors().iter().map(|(_, _, t)| t.len()).collect();
        let mut opt = Optimizer::new(cfg.optimizer, &sizes);
        let steps_per_epoch = split.train.len().div_ceil(cfg.batch_size);
        for epoch in 0..epochs {
            let epoch_seed = sub_seed(sub_seed(cfg.seed, phase.tag()), epoch as u64);
            let mut order = split.train.clone();
            order.shuffle(&mut rng(sub_seed(epoch_seed, 0)));
            let mut acc = Accumulator::default();
            let lr0 = cfg.schedule.lr_at(epoch as f64);
            for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
                if batch.len() < 2 && phase.contrastive() {
                    continue;
                }
                let lr = cfg.schedule.lr_at(epoch as f64 + b as f64 / steps_per_epoch as f64);
                let step_seed = sub_seed(epoch_seed, b as u64 + 1);
                step(&mut net, &mut opt, data, batch, phase, cfg, &preset, lr, step_seed, &mut acc)
                    .map_err(|e| match e {
                        Error::Domain(detail) => Error::Divergence { epoch: total_epochs + epoch, detail },
                        other => other,
                    })?;
            }
            let (val_loss, val_acc) = match (&val_inputs, phase.classification()) {
                (Some(x), true) => {
                    let logits = net.infer(x.view())?.logits;
                    let c = classification_loss(logits.view(), &val_labels, cfg.loss.alpha)?;
                    let hits = c
                        .probs
                        .rows()
                        .into_iter()
                        .zip(&val_labels)
                        .filter(|(p, &y)| argmax(p.as_slice().expect("row")) == y)
                        .count();
                    (Some(c.loss), Some(hits as f64 / val_labels.len() as f64))
                }
                _ => (None, None),
            };
            let record = acc.finish(phase, epoch, lr0, val_loss, val_acc);
            if let Some((name, _, _)) = net
                .named_tensors()
                .into_iter()
                .find(|(_, _, t)| t.iter().any(|v| v.is_nan() || v.abs() > f32::MAX as f64))
            {
                return Err(Error::Divergence {
                    epoch: total_epochs + epoch,
                    detail: format!("{name} left the f32 range"),
                });
            }
            if !record.train_loss.is_finite() || val_loss.is_some_and(|v| !v.is_finite()) {
                return Err(Error::Divergence {
                    epoch: total_epochs + epoch,
                    detail: format!("non-finite loss in {phase:?} phase"),
                });
            }
            on_epoch(&record);
            log.push(record);
        }
        total_epochs += epochs;
    }

    let checkpoint = Checkpoint::from_network(net, cfg, total_epochs, data.patch_size());
    Ok(TrainOutput { checkpoint, log, split })
}

#[derive(Default)]
struct Accumulator {
    rows: usize,
    loss: f64,
    contrastive: f64,
    ce: f64,
    hits: usize,
    ce_rows: usize,
}

impl Accumulator {
    fn finish(self, phase: Phase, epoch: usize, lr: f64, val_loss: Option<f64>, val_acc: Option<f64>) -> EpochRecord {
        let n = self.rows.max(1) as f64;
        EpochRecord {
            phase,
            epoch,
            lr,
            train_loss: self.loss / n,
            train_contrastive: phase.contrastive().then(|| self.contrastive / n),
            train_ce: phase.classification().then(|| self.ce / n),
            train_acc: phase
                .classification()
                .then(|| self.hits as f64 / self.ce_rows.max(1) as f64),
            val_loss,
            val_acc,
        }
    }
}

fn view(patch: &Patch, preset: &AugmentPreset, r: &mut crate::seed::Rng) -> Patch {
    let t = sample_transform(preset, r);
    apply(&t, patch, r)
}

#[allow(clippy::too_many_arguments)]
fn step(
    net: &mut Network,
    opt: &mut Optimizer,
    data: &Dataset,
    batch: &[usize],
    phase: Phase,
    cfg: &TrainConfig,
    preset: &AugmentPreset,
    lr: f64,
    seed: u64,
    acc: &mut Accumulator,
) -> Result<()> {
    let mut aug = rng(sub_seed(seed, 0));
    let (views, labels): (Vec<Patch>, Vec<usize>) = if phase.contrastive() {
        batch
            .iter()
            .flat_map(|&i| {
                let s = &data.samples[i];
                let (a, b) = augment_pair(&s.patch, preset, &mut aug);
                [(a, s.label), (b, s.label)]
            })
            .unzip()
    } else {
        batch
            .iter()
            .map(|&i| {
                let s = &data.samples[i];
                (view(&s.patch, preset, &mut aug), s.label)
            })
            .unzip()
    };
    let refs: Vec<&Patch> = views.iter().collect();
    let x: Array2<f64> = encode_batch(&refs, cfg.arch.input_side)?;
    let heads = Heads {
        projector: phase.contrastive(),
        classifier: phase.classification(),
    };
    let pass = net.forward_train(x.view(), heads, phase.trains_encoder(), sub_seed(seed, 1))?;
    let rows = batch.len();
    let (grad_z, grad_logits, probs) = match phase {
        Phase::Joint => {
            let z = pass.z.as_ref().expect("projector ran");
            let logits = pass.logits.as_ref().expect("classifier ran");
            let j = joint_loss(z.view(), logits.view(), &labels, &cfg.loss)?;
            acc.loss += j.total * rows as f64;
            acc.contrastive += j.contrastive * rows as f64;
            acc.ce += j.classification * rows as f64;
            (Some(j.grad_z), Some(j.grad_logits), Some(j.probs))
        }
        Phase::Pretrain => {
            let z = pass.z.as_ref().expect("projector ran");
            let c = nt_xent(z.view(), cfg.loss.tau)?;
            acc.loss += c.loss * rows as f64;
            acc.contrastive += c.loss * rows as f64;
            (Some(c.grad), None, None)
        }
        Phase::Supervised | Phase::Finetune | Phase::FrozenFinetune => {
            let logits = pass.logits.as_ref().expect("classifier ran");
            let c = classification_loss(logits.view(), &labels, cfg.loss.alpha)?;
            acc.loss += c.loss * rows as f64;
            acc.ce += c.loss * rows as f64;
            (None, Some(c.grad), Some(c.probs))
        }
    };
    if let Some(p) = probs {
        for (row, &y) in p.rows().into_iter().zip(&labels) {
            acc.hits += usize::from(argmax(row.as_slice().expect("row")) == y);
        }
        acc.ce_rows += labels.len();
    }
    acc.rows += rows;
    let grads = net.backward(&pass, grad_z, grad_logits)?;
    let aligned = grads.aligned(net);
    if aligned.iter().flatten().any(|g| g.iter().any(|v| !v.is_finite())) {
        return Err(Error::Domain("non-finite gradient".into()));
    }
    opt.step(net.tensors_mut(), &aligned, lr);
    Ok(())
}
