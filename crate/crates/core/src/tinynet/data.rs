//! In-memory datasets, stratified splits and network input encoding.

use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::patch::Patch;
use crate::seed::{rng, sub_seed};
use crate::synthgen::DatasetManifest;

#[derive(Debug, Clone)]
pub struct Sample {
    pub id: String,
    pub label: usize,
    pub n_green: u32,
    pub patch: Patch,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Config("dataset is empty".into()));
        }
        let (w, h) = (samples[0].patch.width(), samples[0].patch.height());
        if let Some(s) = samples
            .iter()
            .find(|s| s.patch.width() != w || s.patch.height() != h)
        {
            return Err(Error::Shape(format!(
                "patch {} is {}x{}, expected {w}x{h}",
                s.id,
                s.patch.width(),
                s.patch.height()
            )));
        }
        Ok(Self { samples })
    }

    /// Loads every patch listed in a manifest.
    pub fn from_manifest(manifest: &DatasetManifest) -> Result<Self> {
        let samples = manifest
            .entries
            .iter()
            .map(|e| {
                Ok(Sample {
                    id: e.id.clone(),
                    label: e.class_id.index(),
                    n_green: e.n_green,
                    patch: manifest.load_patch(e)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(samples)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn patch_size(&self) -> usize {
        self.samples[0].patch.width()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }

    /// Clean (un-augmented) network inputs for the given indices.
    pub fn inputs(&self, indices: &[usize], input_side: usize) -> Result<Array2<f64>> {
        let patches: Vec<&Patch> = indices.iter().map(|&i| &self.samples[i].patch).collect();
        encode_batch(&patches, input_side)
    }
}

/// Downsampling factor mapping a patch onto the network input grid.
pub fn downsample_factor(patch_size: usize, input_side: usize) -> Result<usize> {
    if input_side == 0 || patch_size % input_side != 0 {
        return Err(Error::Shape(format!(
            "patch size {patch_size} is not a multiple of the input side {input_side}"
        )));
    }
    Ok(patch_size / input_side)
}

/// Stacks patches into network input rows.
pub fn encode_batch(patches: &[&Patch], input_side: usize) -> Result<Array2<f64>> {
    let dim = input_side * input_side * Patch::CHANNELS;
    let mut out = Array2::zeros((patches.len(), dim));
    for (row, p) in out.rows_mut().into_iter().zip(patches) {
        if p.width() != p.height() {
            return Err(Error::Shape(format!("non-square patch {}x{}", p.width(), p.height())));
        }
        let flat = p.downsample_flat(downsample_factor(p.width(), input_side)?)?;
        row.into_slice().expect("standard layout").copy_from_slice(&flat);
    }
    Ok(out)
}

/// Index lists of a train / validation / test partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Part {
    Train,
    Val,
    Test,
    All,
}

impl Part {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Self::Train),
            "val" => Some(Self::Val),
            "test" => Some(Self::Test),
            "all" => Some(Self::All),
            _ => None,
        }
    }
}

impl Split {
    /// Per-class 60/20/20 split. Each class is shuffled with its own stream
    /// so adding samples of one class leaves the others unchanged.
    pub fn stratified(labels: &[usize], seed: u64) -> Self {
        let classes = labels.iter().max().map_or(0, |m| m + 1);
        let mut split = Split {
            train: Vec::new(),
            val: Vec::new(),
            test: Vec::new(),
        };
        for c in 0..classes {
            let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
            idx.shuffle(&mut rng(sub_seed(seed, c as u64)));
            let n = idx.len();
            let n_train = (n as f64 * 0.6).round() as usize;
            let n_val = ((n as f64 * 0.2).round() as usize).min(n - n_train);
            split.train.extend_from_slice(&idx[..n_train]);
            split.val.extend_from_slice(&idx[n_train..n_train + n_val]);
            split.test.extend_from_slice(&idx[n_train + n_val..]);
        }
        for part in [&mut split.train, &mut split.val, &mut split.test] {
            part.sort_unstable();
        }
        split
    }

    pub fn part(&self, part: Part) -> Vec<usize> {
        match part {
            Part::Train => self.train.clone(),
            Part::Val => self.val.clone(),
            Part::Test => self.test.clone(),
            Part::All => {
                let mut all = [self.train.as_slice(), &self.val, &self.test].concat();
                all.sort_unstable();
                all
            }
        }
    }
}
