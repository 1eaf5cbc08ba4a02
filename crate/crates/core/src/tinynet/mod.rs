//! Desk-scale network: MLP encoder to a representation R, projection head
//! to Z for the contrastive loss, and a classifier on R.

mod checkpoint;
mod data;
mod layers;
mod model;
mod optim;
mod train;

pub use checkpoint::{Checkpoint, CheckpointMeta, TensorInfo, MAGIC};
pub use data::{downsample_factor, encode_batch, Dataset, Part, Sample, Split};
pub use layers::{Dense, DenseGrad, Mlp, MlpCache};
pub use model::{Architecture, Gradients, Heads, Network, Outputs, TrainPass};
pub use optim::{Optimizer, OptimizerKind, Schedule};
pub use train::{train, train_with, EpochRecord, Phase, TrainConfig, TrainMode, TrainOutput};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::lossmath::softmax;
use crate::uncert::PredictionRecord;

/// Rows evaluated per inference batch.
const EVAL_BATCH: usize = 256;

fn check_patch_size(ckpt: &Checkpoint, data: &Dataset) -> Result<()> {
    if data.patch_size() != ckpt.meta.patch_size {
        return Err(Error::Shape(format!(
            "checkpoint was trained on {0}x{0} patches, dataset has {1}x{1}",
            ckpt.meta.patch_size,
            data.patch_size()
        )));
    }
    Ok(())
}

/// Softmax predictions for the selected samples. Certainty uses the
/// checkpoint's smoothing floor.
pub fn predict(ckpt: &Checkpoint, data: &Dataset, indices: &[usize]) -> Result<Vec<PredictionRecord>> {
    check_patch_size(ckpt, data)?;
    let mut out = Vec::with_capacity(indices.len());
    for chunk in indices.chunks(EVAL_BATCH) {
        let x = data.inputs(chunk, ckpt.meta.architecture.input_side)?;
        let logits = ckpt.network.infer(x.view())?.logits;
        for (&i, row) in chunk.iter().zip(logits.rows()) {
            let s = &data.samples[i];
            let probs = softmax(row.as_slice().expect("row"));
            out.push(PredictionRecord::new(&s.id, s.label, probs, ckpt.meta.loss.alpha)?);
        }
    }
    Ok(out)
}

/// Representations R for the selected samples, one row each.
pub fn embed(ckpt: &Checkpoint, data: &Dataset, indices: &[usize]) -> Result<Array2<f64>> {
    check_patch_size(ckpt, data)?;
    let dim = ckpt.meta.architecture.representation_dim();
    let mut out = Array2::zeros((indices.len(), dim));
    for (c, chunk) in indices.chunks(EVAL_BATCH).enumerate() {
        let x = data.inputs(chunk, ckpt.meta.architecture.input_side)?;
        let r = ckpt.network.represent(x.view())?;
        out.slice_mut(ndarray::s![c * EVAL_BATCH..c * EVAL_BATCH + chunk.len(), ..])
            .assign(&r);
    }
    Ok(out)
}
