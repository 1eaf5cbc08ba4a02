//! Checkpoint files: `FFM1`, u32 LE metadata length, JSON metadata, then
//! little-endian f32 tensors in metadata order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{Architecture, Network};
use super::train::{TrainConfig, TrainMode};
use crate::augment::AugmentPreset;
use crate::error::{Error, Result};
use crate::lossmath::LossConfig;

pub const MAGIC: &[u8; 4] = b"FFM1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorInfo {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub architecture: Architecture,
    pub mode: TrainMode,
    pub preset: AugmentPreset,
    pub seed: u64,
    pub split_seed: u64,
    /// Total epochs trained over all phases.
    pub epoch: usize,
    pub patch_size: usize,
    pub loss: LossConfig,
    pub tensors: Vec<TensorInfo>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub network: Network,
}

impl Checkpoint {
    /// Wraps a trained network. Weights are rounded to f32 so the in-memory
    /// model behaves exactly like one loaded from disk.
    pub fn from_network(mut network: Network, cfg: &TrainConfig, epoch: usize, patch_size: usize) -> Self {
        for t in network.tensors_mut() {
            t.iter_mut().for_each(|v| *v = *v as f32 as f64);
        }
        let tensors = network
            .named_tensors()
            .into_iter()
            .map(|(name, shape, _)| TensorInfo { name, shape })
            .collect();
        Self {
            meta: CheckpointMeta {
                architecture: network.arch.clone(),
                mode: cfg.mode,
                preset: cfg.preset(),
                seed: cfg.seed,
                split_seed: cfg.split_seed,
                epoch,
                patch_size,
                loss: cfg.loss,
                tensors,
            },
            network,
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let meta = serde_json::to_vec(&self.meta)
            .map_err(|e| Error::Checkpoint(format!("metadata: {e}")))?;
        let len = u32::try_from(meta.len())
            .map_err(|_| Error::Checkpoint("metadata too large".into()))?;
        let mut out = Vec::with_capacity(8 + meta.len() + 4 * self.network.parameter_count());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(&meta);
        for (_, _, data) in self.network.named_tensors() {
            for &v in data {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: String| Error::Checkpoint(m);
        if bytes.len() < 8 || &bytes[..4] != MAGIC {
            return Err(bad("missing FFM1 header".into()));
        }
        let len = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
        let body = bytes
            .get(8..8 + len)
            .ok_or_else(|| bad(format!("metadata length {len} exceeds file size")))?;
        let meta: CheckpointMeta =
            serde_json::from_slice(body).map_err(|e| bad(format!("metadata: {e}")))?;
        meta.architecture
            .validate()
            .map_err(|e| bad(format!("architecture: {e}")))?;
        let mut network =
            Network::zeros(meta.architecture.clone()).map_err(|e| bad(e.to_string()))?;
        let expected: Vec<TensorInfo> = network
            .named_tensors()
            .into_iter()
            .map(|(name, shape, _)| TensorInfo { name, shape })
            .collect();
        if expected != meta.tensors {
            return Err(bad("tensor list does not match the architecture".into()));
        }
        let data = &bytes[8 + len..];
        let floats: usize = meta.tensors.iter().map(|t| t.shape.iter().product::<usize>()).sum();
        if data.len() != 4 * floats {
            return Err(bad(format!(
                "tensor data is {} bytes, shapes declare {}",
                data.len(),
                4 * floats
            )));
        }
        let mut chunks = data.chunks_exact(4);
        for t in network.tensors_mut() {
            for (v, c) in t.iter_mut().zip(&mut chunks) {
                *v = f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64;
            }
        }
        Ok(Self { meta, network })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Checkpoint(m) => Error::Checkpoint(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Checkpoint {
        let arch = Architecture {
            input_side: 2,
            channels: 3,
            encoder: vec![12, 8, 8],
            projector: vec![8, 4, 4],
            classifier: vec![8, 8, 8, 3],
            dropout: 0.25,
        };
        let cfg = TrainConfig { arch: arch.clone(), ..TrainConfig::default() };
        Checkpoint::from_network(Network::new(arch, 5).unwrap(), &cfg, 3, 4)
    }

    #[test]
    fn round_trip_is_exact() {
        let c = tiny();
        let bytes = c.to_bytes().unwrap();
        assert_eq!(&bytes[..4], b"FFM1");
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn truncated_and_padded_rejected() {
        let bytes = tiny().to_bytes().unwrap();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 4]).is_err());
        let mut more = bytes.clone();
        more.extend_from_slice(&[0; 4]);
        assert!(Checkpoint::from_bytes(&more).is_err());
        let mut bad_magic = bytes;
        bad_magic[0] = b'X';
        assert!(matches!(Checkpoint::from_bytes(&bad_magic), Err(Error::Checkpoint(_))));
    }
}
