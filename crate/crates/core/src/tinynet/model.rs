//! Encoder / projector / classifier network.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::layers::{DenseGrad, Mlp, MlpCache};
use crate::error::{Error, Result};
use crate::seed::{rng, sub_seed, Rng};

/// Layer sizes of the three heads. The classifier consumes R, not Z.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    /// Side length of the downsampled input patch.
    pub input_side: usize,
    pub channels: usize,
    pub encoder: Vec<usize>,
    pub projector: Vec<usize>,
    pub classifier: Vec<usize>,
    pub dropout: f64,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            input_side: 32,
            channels: 3,
            encoder: vec![32 * 32 * 3, 256, 128],
            projector: vec![128, 64, 64],
            classifier: vec![128, 128, 128, 3],
            dropout: 0.25,
        }
    }
}

impl Architecture {
    pub fn input_dim(&self) -> usize {
        self.input_side * self.input_side * self.channels
    }

    pub fn representation_dim(&self) -> usize {
        *self.encoder.last().unwrap_or(&0)
    }

    pub fn classes(&self) -> usize {
        *self.classifier.last().unwrap_or(&0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        for (name, sizes) in [
            ("encoder", &self.encoder),
            ("projector", &self.projector),
            ("classifier", &self.classifier),
        ] {
            if sizes.len() < 2 || sizes.contains(&0) {
                return bad(format!("{name} needs at least two non-zero layer sizes"));
            }
        }
        if self.encoder[0] != self.input_dim() {
            return bad(format!(
                "encoder input {} does not match {}x{}x{}",
                self.encoder[0], self.input_side, self.input_side, self.channels
            ));
        }
        let r = self.representation_dim();
        if self.projector[0] != r || self.classifier[0] != r {
            return bad(format!("projector and classifier must consume R of size {r}"));
        }
        if self.classes() < 2 {
            return bad("classifier needs at least two outputs".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        Ok(())
    }
}

/// Which heads take part in a training step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Heads {
    pub projector: bool,
    pub classifier: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub arch: Architecture,
    pub encoder: Mlp,
    pub projector: Mlp,
    pub classifier: Mlp,
}

/// Outputs of an inference pass.
#[derive(Debug, Clone)]
pub struct Outputs {
    pub r: Array2<f64>,
    pub z: Array2<f64>,
    pub logits: Array2<f64>,
}

/// Outputs and caches of a training pass.
#[derive(Debug)]
pub struct TrainPass {
    pub r: Array2<f64>,
    pub z: Option<Array2<f64>>,
    pub logits: Option<Array2<f64>>,
    encoder: Option<MlpCache>,
    projector: Option<MlpCache>,
    classifier: Option<MlpCache>,
}

/// Gradients per head; `None` for heads that did not participate.
#[derive(Debug, Clone, Default)]
pub struct Gradients {
    pub encoder: Option<Vec<DenseGrad>>,
    pub projector: Option<Vec<DenseGrad>>,
    pub classifier: Option<Vec<DenseGrad>>,
}

impl Network {
    pub fn new(arch: Architecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut r = rng(seed);
        Ok(Self {
            encoder: Mlp::new(&arch.encoder, true, 0.0, &mut r),
            projector: Mlp::new(&arch.projector, false, 0.0, &mut r),
            classifier: Mlp::new(&arch.classifier, false, arch.dropout, &mut r),
            arch,
        })
    }

    pub fn zeros(arch: Architecture) -> Result<Self> {
        arch.validate()?;
        Ok(Self {
            encoder: Mlp::zeros(&arch.encoder, true, 0.0),
            projector: Mlp::zeros(&arch.projector, false, 0.0),
            classifier: Mlp::zeros(&arch.classifier, false, arch.dropout),
            arch,
        })
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.arch.input_dim() {
            return Err(Error::Shape(format!(
                "input has {} features, network expects {}",
                x.ncols(),
                self.arch.input_dim()
            )));
        }
        Ok(())
    }

    /// Eval-mode forward pass of all three heads.
    pub fn infer(&self, x: ArrayView2<f64>) -> Result<Outputs> {
        self.check_input(&x)?;
        let r = self.encoder.infer(x);
        let z = self.projector.infer(r.view());
        let logits = self.classifier.infer(r.view());
        Ok(Outputs { r, z, logits })
    }

    /// Representations only.
    pub fn represent(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        Ok(self.encoder.infer(x))
    }

    /// Train-mode forward. A frozen encoder runs without a cache. Dropout
    /// masks are a function of `dropout_seed` alone.
    pub fn forward_train(
        &self,
        x: ArrayView2<f64>,
        heads: Heads,
        train_encoder: bool,
        dropout_seed: u64,
    ) -> Result<TrainPass> {
        self.check_input(&x)?;
        let mut drop: Rng = rng(sub_seed(dropout_seed, 0));
        let (r, enc_cache) = if train_encoder {
            let (r, c) = self.encoder.forward(x, &mut drop);
            (r, Some(c))
        } else {
            (self.encoder.infer(x), None)
        };
        let (z, proj_cache) = if heads.projector {
            let (z, c) = self.projector.forward(r.view(), &mut rng(sub_seed(dropout_seed, 1)));
            (Some(z), Some(c))
        } else {
            (None, None)
        };
        let (logits, cls_cache) = if heads.classifier {
            let (l, c) = self.classifier.forward(r.view(), &mut rng(sub_seed(dropout_seed, 2)));
            (Some(l), Some(c))
        } else {
            (None, None)
        };
        Ok(TrainPass {
            r,
            z,
            logits,
            encoder: enc_cache,
            projector: proj_cache,
            classifier: cls_cache,
        })
    }

    /// Backpropagates loss gradients w.r.t. Z and the logits.
    pub fn backward(
        &self,
        pass: &TrainPass,
        grad_z: Option<Array2<f64>>,
        grad_logits: Option<Array2<f64>>,
    ) -> Result<Gradients> {
        let mut out = Gradients::default();
        let mut grad_r: Option<Array2<f64>> = None;
        let need_r = pass.encoder.is_some();
        let mut accumulate = |g: Option<Array2<f64>>| {
            if let Some(g) = g {
                match &mut grad_r {
                    Some(acc) => *acc += &g,
                    None => grad_r = Some(g),
                }
            }
        };
        if let Some(gz) = grad_z {
            let cache = pass
                .projector
                .as_ref()
                .ok_or_else(|| Error::Shape("projector did not run in this pass".into()))?;
            let (grads, gr) = self.projector.backward(cache, gz, need_r);
            out.projector = Some(grads);
            accumulate(gr);
        }
        if let Some(gl) = grad_logits {
            let cache = pass
                .classifier
                .as_ref()
                .ok_or_else(|| Error::Shape("classifier did not run in this pass".into()))?;
            let (grads, gr) = self.classifier.backward(cache, gl, need_r);
            out.classifier = Some(grads);
            accumulate(gr);
        }
        if let (Some(cache), Some(gr)) = (&pass.encoder, grad_r) {
            let (grads, _) = self.encoder.backward(cache, gr, false);
            out.encoder = Some(grads);
        }
        Ok(out)
    }

    /// Named parameter tensors in checkpoint order.
    pub fn named_tensors(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        let mut out = Vec::new();
        for (head, mlp) in self.heads() {
            for (i, layer) in mlp.layers.iter().enumerate() {
                out.push((
                    format!("{head}.{i}.weight"),
                    layer.weight.shape().to_vec(),
                    layer.weight.as_slice().expect("standard layout"),
                ));
                out.push((
                    format!("{head}.{i}.bias"),
                    layer.bias.shape().to_vec(),
                    layer.bias.as_slice().expect("standard layout"),
                ));
            }
        }
        out
    }

    /// Mutable parameter slices in the same order as [`Network::named_tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for mlp in [&mut self.encoder, &mut self.projector, &mut self.classifier] {
            for layer in &mut mlp.layers {
                out.push(layer.weight.as_slice_mut().expect("standard layout"));
                out.push(layer.bias.as_slice_mut().expect("standard layout"));
            }
        }
        out
    }

    pub fn heads(&self) -> [(&'static str, &Mlp); 3] {
        [
            ("encoder", &self.encoder),
            ("projector", &self.projector),
            ("classifier", &self.classifier),
        ]
    }

    pub fn parameter_count(&self) -> usize {
        self.named_tensors().iter().map(|(_, _, t)| t.len()).sum()
    }
}

impl Gradients {
    /// Flat gradient slices aligned with [`Network::tensors_mut`]; heads
    /// without gradients yield `None` entries.
    pub fn aligned<'a>(&'a self, net: &Network) -> Vec<Option<&'a [f64]>> {
        let mut out = Vec::new();
        for (grads, mlp) in [
            (&self.encoder, &net.encoder),
            (&self.projector, &net.projector),
            (&self.classifier, &net.classifier),
        ] {
            match grads {
                Some(gs) => {
                    for g in gs {
                        out.push(Some(g.weight.as_slice().expect("standard layout")));
                        out.push(Some(g.bias.as_slice().expect("standard layout")));
                    }
                }
                None => out.extend(std::iter::repeat_n(None, 2 * mlp.layers.len())),
            }
        }
        out
    }
}
