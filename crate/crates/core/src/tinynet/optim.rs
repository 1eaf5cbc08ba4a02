//! Learning-rate schedule and parameter update rules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear warmup followed by cosine annealing. Positions are in epochs and
/// may be fractional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub lr_min: f64,
    pub lr_max: f64,
    pub warmup: f64,
    pub cycle: f64,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            lr_min: 1e-5,
            lr_max: 1e-3,
            warmup: 5.0,
            cycle: 25.0,
        }
    }
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr_min >= 0.0 && self.lr_min < self.lr_max && self.lr_max.is_finite()) {
            return Err(Error::Config(format!(
                "need 0 <= lr_min < lr_max, got {} and {}",
                self.lr_min, self.lr_max
            )));
        }
        if !(self.warmup >= 0.0 && self.cycle > 0.0) {
            return Err(Error::Config("warmup must be >= 0 and cycle > 0".into()));
        }
        Ok(())
    }

    /// Learning rate at `step` (in epochs). Past the end of the cycle the
    /// cosine keeps running, so the rate climbs back towards `lr_max`.
    pub fn lr_at(&self, step: f64) -> f64 {
        let step = step.max(0.0);
        if step < self.warmup {
            return self.lr_max * step / self.warmup;
        }
        let t = step - self.warmup;
        let cos = (std::f64::consts::PI * t / self.cycle).cos();
        self.lr_min + 0.5 * (self.lr_max - self.lr_min) * (1.0 + cos)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd { momentum: f64 },
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn sgd() -> Self {
        Self::Sgd { momentum: 0.9 }
    }

    pub fn adam() -> Self {
        Self::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Per-tensor optimizer state. Tensors whose gradient is `None` in a step
/// are left untouched, state included.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    steps: Vec<u64>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, sizes: &[usize]) -> Self {
        let zeros = || sizes.iter().map(|&n| vec![0.0; n]).collect::<Vec<_>>();
        let second = match kind {
            OptimizerKind::Adam { .. } => zeros(),
            OptimizerKind::Sgd { .. } => Vec::new(),
        };
        Self {
            kind,
            first: zeros(),
            second,
            steps: vec![0; sizes.len()],
        }
    }

    pub fn step(&mut self, params: Vec<&mut [f64]>, grads: &[Option<&[f64]>], lr: f64) {
        assert_eq!(params.len(), grads.len(), "parameter and gradient lists differ");
        for (i, (p, g)) in params.into_iter().zip(grads).enumerate() {
            let Some(g) = g else { continue };
            self.steps[i] += 1;
            match self.kind {
                OptimizerKind::Sgd { momentum } => {
                    for ((p, &g), v) in p.iter_mut().zip(*g).zip(&mut self.first[i]) {
                        *v = momentum * *v + g;
                        *p -= lr * *v;
                    }
                }
                OptimizerKind::Adam { beta1, beta2, eps } => {
                    let t = self.steps[i] as i32;
                    let c1 = 1.0 - beta1.powi(t);
                    let c2 = 1.0 - beta2.powi(t);
                    for (((p, &g), m), v) in p
                        .iter_mut()
                        .zip(*g)
                        .zip(&mut self.first[i])
                        .zip(&mut self.second[i])
                    {
                        *m = beta1 * *m + (1.0 - beta1) * g;
                        *v = beta2 * *v + (1.0 - beta2) * g * g;
                        *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                    }
                }
            }
        }
    }
}
