//! Dense layers and small MLP stacks with manual backpropagation.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng as _;

use crate::seed::Rng;

/// Fully connected layer computing `x · W + b` with `W` stored `in × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    /// He-uniform initialization, zero bias.
    pub fn init(inputs: usize, outputs: usize, rng: &mut Rng) -> Self {
        let bound = (6.0 / inputs as f64).sqrt();
        Self {
            weight: Array2::from_shape_simple_fn((inputs, outputs), || {
                rng.random_range(-bound..bound)
            }),
            bias: Array1::zeros(outputs),
        }
    }

    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weight: Array2::zeros((inputs, outputs)),
            bias: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weight.ncols()
    }

    fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut y = x.dot(&self.weight);
        y += &self.bias;
        y
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrad {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Stack of dense layers with ReLU between them.
///
/// Dropout (inverted, train mode only) follows every hidden activation when
/// `dropout > 0`. The last layer is linear unless `output_relu` is set.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
    pub output_relu: bool,
    pub dropout: f64,
}

/// What backward needs from a forward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    inputs: Vec<Array2<f64>>,
    /// Per layer: elementwise factor of the activation derivative and the
    /// dropout mask. `None` for a linear layer.
    gates: Vec<Option<Array2<f64>>>,
}

impl Mlp {
    pub fn new(sizes: &[usize], output_relu: bool, dropout: f64, rng: &mut Rng) -> Self {
        Self {
            layers: sizes.windows(2).map(|w| Dense::init(w[0], w[1], rng)).collect(),
            output_relu,
            dropout,
        }
    }

    pub fn zeros(sizes: &[usize], output_relu: bool, dropout: f64) -> Self {
        Self {
            layers: sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
            output_relu,
            dropout,
        }
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].inputs()];
        s.extend(self.layers.iter().map(Dense::outputs));
        s
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty mlp").outputs()
    }

    /// Inference pass: no dropout, no cache.
    pub fn infer(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let last = self.layers.len() - 1;
        let mut h = x.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(h.view());
            if i < last || self.output_relu {
                h.mapv_inplace(|v| v.max(0.0));
            }
        }
        h
    }

    /// Training pass; `dropout_rng` drives the dropout masks.
    pub fn forward(&self, x: ArrayView2<f64>, dropout_rng: &mut Rng) -> (Array2<f64>, MlpCache) {
        let last = self.layers.len() - 1;
        let keep = 1.0 - self.dropout;
        let mut cache = MlpCache {
            inputs: Vec::with_capacity(self.layers.len()),
            gates: Vec::with_capacity(self.layers.len()),
        };
        let mut h = x.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut y = layer.forward(h.view());
            cache.inputs.push(h);
            let hidden = i < last;
            if hidden || self.output_relu {
                let drop = hidden && self.dropout > 0.0;
                let gate = y.mapv(|v| {
                    let relu = if v > 0.0 { 1.0 } else { 0.0 };
                    if drop {
                        if dropout_rng.random_bool(keep) {
                            relu / keep
                        } else {
                            0.0
                        }
                    } else {
                        relu
                    }
                });
                y *= &gate;
                cache.gates.push(Some(gate));
            } else {
                cache.gates.push(None);
            }
            h = y;
        }
        (h, cache)
    }

    /// Backpropagates `grad_out` through the cached pass. Returns layer
    /// gradients and, when `need_input_grad`, the gradient w.r.t. the input.
    pub fn backward(
        &self,
        cache: &MlpCache,
        grad_out: Array2<f64>,
        need_input_grad: bool,
    ) -> (Vec<DenseGrad>, Option<Array2<f64>>) {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut g = grad_out;
        for i in (0..self.layers.len()).rev() {
            if let Some(gate) = &cache.gates[i] {
                g *= gate;
            }
            let x = &cache.inputs[i];
            grads.push(DenseGrad {
                weight: x.t().dot(&g),
                bias: g.sum_axis(Axis(0)),
            });
            if i > 0 || need_input_grad {
                g = g.dot(&self.layers[i].weight.t());
            }
        }
        grads.reverse();
        let input_grad = need_input_grad.then_some(g);
        (grads, input_grad)
    }
}
