use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fully connected network: ReLU on hidden layers, identity on the output.
///
/// Parameters live in one flat vector, layer after layer, each layer as its
/// row-major `outputs × inputs` weight matrix followed by its bias vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layer_sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Gradient of the loss with respect to every parameter, same layout as
/// [`Mlp::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<f64>);

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(Error::InvalidConfig(format!(
                "layer sizes {layer_sizes:?} need ≥ 2 positive entries"
            )));
        }
        Ok(Mlp {
            layer_sizes: layer_sizes.to_vec(),
            params: vec![0.0; param_count(layer_sizes)],
        })
    }

    /// Weights uniform in `±sqrt(6 / (fan_in + fan_out))`, biases zero.
    pub fn new(layer_sizes: &[usize], rng: &mut ChaCha8Rng) -> Result<Self> {
        let mut net = Self::zeros(layer_sizes)?;
        let mut off = 0;
        for w in net.layer_sizes.clone().windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in &mut net.params[off..off + fan_in * fan_out] {
                *p = rng.random_range(-limit..limit);
            }
            off += fan_in * fan_out + fan_out;
        }
        Ok(net)
    }

    pub fn from_params(layer_sizes: &[usize], params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(layer_sizes)?;
        if params.len() != net.params.len() {
            return Err(Error::DimensionMismatch {
                expected: net.params.len(),
                actual: params.len(),
            });
        }
        net.params = params;
        Ok(net)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    /// Weight matrix and bias vector of layer `l`.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let off = self.offset(l);
        let (i, o) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
        (
            &self.params[off..off + i * o],
            &self.params[off + i * o..off + i * o + o],
        )
    }

    pub fn layer_mut(&mut self, l: usize) -> (&mut [f64], &mut [f64]) {
        let off = self.offset(l);
        let (i, o) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
        let (w, rest) = self.params[off..off + i * o + o].split_at_mut(i * o);
        (w, rest)
    }

    fn offset(&self, l: usize) -> usize {
        param_count(&self.layer_sizes[..=l])
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: input.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut acts = Vec::new();
        self.forward_into(input, &mut acts);
        Ok(acts.pop().unwrap())
    }

    /// Activations of every layer (post-ReLU on hidden layers), input first.
    fn forward_into(&self, input: &[f64], acts: &mut Vec<Vec<f64>>) {
        acts.clear();
        acts.push(input.to_vec());
        let last = self.num_layers() - 1;
        for l in 0..self.num_layers() {
            let (w, b) = self.layer(l);
            let x = &acts[l];
            let n_in = x.len();
            let mut y: Vec<f64> = b
                .iter()
                .enumerate()
                .map(|(o, &bias)| {
                    let row = &w[o * n_in..(o + 1) * n_in];
                    bias + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
                })
                .collect();
            if l != last {
                y.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            acts.push(y);
        }
    }

    /// Batch loss and its exact gradient by reverse-mode differentiation.
    /// ReLU's derivative at exactly zero is taken as zero.
    pub fn backward(&self, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<(f64, Gradients)> {
        if inputs.is_empty() {
            return Err(Error::Empty("batch"));
        }
        if inputs.len() != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: inputs.len(),
                actual: targets.len(),
            });
        }
        let n = inputs.len() as f64;
        let mut grads = vec![0.0; self.params.len()];
        let mut acts = Vec::new();
        let mut loss = 0.0;
        for (x, t) in inputs.iter().zip(targets) {
            self.check_input(x)?;
            if t.len() != self.output_dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.output_dim(),
                    actual: t.len(),
                });
            }
            self.forward_into(x, &mut acts);
            let out = acts.last().unwrap();
            let mut delta: Vec<f64> = out
                .iter()
                .zip(t)
                .map(|(p, t)| {
                    loss += (p - t) * (p - t);
                    2.0 * (p - t) / n
                })
                .collect();

            for l in (0..self.num_layers()).rev() {
                let off = self.offset(l);
                let x = &acts[l];
                let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
                for o in 0..n_out {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    let row = &mut grads[off + o * n_in..off + (o + 1) * n_in];
                    row.iter_mut().zip(x).for_each(|(g, xi)| *g += d * xi);
                    grads[off + n_in * n_out + o] += d;
                }
                if l == 0 {
                    break;
                }
                let (w, _) = self.layer(l);
                delta = (0..n_in)
                    .map(|i| {
                        if x[i] > 0.0 {
                            (0..n_out).map(|o| w[o * n_in + i] * delta[o]).sum()
                        } else {
                            0.0
                        }
                    })
                    .collect();
            }
        }
        Ok((loss / n, Gradients(grads)))
    }
}

/// Mean over the batch of the squared Euclidean error per sample.
pub fn mse_loss(pred: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<f64> {
    if pred.is_empty() {
        return Err(Error::Empty("batch"));
    }
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: pred.len(),
            actual: truth.len(),
        });
    }
    let mut total = 0.0;
    for (p, t) in pred.iter().zip(truth) {
        if p.len() != t.len() {
            return Err(Error::DimensionMismatch {
                expected: p.len(),
                actual: t.len(),
            });
        }
        total += p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    Ok(total / pred.len() as f64)
}
