//! A small fully connected network evaluated in f64, with manual backprop.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::GeometryError;
use crate::merge::{Tensor, TensorMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation's output.
    fn slope(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Identity => 1.0,
        }
    }
}

/// Layer widths and hidden activation; the output layer is affine.
/// Parameters are a flat vector: per layer, the row-major `out × in` weight
/// followed by the bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TinyNet {
    widths: Vec<usize>,
    activation: Activation,
}

impl TinyNet {
    pub fn new(widths: Vec<usize>, activation: Activation) -> Result<Self, GeometryError> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(GeometryError::Shape(format!("need at least two positive widths, got {widths:?}")));
        }
        Ok(TinyNet { widths, activation })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    fn layers(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.widths.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn param_count(&self) -> usize {
        self.layers().map(|(i, o)| o * i + o).sum()
    }

    /// Uniform init in `±sqrt(3 / fan_in)` with zero biases.
    pub fn init<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut params = Vec::with_capacity(self.param_count());
        for (i, o) in self.layers() {
            let a = (3.0 / i as f64).sqrt();
            params.extend((0..o * i).map(|_| rng.random_range(-a..a)));
            params.extend(std::iter::repeat_n(0.0, o));
        }
        params
    }

    fn check(&self, params: &[f64], x: &[f64]) -> Result<(), GeometryError> {
        if params.len() != self.param_count() {
            return Err(GeometryError::Shape(format!("expected {} parameters, got {}", self.param_count(), params.len())));
        }
        if x.len() != self.widths[0] {
            return Err(GeometryError::Shape(format!("expected input of width {}, got {}", self.widths[0], x.len())));
        }
        Ok(())
    }

    /// Outputs of every layer, input first.
    fn trace(&self, params: &[f64], x: &[f64]) -> Vec<Vec<f64>> {
        let last = self.widths.len() - 2;
        let mut acts = vec![x.to_vec()];
        let mut off = 0;
        for (l, (i, o)) in self.layers().enumerate() {
            let (w, b) = params[off..off + o * i + o].split_at(o * i);
            let input = &acts[l];
            let out: Vec<f64> = (0..o)
                .map(|r| {
                    let z = b[r] + w[r * i..(r + 1) * i].iter().zip(input).map(|(w, a)| w * a).sum::<f64>();
                    if l == last { z } else { self.activation.apply(z) }
                })
                .collect();
            acts.push(out);
            off += o * i + o;
        }
        acts
    }

    pub fn forward(&self, params: &[f64], x: &[f64]) -> Result<Vec<f64>, GeometryError> {
        self.check(params, x)?;
        Ok(self.trace(params, x).pop().expect("output layer"))
    }

    /// Add `dL/dparams` for one input to `grad`, given `dL/doutput`.
    fn backprop(&self, params: &[f64], acts: &[Vec<f64>], grad_out: Vec<f64>, grad: &mut [f64]) {
        let layers: Vec<_> = self.layers().collect();
        let mut offsets = Vec::with_capacity(layers.len());
        let mut off = 0;
        for &(i, o) in &layers {
            offsets.push(off);
            off += o * i + o;
        }
        let last = layers.len() - 1;
        let mut delta = grad_out;
        for l in (0..layers.len()).rev() {
            let (i, o) = layers[l];
            if l != last {
                for (d, a) in delta.iter_mut().zip(&acts[l + 1]) {
                    *d *= self.activation.slope(*a);
                }
            }
            let off = offsets[l];
            let input = &acts[l];
            for r in 0..o {
                for c in 0..i {
                    grad[off + r * i + c] += delta[r] * input[c];
                }
                grad[off + o * i + r] += delta[r];
            }
            if l > 0 {
                let w = &params[off..off + o * i];
                delta = (0..i).map(|c| (0..o).map(|r| w[r * i + c] * delta[r]).sum()).collect();
            }
        }
    }

    /// Mean of `½‖f(x) − y‖²` and its gradient.
    pub fn loss_and_grad(&self, params: &[f64], data: &[(Vec<f64>, Vec<f64>)]) -> Result<(f64, Vec<f64>), GeometryError> {
        let mut grad = vec![0.0; self.param_count()];
        let mut loss = 0.0;
        for (x, y) in data {
            self.check(params, x)?;
            let acts = self.trace(params, x);
            let out = acts.last().expect("output layer");
            let err: Vec<f64> = out.iter().zip(y).map(|(o, y)| o - y).collect();
            loss += 0.5 * err.iter().map(|e| e * e).sum::<f64>();
            self.backprop(params, &acts, err, &mut grad);
        }
        let n = data.len().max(1) as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        Ok((loss / n, grad))
    }

    /// Plain full-batch gradient descent from `start`.
    pub fn train(
        &self,
        start: &[f64],
        data: &[(Vec<f64>, Vec<f64>)],
        steps: usize,
        learning_rate: f64,
    ) -> Result<(Vec<f64>, f64), GeometryError> {
        let mut params = start.to_vec();
        for _ in 0..steps {
            let (_, grad) = self.loss_and_grad(&params, data)?;
            params.iter_mut().zip(&grad).for_each(|(p, g)| *p -= learning_rate * g);
        }
        let (loss, _) = self.loss_and_grad(&params, data)?;
        Ok((params, loss))
    }

    /// Named tensors `layer{i}.weight` (`out × in`) and `layer{i}.bias`.
    pub fn to_tensor_map(&self, params: &[f64]) -> Result<TensorMap, GeometryError> {
        self.check(params, &vec![0.0; self.widths[0]])?;
        let mut map = TensorMap::new();
        let mut off = 0;
        for (l, (i, o)) in self.layers().enumerate() {
            let f = |s: &[f64]| s.iter().map(|&v| v as f32).collect::<Vec<_>>();
            let w = Tensor::new(vec![o, i], f(&params[off..off + o * i])).map_err(|e| GeometryError::Shape(e.to_string()))?;
            let b = Tensor::new(vec![o], f(&params[off + o * i..off + o * i + o])).map_err(|e| GeometryError::Shape(e.to_string()))?;
            map.insert(format!("layer{l}.weight"), w).map_err(|e| GeometryError::Shape(e.to_string()))?;
            map.insert(format!("layer{l}.bias"), b).map_err(|e| GeometryError::Shape(e.to_string()))?;
            off += o * i + o;
        }
        Ok(map)
    }

    /// Inverse of [`TinyNet::to_tensor_map`]; names and shapes must match exactly.
    pub fn params_from_map(&self, map: &TensorMap) -> Result<Vec<f64>, GeometryError> {
        let mut params = Vec::with_capacity(self.param_count());
        for (l, (i, o)) in self.layers().enumerate() {
            for (name, shape) in [(format!("layer{l}.weight"), vec![o, i]), (format!("layer{l}.bias"), vec![o])] {
                let t = map.get(&name).ok_or_else(|| GeometryError::Shape(format!("missing tensor {name}")))?;
                if t.shape() != shape.as_slice() {
                    return Err(GeometryError::Shape(format!("{name}: expected shape {shape:?}, got {:?}", t.shape())));
                }
                params.extend(t.data().iter().map(|&v| f64::from(v)));
            }
        }
        if map.len() != 2 * (self.widths.len() - 1) {
            return Err(GeometryError::Shape("tensor map has extra entries".into()));
        }
        Ok(params)
    }
}
