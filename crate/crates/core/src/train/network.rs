use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::crossbar::CrossbarLayer;
use crate::error::{config, Result};

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Dense layer with float weights. Row `n_in` of the weight matrix holds
/// the biases.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatLayer {
    pub n_in: usize,
    pub n_out: usize,
    pub w: Vec<f64>,
}

impl FloatLayer {
    /// Uniform weights in `±1/sqrt(n_in)`, zero biases.
    pub fn random(n_in: usize, n_out: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (n_in as f64).sqrt();
        let mut w: Vec<f64> = (0..n_in * n_out)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        w.resize((n_in + 1) * n_out, 0.0);
        Self { n_in, n_out, w }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n_out;
        let mut z = self.w[self.n_in * n..].to_vec();
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let row = &self.w[i * n..(i + 1) * n];
            for (zj, &wij) in z.iter_mut().zip(row) {
                *zj += xi * wij;
            }
        }
        z
    }

    pub fn backward(&self, delta: &[f64]) -> Vec<f64> {
        let n = self.n_out;
        (0..self.n_in)
            .map(|i| {
                self.w[i * n..(i + 1) * n]
                    .iter()
                    .zip(delta)
                    .map(|(w, d)| w * d)
                    .sum()
            })
            .collect()
    }

    pub fn update(&mut self, x: &[f64], delta: &[f64], lr: f64) {
        let n = self.n_out;
        for (i, &xi) in x.iter().chain(std::iter::once(&1.0)).enumerate() {
            if xi == 0.0 {
                continue;
            }
            let row = &mut self.w[i * n..(i + 1) * n];
            for (wij, &dj) in row.iter_mut().zip(delta) {
                *wij -= lr * xi * dj;
            }
        }
    }
}

#[derive(Debug, Clone)]
pub enum Layer {
    Float(FloatLayer),
    Crossbar(CrossbarLayer),
}

impl Layer {
    pub fn n_in(&self) -> usize {
        match self {
            Layer::Float(l) => l.n_in,
            Layer::Crossbar(l) => l.n_in(),
        }
    }

    pub fn n_out(&self) -> usize {
        match self {
            Layer::Float(l) => l.n_out,
            Layer::Crossbar(l) => l.n_out(),
        }
    }

    /// Pre-activations for input `x` (bias input implied).
    pub fn forward(&mut self, x: &[f64], rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        match self {
            Layer::Float(l) => Ok(l.forward(x)),
            Layer::Crossbar(l) => l.forward(x, rng),
        }
    }

    /// Error propagated to the inputs, `W·delta` without the bias row.
    pub fn backward(&mut self, delta: &[f64], rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        match self {
            Layer::Float(l) => Ok(l.backward(delta)),
            Layer::Crossbar(l) => l.backward(delta, rng),
        }
    }

    /// Gradient step `W -= lr · [x; 1] ⊗ delta`.
    pub fn update(
        &mut self,
        x: &[f64],
        delta: &[f64],
        lr: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<()> {
        match self {
            Layer::Float(l) => {
                l.update(x, delta, lr);
                Ok(())
            }
            Layer::Crossbar(l) => l.update(x, delta, lr, rng),
        }
    }

    /// Effective weights, `(n_in + 1) × n_out` row-major, biases last.
    pub fn weights(&self) -> Vec<f64> {
        match self {
            Layer::Float(l) => l.w.clone(),
            Layer::Crossbar(l) => l.weights(),
        }
    }
}

/// Sigmoid MLP trained on squared error.
#[derive(Debug, Clone)]
pub struct Network {
    pub layers: Vec<Layer>,
}

/// Outcome of one training step.
pub struct StepResult {
    pub predicted: usize,
    pub loss: f64,
}

impl Network {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(config("network needs at least one layer"));
        }
        for w in layers.windows(2) {
            if w[0].n_out() != w[1].n_in() {
                return Err(config(format!(
                    "layer widths do not chain: {} outputs feed {} inputs",
                    w[0].n_out(),
                    w[1].n_in()
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn float(sizes: &[usize], rng: &mut impl Rng) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(config("layer_sizes needs at least input and output widths"));
        }
        Self::new(
            sizes
                .windows(2)
                .map(|w| Layer::Float(FloatLayer::random(w[0], w[1], rng)))
                .collect(),
        )
    }

    pub fn n_inputs(&self) -> usize {
        self.layers[0].n_in()
    }

    pub fn n_outputs(&self) -> usize {
        self.layers[self.layers.len() - 1].n_out()
    }

    /// Activations of every layer, input first.
    pub fn activations(&mut self, x: &[f64], rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
        let mut acts = vec![x.to_vec()];
        for layer in &mut self.layers {
            let z = layer.forward(&acts[acts.len() - 1], rng)?;
            acts.push(z.into_iter().map(sigmoid).collect());
        }
        Ok(acts)
    }

    pub fn predict(&mut self, x: &[f64], rng: &mut ChaCha8Rng) -> Result<usize> {
        let acts = self.activations(x, rng)?;
        Ok(argmax(&acts[acts.len() - 1]))
    }

    /// One online backpropagation step. Errors are propagated through each
    /// layer before that layer is updated.
    pub fn train_step(
        &mut self,
        x: &[f64],
        target: &[f64],
        lr: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<StepResult> {
        let acts = self.activations(x, rng)?;
        let out = &acts[acts.len() - 1];
        let loss = 0.5
            * out
                .iter()
                .zip(target)
                .map(|(a, t)| (a - t) * (a - t))
                .sum::<f64>();
        let predicted = argmax(out);
        let mut delta: Vec<f64> = out
            .iter()
            .zip(target)
            .map(|(&a, &t)| (a - t) * a * (1.0 - a))
            .collect();
        for l in (0..self.layers.len()).rev() {
            let next = if l > 0 {
                let e = self.layers[l].backward(&delta, rng)?;
                Some(
                    e.iter()
                        .zip(&acts[l])
                        .map(|(&e, &a)| e * a * (1.0 - a))
                        .collect::<Vec<f64>>(),
                )
            } else {
                None
            };
            self.layers[l].update(&acts[l], &delta, lr, rng)?;
            if let Some(d) = next {
                delta = d;
            }
        }
        Ok(StepResult { predicted, loss })
    }

    /// Squared-error loss and its gradient with respect to every weight,
    /// computed by backpropagation on the effective weights.
    pub fn loss_and_gradients(&self, x: &[f64], target: &[f64]) -> (f64, Vec<Vec<f64>>) {
        let float: Vec<FloatLayer> = self
            .layers
            .iter()
            .map(|l| FloatLayer {
                n_in: l.n_in(),
                n_out: l.n_out(),
                w: l.weights(),
            })
            .collect();
        let mut acts = vec![x.to_vec()];
        for l in &float {
            let z = l.forward(&acts[acts.len() - 1]);
            acts.push(z.into_iter().map(sigmoid).collect());
        }
        let out = &acts[acts.len() - 1];
        let loss = 0.5
            * out
                .iter()
                .zip(target)
                .map(|(a, t)| (a - t) * (a - t))
                .sum::<f64>();
        let mut delta: Vec<f64> = out
            .iter()
            .zip(target)
            .map(|(&a, &t)| (a - t) * a * (1.0 - a))
            .collect();
        let mut grads = vec![Vec::new(); float.len()];
        for l in (0..float.len()).rev() {
            let input = &acts[l];
            let mut g = Vec::with_capacity((input.len() + 1) * delta.len());
            for &xi in input.iter().chain(std::iter::once(&1.0)) {
                g.extend(delta.iter().map(|&d| xi * d));
            }
            grads[l] = g;
            if l > 0 {
                delta = float[l]
                    .backward(&delta)
                    .iter()
                    .zip(input)
                    .map(|(&e, &a)| e * a * (1.0 - a))
                    .collect();
            }
        }
        (loss, grads)
    }
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (k, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = k;
        }
    }
    best
}
