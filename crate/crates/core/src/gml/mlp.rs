use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fully connected network with ReLU hidden layers and a linear output.
///
/// Parameters live in one flat buffer: for each layer the row-major weight
/// matrix (`out x in`) followed by its bias vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes[1..].contains(&0) {
            return Err(Error::Dimension(format!("invalid layer sizes {sizes:?}")));
        }
        Ok(Self { sizes: sizes.to_vec(), params: vec![0.0; param_count(sizes)] })
    }

    /// Weights uniform in `±1/sqrt(fan_in)`, biases zero.
    pub fn init(sizes: &[usize], rng: &mut impl Rng) -> Result<Self> {
        let mut net = Self::zeros(sizes)?;
        let mut off = 0;
        for w in sizes.windows(2) {
            let (n_in, n_out) = (w[0], w[1]);
            let bound = 1.0 / (n_in.max(1) as f64).sqrt();
            for p in &mut net.params[off..off + n_in * n_out] {
                *p = rng.random_range(-bound..=bound);
            }
            off += n_in * n_out + n_out;
        }
        Ok(net)
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Result<Self> {
        let net = Self::zeros(sizes)?;
        if params.len() != net.params.len() {
            return Err(Error::Dimension(format!("{} parameters for sizes {sizes:?}", params.len())));
        }
        Ok(Self { params, ..net })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn n_in(&self) -> usize {
        self.sizes[0]
    }

    pub fn n_out(&self) -> usize {
        *self.sizes.last().expect("at least two layers")
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    /// Pre-activation outputs of every layer, starting with the input itself.
    fn activations(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        if x.len() != self.n_in() {
            return Err(Error::Dimension(format!("network expects {} inputs, got {}", self.n_in(), x.len())));
        }
        let n_layers = self.sizes.len() - 1;
        let mut acts = Vec::with_capacity(n_layers + 1);
        acts.push(x.to_vec());
        let mut off = 0;
        for (l, w) in self.sizes.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let input: Vec<f64> = if l == 0 { acts[0].clone() } else { acts[l].iter().map(|v| v.max(0.0)).collect() };
            let weights = &self.params[off..off + n_in * n_out];
            let bias = &self.params[off + n_in * n_out..off + n_in * n_out + n_out];
            let z: Vec<f64> = (0..n_out)
                .map(|o| {
                    let row = &weights[o * n_in..(o + 1) * n_in];
                    bias[o] + row.iter().zip(&input).map(|(a, b)| a * b).sum::<f64>()
                })
                .collect();
            acts.push(z);
            off += n_in * n_out + n_out;
        }
        Ok(acts)
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.activations(x)?.pop().expect("output layer"))
    }

    /// Gradient of `<upstream, forward(x)>` with respect to the parameters.
    pub fn param_grads(&self, x: &[f64], upstream: &[f64]) -> Result<Vec<f64>> {
        let mut g = vec![0.0; self.params.len()];
        self.accumulate_param_grads(x, upstream, &mut g)?;
        Ok(g)
    }

    /// Adds the parameter gradient of `<upstream, forward(x)>` into `acc`.
    pub fn accumulate_param_grads(&self, x: &[f64], upstream: &[f64], acc: &mut [f64]) -> Result<()> {
        if upstream.len() != self.n_out() || acc.len() != self.params.len() {
            return Err(Error::Dimension("upstream or accumulator has the wrong length".into()));
        }
        let acts = self.activations(x)?;
        let n_layers = self.sizes.len() - 1;
        let mut offsets = Vec::with_capacity(n_layers);
        let mut off = 0;
        for w in self.sizes.windows(2) {
            offsets.push(off);
            off += w[0] * w[1] + w[1];
        }
        let mut delta = upstream.to_vec();
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let off = offsets[l];
            let input: Vec<f64> = if l == 0 { acts[0].clone() } else { acts[l].iter().map(|v| v.max(0.0)).collect() };
            for o in 0..n_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let row = &mut acc[off + o * n_in..off + (o + 1) * n_in];
                row.iter_mut().zip(&input).for_each(|(r, i)| *r += d * i);
                acc[off + n_in * n_out + o] += d;
            }
            if l > 0 {
                let weights = &self.params[off..off + n_in * n_out];
                let mut prev = vec![0.0; n_in];
                for o in 0..n_out {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    weights[o * n_in..(o + 1) * n_in].iter().zip(prev.iter_mut()).for_each(|(w, p)| *p += d * w);
                }
                for (p, z) in prev.iter_mut().zip(&acts[l]) {
                    if *z <= 0.0 {
                        *p = 0.0;
                    }
                }
                delta = prev;
            }
        }
        Ok(())
    }
}
