//! Minimal dense network over a flat parameter vector.
//!
//! Parameters live in one `Vec<f64>` shared with the optimizer, so layers
//! address their weights through offsets. Hidden layers use tanh, the output
//! layer is linear. The backward pass accumulates into a caller-owned
//! gradient buffer in a fixed order, which keeps training bit-reproducible.

use rand::Rng;
use rand_distr::StandardNormal;

/// Fully-connected net shape: `sizes[0]` inputs through `sizes.last()`
/// outputs. Weights are row-major `[out][in]`, followed by the bias.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Mlp {
    pub sizes: Vec<usize>,
}

/// Post-activation values per layer, input first, output last.
pub struct MlpCache {
    pub activations: Vec<Vec<f64>>,
}

impl Mlp {
    pub fn new(sizes: Vec<usize>) -> Mlp {
        assert!(sizes.len() >= 2, "net needs input and output sizes");
        assert!(sizes.iter().all(|&s| s > 0));
        Mlp { sizes }
    }

    pub fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn param_count(&self) -> usize {
        (0..self.n_layers())
            .map(|l| self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1])
            .sum()
    }

    fn layer_offset(&self, layer: usize) -> usize {
        (0..layer)
            .map(|l| self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1])
            .sum()
    }

    pub fn forward(&self, params: &[f64], input: &[f64]) -> Vec<f64> {
        self.forward_cached(params, input)
            .activations
            .last()
            .unwrap()
            .clone()
    }

    pub fn forward_cached(&self, params: &[f64], input: &[f64]) -> MlpCache {
        debug_assert_eq!(input.len(), self.sizes[0]);
        let mut activations = Vec::with_capacity(self.sizes.len());
        activations.push(input.to_vec());
        let mut offset = 0;
        for l in 0..self.n_layers() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let weights = &params[offset..offset + n_in * n_out];
            let biases = &params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            offset += n_in * n_out + n_out;
            let prev = activations.last().unwrap();
            let mut out = Vec::with_capacity(n_out);
            for o in 0..n_out {
                let row = &weights[o * n_in..(o + 1) * n_in];
                let mut z = biases[o];
                for i in 0..n_in {
                    z += row[i] * prev[i];
                }
                out.push(if l + 1 == self.n_layers() { z } else { z.tanh() });
            }
            activations.push(out);
        }
        MlpCache { activations }
    }

    /// Accumulates `d loss / d params` into `grad` given the loss gradient
    /// at the output layer. `params` and `grad` both cover this net's slice.
    pub fn backward(&self, params: &[f64], cache: &MlpCache, grad_output: &[f64], grad: &mut [f64]) {
        debug_assert_eq!(grad_output.len(), *self.sizes.last().unwrap());
        let mut upstream = grad_output.to_vec();
        for l in (0..self.n_layers()).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let offset = self.layer_offset(l);
            let weights = &params[offset..offset + n_in * n_out];
            let act = &cache.activations[l + 1];
            let prev = &cache.activations[l];
            // linear output layer; tanh elsewhere, recovered from the activation
            let dz: Vec<f64> = if l + 1 == self.n_layers() {
                upstream.clone()
            } else {
                upstream
                    .iter()
                    .zip(act)
                    .map(|(g, a)| g * (1.0 - a * a))
                    .collect()
            };
            let (gw, rest) = grad[offset..].split_at_mut(n_in * n_out);
            let gb = &mut rest[..n_out];
            for o in 0..n_out {
                gb[o] += dz[o];
                let row = &mut gw[o * n_in..(o + 1) * n_in];
                for i in 0..n_in {
                    row[i] += dz[o] * prev[i];
                }
            }
            if l > 0 {
                let mut down = vec![0.0; n_in];
                for o in 0..n_out {
                    let row = &weights[o * n_in..(o + 1) * n_in];
                    for i in 0..n_in {
                        down[i] += row[i] * dz[o];
                    }
                }
                upstream = down;
            }
        }
    }

    /// Writes orthogonally-initialized weights and zero biases into
    /// `params`, scaling hidden layers by sqrt(2) and the output layer by
    /// `output_gain`.
    pub fn init(&self, params: &mut [f64], output_gain: f64, rng: &mut impl Rng) {
        let mut offset = 0;
        for l in 0..self.n_layers() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let gain = if l + 1 == self.n_layers() {
                output_gain
            } else {
                std::f64::consts::SQRT_2
            };
            let w = orthogonal(n_out, n_in, gain, rng);
            params[offset..offset + n_in * n_out].copy_from_slice(&w);
            for b in &mut params[offset + n_in * n_out..offset + n_in * n_out + n_out] {
                *b = 0.0;
            }
            offset += n_in * n_out + n_out;
        }
    }
}

/// Row-major `rows x cols` matrix with orthonormal rows (or columns when
/// rows exceed cols), scaled by `gain`. Gram-Schmidt over seeded Gaussians.
pub fn orthogonal(rows: usize, cols: usize, gain: f64, rng: &mut impl Rng) -> Vec<f64> {
    let (n, m, transpose) = if rows >= cols {
        (rows, cols, false)
    } else {
        (cols, rows, true)
    };
    // n >= m: orthonormalize m columns of an n x m Gaussian draw
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(m);
    for _ in 0..m {
        let mut v: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        for prev in &q {
            let dot: f64 = v.iter().zip(prev).map(|(a, b)| a * b).sum();
            for (vi, pi) in v.iter_mut().zip(prev) {
                *vi -= dot * pi;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-12 {
            // effectively impossible with continuous draws; keep a safe basis
            let mut e = vec![0.0; n];
            e[q.len() % n] = 1.0;
            q.push(e);
        } else {
            q.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            let v = if transpose { q[r][c] } else { q[c][r] };
            out[r * cols + c] = gain * v;
        }
    }
    out
}
