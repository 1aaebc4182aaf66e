//! Fully connected value network `Q(s, a)` on the concatenated input
//! `[state, action_features]`, ReLU on hidden layers and a scalar output.
//!
//! Weights are stored input-major (`w[i * n_out + o]`) so that every layer is
//! a sequence of contiguous axpy updates.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub n_in: usize,
    pub n_out: usize,
    /// `w[i * n_out + o]` connects input `i` to output `o`.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Layer {
    fn zeros(n_in: usize, n_out: usize) -> Self {
        Self {
            n_in,
            n_out,
            w: vec![0.0; n_in * n_out],
            b: vec![0.0; n_out],
        }
    }

    /// `out = b + Σ_i x_i w[i, ·]`, summed in increasing `i`.
    #[inline]
    fn affine(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.b);
        self.accumulate(x, 0, out);
    }

    /// `out += Σ_j x_j w[offset + j, ·]`, skipping zero inputs (inactive ReLUs).
    #[inline]
    fn accumulate(&self, x: &[f64], offset: usize, out: &mut [f64]) {
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            let row = &self.w[(offset + j) * self.n_out..(offset + j + 1) * self.n_out];
            for (o, &wv) in out.iter_mut().zip(row) {
                *o += xj * wv;
            }
        }
    }
}

#[inline]
fn relu(v: &mut [f64]) {
    for x in v {
        *x = x.max(0.0);
    }
}

/// Parameters of the value network. Also used as the gradient container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    layers: Vec<Layer>,
}

impl MlpParams {
    fn check_sizes(sizes: &[usize]) -> Result<()> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidConfig(format!("bad layer sizes {sizes:?}")));
        }
        if *sizes.last().unwrap() != 1 {
            return Err(Error::InvalidConfig(
                "value network needs a single output".into(),
            ));
        }
        Ok(())
    }

    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        Self::check_sizes(sizes)?;
        Ok(Self {
            layers: sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect(),
        })
    }

    /// Weights and biases uniform in `[-1/√fan_in, 1/√fan_in]`.
    pub fn init<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        let mut p = Self::zeros(sizes)?;
        for layer in &mut p.layers {
            let bound = 1.0 / (layer.n_in as f64).sqrt();
            for v in layer.w.iter_mut().chain(layer.b.iter_mut()) {
                *v = rng.random_range(-bound..=bound);
            }
        }
        Ok(p)
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        let p = Self { layers };
        p.validate()?;
        Ok(p)
    }

    /// Shapes chain, output is scalar and every parameter is finite.
    pub fn validate(&self) -> Result<()> {
        Self::check_sizes(&self.sizes())?;
        for (i, l) in self.layers.iter().enumerate() {
            if l.w.len() != l.n_in * l.n_out || l.b.len() != l.n_out {
                return Err(Error::ShapeMismatch {
                    expected: l.n_in * l.n_out + l.n_out,
                    got: l.w.len() + l.b.len(),
                });
            }
            if i > 0 && self.layers[i - 1].n_out != l.n_in {
                return Err(Error::ShapeMismatch {
                    expected: self.layers[i - 1].n_out,
                    got: l.n_in,
                });
            }
        }
        if !self.is_finite() {
            return Err(Error::InvalidParams("non-finite network parameter".into()));
        }
        Ok(())
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].n_in];
        s.extend(self.layers.iter().map(|l| l.n_out));
        s
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }

    /// All parameters, layer by layer, weights before biases.
    pub fn iter(&self) -> impl Iterator<Item = &f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.w.iter().chain(l.b.iter()))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.layers
            .iter_mut()
            .flat_map(|l| l.w.iter_mut().chain(l.b.iter_mut()))
    }

    pub fn forward(&self, input: &[f64]) -> Result<f64> {
        if input.len() != self.input_dim() {
            return Err(Error::ShapeMismatch {
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        Ok(self.forward_split(input, &[]))
    }

    /// Value of `[head, tail]` without materializing the concatenation.
    pub fn forward_split(&self, head: &[f64], tail: &[f64]) -> f64 {
        let mut out = [0.0];
        self.forward_many(head, std::iter::once(tail), &mut out);
        out[0]
    }

    /// Values of `[state, a]` for each `a` in `tails`, written to `out`.
    ///
    /// The state's share of the first layer is computed once. Results are
    /// bit-identical to evaluating each concatenated input separately.
    pub fn forward_many<'a, I>(&self, state: &[f64], tails: I, out: &mut [f64])
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        debug_assert!(self.layers.iter().all(|l| l.w.len() == l.n_in * l.n_out));
        let first = &self.layers[0];
        let mut base = vec![0.0; first.n_out];
        first.affine(state, &mut base);
        let width = self.layers.iter().map(|l| l.n_out).max().unwrap_or(1);
        let mut cur = vec![0.0; width];
        let mut next = vec![0.0; width];
        let mut filled = 0;
        for (slot, tail) in out.iter_mut().zip(tails) {
            assert_eq!(state.len() + tail.len(), first.n_in, "input width mismatch");
            let h = &mut cur[..first.n_out];
            h.copy_from_slice(&base);
            first.accumulate(tail, state.len(), h);
            let mut len = first.n_out;
            for layer in &self.layers[1..] {
                relu(&mut cur[..len]);
                layer.affine(&cur[..len], &mut next[..layer.n_out]);
                std::mem::swap(&mut cur, &mut next);
                len = layer.n_out;
            }
            *slot = cur[0];
            filled += 1;
        }
        assert_eq!(filled, out.len(), "fewer inputs than output slots");
    }

    /// Loss `(1/B) Σ (y_i − Q(x_i))²` and its gradient for a batch of `(x_i, y_i)`.
    pub fn gradient<X: AsRef<[f64]>>(&self, batch: &[(X, f64)]) -> Result<(f64, MlpParams)> {
        if batch.is_empty() {
            return Err(Error::InvalidParams("empty batch".into()));
        }
        let mut grad = MlpParams {
            layers: self
                .layers
                .iter()
                .map(|l| Layer::zeros(l.n_in, l.n_out))
                .collect(),
        };
        let scale = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        let mut acts: Vec<Vec<f64>> = self.layers.iter().map(|l| vec![0.0; l.n_out]).collect();
        for (x, y) in batch {
            let x = x.as_ref();
            if x.len() != self.input_dim() {
                return Err(Error::ShapeMismatch {
                    expected: self.input_dim(),
                    got: x.len(),
                });
            }
            // acts[l] holds post-activation outputs (pre-activation for the last layer)
            for l in 0..self.layers.len() {
                let (before, rest) = acts.split_at_mut(l);
                let input = if l == 0 { x } else { &before[l - 1][..] };
                self.layers[l].affine(input, &mut rest[0]);
                if l + 1 < self.layers.len() {
                    relu(&mut rest[0]);
                }
            }
            let q = acts.last().unwrap()[0];
            let residual = q - y;
            loss += residual * residual * scale;

            let mut delta = vec![2.0 * residual * scale];
            for l in (0..self.layers.len()).rev() {
                let layer = &self.layers[l];
                let input = if l == 0 { x } else { &acts[l - 1][..] };
                let g = &mut grad.layers[l];
                for (gb, d) in g.b.iter_mut().zip(&delta) {
                    *gb += d;
                }
                for (i, &xi) in input.iter().enumerate() {
                    if xi != 0.0 {
                        let row = &mut g.w[i * layer.n_out..(i + 1) * layer.n_out];
                        for (gw, d) in row.iter_mut().zip(&delta) {
                            *gw += xi * d;
                        }
                    }
                }
                if l > 0 {
                    // input > 0 iff the ReLU was active
                    delta = (0..layer.n_in)
                        .map(|i| {
                            if input[i] > 0.0 {
                                let row = &layer.w[i * layer.n_out..(i + 1) * layer.n_out];
                                row.iter().zip(&delta).map(|(w, d)| w * d).sum()
                            } else {
                                0.0
                            }
                        })
                        .collect();
                }
            }
        }
        Ok((loss, grad))
    }

    /// Mean squared error over a batch.
    pub fn loss<X: AsRef<[f64]>>(&self, batch: &[(X, f64)]) -> Result<f64> {
        let mut total = 0.0;
        for (x, y) in batch {
            let r = self.forward(x.as_ref())? - y;
            total += r * r;
        }
        Ok(total / batch.len().max(1) as f64)
    }

    /// `θ ← θ − lr·g`.
    pub fn sgd_step(&mut self, grad: &MlpParams, lr: f64) {
        for (p, g) in self.iter_mut().zip(grad.iter()) {
            *p -= lr * g;
        }
    }

    /// `self ← τ·online + (1−τ)·self`.
    pub fn soft_update(&mut self, online: &MlpParams, tau: f64) {
        if tau == 1.0 {
            self.clone_from(online);
            return;
        }
        if tau == 0.0 {
            return;
        }
        // written as t + τ(o − t) so equal parameters stay bit-identical
        for (t, o) in self.iter_mut().zip(online.iter()) {
            *t += tau * (o - *t);
        }
    }
}
