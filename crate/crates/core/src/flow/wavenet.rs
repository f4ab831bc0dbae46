//! The conditioning network inside each affine coupling layer.
//!
//! `start` lifts the pass-through channels to `wn_channels`. Each layer `i`
//! applies a dilated convolution (dilation `2^i`), adds a pointwise
//! projection of the upsampled mel, and gates the result with
//! `tanh(·) · σ(·)`. A pointwise `res_skip` projection feeds both the
//! residual stream and the skip sum (the last layer feeds only the skip
//! sum). `end` maps the skip sum to `log_s ∥ b` and starts at zero so a
//! fresh coupling is the identity.

use rand::Rng;

use crate::numerics::{
    dilated_conv1d_backward, dilated_conv1d_forward, gated_activation, gated_activation_backward, pointwise_conv,
    pointwise_conv_backward, Real, Tensor,
};

use super::FlowError;

#[derive(Clone, Debug, PartialEq)]
pub struct WnLayer<T> {
    pub in_weight: Tensor<T>,
    pub in_bias: Tensor<T>,
    pub cond_weight: Tensor<T>,
    pub cond_bias: Tensor<T>,
    pub res_skip_weight: Tensor<T>,
    pub res_skip_bias: Tensor<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WaveNet<T> {
    pub start_weight: Tensor<T>,
    pub start_bias: Tensor<T>,
    pub layers: Vec<WnLayer<T>>,
    pub end_weight: Tensor<T>,
    pub end_bias: Tensor<T>,
}

/// Activations saved by the forward pass for backward.
#[derive(Clone, Debug)]
pub struct WnCache<T> {
    input: Tensor<T>,
    /// Residual stream entering each layer.
    hidden: Vec<Tensor<T>>,
    gate_a: Vec<Tensor<T>>,
    gate_b: Vec<Tensor<T>>,
    acts: Vec<Tensor<T>>,
    skip: Tensor<T>,
}

fn uniform<T: Real, R: Rng + ?Sized>(shape: &[usize], bound: f64, rng: &mut R) -> Tensor<T> {
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| T::lit(rng.random_range(-bound..=bound))).collect();
    Tensor::from_vec(shape, data).expect("shape matches data")
}

pub(crate) fn dilation(layer: usize) -> usize {
    1usize << layer
}

impl<T: Real> WaveNet<T> {
    /// Uniform `±1/√fan_in` for every weight and bias except the zeroed
    /// `end` projection.
    pub fn new<R: Rng + ?Sized>(
        n_in: usize,
        n_out: usize,
        n_mels: usize,
        layers: usize,
        channels: usize,
        kernel: usize,
        rng: &mut R,
    ) -> Self {
        let h = channels;
        let b_start = 1.0 / (n_in as f64).sqrt();
        let start_weight = uniform(&[h, n_in], b_start, rng);
        let start_bias = uniform(&[h], b_start, rng);
        let layers = (0..layers)
            .map(|i| {
                let b_in = 1.0 / ((h * kernel) as f64).sqrt();
                let b_cond = 1.0 / (n_mels as f64).sqrt();
                let b_rs = 1.0 / (h as f64).sqrt();
                let rs_out = if i + 1 < layers { 2 * h } else { h };
                WnLayer {
                    in_weight: uniform(&[2 * h, h, kernel], b_in, rng),
                    in_bias: uniform(&[2 * h], b_in, rng),
                    cond_weight: uniform(&[2 * h, n_mels], b_cond, rng),
                    cond_bias: uniform(&[2 * h], b_cond, rng),
                    res_skip_weight: uniform(&[rs_out, h], b_rs, rng),
                    res_skip_bias: uniform(&[rs_out], b_rs, rng),
                }
            })
            .collect();
        Self {
            start_weight,
            start_bias,
            layers,
            end_weight: Tensor::zeros(&[2 * n_out, h]),
            end_bias: Tensor::zeros(&[2 * n_out]),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let z = |t: &Tensor<T>| Tensor::zeros(t.shape());
        Self {
            start_weight: z(&self.start_weight),
            start_bias: z(&self.start_bias),
            layers: self
                .layers
                .iter()
                .map(|l| WnLayer {
                    in_weight: z(&l.in_weight),
                    in_bias: z(&l.in_bias),
                    cond_weight: z(&l.cond_weight),
                    cond_bias: z(&l.cond_bias),
                    res_skip_weight: z(&l.res_skip_weight),
                    res_skip_bias: z(&l.res_skip_bias),
                })
                .collect(),
            end_weight: z(&self.end_weight),
            end_bias: z(&self.end_bias),
        }
    }

    pub fn hidden_channels(&self) -> usize {
        self.start_weight.dims2().0
    }

    /// Channels of `log_s` (and of `b`).
    pub fn n_out(&self) -> usize {
        self.end_weight.dims2().0 / 2
    }

    pub fn kernel(&self) -> usize {
        self.layers.first().map_or(1, |l| l.in_weight.shape()[2])
    }

    /// `(name, tensor)` pairs in a fixed order.
    pub fn named(&self, prefix: &str) -> Vec<(String, &Tensor<T>)> {
        let mut out = vec![
            (format!("{prefix}.start.weight"), &self.start_weight),
            (format!("{prefix}.start.bias"), &self.start_bias),
        ];
        for (i, l) in self.layers.iter().enumerate() {
            out.push((format!("{prefix}.layers.{i}.in.weight"), &l.in_weight));
            out.push((format!("{prefix}.layers.{i}.in.bias"), &l.in_bias));
            out.push((format!("{prefix}.layers.{i}.cond.weight"), &l.cond_weight));
            out.push((format!("{prefix}.layers.{i}.cond.bias"), &l.cond_bias));
            out.push((format!("{prefix}.layers.{i}.res_skip.weight"), &l.res_skip_weight));
            out.push((format!("{prefix}.layers.{i}.res_skip.bias"), &l.res_skip_bias));
        }
        out.push((format!("{prefix}.end.weight"), &self.end_weight));
        out.push((format!("{prefix}.end.bias"), &self.end_bias));
        out
    }

    /// Mutable tensors in the same order as [`named`](Self::named).
    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = vec![&mut self.start_weight, &mut self.start_bias];
        for l in &mut self.layers {
            out.push(&mut l.in_weight);
            out.push(&mut l.in_bias);
            out.push(&mut l.cond_weight);
            out.push(&mut l.cond_bias);
            out.push(&mut l.res_skip_weight);
            out.push(&mut l.res_skip_bias);
        }
        out.push(&mut self.end_weight);
        out.push(&mut self.end_bias);
        out
    }

    /// Returns the `2·n_out × T` output (`log_s` rows first, then `b`).
    pub fn forward(&self, input: &Tensor<T>, cond: &Tensor<T>) -> Result<Tensor<T>, FlowError> {
        Ok(self.run(input, cond, false)?.0)
    }

    pub fn forward_cached(&self, input: &Tensor<T>, cond: &Tensor<T>) -> Result<(Tensor<T>, WnCache<T>), FlowError> {
        let (out, cache) = self.run(input, cond, true)?;
        Ok((out, cache.expect("cache requested")))
    }

    fn run(&self, input: &Tensor<T>, cond: &Tensor<T>, keep: bool) -> Result<(Tensor<T>, Option<WnCache<T>>), FlowError> {
        let h = self.hidden_channels();
        let frames = input.dims2().1;
        if cond.dims2().1 != frames {
            return Err(FlowError::ShapeMismatch(format!(
                "conditioning has {} frames, audio has {frames}",
                cond.dims2().1
            )));
        }
        let runs = ColumnRuns::new(cond);
        let mut hidden = pointwise_conv(input, &self.start_weight, Some(&self.start_bias))?;
        let mut skip = Tensor::zeros(&[h, frames]);
        let n_layers = self.layers.len();
        let mut cache_hidden = Vec::new();
        let (mut cache_a, mut cache_b, mut cache_acts) = (Vec::new(), Vec::new(), Vec::new());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut pre = dilated_conv1d_forward(&hidden, &layer.in_weight, &layer.in_bias, dilation(i))?;
            let c = pointwise_conv(&runs.distinct, &layer.cond_weight, Some(&layer.cond_bias))?;
            runs.add_expanded(&c, &mut pre);
            let a = pre.rows_range(0, h);
            let b = pre.rows_range(h, 2 * h);
            let acts = gated_activation(&a, &b)?;
            let rs = pointwise_conv(&acts, &layer.res_skip_weight, Some(&layer.res_skip_bias))?;
            let next = if i + 1 < n_layers {
                skip.accumulate(&rs.rows_range(h, 2 * h))?;
                let mut nh = hidden.clone();
                nh.accumulate(&rs.rows_range(0, h))?;
                Some(nh)
            } else {
                skip.accumulate(&rs)?;
                None
            };
            if keep {
                cache_a.push(a);
                cache_b.push(b);
                cache_acts.push(acts);
            }
            if let Some(nh) = next {
                let prev = std::mem::replace(&mut hidden, nh);
                if keep {
                    cache_hidden.push(prev);
                }
            } else if keep {
                cache_hidden.push(hidden.clone());
            }
        }
        let out = pointwise_conv(&skip, &self.end_weight, Some(&self.end_bias))?;
        let cache = keep.then(|| WnCache {
            input: input.clone(),
            hidden: cache_hidden,
            gate_a: cache_a,
            gate_b: cache_b,
            acts: cache_acts,
            skip,
        });
        Ok((out, cache))
    }

    /// Accumulates parameter gradients into `grads` and returns `∂L/∂input`.
    pub fn backward(
        &self,
        grad_out: &Tensor<T>,
        cache: &WnCache<T>,
        cond: &Tensor<T>,
        grads: &mut WaveNet<T>,
    ) -> Result<Tensor<T>, FlowError> {
        let h = self.hidden_channels();
        let frames = cache.input.dims2().1;
        let runs = ColumnRuns::new(cond);
        let g_end = pointwise_conv_backward(grad_out, &cache.skip, &self.end_weight)?;
        grads.end_weight.accumulate(&g_end.weight)?;
        grads.end_bias.accumulate(&g_end.bias)?;
        let grad_skip = g_end.input;
        // Gradient flowing into the residual stream leaving layer i.
        let mut grad_hidden = Tensor::zeros(&[h, frames]);
        let n_layers = self.layers.len();
        for i in (0..n_layers).rev() {
            let layer = &self.layers[i];
            let gl = &mut grads.layers[i];
            let grad_rs = if i + 1 < n_layers {
                Tensor::concat_rows(&[&grad_hidden, &grad_skip])?
            } else {
                grad_skip.clone()
            };
            let g_rs = pointwise_conv_backward(&grad_rs, &cache.acts[i], &layer.res_skip_weight)?;
            gl.res_skip_weight.accumulate(&g_rs.weight)?;
            gl.res_skip_bias.accumulate(&g_rs.bias)?;
            let (ga, gb) = gated_activation_backward(&g_rs.input, &cache.gate_a[i], &cache.gate_b[i])?;
            let grad_pre = Tensor::concat_rows(&[&ga, &gb])?;
            let g_cond = pointwise_conv_backward(&runs.reduce(&grad_pre), &runs.distinct, &layer.cond_weight)?;
            gl.cond_weight.accumulate(&g_cond.weight)?;
            gl.cond_bias.accumulate(&g_cond.bias)?;
            let g_in = dilated_conv1d_backward(&grad_pre, &cache.hidden[i], &layer.in_weight, dilation(i))?;
            gl.in_weight.accumulate(&g_in.weight)?;
            gl.in_bias.accumulate(&g_in.bias)?;
            // The residual connection passes grad_hidden straight through;
            // the last layer has no residual output.
            if i + 1 < n_layers {
                grad_hidden.accumulate(&g_in.input)?;
            } else {
                grad_hidden = g_in.input;
            }
        }
        let g_start = pointwise_conv_backward(&grad_hidden, &cache.input, &self.start_weight)?;
        grads.start_weight.accumulate(&g_start.weight)?;
        grads.start_bias.accumulate(&g_start.bias)?;
        Ok(g_start.input)
    }
}

/// Upsampled conditioning repeats each mel frame over many steps, so the
/// projections run on the distinct columns and are expanded afterwards.
struct ColumnRuns<T> {
    distinct: Tensor<T>,
    /// Distinct-column index for every step.
    index: Vec<usize>,
}

impl<T: Real> ColumnRuns<T> {
    fn new(cond: &Tensor<T>) -> Self {
        let (rows, steps) = cond.dims2();
        let d = cond.data();
        let mut index = Vec::with_capacity(steps);
        let mut starts = Vec::new();
        for t in 0..steps {
            let repeat = t > 0 && (0..rows).all(|r| d[r * steps + t] == d[r * steps + t - 1]);
            if !repeat {
                starts.push(t);
            }
            index.push(starts.len() - 1);
        }
        let n = starts.len();
        let mut distinct = Vec::with_capacity(rows * n);
        for r in 0..rows {
            distinct.extend(starts.iter().map(|&t| d[r * steps + t]));
        }
        let distinct = Tensor::from_vec(&[rows, n], distinct).expect("sizes agree");
        Self { distinct, index }
    }

    fn add_expanded(&self, projected: &Tensor<T>, out: &mut Tensor<T>) {
        let n = projected.dims2().1;
        let steps = self.index.len();
        for (row, src) in out.data_mut().chunks_mut(steps).zip(projected.data().chunks(n)) {
            for (v, &j) in row.iter_mut().zip(&self.index) {
                *v += src[j];
            }
        }
    }

    /// Adjoint of the expansion: sums each run of step gradients.
    fn reduce(&self, grad: &Tensor<T>) -> Tensor<T> {
        let rows = grad.dims2().0;
        let n = self.distinct.dims2().1;
        let mut out = Tensor::zeros(&[rows, n]);
        for (dst, row) in out.data_mut().chunks_mut(n).zip(grad.data().chunks(self.index.len())) {
            for (&g, &j) in row.iter().zip(&self.index) {
                dst[j] += g;
            }
        }
        out
    }
}
