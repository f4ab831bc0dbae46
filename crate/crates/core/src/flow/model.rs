use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

use crate::dsp::MelSpectrogram;
use crate::numerics::linalg::orthogonalize;
use crate::numerics::{Real, Tensor};

use super::coupling::{coupling_backward, coupling_forward, coupling_forward_cached, coupling_inverse, split_point, CouplingCache};
use super::invconv::{invconv_backward, invconv_forward, invconv_inverse};
use super::squeeze::{squeeze, unsqueeze, upsample_condition};
use super::wavenet::WaveNet;
use super::{FlowConfig, FlowError};

/// One flow: a 1×1 convolution followed by an affine coupling.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowStep<T> {
    pub invconv: Tensor<T>,
    pub coupling: WaveNet<T>,
}

/// All learnable parameters plus the topology they were built for.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowModel<T> {
    config: FlowConfig,
    steps: Vec<FlowStep<T>>,
}

/// Latent image of a segment plus both log-determinant sums.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardResult<T> {
    /// `group_size × frames`, latent chunks stacked in emission order.
    pub z: Tensor<T>,
    /// `Σ log_s` over every coupling output.
    pub sum_log_s: f64,
    /// `Σ_k frames · ln |det W_k|`.
    pub sum_log_det_w: f64,
}

/// Activations kept by [`FlowModel::forward_cached`].
#[derive(Clone, Debug)]
pub struct ForwardCache<T> {
    cond: Tensor<T>,
    invconv_inputs: Vec<Tensor<T>>,
    couplings: Vec<CouplingCache<T>>,
}

impl<T: Real> FlowModel<T> {
    /// Random orthogonal `W_k` with determinant `+1`, uniform coupling
    /// interiors and zeroed coupling outputs.
    pub fn new<R: Rng + ?Sized>(config: FlowConfig, rng: &mut R) -> Result<Self, FlowError> {
        config.validate()?;
        let steps = config
            .live_channels()
            .into_iter()
            .map(|c| {
                let gauss: Vec<f64> = (0..c * c).map(|_| rng.sample(StandardNormal)).collect();
                let w = orthogonalize(&gauss, c);
                let half = split_point(c);
                FlowStep {
                    invconv: Tensor::from_vec(&[c, c], w.into_iter().map(T::lit).collect()).expect("square"),
                    coupling: WaveNet::new(
                        half,
                        c - half,
                        config.n_mel_channels,
                        config.wn_layers,
                        config.wn_channels,
                        config.wn_kernel,
                        rng,
                    ),
                }
            })
            .collect();
        Ok(Self { config, steps })
    }

    /// Identity `W_k` and zeroed coupling outputs: the whole stack is a
    /// permutation of the squeezed input.
    pub fn identity<R: Rng + ?Sized>(config: FlowConfig, rng: &mut R) -> Result<Self, FlowError> {
        let mut model = Self::new(config, rng)?;
        for step in &mut model.steps {
            let c = step.invconv.dims2().0;
            step.invconv.set_zero();
            for i in 0..c {
                step.invconv.data_mut()[i * c + i] = T::one();
            }
        }
        Ok(model)
    }

    /// Rebuilds a model from named tensors, checking names and shapes.
    pub fn from_named(config: FlowConfig, tensors: Vec<(String, Tensor<T>)>) -> Result<Self, FlowError> {
        let mut model = Self::zeros(config)?;
        let expected: Vec<(String, Vec<usize>)> =
            model.named_parameters().into_iter().map(|(n, t)| (n, t.shape().to_vec())).collect();
        if expected.len() != tensors.len() {
            return Err(FlowError::ShapeMismatch(format!(
                "config needs {} parameter tensors, got {}",
                expected.len(),
                tensors.len()
            )));
        }
        for ((name, shape), (got_name, got)) in expected.iter().zip(&tensors) {
            if name != got_name || shape.as_slice() != got.shape() {
                return Err(FlowError::ShapeMismatch(format!(
                    "expected {name} {shape:?}, got {got_name} {:?}",
                    got.shape()
                )));
            }
        }
        for (slot, (_, t)) in model.tensors_mut().into_iter().zip(tensors) {
            *slot = t;
        }
        for (k, step) in model.steps.iter().enumerate() {
            super::invconv::log_abs_det(&step.invconv).map_err(|e| match e {
                FlowError::SingularW { det } => FlowError::SingularAt { flow: k, det },
                other => other,
            })?;
        }
        Ok(model)
    }

    fn zeros(config: FlowConfig) -> Result<Self, FlowError> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let mut m = Self::new(config, &mut rng)?;
        m.zero();
        Ok(m)
    }

    /// Moves a model away from its identity-at-init point: uniform noise of
    /// `±scale/√fan_in` on every coupling output layer and `±scale/√C` on
    /// every `W_k`. Used by the invariant checks, which are vacuous at init.
    pub fn perturb<R: Rng + ?Sized>(&mut self, scale: f64, rng: &mut R) {
        let mut jitter = |t: &mut Tensor<T>, bound: f64| {
            for v in t.data_mut() {
                *v += T::lit(rng.random_range(-bound..=bound));
            }
        };
        for step in &mut self.steps {
            let c = step.invconv.dims2().0;
            jitter(&mut step.invconv, scale / (c as f64).sqrt());
            let h = step.coupling.hidden_channels() as f64;
            jitter(&mut step.coupling.end_weight, scale / h.sqrt());
            jitter(&mut step.coupling.end_bias, scale / h.sqrt());
        }
    }

    pub fn config(&self) -> &FlowConfig {
        &self.config
    }

    pub fn steps(&self) -> &[FlowStep<T>] {
        &self.steps
    }

    pub fn steps_mut(&mut self) -> &mut [FlowStep<T>] {
        &mut self.steps
    }

    /// Same shapes, every entry zero. Used as the gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        Self {
            config: self.config,
            steps: self
                .steps
                .iter()
                .map(|s| FlowStep { invconv: Tensor::zeros(s.invconv.shape()), coupling: s.coupling.zeros_like() })
                .collect(),
        }
    }

    /// Resets every tensor to zero (for a gradient accumulator, this is
    /// `zero_grad`).
    pub fn zero(&mut self) {
        self.tensors_mut().into_iter().for_each(Tensor::set_zero);
    }

    pub fn cast<U: Real>(&self) -> FlowModel<U> {
        FlowModel {
            config: self.config,
            steps: self
                .steps
                .iter()
                .map(|s| FlowStep { invconv: s.invconv.cast(), coupling: s.coupling.cast() })
                .collect(),
        }
    }

    /// Every parameter tensor with its stable name, in checkpoint order.
    pub fn named_parameters(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        for (k, s) in self.steps.iter().enumerate() {
            out.push((format!("flows.{k}.invconv.weight"), &s.invconv));
            out.extend(s.coupling.named(&format!("flows.{k}.wn")));
        }
        out
    }

    /// Mutable tensors in [`named_parameters`](Self::named_parameters) order.
    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = Vec::new();
        for s in &mut self.steps {
            out.push(&mut s.invconv);
            out.extend(s.coupling.tensors_mut());
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.named_parameters().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.named_parameters().iter().all(|(_, t)| t.all_finite())
    }

    /// Squeezes `segment` and upsamples `mel` to match.
    pub fn prepare(&self, segment: &[T], mel: &MelSpectrogram) -> Result<(Tensor<T>, Tensor<T>), FlowError> {
        let x = squeeze(segment, self.config.group_size)?;
        let cond = self.condition(mel, x.dims2().1)?;
        Ok((x, cond))
    }

    pub fn condition(&self, mel: &MelSpectrogram, frames: usize) -> Result<Tensor<T>, FlowError> {
        if mel.n_mels != self.config.n_mel_channels {
            return Err(FlowError::ShapeMismatch(format!(
                "model expects {} mel channels, features have {}",
                self.config.n_mel_channels, mel.n_mels
            )));
        }
        upsample_condition(mel, frames, self.config.group_size)
    }

    /// Maps a segment to its latent image.
    pub fn forward(&self, segment: &[T], mel: &MelSpectrogram) -> Result<ForwardResult<T>, FlowError> {
        let (x, cond) = self.prepare(segment, mel)?;
        self.forward_squeezed(&x, &cond)
    }

    /// [`forward`](Self::forward) on an already squeezed input.
    pub fn forward_squeezed(&self, x: &Tensor<T>, cond: &Tensor<T>) -> Result<ForwardResult<T>, FlowError> {
        Ok(self.run(x, cond, false)?.0)
    }

    pub fn forward_cached(&self, x: &Tensor<T>, cond: &Tensor<T>) -> Result<(ForwardResult<T>, ForwardCache<T>), FlowError> {
        let (fr, cache) = self.run(x, cond, true)?;
        Ok((fr, cache.expect("cache requested")))
    }

    fn run(&self, x: &Tensor<T>, cond: &Tensor<T>, keep: bool) -> Result<(ForwardResult<T>, Option<ForwardCache<T>>), FlowError> {
        if x.dims2().0 != self.config.group_size {
            return Err(FlowError::ShapeMismatch(format!(
                "input has {} channels, model groups {}",
                x.dims2().0,
                self.config.group_size
            )));
        }
        let mut live = x.clone();
        let mut emitted: Vec<Tensor<T>> = Vec::new();
        let (mut sum_log_s, mut sum_log_det_w) = (0.0, 0.0);
        let mut inputs = Vec::new();
        let mut caches = Vec::new();
        for (k, step) in self.steps.iter().enumerate() {
            if self.config.emits_before(k) {
                let c = live.dims2().0;
                emitted.push(live.rows_range(0, self.config.early_size));
                live = live.rows_range(self.config.early_size, c);
            }
            let (mixed, log_det) = invconv_forward(&live, &step.invconv).map_err(|e| e.at_flow(k))?;
            sum_log_det_w += log_det;
            if keep {
                inputs.push(std::mem::replace(&mut live, mixed));
                let (y, s, cache) = coupling_forward_cached(&live, cond, &step.coupling)?;
                caches.push(cache);
                live = y;
                sum_log_s += s;
            } else {
                let (y, s) = coupling_forward(&mixed, cond, &step.coupling)?;
                live = y;
                sum_log_s += s;
            }
        }
        emitted.push(live);
        let parts: Vec<&Tensor<T>> = emitted.iter().collect();
        let z = Tensor::concat_rows(&parts)?;
        if !(sum_log_s.is_finite() && sum_log_det_w.is_finite()) {
            return Err(FlowError::NonFinite("log-determinant sum".into()));
        }
        let cache = keep.then(|| ForwardCache { cond: cond.clone(), invconv_inputs: inputs, couplings: caches });
        Ok((ForwardResult { z, sum_log_s, sum_log_det_w }, cache))
    }

    /// Backpropagates `∂L/∂z`, `∂L/∂(Σ log_s)` and `∂L/∂(Σ ln|det W|)`
    /// through the stack. Parameter gradients are added into `grads`; the
    /// return value is `∂L/∂x` for the squeezed input.
    pub fn backward(
        &self,
        cache: &ForwardCache<T>,
        grad_z: &Tensor<T>,
        grad_sum_log_s: T,
        grad_sum_log_det_w: T,
        grads: &mut FlowModel<T>,
    ) -> Result<Tensor<T>, FlowError> {
        let sizes = self.config.emission_sizes();
        let mut chunks = Vec::with_capacity(sizes.len());
        let mut row = 0;
        for &s in &sizes {
            chunks.push(grad_z.rows_range(row, row + s));
            row += s;
        }
        let mut grad = chunks.pop().expect("final chunk");
        for k in (0..self.steps.len()).rev() {
            let step = &self.steps[k];
            let gstep = &mut grads.steps[k];
            grad = coupling_backward(&grad, grad_sum_log_s, &cache.couplings[k], &cache.cond, &step.coupling, &mut gstep.coupling)?;
            let (gx, gw) = invconv_backward(&grad, &cache.invconv_inputs[k], &step.invconv, grad_sum_log_det_w)?;
            gstep.invconv.accumulate(&gw)?;
            grad = gx;
            if self.config.emits_before(k) {
                let early = chunks.pop().expect("emitted chunk");
                grad = Tensor::concat_rows(&[&early, &grad])?;
            }
        }
        Ok(grad)
    }

    /// Inverse of [`forward_squeezed`](Self::forward_squeezed): latent back
    /// to the squeezed signal.
    pub fn inverse_squeezed(&self, z: &Tensor<T>, cond: &Tensor<T>) -> Result<Tensor<T>, FlowError> {
        let (rows, frames) = z.dims2();
        if rows != self.config.group_size || cond.dims2().1 != frames {
            return Err(FlowError::ShapeMismatch(format!(
                "latent is {rows}x{frames}, expected {} rows and {} frames",
                self.config.group_size,
                cond.dims2().1
            )));
        }
        let sizes = self.config.emission_sizes();
        let mut chunks = Vec::with_capacity(sizes.len());
        let mut row = 0;
        for &s in &sizes {
            chunks.push(z.rows_range(row, row + s));
            row += s;
        }
        let mut x = chunks.pop().expect("final chunk");
        for k in (0..self.steps.len()).rev() {
            let step = &self.steps[k];
            x = coupling_inverse(&x, cond, &step.coupling).map_err(|e| e.at_flow(k))?;
            x = invconv_inverse(&x, &step.invconv).map_err(|e| e.at_flow(k))?;
            if self.config.emits_before(k) {
                let early = chunks.pop().expect("emitted chunk");
                x = Tensor::concat_rows(&[&early, &x])?;
            }
        }
        Ok(x)
    }

    /// Latent plus mel back to audio samples.
    pub fn inverse(&self, z: &Tensor<T>, mel: &MelSpectrogram) -> Result<Vec<T>, FlowError> {
        let cond = self.condition(mel, z.dims2().1)?;
        Ok(unsqueeze(&self.inverse_squeezed(z, &cond)?))
    }
}

impl<T: Real> WaveNet<T> {
    pub fn cast<U: Real>(&self) -> WaveNet<U> {
        WaveNet {
            start_weight: self.start_weight.cast(),
            start_bias: self.start_bias.cast(),
            layers: self
                .layers
                .iter()
                .map(|l| super::wavenet::WnLayer {
                    in_weight: l.in_weight.cast(),
                    in_bias: l.in_bias.cast(),
                    cond_weight: l.cond_weight.cast(),
                    cond_bias: l.cond_bias.cast(),
                    res_skip_weight: l.res_skip_weight.cast(),
                    res_skip_bias: l.res_skip_bias.cast(),
                })
                .collect(),
            end_weight: self.end_weight.cast(),
            end_bias: self.end_bias.cast(),
        }
    }
}

