use crate::flow::FlowModel;

use super::TrainConfig;

/// First and second moments mirroring every parameter, plus the count of
/// applied updates.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: FlowModel<f32>,
    pub v: FlowModel<f32>,
    pub step: u64,
}

/// One bias-corrected Adam update on a flat slice. The arithmetic runs in
/// `f64` per element and is stored back as `f32`.
#[allow(clippy::too_many_arguments)]
pub fn adam_update(
    param: &mut [f32],
    grad: &[f32],
    m: &mut [f32],
    v: &mut [f32],
    step: u64,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
) {
    let bc1 = 1.0 - beta1.powf(step as f64);
    let bc2 = 1.0 - beta2.powf(step as f64);
    for i in 0..param.len() {
        let g = grad[i] as f64;
        let mi = beta1 * m[i] as f64 + (1.0 - beta1) * g;
        let vi = beta2 * v[i] as f64 + (1.0 - beta2) * g * g;
        m[i] = mi as f32;
        v[i] = vi as f32;
        let update = lr * (mi / bc1) / ((vi / bc2).sqrt() + eps);
        param[i] = (param[i] as f64 - update) as f32;
    }
}

impl AdamState {
    pub fn new(model: &FlowModel<f32>) -> Self {
        Self { m: model.zeros_like(), v: model.zeros_like(), step: 0 }
    }

    /// Applies one update to every parameter and increments `step`.
    pub fn apply(&mut self, model: &mut FlowModel<f32>, grads: &FlowModel<f32>, lr: f64, cfg: &TrainConfig) {
        self.step += 1;
        let step = self.step;
        let grads: Vec<&[f32]> = grads.named_parameters().into_iter().map(|(_, t)| t.data()).collect();
        let params = model.tensors_mut();
        let ms = self.m.tensors_mut();
        let vs = self.v.tensors_mut();
        for (((p, g), m), v) in params.into_iter().zip(grads).zip(ms).zip(vs) {
            adam_update(p.data_mut(), g, m.data_mut(), v.data_mut(), step, lr, cfg.beta1, cfg.beta2, cfg.adam_epsilon);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr_against_the_gradient() {
        for g in [3.0f32, -0.02, 1e-3, -250.0] {
            let (mut p, mut m, mut v) = ([1.0f32], [0.0f32], [0.0f32]);
            adam_update(&mut p, &[g], &mut m, &mut v, 1, 1e-4, 0.9, 0.999, 1e-8);
            let delta = p[0] as f64 - 1.0;
            assert_eq!(delta.signum(), -(g as f64).signum());
            assert!((delta.abs() - 1e-4).abs() < 1e-6, "{delta}");
        }
    }

    #[test]
    fn zero_gradient_is_a_no_op_on_fresh_state() {
        let (mut p, mut m, mut v) = ([0.5f32, -2.0], [0.0f32; 2], [0.0f32; 2]);
        adam_update(&mut p, &[0.0, 0.0], &mut m, &mut v, 1, 1e-4, 0.9, 0.999, 1e-8);
        assert_eq!(p, [0.5, -2.0]);
        assert_eq!((m, v), ([0.0; 2], [0.0; 2]));
    }

    #[test]
    fn constant_gradient_keeps_direction() {
        let (mut p, mut m, mut v) = ([0.0f32], [0.0f32], [0.0f32]);
        let mut prev = 0.0;
        for step in 1..=50 {
            adam_update(&mut p, &[0.7], &mut m, &mut v, step, 1e-3, 0.9, 0.999, 1e-8);
            assert!(p[0] < prev);
            prev = p[0];
        }
    }
}
