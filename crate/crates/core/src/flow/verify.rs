//! Self-checks for a model: exact invertibility, the change-of-variables
//! log-determinant, and analytic loss gradients. Each returns its worst
//! discrepancy next to a fixed tolerance.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::numerics::linalg::Lu;
use crate::numerics::{grad_check_coords, Real, Tensor};

use super::{loss_and_grad, negative_log_likelihood, FlowError, FlowModel};

pub const ROUNDTRIP_TOLERANCE: f64 = 1e-4;
pub const JACOBIAN_TOLERANCE: f64 = 1e-3;
pub const GRAD_TOLERANCE: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckMode {
    Roundtrip,
    Jacobian,
    Grad,
}

impl CheckMode {
    pub const ALL: [CheckMode; 3] = [CheckMode::Roundtrip, CheckMode::Jacobian, CheckMode::Grad];

    pub fn name(self) -> &'static str {
        match self {
            CheckMode::Roundtrip => "roundtrip",
            CheckMode::Jacobian => "jacobian",
            CheckMode::Grad => "grad",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport {
    pub mode: CheckMode,
    pub max_error: f64,
    pub tolerance: f64,
    /// Where the worst error occurred.
    pub worst_at: String,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.max_error <= self.tolerance
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<9} max_error {:.3e} tolerance {:.0e} {} ({})",
            self.mode.name(),
            self.max_error,
            self.tolerance,
            if self.passed() { "ok" } else { "FAILED" },
            self.worst_at
        )
    }
}

fn uniform<T: Real>(shape: &[usize], bound: f64, rng: &mut ChaCha8Rng) -> Tensor<T> {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| T::lit(rng.random_range(-bound..=bound))).collect()).expect("sizes agree")
}

/// Conditioning that looks like log-mel features: each frame constant over
/// `repeat` steps.
fn mel_like<T: Real>(n_mels: usize, steps: usize, rng: &mut ChaCha8Rng) -> Tensor<T> {
    let repeat = 4;
    let frames = steps.div_ceil(repeat);
    let base: Vec<f64> = (0..n_mels * frames).map(|_| rng.random_range(-11.5..2.0)).collect();
    let data = (0..n_mels).flat_map(|m| (0..steps).map(|t| T::lit(base[m * frames + t / repeat])).collect::<Vec<_>>());
    Tensor::from_vec(&[n_mels, steps], data.collect()).expect("sizes agree")
}

/// Forward then inverse on random 32-bit inputs, `draws` times.
pub fn check_roundtrip(model: &FlowModel<f32>, frames: usize, draws: usize, seed: u64) -> Result<CheckReport, FlowError> {
    let cfg = model.config();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = (f64::NEG_INFINITY, String::new());
    for d in 0..draws.max(1) {
        let x = uniform::<f32>(&[cfg.group_size, frames], 1.0, &mut rng);
        let cond = mel_like::<f32>(cfg.n_mel_channels, frames, &mut rng);
        let fr = model.forward_squeezed(&x, &cond)?;
        let err = model.inverse_squeezed(&fr.z, &cond)?.max_abs_diff(&x) as f64;
        if !(err <= worst.0) {
            worst = (err, format!("draw {d}"));
        }
    }
    Ok(CheckReport { mode: CheckMode::Roundtrip, max_error: worst.0, tolerance: ROUNDTRIP_TOLERANCE, worst_at: worst.1 })
}

/// `|a - b| / max(|a|, |b|, 1)`: relative for large values, absolute near
/// zero, where a fresh model's log-determinant sits.
fn rel_or_abs(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// `ln |det J|` of the forward map from central differences.
pub fn numerical_log_det(model: &FlowModel<f64>, x: &Tensor<f64>, cond: &Tensor<f64>) -> Result<f64, FlowError> {
    let n = x.len();
    let eps = 1e-6;
    let mut jac = vec![0.0; n * n];
    for j in 0..n {
        let mut up = x.clone();
        up.data_mut()[j] += eps;
        let mut down = x.clone();
        down.data_mut()[j] -= eps;
        let zu = model.forward_squeezed(&up, cond)?.z;
        let zd = model.forward_squeezed(&down, cond)?.z;
        for i in 0..n {
            jac[i * n + j] = (zu.data()[i] - zd.data()[i]) / (2.0 * eps);
        }
    }
    Lu::new(&jac, n).map(|lu| lu.log_abs_det()).ok_or(FlowError::SingularW { det: 0.0 })
}

/// Compares `Σ log s + Σ log |det W|` with the numerical Jacobian on inputs
/// of at most 64 entries, in 64-bit arithmetic.
pub fn check_jacobian(model: &FlowModel<f32>, draws: usize, seed: u64) -> Result<CheckReport, FlowError> {
    let model = model.cast::<f64>();
    let cfg = *model.config();
    let frames = (64 / cfg.group_size).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = (f64::NEG_INFINITY, String::new());
    for d in 0..draws.max(1) {
        let x = uniform::<f64>(&[cfg.group_size, frames], 1.0, &mut rng);
        let cond = mel_like::<f64>(cfg.n_mel_channels, frames, &mut rng);
        let fr = model.forward_squeezed(&x, &cond)?;
        let analytic = fr.sum_log_s + fr.sum_log_det_w;
        let numeric = numerical_log_det(&model, &x, &cond)?;
        let err = rel_or_abs(analytic, numeric);
        if !(err <= worst.0) {
            worst = (err, format!("draw {d}: analytic {analytic:.6} numeric {numeric:.6}"));
        }
    }
    Ok(CheckReport { mode: CheckMode::Jacobian, max_error: worst.0, tolerance: JACOBIAN_TOLERANCE, worst_at: worst.1 })
}

/// Parameter class: the tensor name with flow and layer indices blanked.
fn class_of(name: &str) -> String {
    name.split('.').map(|part| if part.parse::<usize>().is_ok() { "*" } else { part }).collect::<Vec<_>>().join(".")
}

/// Finite-difference check of the loss gradient in 64-bit arithmetic.
/// Every parameter class gets at least one probe; `probes` bounds the
/// total beyond that.
pub fn check_grad(model: &FlowModel<f32>, probes: usize, seed: u64) -> Result<CheckReport, FlowError> {
    let model = model.cast::<f64>();
    let cfg = *model.config();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frames = 4;
    let x = uniform::<f64>(&[cfg.group_size, frames], 1.0, &mut rng);
    let cond = mel_like::<f64>(cfg.n_mel_channels, frames, &mut rng);
    let mut grads = model.zeros_like();
    loss_and_grad(&model, &x, &cond, 1.0, 1.0, &mut grads)?;

    let names: Vec<String> = model.named_parameters().into_iter().map(|(n, _)| n).collect();
    let mut classes: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, n) in names.iter().enumerate() {
        classes.entry(class_of(n)).or_default().push(i);
    }
    let class_list: Vec<&Vec<usize>> = classes.values().collect();
    let mut chosen: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for p in 0..probes.max(class_list.len()) {
        let tensor = *class_list[p % class_list.len()].choose(&mut rng).expect("classes are non-empty");
        let len = model.named_parameters()[tensor].1.len();
        chosen.entry(tensor).or_default().push(rng.random_range(0..len));
    }

    let analytic: Vec<Vec<f64>> = grads.named_parameters().into_iter().map(|(_, t)| t.data().to_vec()).collect();
    let mut worst = (f64::NEG_INFINITY, String::new());
    let mut work = model.clone();
    for (tensor, coords) in chosen {
        let base = model.named_parameters()[tensor].1.data().to_vec();
        let mut failure = None;
        let err = grad_check_coords(
            |p| {
                work.tensors_mut()[tensor].data_mut().copy_from_slice(p);
                match work.forward_squeezed(&x, &cond).and_then(|fr| negative_log_likelihood(&fr, 1.0)) {
                    Ok(l) => l.total,
                    Err(e) => {
                        failure = Some(e);
                        f64::NAN
                    }
                }
            },
            &analytic[tensor],
            &base,
            &coords,
            1e-5,
        );
        work.tensors_mut()[tensor].data_mut().copy_from_slice(&base);
        if let Some(e) = failure {
            return Err(e);
        }
        if !(err <= worst.0) {
            worst = (err, names[tensor].clone());
        }
    }
    Ok(CheckReport { mode: CheckMode::Grad, max_error: worst.0, tolerance: GRAD_TOLERANCE, worst_at: worst.1 })
}
