use crate::numerics::{Real, Tensor};

use super::{FlowError, FlowModel, ForwardResult};

/// The three likelihood summands, each divided by the number of latent
/// entries, and their combination.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossBreakdown {
    /// `Σ z² / (2σ²) / n`
    pub z_term: f64,
    /// `Σ log_s / n`
    pub log_s_term: f64,
    /// `Σ_k T·ln|det W_k| / n`
    pub log_det_w_term: f64,
    /// `z_term - log_s_term - log_det_w_term`
    pub total: f64,
    /// Latent entry count `n` used for normalisation.
    pub n_entries: usize,
}

impl LossBreakdown {
    /// `ln p(x | mel)` for the whole segment, including the Gaussian
    /// normalising constant the loss leaves out.
    pub fn log_likelihood(&self, sigma: f64) -> f64 {
        let n = self.n_entries as f64;
        -(self.total * n) - 0.5 * n * (2.0 * std::f64::consts::PI * sigma * sigma).ln()
    }

    /// Mean of several breakdowns, term by term.
    pub fn mean(items: &[LossBreakdown]) -> LossBreakdown {
        let k = items.len().max(1) as f64;
        let avg = |f: fn(&LossBreakdown) -> f64| items.iter().map(f).sum::<f64>() / k;
        LossBreakdown {
            z_term: avg(|l| l.z_term),
            log_s_term: avg(|l| l.log_s_term),
            log_det_w_term: avg(|l| l.log_det_w_term),
            total: avg(|l| l.total),
            n_entries: items.iter().map(|l| l.n_entries).sum(),
        }
    }
}

/// Negative log-likelihood of a forward pass under an isotropic Gaussian of
/// standard deviation `sigma`, per latent entry, without the constant
/// `(n/2)·ln(2πσ²)`. Minimising it maximises
/// `ln p(z) + Σ log_s + Σ T·ln|det W|`.
pub fn negative_log_likelihood<T: Real>(fr: &ForwardResult<T>, sigma: f64) -> Result<LossBreakdown, FlowError> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(FlowError::InvalidSigma(sigma));
    }
    let n = fr.z.len();
    if n == 0 {
        return Err(FlowError::ShapeMismatch("empty latent".into()));
    }
    let nf = n as f64;
    let sq: f64 = fr.z.data().iter().map(|v| v.as_f64() * v.as_f64()).sum();
    let z_term = sq / (2.0 * sigma * sigma) / nf;
    let log_s_term = fr.sum_log_s / nf;
    let log_det_w_term = fr.sum_log_det_w / nf;
    let total = z_term - log_s_term - log_det_w_term;
    if ![z_term, log_s_term, log_det_w_term, total].iter().all(|v| v.is_finite()) {
        return Err(FlowError::NonFinite("loss".into()));
    }
    Ok(LossBreakdown { z_term, log_s_term, log_det_w_term, total, n_entries: n })
}

/// Forward pass, loss, and backward pass on one squeezed segment.
///
/// Gradients of `weight · total` are added into `grads`, so averaging a
/// batch of `B` segments uses `weight = 1/B`.
pub fn loss_and_grad<T: Real>(
    model: &FlowModel<T>,
    x: &Tensor<T>,
    cond: &Tensor<T>,
    sigma: f64,
    weight: f64,
    grads: &mut FlowModel<T>,
) -> Result<LossBreakdown, FlowError> {
    let (fr, cache) = model.forward_cached(x, cond)?;
    let loss = negative_log_likelihood(&fr, sigma)?;
    let n = loss.n_entries as f64;
    let dz_scale = weight / (sigma * sigma * n);
    let grad_z = fr.z.map(|v| v * T::lit(dz_scale));
    let jac = T::lit(-weight / n);
    model.backward(&cache, &grad_z, jac, jac, grads)?;
    Ok(loss)
}
