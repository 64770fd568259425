use crate::error::{Error, Result};
use crate::model::{ModelParams, PARAM_NAMES};
use crate::numcore::{Scalar, Tensor2};
use crate::train::TrainConfig;

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T: Scalar = f64> {
    pub step: u64,
    pub m: ModelParams<T>,
    pub v: ModelParams<T>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &ModelParams<T>) -> Self {
        let zeros = params.map(|_, t| Tensor2::zeros(t.rows(), t.cols()));
        Self {
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }
}

/// Euclidean norm over every gradient entry.
pub fn global_norm<T: Scalar>(grads: &ModelParams<T>) -> f64 {
    grads
        .tensors()
        .iter()
        .flat_map(|t| t.data().iter())
        .map(|v| {
            let v = v.to_f64_lossy();
            v * v
        })
        .sum::<f64>()
        .sqrt()
}

/// One bias-corrected Adam update. Gradients are first rescaled so their
/// global norm does not exceed `config.grad_clip_norm`.
///
/// Returns the gradient norm before clipping.
pub fn adam_step<T: Scalar>(
    params: &mut ModelParams<T>,
    grads: &ModelParams<T>,
    state: &mut AdamState<T>,
    config: &TrainConfig,
) -> Result<f64> {
    for ((name, p), g) in PARAM_NAMES
        .iter()
        .zip(params.tensors())
        .zip(grads.tensors())
    {
        if p.shape() != g.shape() {
            return Err(Error::shape("adam gradient", p.shape(), g.shape()));
        }
        if !g.is_finite() {
            return Err(Error::Training(format!(
                "non-finite gradient for parameter {name}"
            )));
        }
    }
    let norm = global_norm(grads);
    let clip = if norm > config.grad_clip_norm {
        config.grad_clip_norm / norm
    } else {
        1.0
    };

    state.step += 1;
    let (b1, b2) = (config.beta1, config.beta2);
    let step = i32::try_from(state.step).unwrap_or(i32::MAX);
    let m_correction = 1.0 - b1.powi(step);
    let v_correction = 1.0 - b2.powi(step);
    let (lr, eps) = (T::of(config.learning_rate), T::of(config.epsilon));
    let (b1t, b2t) = (T::of(b1), T::of(b2));
    let (mc, vc, clip) = (T::of(m_correction), T::of(v_correction), T::of(clip));

    for (((p, g), m), v) in params
        .tensors_mut()
        .into_iter()
        .zip(grads.tensors())
        .zip(state.m.tensors_mut())
        .zip(state.v.tensors_mut())
    {
        let p = p.data_mut();
        let (m, v) = (m.data_mut(), v.data_mut());
        for (i, &gi) in g.data().iter().enumerate() {
            let gi = gi * clip;
            m[i] = b1t * m[i] + (T::one() - b1t) * gi;
            v[i] = b2t * v[i] + (T::one() - b2t) * gi * gi;
            let m_hat = m[i] / mc;
            let v_hat = v[i] / vc;
            p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(norm)
}
