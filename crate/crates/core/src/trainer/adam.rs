use ndarray::{Array2, Zip};

use crate::encoder::{EncoderParams, GradientSet};

/// First and second moment estimates for every parameter matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Vec<Array2<f64>>,
    pub second_moment: Vec<Array2<f64>>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(params: &EncoderParams) -> Self {
        let zeros: Vec<Array2<f64>> = params.matrices().map(|m| Array2::zeros(m.raw_dim())).collect();
        Self {
            first_moment: zeros.clone(),
            second_moment: zeros,
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One Adam update with decoupled weight decay.
///
/// Parameters are first shrunk by `1 − lr·weight_decay`, then moved by the
/// bias-corrected Adam delta.
pub fn adam_step(
    params: &mut EncoderParams,
    grads: &GradientSet,
    state: &mut AdamState,
    learning_rate: f64,
    weight_decay: f64,
) {
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let decay = 1.0 - learning_rate * weight_decay;
    for (((p, g), m), v) in params
        .matrices_mut()
        .zip(grads.matrices())
        .zip(state.first_moment.iter_mut())
        .zip(state.second_moment.iter_mut())
    {
        assert_eq!(p.dim(), g.dim(), "gradient shape mismatch");
        Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p = *p * decay - learning_rate * m_hat / (v_hat.sqrt() + eps);
        });
    }
}
