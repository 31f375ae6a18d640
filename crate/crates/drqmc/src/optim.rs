//! Parameter-update rules: Adam and fixed-stepsize gradient descent, with
//! optional l-infinity projection.

use crate::error::{Error, Result};
use crate::net::ParamVector;
use crate::pde::GradEstimate;
use serde::{Deserialize, Serialize};

/// Adam hyperparameters. Defaults are the standard ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam moment estimates plus step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    pub hyper: AdamHyper,
}

impl AdamState {
    pub fn new(dim: usize, hyper: AdamHyper) -> Self {
        AdamState { m: vec![0.0; dim], v: vec![0.0; dim], t: 0, hyper }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }
}

/// One Adam update with bias correction. Pure: returns the new state and
/// parameters, leaving the inputs untouched.
pub fn adam_step(
    state: &AdamState,
    params: &ParamVector,
    grad: &GradEstimate,
) -> Result<(AdamState, ParamVector)> {
    let dim = params.len();
    if grad.g.len() != dim || state.m.len() != dim {
        return Err(Error::Config(format!(
            "dimension mismatch: params {dim}, grad {}, state {}",
            grad.g.len(),
            state.m.len()
        )));
    }
    if let Some(p) = grad.g.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!("gradient[{p}] = {}", grad.g[p])));
    }

    let AdamHyper { lr, beta1, beta2, eps } = state.hyper;
    let t = state.t + 1;
    let bc1 = 1.0 - beta1.powi(t as i32);
    let bc2 = 1.0 - beta2.powi(t as i32);

    let mut m = state.m.clone();
    let mut v = state.v.clone();
    let mut theta = params.as_slice().to_vec();
    for p in 0..dim {
        let g = grad.g[p];
        m[p] = beta1 * m[p] + (1.0 - beta1) * g;
        v[p] = beta2 * v[p] + (1.0 - beta2) * g * g;
        let m_hat = m[p] / bc1;
        let v_hat = v[p] / bc2;
        theta[p] -= lr * m_hat / (v_hat.sqrt() + eps);
    }

    let new_state = AdamState { m, v, t, hyper: state.hyper };
    let new_params = ParamVector::new(params.shape(), theta)?;
    Ok((new_state, new_params))
}

/// Plain gradient step `theta - alpha * g`.
pub fn fixed_step(params: &ParamVector, grad: &GradEstimate, alpha: f64) -> Result<ParamVector> {
    if alpha.is_nan() || alpha <= 0.0 {
        return Err(Error::Config(format!("stepsize must be positive, got {alpha}")));
    }
    if grad.g.len() != params.len() {
        return Err(Error::Config("gradient dimension mismatch".into()));
    }
    let theta: Vec<f64> = params
        .as_slice()
        .iter()
        .zip(&grad.g)
        .map(|(t, g)| t - alpha * g)
        .collect();
    ParamVector::new(params.shape(), theta)
}

/// Componentwise clamp of the parameters to the ball of l-infinity radius
/// `b_theta`.
pub fn project_inf_ball(params: &ParamVector, b_theta: f64) -> Result<ParamVector> {
    if b_theta.is_nan() || b_theta <= 0.0 {
        return Err(Error::Config(format!("projection radius must be positive, got {b_theta}")));
    }
    let theta: Vec<f64> = params
        .as_slice()
        .iter()
        .map(|t| t.clamp(-b_theta, b_theta))
        .collect();
    ParamVector::new(params.shape(), theta)
}
