//! Local optimizer state machines used inside federated rounds.
//!
//! All updates are pure state-in/state-out transitions, so clients can be
//! processed in parallel without shared mutable state.

use crate::error::{Error, Result};
use crate::lmo::{lmo_exact, lmo_newton_schulz, LmoMode};
use crate::mat::{Mat, NormKind};
use serde::{Deserialize, Serialize};

/// Exponential moving average of stochastic gradients.
#[derive(Clone, Debug)]
pub struct MomentumState {
    pub m: Mat,
    pub alpha: f64,
}

impl MomentumState {
    pub fn zeros(rows: usize, cols: usize, alpha: f64) -> Self {
        MomentumState { m: Mat::zeros(rows, cols), alpha }
    }
}

/// `m' = (1 - alpha) m + alpha grad`.
pub fn momentum_update(state: &MomentumState, grad: &Mat) -> Result<MomentumState> {
    if state.m.shape() != grad.shape() {
        return Err(Error::Dimension(format!(
            "momentum buffer is {:?}, gradient is {:?}",
            state.m.shape(),
            grad.shape()
        )));
    }
    let mut m = state.m.scale(1.0 - state.alpha);
    m.axpy(state.alpha, grad);
    Ok(MomentumState { m, alpha: state.alpha })
}

/// Oracle applied to the bias-corrected momentum `m - c_local + c_global`.
///
/// `LmoMode::Off` keeps the correction but skips the oracle, returning the
/// negated input so the parameter update stays a descent step; combined with
/// `alpha = 1` this reproduces a plain SCAFFOLD step.
pub fn muon_corrected_direction(
    m: &Mat,
    c_local: &Mat,
    c_global: &Mat,
    kind: NormKind,
    mode: &LmoMode,
) -> Result<Mat> {
    if m.shape() != c_local.shape() || m.shape() != c_global.shape() {
        return Err(Error::Dimension("momentum and control variates must share a shape".into()));
    }
    let mut g = m - c_local;
    g.axpy(1.0, c_global);
    match mode {
        LmoMode::Exact => lmo_exact(&g, kind),
        LmoMode::NewtonSchulz(cfg) => Ok(lmo_newton_schulz(&g, cfg)),
        LmoMode::Off => Ok(-&g),
    }
}

/// Heavy-ball buffer for SGD-trained parameters.
#[derive(Clone, Debug)]
pub struct SgdMomentumState {
    pub buf: Mat,
    pub mu: f64,
}

impl SgdMomentumState {
    pub fn zeros(rows: usize, cols: usize, mu: f64) -> Self {
        SgdMomentumState { buf: Mat::zeros(rows, cols), mu }
    }
}

/// `buf' = mu buf + grad; param' = param - eta buf'`.
pub fn sgd_momentum_step(
    state: &SgdMomentumState,
    param: &Mat,
    grad: &Mat,
    eta: f64,
) -> Result<(SgdMomentumState, Mat)> {
    if param.shape() != grad.shape() || state.buf.shape() != grad.shape() {
        return Err(Error::Dimension("sgd step shapes disagree".into()));
    }
    let mut buf = state.buf.scale(state.mu);
    buf.axpy(1.0, grad);
    let mut next = param.clone();
    next.axpy(-eta, &buf);
    Ok((SgdMomentumState { buf, mu: state.mu }, next))
}

/// Bias-corrected Adam state.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub m: Mat,
    pub v: Mat,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
}

impl AdamState {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        AdamState {
            m: Mat::zeros(rows, cols),
            v: Mat::zeros(rows, cols),
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
        }
    }
}

pub fn adam_step(
    state: &AdamState,
    param: &Mat,
    grad: &Mat,
    eta: f64,
) -> Result<(AdamState, Mat)> {
    if param.shape() != grad.shape() || state.m.shape() != grad.shape() {
        return Err(Error::Dimension("adam step shapes disagree".into()));
    }
    let t = state.t + 1;
    let mut m = state.m.scale(state.beta1);
    m.axpy(1.0 - state.beta1, grad);
    let mut v = state.v.scale(state.beta2);
    for (vi, gi) in v.data_mut().iter_mut().zip(grad.data()) {
        *vi += (1.0 - state.beta2) * gi * gi;
    }
    let bc1 = 1.0 - state.beta1.powi(t as i32);
    let bc2 = 1.0 - state.beta2.powi(t as i32);
    let mut next = param.clone();
    for ((xi, mi), vi) in next.data_mut().iter_mut().zip(m.data()).zip(v.data()) {
        let mh = mi / bc1;
        let vh = vi / bc2;
        *xi -= eta * mh / (vh.sqrt() + state.eps);
    }
    Ok((AdamState { m, v, beta1: state.beta1, beta2: state.beta2, eps: state.eps, t }, next))
}

/// Shape and treatment class of one parameter tensor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerRole {
    Matrix,
    Vector,
    Scalar,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub role: LayerRole,
    pub rows: usize,
    pub cols: usize,
}

impl LayerSpec {
    pub fn matrix(rows: usize, cols: usize) -> Self {
        LayerSpec { role: LayerRole::Matrix, rows, cols }
    }

    pub fn vector(len: usize) -> Self {
        LayerSpec { role: LayerRole::Vector, rows: len, cols: 1 }
    }

    pub fn scalar() -> Self {
        LayerSpec { role: LayerRole::Scalar, rows: 1, cols: 1 }
    }
}

/// Dimension-dependent stepsize: matrix layers are scaled by
/// `sqrt(max(rows, cols))`, the usual convention for spectral-ball updates;
/// vector and scalar layers keep the base stepsize.
pub fn per_layer_stepsize(eta: f64, spec: &LayerSpec) -> f64 {
    match spec.role {
        LayerRole::Matrix => eta * (spec.rows.max(spec.cols) as f64).sqrt(),
        LayerRole::Vector | LayerRole::Scalar => eta,
    }
}
