//! Linear minimization oracles over unit norm balls.
//!
//! `lmo_exact` solves `argmin_{||Y|| <= 1} <G, Y>` in closed form for the
//! geometries that admit one. `lmo_newton_schulz` is the inexact spectral
//! oracle: an odd polynomial iteration that pushes every singular value of
//! the normalized input toward one. `effective_p` quantifies how far a given
//! iteration count gets, as the exponent of the Schatten norm the oracle
//! pairing is guaranteed to reach.

use crate::error::{Error, Result};
use crate::mat::{self, Mat, NormKind};

/// Coefficients and iteration count for the Newton–Schulz oracle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NsConfig {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub iters: usize,
}

impl NsConfig {
    /// The analyzed quintic coefficients (15/8, -5/4, 3/8). They satisfy
    /// `phi(1) = 1` and keep every singular value inside [0, 1], which is what
    /// the feasibility and pairing guarantees in this module rely on.
    pub fn analyzed(iters: usize) -> Self {
        NsConfig { a: 15.0 / 8.0, b: -5.0 / 4.0, c: 3.0 / 8.0, iters }
    }

    /// Scalar polynomial applied to each singular value per iteration.
    pub fn phi(&self, x: f64) -> f64 {
        let x2 = x * x;
        x * (self.a + x2 * (self.b + x2 * self.c))
    }

    /// phi iterated `self.iters` times.
    pub fn phi_iterated(&self, x: f64) -> f64 {
        let mut y = x;
        for _ in 0..self.iters {
            y = self.phi(y);
        }
        y
    }
}

impl Default for NsConfig {
    fn default() -> Self {
        NsConfig::analyzed(5)
    }
}

/// How a direction is obtained from a (corrected) momentum matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LmoMode {
    /// Closed-form oracle for the configured norm.
    Exact,
    /// Inexact spectral oracle.
    NewtonSchulz(NsConfig),
    /// No oracle: the raw negated input is used as the direction. This is the
    /// switch that turns the corrected update into a plain SCAFFOLD step.
    Off,
}

/// Exact LMO over the unit ball of `kind`.
///
/// Returns the zero matrix for zero input: the oracle is set-valued there and
/// zero is the only symmetric choice, which also means "no update" once the
/// gradient vanishes.
pub fn lmo_exact(g: &Mat, kind: NormKind) -> Result<Mat> {
    match kind {
        NormKind::Frobenius | NormKind::EuclideanVec => {
            let n = mat::norm(g, kind)?;
            if n == 0.0 {
                return Ok(Mat::zeros(g.rows(), g.cols()));
            }
            // divide rather than multiply by a reciprocal: -g / ||g|| holds exactly
            Ok(g.map(|x| -(x / n)))
        }
        NormKind::Spectral => {
            if g.is_zero() {
                return Ok(Mat::zeros(g.rows(), g.cols()));
            }
            let f = mat::svd(g)?;
            Ok(-&f.u.matmul(&f.vt))
        }
        NormKind::Trace | NormKind::Schatten(_) => Err(Error::UnsupportedNorm(format!(
            "exact lmo over the {kind} ball is not provided"
        ))),
    }
}

/// Inexact spectral LMO: normalize by the Frobenius norm, run the quintic
/// iteration `iters` times, negate.
///
/// Normalization always happens in the input's own orientation, so the T = 0
/// output equals `-g / ||g||_F` to the last bit.
pub fn lmo_newton_schulz(g: &Mat, cfg: &NsConfig) -> Mat {
    if g.is_zero() {
        return Mat::zeros(g.rows(), g.cols());
    }
    let fro = g.frobenius();
    -&ns_iterate(g.map(|v| v / fro), cfg)
}

/// The quintic iteration itself. When `rows > cols` it runs on the transpose
/// so the Gram product lives on the smaller side; the result is identical.
fn ns_iterate(x: Mat, cfg: &NsConfig) -> Mat {
    if x.rows() > x.cols() {
        return ns_iterate(x.transpose(), cfg).transpose();
    }
    let mut x = x;
    for _ in 0..cfg.iters {
        let gram = x.matmul(&x.transpose());
        let mut poly = gram.scale(cfg.b);
        poly.axpy(cfg.c, &gram.matmul(&gram));
        let mut next = x.scale(cfg.a);
        next.axpy(1.0, &poly.matmul(&x));
        x = next;
    }
    x
}

/// Effective Schatten exponent reached by `t` Newton–Schulz iterations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EffectiveP {
    pub kappa: f64,
    pub p: f64,
}

impl EffectiveP {
    /// Evaluate the exponent for a known kappa.
    ///
    /// `t = 0` gives exactly 2 and `kappa = 1` gives the limit value 1 for
    /// any `t >= 1`; both are taken before the formula to avoid 0/0.
    pub fn from_kappa(kappa: f64, t: usize) -> Self {
        assert!(kappa > 0.0 && kappa <= 1.0, "kappa must lie in (0, 1]");
        if t == 0 {
            return EffectiveP { kappa, p: 2.0 };
        }
        if kappa >= 1.0 {
            return EffectiveP { kappa, p: 1.0 };
        }
        let exponent = 1.5f64.powi(t as i32);
        let shrink = (1.0 - kappa).powf(exponent);
        let p = 1.0 + (-shrink).ln_1p() / kappa.ln();
        EffectiveP { kappa, p: p.clamp(1.0, 2.0) }
    }
}

/// Kappa and effective exponent of a singular-value list.
///
/// Values below the relative zero threshold are excluded; an input with no
/// remaining values has no defined oracle direction.
pub fn effective_p(singular_values: &[f64], t: usize) -> Result<EffectiveP> {
    let nz = mat::nonzero_values(singular_values);
    if nz.is_empty() {
        return Err(Error::UndefinedOracle(
            "effective p needs at least one non-zero singular value".into(),
        ));
    }
    let sum_sq: f64 = nz.iter().map(|x| x * x).sum();
    let min = nz.iter().cloned().fold(f64::INFINITY, f64::min);
    let kappa = (min / sum_sq.sqrt()).min(1.0);
    Ok(EffectiveP::from_kappa(kappa, t))
}

/// Demonstration pair for the oracle's bias: the averaged oracle outputs next
/// to the oracle of the average. The two generally differ.
pub fn lmo_bias_witness(ms: &[Mat], kind: NormKind) -> Result<(Mat, Mat)> {
    if ms.len() < 2 {
        return Err(Error::Dimension("bias witness needs at least two matrices".into()));
    }
    let shape = ms[0].shape();
    if ms.iter().any(|m| m.shape() != shape) {
        return Err(Error::Dimension("bias witness inputs must share a shape".into()));
    }
    let mut mean_of_lmos = Mat::zeros(shape.0, shape.1);
    let mut mean = Mat::zeros(shape.0, shape.1);
    let w = 1.0 / ms.len() as f64;
    for m in ms {
        mean_of_lmos.axpy(w, &lmo_exact(m, kind)?);
        mean.axpy(w, m);
    }
    Ok((mean_of_lmos, lmo_exact(&mean, kind)?))
}
